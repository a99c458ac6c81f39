"""学習による回転推定と、角度スイープ・ノイズ曲線による評価"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from core.config import TrainingConfig
from core.errors import ConfigurationError, QkcError
from kernels.base import PointKernel
from kernels.correlation import KernelLike, as_kernel
from quantum.born_machine import AngleBinning, DEFAULT_GAMMA, forward, mode_angle, zero_params
from quantum.statevector import CircuitParams
from registration.geometry import (
    PointSet,
    RigidTransform,
    alignment_error,
    apply_transform,
    normalize_to_unit_cube,
    resolve_translation,
    transformation_discrepancy,
)
from registration.shapes import add_noise, rotated_copy
from training.trainer import Trainer, TrainingTrace
from utils.statistics import Statistics


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PreparedPair:
    """学習に渡す座標系の (モデル, シーン) と回転中心"""

    model: PointSet
    scene: PointSet
    pivot: Optional[np.ndarray]
    scale: float


def prepare_pair(model: PointSet, scene: PointSet, kernel: PointKernel) -> PreparedPair:
    """ガウスカーネルは原点、量子カーネルは単位立方体の中心 (0.5, …) に重心を合わせる"""
    if kernel.requires_unit_cube:
        m, s, factor = normalize_to_unit_cube(model, scene)
        return PreparedPair(m, s, np.full(model.dims, 0.5), factor)
    resolved = resolve_translation(model, scene)
    return PreparedPair(resolved.model, resolved.scene, None, 1.0)


@dataclass(frozen=True, eq=False)
class RotationEstimate:
    angle: float
    params: CircuitParams
    trace: TrainingTrace


def estimate_rotation(
    model: PointSet,
    scene: PointSet,
    n_qubits: int,
    k: KernelLike,
    cfg: TrainingConfig,
    axis: Optional[str] = None,
    gamma: float = DEFAULT_GAMMA,
) -> RotationEstimate:
    """ゼロ初期化から学習し、出力分布の最頻ビンの中央値を回転角とする"""
    kernel = as_kernel(k)
    pair = prepare_pair(model, scene, kernel)
    trainer = Trainer(pair.model, pair.scene, kernel, cfg,
                      axis=axis if model.dims == 3 else None, pivot=pair.pivot)
    params, trace = trainer.train(zero_params(n_qubits, gamma=gamma))
    return RotationEstimate(mode_angle(forward(params)), params, trace)


@dataclass(frozen=True, eq=False)
class Registration:
    """元の座標系での推定変換 (T m = R m + t) と位置合わせ後のモデル"""

    transform: RigidTransform
    aligned: PointSet
    estimate: RotationEstimate


def register(
    model: PointSet,
    scene: PointSet,
    n_qubits: int,
    k: KernelLike,
    cfg: TrainingConfig,
    axis: Optional[str] = None,
    gamma: float = DEFAULT_GAMMA,
) -> Registration:
    """並進は重心合わせ、回転は学習した分布の最頻角で決める"""
    estimate = estimate_rotation(model, scene, n_qubits, k, cfg, axis=axis, gamma=gamma)
    dims = model.dims
    rotation = RigidTransform.rotation(estimate.angle, dims=dims, axis=axis if dims == 3 else None)
    translation = scene.centroid() - rotation.rotation_matrix @ model.centroid()
    transform = RigidTransform(estimate.angle, rotation.axis if dims == 3 else None, translation, dims)
    return Registration(transform, apply_transform(transform, model), estimate)


def sweep_angles(sweep: str, n_qubits: int) -> np.ndarray:
    """'bins' は全ビン中央値、'uniform:K' は [0, 2π) の K 等分"""
    if sweep == 'bins':
        return AngleBinning(n_qubits).medians()
    if sweep.startswith('uniform:'):
        try:
            count = int(sweep.split(':', 1)[1])
        except ValueError:
            raise ConfigurationError(f"invalid sweep grid: {sweep!r}")
        if count < 1:
            raise ConfigurationError(f"sweep grid needs at least one angle, got {count}")
        return 2.0 * math.pi * np.arange(count) / count
    raise ConfigurationError(f"sweep must be 'bins' or 'uniform:K', got {sweep!r}")


@dataclass(frozen=True)
class AngleRecord:
    gt_angle: float
    estimated_angle: Optional[float] = None
    e: Optional[float] = None
    e_R: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class EvalReport:
    """e, sigma は位置合わせ誤差、e_R, sigma_R は変換の直交性誤差の平均と標準偏差"""

    e: Optional[float]
    sigma: Optional[float]
    e_R: Optional[float]
    sigma_R: Optional[float]
    per_angle: Tuple[AngleRecord, ...]

    @classmethod
    def from_records(cls, records: Sequence[AngleRecord]) -> 'EvalReport':
        succeeded = [r for r in records if r.ok]
        e_stats = Statistics.calculate([r.e for r in succeeded])
        r_stats = Statistics.calculate([r.e_R for r in succeeded])
        return cls(e_stats['mean'], e_stats['std'], r_stats['mean'], r_stats['std'], tuple(records))

    @property
    def failures(self) -> int:
        return sum(1 for r in self.per_angle if not r.ok)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'e': self.e,
            'sigma': self.sigma,
            'e_R': self.e_R,
            'sigma_R': self.sigma_R,
            'failures': self.failures,
            'per_angle': [r.to_dict() for r in self.per_angle],
        }


def _child_seeds(seed: int, count: int) -> List[int]:
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(count)]


def _evaluate_angle(
    shape: PointSet,
    gt_angle: float,
    n_qubits: int,
    kernel: PointKernel,
    cfg: TrainingConfig,
    axis: Optional[str],
    gamma: float,
) -> AngleRecord:
    axis = axis if shape.dims == 3 else None
    try:
        model = shape.translated(-shape.centroid())
        scene = rotated_copy(model, gt_angle, axis=axis)
        estimate = estimate_rotation(model, scene, n_qubits, kernel, cfg, axis=axis, gamma=gamma)
        rotation = RigidTransform.rotation(estimate.angle, dims=shape.dims, axis=axis)
        return AngleRecord(
            gt_angle=float(gt_angle),
            estimated_angle=estimate.angle,
            e=alignment_error(model, scene, rotation),
            e_R=transformation_discrepancy(rotation),
        )
    except (QkcError, ValueError, ArithmeticError) as e:
        logger.warning("Sweep angle %.17g failed: %s", gt_angle, e)
        return AngleRecord(gt_angle=float(gt_angle), error=f"{type(e).__name__}: {e}")


def sweep_evaluate(
    shape: PointSet,
    n_qubits: int,
    k: KernelLike,
    cfg: TrainingConfig,
    angles: Optional[Sequence[float]] = None,
    axis: Optional[str] = None,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
) -> EvalReport:
    """正解角ごとにシーンを合成して学習し、誤差を集計する

    角度ごとのジョブは独立で、結果は投入順に並ぶ。各ジョブのシードは cfg.seed から
    SeedSequence で派生させる。
    """
    if len(shape) == 0:
        raise ConfigurationError("cannot sweep an empty shape")
    kernel = as_kernel(k)
    if angles is None:
        angles = AngleBinning(n_qubits).medians()
    seeds = _child_seeds(cfg.seed, len(angles))
    records = Parallel(n_jobs=threads)(
        delayed(_evaluate_angle)(
            shape, angle, n_qubits, kernel, dataclasses.replace(cfg, seed=seed), axis, gamma
        )
        for angle, seed in zip(angles, seeds)
    )
    report = EvalReport.from_records(records)
    logger.info("Sweep over %d angles: e=%s sigma=%s (%d failed)",
                len(records), report.e, report.sigma, report.failures)
    return report


@dataclass(frozen=True)
class NoiseCurve:
    """ノイズ率ごとの位置合わせ誤差の平均と標準偏差"""

    ratios: Tuple[float, ...]
    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    runs: int

    def rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.ratios, self.means, self.stds))

    def pooled_std(self) -> float:
        return float(math.sqrt(np.mean(np.square(self.stds)))) if self.stds else 0.0

    def summary(self) -> Dict[str, Any]:
        """平均誤差が単調非減少か (厳密に / プールした標準偏差の幅の中で)"""
        pooled = self.pooled_std()
        steps = list(zip(self.means, self.means[1:]))
        return {
            'runs_per_ratio': self.runs,
            'pooled_std': pooled,
            'non_decreasing': all(b >= a for a, b in steps),
            'non_decreasing_within_std': all(b >= a - pooled for a, b in steps),
        }


def _noise_run(
    model: PointSet,
    ratio: float,
    seed: int,
    n_qubits: int,
    kernel: PointKernel,
    cfg: TrainingConfig,
    sigma_noise: Optional[float],
    mode: str,
    axis: Optional[str],
    gamma: float,
) -> float:
    rng = np.random.default_rng(seed)
    binning = AngleBinning(n_qubits)
    gt_angle = binning.median(int(rng.integers(binning.bin_count)))
    clean = rotated_copy(model, gt_angle, axis=axis)
    noisy = add_noise(clean, ratio, sigma_noise=sigma_noise, seed=rng, mode=mode)
    estimate = estimate_rotation(model, noisy, n_qubits, kernel, cfg, axis=axis, gamma=gamma)
    rotation = RigidTransform.rotation(estimate.angle, dims=model.dims, axis=axis)
    return alignment_error(model, clean, rotation)


def noise_curve(
    shape: PointSet,
    ratios: Sequence[float],
    n_qubits: int,
    k: KernelLike,
    cfg: TrainingConfig,
    runs: int = 50,
    sigma_noise: Optional[float] = None,
    mode: str = 'outliers',
    axis: Optional[str] = None,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
) -> NoiseCurve:
    """ノイズ率ごとに runs 回、ランダムなビン中央値の回転とノイズを与えて学習する

    誤差はノイズを加える前のシーンに対して測る。
    """
    if runs < 1:
        raise ConfigurationError(f"runs must be positive, got {runs}")
    kernel = as_kernel(k)
    axis = axis if shape.dims == 3 else None
    model = shape.translated(-shape.centroid())
    if sigma_noise is None:
        sigma_noise = 0.3 * model.radius()
    ratio_seeds = np.random.SeedSequence(cfg.seed).spawn(len(ratios))
    means, stds = [], []
    for ratio, ratio_seed in zip(ratios, ratio_seeds):
        seeds = [int(c.generate_state(1)[0]) for c in ratio_seed.spawn(runs)]
        errors = Parallel(n_jobs=threads)(
            delayed(_noise_run)(model, float(ratio), seed, n_qubits, kernel,
                                dataclasses.replace(cfg, seed=seed),
                                sigma_noise, mode, axis, gamma)
            for seed in seeds
        )
        means.append(float(np.mean(errors)))
        stds.append(float(np.std(errors)))
        logger.info("Noise ratio %.3g: mean e=%.6g std=%.6g", ratio, means[-1], stds[-1])
    return NoiseCurve(tuple(float(r) for r in ratios), tuple(means), tuple(stds), runs)
