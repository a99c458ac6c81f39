"""パラメータシフト則の勾配と Adam による Born Machine の学習"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from core.config import TrainingConfig
from core.errors import ShapeError, TrainingDivergedError, UnsupportedConfigurationError
from kernels.correlation import KernelLike, SampleBatch, bin_correlations, loss_scale, training_loss
from quantum.born_machine import (
    AngleBinning,
    AngleDistribution,
    DEFAULT_GAMMA,
    forward,
    shifted_distributions,
    zero_params,
)
from quantum.statevector import CircuitParams, sample_indices
from registration.geometry import PointSet


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loss: float
    lr: float
    ms: float
    snapshot: Optional[Tuple[float, ...]] = None


@dataclass
class TrainingTrace:
    """1 反復ごとに 1 レコード。loss は更新前のパラメータで評価した値"""

    records: List[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    @property
    def learning_rates(self) -> np.ndarray:
        return np.array([r.lr for r in self.records])

    def rows(self) -> List[Tuple[int, float, float, float]]:
        """CSV の iter,loss,lr,ms 行"""
        return [(r.iteration, r.loss, r.lr, r.ms) for r in self.records]

    def snapshot_rows(self) -> List[Tuple[int, int, float]]:
        """iter,bin,prob 行"""
        rows = []
        for r in self.records:
            if r.snapshot is None:
                continue
            rows.extend((r.iteration, b, p) for b, p in enumerate(r.snapshot))
        return rows


def zero_init(n: int) -> CircuitParams:
    """J = 0, b = 0, Γ = π/4。forward の結果は一様分布"""
    return zero_params(n, gamma=DEFAULT_GAMMA)


def _check_qaoa(params: CircuitParams) -> None:
    if not params.is_qaoa:
        raise UnsupportedConfigurationError("training requires QAOA parameters (delta = sigma = 0)")


def gradient(
    params: CircuitParams,
    model: PointSet,
    scene: PointSet,
    k: KernelLike,
    cfg: TrainingConfig,
    axis: Optional[str] = None,
    pivot: Optional[Sequence[float]] = None,
    correlations: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """学習損失の勾配 (長さ n(n+1)/2)

    ∂L/∂θ_k = 2/(|M||S|)·(E_{p⁻}[KC] − E_{p⁺}[KC])。sampled モードでは p⁺, p⁻ から
    batch_size 個ずつ測定した標本平均を使う。rng を省略すると cfg.seed から作る。
    """
    _check_qaoa(params)
    binning = AngleBinning(params.n_qubits)
    if correlations is None:
        correlations = bin_correlations(model, scene, binning, k, axis=axis, pivot=pivot)
    if correlations.shape != (binning.bin_count,):
        raise ShapeError(f"expected {binning.bin_count} cached correlations, got {correlations.shape}")
    if cfg.mode == 'sampled' and rng is None:
        rng = np.random.default_rng(cfg.seed)

    scale = loss_scale(model, scene)
    grad = np.zeros(params.trainable_count)
    for index in range(params.trainable_count):
        plus, minus = shifted_distributions(params, index)
        if cfg.mode == 'exact':
            e_plus = float(plus.probabilities @ correlations)
            e_minus = float(minus.probabilities @ correlations)
        else:
            x_plus = sample_indices(plus.to_output_distribution(), cfg.batch_size, rng)
            x_minus = sample_indices(minus.to_output_distribution(), cfg.batch_size, rng)
            e_plus = float(correlations[x_plus].mean())
            e_minus = float(correlations[x_minus].mean())
        grad[index] = scale * (e_minus - e_plus)
    return grad


class Trainer:
    """Adam + StepLR で CircuitParams を最適化する

    KC はビン中央値ごとに 1 度だけ計算してキャッシュする。
    勾配は numpy で計算し、float64 テンソルの .grad に入れて torch の最適化器に渡す。
    """

    def __init__(
        self,
        model: PointSet,
        scene: PointSet,
        k: KernelLike,
        cfg: TrainingConfig = TrainingConfig(),
        axis: Optional[str] = None,
        pivot: Optional[Sequence[float]] = None,
    ):
        self.model = model
        self.scene = scene
        self.kernel = k
        self.cfg = cfg
        self.axis = axis
        self.pivot = pivot
        self._correlations = {}

    def correlations(self, binning: AngleBinning) -> np.ndarray:
        cached = self._correlations.get(binning.n_qubits)
        if cached is None:
            cached = bin_correlations(self.model, self.scene, binning, self.kernel,
                                      axis=self.axis, pivot=self.pivot)
            self._correlations[binning.n_qubits] = cached
        return cached

    def _loss(self, dist: AngleDistribution, correlations: np.ndarray,
              rng: Optional[np.random.Generator]) -> float:
        if self.cfg.mode == 'sampled':
            batch = SampleBatch(dist.binning,
                                sample_indices(dist.to_output_distribution(), self.cfg.batch_size, rng))
            return training_loss(self.model, self.scene, batch, self.kernel, correlations=correlations)
        return training_loss(self.model, self.scene, dist, self.kernel, correlations=correlations)

    def train(self, init: CircuitParams) -> Tuple[CircuitParams, TrainingTrace]:
        _check_qaoa(init)
        cfg = self.cfg
        trace = TrainingTrace()
        if cfg.iterations == 0:
            return init, trace

        binning = AngleBinning(init.n_qubits)
        correlations = self.correlations(binning)
        rng = np.random.default_rng(cfg.seed) if cfg.mode == 'sampled' else None

        theta = torch.tensor(init.trainable_vector(), dtype=torch.float64, requires_grad=True)
        optimizer = torch.optim.Adam(
            [theta],
            lr=cfg.learning_rate_init,
            betas=(cfg.adam_beta1, cfg.adam_beta2),
            eps=cfg.adam_eps,
            weight_decay=cfg.weight_decay,
        )
        scheduler = torch.optim.lr_scheduler.StepLR(
            optimizer, step_size=cfg.decay_every, gamma=cfg.decay_factor
        )

        params = init
        for iteration in range(cfg.iterations):
            start = time.perf_counter()
            lr = float(optimizer.param_groups[0]['lr'])
            params = init.with_trainable(theta.detach().numpy())
            dist = forward(params)
            loss = self._loss(dist, correlations, rng)
            grad = gradient(params, self.model, self.scene, self.kernel, cfg,
                            correlations=correlations, rng=rng)
            if not math.isfinite(loss):
                raise TrainingDivergedError(iteration, f"loss is {loss}")
            if not np.all(np.isfinite(grad)):
                raise TrainingDivergedError(iteration, "gradient is not finite")

            theta.grad = torch.from_numpy(grad.copy())
            optimizer.step()
            scheduler.step()

            snapshot = None
            if cfg.snapshot_every and iteration % cfg.snapshot_every == 0:
                snapshot = tuple(float(p) for p in dist.probabilities)
            elapsed = (time.perf_counter() - start) * 1000.0
            trace.append(TraceRecord(iteration, loss, lr, elapsed, snapshot))
            if iteration % 50 == 0:
                logger.debug("iter %d: loss=%.6g lr=%.3g", iteration, loss, lr)

        params = init.with_trainable(theta.detach().numpy())
        if not np.all(np.isfinite(params.trainable_vector())):
            raise TrainingDivergedError(cfg.iterations - 1, "parameters are not finite")
        logger.info("Training finished after %d iterations (final loss %.6g)",
                    cfg.iterations, trace.records[-1].loss)
        return params, trace


def train(
    model: PointSet,
    scene: PointSet,
    init: CircuitParams,
    cfg: TrainingConfig,
    k: KernelLike,
    axis: Optional[str] = None,
    pivot: Optional[Sequence[float]] = None,
) -> Tuple[CircuitParams, TrainingTrace]:
    """cfg.iterations 回の Adam 更新を行い、最終パラメータとトレースを返す"""
    return Trainer(model, scene, k, cfg, axis=axis, pivot=pivot).train(init)
