"""カーネル相関 (KC)・KC 損失・MMD・角度分布に対する学習損失

KC(M, S) = Σ_s Σ_m κ(T m, s) は位置合わせが良いほど大きい。
学習損失は MMD から θ に依存しない自己相関項を落とした
−2/(|M||S|)·E_{x∼p_θ}[KC(T_x M, S)]。
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.signal import find_peaks

from core.errors import EmptyBatchError, EmptyInputError, ShapeError
from kernels.base import PointKernel
from kernels.gaussian import GaussianKernel, GaussianKernelParams
from quantum.born_machine import AngleBinning, AngleDistribution
from registration.geometry import PointSet, RigidTransform, apply_transform


logger = logging.getLogger(__name__)

KernelLike = Union[PointKernel, GaussianKernelParams]


def as_kernel(k: KernelLike) -> PointKernel:
    if isinstance(k, GaussianKernelParams):
        return GaussianKernel(k)
    return k


def _points(samples) -> np.ndarray:
    if isinstance(samples, PointSet):
        return samples.points
    return np.atleast_2d(np.asarray(samples, dtype=np.float64))


def angle_transform(
    angle: float,
    dims: int,
    axis: Optional[str] = None,
    pivot: Optional[Sequence[float]] = None,
) -> RigidTransform:
    """ビン角度に対応する剛体変換 (pivot 指定時はその点を中心に回転)"""
    if pivot is None:
        return RigidTransform.rotation(angle, dims=dims, axis=axis)
    return RigidTransform.about_point(angle, pivot, dims=dims, axis=axis)


def kc_point_pair(x: Sequence[float], y: Sequence[float], k: KernelLike) -> float:
    """2 点間の KC"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"points must have the same dimension, got {x.shape} and {y.shape}")
    return as_kernel(k)(x, y)


def kc_sets(model: PointSet, scene: PointSet, transform: RigidTransform, k: KernelLike) -> float:
    """Σ_{s∈S} Σ_{m∈M} κ(T·m, s)"""
    if len(model) == 0 or len(scene) == 0:
        raise EmptyInputError("kernel correlation needs nonempty point sets")
    if model.dims != scene.dims:
        raise ShapeError(f"dimension mismatch: {model.dims}D vs {scene.dims}D")
    moved = apply_transform(transform, model)
    return as_kernel(k).correlation(moved.points, scene.points)


def kc_loss(model: PointSet, scene: PointSet, transform: RigidTransform, k: KernelLike) -> float:
    return -kc_sets(model, scene, transform, k)


@dataclass(frozen=True, eq=False)
class KcLandscape:
    """回転角ごとの KC(T_angle M, S)"""

    angles: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if angles.shape != values.shape or angles.ndim != 1:
            raise ShapeError("angles and values must be 1-D arrays of the same length")
        if angles.size > 1 and np.any(np.diff(angles) <= 0.0):
            raise ShapeError("angles must be strictly increasing")
        object.__setattr__(self, 'angles', angles)
        object.__setattr__(self, 'values', values)

    def rows(self) -> List[tuple]:
        return list(zip(self.angles.tolist(), self.values.tolist()))

    def local_maxima(self, min_prominence: float = 0.25) -> List[int]:
        """周期境界を考慮した極大のインデックス

        離散化された形状の KC はサンプリングによる細かな波打ちを含むため、
        値域の min_prominence 倍以上の突出度を持つ山だけを数える。
        """
        n = self.values.size
        span = float(self.values.max() - self.values.min()) if n else 0.0
        if n < 3 or span <= 1e-12 * max(1.0, float(np.abs(self.values).max())):
            return []
        tiled = np.concatenate([self.values, self.values, self.values])
        peaks, _ = find_peaks(tiled, prominence=min_prominence * span)
        return sorted({int(p) - n for p in peaks if n <= p < 2 * n})

    def argmax_angles(self, count: int = 1) -> np.ndarray:
        """KC の大きい順に count 個の極大の角度"""
        maxima = self.local_maxima(min_prominence=0.0) or [int(np.argmax(self.values))]
        ranked = sorted(maxima, key=lambda i: (-self.values[i], i))
        return self.angles[ranked[:count]]


def kc_landscape(
    model: PointSet,
    scene: PointSet,
    angles: Sequence[float],
    k: KernelLike,
    axis: Optional[str] = None,
    pivot: Optional[Sequence[float]] = None,
) -> KcLandscape:
    kernel = as_kernel(k)
    values = [
        kc_sets(model, scene, angle_transform(angle, model.dims, axis, pivot), kernel)
        for angle in angles
    ]
    return KcLandscape(np.asarray(angles, dtype=np.float64), np.asarray(values))


def bin_correlations(
    model: PointSet,
    scene: PointSet,
    binning: AngleBinning,
    k: KernelLike,
    axis: Optional[str] = None,
    pivot: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """全ビン中央値での KC。θ に依存しないので学習前に 1 度だけ計算する"""
    landscape = kc_landscape(model, scene, binning.medians(), k, axis=axis, pivot=pivot)
    logger.debug(
        "KC cache for %d bins: min=%.6g max=%.6g",
        binning.bin_count, landscape.values.min(), landscape.values.max(),
    )
    return landscape.values


def mmd_full(p_samples, q_samples, k: KernelLike) -> float:
    """MMD² の V 統計量 E_PP[κ] + E_QQ[κ] − 2·E_PQ[κ] (i = j の項を含む全ペア平均)"""
    p = _points(p_samples)
    q = _points(q_samples)
    if p.shape[0] == 0 or q.shape[0] == 0 or p.size == 0 or q.size == 0:
        raise EmptyInputError("MMD needs nonempty sample lists")
    if p.shape[1] != q.shape[1]:
        raise ShapeError(f"dimension mismatch: {p.shape[1]} vs {q.shape[1]}")
    kernel = as_kernel(k)
    return float(
        kernel.gram(p, p).mean() + kernel.gram(q, q).mean() - 2.0 * kernel.gram(p, q).mean()
    )


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """回路から測定したビン (ビット列) インデックスの列 X"""

    binning: AngleBinning
    indices: np.ndarray

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        if indices.size == 0:
            raise EmptyBatchError("sample batch is empty")
        if np.any(indices < 0) or np.any(indices >= self.binning.bin_count):
            raise ShapeError("sample indices out of range for the binning")
        object.__setattr__(self, 'indices', indices)

    def __len__(self) -> int:
        return int(self.indices.size)


def loss_scale(model: PointSet, scene: PointSet) -> float:
    """2 / (|M|·|S|)。|M| = |S| = N なら 2/N²"""
    return 2.0 / (len(model) * len(scene))


def training_loss(
    model: PointSet,
    scene: PointSet,
    dist_or_batch: Union[AngleDistribution, SampleBatch],
    k: KernelLike,
    axis: Optional[str] = None,
    pivot: Optional[Sequence[float]] = None,
    correlations: Optional[np.ndarray] = None,
) -> float:
    """定数項を落とした MMD 損失

    厳密モード: −2/(|M||S|)·Σ_x p_θ(x)·KC(T_x M, S)
    サンプルモード: −2/(|M||S|·|X|)·Σ_{x∈X} KC(T_x M, S)
    """
    if len(model) == 0 or len(scene) == 0:
        raise EmptyInputError("training loss needs nonempty point sets")
    binning = dist_or_batch.binning
    if correlations is None:
        correlations = bin_correlations(model, scene, binning, k, axis=axis, pivot=pivot)
    if isinstance(dist_or_batch, SampleBatch):
        expectation = float(correlations[dist_or_batch.indices].mean())
    else:
        expectation = float(dist_or_batch.probabilities @ correlations)
    return -loss_scale(model, scene) * expectation
