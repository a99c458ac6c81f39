"""ガウスカーネル κ_G(x, y) = α·exp(−‖x − y‖² / σ²)"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import ConfigurationError, ShapeError
from kernels.base import PointKernel


DEFAULT_SIGMA_SQ_2D = 0.01
DEFAULT_SIGMA_SQ_3D = 0.05


@dataclass(frozen=True)
class GaussianKernelParams:
    alpha: float = 1.0
    sigma_sq: float = DEFAULT_SIGMA_SQ_2D

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not self.sigma_sq > 0.0:
            raise ConfigurationError(f"sigma_sq must be positive, got {self.sigma_sq}")

    @classmethod
    def for_dims(cls, dims: int, alpha: float = 1.0) -> 'GaussianKernelParams':
        """次元に応じた既定の帯域 (2D: 0.01, 3D: 0.05)"""
        return cls(alpha=alpha, sigma_sq=DEFAULT_SIGMA_SQ_2D if dims == 2 else DEFAULT_SIGMA_SQ_3D)


class GaussianKernel(PointKernel):
    """古典ガウスカーネル"""

    def __init__(self, params: GaussianKernelParams = GaussianKernelParams()):
        self.params = params

    def gram(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
        if xs.shape[1] != ys.shape[1]:
            raise ShapeError(f"dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
        return self.params.alpha * np.exp(-cdist(xs, ys, 'sqeuclidean') / self.params.sigma_sq)

    def describe(self) -> dict:
        return {
            'kernel': 'gaussian',
            'alpha': self.params.alpha,
            'sigma_sq': self.params.sigma_sq,
        }
