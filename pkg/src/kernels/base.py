"""点カーネルの基底クラス"""
from abc import ABC, abstractmethod

import numpy as np


class PointKernel(ABC):
    """点どうしの正定値カーネル κ(x, y) の抽象基底クラス"""

    #: True のカーネルは単位立方体 [0, 1)^d に正規化した座標を要求する
    requires_unit_cube: bool = False

    @abstractmethod
    def gram(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """
        xs (N, d) と ys (N', d) の全ペアのカーネル値を計算

        Args:
            xs: 点の配列
            ys: 点の配列

        Returns:
            (N, N') のカーネル行列
        """

    def __call__(self, x: np.ndarray, y: np.ndarray) -> float:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        return float(self.gram(x, y)[0, 0])

    def correlation(self, xs: np.ndarray, ys: np.ndarray) -> float:
        """Σ_i Σ_j κ(xs_i, ys_j)"""
        return float(self.gram(xs, ys).sum())

    def describe(self) -> dict:
        """マニフェスト用の設定表現"""
        return {'kernel': type(self).__name__}
