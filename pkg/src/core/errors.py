"""qkc 全体で共有する例外クラス"""
from typing import Optional


class QkcError(Exception):
    """qkc の例外の基底クラス"""


class ShapeError(QkcError, ValueError):
    """次元・長さの不一致"""


class SizeError(QkcError, ValueError):
    """量子ビット数がシミュレーション可能な範囲外"""


class EmptyInputError(QkcError, ValueError):
    """空の点群・空のサンプル列"""


class EmptyBatchError(QkcError, ValueError):
    """サンプル数 0 のバッチ"""


class InvariantViolationError(QkcError):
    """正規化などの不変条件違反"""


class UnsupportedConfigurationError(QkcError):
    """v1 で扱わない回路構成 (Δ, Σ ≠ 0 など)"""


class ConfigurationError(QkcError, ValueError):
    """設定値が不正"""


class DegenerateGeometryError(QkcError):
    """回転軸上に全点が乗っているなど、解が定まらない配置"""


class MissingDataError(QkcError):
    """データセットが見つからない"""


class PointSetFormatError(QkcError):
    """点群ファイルの読み込み・解析に失敗"""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class TrainingDivergedError(QkcError):
    """損失または勾配が有限でなくなった"""

    def __init__(self, iteration: int, detail: Optional[str] = None):
        message = f"Training diverged at iteration {iteration}"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self.iteration = iteration
