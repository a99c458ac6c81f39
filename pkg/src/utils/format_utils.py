"""フォーマットユーティリティ"""
import math
import re
from typing import List

import numpy as np


# 0.05 から 0.50 まで 0.05 刻み
DEFAULT_NOISE_RATIOS = [round(0.05 * i, 2) for i in range(1, 11)]


def format_float(value: float) -> str:
    """
    ロケールに依存しない 17 桁表現 (double を往復できる)

    Args:
        value: 数値

    Returns:
        フォーマットされた文字列
    """
    return format(float(value), '.17g')


def format_cell(value) -> str:
    """CSV のセル。整数はそのまま、float は 17 桁、None は空文字"""
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def parse_ratios(ratios_str: str) -> List[float]:
    """
    ノイズ率のリスト文字列を変換

    Args:
        ratios_str: カンマ区切り ("0,0.1,0.2") または範囲 ("0.05:0.5:0.05")

    Returns:
        ノイズ率のリスト

    Raises:
        ValueError: 不正な形式の場合、または [0, 0.5] の外の値
    """
    text = ratios_str.strip()
    match = re.match(r'^([\d.]+):([\d.]+):([\d.]+)$', text)
    if match:
        start, stop, step = (float(g) for g in match.groups())
        if step <= 0.0:
            raise ValueError(f"Invalid ratio step: {step}")
        count = int(math.floor(round((stop - start) / step, 9))) + 1
        ratios = [round(start + i * step, 12) for i in range(count)]
    else:
        try:
            ratios = [float(part) for part in text.split(',') if part.strip()]
        except ValueError:
            raise ValueError(f"Invalid ratio list: {ratios_str}. Use format like '0,0.1,0.2' or '0.05:0.5:0.05'")
    if not ratios:
        raise ValueError("Ratio list is empty")
    for ratio in ratios:
        if not 0.0 <= ratio <= 0.5:
            raise ValueError(f"Noise ratio out of range [0, 0.5]: {ratio}")
    return ratios


def format_duration(seconds: float) -> str:
    """
    秒数を人間が読みやすい形式に変換

    Args:
        seconds: 秒数

    Returns:
        フォーマットされた時間文字列
    """
    if seconds < 1.0:
        return f"{seconds * 1000.0:.1f} ms"
    if seconds < 60.0:
        return f"{seconds:.1f} s"
    minutes, rest = divmod(seconds, 60.0)
    return f"{int(minutes)} min {rest:.0f} s"
