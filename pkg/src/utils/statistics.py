import sys
from typing import Any, Dict, Optional, Sequence, TextIO

import numpy as np

from utils.format_utils import format_duration


class Statistics:
    """評価結果の集計と表示"""

    @staticmethod
    def calculate(values: Sequence[float]) -> Dict[str, Any]:
        """
        値の列から要約統計量を計算

        Args:
            values: 誤差などの値の列 (None は失敗として数える)

        Returns:
            統計情報の辞書
        """
        finite = np.array([v for v in values if v is not None], dtype=np.float64)
        stats: Dict[str, Any] = {
            'count': int(finite.size),
            'failed': len(values) - int(finite.size),
            'mean': None,
            'std': None,
            'min': None,
            'max': None,
        }
        if finite.size:
            stats.update(
                mean=float(finite.mean()),
                std=float(finite.std()),
                min=float(finite.min()),
                max=float(finite.max()),
            )
        return stats

    @staticmethod
    def print_report(title: str, report: Dict[str, Any], elapsed: Optional[float] = None,
                     stream: TextIO = sys.stderr) -> None:
        """EvalReport.to_dict() 形式の結果を表示"""
        def cell(value):
            return 'n/a' if value is None else f"{value:.6g}"

        print("\n" + "=" * 50, file=stream)
        print(title, file=stream)
        print("=" * 50, file=stream)
        print(f"e:        {cell(report.get('e'))}", file=stream)
        print(f"sigma:    {cell(report.get('sigma'))}", file=stream)
        print(f"e_R:      {cell(report.get('e_R'))}", file=stream)
        print(f"sigma_R:  {cell(report.get('sigma_R'))}", file=stream)
        per_angle = report.get('per_angle', [])
        if per_angle:
            print(f"Angles:   {len(per_angle):,} ({report.get('failures', 0)} failed)", file=stream)
        if elapsed is not None:
            print(f"Elapsed:  {format_duration(elapsed)}", file=stream)
        print("=" * 50 + "\n", file=stream)
