"""CSV ライター"""
from typing import Iterable, Sequence

from utils.format_utils import format_cell
from writers.base import ResultWriter


class CsvWriter(ResultWriter):
    """ヘッダ 1 行 + データ行。数値は 17 桁の固定表現で書く"""

    def __init__(self, header: Sequence[str]):
        self.header = list(header)

    def render(self, content: Iterable[Sequence]) -> str:
        lines = [','.join(self.header)]
        for row in content:
            if len(row) != len(self.header):
                raise ValueError(f"row has {len(row)} cells but the header has {len(self.header)}")
            lines.append(','.join(format_cell(v) for v in row))
        return '\n'.join(lines) + '\n'
