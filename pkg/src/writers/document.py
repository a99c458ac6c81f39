"""JSON ライター"""
import json
import math
from typing import Any

import numpy as np

from writers.base import ResultWriter


def to_jsonable(value: Any) -> Any:
    """numpy の値を素の Python 値に直す。NaN と無限大は null"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class JsonWriter(ResultWriter):
    """インデント付き JSON (float は最短の往復可能表現)"""

    def render(self, content: Any) -> str:
        return json.dumps(to_jsonable(content), indent=2, ensure_ascii=False) + '\n'
