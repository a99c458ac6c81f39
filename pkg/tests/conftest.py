"""pytest設定ファイル

このファイルは全テストで共有される設定とfixtureを定義します。
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# src をPythonパスに追加 (pytest.ini の pythonpath と同じ)
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from registration.geometry import PointSet, RigidTransform, apply_transform  # noqa: E402
from registration.shapes import make_polygon  # noqa: E402


@pytest.fixture
def square():
    """単位円に内接する正方形 (各辺 10 点、計 36 点)"""
    return make_polygon(4, 10)


@pytest.fixture
def rotated_square(square):
    """5π/16 回転した正方形"""
    return apply_transform(RigidTransform.rotation(5 * math.pi / 16), square)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_points(tmp_path):
    """点群を CSV に書き出すfixture"""
    def _write(name, points, header=True):
        path = tmp_path / name
        points = np.asarray(points.points if isinstance(points, PointSet) else points)
        lines = []
        if header:
            lines.append(','.join(['x', 'y', 'z'][:points.shape[1]]))
        lines.extend(','.join(format(v, '.17g') for v in row) for row in points)
        path.write_text('\n'.join(lines) + '\n')
        return path
    return _write
