"""点群・メッシュファイルの読み書きとデータセットディレクトリのスキャン"""
import hashlib
import json
import logging
import os
import re
from typing import Dict, List, Optional, Sequence, Union

import chardet
import numpy as np
import pathspec

from core.errors import PointSetFormatError, ShapeError
from registration.geometry import PointSet
from registration.shapes import TriangleMesh, sample_mesh


logger = logging.getLogger(__name__)

POINT_EXTENSIONS = ('.csv', '.txt', '.xyz')
MESH_EXTENSIONS = ('.off',)

# OFF メッシュから取り出す既定の点数
DEFAULT_MESH_SAMPLES = 100

_SEPARATOR = re.compile(r'[,\s;]+')


def read_text(path: str) -> str:
    """chardet で文字コードを判定してテキストとして読む"""
    try:
        with open(path, 'rb') as f:
            raw_data = f.read()
    except OSError as e:
        raise PointSetFormatError(path, f"cannot read file ({e.strerror or e})") from e
    if not raw_data:
        return ''
    encoding = chardet.detect(raw_data[:65536])['encoding'] or 'utf-8'
    try:
        text = raw_data.decode(encoding)
    except (LookupError, UnicodeDecodeError):
        logger.debug("Decoding %s as %s failed, falling back to utf-8", path, encoding)
        text = raw_data.decode('utf-8', errors='replace')
    return text.lstrip("\ufeff")


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def _data_lines(text: str) -> List[str]:
    lines = []
    for line in text.splitlines():
        line = line.split('#', 1)[0].strip()
        if line:
            lines.append(line)
    return lines


def _parse_row(line: str) -> List[float]:
    return [float(v) for v in _SEPARATOR.split(line.strip()) if v]


def parse_point_table(text: str, path: str = '<string>') -> np.ndarray:
    """x,y[,z] の行を読む。先頭行が数値でなければヘッダとして読み飛ばす"""
    lines = _data_lines(text)
    rows = []
    for number, line in enumerate(lines):
        try:
            rows.append(_parse_row(line))
        except ValueError:
            if number == 0:
                continue
            raise PointSetFormatError(path, f"non-numeric value in row {number + 1}: {line!r}")
    if not rows:
        raise PointSetFormatError(path, "no points found")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (2, 3):
        raise PointSetFormatError(path, "every row must have 2 or 3 coordinates")
    return np.array(rows, dtype=np.float64)


def parse_point_json(text: str, path: str = '<string>') -> np.ndarray:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise PointSetFormatError(path, f"invalid JSON ({e})") from e
    if isinstance(data, dict) and 'points' in data:
        data = data['points']
    try:
        points = np.array(data, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise PointSetFormatError(path, "expected an array of coordinate arrays") from e
    if points.ndim != 2 or points.shape[1] not in (2, 3) or points.shape[0] == 0:
        raise PointSetFormatError(path, f"expected a nonempty array of 2D/3D points, got shape {points.shape}")
    return points


def parse_off(text: str, path: str = '<string>') -> TriangleMesh:
    """OFF 形式のメッシュ。多角形の面は扇形に三角形分割する"""
    lines = _data_lines(text)
    if not lines or not lines[0].upper().startswith('OFF'):
        raise PointSetFormatError(path, "missing OFF header")
    # "OFF8 6 0" のようにヘッダと個数が同じ行にある書き方もある
    header_rest = lines[0][3:].strip()
    body = ([header_rest] if header_rest else []) + lines[1:]
    try:
        n_vertices, n_faces = (int(v) for v in body[0].split()[:2])
        vertices = np.array([_parse_row(line)[:3] for line in body[1:1 + n_vertices]])
        faces = []
        for line in body[1 + n_vertices:1 + n_vertices + n_faces]:
            values = [int(v) for v in line.split()]
            polygon = values[1:1 + values[0]]
            faces.extend([polygon[0], polygon[i], polygon[i + 1]] for i in range(1, len(polygon) - 1))
    except (IndexError, ValueError) as e:
        raise PointSetFormatError(path, f"malformed OFF body ({e})") from e
    if vertices.shape != (n_vertices, 3):
        raise PointSetFormatError(path, f"expected {n_vertices} vertices with 3 coordinates")
    try:
        return TriangleMesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3))
    except ShapeError as e:
        raise PointSetFormatError(path, str(e)) from e


def read_point_set(
    path: str,
    mesh_samples: int = DEFAULT_MESH_SAMPLES,
    seed: Union[int, np.random.Generator, None] = 0,
    label: Optional[str] = None,
) -> PointSet:
    """
    点群ファイルを読み込む

    Args:
        path: CSV/TXT/XYZ, JSON, OFF のいずれか
        mesh_samples: OFF から面積一様に取る点数
        seed: OFF のサンプリングに使うシード
        label: 点群のラベル (既定はファイル名)

    Returns:
        読み込んだ点群

    Raises:
        PointSetFormatError: 読み込めない、または解析できない場合
    """
    if not os.path.isfile(path):
        raise PointSetFormatError(path, "file not found")
    label = label or os.path.basename(path)
    text = read_text(path)
    extension = os.path.splitext(path)[1].lower()
    if extension in MESH_EXTENSIONS:
        mesh = parse_off(text, path)
        return sample_mesh(mesh, mesh_samples, seed=seed, label=label)
    if extension == '.json':
        points = parse_point_json(text, path)
    else:
        points = parse_point_table(text, path)
    try:
        return PointSet(points, label)
    except Exception as e:
        raise PointSetFormatError(path, str(e)) from e


class DatasetScanner:
    """データセットディレクトリから形状ファイルを集める (gitignore 互換のパターン)"""

    def __init__(self, patterns: Optional[Sequence[str]] = None, debug: bool = False):
        self.patterns = list(patterns or ['*' + ext for ext in POINT_EXTENSIONS + MESH_EXTENSIONS + ('.json',)])
        self.debug = debug
        try:
            self.spec = pathspec.PathSpec.from_lines('gitwildmatch', self.patterns)
        except Exception as e:
            raise ValueError(f"Invalid glob pattern: {e}")
        self.stats = {'scanned': 0, 'included': 0}

    def scan(self, target_dir: str) -> List[str]:
        """マッチしたファイルのパスを相対パス順に返す"""
        matched = []
        self.stats = {'scanned': 0, 'included': 0}
        for root, dirs, files in os.walk(target_dir, followlinks=False):
            dirs.sort()
            for file in sorted(files):
                file_path = os.path.join(root, file)
                if os.path.islink(file_path):
                    continue
                self.stats['scanned'] += 1
                rel_path = os.path.relpath(file_path, target_dir).replace(os.sep, '/')
                if self.spec.match_file(rel_path):
                    matched.append(file_path)
                    self.stats['included'] += 1
                    if self.debug:
                        logger.debug("[MATCHED] %s", rel_path)
        return sorted(matched, key=lambda p: os.path.relpath(p, target_dir))

    def get_stats(self) -> Dict[str, int]:
        return self.stats.copy()


def point_rows(ps: PointSet) -> List[List[float]]:
    return [[float(v) for v in row] for row in ps.points]


def point_header(dims: int) -> List[str]:
    return ['x', 'y', 'z'][:dims]
