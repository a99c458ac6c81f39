"""合成形状 (正多角形・魚型曲線)・メッシュからの点群サンプリング・ノイズ付加"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from core.errors import ConfigurationError, EmptyInputError, ShapeError
from registration.geometry import PointSet, RigidTransform, apply_transform


logger = logging.getLogger(__name__)

NOISE_MODES = ('outliers', 'jitter')

# sigma_noise を省略したときの形状半径に対する比率
DEFAULT_NOISE_SCALE = 0.3

FISH_POINT_COUNT = 91

SeedLike = Union[int, np.random.Generator, None]


def make_polygon(sides: int, points_per_side: int = 10, label: Optional[str] = None) -> PointSet:
    """原点中心・単位円に内接する正多角形

    各辺に points_per_side 点を等間隔に置き、共有する頂点は 1 度だけ数える
    (全 sides·(points_per_side − 1) 点)。頂点の位相は π/sides なので、正方形の
    辺は座標軸に平行になる。
    """
    if sides < 3:
        raise ConfigurationError(f"a polygon needs at least 3 sides, got {sides}")
    if points_per_side < 2:
        raise ConfigurationError(f"points_per_side must be at least 2, got {points_per_side}")
    phases = math.pi / sides + 2.0 * math.pi * np.arange(sides) / sides
    vertices = np.column_stack([np.cos(phases), np.sin(phases)])
    t = np.arange(points_per_side - 1) / (points_per_side - 1)
    edges = [
        vertices[i] + t[:, None] * (vertices[(i + 1) % sides] - vertices[i])
        for i in range(sides)
    ]
    return PointSet(np.concatenate(edges), label or f"{sides}-gon")


def synthetic_fish(count: int = FISH_POINT_COUNT) -> PointSet:
    """魚型の閉曲線 x = cos t − sin²t/√2, y = cos t·sin t

    公開データセットの代わりに使う合成形状。重心を原点に置き、最大半径 1 に正規化する。
    """
    if count < 3:
        raise ConfigurationError(f"fish shape needs at least 3 points, got {count}")
    t = 2.0 * math.pi * np.arange(count) / count
    x = np.cos(t) - np.sin(t) ** 2 / math.sqrt(2.0)
    y = np.cos(t) * np.sin(t)
    points = np.column_stack([x, y])
    points -= points.mean(axis=0)
    points /= np.max(np.linalg.norm(points, axis=1))
    return PointSet(points, 'synthetic-fish (non-canonical)')


def normalize_unit_sphere(ps: PointSet) -> PointSet:
    """重心を原点に移し、最大半径を 1 にする"""
    centered = ps.points - ps.centroid()
    radius = float(np.max(np.linalg.norm(centered, axis=1)))
    if radius == 0.0:
        return ps.with_points(centered)
    return ps.with_points(centered / radius)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ShapeError(f"mesh vertices must have shape (V, 3), got {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ShapeError(f"mesh faces must be triangles, got shape {faces.shape}")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise ShapeError("mesh face refers to a missing vertex")
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'faces', faces)

    def areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_mesh(mesh: TriangleMesh, count: int, seed: SeedLike = None, label: str = '') -> PointSet:
    """面積に比例して三角形を選び、三角形内で一様に点を取る (単位球に正規化)"""
    if count < 1:
        raise ConfigurationError(f"sample count must be positive, got {count}")
    areas = mesh.areas()
    total = float(areas.sum())
    if mesh.faces.shape[0] == 0 or total <= 0.0:
        raise EmptyInputError("mesh has no surface area to sample from")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(areas.size, size=count, p=areas / total)
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    a, b, c = (mesh.vertices[mesh.faces[chosen, i]] for i in range(3))
    points = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    return normalize_unit_sphere(PointSet(points, label))


def noise_count(ratio: float, n_points: int) -> int:
    """⌈ratio·N⌉ (0.3·10 のような浮動小数の誤差で 1 点増えないよう丸めてから切り上げる)"""
    return int(math.ceil(round(ratio * n_points, 9)))


def add_noise(
    ps: PointSet,
    ratio: float,
    sigma_noise: Optional[float] = None,
    seed: SeedLike = None,
    mode: str = 'outliers',
) -> PointSet:
    """iid ガウスノイズを加える

    outliers: 重心回りに標準偏差 sigma_noise の外れ点を ⌈ratio·N⌉ 個追加する (既定)。
    jitter:   既存の ⌈ratio·N⌉ 点を選び、その場で sigma_noise の摂動を加える。
    sigma_noise の既定値は形状半径の 0.3 倍。
    """
    if not 0.0 <= ratio <= 0.5:
        raise ConfigurationError(f"noise ratio must be in [0, 0.5], got {ratio}")
    if mode not in NOISE_MODES:
        raise ConfigurationError(f"noise mode must be one of {NOISE_MODES}, got {mode!r}")
    count = noise_count(ratio, len(ps))
    if count == 0:
        return ps
    if sigma_noise is None:
        sigma_noise = DEFAULT_NOISE_SCALE * ps.radius()
    if not sigma_noise > 0.0:
        raise ConfigurationError(f"sigma_noise must be positive, got {sigma_noise}")
    rng = np.random.default_rng(seed)
    if mode == 'outliers':
        outliers = ps.centroid() + rng.normal(0.0, sigma_noise, size=(count, ps.dims))
        return ps.with_points(np.vstack([ps.points, outliers]))
    points = ps.points.copy()
    chosen = rng.choice(len(ps), size=count, replace=False)
    points[chosen] += rng.normal(0.0, sigma_noise, size=(count, ps.dims))
    return ps.with_points(points)


def rotated_copy(ps: PointSet, angle: float, axis: Optional[str] = None,
                 pivot: Optional[Sequence[float]] = None) -> PointSet:
    """ps を angle だけ回転させたシーン (pivot 省略時は原点回り)"""
    if pivot is None:
        transform = RigidTransform.rotation(angle, dims=ps.dims, axis=axis)
    else:
        transform = RigidTransform.about_point(angle, pivot, dims=ps.dims, axis=axis)
    return apply_transform(transform, ps)
