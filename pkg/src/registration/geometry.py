"""点群・剛体変換・並進の解決・対応既知の回転推定・評価指標"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import (
    ConfigurationError,
    DegenerateGeometryError,
    EmptyInputError,
    InvariantViolationError,
    ShapeError,
)


AXES = ('x', 'y', 'z')

# 回転軸ごとの回転平面 (a, b) の座標インデックス
_PLANES = {'z': (0, 1), 'x': (1, 2), 'y': (2, 0)}

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class PointSet:
    """2D/3D 点の順序付き集合"""

    points: np.ndarray
    label: str = ''

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64, copy=True)
        if points.ndim != 2 or points.shape[1] not in (2, 3):
            raise ShapeError(f"points must have shape (N, 2) or (N, 3), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise InvariantViolationError("point coordinates must be finite")
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    def centroid(self) -> np.ndarray:
        if len(self) == 0:
            raise EmptyInputError(f"point set '{self.label}' is empty")
        return self.points.mean(axis=0)

    def radius(self, center: Optional[np.ndarray] = None) -> float:
        """center (既定は重心) から最も遠い点までの距離"""
        if center is None:
            center = self.centroid()
        if len(self) == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.points - center, axis=1)))

    def translated(self, offset: Sequence[float]) -> 'PointSet':
        return PointSet(self.points + np.asarray(offset, dtype=np.float64), self.label)

    def scaled(self, factor: float, center: Sequence[float]) -> 'PointSet':
        center = np.asarray(center, dtype=np.float64)
        return PointSet((self.points - center) * factor + center, self.label)

    def with_points(self, points: np.ndarray) -> 'PointSet':
        return PointSet(points, self.label)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """単一軸回りの回転 + 並進 (T m = R m + t)

    2D では回転軸は暗黙の z。3D では axis ∈ {x, y, z} (既定 z)。
    """

    angle: float
    axis: Optional[str] = None
    translation: Optional[np.ndarray] = None
    dims: int = 2

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ConfigurationError(f"dims must be 2 or 3, got {self.dims}")
        axis = self.axis
        if self.dims == 2:
            if axis is not None:
                raise ConfigurationError("a rotation axis cannot be given for 2D transforms")
        else:
            axis = axis or 'z'
            if axis not in AXES:
                raise ConfigurationError(f"axis must be one of {AXES}, got {axis!r}")
        object.__setattr__(self, 'axis', axis)
        object.__setattr__(self, 'angle', float(self.angle) % TWO_PI)
        translation = self.translation
        if translation is None:
            translation = np.zeros(self.dims)
        translation = np.array(translation, dtype=np.float64, copy=True)
        if translation.shape != (self.dims,):
            raise ShapeError(f"translation must have length {self.dims}")
        translation.setflags(write=False)
        object.__setattr__(self, 'translation', translation)

    @classmethod
    def rotation(cls, angle: float, dims: int = 2, axis: Optional[str] = None) -> 'RigidTransform':
        return cls(angle=angle, axis=axis if dims == 3 else None, dims=dims)

    @classmethod
    def about_point(
        cls,
        angle: float,
        pivot: Sequence[float],
        dims: int = 2,
        axis: Optional[str] = None,
    ) -> 'RigidTransform':
        """pivot を中心とする回転 (t = pivot − R·pivot)"""
        pivot = np.asarray(pivot, dtype=np.float64)
        base = cls.rotation(angle, dims=dims, axis=axis)
        return cls(
            angle=angle,
            axis=base.axis,
            translation=pivot - base.rotation_matrix @ pivot,
            dims=dims,
        )

    @property
    def rotation_matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        if self.dims == 2:
            return np.array([[c, -s], [s, c]])
        a, b = _PLANES[self.axis]
        matrix = np.eye(3)
        matrix[a, a] = c
        matrix[a, b] = -s
        matrix[b, a] = s
        matrix[b, b] = c
        return matrix

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation_matrix.T + self.translation

    def to_dict(self) -> dict:
        return {
            'angle_rad': self.angle,
            'axis': self.axis or 'z',
            'translation': [float(v) for v in self.translation],
            'rotation_matrix': [[float(v) for v in row] for row in self.rotation_matrix],
        }


@dataclass(frozen=True)
class Correspondence:
    """モデル点とシーン点の対応 (model index, scene index) のリスト"""

    pairs: Tuple[Tuple[int, int], ...]
    bijective: bool = True

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        object.__setattr__(self, 'pairs', pairs)
        if self.bijective:
            n = len(pairs)
            models = sorted(i for i, _ in pairs)
            scenes = sorted(j for _, j in pairs)
            if models != list(range(n)) or scenes != list(range(n)):
                raise ShapeError("a bijective correspondence must be a permutation on both sides")

    @classmethod
    def identity(cls, n: int) -> 'Correspondence':
        return cls(tuple((i, i) for i in range(n)))

    @classmethod
    def from_permutation(cls, permutation: Sequence[int]) -> 'Correspondence':
        """model i ↔ scene permutation[i]"""
        return cls(tuple((i, int(j)) for i, j in enumerate(permutation)))


class TranslationResolution(NamedTuple):
    model: PointSet
    scene: PointSet
    offset: np.ndarray


def _check_pair(m: PointSet, s: PointSet) -> None:
    if len(m) == 0 or len(s) == 0:
        raise EmptyInputError("both point sets must be nonempty")
    if m.dims != s.dims:
        raise ShapeError(f"dimension mismatch: {m.dims}D model vs {s.dims}D scene")


def apply_transform(t: RigidTransform, ps: PointSet) -> PointSet:
    """各点を回転してから並進する。点の順序は保つ"""
    if t.dims != ps.dims:
        raise ShapeError(f"{t.dims}D transform applied to {ps.dims}D points")
    return ps.with_points(t.apply(ps.points))


def resolve_translation(
    m: PointSet,
    s: PointSet,
    target: Union[float, Sequence[float], None] = None,
) -> TranslationResolution:
    """両点群の重心を target (既定は原点) に移す

    Returns:
        (移動後のモデル, 移動後のシーン, offset)。offset = centroid(M) − centroid(S)
        はシーンをモデルの座標系に運ぶ並進。
    """
    _check_pair(m, s)
    if target is None:
        target = np.zeros(m.dims)
    target = np.broadcast_to(np.asarray(target, dtype=np.float64), (m.dims,))
    model_centroid = m.centroid()
    scene_centroid = s.centroid()
    return TranslationResolution(
        model=m.translated(target - model_centroid),
        scene=s.translated(target - scene_centroid),
        offset=model_centroid - scene_centroid,
    )


def normalize_to_unit_cube(
    m: PointSet,
    s: PointSet,
    margin: float = 1e-6,
) -> Tuple[PointSet, PointSet, float]:
    """量子カーネル用: 重心を (0.5, …) に合わせ、両者を同じ倍率で縮める

    重心回りのどの回転でも全点が [0, 1)^d に収まるよう、最大半径を 0.5 − margin にする。

    Returns:
        (モデル, シーン, 倍率)
    """
    centered = resolve_translation(m, s)
    origin = np.zeros(m.dims)
    radius = max(centered.model.radius(origin), centered.scene.radius(origin))
    factor = (0.5 - margin) / radius if radius > 0.0 else 1.0
    center = np.full(m.dims, 0.5)
    model = centered.model.scaled(factor, origin).translated(center)
    scene = centered.scene.scaled(factor, origin).translated(center)
    return model, scene, factor


def solve_transform_given_correspondence(
    m: PointSet,
    s: PointSet,
    c: Correspondence,
    axis: Optional[str] = None,
) -> RigidTransform:
    """対応が既知のときの単一軸最小二乗回転角

    θ* = atan2(Σ(m_a s_b − m_b s_a), Σ(m_a s_a + m_b s_b)) を回転平面 (a, b) 上で計算する。
    両点群は重心合わせ済みであること。
    """
    _check_pair(m, s)
    if m.dims == 3:
        axis = axis or 'z'
        if axis not in AXES:
            raise ConfigurationError(f"axis must be one of {AXES}, got {axis!r}")
        a, b = _PLANES[axis]
    else:
        if axis not in (None, 'z'):
            raise ConfigurationError("2D point sets rotate about the implicit z axis only")
        a, b = 0, 1
    model_index = np.array([i for i, _ in c.pairs], dtype=int)
    scene_index = np.array([j for _, j in c.pairs], dtype=int)
    if model_index.size == 0:
        raise EmptyInputError("correspondence is empty")
    mp = m.points[model_index]
    sp = s.points[scene_index]
    cross = float(np.sum(mp[:, a] * sp[:, b] - mp[:, b] * sp[:, a]))
    dot = float(np.sum(mp[:, a] * sp[:, a] + mp[:, b] * sp[:, b]))
    scale = float(np.sum(mp[:, [a, b]] ** 2) + np.sum(sp[:, [a, b]] ** 2))
    if scale <= 1e-24 or math.hypot(cross, dot) <= 1e-12 * scale:
        raise DegenerateGeometryError("all points lie on the rotation axis")
    return RigidTransform.rotation(math.atan2(cross, dot), dims=m.dims, axis=axis if m.dims == 3 else None)


def alignment_error(m: PointSet, s: PointSet, estimated: RigidTransform) -> float:
    """‖T̂ M − S‖_F / ‖M‖_F (インデックスで対応した同数の点群)"""
    if len(m) != len(s) or m.dims != s.dims:
        raise ShapeError(
            f"alignment error needs index-aligned sets, got {len(m)}x{m.dims} and {len(s)}x{s.dims}"
        )
    denominator = float(np.linalg.norm(m.points))
    if denominator == 0.0:
        raise DegenerateGeometryError("model has zero Frobenius norm")
    residual = apply_transform(estimated, m).points - s.points
    return float(np.linalg.norm(residual)) / denominator


def transformation_discrepancy(t: Union[RigidTransform, np.ndarray]) -> float:
    """‖I − R Rᵀ‖_F"""
    rotation = t.rotation_matrix if isinstance(t, RigidTransform) else np.asarray(t, dtype=np.float64)
    if rotation.ndim != 2 or rotation.shape[0] != rotation.shape[1]:
        raise ShapeError(f"rotation must be square, got shape {rotation.shape}")
    return float(np.linalg.norm(np.eye(rotation.shape[0]) - rotation @ rotation.T))
