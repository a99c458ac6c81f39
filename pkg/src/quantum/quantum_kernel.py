"""シミュレートした量子カーネル κ_q(x, y) = |⟨Φ(x)|Φ(y)⟩|²

|Φ(x)⟩ = U_Φ(x) H^{⊗n} U_Φ(x) H^{⊗n} |0⟩^{⊗n}。U_Φ は単一量子ビット位相 φ_k と
全ペア (l<m) の 2 量子ビット位相 φ_lm からなる対角ユニタリで、Ising 発展と同じ形をしている。

- coyle:    φ_k = π/4·x_k,  φ_lm = (π/4 − x_l)(π/4 − x_m)
- havlicek: φ_k = x_k,      φ_lm = (π − x_l)(π − x_m)

座標の符号化は continuous2d (2D 座標をそのまま 2 量子ビットへ) と
binned (各軸を b ビットに量子化、MSB 先頭で軸ごとに連結) の 2 通り。
"""
import logging
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import ConfigurationError, ShapeError
from kernels.base import PointKernel
from quantum.statevector import (
    CircuitParams,
    StateVector,
    apply_diagonal_phases,
    apply_hadamard_layer,
    born_probabilities,
    check_qubit_count,
    ising_phases,
    prepare_plus_state,
    sample_counts,
)


logger = logging.getLogger(__name__)

VARIANTS = ('coyle', 'havlicek')
MODES = ('continuous2d', 'binned')
ESTIMATORS = ('exact', 'sampled')


@dataclass(frozen=True)
class QuantumFeatureMapConfig:
    variant: str = 'coyle'
    mode: str = 'binned'
    bits_per_axis: int = 3
    dims: int = 2

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dims not in (2, 3):
            raise ConfigurationError(f"dims must be 2 or 3, got {self.dims}")
        if self.mode == 'continuous2d' and self.dims != 2:
            raise ConfigurationError("continuous2d encoding requires 2D input")
        if self.bits_per_axis < 1:
            raise ConfigurationError(f"bits_per_axis must be positive, got {self.bits_per_axis}")
        check_qubit_count(self.n_qubits)

    @property
    def n_qubits(self) -> int:
        if self.mode == 'binned':
            return self.dims * self.bits_per_axis
        return self.dims


@dataclass(frozen=True, eq=False)
class EncodedPoint:
    """φ に入力する特徴ベクトル x̂ と元の点"""

    features: np.ndarray
    point: np.ndarray
    clamped: bool = False


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """2 つの点列のカーネル値 (rows × cols)"""

    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def entries(self):
        """(i, j, value) を行優先で返す"""
        for i in range(self.rows):
            for j in range(self.cols):
                yield i, j, float(self.values[i, j])

    def to_bytes(self) -> bytes:
        """リトルエンディアン u32 の (rows, cols) ヘッダ + f64 の行優先データ"""
        header = struct.pack('<II', self.rows, self.cols)
        return header + np.ascontiguousarray(self.values, dtype='<f8').tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> 'GramMatrix':
        rows, cols = struct.unpack('<II', data[:8])
        values = np.frombuffer(data[8:], dtype='<f8').reshape(rows, cols)
        return cls(values.astype(np.float64))


def _clamp_index(value: float, bins: int) -> Tuple[int, bool]:
    index = math.floor(value * bins)
    if index < 0:
        return 0, True
    if index >= bins:
        return bins - 1, True
    return index, False


def encode_point(p: Sequence[float], cfg: QuantumFeatureMapConfig) -> EncodedPoint:
    """点を特徴ベクトルに符号化する

    binned では [0, 1) の外側の座標を端のビン (負なら最初、1 以上なら最後) に丸め、
    clamped=True を返す。
    """
    point = np.asarray(p, dtype=np.float64)
    if point.shape != (cfg.dims,):
        raise ShapeError(f"expected a {cfg.dims}D point, got shape {point.shape}")
    if cfg.mode == 'continuous2d':
        return EncodedPoint(features=point.copy(), point=point)
    bins = 2 ** cfg.bits_per_axis
    bits: List[int] = []
    clamped = False
    for value in point:
        index, was_clamped = _clamp_index(float(value), bins)
        clamped = clamped or was_clamped
        bits.extend((index >> shift) & 1 for shift in range(cfg.bits_per_axis - 1, -1, -1))
    return EncodedPoint(features=np.array(bits, dtype=np.float64), point=point, clamped=clamped)


def feature_phases(features: np.ndarray, variant: str) -> CircuitParams:
    """符号化関数 φ_k, φ_lm を Ising 形のパラメータ (b = φ_k, J = φ_lm) として返す"""
    x = np.asarray(features, dtype=np.float64)
    n = x.size
    offset = math.pi / 4 if variant == 'coyle' else math.pi
    single = x * (math.pi / 4) if variant == 'coyle' else x.copy()
    pair = np.triu(np.outer(offset - x, offset - x), k=1)
    return CircuitParams(n_qubits=n, couplings=pair, biases=single, gamma=np.zeros(n))


def _feature_unitary_phases(encoded: EncodedPoint, cfg: QuantumFeatureMapConfig) -> np.ndarray:
    if encoded.features.size != cfg.n_qubits:
        raise ShapeError(
            f"encoding has {encoded.features.size} features but the map uses {cfg.n_qubits} qubits"
        )
    return ising_phases(feature_phases(encoded.features, cfg.variant))


def feature_state(encoded: EncodedPoint, cfg: QuantumFeatureMapConfig) -> StateVector:
    """|Φ(x)⟩ = U_Φ H U_Φ H |0⟩"""
    phases = _feature_unitary_phases(encoded, cfg)
    state = apply_diagonal_phases(prepare_plus_state(cfg.n_qubits), phases)
    state = apply_hadamard_layer(state)
    return apply_diagonal_phases(state, phases)


def apply_inverse_feature_map(state: StateVector, encoded: EncodedPoint,
                              cfg: QuantumFeatureMapConfig) -> StateVector:
    """U(y)† = H U_Φ(y)† H U_Φ(y)† を作用させる"""
    phases = _feature_unitary_phases(encoded, cfg)
    state = apply_diagonal_phases(state, -phases)
    state = apply_hadamard_layer(state)
    state = apply_diagonal_phases(state, -phases)
    return apply_hadamard_layer(state)


def kernel_exact(x: Sequence[float], y: Sequence[float], cfg: QuantumFeatureMapConfig) -> float:
    """振幅から厳密に |⟨Φ(x)|Φ(y)⟩|² を計算"""
    phi_x = feature_state(encode_point(x, cfg), cfg)
    phi_y = feature_state(encode_point(y, cfg), cfg)
    return min(1.0, abs(phi_x.overlap(phi_y)) ** 2)


def kernel_sampled(
    x: Sequence[float],
    y: Sequence[float],
    cfg: QuantumFeatureMapConfig,
    shots: int,
    seed: Union[int, np.random.Generator, None],
) -> float:
    """U(y)†U(x)|0⟩ を shots 回測定し、全ゼロが出た割合を返す"""
    if shots < 1:
        raise ConfigurationError(f"shots must be at least 1, got {shots}")
    encoded_y = encode_point(y, cfg)
    state = feature_state(encode_point(x, cfg), cfg)
    state = apply_inverse_feature_map(state, encoded_y, cfg)
    counts = sample_counts(born_probabilities(state), shots, seed)
    return counts[0] / shots


STATE_CACHE_SIZE = 4096


class QuantumKernel(PointKernel):
    """量子カーネルのハンドル

    特徴状態を点の座標ごとに LRU キャッシュする (最大 state_cache_size 件)。
    Gram 行列は保持しない。ビンごとの相関は Trainer 側でキャッシュされる。
    clamped_count は binned 符号化で端のビンに丸めた座標を持つ点を符号化した回数。
    """

    requires_unit_cube = True

    def __init__(
        self,
        cfg: QuantumFeatureMapConfig = QuantumFeatureMapConfig(),
        estimator: str = 'exact',
        shots: int = 10000,
        seed: Optional[int] = None,
        state_cache_size: int = STATE_CACHE_SIZE,
    ):
        if estimator not in ESTIMATORS:
            raise ConfigurationError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
        self.cfg = cfg
        self.estimator = estimator
        self.shots = shots
        self.seed = seed
        self.clamped_count = 0
        self.state_cache_size = state_cache_size
        self._cached_state = lru_cache(maxsize=state_cache_size)(self._compute_state)

    # joblib のワーカーへ渡すときはキャッシュを捨てて作り直す
    def __getstate__(self):
        state = self.__dict__.copy()
        del state['_cached_state']
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._cached_state = lru_cache(maxsize=self.state_cache_size)(self._compute_state)

    def _compute_state(self, key: bytes) -> np.ndarray:
        point = np.frombuffer(key, dtype=np.float64)
        encoded = encode_point(point, self.cfg)
        if encoded.clamped:
            self.clamped_count += 1
            logger.warning("Coordinate outside [0, 1) clamped: %s", point.tolist())
        amplitudes = feature_state(encoded, self.cfg).amplitudes
        amplitudes.setflags(write=False)
        return amplitudes

    def _state(self, point: np.ndarray) -> np.ndarray:
        return self._cached_state(np.ascontiguousarray(point, dtype=np.float64).tobytes())

    def cache_info(self):
        """特徴状態キャッシュの統計 (functools の CacheInfo)"""
        return self._cached_state.cache_info()

    def states(self, points: np.ndarray) -> np.ndarray:
        """(N, 2^n) の特徴状態行列"""
        return np.stack([self._state(p) for p in np.atleast_2d(points)])

    def gram(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
        if xs.shape[1] != self.cfg.dims or ys.shape[1] != self.cfg.dims:
            raise ShapeError(f"quantum kernel expects {self.cfg.dims}D points")
        if self.estimator == 'exact':
            return gram(xs, ys, self.cfg, estimator='exact', kernel=self).values
        return gram(xs, ys, self.cfg, estimator='sampled', shots=self.shots, seed=self.seed).values

    def describe(self) -> dict:
        return {
            'kernel': 'quantum',
            'variant': self.cfg.variant,
            'mode': self.cfg.mode,
            'bits_per_axis': self.cfg.bits_per_axis,
            'n_qubits': self.cfg.n_qubits,
            'estimator': self.estimator,
            'shots': self.shots if self.estimator == 'sampled' else None,
        }


def _mirror_upper(values: np.ndarray) -> np.ndarray:
    upper = np.triu(values)
    return upper + np.triu(values, k=1).T


def gram(
    xs,
    ys,
    cfg: QuantumFeatureMapConfig,
    estimator: str = 'exact',
    shots: int = 10000,
    seed: Union[int, np.random.Generator, None] = None,
    kernel: Optional[QuantumKernel] = None,
) -> GramMatrix:
    """xs_i と ys_j の量子カーネル行列

    xs と ys が同一の点列なら上三角 (対角含む) だけを計算して鏡映する。
    """
    xs = np.atleast_2d(np.asarray(getattr(xs, 'points', xs), dtype=np.float64))
    ys = np.atleast_2d(np.asarray(getattr(ys, 'points', ys), dtype=np.float64))
    if estimator not in ESTIMATORS:
        raise ConfigurationError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    symmetric = xs.shape == ys.shape and np.array_equal(xs, ys)
    if estimator == 'exact':
        handle = kernel if kernel is not None else QuantumKernel(cfg)
        phi_x = handle.states(xs)
        phi_y = phi_x if symmetric else handle.states(ys)
        values = np.clip(np.abs(phi_x.conj() @ phi_y.T) ** 2, 0.0, 1.0)
        if symmetric:
            values = _mirror_upper(values)
            np.fill_diagonal(values, 1.0)
        return GramMatrix(values)

    rng = np.random.default_rng(seed)
    values = np.zeros((xs.shape[0], ys.shape[0]))
    for i in range(xs.shape[0]):
        for j in range(i if symmetric else 0, ys.shape[0]):
            values[i, j] = kernel_sampled(xs[i], ys[j], cfg, shots, rng)
    if symmetric:
        values = _mirror_upper(values)
    return GramMatrix(values)
