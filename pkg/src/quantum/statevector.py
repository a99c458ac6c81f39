"""浅い回路族の厳密な状態ベクトルシミュレーション

Hadamard 層 → 対角 Ising 発展 → 測定層の単一量子ビット回転 → Born 則、
という qKC の回路をそのまま 2^n 次元の振幅配列で計算する。

ビット順は x_1 を最上位ビットとする (x = (0,1,0,1) → 整数 5)。
Z 固有値は bit 0 ↔ +1, bit 1 ↔ −1。
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from core.errors import (
    EmptyBatchError,
    InvariantViolationError,
    ShapeError,
    SizeError,
    UnsupportedConfigurationError,
)


MAX_QUBITS = 20
NORM_TOLERANCE = 1e-10

SeedLike = Union[int, np.random.Generator, None]


def _frozen_array(values: Any, dtype=np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def check_qubit_count(n_qubits: int) -> None:
    """量子ビット数が 1..MAX_QUBITS に収まっているか検査する"""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits!r}")


@lru_cache(maxsize=None)
def index_bits(n_qubits: int) -> np.ndarray:
    """全基底状態のビット表 (2^n, n)。列 k が x_{k+1} (MSB 先頭)"""
    check_qubit_count(n_qubits)
    shifts = np.arange(n_qubits - 1, -1, -1)
    bits = (np.arange(2 ** n_qubits)[:, None] >> shifts) & 1
    bits = bits.astype(np.int8)
    bits.setflags(write=False)
    return bits


@lru_cache(maxsize=None)
def z_eigenvalues(n_qubits: int) -> np.ndarray:
    """全基底状態の Z 固有値表 (2^n, n)、要素は ±1"""
    z = 1.0 - 2.0 * index_bits(n_qubits)
    z.setflags(write=False)
    return z


def bits_to_index(bits: Sequence[int]) -> int:
    """ビット列 (MSB 先頭) を整数に変換"""
    value = 0
    for bit in bits:
        if bit not in (0, 1):
            raise ShapeError(f"bits must be 0 or 1, got {bit!r}")
        value = (value << 1) | int(bit)
    return value


@dataclass(frozen=True, eq=False)
class StateVector:
    """n 量子ビットの状態ベクトル (振幅は complex128 = 実部・虚部の組)"""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        check_qubit_count(self.n_qubits)
        amplitudes = _frozen_array(self.amplitudes, dtype=np.complex128)
        if amplitudes.shape != (2 ** self.n_qubits,):
            raise ShapeError(
                f"expected {2 ** self.n_qubits} amplitudes, got shape {amplitudes.shape}"
            )
        object.__setattr__(self, 'amplitudes', amplitudes)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, tolerance: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm_squared() - 1.0) <= tolerance

    def overlap(self, other: 'StateVector') -> complex:
        """⟨self|other⟩"""
        if other.n_qubits != self.n_qubits:
            raise ShapeError(f"qubit mismatch: {self.n_qubits} vs {other.n_qubits}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class CircuitParams:
    """IBM / QAOA_{p=1} 回路のパラメータ

    couplings は i<j 成分のみを持つ狭義上三角行列 J、biases は b。
    学習対象は J_ij (i<j) と b_k の n(n+1)/2 個で、Γ・Δ・Σ は固定。
    """

    n_qubits: int
    couplings: np.ndarray
    biases: np.ndarray
    gamma: np.ndarray
    delta: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        check_qubit_count(self.n_qubits)
        n = self.n_qubits
        couplings = _frozen_array(self.couplings)
        if couplings.shape != (n, n):
            raise ShapeError(f"couplings must be {n}x{n}, got {couplings.shape}")
        if np.any(np.tril(couplings) != 0.0):
            raise ShapeError("couplings must be strictly upper triangular (J_ij with i<j)")
        object.__setattr__(self, 'couplings', couplings)
        for name in ('biases', 'gamma', 'delta', 'sigma'):
            value = getattr(self, name)
            if value is None:
                value = np.zeros(n)
            array = _frozen_array(value)
            if array.shape != (n,):
                raise ShapeError(f"{name} must have length {n}, got shape {array.shape}")
            object.__setattr__(self, name, array)
        if not all(np.all(np.isfinite(getattr(self, name)))
                   for name in ('couplings', 'biases', 'gamma', 'delta', 'sigma')):
            raise InvariantViolationError("circuit parameters must be finite")

    @classmethod
    def zeros(cls, n_qubits: int, gamma: Union[float, Sequence[float]] = 0.0) -> 'CircuitParams':
        check_qubit_count(n_qubits)
        gamma_array = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (n_qubits,))
        return cls(
            n_qubits=n_qubits,
            couplings=np.zeros((n_qubits, n_qubits)),
            biases=np.zeros(n_qubits),
            gamma=gamma_array,
        )

    @property
    def trainable_count(self) -> int:
        return self.n_qubits * (self.n_qubits + 1) // 2

    @property
    def is_qaoa(self) -> bool:
        return not np.any(self.delta) and not np.any(self.sigma)

    def trainable_vector(self) -> np.ndarray:
        """学習パラメータを b_1..b_n, J_12, J_13, ..., J_{n-1,n} の順に並べる"""
        upper = np.triu_indices(self.n_qubits, k=1)
        return np.concatenate([self.biases, self.couplings[upper]])

    def with_trainable(self, vector: Sequence[float]) -> 'CircuitParams':
        """学習パラメータだけを差し替えた新しい CircuitParams を返す"""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.trainable_count,):
            raise ShapeError(
                f"expected {self.trainable_count} trainable values, got shape {vector.shape}"
            )
        n = self.n_qubits
        couplings = np.zeros((n, n))
        couplings[np.triu_indices(n, k=1)] = vector[n:]
        return CircuitParams(
            n_qubits=n,
            couplings=couplings,
            biases=vector[:n],
            gamma=self.gamma,
            delta=self.delta,
            sigma=self.sigma,
        )

    def to_dict(self) -> Dict[str, Any]:
        """チェックポイント形式 {n_qubits, gamma[], b[], J[][]}"""
        return {
            'n_qubits': int(self.n_qubits),
            'gamma': [float(v) for v in self.gamma],
            'b': [float(v) for v in self.biases],
            'J': [[float(v) for v in row] for row in self.couplings],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CircuitParams':
        try:
            n = int(data['n_qubits'])
            return cls(
                n_qubits=n,
                couplings=np.array(data['J'], dtype=np.float64),
                biases=np.array(data['b'], dtype=np.float64),
                gamma=np.array(data['gamma'], dtype=np.float64),
            )
        except KeyError as e:
            raise ShapeError(f"checkpoint is missing field {e}") from e


@dataclass(frozen=True, eq=False)
class OutputDistribution:
    """全 2^n ビット列上の確率分布"""

    n_qubits: int
    probabilities: np.ndarray

    def __post_init__(self):
        check_qubit_count(self.n_qubits)
        probabilities = _frozen_array(self.probabilities)
        if probabilities.shape != (2 ** self.n_qubits,):
            raise ShapeError(
                f"expected {2 ** self.n_qubits} probabilities, got shape {probabilities.shape}"
            )
        if np.any(probabilities < 0.0) or abs(probabilities.sum() - 1.0) > NORM_TOLERANCE:
            raise InvariantViolationError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, 'probabilities', probabilities)

    @classmethod
    def point_mass(cls, n_qubits: int, index: int) -> 'OutputDistribution':
        probabilities = np.zeros(2 ** n_qubits)
        probabilities[index] = 1.0
        return cls(n_qubits, probabilities)


def prepare_plus_state(n: int) -> StateVector:
    """H^{⊗n}|0⟩^{⊗n}: 全振幅が 2^{-n/2}"""
    check_qubit_count(n)
    return StateVector(n, np.full(2 ** n, 2.0 ** (-n / 2), dtype=np.complex128))


def ising_phases(params: CircuitParams) -> np.ndarray:
    """φ(x) = Σ_{i<j} J_ij z_i z_j + Σ_k b_k z_k を全基底状態について計算"""
    z = z_eigenvalues(params.n_qubits)
    return z @ params.biases + np.einsum('xi,ij,xj->x', z, params.couplings, z)


def apply_diagonal_phases(state: StateVector, phases: np.ndarray) -> StateVector:
    """振幅 x に exp(i·phases[x]) を掛ける"""
    phases = np.asarray(phases, dtype=np.float64)
    if phases.shape != state.amplitudes.shape:
        raise ShapeError(f"phase vector shape {phases.shape} does not match state")
    return StateVector(state.n_qubits, state.amplitudes * np.exp(1j * phases))


def apply_ising_evolution(state: StateVector, params: CircuitParams) -> StateVector:
    """対角 Ising ユニタリ exp(i·φ(x)) を作用させる (振幅の大きさは不変)"""
    if state.n_qubits != params.n_qubits:
        raise ShapeError(
            f"state has {state.n_qubits} qubits but params have {params.n_qubits}"
        )
    return apply_diagonal_phases(state, ising_phases(params))


def apply_single_qubit_layer(state: StateVector, gates: Sequence[np.ndarray]) -> StateVector:
    """量子ビット k に 2x2 ゲート gates[k] をテンソル積として作用させる"""
    n = state.n_qubits
    if len(gates) != n:
        raise ShapeError(f"expected {n} single-qubit gates, got {len(gates)}")
    psi = state.amplitudes.reshape((2,) * n)
    for axis, gate in enumerate(gates):
        psi = np.moveaxis(np.tensordot(gate, psi, axes=([1], [axis])), 0, axis)
    return StateVector(n, psi.reshape(-1))


HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)


def apply_hadamard_layer(state: StateVector) -> StateVector:
    return apply_single_qubit_layer(state, [HADAMARD] * state.n_qubits)


def x_rotation(gamma: float) -> np.ndarray:
    """exp(−i·Γ·X)"""
    c, s = np.cos(gamma), np.sin(gamma)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def apply_measurement_layer(state: StateVector, params: CircuitParams) -> StateVector:
    """QAOA の測定層 exp(−i Σ_k Γ_k X_k) を作用させる

    Raises:
        UnsupportedConfigurationError: Δ または Σ が 0 でない場合
    """
    if state.n_qubits != params.n_qubits:
        raise ShapeError(
            f"state has {state.n_qubits} qubits but params have {params.n_qubits}"
        )
    if not params.is_qaoa:
        raise UnsupportedConfigurationError(
            "only the QAOA measurement layer (delta = sigma = 0) is supported"
        )
    return apply_single_qubit_layer(state, [x_rotation(g) for g in params.gamma])


def born_probabilities(state: StateVector) -> OutputDistribution:
    """Born 則: p(x) = |⟨x|ψ⟩|²"""
    if not state.is_normalized():
        raise InvariantViolationError(
            f"state is not normalized (norm^2 = {state.norm_squared():.17g})"
        )
    probabilities = np.abs(state.amplitudes) ** 2
    return OutputDistribution(state.n_qubits, probabilities / probabilities.sum())


def sample_indices(dist: OutputDistribution, count: int, seed: SeedLike) -> np.ndarray:
    """分布から基底状態の整数インデックスを count 個サンプリングする"""
    if count <= 0:
        raise EmptyBatchError(f"sample count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    return rng.choice(dist.probabilities.size, size=count, p=dist.probabilities)


def sample_counts(dist: OutputDistribution, shots: int, seed: SeedLike) -> np.ndarray:
    """shots 回測定したときの各ビット列の出現回数"""
    if shots <= 0:
        raise EmptyBatchError(f"shot count must be positive, got {shots}")
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, dist.probabilities)


def sample_bitstrings(dist: OutputDistribution, count: int, seed: SeedLike) -> np.ndarray:
    """測定結果のビット列 (count, n) を返す。同じ seed なら同じ列"""
    indices = sample_indices(dist, count, seed)
    return np.array(index_bits(dist.n_qubits)[indices], dtype=np.uint8)
