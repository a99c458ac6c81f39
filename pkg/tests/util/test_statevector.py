"""状態ベクトルシミュレータのユニットテスト"""
import math
from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from core.errors import EmptyBatchError, InvariantViolationError, ShapeError, SizeError, UnsupportedConfigurationError
from quantum.statevector import (
    CircuitParams,
    OutputDistribution,
    StateVector,
    apply_ising_evolution,
    apply_measurement_layer,
    bits_to_index,
    born_probabilities,
    index_bits,
    prepare_plus_state,
    sample_bitstrings,
    sample_counts,
)


I2 = np.eye(2)
X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])
H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def single(op, k, n):
    """量子ビット k (0 が最上位) にだけ op を作用させる密行列"""
    return reduce(np.kron, [op if i == k else I2 for i in range(n)])


def dense_probabilities(params: CircuitParams) -> np.ndarray:
    """2^n × 2^n の行列を掛け合わせて Born 確率を計算する"""
    n = params.n_qubits
    dim = 2 ** n
    hamiltonian = np.zeros((dim, dim))
    for k in range(n):
        hamiltonian += params.biases[k] * single(Z, k, n)
        for j in range(k + 1, n):
            hamiltonian += params.couplings[k, j] * single(Z, k, n) @ single(Z, j, n)
    mixer = sum(params.gamma[k] * single(X, k, n) for k in range(n))
    zero = np.zeros(dim)
    zero[0] = 1.0
    psi = reduce(np.kron, [H] * n) @ zero
    psi = expm(1j * hamiltonian) @ psi
    psi = expm(-1j * mixer) @ psi
    return np.abs(psi) ** 2


def random_params(rng, n):
    couplings = np.triu(rng.uniform(-math.pi, math.pi, size=(n, n)), k=1)
    return CircuitParams(
        n_qubits=n,
        couplings=couplings,
        biases=rng.uniform(-math.pi, math.pi, size=n),
        gamma=rng.uniform(-math.pi, math.pi, size=n),
    )


def run_circuit(params):
    state = apply_ising_evolution(prepare_plus_state(params.n_qubits), params)
    return born_probabilities(apply_measurement_layer(state, params)).probabilities


class TestPreparePlusState:
    """H^{⊗n}|0⟩ のテスト"""

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_equal_amplitudes(self, n):
        """全振幅が 2^{-n/2}"""
        state = prepare_plus_state(n)
        assert np.allclose(state.amplitudes, 2.0 ** (-n / 2), atol=1e-15)
        assert state.is_normalized(1e-12)

    @pytest.mark.parametrize("n", [0, 21, -1])
    def test_out_of_range(self, n):
        """1..20 の外はエラー"""
        with pytest.raises(SizeError):
            prepare_plus_state(n)


class TestBitOrder:
    """ビット列と整数の対応 (MSB 先頭)"""

    def test_worked_example(self):
        """(0,1,0,1) → 5"""
        assert bits_to_index([0, 1, 0, 1]) == 5
        assert index_bits(4)[5].tolist() == [0, 1, 0, 1]

    def test_invalid_bit(self):
        """0/1 以外はエラー"""
        with pytest.raises(ShapeError):
            bits_to_index([0, 2])


class TestIsingEvolution:
    """対角 Ising 発展のテスト"""

    def test_zero_params_identity(self):
        """J = b = 0 なら状態は変わらない"""
        state = prepare_plus_state(3)
        evolved = apply_ising_evolution(state, CircuitParams.zeros(3))
        assert np.allclose(evolved.amplitudes, state.amplitudes, atol=1e-15)

    def test_single_qubit_phase(self):
        """n=1, b=π/2 → (e^{iπ/2}, e^{-iπ/2})/√2"""
        params = CircuitParams(1, np.zeros((1, 1)), [math.pi / 2], [0.0])
        evolved = apply_ising_evolution(prepare_plus_state(1), params)
        expected = np.array([np.exp(1j * math.pi / 2), np.exp(-1j * math.pi / 2)]) / math.sqrt(2.0)
        assert np.allclose(evolved.amplitudes, expected, atol=1e-12)
        assert np.allclose(born_probabilities(evolved).probabilities, [0.5, 0.5], atol=1e-12)

    def test_matches_dense_oracle(self, rng):
        """n=2 の任意の J, b で行列指数関数と一致"""
        params = random_params(rng, 2)
        state = prepare_plus_state(2)
        evolved = apply_ising_evolution(state, params)
        hamiltonian = (
            params.biases[0] * single(Z, 0, 2)
            + params.biases[1] * single(Z, 1, 2)
            + params.couplings[0, 1] * single(Z, 0, 2) @ single(Z, 1, 2)
        )
        expected = expm(1j * hamiltonian) @ state.amplitudes
        assert np.max(np.abs(evolved.amplitudes - expected)) <= 1e-10

    def test_dimension_mismatch(self):
        """量子ビット数の不一致はエラー"""
        with pytest.raises(ShapeError):
            apply_ising_evolution(prepare_plus_state(2), CircuitParams.zeros(3))

    def test_rejects_lower_triangle(self):
        """J は狭義上三角"""
        with pytest.raises(ShapeError):
            CircuitParams(2, [[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0], [0.0, 0.0])


class TestMeasurementLayer:
    """QAOA の測定層のテスト"""

    def test_zero_gamma_identity(self):
        """Γ = 0 なら状態は変わらない"""
        state = prepare_plus_state(2)
        result = apply_measurement_layer(state, CircuitParams.zeros(2, gamma=0.0))
        assert np.allclose(result.amplitudes, state.amplitudes, atol=1e-15)

    def test_plus_state_is_eigenstate(self):
        """|+⟩ は X の固有状態なので確率は (1/2, 1/2) のまま"""
        result = apply_measurement_layer(prepare_plus_state(1), CircuitParams.zeros(1, gamma=math.pi / 4))
        assert np.allclose(born_probabilities(result).probabilities, [0.5, 0.5], atol=1e-12)

    def test_matches_kronecker_oracle(self, rng):
        """n=2 のランダムな Γ で密行列と一致"""
        gamma = rng.uniform(-math.pi, math.pi, size=2)
        state = StateVector(2, np.array([0.0, 1.0, 0.0, 0.0], dtype=np.complex128))
        result = apply_measurement_layer(state, CircuitParams.zeros(2, gamma=gamma))
        expected = np.kron(expm(-1j * gamma[0] * X), expm(-1j * gamma[1] * X)) @ state.amplitudes
        assert np.max(np.abs(result.amplitudes - expected)) <= 1e-10
        assert result.is_normalized(1e-12)

    def test_non_qaoa_unsupported(self):
        """Δ ≠ 0 はサポート外"""
        params = CircuitParams(1, np.zeros((1, 1)), [0.0], [0.1], delta=[0.2])
        with pytest.raises(UnsupportedConfigurationError):
            apply_measurement_layer(prepare_plus_state(1), params)


class TestBornProbabilities:
    """Born 則と密行列オラクルの比較"""

    def test_uniform_plus_state(self):
        """|+⟩^⊗4 → 1/16"""
        probabilities = born_probabilities(prepare_plus_state(4)).probabilities
        assert np.allclose(probabilities, 1 / 16, atol=1e-15)

    def test_not_normalized(self):
        """正規化されていない状態はエラー"""
        with pytest.raises(InvariantViolationError):
            born_probabilities(StateVector(1, [1.0, 1.0]))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_pipeline_matches_dense_oracle(self, n):
        """n ≤ 3 で 100 回のランダムなパラメータについて密行列と一致"""
        rng = np.random.default_rng(100 + n)
        for _ in range(100):
            params = random_params(rng, n)
            assert np.max(np.abs(run_circuit(params) - dense_probabilities(params))) <= 1e-10

    @pytest.mark.parametrize("n", range(1, 9))
    def test_zero_params_uniform(self, n):
        """J = b = 0 なら任意の Γ で一様分布"""
        probabilities = run_circuit(CircuitParams.zeros(n, gamma=0.37))
        assert np.max(np.abs(probabilities - 2.0 ** (-n))) < 1e-12

    def test_ising_keeps_z_probabilities(self, rng):
        """Ising 発展の直後の確率は変わらない"""
        params = random_params(rng, 3)
        state = apply_ising_evolution(prepare_plus_state(3), params)
        assert np.allclose(born_probabilities(state).probabilities, 1 / 8, atol=1e-12)


class TestSampling:
    """シード付きサンプリングのテスト"""

    def test_uniform_frequencies(self):
        """一様分布から 16000 回 → 各ビット列は 1000 ± 4σ"""
        dist = OutputDistribution(4, np.full(16, 1 / 16))
        counts = sample_counts(dist, 16000, seed=7)
        sd = math.sqrt(16000 * (1 / 16) * (15 / 16))
        assert counts.sum() == 16000
        assert np.all(np.abs(counts - 1000) <= 4 * sd)

    def test_point_mass(self):
        """点質量 0101 からは常に 0101"""
        samples = sample_bitstrings(OutputDistribution.point_mass(4, 5), 50, seed=1)
        assert samples.shape == (50, 4)
        assert np.all(samples == [0, 1, 0, 1])

    def test_deterministic(self):
        """同じシードなら同じ列"""
        dist = OutputDistribution(3, np.arange(1, 9) / 36)
        assert np.array_equal(sample_bitstrings(dist, 100, 42), sample_bitstrings(dist, 100, 42))

    def test_zero_count(self):
        """0 回はエラー"""
        with pytest.raises(EmptyBatchError):
            sample_bitstrings(OutputDistribution.point_mass(2, 0), 0, seed=1)
