"""Ising Born Machine のユニットテスト"""
import math

import numpy as np
import pytest

from core.errors import ShapeError
from quantum.born_machine import (
    AngleBinning,
    AngleDistribution,
    ParameterShift,
    SHIFT_MAGNITUDE,
    bitstring_to_angle,
    forward,
    load_checkpoint,
    mode_angle,
    save_checkpoint,
    shifted_distributions,
    shifted_params,
    zero_params,
)
from quantum.statevector import CircuitParams, index_bits


def random_params(seed, n, gamma=math.pi / 4):
    rng = np.random.default_rng(seed)
    params = zero_params(n, gamma=gamma)
    return params.with_trainable(rng.uniform(-1.0, 1.0, size=params.trainable_count))


class TestAngleBinning:
    """ビット列 → ビン中央値"""

    def test_worked_example(self):
        """n=4, (0,1,0,1) → 11π/16 (ビット一致)"""
        assert bitstring_to_angle([0, 1, 0, 1], AngleBinning(4)) == 11 * math.pi / 16

    def test_first_bin(self):
        """n=4, 0000 → π/16"""
        assert bitstring_to_angle([0, 0, 0, 0], AngleBinning(4)) == pytest.approx(math.pi / 16, abs=1e-15)

    def test_last_bin_six_qubits(self):
        """n=6, 全て 1 → 127π/64"""
        assert bitstring_to_angle([1] * 6, AngleBinning(6)) == pytest.approx(127 * math.pi / 64, abs=1e-14)

    def test_one_qubit(self):
        """n=1 → π/2 と 3π/2"""
        assert np.allclose(AngleBinning(1).medians(), [math.pi / 2, 3 * math.pi / 2], atol=1e-15)

    def test_length_mismatch(self):
        """ビット数の不一致はエラー"""
        with pytest.raises(ShapeError):
            bitstring_to_angle([0, 1], AngleBinning(4))

    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_bijective(self, n):
        """全ビット列が異なる角度に写り、i 番目はビン i の中央値"""
        binning = AngleBinning(n)
        angles = [bitstring_to_angle(index_bits(n)[i], binning) for i in range(binning.bin_count)]
        assert len(set(angles)) == binning.bin_count
        assert all(0.0 <= a < 2 * math.pi for a in angles)
        assert angles == binning.medians().tolist()


class TestForward:
    """回路の出力分布"""

    def test_zero_init_uniform(self):
        """ゼロ初期化 → 16 個の中央値上の一様分布"""
        dist = forward(zero_params(4))
        assert np.max(np.abs(dist.probabilities - 1 / 16)) < 1e-12
        assert np.allclose(dist.angles, (2 * np.arange(16) + 1) * math.pi / 16)

    def test_normalized(self):
        """ランダムなパラメータでも確率の和は 1"""
        dist = forward(random_params(3, 4))
        assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(dist.probabilities >= 0.0)


class TestParameterShift:
    """パラメータシフト"""

    def test_single_entry(self):
        """b_1 = 0 に +シフト → b_1 = π/4、他は同じ"""
        params = zero_params(3)
        shifted = shifted_params(params, ParameterShift(0, +1))
        assert shifted.biases[0] == SHIFT_MAGNITUDE == math.pi / 4
        assert np.array_equal(shifted.trainable_vector()[1:], params.trainable_vector()[1:])
        assert np.array_equal(shifted.gamma, params.gamma)

    def test_inverse(self):
        """+ と − を続けると元に戻る"""
        params = random_params(1, 3)
        back = shifted_params(shifted_params(params, ParameterShift(4, +1)), ParameterShift(4, -1))
        assert np.allclose(back.trainable_vector(), params.trainable_vector(), atol=1e-15)

    def test_invalid_index(self):
        """範囲外のインデックスは IndexError"""
        with pytest.raises(IndexError):
            shifted_params(zero_params(2), ParameterShift(3, +1))

    def test_invalid_sign(self):
        """符号は ±1"""
        with pytest.raises(ValueError):
            ParameterShift(0, 2)

    def test_shifted_circuits_differ(self):
        """n=2 の J_12 について + と − の分布が異なる"""
        plus, minus = shifted_distributions(random_params(5, 2), 2)
        assert np.max(np.abs(plus.probabilities - minus.probabilities)) > 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_shift_rule_matches_finite_difference(self, seed):
        """p⁺ − p⁻ がビンごとの中心差分と一致"""
        params = random_params(seed, 3)
        h = 1e-5
        for index in range(params.trainable_count):
            plus, minus = shifted_distributions(params, index)
            vector = params.trainable_vector()
            up = vector.copy()
            up[index] += h
            down = vector.copy()
            down[index] -= h
            numeric = (forward(params.with_trainable(up)).probabilities
                       - forward(params.with_trainable(down)).probabilities) / (2 * h)
            assert np.max(np.abs((plus.probabilities - minus.probabilities) - numeric)) < 1e-4


class TestModeAngle:
    """最頻ビンの中央値"""

    def test_point_mass(self):
        """ビン 5 の点質量 → 11π/16"""
        probabilities = np.zeros(16)
        probabilities[5] = 1.0
        assert mode_angle(AngleDistribution(AngleBinning(4), probabilities)) == 11 * math.pi / 16

    def test_uniform_tiebreak(self):
        """一様分布 → 最小インデックスの π/16"""
        assert mode_angle(forward(zero_params(4))) == pytest.approx(math.pi / 16, abs=1e-15)

    def test_scale_invariance(self):
        """正の定数倍して正規化し直しても最頻角は変わらない"""
        dist = forward(random_params(9, 4))
        rescaled = dist.probabilities * 3.7
        again = AngleDistribution(dist.binning, rescaled / rescaled.sum())
        assert mode_angle(again) == mode_angle(dist)


class TestCheckpoint:
    """チェックポイントの保存と読み込み"""

    def test_bit_exact(self, tmp_path):
        """JSON を経由してもビット一致"""
        params = random_params(11, 4)
        path = tmp_path / "params.json"
        save_checkpoint(params, str(path))
        loaded = load_checkpoint(str(path))
        assert isinstance(loaded, CircuitParams)
        assert np.array_equal(loaded.couplings, params.couplings)
        assert np.array_equal(loaded.biases, params.biases)
        assert np.array_equal(loaded.gamma, params.gamma)

    def test_missing_field(self, tmp_path):
        """欠けたフィールドは ShapeError"""
        path = tmp_path / "bad.json"
        path.write_text('{"n_qubits": 2, "b": [0, 0]}')
        with pytest.raises(ShapeError):
            load_checkpoint(str(path))
