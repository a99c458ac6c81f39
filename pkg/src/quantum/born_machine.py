"""QAOA_{p=1} Ising Born Machine

回路の出力分布 p_θ(x) を計算し、ビット列を回転角 (ビンの中央値) に対応付ける。
"""
import json
import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Union

import numpy as np

from core.errors import ShapeError
from quantum.statevector import (
    CircuitParams,
    OutputDistribution,
    apply_ising_evolution,
    apply_measurement_layer,
    bits_to_index,
    born_probabilities,
    check_qubit_count,
    prepare_plus_state,
)


DEFAULT_GAMMA = math.pi / 4

# exp(iθZ) は角度 2θ の Z 回転なので、回転角の ±π/2 シフトは θ の ±π/4 に相当する
SHIFT_MAGNITUDE = math.pi / 4

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AngleBinning:
    """[0, 2π) を 2^n 個の等幅ビンに分割し、各ビット列をビンの中央値に対応させる"""

    n_qubits: int

    def __post_init__(self):
        check_qubit_count(self.n_qubits)

    @property
    def bin_count(self) -> int:
        return 2 ** self.n_qubits

    @property
    def bin_width(self) -> float:
        return TWO_PI / self.bin_count

    def median(self, index: int) -> float:
        """ビン index の中央値 (2·index + 1)·π / 2^n"""
        if not 0 <= index < self.bin_count:
            raise ShapeError(f"bin index {index} out of range for {self.n_qubits} qubits")
        return (2 * index + 1) * math.pi / self.bin_count

    def medians(self) -> np.ndarray:
        return np.array([self.median(i) for i in range(self.bin_count)])


@dataclass(frozen=True, eq=False)
class AngleDistribution:
    """ビン中央値上の角度分布"""

    binning: AngleBinning
    probabilities: np.ndarray

    def __post_init__(self):
        output = OutputDistribution(self.binning.n_qubits, self.probabilities)
        object.__setattr__(self, 'probabilities', output.probabilities)

    @property
    def angles(self) -> np.ndarray:
        return self.binning.medians()

    def mass_on(self, indices: Sequence[int]) -> float:
        """指定したビンの確率の合計"""
        return float(self.probabilities[sorted(set(int(i) for i in indices))].sum())

    def to_output_distribution(self) -> OutputDistribution:
        return OutputDistribution(self.binning.n_qubits, self.probabilities)


@dataclass(frozen=True)
class ParameterShift:
    """1 つの学習パラメータを ±π/4 (ゲート回転角で ±π/2) ずらす指定

    parameter_index は trainable_vector() の並び
    (b_1..b_n, J_12, J_13, ..., J_{n-1,n}) における位置。
    """

    parameter_index: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign!r}")

    @property
    def shift(self) -> float:
        return self.sign * SHIFT_MAGNITUDE


def forward(params: CircuitParams) -> AngleDistribution:
    """H 層 → Ising 発展 → 測定層 → Born 則、をビン分布として返す"""
    state = prepare_plus_state(params.n_qubits)
    state = apply_ising_evolution(state, params)
    state = apply_measurement_layer(state, params)
    dist = born_probabilities(state)
    return AngleDistribution(AngleBinning(params.n_qubits), dist.probabilities)


def bitstring_to_angle(bits: Sequence[int], binning: AngleBinning) -> float:
    if len(bits) != binning.n_qubits:
        raise ShapeError(f"expected {binning.n_qubits} bits, got {len(bits)}")
    return binning.median(bits_to_index(bits))


def shifted_params(params: CircuitParams, shift: ParameterShift) -> CircuitParams:
    """学習パラメータの 1 成分だけを shift.shift ずらしたパラメータ"""
    if not 0 <= shift.parameter_index < params.trainable_count:
        raise IndexError(
            f"parameter index {shift.parameter_index} out of range "
            f"[0, {params.trainable_count})"
        )
    vector = params.trainable_vector()
    vector[shift.parameter_index] += shift.shift
    return params.with_trainable(vector)


def shifted_distributions(params: CircuitParams, parameter_index: int):
    """(p⁺, p⁻) を返す。∂p/∂θ_k = p⁺ − p⁻"""
    plus = forward(shifted_params(params, ParameterShift(parameter_index, +1)))
    minus = forward(shifted_params(params, ParameterShift(parameter_index, -1)))
    return plus, minus


def mode_angle(dist: AngleDistribution) -> float:
    """最大確率のビン中央値。同率ならインデックスの小さいビン"""
    return dist.binning.median(int(np.argmax(dist.probabilities)))


def zero_params(n_qubits: int, gamma: Union[float, Sequence[float]] = DEFAULT_GAMMA) -> CircuitParams:
    return CircuitParams.zeros(n_qubits, gamma=gamma)


def save_checkpoint(params: CircuitParams, path: str) -> None:
    # float の repr は最短の往復可能表現 (17 桁以内) なので読み戻しはビット一致する
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(params.to_dict(), f, indent=2)
        f.write('\n')


def load_checkpoint(path: str) -> CircuitParams:
    with open(path, 'r', encoding='utf-8') as f:
        data: Dict[str, Any] = json.load(f)
    return CircuitParams.from_dict(data)
