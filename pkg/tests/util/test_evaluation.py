"""回転推定・位置合わせ・スイープ評価・ノイズ曲線のテスト"""
import math

import numpy as np
import pytest

from core.config import TrainingConfig
from core.errors import ConfigurationError, DegenerateGeometryError
from kernels.gaussian import GaussianKernel, GaussianKernelParams
from quantum.born_machine import AngleBinning
from quantum.quantum_kernel import QuantumFeatureMapConfig, QuantumKernel
from registration import evaluation
from registration.evaluation import (
    AngleRecord,
    EvalReport,
    NoiseCurve,
    noise_curve,
    prepare_pair,
    register,
    sweep_angles,
    sweep_evaluate,
)
from registration.geometry import PointSet, RigidTransform, apply_transform
from registration.shapes import synthetic_fish


GAUSS = GaussianKernelParams(alpha=1.0, sigma_sq=0.01)


class TestPreparePair:
    """学習に使う座標系"""

    def test_gaussian_origin(self, square):
        """ガウスカーネルは原点中心"""
        pair = prepare_pair(square.translated([3.0, 1.0]), square, GaussianKernel(GAUSS))
        assert np.allclose(pair.model.centroid(), 0.0, atol=1e-12)
        assert pair.pivot is None

    def test_quantum_unit_cube(self, square):
        """量子カーネルは (0.5, 0.5) 中心の単位立方体"""
        kernel = QuantumKernel(QuantumFeatureMapConfig())
        pair = prepare_pair(square, square.translated([3.0, 1.0]), kernel)
        assert np.allclose(pair.scene.centroid(), 0.5)
        assert pair.pivot.tolist() == [0.5, 0.5]
        assert np.all(pair.model.points >= 0.0) and np.all(pair.model.points < 1.0)


class TestSweepAngles:
    """スイープする正解角"""

    def test_bins(self):
        assert np.allclose(sweep_angles('bins', 4), AngleBinning(4).medians())

    def test_uniform(self):
        """uniform:K は [0, 2π) の K 等分"""
        assert np.allclose(sweep_angles('uniform:4', 4), [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])

    @pytest.mark.parametrize("sweep", ['random', 'uniform:x', 'uniform:0'])
    def test_invalid(self, sweep):
        with pytest.raises(ConfigurationError):
            sweep_angles(sweep, 4)


class TestRegister:
    """元の座標系での位置合わせ"""

    def test_translation_from_centroids(self, square):
        """t = c_S − R·c_M で重心が一致する"""
        model = square.translated([0.4, -0.2])
        scene = apply_transform(RigidTransform(5 * math.pi / 16, translation=[1.0, 2.0]), square)
        result = register(model, scene, 4, GAUSS, TrainingConfig(iterations=10))
        rotation = result.transform.rotation_matrix
        assert np.allclose(result.transform.translation, scene.centroid() - rotation @ model.centroid())
        assert np.allclose(result.aligned.centroid(), scene.centroid())
        assert result.transform.angle in AngleBinning(4).medians().tolist()
        assert len(result.estimate.trace) == 10


class TestEvalReport:
    """集計"""

    def test_from_records(self):
        """失敗した角度は平均に含めない"""
        records = [
            AngleRecord(0.1, 0.1, 0.0, 0.0),
            AngleRecord(0.2, 0.3, 0.2, 0.0),
            AngleRecord(0.3, error="DegenerateGeometryError: x"),
        ]
        report = EvalReport.from_records(records)
        assert report.e == pytest.approx(0.1)
        assert report.sigma == pytest.approx(0.1)
        assert report.failures == 1
        assert report.to_dict()['per_angle'][2]['error'].startswith("DegenerateGeometryError")

    def test_all_failed(self):
        report = EvalReport.from_records([AngleRecord(0.1, error="x")])
        assert report.e is None and report.sigma is None


class TestSweepEvaluate:
    """正解角スイープ"""

    def test_fish_four_qubits_exact(self):
        """魚型、4 量子ビット、ビン中央値スイープ → e = σ = e_R = σ_R = 0"""
        report = sweep_evaluate(synthetic_fish(), 4, GAUSS, TrainingConfig())
        assert len(report.per_angle) == 16
        assert report.failures == 0
        assert report.e <= 1e-12 and report.sigma <= 1e-12
        assert report.e_R <= 1e-12 and report.sigma_R <= 1e-12
        for record in report.per_angle:
            assert record.estimated_angle == record.gt_angle

    def test_deterministic_across_threads(self):
        """並列数によらず同じ結果"""
        cfg = TrainingConfig(iterations=5, mode='sampled', batch_size=50, seed=4)
        angles = sweep_angles('uniform:3', 3)
        single = sweep_evaluate(synthetic_fish(31), 3, GAUSS, cfg, angles=angles, threads=1)
        parallel = sweep_evaluate(synthetic_fish(31), 3, GAUSS, cfg, angles=angles, threads=2)
        assert single.to_dict() == parallel.to_dict()

    def test_failure_recorded(self, mocker):
        """1 角度の失敗は記録して続ける"""
        original = evaluation.estimate_rotation
        calls = {'count': 0}

        def flaky(*args, **kwargs):
            calls['count'] += 1
            if calls['count'] == 2:
                raise DegenerateGeometryError("all points lie on the rotation axis")
            return original(*args, **kwargs)

        mocker.patch('registration.evaluation.estimate_rotation', side_effect=flaky)
        report = sweep_evaluate(synthetic_fish(31), 2, GAUSS, TrainingConfig(iterations=2))
        assert report.failures == 1
        assert [r.ok for r in report.per_angle] == [True, False, True, True]
        assert report.e is not None

    def test_empty_shape(self):
        with pytest.raises(ConfigurationError):
            sweep_evaluate(PointSet(np.zeros((0, 2))), 2, GAUSS, TrainingConfig())


class TestNoiseCurve:
    """ノイズ率に対する誤差曲線"""

    def test_shape_and_determinism(self):
        """比率ごとに 1 行、同じシードで同じ値"""
        cfg = TrainingConfig(iterations=5, seed=2)
        kwargs = dict(ratios=[0.0, 0.25], n_qubits=3, k=GAUSS, cfg=cfg, runs=3)
        first = noise_curve(synthetic_fish(31), **kwargs)
        second = noise_curve(synthetic_fish(31), **kwargs)
        assert first == second
        assert [row[0] for row in first.rows()] == [0.0, 0.25]
        assert all(m >= 0.0 for m in first.means)

    def test_summary(self):
        """単調性の要約"""
        curve = NoiseCurve(ratios=(0.1, 0.2, 0.3), means=(0.1, 0.09, 0.2), stds=(0.02, 0.02, 0.02), runs=5)
        summary = curve.summary()
        assert summary['non_decreasing'] is False
        assert summary['non_decreasing_within_std'] is True
        assert summary['pooled_std'] == pytest.approx(0.02)

    def test_invalid_runs(self):
        with pytest.raises(ConfigurationError):
            noise_curve(synthetic_fish(31), [0.1], 2, GAUSS, TrainingConfig(), runs=0)


@pytest.mark.slow
class TestLongRuns:
    """長時間の評価 (pytest -m slow)"""

    def test_fish_six_qubits(self):
        """魚型、6 量子ビット、ビン中央値スイープ → e ≤ 0.05、変換は直交"""
        report = sweep_evaluate(synthetic_fish(), 6, GAUSS, TrainingConfig(), threads=4)
        assert len(report.per_angle) == 64
        assert report.failures == 0
        assert report.e <= 0.05
        assert report.e_R <= 1e-12 and report.sigma_R <= 1e-12

    def test_noise_curve_trend(self):
        """ノイズ率ごとに 50 回: 平均誤差はプールした標準偏差の幅で非減少"""
        ratios = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
        curve = noise_curve(synthetic_fish(), ratios, 6, GAUSS, TrainingConfig(seed=11),
                            runs=50, mode='jitter', threads=4)
        summary = curve.summary()
        assert summary['runs_per_ratio'] == 50
        assert curve.means[0] <= 1e-12
        assert summary['non_decreasing_within_std']
