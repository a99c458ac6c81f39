"""ConfigLoader と TrainingConfig のユニットテスト"""
import argparse
import json

import pytest

from core.config import DEFAULTS, ConfigLoader, TrainingConfig
from core.errors import ConfigurationError


def create_full_args(**overrides):
    """train サブコマンドと同じ属性を持つ argparse.Namespace を作成するヘルパー"""
    defaults = {
        'command': 'train',
        'config_file': None,
        'model': None,
        'scene': None,
        'seed': None,
        'out': None,
        'threads': None,
        'debug': False,
        'qubits': None,
        'kernel': None,
        'sigma2': None,
        'alpha': None,
        'iters': None,
        'batch': None,
        'lr': None,
        'decay_every': None,
        'decay_factor': None,
        'mode': None,
        'gamma': None,
        'axis': None,
        'snapshot_every': None,
    }
    defaults.update(overrides)
    return argparse.Namespace(**defaults)


class TestConfigLoaderLoad:
    """設定ファイル読み込みのテスト"""

    def test_load_no_config_file(self):
        """設定ファイルなし"""
        assert ConfigLoader.load(config_path=None) == {}

    def test_load_yaml(self, tmp_path, capsys):
        """YAML の設定ファイル"""
        config_file = tmp_path / "config.yaml"
        config_file.write_text("qubits: 6\nmode: sampled\nsigma2: 0.01\n")

        config = ConfigLoader.load(config_path=str(config_file))

        assert config == {'qubits': 6, 'mode': 'sampled', 'sigma2': 0.01}
        # 設定は stderr に表示される (stdout は汚さない)
        captured = capsys.readouterr()
        assert "Loaded configuration from:" in captured.err
        assert captured.out == ""

    def test_load_json(self, tmp_path):
        """JSON も読める"""
        config_file = tmp_path / "config.json"
        config_file.write_text(json.dumps({'qubits': 4, 'lr': 0.01}))
        assert ConfigLoader.load(config_path=str(config_file)) == {'qubits': 4, 'lr': 0.01}

    def test_load_manifest(self, tmp_path):
        """manifest.json なら config メンバーを使う"""
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({
            'command': 'train',
            'config': {'qubits': 6, 'seed': 3},
            'seed': 3,
            'version': '0.1.0',
        }))
        assert ConfigLoader.load(config_path=str(manifest)) == {'qubits': 6, 'seed': 3}

    def test_load_nonexistent_file(self):
        """存在しないファイルは終了コード 2"""
        with pytest.raises(SystemExit) as exc_info:
            ConfigLoader.load(config_path="/nonexistent/config.yaml")
        assert exc_info.value.code == 2

    def test_load_invalid_yaml(self, tmp_path, capsys):
        """無効な YAML は終了コード 2"""
        config_file = tmp_path / "invalid.yaml"
        config_file.write_text("invalid: yaml: content: broken\n  bad indent")

        with pytest.raises(SystemExit) as exc_info:
            ConfigLoader.load(config_path=str(config_file))

        assert exc_info.value.code == 2
        assert "Invalid YAML/JSON" in capsys.readouterr().err

    def test_load_non_mapping(self, tmp_path):
        """マッピング以外は終了コード 2"""
        config_file = tmp_path / "list.yaml"
        config_file.write_text("- 1\n- 2\n")
        with pytest.raises(SystemExit) as exc_info:
            ConfigLoader.load(config_path=str(config_file))
        assert exc_info.value.code == 2

    def test_load_empty_yaml(self, tmp_path):
        """空の YAML は空の設定"""
        config_file = tmp_path / "empty.yaml"
        config_file.write_text("")
        assert ConfigLoader.load(config_path=str(config_file)) == {}


class TestConfigLoaderMerge:
    """設定ファイルとコマンドライン引数のマージ"""

    def test_cli_takes_precedence(self):
        """コマンドラインで指定した値が優先される"""
        args = create_full_args(qubits=6)
        merged = ConfigLoader.merge_with_args({'qubits': 4, 'mode': 'sampled'}, args)
        assert merged.qubits == 6
        assert merged.mode == 'sampled'

    def test_hyphenated_keys(self):
        """decay-every のようなフラグ名も使える"""
        merged = ConfigLoader.merge_with_args({'decay-every': 25}, create_full_args())
        assert merged.decay_every == 25

    def test_unknown_and_reserved_keys_ignored(self):
        """コマンドに無いキーと command/config は無視"""
        args = create_full_args()
        merged = ConfigLoader.merge_with_args({'grid': 8, 'command': 'gram', 'config': {}}, args)
        assert not hasattr(merged, 'grid')
        assert merged.command == 'train'

    def test_positionals_from_config(self):
        """入力ファイルも設定ファイルから渡せる"""
        merged = ConfigLoader.merge_with_args({'model': 'm.csv', 'scene': 's.csv'}, create_full_args())
        assert (merged.model, merged.scene) == ('m.csv', 's.csv')


class TestApplyDefaults:
    """組み込みの既定値"""

    def test_fills_missing(self):
        args = ConfigLoader.apply_defaults(create_full_args(qubits=6))
        assert args.qubits == 6
        assert args.iters == 200
        assert args.lr == 0.02
        assert args.out == 'qkc-out'
        assert args.sigma2 is None

    def test_only_known_attributes(self):
        """コマンドに無い属性は追加しない"""
        args = ConfigLoader.apply_defaults(create_full_args())
        assert not hasattr(args, 'runs')

    def test_defaults_match_training_config(self):
        """CLI の既定値は TrainingConfig の既定値と同じ"""
        assert TrainingConfig.from_mapping(DEFAULTS) == TrainingConfig()


class TestTrainingConfig:
    """学習設定"""

    def test_defaults(self):
        cfg = TrainingConfig()
        assert cfg.learning_rate_init == 0.02
        assert cfg.decay_factor == 0.5
        assert cfg.decay_every == 50
        assert cfg.batch_size == 1000
        assert (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) == (0.9, 0.999, 1e-8)
        assert cfg.weight_decay == 0.0

    def test_from_mapping_aliases(self):
        """lr / iters / batch の別名と型変換"""
        cfg = TrainingConfig.from_mapping({'lr': '0.05', 'iters': '10', 'batch': 20, 'unused': 1, 'seed': None})
        assert cfg.learning_rate_init == 0.05
        assert cfg.iterations == 10
        assert cfg.batch_size == 20
        assert cfg.seed == 0

    @pytest.mark.parametrize("kwargs", [
        {'learning_rate_init': 0.0},
        {'decay_factor': 1.5},
        {'decay_every': 0},
        {'batch_size': 0},
        {'iterations': -1},
        {'mode': 'other'},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            TrainingConfig(**kwargs)

    def test_invalid_type(self):
        with pytest.raises(ConfigurationError):
            TrainingConfig.from_mapping({'iters': 'many'})
