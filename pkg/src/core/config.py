"""設定ファイルの読み込みとマージ"""
import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional

import yaml

from core.errors import ConfigurationError


logger = logging.getLogger(__name__)

MODES = ('exact', 'sampled')

# CLI のフラグ名 → TrainingConfig のフィールド名
_TRAINING_ALIASES = {
    'lr': 'learning_rate_init',
    'iters': 'iterations',
    'batch': 'batch_size',
}


@dataclass(frozen=True)
class TrainingConfig:
    """学習の設定。既定値は学習率 0.02 を 50 反復ごとに 0.5 倍する Adam"""

    learning_rate_init: float = 0.02
    decay_factor: float = 0.5
    decay_every: int = 50
    batch_size: int = 1000
    iterations: int = 200
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    mode: str = 'exact'
    # 0 なら分布のスナップショットを取らない
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.learning_rate_init > 0.0:
            raise ConfigurationError(f"learning rate must be positive, got {self.learning_rate_init}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigurationError(f"decay factor must be in (0, 1], got {self.decay_factor}")
        if self.decay_every < 1:
            raise ConfigurationError(f"decay_every must be a positive integer, got {self.decay_every}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be a positive integer, got {self.batch_size}")
        if self.iterations < 0:
            raise ConfigurationError(f"iterations must be nonnegative, got {self.iterations}")
        if self.snapshot_every < 0:
            raise ConfigurationError(f"snapshot_every must be nonnegative, got {self.snapshot_every}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> 'TrainingConfig':
        """辞書 (設定ファイルや argparse の値) から作る。無関係なキーと None は無視する"""
        names = {f.name: f.type for f in fields(cls)}
        values: Dict[str, Any] = {}
        for key, value in mapping.items():
            name = _TRAINING_ALIASES.get(key, key)
            if name not in names or value is None:
                continue
            values[name] = value
        try:
            for name in ('decay_every', 'batch_size', 'iterations', 'seed', 'snapshot_every'):
                if name in values:
                    values[name] = int(values[name])
            for name in ('learning_rate_init', 'decay_factor', 'adam_beta1', 'adam_beta2',
                         'adam_eps', 'weight_decay'):
                if name in values:
                    values[name] = float(values[name])
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid training setting: {e}") from e
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# 全サブコマンド共通の既定値。サブコマンドに無いキーは無視される
DEFAULTS: Dict[str, Any] = {
    'seed': 0,
    'out': 'qkc-out',
    'threads': 1,
    'qubits': 4,
    'kernel': 'gaussian',
    'alpha': 1.0,
    'variant': 'coyle',
    'bits': 3,
    'encoding': 'binned',
    'estimator': 'exact',
    'shots': 10000,
    'iters': 200,
    'batch': 1000,
    'lr': 0.02,
    'decay_every': 50,
    'decay_factor': 0.5,
    'mode': 'exact',
    'gamma': None,
    'axis': 'z',
    'snapshot_every': 0,
    'sweep': 'bins',
    'grid': None,
    'runs': 50,
    'noise_mode': 'outliers',
    'sigma_noise': None,
    'format': 'csv',
    'glob': None,
}


class ConfigLoader:
    """設定ファイルの読み込みを管理"""

    @classmethod
    def load(cls, config_path: Optional[str] = None) -> Dict[str, Any]:
        """
        設定ファイルを読み込む

        YAML と JSON (YAML の部分集合) を受け付ける。RunManifest を渡した場合は
        その config メンバーを設定として使う。読み込みに失敗したら終了コード 2 で終了する。

        Args:
            config_path: 設定ファイルのパス

        Returns:
            設定内容の辞書
        """
        config: Dict[str, Any] = {}

        if config_path:
            if not os.path.exists(config_path):
                print(f"Error: Config file not found: {config_path}", file=sys.stderr)
                sys.exit(2)

            try:
                with open(config_path, 'r', encoding='utf-8') as f:
                    loaded_config = yaml.safe_load(f)
            except yaml.YAMLError as e:
                print(f"Error: Invalid YAML/JSON in config file {config_path}: {e}", file=sys.stderr)
                sys.exit(2)
            except OSError as e:
                print(f"Error: Cannot read config file {config_path}: {e}", file=sys.stderr)
                sys.exit(2)

            if loaded_config is None:
                return config
            if not isinstance(loaded_config, dict):
                print(f"Error: Config file {config_path} must contain a mapping", file=sys.stderr)
                sys.exit(2)
            if isinstance(loaded_config.get('config'), dict) and 'command' in loaded_config:
                logger.debug("Using the 'config' member of manifest %s", config_path)
                loaded_config = loaded_config['config']
            config = loaded_config
            cls._print_config(config, config_path)

        return config

    @staticmethod
    def _print_config(config: Dict[str, Any], config_path: str, line_length: int = 80) -> None:
        """設定内容を整形して stderr に表示"""
        print("=" * line_length, file=sys.stderr)
        print(f"Loaded configuration from: {config_path}", file=sys.stderr)
        print("-" * line_length, file=sys.stderr)
        yaml_str = yaml.safe_dump(config, default_flow_style=False, allow_unicode=True, sort_keys=False)
        for line in yaml_str.splitlines():
            print(line, file=sys.stderr)
        print("=" * line_length, file=sys.stderr)

    @staticmethod
    def merge_with_args(config: Dict[str, Any], args: argparse.Namespace) -> argparse.Namespace:
        """
        設定ファイルとコマンドライン引数をマージ
        コマンドライン引数が優先される (None のままの引数だけを埋める)

        Args:
            config: 設定ファイルの内容。キーはフラグ名の '-' を '_' にしたもの
            args: コマンドライン引数

        Returns:
            マージされた設定
        """
        for raw_key, value in config.items():
            key = str(raw_key).replace('-', '_')
            if key in ('command', 'config'):
                continue
            if not hasattr(args, key):
                logger.debug("Ignoring config key not used by this command: %s", raw_key)
                continue
            if getattr(args, key) is None:
                setattr(args, key, value)
        return args

    @staticmethod
    def apply_defaults(args: argparse.Namespace) -> argparse.Namespace:
        """まだ None の引数に組み込みの既定値を入れる"""
        for key, value in DEFAULTS.items():
            if hasattr(args, key) and getattr(args, key) is None:
                setattr(args, key, value)
        return args
