"""出力ディレクトリごとの実行記録 (manifest.json)"""
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from core.point_io import sha256_file
from writers.document import JsonWriter


MANIFEST_NAME = 'manifest.json'


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='milliseconds')


@dataclass
class RunManifest:
    """コマンド・解決済みの設定・入力ファイルのハッシュ・バージョン・開始/終了時刻

    config はそのまま --config に渡せる (ConfigLoader は manifest の config メンバーを読む)。
    """

    command: str
    config: Dict[str, Any]
    seed: int
    version: str
    inputs: Dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None

    def add_input(self, path: str) -> None:
        self.inputs[os.path.abspath(path)] = sha256_file(path)

    def finish(self) -> None:
        self.finished_at = _now()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config': self.config,
            'seed': self.seed,
            'inputs': dict(sorted(self.inputs.items())),
            'version': self.version,
            'started_at': self.started_at,
            'finished_at': self.finished_at,
        }

    def write(self, out_dir: str) -> str:
        if self.finished_at is None:
            self.finish()
        return JsonWriter().write(os.path.join(out_dir, MANIFEST_NAME), self.to_dict())
