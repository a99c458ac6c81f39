"""結果ライターの基底クラス"""
import os
from abc import ABC, abstractmethod
from typing import Any


class ResultWriter(ABC):
    """出力ファイル生成の抽象基底クラス"""

    @abstractmethod
    def render(self, content: Any) -> str:
        """
        結果をファイルの内容に変換

        Args:
            content: 書き出す結果

        Returns:
            ファイルに書く文字列
        """

    def write(self, path: str, content: Any) -> str:
        """
        親ディレクトリを作って書き出す

        Returns:
            書き出したパス

        Raises:
            OSError: 書き込めない場合 (メッセージにパスを含む)
        """
        text = self.render(content)
        write_bytes(path, text.encode('utf-8'))
        return path


def write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(data)
    except PermissionError as e:
        raise PermissionError(f"Permission denied: Cannot write to '{path}'") from e
    except OSError as e:
        raise OSError(f"Cannot write to '{path}': {e}") from e
