"""命令行接口"""

from .commands import build_parser, main

__all__ = ["main", "build_parser"]
