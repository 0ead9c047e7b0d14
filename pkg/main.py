#!/usr/bin/env python3
"""
DR-RAG 命令行启动文件
用法: python main.py <command> [options]，子命令见 python main.py --help
"""

import sys

from src.cli import main
from src.utils.logger import logger

if __name__ == "__main__":
    try:
        sys.exit(main(sys.argv[1:]))
    except KeyboardInterrupt:
        logger.info("用户中断")
        sys.exit(130)
