from loguru import logger
import sys
from src.config.settings import settings


def setup_logging(level: str = None, log_file: str = None):
    """配置日志系统"""
    level = (level or settings.log_level).upper()
    log_file = settings.log_file if log_file is None else log_file

    # 移除默认handler
    logger.remove()

    # 控制台输出（stdout留给报告）
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        level=level,
        colorize=True,
        backtrace=True,
        diagnose=False
    )

    # 文件输出
    if log_file:
        logger.add(
            log_file,
            format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {name}:{function}:{line} - {message}",
            level=level,
            rotation="1 day",
            retention="30 days",
            compression="zip",
            encoding="utf-8"
        )

    return logger


# 初始化日志
setup_logging()
