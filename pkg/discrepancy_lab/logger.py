"""
日志工具模块
提供统一的日志记录功能，支持控制台和文件输出
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from . import settings


def setup_logger(name: str = 'discrepancy_lab', level: Optional[str] = None) -> logging.Logger:
    """
    配置并返回logger实例

    各模块通过 logging.getLogger(__name__) 取得子 logger，
    只需在入口处调用一次本函数。

    Args:
        name: logger名称
        level: 覆盖 settings.LOG_LEVEL 的日志级别

    Returns:
        logging.Logger: 配置好的logger实例
    """
    logger = logging.getLogger(name)
    level_name = (level or settings.LOG_LEVEL).upper()

    # 如果logger已经有处理器，说明已经配置过了，只更新级别
    if logger.handlers:
        logger.setLevel(getattr(logging, level_name, logging.INFO))
        return logger

    logger.setLevel(getattr(logging, level_name, logging.INFO))

    formatter = logging.Formatter(settings.LOG_FORMAT, settings.LOG_DATE_FORMAT)

    # 控制台处理器 - 输出到 stderr，stdout 留给报告
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    # 文件处理器 - 可选
    if settings.LOG_TO_FILE:
        try:
            Path(settings.LOG_FILE).parent.mkdir(parents=True, exist_ok=True)
            file_handler = RotatingFileHandler(
                settings.LOG_FILE,
                maxBytes=settings.LOG_MAX_SIZE,
                backupCount=settings.LOG_BACKUP_COUNT,
                encoding='utf-8'
            )
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        except Exception as e:
            logger.warning(f"无法创建日志文件: {e}")

    # 防止日志传播到根logger
    logger.propagate = False

    return logger
