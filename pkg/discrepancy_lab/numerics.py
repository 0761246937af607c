"""
数值基础设施 - Numerics
线程池分块计算、确定性归约、种子派生与组合枚举
"""

import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from . import settings

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)

_worker_override: Optional[int] = None


def worker_count() -> int:
    """当前使用的工作线程数"""
    if _worker_override is not None:
        return _worker_override
    configured = getattr(settings, "MAX_WORKERS", None)
    if configured:
        return max(1, int(configured))
    return max(1, int(settings.MAX_WORKERS_CAP))


def set_worker_count(workers: Optional[int]):
    """设置工作线程数（None 恢复为 settings 中的值）"""
    global _worker_override
    _worker_override = None if workers is None else max(1, int(workers))
    logger.debug(f"工作线程数已设置为 {worker_count()}")


def ordered_map(func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """
    并行执行 func，结果按提交顺序返回

    单线程或单任务时直接顺序执行，避免线程开销。
    """
    items = list(items)
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items)), thread_name_prefix="LabWorker") as executor:
        return list(executor.map(func, items))


def block_ranges(total: int, block: int) -> List[Tuple[int, int]]:
    """把 [0, total) 切成固定大小的块；切分只取决于问题规模"""
    block = max(1, int(block))
    return [(start, min(start + block, total)) for start in range(0, total, block)]


def compensated_sum(values: Union[np.ndarray, Iterable[float]]) -> float:
    """精确舍入求和（与求和顺序无关）"""
    if isinstance(values, np.ndarray):
        return math.fsum(values.ravel().tolist())
    return math.fsum(values)


def compensated_mean(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    return compensated_sum(values) / values.size


def derive_seed(seed: int, *labels: Union[int, str]) -> int:
    """
    由基础种子和标签派生独立子种子

    字符串标签用 crc32 转成整数，保证跨进程稳定。
    """
    keys = [int(seed) & 0xFFFFFFFF]
    for label in labels:
        if isinstance(label, str):
            keys.append(zlib.crc32(label.encode("utf-8")))
        else:
            keys.append(int(label) & 0xFFFFFFFF)
    state = np.random.SeedSequence(keys).generate_state(1, dtype=np.uint32)
    return int(state[0])


def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """
    枚举所有非负整数向量 (a_1, ..., a_parts)，满足 sum = total

    按字典序输出，共 C(total + parts - 1, parts - 1) 个。
    """
    if parts < 1:
        raise ValueError("parts 必须 >= 1")
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def is_prime(value: int) -> bool:
    if value < 2:
        return False
    if value < 4:
        return True
    if value % 2 == 0:
        return False
    divisor = 3
    while divisor * divisor <= value:
        if value % divisor == 0:
            return False
        divisor += 2
    return True
