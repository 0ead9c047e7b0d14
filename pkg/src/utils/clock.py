"""
可注入的时钟
wall: 单调时钟实测；frozen: 恒为0，保证确定性运行的结果逐字节一致
"""

import time
from enum import Enum


class ClockMode(str, Enum):
    """时钟模式"""
    AUTO = "auto"
    WALL = "wall"
    FROZEN = "frozen"


class Clock:
    """单调时钟，单位秒"""

    frozen = False

    def now(self) -> float:
        return time.perf_counter()

    def elapsed_ms(self, started: float) -> float:
        return round((self.now() - started) * 1000.0, 3)


class FrozenClock(Clock):
    """冻结时钟"""

    frozen = True

    def now(self) -> float:
        return 0.0


def make_clock(mode: ClockMode, hermetic: bool) -> Clock:
    """
    按模式创建时钟

    Args:
        mode: 时钟模式
        hermetic: 所有后端都是本地确定性后端时，auto模式冻结时钟
    """
    if mode == ClockMode.FROZEN or (mode == ClockMode.AUTO and hermetic):
        return FrozenClock()
    return Clock()
