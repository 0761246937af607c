"""
异常定义
所有异常同时继承对应的内置异常，调用方可按 ValueError 统一捕获
"""


class DiscrepancyLabError(Exception):
    """包内异常基类"""


class InvalidPointSetError(DiscrepancyLabError, ValueError):
    """点集不满足约束（坐标越界、空集、维数非法）"""


class DimensionMismatchError(DiscrepancyLabError, ValueError):
    """查询点或另一点集的维数/点数与当前点集不一致"""


class NetParameterError(DiscrepancyLabError, ValueError):
    """网格参数非法：p 非素数、p < d、p^s 超出浮点精度等"""


class CapExceededError(DiscrepancyLabError, ValueError):
    """超出内存保护上限（形状阶数、测试函数规模、精确模式点数）"""


class UnsupportedModeError(DiscrepancyLabError, ValueError):
    """请求的计算模式不适用（如对正弦测试函数求精确内积）"""


class PointSetFormatError(DiscrepancyLabError, ValueError):
    """点集或 r-函数文件格式错误"""


class ConfigError(DiscrepancyLabError, ValueError):
    """实验配置错误（命令行退出码 2）"""
