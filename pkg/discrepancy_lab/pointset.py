"""
点集模块 - Point Sets
构造、变换与校验 [0,1]^d 中的点分布：随机点、Hammersley 点、Faure 型 p 进网格，
网格公理校验、矩形计数偏差与角点塌缩构造
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import settings
from .exceptions import DimensionMismatchError, InvalidPointSetError, NetParameterError
from .numerics import block_ranges, compositions, is_prime, ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorInfo:
    """点集来源元数据"""
    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "params": dict(self.params), "seed": self.seed}


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    [0,1]^d 中 N 个点的不可变有序列表

    坐标允许取到 1.0：任一坐标为 1 的点不属于任何 [0, x)，计数时永远不被计入。
    相等性只比较维数与坐标，不比较来源元数据。
    """
    points: np.ndarray
    generator: GeneratorInfo = field(default_factory=lambda: GeneratorInfo("manual"))

    def __post_init__(self):
        arr = np.array(self.points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise InvalidPointSetError(f"点集必须是二维数组 (N, d)，实际维数 {arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidPointSetError(f"点集要求 N >= 1 且 d >= 1，实际形状 {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidPointSetError("点集包含 NaN 或无穷大")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidPointSetError(
                f"坐标必须位于 [0,1]，实际范围 [{arr.min()}, {arr.max()}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    def __len__(self) -> int:
        return self.n_points

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.array_equal(self.points, other.points))

    def __hash__(self) -> int:
        return hash(self.digest())

    def __repr__(self) -> str:
        return f"PointSet(dim={self.dim}, N={self.n_points}, generator={self.generator.name!r})"

    def digest(self) -> str:
        """坐标内容的 sha256 摘要（缓存键）"""
        h = hashlib.sha256()
        h.update(f"{self.dim}:{self.n_points}:".encode("ascii"))
        h.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class NetParams:
    """p 进网格参数：N = p^s 个点，p 为素数且 p >= d"""
    base: int
    exponent: int
    dim: int

    def __post_init__(self):
        if not is_prime(self.base):
            raise NetParameterError(f"底数 p={self.base} 不是素数")
        if self.dim < 1:
            raise NetParameterError(f"维数 d={self.dim} 非法")
        if self.base < self.dim:
            raise NetParameterError(f"构造要求 p >= d，实际 p={self.base}, d={self.dim}")
        if self.exponent < 1:
            raise NetParameterError(f"指数 s={self.exponent} 必须 >= 1")
        if self.exponent * math.log2(self.base) >= settings.MAX_NET_POINTS_LOG2:
            raise NetParameterError(
                f"p^s = {self.base}^{self.exponent} 超出 2^{settings.MAX_NET_POINTS_LOG2}，坐标无法精确表示"
            )

    @property
    def n_points(self) -> int:
        return self.base ** self.exponent


@dataclass
class NetCheckResult:
    """网格公理校验结果；失败时给出第一个违例盒子"""
    passed: bool
    base: int
    exponent: int
    compositions_checked: int = 0
    exponents: Optional[Tuple[int, ...]] = None  # 违例盒子的 (a_1, ..., a_d)
    position: Optional[Tuple[int, ...]] = None  # 违例盒子的 (m_1, ..., m_d)
    count: Optional[int] = None  # 违例盒子内的点数

    def __bool__(self) -> bool:
        return self.passed

    def describe(self) -> str:
        if self.passed:
            return f"通过: 全部 {self.compositions_checked} 种指数组合的盒子恰含一点"
        return (f"失败: a={self.exponents}, m={self.position} 的盒子含 {self.count} 个点 "
                f"(p={self.base}, s={self.exponent})")


@dataclass
class CountingBoundResult:
    """随机矩形上的计数偏差统计"""
    max_deviation: float
    bound: float  # s^(d-1)
    trials: int
    worst_lower: Tuple[float, ...] = ()
    worst_upper: Tuple[float, ...] = ()

    @property
    def within_bound(self) -> bool:
        return self.max_deviation <= self.bound


# ==================== 构造 ====================

def radical_inverse(indices: Sequence[int], base: int) -> np.ndarray:
    """
    base 进制数字反转 φ_b(k) = Σ a_i b^{-i-1}

    统一按最大下标的位数 D 反转为整数再除以 b^D，base=2 时结果精确。
    """
    k = np.asarray(indices, dtype=np.int64)
    if k.size == 0:
        return np.zeros(0, dtype=np.float64)
    if k.min() < 0:
        raise ValueError("下标必须非负")
    digits = 1
    largest = int(k.max())
    while base ** digits <= largest:
        digits += 1
    numerator = np.zeros_like(k)
    rest = k.copy()
    for _ in range(digits):
        numerator = numerator * base + rest % base
        rest //= base
    return numerator / float(base ** digits)


def generate_random(dim: int, n_points: int, seed: int) -> PointSet:
    """种子确定的独立均匀点"""
    if dim < 1 or n_points < 1:
        raise InvalidPointSetError(f"要求 dim >= 1, N >= 1，实际 dim={dim}, N={n_points}")
    rng = np.random.default_rng(seed)
    points = rng.random((n_points, dim))
    return PointSet(points, GeneratorInfo("random", {"dim": dim, "n": n_points}, seed))


def generate_van_der_corput(n_points: int) -> PointSet:
    """二维 Hammersley 点 (k/N, φ_2(k))；N = 2^s 时是 2 进网格"""
    if n_points < 1:
        raise InvalidPointSetError(f"要求 N >= 1，实际 N={n_points}")
    k = np.arange(n_points, dtype=np.int64)
    points = np.column_stack([k / float(n_points), radical_inverse(k, 2)])
    return PointSet(points, GeneratorInfo("hammersley", {"n": n_points}))


def _faure_matrix(base: int, exponent: int, coordinate: int) -> np.ndarray:
    """第 coordinate 个坐标的生成矩阵 C[r][i] = C(i, r) j^(i-r) mod p（j=0 时为单位阵）"""
    matrix = np.zeros((exponent, exponent), dtype=np.int64)
    for r in range(exponent):
        for i in range(r, exponent):
            matrix[r, i] = (math.comb(i, r) % base) * pow(coordinate, i - r, base) % base
    return matrix


def generate_faure_net(base: int, exponent: int, dim: int) -> PointSet:
    """
    Faure 型生成矩阵构造的 p 进网格，共 p^s 个点

    坐标 j 使用 Pascal 矩阵的 j 次幂（mod p），要求 p >= d、s >= 2。
    """
    params = NetParams(base, exponent, dim)
    if exponent < 2:
        raise NetParameterError(f"网格构造要求 s >= 2，实际 s={exponent}")
    n_points = params.n_points
    k = np.arange(n_points, dtype=np.int64)
    digits = np.empty((n_points, exponent), dtype=np.int64)
    rest = k.copy()
    for i in range(exponent):
        digits[:, i] = rest % base
        rest //= base
    weights = np.array([base ** (exponent - 1 - r) for r in range(exponent)], dtype=np.int64)
    columns = []
    for j in range(dim):
        matrix = _faure_matrix(base, exponent, j)
        out_digits = (digits @ matrix.T) % base
        columns.append((out_digits @ weights) / float(n_points))
    points = np.column_stack(columns)
    logger.debug(f"Faure 网格已生成: p={base}, s={exponent}, d={dim}, N={n_points}")
    return PointSet(points, GeneratorInfo("faure", {"base": base, "exponent": exponent, "dim": dim}))


# ==================== 网格校验 ====================

def _padic_grid(points: np.ndarray, base: int, exponent: int) -> np.ndarray:
    """
    每个坐标在 p^-s 网格上的整数下标 floor(x p^s)

    接近格点的浮点值先吸附（p=3 等底数的有理坐标无法精确存储）；
    坐标 1.0 得到 p^s，表示不落在任何盒子里。
    """
    scale = float(base ** exponent)
    scaled = points * scale
    nearest = np.rint(scaled)
    tolerance = settings.PADIC_SNAP_TOLERANCE + 8.0 * np.finfo(np.float64).eps * scale
    snapped = np.where(np.abs(scaled - nearest) <= tolerance, nearest, np.floor(scaled))
    return snapped.astype(np.int64)


def verify_net(pointset: PointSet, base: int, exponent: int) -> NetCheckResult:
    """
    校验 p 进网格公理：每个体积 1/N 的 p 进盒子
    ∏ [m_j p^{-a_j}, (m_j+1) p^{-a_j})，Σ a_j = s，0 <= m_j < p^{a_j}，恰含一点

    盒子下标范围按 0 <= m_j < p^{a_j} 解释（字面上的 m_j < a_j 无法覆盖全部盒子）。
    对每种指数组合按 p 进地址分桶，O(N d)。
    """
    n_points = base ** exponent
    if pointset.n_points != n_points:
        raise NetParameterError(f"点数 {pointset.n_points} != p^s = {n_points}")
    dim = pointset.dim
    grid = _padic_grid(pointset.points, base, exponent)
    inside = np.all(grid < n_points, axis=1)
    grid_inside = grid[inside]
    all_exponents = list(compositions(exponent, dim))

    def first_violation(exps: Tuple[int, ...]) -> Optional[Tuple[int, int]]:
        index = np.zeros(grid_inside.shape[0], dtype=np.int64)
        stride = 1
        for j, a in enumerate(exps):
            index += (grid_inside[:, j] // base ** (exponent - a)) * stride
            stride *= base ** a
        counts = np.bincount(index, minlength=n_points)
        bad = np.flatnonzero(counts != 1)
        if bad.size == 0:
            return None
        return int(bad[0]), int(counts[bad[0]])

    violations = ordered_map(first_violation, all_exponents)
    for exps, violation in zip(all_exponents, violations):
        if violation is None:
            continue
        flat, count = violation
        position = []
        for a in exps:
            position.append(flat % base ** a)
            flat //= base ** a
        result = NetCheckResult(False, base, exponent, len(all_exponents), tuple(exps), tuple(position), count)
        logger.info(f"网格校验{result.describe()}")
        return result
    result = NetCheckResult(True, base, exponent, len(all_exponents))
    logger.debug(f"网格校验{result.describe()}")
    return result


def rectangle_deviation(pointset: PointSet, lower: Sequence[float], upper: Sequence[float]) -> float:
    """半开矩形 ∏ [lower_j, upper_j) 上的 |#(P ∩ R) - |R| N|"""
    lo = np.asarray(lower, dtype=np.float64)
    hi = np.asarray(upper, dtype=np.float64)
    if lo.shape != (pointset.dim,) or hi.shape != (pointset.dim,):
        raise DimensionMismatchError(f"矩形维数与点集维数 {pointset.dim} 不一致")
    pts = pointset.points
    count = int(np.count_nonzero(np.all((pts >= lo) & (pts < hi), axis=1)))
    volume = float(np.prod(np.clip(hi - lo, 0.0, None)))
    return abs(count - volume * pointset.n_points)


def check_counting_bound(pointset: PointSet, base: int, exponent: int,
                         trials: int, seed: int) -> CountingBoundResult:
    """
    随机轴平行矩形上的最大计数偏差 max |#(P ∩ R) - |R| N|

    网格应满足偏差 <= s^(d-1)；本函数只报告观测值，是否越界由调用方判定。
    """
    if pointset.n_points != base ** exponent:
        raise NetParameterError(f"点数 {pointset.n_points} != p^s = {base ** exponent}")
    dim = pointset.dim
    rng = np.random.default_rng(seed)
    corners = rng.random((trials, 2, dim))
    lower = corners.min(axis=1)
    upper = corners.max(axis=1)
    pts = pointset.points
    block = max(1, settings.COUNT_BLOCK_ELEMENTS // (pointset.n_points * dim))

    def block_deviation(span: Tuple[int, int]) -> np.ndarray:
        start, stop = span
        lo = lower[start:stop, None, :]
        hi = upper[start:stop, None, :]
        counts = np.count_nonzero(np.all((pts[None, :, :] >= lo) & (pts[None, :, :] < hi), axis=2), axis=1)
        volumes = np.prod(upper[start:stop] - lower[start:stop], axis=1)
        return np.abs(counts - volumes * pointset.n_points)

    deviations = np.concatenate(ordered_map(block_deviation, block_ranges(trials, block)))
    worst = int(np.argmax(deviations))
    result = CountingBoundResult(
        max_deviation=float(deviations[worst]),
        bound=float(exponent ** (dim - 1)),
        trials=trials,
        worst_lower=tuple(float(v) for v in lower[worst]),
        worst_upper=tuple(float(v) for v in upper[worst]),
    )
    logger.debug(f"计数偏差: max={result.max_deviation:.4f}, 界={result.bound}, 矩形数={trials}")
    return result


# ==================== 角点塌缩 ====================

def corner_threshold(n_points: int, delta: float) -> float:
    """角点立方体 Q = [1 - N^-δ, 1]^d 的下边界"""
    return 1.0 - float(n_points) ** (-delta)


def corner_cube_count(pointset: PointSet, delta: float) -> int:
    """落在 Q = [1 - N^-δ, 1]^d 内的点数"""
    threshold = corner_threshold(pointset.n_points, delta)
    return int(np.count_nonzero(np.all(pointset.points >= threshold, axis=1)))


def corner_collapse(pointset: PointSet, delta: float) -> PointSet:
    """
    把 Q = [1 - N^-δ, 1]^d 内的点全部替换为 (1, ..., 1)，其余点不变

    替换后的点永远不被 [0, x) 计入；操作幂等。
    """
    if delta <= 0:
        raise ValueError(f"delta 必须 > 0，实际 {delta}")
    threshold = corner_threshold(pointset.n_points, delta)
    inside = np.all(pointset.points >= threshold, axis=1)
    points = np.array(pointset.points)
    points[inside] = 1.0
    collapsed = int(np.count_nonzero(inside))
    logger.debug(f"角点塌缩: δ={delta}, 阈值={threshold:.6f}, 塌缩点数={collapsed}")
    params = {"delta": delta, "collapsed": collapsed, "source": pointset.generator.to_dict()}
    return PointSet(points, GeneratorInfo("corner_collapse", params, pointset.generator.seed))
