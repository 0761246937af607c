"""
差异函数模块 - Discrepancy Function
D_N(x) = #(P ∩ [0, x)) - N |[0, x)| 的逐点求值、精确 L2 范数（两两核求和）、
Monte-Carlo L^p 范数与 Luxemburg (Orlicz) 范数，以及经验测度上的不等式校验
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from . import settings
from .exceptions import DimensionMismatchError
from .haar import roth_level
from .numerics import block_ranges, compensated_mean, compensated_sum, ordered_map
from .pointset import PointSet

logger = logging.getLogger(__name__)

METHODS = ("exact", "monte_carlo", "bisection_mc")


@dataclass(frozen=True)
class NormReport:
    """
    范数计算结果及其来源

    exact 的标准误恒为 0；Monte-Carlo 样本方差为 0 时标准误同样为 0，method 保持不变
    """
    norm_kind: str  # L1 | L2 | Lp(p) | LlogL(alpha) | expL
    value: float
    method: str  # exact | monte_carlo | bisection_mc
    std_error: float = 0.0
    samples: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"未知计算方法: {self.method}")
        if not self.value >= 0:
            raise ValueError(f"范数值必须非负，实际 {self.value}")
        if not self.std_error >= 0:
            raise ValueError(f"标准误必须非负，实际 {self.std_error}")
        if self.method == "exact" and self.std_error != 0:
            raise ValueError("精确方法的标准误必须为 0")

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def norm_label(p: float) -> str:
    if p == 1:
        return "L1"
    if p == 2:
        return "L2"
    return f"Lp({p:g})"


@dataclass(frozen=True)
class OrliczSpec:
    """
    Young 函数 Φ

    LlogL(α): Φ(t) = t (log(e + t))^α
    expL:     Φ(t) = e^t - 1
    """
    kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("LlogL", "expL"):
            raise ValueError(f"未知 Orlicz 类型: {self.kind}")
        if self.alpha < 0:
            raise ValueError(f"alpha 必须非负，实际 {self.alpha}")

    @property
    def label(self) -> str:
        return "expL" if self.kind == "expL" else f"LlogL({self.alpha:g})"

    @property
    def is_linear(self) -> bool:
        return self.kind == "LlogL" and self.alpha == 0

    def phi(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "expL":
            with np.errstate(over="ignore"):
                return np.expm1(t)
        if self.alpha == 0:
            return np.asarray(t, dtype=np.float64)
        return t * np.log(math.e + t) ** self.alpha

    def phi_prime(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "expL":
            with np.errstate(over="ignore"):
                return np.exp(t)
        if self.alpha == 0:
            return np.ones_like(t, dtype=np.float64)
        log_term = np.log(math.e + t)
        return log_term ** self.alpha + self.alpha * t * log_term ** (self.alpha - 1) / (math.e + t)

    def phi_inverse(self, y: float) -> float:
        if y <= 0:
            return 0.0
        if self.kind == "expL":
            return math.log1p(y)
        if self.alpha == 0:
            return float(y)
        # Φ(t) >= t，所以根落在 [0, y]
        return float(brentq(lambda t: float(self.phi(np.float64(t))) - y, 0.0, float(y)))


@dataclass
class DiscrepancySample:
    """
    固定的 Monte-Carlo 样本集及其上的函数值

    同一样本集上的各种范数构成同一个经验测度，经验不等式在其上精确成立。
    分层采样时样本按层连续存放，每层 per_stratum 个。
    """
    points: np.ndarray
    values: np.ndarray
    seed: int
    n_strata: int = 1
    per_stratum: int = 0

    @property
    def samples(self) -> int:
        return int(self.values.shape[0])

    @property
    def stratified(self) -> bool:
        return self.n_strata > 1


# ==================== 计数 ====================

class DominanceCounter:
    """
    严格支配计数 #{p ∈ P : p_j < x_j 对所有 j}

    d = 1 二分查找；d = 2 归并排序树（整数键，O((N + M) log² N)）；
    d >= 3 分块广播暴力计数。
    """

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=np.float64)
        self.n_points, self.dim = self.points.shape
        if self.dim == 1:
            self._sorted = np.sort(self.points[:, 0])
        elif self.dim == 2:
            self._build_tree()

    def _build_tree(self):
        order = np.argsort(self.points[:, 0], kind="stable")
        self._xs = self.points[order, 0]
        ys = self.points[order, 1]
        self._ys_sorted = np.sort(ys, kind="stable")
        rank = np.empty(self.n_points, dtype=np.int64)
        rank[np.argsort(ys, kind="stable")] = np.arange(self.n_points, dtype=np.int64)
        positions = np.arange(self.n_points, dtype=np.int64)
        self._levels = []
        level = 0
        while (1 << level) <= self.n_points:
            keys = (positions >> level) * self.n_points + rank
            self._levels.append(np.sort(keys))
            level += 1

    def count(self, queries: np.ndarray) -> np.ndarray:
        queries = np.asarray(queries, dtype=np.float64)
        if self.dim == 1:
            return np.searchsorted(self._sorted, queries[:, 0], side="left").astype(np.int64)
        if self.dim == 2:
            return self._count_tree(queries)
        return self._count_brute(queries)

    def _count_tree(self, queries: np.ndarray) -> np.ndarray:
        prefix = np.searchsorted(self._xs, queries[:, 0], side="left").astype(np.int64)
        below = np.searchsorted(self._ys_sorted, queries[:, 1], side="left").astype(np.int64)
        total = np.zeros(queries.shape[0], dtype=np.int64)
        start = np.zeros(queries.shape[0], dtype=np.int64)
        for level in range(len(self._levels) - 1, -1, -1):
            take = ((prefix >> level) & 1).astype(bool)
            if not take.any():
                continue
            block = start[take] >> level
            keys = self._levels[level]
            total[take] += np.searchsorted(keys, block * self.n_points + below[take], side="left") - (block << level)
            start[take] += 1 << level
        return total

    def _count_brute(self, queries: np.ndarray) -> np.ndarray:
        rows = max(1, settings.COUNT_BLOCK_ELEMENTS // (self.n_points * self.dim))
        out = np.empty(queries.shape[0], dtype=np.int64)
        for start, stop in block_ranges(queries.shape[0], rows):
            below = np.all(self.points[None, :, :] < queries[start:stop, None, :], axis=2)
            out[start:stop] = np.count_nonzero(below, axis=1)
        return out


def _as_queries(pointset: PointSet, x) -> Tuple[np.ndarray, bool]:
    queries = np.asarray(x, dtype=np.float64)
    single = queries.ndim == 1
    if single:
        queries = queries.reshape(1, -1)
    if queries.ndim != 2 or queries.shape[1] != pointset.dim:
        raise DimensionMismatchError(f"查询点维数 {queries.shape[-1]} 与点集维数 {pointset.dim} 不一致")
    if queries.size and (queries.min() < 0.0 or queries.max() > 1.0):
        raise ValueError("查询点必须位于 [0,1]^d")
    return queries, single


def count_points_below(pointset: PointSet, x) -> np.ndarray:
    """每个查询点 x 的 #(P ∩ [0, x))，分块并行"""
    queries, _ = _as_queries(pointset, x)
    counter = DominanceCounter(pointset.points)
    spans = block_ranges(queries.shape[0], settings.SAMPLE_BLOCK_SIZE)
    parts = ordered_map(lambda span: counter.count(queries[span[0]:span[1]]), spans)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def eval_discrepancy(pointset: PointSet, x):
    """
    D_N(x) = #{p : p_j < x_j ∀j} - N ∏ x_j

    x 为单点时返回 float，为 (M, d) 数组时返回长度 M 的数组。
    """
    queries, single = _as_queries(pointset, x)
    counts = count_points_below(pointset, queries)
    values = counts - pointset.n_points * np.prod(queries, axis=1)
    return float(values[0]) if single else values


# ==================== 精确 L2 ====================

def _live_points(points: np.ndarray) -> np.ndarray:
    """去掉有坐标等于 1 的点（核函数与线性项中都为 0）"""
    return points[np.all(points < 1.0, axis=1)]


def _pair_kernel_sum(a: np.ndarray, b: np.ndarray) -> float:
    """Σ_{p∈A, q∈B} ∏_j (1 - max(p_j, q_j))，固定分块，块内 numpy 求和，块间精确求和"""
    if a.shape[0] == 0 or b.shape[0] == 0:
        return 0.0
    rows = max(1, settings.PAIR_BLOCK_ELEMENTS // b.shape[0])

    def block_sum(span: Tuple[int, int]) -> float:
        blk = a[span[0]:span[1]]
        kernel = 1.0 - np.maximum(blk[:, None, 0], b[None, :, 0])
        for j in range(1, a.shape[1]):
            kernel *= 1.0 - np.maximum(blk[:, None, j], b[None, :, j])
        return float(kernel.sum())

    return compensated_sum(ordered_map(block_sum, block_ranges(a.shape[0], rows)))


def l2_norm_exact(pointset: PointSet) -> NormReport:
    """
    精确 ||D_N||_2（Warnock 型公式）

    ||D_N||_2^2 = N^2/3^d - 2N Σ_p ∏_j (1 - p_j^2)/2 + Σ_{p,q} ∏_j (1 - max(p_j, q_j))
    """
    n_points, dim = pointset.n_points, pointset.dim
    live = _live_points(pointset.points)
    linear = compensated_sum(np.prod((1.0 - live ** 2) / 2.0, axis=1)) if live.shape[0] else 0.0
    pair = _pair_kernel_sum(live, live)
    squared = compensated_sum([float(n_points) ** 2 / 3.0 ** dim, -2.0 * n_points * linear, pair])
    logger.debug(f"精确 L2: N={n_points}, d={dim}, 有效点={live.shape[0]}, ||D||_2^2={squared:.6g}")
    return NormReport("L2", math.sqrt(max(squared, 0.0)), "exact")


def _multiset_difference(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """返回 (A \\ B, B \\ A)（按多重集计）"""
    combined = np.concatenate([a, b])
    labels = np.concatenate([np.ones(a.shape[0]), -np.ones(b.shape[0])])
    unique, inverse = np.unique(combined, axis=0, return_inverse=True)
    net = np.bincount(inverse.ravel(), weights=labels, minlength=unique.shape[0]).astype(np.int64)
    only_a = np.repeat(unique, np.clip(net, 0, None), axis=0)
    only_b = np.repeat(unique, np.clip(-net, 0, None), axis=0)
    return only_a, only_b


def l2_distance_exact(pointset: PointSet, other: PointSet) -> NormReport:
    """
    精确 ||D_P - D_P'||_2（两点集点数相同，Lebesgue 项抵消）

    只对多重集差计算核函数，角点塌缩时代价只与塌缩点数有关。
    """
    if pointset.dim != other.dim or pointset.n_points != other.n_points:
        raise DimensionMismatchError("两点集的维数和点数必须相同")
    only_a, only_b = _multiset_difference(pointset.points, other.points)
    only_a, only_b = _live_points(only_a), _live_points(only_b)
    squared = compensated_sum([
        _pair_kernel_sum(only_a, only_a),
        -2.0 * _pair_kernel_sum(only_a, only_b),
        _pair_kernel_sum(only_b, only_b),
    ])
    return NormReport("L2", math.sqrt(max(squared, 0.0)), "exact")


# ==================== Monte-Carlo 采样 ====================

def _balanced_shape(level: int, dim: int) -> Tuple[int, ...]:
    return tuple(level // dim + (1 if j < level % dim else 0) for j in range(dim))


def sample_uniform(dim: int, samples: int, seed: int, stratify_level: int = 0) -> Tuple[np.ndarray, int, int]:
    """
    种子确定的均匀样本

    stratify_level > 0 时在形状 |r| = level 的二进网格上分层，
    每格样本数相同且连续存放。返回 (样本, 层数, 每层样本数)。
    """
    rng = np.random.default_rng(seed)
    if stratify_level <= 0:
        return rng.random((samples, dim)), 1, samples
    shape = _balanced_shape(stratify_level, dim)
    n_cells = 1 << stratify_level
    per_cell = samples // n_cells
    offsets = rng.random((n_cells * per_cell, dim))
    cell = np.arange(n_cells * per_cell, dtype=np.int64) // per_cell
    points = np.empty_like(offsets)
    shift = 0
    for j, r in enumerate(shape):
        pos = (cell >> shift) & ((1 << r) - 1)
        points[:, j] = (pos + offsets[:, j]) / float(1 << r)
        shift += r
    return points, n_cells, per_cell


def _stratify_level(pointset: PointSet, samples: int) -> int:
    level = roth_level(pointset.n_points)
    while level > 0 and samples // (1 << level) < 2:
        level -= 1
    if level < roth_level(pointset.n_points):
        logger.warning(f"⚠️  样本数 {samples} 不足以按 |r|={roth_level(pointset.n_points)} 分层，降为 |r|={level}")
    return level


def _evaluate_blocks(func, queries: np.ndarray) -> np.ndarray:
    spans = block_ranges(queries.shape[0], settings.SAMPLE_BLOCK_SIZE)
    parts = ordered_map(lambda span: func(queries[span[0]:span[1]]), spans)
    return np.concatenate(parts) if parts else np.zeros(0)


def sample_discrepancy(pointset: PointSet, samples: int, seed: int, stratified: bool = False) -> DiscrepancySample:
    """在固定样本集上求 D_N 的值"""
    if samples < 2:
        raise ValueError(f"样本数必须 >= 2，实际 {samples}")
    level = _stratify_level(pointset, samples) if stratified else 0
    queries, n_strata, per_stratum = sample_uniform(pointset.dim, samples, seed, level)
    counter = DominanceCounter(pointset.points)
    n_points = pointset.n_points
    values = _evaluate_blocks(lambda q: counter.count(q) - n_points * np.prod(q, axis=1), queries)
    return DiscrepancySample(queries, values, seed, n_strata, per_stratum)


def difference_sample(pointset: PointSet, other: PointSet, samples: int, seed: int) -> DiscrepancySample:
    """D_P - D_P' 在样本集上的值（只差计数项）"""
    if pointset.dim != other.dim or pointset.n_points != other.n_points:
        raise DimensionMismatchError("两点集的维数和点数必须相同")
    queries, _, _ = sample_uniform(pointset.dim, samples, seed)
    only_a, only_b = _multiset_difference(pointset.points, other.points)
    counter_a = DominanceCounter(only_a) if only_a.shape[0] else None
    counter_b = DominanceCounter(only_b) if only_b.shape[0] else None

    def block_values(q: np.ndarray) -> np.ndarray:
        out = np.zeros(q.shape[0], dtype=np.float64)
        if counter_a is not None:
            out += counter_a.count(q)
        if counter_b is not None:
            out -= counter_b.count(q)
        return out

    return DiscrepancySample(queries, _evaluate_blocks(block_values, queries), seed)


def sample_mean_with_error(values: np.ndarray, sample: DiscrepancySample) -> Tuple[float, float]:
    """样本均值及其标准误（分层时用层内方差）"""
    mean = compensated_mean(values)
    if sample.stratified and sample.per_stratum >= 2:
        per_layer = values.reshape(sample.n_strata, sample.per_stratum)
        variances = per_layer.var(axis=1, ddof=1)
        variance_of_mean = compensated_sum(variances) / (sample.per_stratum * sample.n_strata ** 2)
    else:
        variance_of_mean = float(values.var(ddof=1)) / values.shape[0] if values.shape[0] > 1 else 0.0
    return mean, math.sqrt(max(variance_of_mean, 0.0))


def power_mean(abs_values: np.ndarray, p: float) -> float:
    if p == 1:
        return compensated_mean(abs_values)
    return compensated_mean(abs_values ** p) ** (1.0 / p)


def lp_norm_from_sample(sample: DiscrepancySample, p: float) -> NormReport:
    """
    (mean |v_i|^p)^(1/p)，标准误由 p 阶矩估计经 delta 方法传递
    se(norm) = (1/p) m^(1/p - 1) se(m)
    """
    if p < 1:
        raise ValueError(f"p 必须 >= 1，实际 {p}")
    abs_values = np.abs(sample.values)
    powered = abs_values if p == 1 else abs_values ** p
    moment, moment_error = sample_mean_with_error(powered, sample)
    if moment <= 0:
        return NormReport(norm_label(p), 0.0, "monte_carlo", 0.0, sample.samples, sample.seed)
    value = moment if p == 1 else moment ** (1.0 / p)
    error = moment_error / p * moment ** (1.0 / p - 1.0)
    return NormReport(norm_label(p), value, "monte_carlo", error, sample.samples, sample.seed)


def lp_norm_mc(pointset: PointSet, p: float, samples: int, seed: int, stratified: bool = False) -> NormReport:
    """Monte-Carlo 估计 ||D_N||_p"""
    return lp_norm_from_sample(sample_discrepancy(pointset, samples, seed, stratified), p)


# ==================== Orlicz 范数 ====================

def luxemburg_norm(values: np.ndarray, spec: OrliczSpec, tol: Optional[float] = None) -> Tuple[float, float]:
    """
    经验测度上的 Luxemburg 范数 inf{λ > 0 : mean Φ(|v_i|/λ) <= 1}

    二分初始区间 [max|v|/Φ^-1(M), max|v|]，上界不满足约束时倍增。
    返回 (范数, 隐函数 delta 方法标准误)。
    """
    tol = settings.ORLICZ_BISECTION_TOL if tol is None else tol
    if tol <= 0:
        raise ValueError(f"tol 必须 > 0，实际 {tol}")
    magnitudes = np.abs(np.asarray(values, dtype=np.float64)).ravel()
    count = magnitudes.shape[0]
    top = float(magnitudes.max()) if count else 0.0
    if top == 0.0:
        return 0.0, 0.0
    if spec.is_linear:
        mean = compensated_mean(magnitudes)
        error = math.sqrt(float(magnitudes.var(ddof=1)) / count) if count > 1 else 0.0
        return mean, error

    def modular(lam: float) -> float:
        phi = spec.phi(magnitudes / lam)
        if not np.all(np.isfinite(phi)) or float(phi.max()) > 1e300:
            return math.inf
        return compensated_mean(phi)

    lower = top / spec.phi_inverse(float(count))
    upper = top
    widenings = 0
    while modular(upper) > 1.0:
        lower, upper = upper, upper * 2.0
        widenings += 1
        if widenings > settings.ORLICZ_MAX_WIDENING:
            raise RuntimeError("Luxemburg 范数二分上界扩张失败")
    if widenings:
        logger.debug(f"Luxemburg 二分上界倍增 {widenings} 次")
    while upper - lower > tol * upper:
        middle = 0.5 * (lower + upper)
        if modular(middle) <= 1.0:
            upper = middle
        else:
            lower = middle

    scaled = magnitudes / upper
    phi_values = spec.phi(scaled)
    slope = compensated_mean(spec.phi_prime(scaled) * scaled / upper)
    spread = math.sqrt(float(phi_values.var(ddof=1)) / count) if count > 1 else 0.0
    error = spread / slope if slope > 0 and math.isfinite(spread) else 0.0
    return upper, error


def orlicz_norm_from_sample(sample: DiscrepancySample, spec: OrliczSpec, tol: Optional[float] = None) -> NormReport:
    value, error = luxemburg_norm(sample.values, spec, tol)
    return NormReport(spec.label, value, "bisection_mc", error, sample.samples, sample.seed)


def orlicz_norm_mc(pointset: PointSet, spec: OrliczSpec, samples: int, seed: int,
                   tol: Optional[float] = None) -> NormReport:
    """Monte-Carlo 样本上的 Luxemburg 范数 ||D_N||_Φ"""
    return orlicz_norm_from_sample(sample_discrepancy(pointset, samples, seed), spec, tol)


# ==================== 经验测度不等式 ====================

@dataclass
class InterpolationCheck:
    """||f||_{2p/(p+1)} <= ||f||_1^{1/2} ||f||_p^{1/2}（经验测度上的 Hölder）"""
    p: float
    lhs: float
    rhs: float
    holds: bool

    def __bool__(self) -> bool:
        return self.holds


def interpolation_check_values(values: np.ndarray, p: float) -> InterpolationCheck:
    if p <= 1:
        raise ValueError(f"p 必须 > 1，实际 {p}")
    magnitudes = np.abs(np.asarray(values, dtype=np.float64))
    q = 2.0 * p / (p + 1.0)
    lhs = power_mean(magnitudes, q)
    rhs = math.sqrt(power_mean(magnitudes, 1.0) * power_mean(magnitudes, p))
    holds = lhs <= rhs * (1.0 + settings.EMPIRICAL_INEQUALITY_RTOL)
    return InterpolationCheck(p, lhs, rhs, holds)


def check_interpolation(pointset: PointSet, p: float, samples: int, seed: int) -> InterpolationCheck:
    """在公共样本集上校验插值不等式"""
    result = interpolation_check_values(sample_discrepancy(pointset, samples, seed).values, p)
    if not result.holds:
        logger.error(f"❌ 插值不等式不成立: lhs={result.lhs:.12g} > rhs={result.rhs:.12g}")
    return result


@dataclass
class EmpiricalInequalities:
    l1: float
    l2: float
    l1_le_l2: bool
    interpolation: InterpolationCheck

    @property
    def all_hold(self) -> bool:
        return self.l1_le_l2 and self.interpolation.holds


def empirical_inequalities(sample: DiscrepancySample, p: float = 2.0) -> EmpiricalInequalities:
    """同一样本集上的 L1 <= L2 与插值不等式"""
    magnitudes = np.abs(sample.values)
    l1 = power_mean(magnitudes, 1.0)
    l2 = power_mean(magnitudes, 2.0)
    return EmpiricalInequalities(
        l1=l1,
        l2=l2,
        l1_le_l2=l1 <= l2 * (1.0 + settings.EMPIRICAL_INEQUALITY_RTOL),
        interpolation=interpolation_check_values(sample.values, p),
    )
