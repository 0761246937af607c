"""
测试函数模块 - Composite Test Functions
由贪心 r-函数组合出的 Z、Y_dichotomy、Y_sine，
它们与 D_N 的内积、经验分布尾部及截断 exp(L) 范数
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import settings
from .discrepancy import (DiscrepancySample, NormReport, OrliczSpec, lp_norm_from_sample, luxemburg_norm,
                          power_mean, sample_discrepancy, sample_mean_with_error, sample_uniform)
from .exceptions import CapExceededError, UnsupportedModeError
from .haar import (RFunction, ShapeVector, build_r_function_greedy, eval_r_function, gram_inner,
                   inner_product_exact, roth_level, shapes_of_order)
from .numerics import block_ranges, compensated_sum, ordered_map
from .pointset import PointSet
from .storage import LabDatabase

logger = logging.getLogger(__name__)

KINDS = ("Z", "Y_dichotomy", "Y_sine")


@dataclass(frozen=True)
class TestFunction:
    """
    r-函数的组合

    线性类型 (Z, Y_dichotomy)：T(x) = base_scale Σ f_r(x) / divisor
    Y_sine：T(x) = base_scale Σ_j sin(c n^-1/2 Σ_{r_1 = j} f_r(x))
    """
    __test__ = False  # 不是 pytest 测试类

    kind: str
    groups: Tuple[Tuple[RFunction, ...], ...]
    n: int
    dim: int
    base_scale: float
    divisor: float = 1.0
    epsilon: Optional[float] = None
    c: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"未知测试函数类型: {self.kind}")

    @property
    def is_linear(self) -> bool:
        return self.kind != "Y_sine"

    @property
    def q(self) -> float:
        return self.divisor

    @property
    def shapes(self) -> List[ShapeVector]:
        return [f.shape for group in self.groups for f in group]

    def components(self) -> List[Tuple[float, RFunction]]:
        """线性类型的 (权重, r-函数) 列表"""
        if not self.is_linear:
            raise UnsupportedModeError("Y_sine 对 Haar 分量非线性，没有权重分解")
        weight = self.base_scale / self.divisor
        return [(weight, f) for group in self.groups for f in group]

    def scaled(self, factor: float) -> "TestFunction":
        return replace(self, base_scale=self.base_scale * factor)

    def _evaluate_block(self, x: np.ndarray) -> np.ndarray:
        if self.is_linear:
            total = np.zeros(x.shape[0], dtype=np.float64)
            for group in self.groups:
                for f in group:
                    total += eval_r_function(f, x)
            return self.base_scale * total / self.divisor
        inner_scale = self.c / math.sqrt(self.n)
        total = np.zeros(x.shape[0], dtype=np.float64)
        for group in self.groups:
            partial = np.zeros(x.shape[0], dtype=np.float64)
            for f in group:
                partial += eval_r_function(f, x)
            total += np.sin(inner_scale * partial)
        return self.base_scale * total

    def evaluate(self, x) -> np.ndarray:
        """逐点求值，样本分块并行"""
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        spans = block_ranges(arr.shape[0], settings.SAMPLE_BLOCK_SIZE)
        parts = ordered_map(lambda span: self._evaluate_block(arr[span[0]:span[1]]), spans)
        return np.concatenate(parts) if parts else np.zeros(0)

    def l2_norm_squared_exact(self) -> float:
        """由 r-函数的精确 Gram 矩阵计算 ||T||_2^2"""
        if not self.is_linear:
            raise UnsupportedModeError("Y_sine 不支持精确 L2 计算")
        functions = [f for group in self.groups for f in group]
        by_shape: Dict[ShapeVector, List[RFunction]] = {}
        for f in functions:
            by_shape.setdefault(f.shape, []).append(f)
        gram = compensated_sum(
            gram_inner(f, g) for same in by_shape.values() for f in same for g in same
        )
        weight = self.base_scale / self.divisor
        return weight * weight * gram


# ==================== 构造 ====================

def greedy_components(pointset: PointSet, shapes: Sequence[ShapeVector],
                      cache: Optional[LabDatabase] = None) -> List[RFunction]:
    """
    每个形状的贪心 r-函数

    先查缓存，只有缺失的形状并行计算，算完写回。
    """
    total_bits = sum(shape.n_rectangles for shape in shapes)
    if total_bits > settings.MAX_TEST_FUNCTION_BITS:
        raise CapExceededError(f"测试函数符号位总数 {total_bits} 超过上限 {settings.MAX_TEST_FUNCTION_BITS}")
    digest = pointset.digest() if cache is not None else ""
    found: Dict[int, RFunction] = {}
    if cache is not None:
        for i, shape in enumerate(shapes):
            cached = cache.get_r_function(digest, shape)
            if cached is not None:
                found[i] = cached
    missing = [i for i in range(len(shapes)) if i not in found]
    built = ordered_map(lambda i: build_r_function_greedy(pointset, shapes[i]), missing)
    for i, f in zip(missing, built):
        found[i] = f
        if cache is not None:
            cache.put_r_function(digest, f)
    if cache is not None:
        logger.debug(f"r-函数缓存: 命中 {len(shapes) - len(missing)}，新建 {len(missing)}")
    return [found[i] for i in range(len(shapes))]


def _resolve_level(pointset: PointSet, n: Optional[int]) -> int:
    level = roth_level(pointset.n_points) if n is None else int(n)
    if level < 0:
        raise ValueError(f"n 必须非负，实际 {level}")
    return level


def build_Z(pointset: PointSet, n: Optional[int] = None, cache: Optional[LabDatabase] = None) -> TestFunction:
    """Z = n^-(d-1)/2 Σ_{|r|=n} f_r，默认 n = ⌈1 + log2 N⌉"""
    level = _resolve_level(pointset, n)
    shapes = shapes_of_order(pointset.dim, level)
    functions = greedy_components(pointset, shapes, cache)
    scale = float(level) ** (-(pointset.dim - 1) / 2.0) if level > 0 else 1.0
    logger.debug(f"Z 已构造: d={pointset.dim}, n={level}, 形状数={len(shapes)}")
    return TestFunction("Z", (tuple(functions),), level, pointset.dim, scale)


def build_Y_dichotomy(pointset: PointSet, epsilon: float, n: Optional[int] = None,
                      cache: Optional[LabDatabase] = None) -> TestFunction:
    """Y = Z / q，q = n^ε"""
    if not 0 < epsilon <= 0.5:
        raise ValueError(f"epsilon 必须位于 (0, 1/2]，实际 {epsilon}")
    z = build_Z(pointset, n, cache)
    return replace(z, kind="Y_dichotomy", divisor=float(z.n) ** epsilon, epsilon=epsilon)


def build_Y_sine(pointset: PointSet, c: Optional[float] = None, n: Optional[int] = None,
                 cache: Optional[LabDatabase] = None, allow_any_dimension: bool = False) -> TestFunction:
    """
    Y = n^-1/2 Σ_{j=1}^{⌊n/2⌋} sin(c n^-1/2 Σ_{r_1=j, |r|=n} f_r)

    构造本身是三维的；allow_any_dimension 允许在其他维数上做探索性计算。
    """
    if pointset.dim != 3 and not allow_any_dimension:
        raise UnsupportedModeError(f"Y_sine 只在 d=3 定义，实际 d={pointset.dim}")
    c = settings.DEFAULT_SINE_C if c is None else c
    if not 0 < c < 1:
        raise ValueError(f"c 必须位于 (0, 1)，实际 {c}")
    level = _resolve_level(pointset, n)
    if level < 1:
        raise ValueError("Y_sine 要求 n >= 1")
    if pointset.dim != 3:
        logger.warning(f"⚠️  Y_sine 在 d={pointset.dim} 上的探索性构造")
    group_shapes = []
    for j in range(1, level // 2 + 1):
        if pointset.dim == 1:
            group_shapes.append([ShapeVector((j,))] if j == level else [])
        else:
            group_shapes.append([ShapeVector((j,) + rest.r) for rest in shapes_of_order(pointset.dim - 1, level - j)])
    flat = [shape for shapes in group_shapes for shape in shapes]
    functions = iter(greedy_components(pointset, flat, cache))
    groups = tuple(tuple(next(functions) for _ in shapes) for shapes in group_shapes)
    return TestFunction("Y_sine", groups, level, pointset.dim, 1.0 / math.sqrt(level), c=c)


# ==================== 内积 ====================

@dataclass(frozen=True)
class InnerProductReport:
    """⟨D_N, T⟩ 及其来源"""
    kind: str
    value: float
    method: str  # exact | monte_carlo
    std_error: float = 0.0
    samples: int = 0
    seed: Optional[int] = None

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def inner_product_from_sample(sample: DiscrepancySample, test_function: TestFunction) -> InnerProductReport:
    products = sample.values * test_function.evaluate(sample.points)
    mean, error = sample_mean_with_error(products, sample)
    return InnerProductReport(test_function.kind, mean, "monte_carlo", error, sample.samples, sample.seed)


def inner_product(pointset: PointSet, test_function: TestFunction, mode: str = "exact",
                  samples: Optional[int] = None, seed: Optional[int] = None,
                  stratified: bool = False) -> InnerProductReport:
    """
    ⟨D_N, T⟩

    exact: 线性类型按 Haar 系数精确求和；Y_sine 不支持
    monte_carlo: 样本均值与标准误
    """
    if mode == "exact":
        if not test_function.is_linear:
            raise UnsupportedModeError("Y_sine 对 Haar 分量非线性，只能用 monte_carlo 模式")
        value = compensated_sum(weight * inner_product_exact(pointset, f)
                                for weight, f in test_function.components())
        return InnerProductReport(test_function.kind, value, "exact")
    if mode == "monte_carlo":
        samples = settings.DEFAULT_SAMPLES if samples is None else samples
        seed = settings.DEFAULT_SEED if seed is None else seed
        return inner_product_from_sample(sample_discrepancy(pointset, samples, seed, stratified), test_function)
    raise ValueError(f"未知模式: {mode}")


# ==================== 分布与范数 ====================

def sample_test_function(test_function: TestFunction, samples: int, seed: int) -> DiscrepancySample:
    """测试函数在均匀样本上的值（沿用样本集容器）"""
    points, _, _ = sample_uniform(test_function.dim, samples, seed)
    return DiscrepancySample(points, test_function.evaluate(points), seed)


def lp_norm_test_function(test_function: TestFunction, p: float, samples: int, seed: int) -> NormReport:
    """Monte-Carlo ||T||_p"""
    return lp_norm_from_sample(sample_test_function(test_function, samples, seed), p)


@dataclass
class TailReport:
    """
    经验分布尾部 |{|T| > t}| 及 log 生存函数 ≈ a - b t^2 的最小二乘拟合

    envelope_a 是使 exp(a - b t^2) 在所有拟合阈值上不低于经验值的最小 a。
    """
    kind: str
    thresholds: List[float]
    survival: List[float]
    exceedances: List[int]
    samples: int
    seed: int
    fit_a: Optional[float] = None
    fit_b: Optional[float] = None
    r_squared: Optional[float] = None
    envelope_a: Optional[float] = None
    range_limit: Optional[float] = None
    fitted_thresholds: List[float] = field(default_factory=list)
    excluded: List[Tuple[float, str]] = field(default_factory=list)

    @property
    def has_fit(self) -> bool:
        return self.fit_b is not None

    def envelope(self, t: float) -> float:
        if not self.has_fit:
            raise ValueError("没有可用的拟合")
        return math.exp(self.envelope_a - self.fit_b * t * t)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["excluded"] = [{"threshold": t, "reason": reason} for t, reason in self.excluded]
        return data


def tail_range_limit(n: int, dim: int) -> Optional[float]:
    """拟合阈值上限 C n^{(1-2ε)/(4d-2)}，ε 取 1/d；常数为 None 时不设上限"""
    constant = settings.TAIL_RANGE_CONSTANT
    if constant is None:
        return None
    epsilon = 1.0 / dim
    return constant * float(max(n, 1)) ** ((1.0 - 2.0 * epsilon) / (4.0 * dim - 2.0))


def survival_report(values: np.ndarray, thresholds: Sequence[float], kind: str, samples: int, seed: int,
                    range_limit: Optional[float] = None) -> TailReport:
    """任意样本值的生存函数与 exp(a - b t^2) 拟合"""
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise ValueError("阈值列表不能为空")
    if thresholds[0] < 0 or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("阈值必须非负且严格递增")
    magnitudes = np.sort(np.abs(np.asarray(values, dtype=np.float64)))
    total = magnitudes.shape[0]
    exceed = [int(total - np.searchsorted(magnitudes, t, side="right")) for t in thresholds]
    survival = [count / total for count in exceed]

    report = TailReport(kind, thresholds, survival, exceed, samples, seed, range_limit=range_limit)
    xs, ys = [], []
    for t, count, s in zip(thresholds, exceed, survival):
        if count < settings.TAIL_MIN_EXCEEDANCES:
            report.excluded.append((t, f"超出数 {count} < {settings.TAIL_MIN_EXCEEDANCES}"))
        elif range_limit is not None and t >= range_limit:
            report.excluded.append((t, f"超出拟合范围 t < {range_limit:.4g}"))
        else:
            report.fitted_thresholds.append(t)
            xs.append(t * t)
            ys.append(math.log(s))
    if report.excluded:
        logger.warning(f"⚠️  {len(report.excluded)} 个阈值未参与拟合")
    if len(xs) < 2:
        logger.warning("⚠️  有效阈值不足两个，跳过尾部拟合")
        return report

    x = np.asarray(xs)
    y = np.asarray(ys)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (intercept + slope * x)
    spread = float(np.sum((y - y.mean()) ** 2))
    report.fit_a = float(intercept)
    report.fit_b = float(-slope)
    report.r_squared = 1.0 - float(np.sum(residual ** 2)) / spread if spread > 0 else 1.0
    report.envelope_a = float(np.max(y + report.fit_b * x))
    logger.debug(f"尾部拟合: a={report.fit_a:.4f}, b={report.fit_b:.4f}, R²={report.r_squared:.4f}")
    return report


def tail_distribution(test_function: TestFunction, thresholds: Sequence[float], samples: int, seed: int,
                      limit_range: bool = True) -> TailReport:
    """测试函数在均匀样本上的经验生存函数与亚高斯拟合"""
    sample = sample_test_function(test_function, samples, seed)
    limit = tail_range_limit(test_function.n, test_function.dim) if limit_range else None
    return survival_report(sample.values, thresholds, test_function.kind, samples, seed, limit)


@dataclass
class DichotomySplit:
    """
    ⟨D, Y⟩ 按 {|Y| <= 1} 与 {|Y| > 1} 拆分（同一样本集）

    大值部分由 |{|Y|>1}|^{1/4} ||Y||_4 ||D||_2 控制（经验测度上的 Hölder）。
    """
    inner: float
    inner_small: float
    large_abs: float
    large_measure: float
    y_l4: float
    d_l2: float
    holder_bound: float
    samples: int
    seed: int

    @property
    def holder_holds(self) -> bool:
        return self.large_abs <= self.holder_bound * (1.0 + settings.EMPIRICAL_INEQUALITY_RTOL)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["holder_holds"] = self.holder_holds
        return data


def dichotomy_split(pointset: PointSet, test_function: TestFunction, samples: int, seed: int) -> DichotomySplit:
    sample = sample_discrepancy(pointset, samples, seed)
    y = test_function.evaluate(sample.points)
    d = sample.values
    large = np.abs(y) > 1.0
    products = d * y
    large_measure = float(np.count_nonzero(large)) / sample.samples
    y_l4 = power_mean(np.abs(y), 4.0)
    d_l2 = power_mean(np.abs(d), 2.0)
    return DichotomySplit(
        inner=compensated_sum(products) / sample.samples,
        inner_small=compensated_sum(products[~large]) / sample.samples,
        large_abs=compensated_sum(np.abs(products[large])) / sample.samples,
        large_measure=large_measure,
        y_l4=y_l4,
        d_l2=d_l2,
        holder_bound=large_measure ** 0.25 * y_l4 * d_l2,
        samples=sample.samples,
        seed=seed,
    )


@dataclass
class TruncatedExpNorm:
    """||T 1{|T|>α}||_exp(L) 与 α^-1 的对照"""
    alpha: float
    norm: NormReport
    measure: float

    @property
    def inverse_alpha(self) -> float:
        return 1.0 / self.alpha

    @property
    def ratio(self) -> float:
        return self.norm.value * self.alpha

    def to_dict(self) -> Dict:
        return {"alpha": self.alpha, "inverse_alpha": self.inverse_alpha, "ratio": self.ratio,
                "measure": self.measure, "norm": self.norm.to_dict()}


def truncated_exp_norm(test_function: TestFunction, alpha: float, samples: int, seed: int) -> TruncatedExpNorm:
    if alpha <= 0:
        raise ValueError(f"alpha 必须 > 0，实际 {alpha}")
    sample = sample_test_function(test_function, samples, seed)
    large = np.abs(sample.values) > alpha
    truncated = np.where(large, sample.values, 0.0)
    spec = OrliczSpec("expL")
    value, error = luxemburg_norm(truncated, spec)
    norm = NormReport(spec.label, value, "bisection_mc", error, samples, seed)
    return TruncatedExpNorm(alpha, norm, float(np.count_nonzero(large)) / samples)
