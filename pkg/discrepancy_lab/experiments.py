"""
实验编排 - Experiments
实验配置（预设 < 配置文件 < 命令行）、点集分发、逐行并行计算与报告汇总
"""

import hashlib
import json
import logging
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from . import __version__, settings
from .discrepancy import (OrliczSpec, difference_sample, empirical_inequalities, l2_distance_exact, l2_norm_exact,
                          lp_norm_from_sample, orlicz_norm_from_sample, sample_discrepancy)
from .exceptions import ConfigError, DiscrepancyLabError, NetParameterError
from .haar import all_coefficients, build_r_function_greedy, inner_product_exact, roth_level, shapes_of_order
from .numerics import derive_seed, is_prime, ordered_map
from .pointset import (PointSet, check_counting_bound, corner_collapse, generate_faure_net, generate_random,
                       generate_van_der_corput, verify_net)
from .storage import LabDatabase, load_pointset
from .testfn import (build_Y_dichotomy, build_Y_sine, build_Z, dichotomy_split, greedy_components, inner_product,
                     inner_product_from_sample, lp_norm_test_function, tail_distribution, truncated_exp_norm)

logger = logging.getLogger(__name__)

GENERATORS = ("random", "hammersley", "faure")
# csv: 每个范数一行的长表；csv-wide: 每个 (d, N) 一行的宽表
FORMATS = ("json", "csv", "csv-wide")
NORM_CSV_COLUMNS = ["generator", "d", "N", "norm_kind", "value", "std_error"]
NORM_REPORT_FIELDS = {"norm_kind", "value", "method", "std_error", "samples", "seed"}
TEST_FUNCTION_KINDS = ("Z", "Y_dichotomy", "Y_sine")


# ==================== 配置 ====================

def parse_n_list(text: str) -> List[int]:
    """
    N 列表：逗号分隔的整数、幂 B^a、或幂区间 B^a..B^b

    例: "64,256,2^10..2^12" -> [64, 256, 1024, 2048, 4096]
    """
    values = []
    for token in str(text).replace(" ", "").split(","):
        if not token:
            continue
        match = re.fullmatch(r"(\d+)\^(\d+)\.\.(\d+)\^(\d+)", token)
        if match:
            base, first, base_end, last = (int(g) for g in match.groups())
            if base != base_end or first > last:
                raise ConfigError(f"N 区间非法: {token}")
            values.extend(base ** k for k in range(first, last + 1))
            continue
        match = re.fullmatch(r"(\d+)\^(\d+)", token)
        if match:
            values.append(int(match.group(1)) ** int(match.group(2)))
            continue
        try:
            values.append(int(token))
        except ValueError:
            raise ConfigError(f"无法解析 N: {token}")
    if not values:
        raise ConfigError("N 列表为空")
    return values


def _parse_float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"无法解析数值列表 {text!r}: {e}")


def _parse_int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"无法解析整数列表 {text!r}: {e}")


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"无法解析布尔值: {text!r}")


def _parse_optional_float(text: str) -> Optional[float]:
    return None if str(text).strip().lower() in ("", "none") else float(text)


def _parse_optional_int(text: str) -> Optional[int]:
    return None if str(text).strip().lower() in ("", "none") else int(text)


def _parse_optional_str(text: str) -> Optional[str]:
    return None if str(text).strip().lower() in ("", "none") else str(text).strip()


FIELD_PARSERS: Dict[str, Callable[[str], Any]] = {
    "generator": str,
    "base": int,
    "dims": _parse_int_list,
    "n_list": parse_n_list,
    "samples": int,
    "seed": int,
    "output": _parse_optional_str,
    "format": str,
    "delta": _parse_optional_float,
    "epsilon": float,
    "sine_c": _parse_float_list,
    "p": float,
    "thresholds": _parse_float_list,
    "kind": str,
    "stratified": _parse_bool,
    "trials": int,
    "order": _parse_optional_int,
    "points": _parse_optional_str,
}

# 配置文件中与命令行参数同名的写法
KEY_ALIASES = {"dim": "dims", "out": "output", "sine": "sine_c"}

# 只影响输出位置、不影响结果的字段，不进入报告回显
NON_RESULT_FIELDS = ("experiment", "output", "format")


@dataclass
class ExperimentConfig:
    """一次实验的全部参数；种子必填（有默认值）"""
    experiment: str
    generator: str = "hammersley"
    base: int = 2
    dims: List[int] = field(default_factory=lambda: [2])
    n_list: List[int] = field(default_factory=lambda: [256])
    samples: int = settings.DEFAULT_SAMPLES
    seed: int = settings.DEFAULT_SEED
    output: Optional[str] = None
    format: str = "json"
    delta: Optional[float] = None
    epsilon: float = settings.DEFAULT_DICHOTOMY_EPSILON
    sine_c: List[float] = field(default_factory=lambda: list(settings.SINE_C_SWEEP))
    p: float = 2.0
    thresholds: List[float] = field(default_factory=lambda: list(settings.DEFAULT_TAIL_THRESHOLDS))
    kind: str = "Z"
    stratified: bool = False
    trials: int = settings.COUNTING_BOUND_TRIALS
    order: Optional[int] = None
    points: Optional[str] = None

    def validate(self):
        """参数检查，失败抛 ConfigError"""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"未知实验: {self.experiment}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"未知生成器: {self.generator}（可选 {', '.join(GENERATORS)}）")
        if self.format not in FORMATS:
            raise ConfigError(f"未知输出格式: {self.format}")
        if self.kind not in TEST_FUNCTION_KINDS:
            raise ConfigError(f"未知测试函数类型: {self.kind}")
        if not self.dims or min(self.dims) < 1:
            raise ConfigError(f"维数列表非法: {self.dims}")
        if not self.n_list or min(self.n_list) < 1:
            raise ConfigError(f"N 列表非法: {self.n_list}")
        if self.samples < 2:
            raise ConfigError(f"样本数必须 >= 2，实际 {self.samples}")
        if self.seed < 0:
            raise ConfigError(f"种子必须非负，实际 {self.seed}")
        if self.trials < 1:
            raise ConfigError(f"矩形数必须 >= 1，实际 {self.trials}")
        if self.delta is not None and self.delta <= 0:
            raise ConfigError(f"delta 必须 > 0，实际 {self.delta}")
        if not 0 < self.epsilon <= 0.5:
            raise ConfigError(f"epsilon 必须位于 (0, 1/2]，实际 {self.epsilon}")
        if not self.sine_c or any(not 0 < c < 1 for c in self.sine_c):
            raise ConfigError(f"sine-c 必须位于 (0, 1)，实际 {self.sine_c}")
        if self.p < 1 or (self.experiment == "interpolation" and self.p <= 1):
            raise ConfigError(f"p 取值非法: {self.p}")
        if not self.thresholds or self.thresholds[0] < 0 or any(
                b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigError("阈值必须非负且严格递增")
        if self.order is not None and not 0 <= self.order <= settings.MAX_SHAPE_ORDER:
            raise ConfigError(f"形状阶数必须位于 [0, {settings.MAX_SHAPE_ORDER}]，实际 {self.order}")
        if self.points is not None:
            if not Path(self.points).exists():
                raise ConfigError(f"点集文件不存在: {self.points}")
            return
        if self.generator == "hammersley" and self.dims != [2]:
            raise ConfigError("hammersley 生成器只支持 d=2")
        if self.generator == "faure":
            if not is_prime(self.base):
                raise ConfigError(f"底数 p={self.base} 不是素数")
            if max(self.dims) > self.base:
                raise ConfigError(f"网格构造要求 p >= d，实际 p={self.base}, d={max(self.dims)}")
            for n in self.n_list:
                if net_exponent(n, self.base) is None:
                    raise ConfigError(f"faure 生成器要求 N = p^s (s >= 2)，N={n} 不满足 p={self.base}")

    def echo(self) -> Dict[str, Any]:
        """报告中回显的参数（全部默认值展开）"""
        data = asdict(self)
        for name in NON_RESULT_FIELDS:
            data.pop(name, None)
        return data

    def digest(self) -> str:
        payload = json.dumps({"experiment": self.experiment, **self.echo()}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def net_exponent(n_points: int, base: int) -> Optional[int]:
    """N = base^s (s >= 2) 时返回 s"""
    exponent, value = 0, 1
    while value < n_points:
        value *= base
        exponent += 1
    return exponent if value == n_points and exponent >= 2 else None


def load_config_file(path: str) -> Dict[str, str]:
    """
    读取 key = value 配置文件，# 开头为注释

    键名中的 '-' 与 '_' 等价，dim 等命令行写法也可用；未知键报错。
    """
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}")
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{number}: 缺少 '='")
        key = key.strip().replace("-", "_")
        key = KEY_ALIASES.get(key, key)
        if key == "experiment":
            continue
        if key not in FIELD_PARSERS:
            raise ConfigError(f"{path}:{number}: 未知配置项 {key}")
        values[key] = value.strip()
    return values


def build_config(experiment: str, file_values: Optional[Dict[str, str]] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """预设 < 配置文件 < 命令行参数（None 表示未指定）"""
    if experiment not in settings.EXPERIMENT_PRESETS:
        raise ConfigError(f"未知实验: {experiment}")
    values: Dict[str, Any] = dict(settings.EXPERIMENT_PRESETS[experiment])
    for key, text in (file_values or {}).items():
        try:
            values[key] = FIELD_PARSERS[key](text)
        except ConfigError:
            raise
        except (ValueError, TypeError) as e:
            raise ConfigError(f"配置项 {key}={text!r} 无法解析: {e}")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"未知配置项: {sorted(unknown)}")
    config = ExperimentConfig(experiment=experiment, **values)
    config.validate()
    return config


# ==================== 报告 ====================

@dataclass
class CheckResult:
    """单项判定（失败时带行号）"""
    name: str
    passed: bool
    detail: str = ""
    row: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ExperimentReport:
    """实验报告；不含耗时等随运行变化的量，相同配置重跑逐位相同"""
    experiment: str
    config: Dict[str, Any]
    rows: List[Dict[str, Any]]
    checks: List[CheckResult] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    plot_series: Dict[str, List[Tuple[float, float, float]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "version": self.version,
            "config": self.config,
            "rows": self.rows,
            "checks": [check.to_dict() for check in self.checks],
            "summary": self.summary,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, allow_nan=False)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def flat_rows(self) -> List[Dict[str, Any]]:
        """宽表 CSV 用：每个 (d, N) 一行，嵌套字段展开为 a.b 列名"""
        return [_flatten(row) for row in self.rows]

    def norm_rows(self) -> List[Dict[str, Any]]:
        """长表 CSV 用：行内每个范数结果一行，列为 NORM_CSV_COLUMNS"""
        records = []
        for row in self.rows:
            for norm in _find_norm_reports(row):
                records.append({"generator": row["generator"], "d": row["dim"], "N": row["n_points"],
                                "norm_kind": norm["norm_kind"], "value": norm["value"],
                                "std_error": norm["std_error"]})
        return records


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        elif isinstance(value, (list, tuple)):
            flat[name] = json.dumps(value, ensure_ascii=False)
        else:
            flat[name] = value
    return flat


def _find_norm_reports(data: Any) -> List[Dict[str, Any]]:
    """按字段顺序找出嵌套结构中的 NormReport 字典"""
    if isinstance(data, dict):
        if NORM_REPORT_FIELDS <= data.keys():
            return [data]
        return [norm for value in data.values() for norm in _find_norm_reports(value)]
    if isinstance(data, (list, tuple)):
        return [norm for value in data for norm in _find_norm_reports(value)]
    return []


def _ratio(value: float, scale: Optional[float]) -> Optional[float]:
    if scale is None or scale == 0:
        return None
    return value / scale


def _spread(values: List[float]) -> Optional[float]:
    positive = [v for v in values if v is not None and v > 0]
    if not positive:
        return None
    return max(positive) / min(positive)


# ==================== 点集与行 ====================

def make_pointset(config: ExperimentConfig, dim: int, n_points: int) -> PointSet:
    """按配置生成点集；点的种子与 Monte-Carlo 样本的种子互相独立"""
    if config.points is not None:
        return load_pointset(config.points)
    if config.generator == "random":
        return generate_random(dim, n_points, derive_seed(config.seed, "points", dim, n_points))
    if config.generator == "hammersley":
        return generate_van_der_corput(n_points)
    exponent = net_exponent(n_points, config.base)
    if exponent is None:
        raise NetParameterError(f"N={n_points} 不是 {config.base} 的幂")
    return generate_faure_net(config.base, exponent, dim)


def sample_seed(config: ExperimentConfig, dim: int, n_points: int, label: str = "samples") -> int:
    return derive_seed(config.seed, label, config.experiment, dim, n_points)


def _row_items(config: ExperimentConfig) -> List[Tuple[int, int]]:
    if config.points is not None:
        pointset = load_pointset(config.points)
        return [(pointset.dim, pointset.n_points)]
    return [(dim, n) for dim in config.dims for n in config.n_list]


def _run_rows(config: ExperimentConfig, func: Callable[[int, PointSet], Dict[str, Any]]) -> List[Dict[str, Any]]:
    """逐行并行计算，结果按 (d, N) 顺序汇总；模块异常附带行信息"""

    def run(item: Tuple[int, int]) -> Dict[str, Any]:
        dim, n_points = item
        try:
            pointset = make_pointset(config, dim, n_points)
            row = {"dim": pointset.dim, "n_points": pointset.n_points, "n": roth_level(pointset.n_points),
                   "generator": pointset.generator.name, "digest": pointset.digest()[:16]}
            row.update(func(dim, pointset))
            return row
        except DiscrepancyLabError as e:
            raise type(e)(f"[d={dim}, N={n_points}] {e}") from e

    items = _row_items(config)
    logger.info(f"🚀 {config.experiment}: {len(items)} 行")
    rows = ordered_map(run, items)
    for row in rows:
        logger.debug(f"完成 d={row['dim']}, N={row['n_points']}")
    return rows


def _inequality_checks(rows: List[Dict[str, Any]], key: str = "inequalities") -> List[CheckResult]:
    checks = []
    for i, row in enumerate(rows):
        ineq = row.get(key)
        if ineq is None:
            continue
        passed = bool(ineq["l1_le_l2"] and ineq["interpolation"])
        checks.append(CheckResult("empirical_inequalities", passed,
                                  f"L1<=L2: {ineq['l1_le_l2']}, 插值: {ineq['interpolation']}", i))
    return checks


def _inequality_fields(sample, p: float = 2.0) -> Dict[str, Any]:
    ineq = empirical_inequalities(sample, p if p > 1 else 2.0)
    return {"l1_le_l2": bool(ineq.l1_le_l2), "interpolation": bool(ineq.interpolation.holds),
            "interpolation_lhs": ineq.interpolation.lhs, "interpolation_rhs": ineq.interpolation.rhs}


# ==================== 实验 ====================

def run_norms_sweep(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """||D_N||_1、||D_N||_2、||D_N||_{L(log L)^{(d-2)/2}} 与各自的对数增长率"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        n_points = pointset.n_points
        sample = sample_discrepancy(pointset, config.samples, sample_seed(config, dim, n_points), config.stratified)
        l1 = lp_norm_from_sample(sample, 1.0)
        l2 = lp_norm_from_sample(sample, 2.0)
        orlicz = orlicz_norm_from_sample(sample, OrliczSpec("LlogL", (pointset.dim - 2) / 2.0))
        exact = l2_norm_exact(pointset)
        log_n = math.log(n_points)
        growth = log_n ** ((pointset.dim - 1) / 2.0) if n_points > 1 else None
        difference = abs(exact.value - l2.value)
        return {
            "l1": l1.to_dict(),
            "l2": l2.to_dict(),
            "llogl": orlicz.to_dict(),
            "l2_exact": exact.to_dict(),
            "ratios": {
                "l1_log": _ratio(l1.value, growth),
                "l2_log": _ratio(l2.value, growth),
                "llogl_log": _ratio(orlicz.value, growth),
                "l1_sqrt_log": _ratio(l1.value, math.sqrt(log_n) if n_points > 1 else None),
                "l2_exact_log_n": _ratio(exact.value, log_n if n_points > 1 else None),
                "l2_exact_sqrt_n": exact.value / math.sqrt(n_points),
            },
            "warnock_agreement": {
                "difference": difference,
                "sigma": l2.std_error,
                "within_gate": bool(difference <= settings.SIGMA_GATE * l2.std_error + 1e-9 * max(exact.value, 1.0)),
            },
            "inequalities": _inequality_fields(sample, config.p),
        }

    rows = _run_rows(config, row)
    checks = _inequality_checks(rows)
    for i, r in enumerate(rows):
        agreement = r["warnock_agreement"]
        checks.append(CheckResult("warnock_vs_monte_carlo", agreement["within_gate"],
                                  f"|精确-MC|={agreement['difference']:.4g}, σ={agreement['sigma']:.4g}", i))
        ratio = r["ratios"]["l2_exact_log_n"]
        if r["generator"] == "hammersley" and ratio is not None:
            low, high = settings.HAMMERSLEY_L2_LOG_BRACKET
            checks.append(CheckResult("hammersley_l2_log_bracket", low <= ratio <= high,
                                      f"||D||_2/log N = {ratio:.4f}，区间 [{low}, {high}]", i))
        if r["generator"] == "random" and r["dim"] == 2 and r["n_points"] > 1:
            low, high = settings.RANDOM_L2_SQRT_BRACKET
            ratio = r["ratios"]["l2_exact_sqrt_n"]
            checks.append(CheckResult("random_l2_sqrt_bracket", low <= ratio <= high,
                                      f"||D||_2/sqrt(N) = {ratio:.4f}，区间 [{low}, {high}]", i))
    series = {
        "l2_exact": [(r["n_points"], r["l2_exact"]["value"], 0.0) for r in rows],
        "l1": [(r["n_points"], r["l1"]["value"], r["l1"]["std_error"]) for r in rows],
    }
    return ExperimentReport(config.experiment, config.echo(), rows, checks, plot_series=series)


def run_roth_test(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """⟨D_N, Z⟩ / n^{(d-1)/2} 的下界与 ||Z||_p (p = 4, 6) 的有界性"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        z = build_Z(pointset, cache=db)
        exact = inner_product(pointset, z, "exact")
        seed = sample_seed(config, dim, pointset.n_points, "z-moments")
        moments = {f"z_l{p}": lp_norm_test_function(z, float(p), config.samples, seed).to_dict() for p in (4, 6)}
        return {
            "shapes": len(z.shapes),
            "inner_z": exact.to_dict(),
            "roth_ratio": exact.value / float(z.n) ** ((pointset.dim - 1) / 2.0),
            "z_l2_squared": z.l2_norm_squared_exact(),
            **moments,
        }

    rows = _run_rows(config, row)
    checks = []
    for i, r in enumerate(rows):
        checks.append(CheckResult("roth_ratio_floor", r["roth_ratio"] >= settings.ROTH_RATIO_FLOOR,
                                  f"<D,Z>/n^((d-1)/2) = {r['roth_ratio']:.4f}", i))
        for key in ("z_l4", "z_l6"):
            value = r[key]["value"]
            checks.append(CheckResult(f"{key}_envelope", value <= settings.Z_MOMENT_ENVELOPE,
                                      f"{key} = {value:.4f}", i))
    series = {"roth_ratio": [(r["n_points"], r["roth_ratio"], 0.0) for r in rows]}
    return ExperimentReport(config.experiment, config.echo(), rows, checks, plot_series=series)


def run_lemma_bounds(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """贪心 r-函数：|r| = n 上的下界，|r| = n..n+6 上 |⟨D,f_r⟩| 2^|r| / N 的一致上界"""
    extra_orders = 6

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        n_points = pointset.n_points
        level = roth_level(n_points)
        lower = [inner_product_exact(pointset, build_r_function_greedy(pointset, shape))
                 for shape in shapes_of_order(pointset.dim, level)]
        upper = {}
        for order in range(level, level + extra_orders + 1):
            if order > settings.MAX_SHAPE_ORDER:
                break
            scaled = [inner_product_exact(pointset, build_r_function_greedy(pointset, shape)) * 2.0 ** order / n_points
                      for shape in shapes_of_order(pointset.dim, order)]
            upper[str(order)] = {"max": max(scaled), "min": min(scaled)}
        return {"lower_min": min(lower), "lower_max": max(lower), "upper_scaled": upper}

    rows = _run_rows(config, row)
    checks = []
    for i, r in enumerate(rows):
        checks.append(CheckResult("lemma_lower_floor", r["lower_min"] >= settings.LEMMA_LOWER_FLOOR,
                                  f"min <D,f_r> = {r['lower_min']:.5f}", i))
    maxima = [entry["max"] for r in rows for entry in r["upper_scaled"].values()]
    spread = _spread(maxima)
    checks.append(CheckResult("lemma_upper_spread", spread is not None and spread <= settings.LEMMA_UPPER_SPREAD,
                              f"max/min = {spread}"))
    summary = {"lower_min": min(r["lower_min"] for r in rows), "upper_max": max(maxima), "upper_spread": spread}
    return ExperimentReport(config.experiment, config.echo(), rows, checks, summary)


def run_dichotomy_example(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """角点塌缩：||D'||_2 ≈ N^{1/4} 而 ||D'||_1 保持 (log N)^{(d-1)/2} 量级"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        n_points = pointset.n_points
        delta = config.delta if config.delta is not None else 1.0 / (2 * pointset.dim)
        collapsed = corner_collapse(pointset, delta)
        sample = sample_discrepancy(collapsed, config.samples, sample_seed(config, dim, n_points))
        l1 = lp_norm_from_sample(sample, 1.0)
        l2 = l2_norm_exact(collapsed)
        diff_sample = difference_sample(pointset, collapsed, config.samples,
                                        sample_seed(config, dim, n_points, "difference"))
        diff_l1 = lp_norm_from_sample(diff_sample, 1.0)
        diff_l2 = l2_distance_exact(pointset, collapsed)
        quarter = float(n_points) ** 0.25
        growth = math.log(n_points) ** ((pointset.dim - 1) / 2.0) if n_points > 1 else None
        return {
            "delta": delta,
            "collapsed": collapsed.generator.params["collapsed"],
            "l1": l1.to_dict(),
            "l2": l2.to_dict(),
            "difference_l1": diff_l1.to_dict(),
            "difference_l2": diff_l2.to_dict(),
            "ratios": {
                "l2_quarter": l2.value / quarter,
                "l1_log": _ratio(l1.value, growth),
                "difference_l2_quarter": diff_l2.value / quarter,
            },
            "inequalities": _inequality_fields(sample, config.p),
        }

    rows = _run_rows(config, row)
    checks = _inequality_checks(rows)
    spread = _spread([r["ratios"]["l2_quarter"] for r in rows])
    checks.append(CheckResult("collapse_l2_spread", spread is not None and spread <= settings.COLLAPSE_L2_SPREAD,
                              f"||D'||_2/N^(1/4) max/min = {spread}"))
    for i, r in enumerate(rows):
        ratio = r["ratios"]["l1_log"]
        if ratio is not None:
            checks.append(CheckResult("collapse_l1_ceiling", ratio <= settings.COLLAPSE_L1_CEILING,
                                      f"||D'||_1/(log N)^((d-1)/2) = {ratio:.4f}", i))
    series = {
        "l2_quarter": [(r["n_points"], r["ratios"]["l2_quarter"], 0.0) for r in rows],
        "l1": [(r["n_points"], r["l1"]["value"], r["l1"]["std_error"]) for r in rows],
    }
    return ExperimentReport(config.experiment, config.echo(), rows, checks, {"l2_quarter_spread": spread},
                            plot_series=series)


def run_product_bound(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """三维：||D_N||_1 ||D_N||_{L log L} / n^2 的下界，及正弦测试函数的内积与截断 exp(L) 范数"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        n_points = pointset.n_points
        level = roth_level(n_points)
        sample = sample_discrepancy(pointset, config.samples, sample_seed(config, dim, n_points))
        l1 = lp_norm_from_sample(sample, 1.0)
        llogl = orlicz_norm_from_sample(sample, OrliczSpec("LlogL", 1.0))
        product = l1.value * llogl.value
        relative = math.hypot(l1.std_error / l1.value if l1.value else 0.0,
                              llogl.std_error / llogl.value if llogl.value else 0.0)
        sine = {}
        if pointset.dim == 3:
            for c in config.sine_c:
                y = build_Y_sine(pointset, c, cache=db)
                inner = inner_product_from_sample(sample, y)
                truncated = truncated_exp_norm(y, settings.TRUNCATION_ALPHA, config.samples,
                                               sample_seed(config, dim, n_points, f"truncated-{c}"))
                sine[f"{c:g}"] = {"inner": inner.to_dict(), "inner_over_n": inner.value / level,
                                  "truncated_exp": truncated.to_dict()}
        return {
            "l1": l1.to_dict(),
            "llogl": llogl.to_dict(),
            "product_ratio": product / level ** 2,
            "product_ratio_sigma": product * relative / level ** 2,
            "sine": sine,
            "inequalities": _inequality_fields(sample, config.p),
        }

    rows = _run_rows(config, row)
    checks = _inequality_checks(rows)
    for i, r in enumerate(rows):
        slack = r["product_ratio"] + settings.SIGMA_GATE * r["product_ratio_sigma"]
        checks.append(CheckResult("product_bound_floor", slack >= settings.PRODUCT_BOUND_FLOOR,
                                  f"||D||_1 ||D||_LlogL / n^2 = {r['product_ratio']:.5f}", i))
    series = {"product_ratio": [(r["n_points"], r["product_ratio"], r["product_ratio_sigma"]) for r in rows]}
    return ExperimentReport(config.experiment, config.echo(), rows, checks, plot_series=series)


def _build_test_function(config: ExperimentConfig, pointset: PointSet, db: Optional[LabDatabase]):
    if config.kind == "Z":
        return build_Z(pointset, cache=db)
    if config.kind == "Y_dichotomy":
        return build_Y_dichotomy(pointset, config.epsilon, cache=db)
    return build_Y_sine(pointset, config.sine_c[0], cache=db, allow_any_dimension=True)


def run_tails(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """测试函数的经验生存函数与 exp(a - b t^2) 拟合"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        test_function = _build_test_function(config, pointset, db)
        tail = tail_distribution(test_function, config.thresholds, config.samples,
                                 sample_seed(config, dim, pointset.n_points))
        result = {"kind": test_function.kind, "tail": tail.to_dict()}
        if test_function.is_linear:
            result["l2_squared_exact"] = test_function.l2_norm_squared_exact()
        return result

    rows = _run_rows(config, row)
    checks = []
    for i, r in enumerate(rows):
        tail = r["tail"]
        fitted = tail["fit_b"] is not None
        checks.append(CheckResult("tail_decay", fitted and tail["fit_b"] > 0,
                                  f"b = {tail['fit_b']}", i))
        checks.append(CheckResult("tail_fit_quality", fitted and tail["r_squared"] >= settings.TAIL_MIN_R_SQUARED,
                                  f"R² = {tail['r_squared']}", i))
    series = {}
    if rows:
        tail = rows[0]["tail"]
        series["survival"] = [(t, s, 0.0) for t, s in zip(tail["thresholds"], tail["survival"])]
    return ExperimentReport(config.experiment, config.echo(), rows, checks, plot_series=series)


def run_net_verify(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """网格公理的精确校验与随机矩形上的计数偏差"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        exponent = net_exponent(pointset.n_points, config.base)
        if exponent is None:
            raise NetParameterError(f"N={pointset.n_points} 不是 {config.base}^s")
        result = verify_net(pointset, config.base, exponent)
        bound = check_counting_bound(pointset, config.base, exponent, config.trials,
                                     sample_seed(config, dim, pointset.n_points, "rectangles"))
        return {
            "base": config.base,
            "exponent": exponent,
            "net": {"passed": result.passed, "compositions": result.compositions_checked,
                    "detail": result.describe()},
            "counting": {"max_deviation": bound.max_deviation, "bound": bound.bound,
                         "within_bound": bound.within_bound, "trials": bound.trials},
        }

    rows = _run_rows(config, row)
    checks = []
    for i, r in enumerate(rows):
        checks.append(CheckResult("net_axioms", r["net"]["passed"], r["net"]["detail"], i))
        checks.append(CheckResult("counting_bound", r["counting"]["within_bound"],
                                  f"max 偏差 {r['counting']['max_deviation']:.4f} <= {r['counting']['bound']}", i))
    return ExperimentReport(config.experiment, config.echo(), rows, checks)


def run_interpolation(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """||D||_{2p/(p+1)} <= ||D||_1^{1/2} ||D||_p^{1/2} 在经验测度上逐点集校验"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        sample = sample_discrepancy(pointset, config.samples, sample_seed(config, dim, pointset.n_points),
                                    config.stratified)
        q = 2.0 * config.p / (config.p + 1.0)
        return {
            "p": config.p,
            "l1": lp_norm_from_sample(sample, 1.0).to_dict(),
            "lp": lp_norm_from_sample(sample, config.p).to_dict(),
            "lq": lp_norm_from_sample(sample, q).to_dict(),
            "inequalities": _inequality_fields(sample, config.p),
        }

    rows = _run_rows(config, row)
    return ExperimentReport(config.experiment, config.echo(), rows, _inequality_checks(rows))


def run_haar_scan(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """给定阶数的每个形状的 Haar 系数统计，并把贪心 r-函数写入缓存"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        n_points = pointset.n_points
        order = config.order if config.order is not None else roth_level(n_points)
        shapes = shapes_of_order(pointset.dim, order)
        per_shape = []
        for shape in shapes:
            coefficients = all_coefficients(pointset, shape)
            magnitude = abs(coefficients)
            greedy = float(magnitude.sum())
            per_shape.append({
                "shape": str(shape),
                "max_abs": float(magnitude.max()),
                "greedy_inner": greedy,
                "scaled": greedy * 2.0 ** order / n_points,
                "positive": int((coefficients > 0).sum()),
            })
        if db is not None:
            greedy_components(pointset, shapes, db)
        return {"order": order, "shapes": per_shape}

    rows = _run_rows(config, row)
    checks = []
    for i, r in enumerate(rows):
        negative = [s["shape"] for s in r["shapes"] if s["greedy_inner"] < 0]
        checks.append(CheckResult("greedy_nonnegative", not negative, f"负值形状: {negative}", i))
    return ExperimentReport(config.experiment, config.echo(), rows, checks)


def run_split_inner(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    """⟨D, Y⟩ 按 {|Y| <= 1} / {|Y| > 1} 拆分，大值部分由 Hölder 控制"""

    def row(dim: int, pointset: PointSet) -> Dict[str, Any]:
        y = build_Y_dichotomy(pointset, config.epsilon, cache=db)
        exact = inner_product(pointset, y, "exact")
        split = dichotomy_split(pointset, y, config.samples, sample_seed(config, dim, pointset.n_points))
        return {"q": y.q, "inner_exact": exact.to_dict(), "split": split.to_dict()}

    rows = _run_rows(config, row)
    checks = [CheckResult("holder_split", r["split"]["holder_holds"],
                          f"∫_(|Y|>1)|DY| = {r['split']['large_abs']:.5g} <= {r['split']['holder_bound']:.5g}", i)
              for i, r in enumerate(rows)]
    return ExperimentReport(config.experiment, config.echo(), rows, checks)


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig, Optional[LabDatabase]], ExperimentReport]] = {
    "norms-sweep": run_norms_sweep,
    "roth-test": run_roth_test,
    "lemma-bounds": run_lemma_bounds,
    "dichotomy-example": run_dichotomy_example,
    "product-bound": run_product_bound,
    "tails": run_tails,
    "net-verify": run_net_verify,
    "interpolation": run_interpolation,
    "haar-scan": run_haar_scan,
    "split-inner": run_split_inner,
}


def run_experiment(config: ExperimentConfig, db: Optional[LabDatabase] = None) -> ExperimentReport:
    report = EXPERIMENTS[config.experiment](config, db)
    for check in report.failed_checks:
        where = f"第 {check.row} 行" if check.row is not None else "汇总"
        logger.error(f"❌ 判定失败 [{check.name}] {where}: {check.detail}")
    if report.passed:
        logger.info(f"✅ {config.experiment}: 全部 {len(report.checks)} 项判定通过")
    return report
