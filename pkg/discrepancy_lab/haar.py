"""
Haar 模块 - Dyadic Haar Machinery
二进矩形、L^∞ 归一化 Haar 函数、D_N 的 Haar 系数（浮点与精确有理两种模式）、
贪心 r-函数的构造、求值与二进制序列化
"""

import logging
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import numpy as np

from . import settings
from .exceptions import CapExceededError, DimensionMismatchError, PointSetFormatError
from .numerics import compensated_sum, compositions
from .pointset import PointSet

logger = logging.getLogger(__name__)

RFUNCTION_MAGIC = b"RFN1"


def roth_level(n_points: int) -> int:
    """n = ⌈1 + log2 N⌉，整数运算"""
    if n_points < 1:
        raise ValueError(f"N 必须 >= 1，实际 {n_points}")
    return (n_points - 1).bit_length() + 1


@dataclass(frozen=True)
class ShapeVector:
    """形状向量 r = (r_1, ..., r_d)，|r| = Σ r_j"""
    r: Tuple[int, ...]

    def __post_init__(self):
        r = tuple(int(v) for v in self.r)
        if not r:
            raise ValueError("形状向量不能为空")
        if min(r) < 0:
            raise ValueError(f"形状分量必须非负: {r}")
        object.__setattr__(self, "r", r)

    @property
    def dim(self) -> int:
        return len(self.r)

    @property
    def order(self) -> int:
        return sum(self.r)

    @property
    def n_rectangles(self) -> int:
        return 1 << self.order

    @property
    def key(self) -> str:
        return ",".join(str(v) for v in self.r)

    @classmethod
    def parse(cls, text: str) -> "ShapeVector":
        return cls(tuple(int(v) for v in text.replace("(", "").replace(")", "").split(",") if v.strip()))

    def __str__(self) -> str:
        return f"({self.key})"


def shapes_of_order(dim: int, order: int) -> List[ShapeVector]:
    """所有 |r| = order 的形状，按字典序，共 C(order+d-1, d-1) 个"""
    return [ShapeVector(r) for r in compositions(order, dim)]


def _check_order(shape: ShapeVector):
    if shape.order > settings.MAX_SHAPE_ORDER:
        raise CapExceededError(f"形状阶数 |r|={shape.order} 超过上限 {settings.MAX_SHAPE_ORDER}")


@dataclass(frozen=True)
class DyadicRectangle:
    """D_r 中的矩形 ∏ [pos_j 2^-r_j, (pos_j+1) 2^-r_j)"""
    shape: ShapeVector
    pos: Tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(v) for v in self.pos)
        if len(pos) != self.shape.dim:
            raise DimensionMismatchError(f"位置向量维数 {len(pos)} 与形状维数 {self.shape.dim} 不一致")
        for p, r in zip(pos, self.shape.r):
            if not 0 <= p < (1 << r):
                raise ValueError(f"位置 {pos} 超出形状 {self.shape} 的范围")
        object.__setattr__(self, "pos", pos)

    @property
    def intervals(self) -> List[Tuple[float, float]]:
        return [(p / float(1 << r), (p + 1) / float(1 << r)) for p, r in zip(self.pos, self.shape.r)]

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.shape.order)

    @property
    def index(self) -> int:
        """混合进制下标，坐标 0 为最低位"""
        index, shift = 0, 0
        for p, r in zip(self.pos, self.shape.r):
            index |= p << shift
            shift += r
        return index

    @classmethod
    def from_index(cls, shape: ShapeVector, index: int) -> "DyadicRectangle":
        pos = []
        for r in shape.r:
            pos.append(index & ((1 << r) - 1))
            index >>= r
        return cls(shape, tuple(pos))


# ==================== Haar 系数 ====================

def _tent_products(points: np.ndarray, shape: ShapeVector) -> Tuple[np.ndarray, np.ndarray]:
    """
    每个点所在矩形的下标及其帐篷函数乘积 ∏ tent_{I_j}(p_j)

    tent_I(p) = p - a（左半）或 b - p（右半）；坐标 1.0 归入最后一格，帐篷值为 0。
    """
    index = np.zeros(points.shape[0], dtype=np.int64)
    products = np.ones(points.shape[0], dtype=np.float64)
    shift = 0
    for j, r in enumerate(shape.r):
        cells = 1 << r
        width = 1.0 / cells
        pos = np.minimum(np.floor(points[:, j] * cells).astype(np.int64), cells - 1)
        local = points[:, j] - pos * width
        products *= np.where(local < 0.5 * width, local, width - local)
        index |= pos << shift
        shift += r
    return index, products


def _linear_term(n_points: int, shape: ShapeVector) -> float:
    """N ∏ |I_j|^2 / 4，同一形状的所有矩形相同"""
    term = float(n_points)
    for r in shape.r:
        width = 1.0 / (1 << r)
        term *= width * width / 4.0
    return term


def haar_coefficient(pointset: PointSet, rectangle: DyadicRectangle) -> float:
    """
    ⟨D_N, h_R⟩ = Σ_p ∏_j tent_{I_j}(p_j) - N ∏_j |I_j|^2 / 4

    与 all_coefficients 使用同一求和顺序，两者结果逐位相同。
    """
    if rectangle.shape.dim != pointset.dim:
        raise DimensionMismatchError(f"矩形维数 {rectangle.shape.dim} 与点集维数 {pointset.dim} 不一致")
    index, products = _tent_products(pointset.points, rectangle.shape)
    selected = products[index == rectangle.index]
    total = np.bincount(np.zeros(selected.shape[0], dtype=np.int64), weights=selected, minlength=1)[0]
    return float(total) - _linear_term(pointset.n_points, rectangle.shape)


def haar_coefficient_exact(pointset: PointSet, rectangle: DyadicRectangle) -> Fraction:
    """精确有理数模式（坐标按其浮点值精确转换），N <= EXACT_RATIONAL_MAX_POINTS"""
    if pointset.n_points > settings.EXACT_RATIONAL_MAX_POINTS:
        raise CapExceededError(
            f"精确模式要求 N <= {settings.EXACT_RATIONAL_MAX_POINTS}，实际 {pointset.n_points}"
        )
    if rectangle.shape.dim != pointset.dim:
        raise DimensionMismatchError(f"矩形维数 {rectangle.shape.dim} 与点集维数 {pointset.dim} 不一致")
    bounds = [(Fraction(p, 1 << r), Fraction(p + 1, 1 << r)) for p, r in zip(rectangle.pos, rectangle.shape.r)]
    total = Fraction(0)
    for row in pointset.points.tolist():
        product = Fraction(1)
        for value, (a, b) in zip(row, bounds):
            x = Fraction(value)
            if not a <= x < b:
                product = Fraction(0)
                break
            middle = (a + b) / 2
            product *= (x - a) if x < middle else (b - x)
        total += product
    linear = Fraction(pointset.n_points)
    for a, b in bounds:
        linear *= (b - a) ** 2 / 4
    return total - linear


def all_coefficients(pointset: PointSet, shape: ShapeVector) -> np.ndarray:
    """
    形状 r 下全部 2^|r| 个矩形的 Haar 系数，O(N d + 2^|r|)

    每个点只对所在矩形贡献帐篷乘积，线性项对所有矩形相同。
    """
    if shape.dim != pointset.dim:
        raise DimensionMismatchError(f"形状维数 {shape.dim} 与点集维数 {pointset.dim} 不一致")
    _check_order(shape)
    index, products = _tent_products(pointset.points, shape)
    sums = np.bincount(index, weights=products, minlength=shape.n_rectangles)
    return sums - _linear_term(pointset.n_points, shape)


# ==================== r-函数 ====================

@dataclass(frozen=True, eq=False)
class RFunction:
    """
    r-函数 f_r = Σ_{R ∈ D_r} ε_R h_R

    符号按混合进制下标位压缩存储（bit = 1 表示 ε = +1，little 位序）。
    """
    shape: ShapeVector
    packed: np.ndarray

    def __post_init__(self):
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8).ravel()
        expected = (self.shape.n_rectangles + 7) // 8
        if packed.shape[0] != expected:
            raise ValueError(f"符号位长度 {packed.shape[0]} 字节，形状 {self.shape} 需要 {expected} 字节")
        packed = packed.copy()
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_signs(cls, shape: ShapeVector, signs: Sequence[int]) -> "RFunction":
        signs = np.asarray(signs)
        if signs.shape != (shape.n_rectangles,):
            raise ValueError(f"符号数组长度 {signs.shape} 与矩形数 {shape.n_rectangles} 不一致")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("符号必须为 ±1")
        return cls(shape, np.packbits(signs > 0, bitorder="little"))

    @property
    def signs(self) -> np.ndarray:
        bits = np.unpackbits(self.packed, count=self.shape.n_rectangles, bitorder="little")
        return bits.astype(np.int8) * 2 - 1

    def sign_at(self, index: np.ndarray) -> np.ndarray:
        index = np.asarray(index, dtype=np.int64)
        bits = (self.packed[index >> 3] >> (index & 7).astype(np.uint8)) & 1
        return bits.astype(np.int8) * 2 - 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, RFunction):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.packed, other.packed))

    def __hash__(self) -> int:
        return hash((self.shape, self.packed.tobytes()))

    def to_bytes(self) -> bytes:
        """'RFN1' + d + r_1..r_d（uint32 小端）+ 压缩符号位"""
        header = RFUNCTION_MAGIC + struct.pack(f"<{1 + self.shape.dim}I", self.shape.dim, *self.shape.r)
        return header + self.packed.tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "RFunction":
        if payload[:4] != RFUNCTION_MAGIC or len(payload) < 8:
            raise PointSetFormatError("不是 r-函数数据（魔数不匹配）")
        (dim,) = struct.unpack_from("<I", payload, 4)
        offset = 8 + 4 * dim
        if dim < 1 or len(payload) < offset:
            raise PointSetFormatError(f"r-函数头部损坏: d={dim}")
        shape = ShapeVector(struct.unpack_from(f"<{dim}I", payload, 8))
        body = np.frombuffer(payload, dtype=np.uint8, offset=offset)
        if body.shape[0] != (shape.n_rectangles + 7) // 8:
            raise PointSetFormatError(f"r-函数符号位长度不符: 形状 {shape}, {body.shape[0]} 字节")
        return cls(shape, body)


def build_r_function_greedy(pointset: PointSet, shape: ShapeVector) -> RFunction:
    """ε_R = sign⟨D_N, h_R⟩（系数为 0 时取 +1），使 ⟨D_N, f_r⟩ = Σ_R |⟨D_N, h_R⟩| 最大"""
    coefficients = all_coefficients(pointset, shape)
    return RFunction.from_signs(shape, np.where(coefficients >= 0, 1, -1))


def _locate(shape: ShapeVector, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """每个点所在矩形下标与 Haar 半区符号 ∏ (±1)；右连续约定"""
    index = np.zeros(x.shape[0], dtype=np.int64)
    parity = np.ones(x.shape[0], dtype=np.int8)
    shift = 0
    for j, r in enumerate(shape.r):
        halves = 1 << (r + 1)
        t = np.clip(np.floor(x[:, j] * halves).astype(np.int64), 0, halves - 1)
        index |= (t >> 1) << shift
        parity *= ((t & 1) * 2 - 1).astype(np.int8)
        shift += r
    return index, parity


def _as_batch(x, dim: int) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != dim:
        raise DimensionMismatchError(f"求值点维数 {arr.shape[1]} 与形状维数 {dim} 不一致")
    return arr, single


def eval_r_function(f: RFunction, x):
    """f_r(x) = ε_R h_R(x)，R 为包含 x 的唯一矩形；单点返回 int，批量返回 float 数组"""
    arr, single = _as_batch(x, f.shape.dim)
    index, parity = _locate(f.shape, arr)
    values = f.sign_at(index) * parity
    return int(values[0]) if single else values.astype(np.float64)


def eval_haar(rectangle: DyadicRectangle, x):
    """单个 Haar 函数 h_R(x)：R 外为 0，R 内为各坐标半区符号之积"""
    arr, single = _as_batch(x, rectangle.shape.dim)
    index, parity = _locate(rectangle.shape, arr)
    inside = np.all((arr >= 0.0) & (arr < 1.0), axis=1) & (index == rectangle.index)
    values = np.where(inside, parity, 0)
    return int(values[0]) if single else values.astype(np.float64)


WeightedRFunctions = Sequence[Tuple[float, RFunction]]


def inner_product_exact(pointset: PointSet, f: Union[RFunction, WeightedRFunctions]) -> float:
    """⟨D_N, Σ w f⟩ = Σ w Σ_R ε_R ⟨D_N, h_R⟩"""
    if isinstance(f, RFunction):
        coefficients = all_coefficients(pointset, f.shape)
        return compensated_sum(f.signs * coefficients)
    terms = []
    for weight, component in f:
        if weight == 0:
            continue
        terms.append(weight * inner_product_exact(pointset, component))
    return compensated_sum(terms)


def gram_inner(f: RFunction, g: RFunction) -> float:
    """
    ⟨f, g⟩ 的精确值

    不同形状的 r-函数正交；同形状时为 (符号相同数 - 符号不同数) 2^-|r|。
    """
    if f.shape != g.shape:
        return 0.0
    total = f.shape.n_rectangles
    mismatches = int(np.unpackbits(np.bitwise_xor(f.packed, g.packed), bitorder="little", count=total).sum())
    return math.ldexp(total - 2 * mismatches, -f.shape.order)
