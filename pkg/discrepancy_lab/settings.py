"""
运行参数 - Settings
所有可调参数集中在此；如需覆盖，复制 config.example.py 为 config.py 并修改
"""

import psutil

# ============ 并行计算配置 ============
# 工作线程数（None 表示按 CPU 逻辑核数自动选择）
# 注意：线程数只影响速度，不影响结果（分块与归约顺序固定）
MAX_WORKERS = None

# 自动选择时的线程数上限
MAX_WORKERS_CAP = psutil.cpu_count(logical=True) or 1

# Monte-Carlo 采样分块大小（每块样本数）
SAMPLE_BLOCK_SIZE = 16384

# 两两核函数分块的元素上限（行数 × 列数），约 32 MiB float64
PAIR_BLOCK_ELEMENTS = 1 << 22

# d >= 3 暴力计数时单块布尔矩阵的元素上限
COUNT_BLOCK_ELEMENTS = 1 << 22

# ============ 点集配置 ============
# p 进网格坐标吸附容差（相对值）
# p=3 等非二进底数的有理坐标无法精确表示，按 floor 分桶前先吸附到最近格点
PADIC_SNAP_TOLERANCE = 1e-9

# 网格构造要求 p^s < 2^52，保证坐标可由 64 位浮点表示
MAX_NET_POINTS_LOG2 = 52

# 计数偏差校验抽取的随机矩形数
COUNTING_BOUND_TRIALS = 10000

# ============ Haar / r-函数配置 ============
# 形状阶数 |r| 上限（内存保护，2^26 个符号约 8 MiB）
MAX_SHAPE_ORDER = 26

# 单个测试函数所有分量的符号总数上限（约 256 MiB 位打包）
MAX_TEST_FUNCTION_BITS = 1 << 31

# 精确有理数模式允许的最大点数
EXACT_RATIONAL_MAX_POINTS = 1 << 12

# ============ Monte-Carlo 配置 ============
# 默认样本数
DEFAULT_SAMPLES = 100000

# 默认随机种子
DEFAULT_SEED = 20140101

# Luxemburg 范数二分的相对容差
ORLICZ_BISECTION_TOL = 1e-6

# 二分上界扩张的最大次数
ORLICZ_MAX_WIDENING = 200

# 经验测度不等式的浮点相对容差（Hölder / Cauchy-Schwarz）
EMPIRICAL_INEQUALITY_RTOL = 1e-12

# ============ 尾分布拟合配置 ============
# 参与拟合的阈值至少需要的超越样本数
TAIL_MIN_EXCEEDANCES = 10

# 指数平方尾估计适用范围 t < C n^((1-2ε)/(4d-2)) 中的常数 C（取 1；设为 None 不设上限）
TAIL_RANGE_CONSTANT = 1.0

# 截断 exp(L) 范数 ||Y 1{|Y|>α}|| 使用的 α
TRUNCATION_ALPHA = 0.5

# 默认阈值列表
DEFAULT_TAIL_THRESHOLDS = [0.05 * k for k in range(1, 41)]

# ============ 测试函数配置 ============
# 正弦测试函数的默认常数 c
DEFAULT_SINE_C = 0.1

# 正弦测试函数扫描的 c 值
SINE_C_SWEEP = [0.05, 0.1, 0.2]

# 二分型测试函数的默认指数 ε（q = n^ε）
DEFAULT_DICHOTOMY_EPSILON = 1.0 / 3.0

# ============ 实验判定阈值（首次运行后冻结的回归区间）============
# 判定采用的标准误倍数
SIGMA_GATE = 3.0

# Hammersley (d=2)：||D_N||_2 / log N 所在区间
HAMMERSLEY_L2_LOG_BRACKET = (0.1, 1.0)

# 随机点集 (d=2)：||D_N||_2 / sqrt(N) 所在区间
RANDOM_L2_SQRT_BRACKET = (0.15, 0.7)

# Lemma 型下界：|r| = n 上贪心 r-函数内积的最小值下限
LEMMA_LOWER_FLOOR = 0.01

# Lemma 型上界：|<D,f_r>| 2^|r| / N 在整个扫描中的最大/最小比值上限
LEMMA_UPPER_SPREAD = 10.0

# Roth 下界：<D,Z> / n^((d-1)/2) 的下限
ROTH_RATIO_FLOOR = 0.01

# ||Z||_p (p=4,6) 有界性的宽松上界
Z_MOMENT_ENVELOPE = 10.0

# 角点塌缩：||D'||_2 / N^(1/4) 最大/最小比值上限
COLLAPSE_L2_SPREAD = 5.0

# 角点塌缩：||D'||_1 / (log N)^((d-1)/2) 的上限
COLLAPSE_L1_CEILING = 3.0

# 乘积界：||D||_1 ||D||_{L log L} / n^2 的下限
PRODUCT_BOUND_FLOOR = 0.002

# 尾分布拟合的最小 R^2
TAIL_MIN_R_SQUARED = 0.9

# ============ 实验预设 ============
# 未在命令行或配置文件中给出的参数取以下默认值
EXPERIMENT_PRESETS = {
    "norms-sweep": {"generator": "hammersley", "dims": [2], "n_list": [2 ** s for s in range(4, 15)],
                    "samples": 100000},
    "roth-test": {"generator": "hammersley", "dims": [2], "n_list": [2 ** s for s in range(4, 13)],
                  "samples": 20000},
    "lemma-bounds": {"generator": "hammersley", "dims": [2], "n_list": [2 ** s for s in range(4, 11)]},
    "dichotomy-example": {"generator": "faure", "base": 2, "dims": [2],
                          "n_list": [2 ** s for s in range(8, 17)], "samples": 100000},
    "product-bound": {"generator": "faure", "base": 3, "dims": [3],
                      "n_list": [3 ** s for s in range(3, 7)], "samples": 100000},
    "tails": {"generator": "random", "dims": [3], "n_list": [2 ** 12], "samples": 100000, "kind": "Z"},
    "net-verify": {"generator": "faure", "base": 2, "dims": [2], "n_list": [2 ** s for s in range(2, 13)],
                   "samples": 10000},
    "interpolation": {"generator": "hammersley", "dims": [2], "n_list": [256], "samples": 10000, "p": 2.0},
    "haar-scan": {"generator": "hammersley", "dims": [2], "n_list": [256]},
    "split-inner": {"generator": "random", "dims": [3], "n_list": [2 ** 10], "samples": 50000},
}

# ============ 存储配置 ============
# 实验数据库（r-函数缓存与运行记录）
DATABASE_PATH = "data/discrepancy_lab.db"

# 运行记录保留天数
RUN_RETENTION_DAYS = 90

# ============ 日志配置 ============
# 日志级别: DEBUG, INFO, WARNING, ERROR
LOG_LEVEL = "INFO"

# 是否输出日志到文件
LOG_TO_FILE = False

# 日志文件路径
LOG_FILE = "logs/discrepancy_lab.log"

# 日志文件最大大小（字节）10MB
LOG_MAX_SIZE = 10 * 1024 * 1024

# 保留的日志文件数量（日志轮转）
LOG_BACKUP_COUNT = 5

# 日志格式
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

# 日期格式
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# 本地覆盖（config.py 不纳入版本管理）
try:
    from .config import *  # noqa: F401,F403
except ImportError:
    pass
