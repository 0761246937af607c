"""
本地配置文件示例
复制此文件为 discrepancy_lab/config.py，只保留需要覆盖的项即可
未出现的项使用 settings.py 中的默认值
"""

# ============ 并行计算配置 ============
# 工作线程数（None 表示自动；结果与线程数无关）
MAX_WORKERS = None

# ============ Monte-Carlo 配置 ============
# 默认样本数（验收用 10^6，日常调试可降到 10^4）
DEFAULT_SAMPLES = 100000

# 默认随机种子
DEFAULT_SEED = 20140101

# ============ Haar / r-函数配置 ============
# 形状阶数 |r| 上限（每提高 1，单个 r-函数内存翻倍）
MAX_SHAPE_ORDER = 26

# ============ 存储配置 ============
# r-函数缓存与运行记录
DATABASE_PATH = "data/discrepancy_lab.db"

# ============ 日志配置 ============
# 日志级别: DEBUG, INFO, WARNING, ERROR
LOG_LEVEL = "INFO"

# 长时间扫描建议开启文件日志
LOG_TO_FILE = True
LOG_FILE = "logs/discrepancy_lab.log"
