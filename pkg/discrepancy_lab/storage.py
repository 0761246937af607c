"""
存储模块 - Storage
点集文本/二进制文件、原子 JSON 写入、CSV 与绘图数据文件，
以及 SQLite 实验库（贪心 r-函数缓存与运行记录）
"""

import csv
import json
import logging
import sqlite3
import struct
import threading
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import settings
from .exceptions import PointSetFormatError
from .haar import RFunction, ShapeVector
from .pointset import GeneratorInfo, PointSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TEXT_HEADER = "discrepancy-pointset v1"
BINARY_MAGIC = b"DPS1"
# 旧版本写出的来源元数据行，读取时仍然接受
GENERATOR_INFO_PREFIX = "# generator-info "


# ==================== 点集文件 ====================

def write_pointset_text(pointset: PointSet, path: PathLike):
    """
    文本格式：

        discrepancy-pointset v1 dim=<d> n=<N> generator=<name>
        x_1 ... x_d        （每行一点，%.17g 精确往返）
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{TEXT_HEADER} dim={pointset.dim} n={pointset.n_points} generator={pointset.generator.name}\n")
        np.savetxt(fh, pointset.points, fmt="%.17g")
    logger.debug(f"点集已写入 {path} (文本, N={pointset.n_points}, d={pointset.dim})")


def write_pointset_binary(pointset: PointSet, path: PathLike):
    """二进制格式：'DPS1' + d, N（uint32 小端）+ N*d 个 float64 小端"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(BINARY_MAGIC + struct.pack("<II", pointset.dim, pointset.n_points))
        fh.write(np.ascontiguousarray(pointset.points, dtype="<f8").tobytes())
    logger.debug(f"点集已写入 {path} (二进制, N={pointset.n_points}, d={pointset.dim})")


def _parse_header(line: str) -> Optional[Dict[str, str]]:
    """文件头可带前导 '#'；不是文件头时返回 None"""
    text = line.lstrip("#").strip()
    if not text.startswith(TEXT_HEADER):
        return None
    fields = {}
    for token in text[len(TEXT_HEADER):].split():
        key, _, value = token.partition("=")
        fields[key] = value
    return fields


def read_pointset_text(path: PathLike) -> PointSet:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = _parse_header(lines[0]) if lines else None
    if header is None:
        raise PointSetFormatError(f"{path}: 缺少点集文件头")
    try:
        dim, n_points = int(header["dim"]), int(header["n"])
    except (KeyError, ValueError) as e:
        raise PointSetFormatError(f"{path}: 文件头损坏 ({e})")
    generator = GeneratorInfo(header.get("generator", "file"), {"path": str(path)})
    rows = []
    for line in lines[1:]:
        if line.startswith(GENERATOR_INFO_PREFIX):
            try:
                info = json.loads(line[len(GENERATOR_INFO_PREFIX):])
                generator = GeneratorInfo(info.get("name", generator.name), info.get("params", {}), info.get("seed"))
            except json.JSONDecodeError:
                logger.warning(f"⚠️  {path}: 来源元数据无法解析，忽略")
            continue
        if not line.strip() or line.startswith("#"):
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError as e:
            raise PointSetFormatError(f"{path}: 坐标无法解析 ({e})")
    if len(rows) != n_points or any(len(row) != dim for row in rows):
        raise PointSetFormatError(f"{path}: 数据与文件头不符 (dim={dim}, n={n_points}, 实际 {len(rows)} 行)")
    return PointSet(np.array(rows, dtype=np.float64).reshape(n_points, dim), generator)


def read_pointset_binary(path: PathLike) -> PointSet:
    path = Path(path)
    payload = path.read_bytes()
    if payload[:4] != BINARY_MAGIC or len(payload) < 12:
        raise PointSetFormatError(f"{path}: 不是二进制点集文件")
    dim, n_points = struct.unpack_from("<II", payload, 4)
    expected = 12 + 8 * dim * n_points
    if len(payload) != expected:
        raise PointSetFormatError(f"{path}: 长度 {len(payload)} 与 d={dim}, N={n_points} 不符（应为 {expected}）")
    points = np.frombuffer(payload, dtype="<f8", offset=12).reshape(n_points, dim)
    return PointSet(points, GeneratorInfo("file", {"path": str(path)}))


def save_pointset(pointset: PointSet, path: PathLike, binary: Optional[bool] = None):
    """按扩展名选择格式（.bin / .dps 为二进制），也可显式指定"""
    path = Path(path)
    if binary is None:
        binary = path.suffix.lower() in (".bin", ".dps")
    if binary:
        write_pointset_binary(pointset, path)
    else:
        write_pointset_text(pointset, path)


def load_pointset(path: PathLike) -> PointSet:
    """按魔数自动识别格式"""
    path = Path(path)
    if not path.exists():
        raise PointSetFormatError(f"点集文件不存在: {path}")
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return read_pointset_binary(path)
    return read_pointset_text(path)


# ==================== 报告文件 ====================

def write_json_atomic(path: PathLike, data: Any):
    """先写临时文件再替换，避免留下半截文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        with tmp_path.open("w", encoding="utf-8") as fh:
            json.dump(data, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        tmp_path.replace(path)
    except Exception:
        if tmp_path.exists():
            try:
                tmp_path.unlink()
            except OSError:
                pass
        raise


def write_csv(path: PathLike, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None):
    """按列名写 CSV；缺失值留空"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_plot_data(path: PathLike, series: Iterable[Tuple[float, float, float]], title: str = ""):
    """gnuplot 数据文件：x y sigma 三列"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        if title:
            fh.write(f"# {title}\n")
        fh.write("# x y sigma\n")
        for x, y, sigma in series:
            fh.write(f"{x:.17g} {y:.17g} {sigma:.17g}\n")


# ==================== 实验库 ====================

class LabDatabase:
    """
    实验库

    r_functions: (点集摘要, 形状) -> 贪心 r-函数二进制
    runs: 每次实验的配置摘要、报告摘要与耗时，用于审计重复运行是否逐位一致
    r-函数缓存可被实验的并行行访问，读写由锁串行化。
    """

    def __init__(self, db_path: Optional[str] = None):
        self.db_path = str(db_path or settings.DATABASE_PATH)
        self.conn = None
        self.cursor = None
        self._lock = threading.Lock()
        self._init_database()

    def _init_database(self):
        """初始化数据库，创建表结构"""
        try:
            if self.db_path != ":memory:":
                Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
            self.conn = sqlite3.connect(self.db_path, check_same_thread=False)
            self.cursor = self.conn.cursor()

            self.cursor.execute('''
                CREATE TABLE IF NOT EXISTS r_functions (
                    digest TEXT NOT NULL,
                    shape TEXT NOT NULL,
                    payload BLOB NOT NULL,
                    created_time INTEGER,
                    PRIMARY KEY (digest, shape)
                )
            ''')

            self.cursor.execute('''
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    experiment TEXT NOT NULL,
                    config_digest TEXT NOT NULL,
                    report_digest TEXT,
                    exit_code INTEGER,
                    wall_clock REAL,
                    finished_time INTEGER
                )
            ''')

            self.cursor.execute('''
                CREATE INDEX IF NOT EXISTS idx_runs_config
                ON runs(config_digest)
            ''')

            self.conn.commit()
            logger.debug(f"✅ 实验库已初始化: {self.db_path}")

        except sqlite3.Error as e:
            logger.error(f"❌ 实验库初始化失败: {e}")
            raise

    def get_r_function(self, digest: str, shape: ShapeVector) -> Optional[RFunction]:
        try:
            with self._lock:
                self.cursor.execute(
                    'SELECT payload FROM r_functions WHERE digest = ? AND shape = ?',
                    (digest, shape.key)
                )
                row = self.cursor.fetchone()
        except sqlite3.Error as e:
            logger.error(f"❌ 查询 r-函数缓存失败: {e}")
            return None
        if row is None:
            return None
        try:
            return RFunction.from_bytes(bytes(row[0]))
        except PointSetFormatError as e:
            logger.warning(f"⚠️  缓存中的 r-函数损坏，忽略: {e}")
            return None

    def put_r_function(self, digest: str, f: RFunction) -> bool:
        try:
            with self._lock:
                self.cursor.execute('''
                    INSERT OR REPLACE INTO r_functions (digest, shape, payload, created_time)
                    VALUES (?, ?, ?, ?)
                ''', (digest, f.shape.key, sqlite3.Binary(f.to_bytes()), int(time.time())))
                self.conn.commit()
            return True
        except sqlite3.Error as e:
            logger.error(f"❌ 写入 r-函数缓存失败: {e}")
            return False

    def record_run(self, experiment: str, config_digest: str, report_digest: Optional[str],
                   exit_code: int, wall_clock: float) -> bool:
        try:
            self.cursor.execute('''
                INSERT INTO runs (experiment, config_digest, report_digest, exit_code, wall_clock, finished_time)
                VALUES (?, ?, ?, ?, ?, ?)
            ''', (experiment, config_digest, report_digest, exit_code, wall_clock, int(time.time())))
            self.conn.commit()
            return True
        except sqlite3.Error as e:
            logger.error(f"❌ 记录运行失败: {e}")
            return False

    def get_runs(self, config_digest: Optional[str] = None, limit: int = 10) -> List[Tuple]:
        """最近的运行记录 (experiment, config_digest, report_digest, exit_code, wall_clock, finished_time)"""
        try:
            if config_digest is None:
                self.cursor.execute('''
                    SELECT experiment, config_digest, report_digest, exit_code, wall_clock, finished_time
                    FROM runs ORDER BY id DESC LIMIT ?
                ''', (limit,))
            else:
                self.cursor.execute('''
                    SELECT experiment, config_digest, report_digest, exit_code, wall_clock, finished_time
                    FROM runs WHERE config_digest = ? ORDER BY id DESC LIMIT ?
                ''', (config_digest, limit))
            return self.cursor.fetchall()
        except sqlite3.Error as e:
            logger.error(f"❌ 查询运行记录失败: {e}")
            return []

    def is_reproducible(self, config_digest: str) -> Optional[bool]:
        """同一配置的所有运行报告摘要是否一致；不足两次运行时返回 None"""
        rows = self.get_runs(config_digest, limit=1000)
        if len(rows) < 2:
            return None
        return len({row[2] for row in rows}) == 1

    def clean_old_runs(self, days: Optional[int] = None) -> int:
        days = settings.RUN_RETENTION_DAYS if days is None else days
        try:
            cutoff_time = int(time.time()) - (days * 24 * 3600)
            self.cursor.execute('DELETE FROM runs WHERE finished_time < ?', (cutoff_time,))
            deleted_count = self.cursor.rowcount
            self.conn.commit()
            if deleted_count > 0:
                logger.info(f"🗑️ 已清理 {deleted_count} 条超过 {days} 天的运行记录")
            return deleted_count
        except sqlite3.Error as e:
            logger.error(f"❌ 清理运行记录失败: {e}")
            return 0

    def get_statistics(self) -> Dict[str, Any]:
        try:
            stats = {}
            self.cursor.execute('SELECT COUNT(*) FROM r_functions')
            stats['r_functions'] = self.cursor.fetchone()[0]
            self.cursor.execute('SELECT COUNT(*) FROM runs')
            stats['runs'] = self.cursor.fetchone()[0]
            self.cursor.execute('SELECT experiment, COUNT(*) FROM runs GROUP BY experiment')
            stats['by_experiment'] = dict(self.cursor.fetchall())
            return stats
        except sqlite3.Error as e:
            logger.error(f"❌ 获取统计信息失败: {e}")
            return {}

    def close(self):
        if self.conn:
            self.conn.close()
            self.conn = None
            logger.debug("实验库连接已关闭")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
