"""
命令行入口 - Command Line
python -m discrepancy_lab <子命令> [参数]

退出码: 0 全部判定通过 / 1 存在失败判定 / 2 配置错误
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__, settings
from .exceptions import ConfigError, InvalidPointSetError, NetParameterError, PointSetFormatError
from .experiments import (FORMATS, GENERATORS, NORM_CSV_COLUMNS, ExperimentConfig, ExperimentReport, build_config,
                          load_config_file, make_pointset, parse_n_list, run_experiment)
from .logger import setup_logger
from .numerics import set_worker_count
from .storage import LabDatabase, save_pointset, write_csv, write_json_atomic, write_plot_data

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

# 子命令 -> 实验名
SUBCOMMANDS = {
    "norms": "norms-sweep",
    "haar-scan": "haar-scan",
    "roth": "roth-test",
    "lemma-bounds": "lemma-bounds",
    "dichotomy": "dichotomy-example",
    "product": "product-bound",
    "tails": "tails",
    "net-verify": "net-verify",
    "interpolate": "interpolation",
    "split-inner": "split-inner",
}

SUBCOMMAND_HELP = {
    "norms": "L1 / L2 / Orlicz 范数随 N 的增长",
    "haar-scan": "按形状统计 Haar 系数并缓存贪心 r-函数",
    "roth": "<D_N, Z> 的下界与 ||Z||_p 有界性",
    "lemma-bounds": "贪心 r-函数内积的上下界",
    "dichotomy": "角点塌缩构造: 小 L1 与大 L2",
    "product": "三维 ||D||_1 ||D||_LlogL 乘积下界",
    "tails": "测试函数的亚高斯尾分布",
    "net-verify": "p 进网格公理与计数偏差",
    "interpolate": "经验测度上的插值不等式",
    "split-inner": "二分型测试函数内积拆分",
}


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析数值列表: {text}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析整数列表: {text}")


def _n_list(text: str) -> List[int]:
    try:
        return parse_n_list(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e))


def _add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--threads", type=int, default=None, help="工作线程数（默认按 CPU 核数）")
    parser.add_argument("--log-level", default=None, help="日志级别 (默认: settings.LOG_LEVEL)")


def _add_experiment_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", default=None, help="key = value 格式的实验配置文件")
    parser.add_argument("--dim", type=_int_list, dest="dims", default=None, help="维数列表，如 2,3")
    parser.add_argument("--n-list", type=_n_list, dest="n_list", default=None, help="N 列表，如 64,256 或 2^4..2^12")
    parser.add_argument("--generator", choices=GENERATORS, default=None, help="点集生成器")
    parser.add_argument("--base", type=int, default=None, help="p 进网格底数")
    parser.add_argument("--points", default=None, help="使用已保存的点集文件")
    parser.add_argument("--delta", type=float, default=None, help="角点塌缩参数 δ（默认 1/(2d)）")
    parser.add_argument("--epsilon", type=float, default=None, help="二分型测试函数指数 ε（q = n^ε）")
    parser.add_argument("--sine-c", type=_float_list, dest="sine_c", default=None, help="正弦测试函数常数 c 列表")
    parser.add_argument("--p", type=float, default=None, help="L^p 指数")
    parser.add_argument("--thresholds", type=_float_list, default=None, help="尾分布阈值列表")
    parser.add_argument("--kind", choices=("Z", "Y_dichotomy", "Y_sine"), default=None, help="测试函数类型")
    parser.add_argument("--order", type=int, default=None, help="Haar 扫描的形状阶数 |r|（默认 n）")
    parser.add_argument("--trials", type=int, default=None, help="计数偏差校验的随机矩形数")
    parser.add_argument("--samples", type=int, default=None, help="Monte-Carlo 样本数")
    parser.add_argument("--seed", type=int, default=None, help="随机种子")
    parser.add_argument("--stratified", action="store_const", const=True, default=None, help="分层采样")
    parser.add_argument("--format", choices=FORMATS, default=None,
                        help="报告格式：csv 每个范数一行，csv-wide 每个 (d, N) 一行")
    parser.add_argument("--out", dest="output", default=None, help="报告文件（默认输出到 stdout）")
    parser.add_argument("--plot-data", default=None, help="写出 gnuplot 数据文件的目录")
    parser.add_argument("--db", default=None, help=f"实验库路径 (默认: {settings.DATABASE_PATH})")
    parser.add_argument("--no-db", action="store_true", help="不使用 r-函数缓存与运行记录")
    _add_common_arguments(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="discrepancy_lab", description="差异函数范数与 Haar 方法实验工具")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    generate = subparsers.add_parser("generate", help="生成点集并写入文件")
    generate.add_argument("--generator", choices=GENERATORS, default="hammersley", help="点集生成器")
    generate.add_argument("--dim", type=int, default=2, help="维数")
    generate.add_argument("--n", type=_n_list, required=True, help="点数，如 256 或 2^8")
    generate.add_argument("--base", type=int, default=2, help="p 进网格底数")
    generate.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="随机种子")
    generate.add_argument("--out", required=True, help="输出文件（.bin/.dps 为二进制）")
    generate.add_argument("--binary", action="store_true", default=None, help="强制二进制格式")
    _add_common_arguments(generate)

    for command, experiment in SUBCOMMANDS.items():
        sub = subparsers.add_parser(command, help=SUBCOMMAND_HELP[command])
        sub.set_defaults(experiment=experiment)
        _add_experiment_arguments(sub)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ("dims", "n_list", "generator", "base", "points", "delta", "epsilon", "sine_c", "p", "thresholds",
            "kind", "order", "trials", "samples", "seed", "stratified", "format", "output")
    return {key: getattr(args, key) for key in keys}


def _write_report(report: ExperimentReport, config: ExperimentConfig):
    if config.output is None:
        sys.stdout.write(report.to_json() + "\n")
        return
    norm_rows = report.norm_rows()
    if config.format == "csv" and norm_rows:
        write_csv(config.output, norm_rows, NORM_CSV_COLUMNS)
    elif config.format in ("csv", "csv-wide"):
        write_csv(config.output, report.flat_rows())
    else:
        write_json_atomic(config.output, report.to_dict())
    logger.info(f"📄 报告已写入 {config.output}")


def _write_plot_data(report: ExperimentReport, directory: str):
    for name, series in report.plot_series.items():
        path = Path(directory) / f"{report.experiment}_{name}.dat"
        write_plot_data(path, series, f"{report.experiment}: {name}")
    logger.info(f"📈 绘图数据已写入 {directory}（{len(report.plot_series)} 个文件）")


def _run_generate(args: argparse.Namespace) -> int:
    config = ExperimentConfig(experiment="norms-sweep", generator=args.generator, base=args.base,
                              dims=[args.dim], n_list=args.n[:1], seed=args.seed)
    config.validate()
    pointset = make_pointset(config, args.dim, args.n[0])
    save_pointset(pointset, args.out, args.binary)
    logger.info(f"✅ 已生成 {pointset!r} -> {args.out}")
    return EXIT_OK


def _run_experiment_command(args: argparse.Namespace) -> int:
    file_values = load_config_file(args.config) if args.config else None
    config = build_config(args.experiment, file_values, _overrides(args))

    db = None if args.no_db else LabDatabase(args.db)
    try:
        started = time.perf_counter()
        report = run_experiment(config, db)
        wall_clock = time.perf_counter() - started
        _write_report(report, config)
        if args.plot_data:
            _write_plot_data(report, args.plot_data)
        exit_code = EXIT_OK if report.passed else EXIT_CHECK_FAILED
        logger.info(f"⏱️  {config.experiment} 用时 {wall_clock:.2f}s，报告摘要 {report.digest()[:16]}")
        if db is not None:
            db.record_run(config.experiment, config.digest(), report.digest(), exit_code, wall_clock)
            if db.is_reproducible(config.digest()) is False:
                logger.warning("⚠️  同一配置的历史报告摘要不一致")
        return exit_code
    finally:
        if db is not None:
            db.close()


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logger(level=args.log_level)
    set_worker_count(args.threads)
    try:
        if args.command == "generate":
            return _run_generate(args)
        return _run_experiment_command(args)
    except (ConfigError, PointSetFormatError, NetParameterError, InvalidPointSetError) as e:
        logger.error(f"❌ 配置错误: {e}")
        return EXIT_CONFIG_ERROR
    except KeyboardInterrupt:
        logger.info("⏹️  已中断")
        return EXIT_CHECK_FAILED
    except Exception as e:
        logger.exception(f"❌ 运行失败: {e}")
        return EXIT_CHECK_FAILED
    finally:
        set_worker_count(None)
