"""
Discrepancy Lab
差异函数实验工具 - 点集构造、D_N 的 L^p / Orlicz 范数、Haar 系数与 r-函数测试
"""

__version__ = "1.0.0"
__author__ = "Discrepancy Lab Team"

from .pointset import PointSet, generate_faure_net, generate_random, generate_van_der_corput, verify_net
from .discrepancy import NormReport, OrliczSpec, eval_discrepancy, l2_norm_exact, lp_norm_mc, orlicz_norm_mc
from .haar import RFunction, ShapeVector, all_coefficients, build_r_function_greedy, haar_coefficient
from .testfn import TestFunction, build_Y_dichotomy, build_Y_sine, build_Z, inner_product, tail_distribution
from .experiments import ExperimentConfig, ExperimentReport, run_experiment

__all__ = [
    'PointSet',
    'generate_random',
    'generate_van_der_corput',
    'generate_faure_net',
    'verify_net',
    'NormReport',
    'OrliczSpec',
    'eval_discrepancy',
    'l2_norm_exact',
    'lp_norm_mc',
    'orlicz_norm_mc',
    'ShapeVector',
    'RFunction',
    'haar_coefficient',
    'all_coefficients',
    'build_r_function_greedy',
    'TestFunction',
    'build_Z',
    'build_Y_dichotomy',
    'build_Y_sine',
    'inner_product',
    'tail_distribution',
    'ExperimentConfig',
    'ExperimentReport',
    'run_experiment',
]
