# stats_modules/__init__.py
"""UAR-style metrics and significance testing"""
from stats_modules.metrics import ConfusionMatrix, leakage, per_group_uar, uar
from stats_modules.significance import SignificanceResult, TTestResult, bh_adjust, paired_t_test
