# -*- coding: utf-8 -*-
"""Configuration.

This module contains flags to turn on and off optional modules,
and the numerical tolerances shared across the package.

"""
from importlib import util

matplotlib_enabled = util.find_spec("matplotlib") is not None

# Row/column sums of generated weights must match 1 to this tolerance.
STOCHASTIC_TOL = 1e-12

# Any state entry above this magnitude aborts a run.
DIVERGENCE_BOUND = 1e12

# Relative tolerance of sum_i y_k^i = sum_i grad f_i(x_k^i).
CONSERVATION_RTOL = 1e-9

# Residuals at or below this value are treated as numerically zero.
RESIDUAL_FLOOR = 1e-14
