"""
Gradient checking harness and the verification suite built on it.
"""

from .gradcheck import DEFAULT_FLOOR, GradCheckReport, grad_check
from .run_gradient_checks import GradientCheckSuite, SuiteReport

__all__ = ['DEFAULT_FLOOR', 'GradCheckReport', 'grad_check', 'GradientCheckSuite', 'SuiteReport']
