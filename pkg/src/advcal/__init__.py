"""Calibrate differential-privacy noise so an attacker's guessing advantage stays bounded."""

__version__ = "0.1.0"

from advcal.engine import EpsilonResult, epsilon_one_sided, epsilon_two_sided, posterior_upper_bound
from advcal.errors import AdvcalError

__all__ = [
    "AdvcalError",
    "EpsilonResult",
    "epsilon_one_sided",
    "epsilon_two_sided",
    "posterior_upper_bound",
    "__version__",
]
