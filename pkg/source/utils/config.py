"""
Objective: Global parameters of the toolbox.

Every default can be overridden from the environment (DYADIC_TAIL_TOL,
DYADIC_MAX_DEPTH, DYADIC_MAX_TERMS, DYADIC_MAX_LEVEL, DYADIC_BINARY_DIGITS);
CLI flags override the environment.
"""

import os

from utils.errors import ParameterRangeError

#global params
TAIL_TOL = 1e-12 # absolute bound on every discarded series tail
MAX_TERMS = 100_000 # hard cap on terms of any single series
MAX_DEPTH = 200 # finest wavelet level enumerated in spectral sums
MAX_LEVEL = 1024 # |j| bound on dyadic levels
BINARY_DIGITS = 53 # significant bits kept when parsing decimal input
EXTENDED_DPS = 80 # decimal digits for mpmath oracle sums
QUAD_TOL = 1e-9 # absolute tolerance of gaussian quadratures
VERIFY_SEED = 20240601

ENV_PREFIX = "DYADIC_"


def _read_env(name, cast, default, minimum):
	raw = os.environ.get(ENV_PREFIX + name)
	if raw is None or raw.strip() == "":
		return default
	try:
		value = cast(raw)
	except ValueError:
		raise ParameterRangeError(f"{ENV_PREFIX}{name}={raw!r} is not a valid {cast.__name__}")
	if not value >= minimum:
		raise ParameterRangeError(f"{ENV_PREFIX}{name}={raw!r} must be >= {minimum}")
	return value


def env_tail_tol():
	return _read_env("TAIL_TOL", float, TAIL_TOL, 1e-300)


def env_max_depth():
	return _read_env("MAX_DEPTH", int, MAX_DEPTH, 1)


def env_max_terms():
	return _read_env("MAX_TERMS", int, MAX_TERMS, 1)


def env_max_level():
	return _read_env("MAX_LEVEL", int, MAX_LEVEL, 1)


def env_binary_digits():
	return _read_env("BINARY_DIGITS", int, BINARY_DIGITS, 1)
