"""
Objective: Extended-precision oracle sums (mpmath) for eta, psi and psi_inf.

Double precision cannot separate psi_t(2^i) from psi_t(2^{i+1}) once psi has
saturated near psi_t(+inf) (the increments fall below 1e-16 relative), so the
strict monotonicity check and the brute-force oracles run here.
"""

import mpmath

from utils import config
from utils.errors import CapExceededError


def eta_partial_sum_extended(params, sigma, n_terms: int, dps: int = None):
	"""2 e^{-2 t sigma} + sum_{l=1}^{n_terms-1} 2^l e^{-2 t 2^{s l} sigma}, no truncation logic."""
	with mpmath.workdps(dps or config.EXTENDED_DPS):
		s, t, sigma = mpmath.mpf(params.s), mpmath.mpf(params.t), mpmath.mpf(sigma)
		total = 2 * mpmath.exp(-2 * t * sigma)
		for l in range(1, n_terms):
			total += mpmath.mpf(2) ** l * mpmath.exp(-2 * t * mpmath.mpf(2) ** (s * l) * sigma)
		return +total


def psi_sq_dyadic_extended(params, i: int, dps: int = None, max_terms: int = None):
	"""psi_t(2^i)^2 with the discarded tail below 10^-dps relative."""
	dps = dps or config.EXTENDED_DPS
	max_terms = max_terms or config.MAX_TERMS
	with mpmath.workdps(dps + 10):
		s, t = mpmath.mpf(params.s), mpmath.mpf(params.t)
		lam = mpmath.mpf(2) ** i
		beta = 2 * t * lam ** (-s)
		growth = mpmath.mpf(2) ** s - 1
		relative = mpmath.mpf(10) ** (-dps)
		total = 2 * mpmath.exp(-beta)
		for l in range(1, max_terms + 1):
			term = mpmath.mpf(2) ** l * mpmath.exp(-beta * mpmath.mpf(2) ** (s * l))
			total += term
			ratio = 2 * mpmath.exp(-beta * mpmath.mpf(2) ** (s * l) * growth)
			if ratio <= 0.5 and term * ratio / (1 - ratio) <= relative * total:
				return 2 / lam * total
		raise CapExceededError(f"extended psi^2 at 2^{i} not certified after {max_terms} terms", terms=max_terms)


def bilateral_sum_extended(params, k_min: int, k_max: int, dps: int = None):
	"""sum_{k=k_min}^{k_max} 2^k e^{-2 t 2^{k s}}; psi_inf = sqrt(2 * this)."""
	with mpmath.workdps(dps or config.EXTENDED_DPS):
		s, t = mpmath.mpf(params.s), mpmath.mpf(params.t)
		total = mpmath.mpf(0)
		for k in range(k_min, k_max + 1):
			total += mpmath.mpf(2) ** k * mpmath.exp(-2 * t * mpmath.mpf(2) ** (k * s))
		return +total


def strict_increase_violations(params, i_min: int, i_max: int, dps: int = None):
	"""Indices i where psi_t(2^{i+1}) <= psi_t(2^i) in extended precision."""
	values = [psi_sq_dyadic_extended(params, i, dps) for i in range(i_min, i_max + 1)]
	return [i_min + n for n in range(len(values) - 1) if not values[n + 1] > values[n]]
