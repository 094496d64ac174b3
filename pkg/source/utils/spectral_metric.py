"""
Objective: Heat kernel K_s, the profiles eta_t / psi_t, the diffusion metric
d_t computed two independent ways, and diffusion balls.

Steps:
1. eta_t(sigma) = 2 e^{-2 t sigma} + sum_{l>=1} 2^l e^{-2 t 2^{s l} sigma}
   is summed in log space; every truncation carries a tail certificate from
   the ratio a_{l+1}/a_l = 2 exp(-2 t sigma 2^{s l} (2^s - 1)), which
   decreases in l, so once it is <= 1/2 the tail is below a_l q/(1-q).
2. psi_t(lambda) = sqrt(2/lambda * eta_t(lambda^-s)), psi_t(0) = 0.
3. d_t(x, y) = psi_t(delta(x, y)) (closed route) and the Haar sum over the
   separating wavelet at I(x, y) plus the two one-sided descendant chains
   (spectral route).
4. Balls are the largest dyadic interval around x with psi_t(|I|) < r.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from itertools import count
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gamma, logsumexp

from utils import config
from utils.dyadic_core import (
	DyadicInterval,
	DyadicPoint,
	contains,
	dyadic_distance,
	dyadic_distance_log2,
	haar_eval,
	interval_containing,
	smallest_common_interval,
)
from utils.errors import CapExceededError, NonConvergenceError, ParameterRangeError, QuadratureError

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
EXP_OVERFLOW = 709.0
# psi sums eta to this fraction of tail_tol, relative to the sum
PSI_RELATIVE_SHARE = 1.0 / 64.0


@dataclass(frozen=True)
class DiffusionParams:
	s: float
	t: float

	def __post_init__(self):
		for name in ("s", "t"):
			value = getattr(self, name)
			if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
				raise ParameterRangeError(f"{name} must be a positive finite real, got {value!r}")
		object.__setattr__(self, "s", float(self.s))
		object.__setattr__(self, "t", float(self.t))

	def at_time(self, t: float) -> "DiffusionParams":
		return replace(self, t=t)


@dataclass(frozen=True)
class TruncationPolicy:
	tail_tol: float = config.TAIL_TOL
	max_terms: int = config.MAX_TERMS
	max_depth: int = config.MAX_DEPTH

	def __post_init__(self):
		if not (math.isfinite(self.tail_tol) and self.tail_tol > 0):
			raise ParameterRangeError(f"tail_tol must be positive, got {self.tail_tol!r}")
		if self.max_terms < 1 or self.max_depth < 1:
			raise ParameterRangeError("max_terms and max_depth must be >= 1")

	@classmethod
	def from_env(cls, tail_tol=None, max_depth=None, max_terms=None) -> "TruncationPolicy":
		return cls(
			tail_tol=config.env_tail_tol() if tail_tol is None else tail_tol,
			max_terms=config.env_max_terms() if max_terms is None else max_terms,
			max_depth=config.env_max_depth() if max_depth is None else max_depth,
		)


@dataclass(frozen=True)
class Ball:
	"""A dyadic interval, or the whole of R+ when interval is None."""

	interval: Optional[DyadicInterval] = None

	@property
	def is_whole_space(self) -> bool:
		return self.interval is None

	def contains(self, y: DyadicPoint) -> bool:
		return self.is_whole_space or contains(self.interval, y)


@dataclass(frozen=True)
class TimeRatio:
	log_ratio: float
	log_bound: float

	@property
	def holds(self) -> bool:
		return self.log_ratio <= self.log_bound + 1e-12 * max(1.0, abs(self.log_bound))


@dataclass(frozen=True)
class Witness:
	x: DyadicPoint
	y: DyadicPoint
	log_d_t1: float
	log_d_t2: float


def _safe_exp(value: float) -> float:
	return math.inf if value > EXP_OVERFLOW else math.exp(value)


def _log_of(lam: float) -> float:
	"""log(lambda), exact multiple of log 2 for powers of two so dyadic lookups agree."""
	mantissa, exponent = math.frexp(lam)
	if mantissa == 0.5:
		return (exponent - 1) * LN2
	return math.log(lam)


def _log_sum_exp(log_terms) -> float:
	log_terms = np.asarray(log_terms, dtype=float)
	if log_terms.size == 0 or log_terms.max() == -math.inf:
		return -math.inf
	return float(logsumexp(log_terms))


def _log_tail_bound(log_term: float, log_ratio: float) -> float:
	"""log of a q/(1-q) for q <= 1/2: the tail after a term a with ratio bound q."""
	if log_ratio == -math.inf or log_term == -math.inf:
		return -math.inf
	return log_term + log_ratio - math.log1p(-math.exp(log_ratio))


def _sum_superexponential(log_beta, s, log_tol, max_terms, first=1, relative=False, log_extra=()):
	"""
	log of sum_{l >= first} 2^l exp(-beta 2^{s l}), given log(beta).

	Stops at the first l whose ratio bound q_l is <= 1/2 and whose certified
	tail is below exp(log_tol) (times the largest term when relative).
	log_extra are terms added to the sum, not part of the chain.
	"""
	log_growth = math.log(math.expm1(s * LN2)) # log(2^s - 1)
	log_terms = list(log_extra)
	log_tail = math.inf
	for n, l in enumerate(count(first)):
		if n >= max_terms:
			raise CapExceededError(
				f"series not certified after {max_terms} terms",
				terms=n, last_term=_safe_exp(log_terms[-1]) if log_terms else None, tail_bound=_safe_exp(log_tail),
			)
		log_term = l * LN2 - _safe_exp(log_beta + s * l * LN2)
		log_terms.append(log_term)
		log_ratio = LN2 - _safe_exp(log_beta + s * l * LN2 + log_growth)
		if log_ratio > -LN2:
			continue
		log_tail = _log_tail_bound(log_term, log_ratio)
		target = log_tol + (max(log_terms) if relative else 0.0)
		if log_tail <= target:
			logger.debug("superexponential series certified after %d terms (log tail %.3f)", n + 1, log_tail)
			return _log_sum_exp(log_terms)
	raise AssertionError("unreachable")


def _log_eta(params: DiffusionParams, log_sigma: float, log_tol: float, max_terms: int, relative: bool) -> float:
	log_beta = math.log(2.0 * params.t) + log_sigma
	head = LN2 - _safe_exp(log_beta) # 2 e^{-2 t sigma}
	return _sum_superexponential(log_beta, params.s, log_tol, max_terms, first=1, relative=relative, log_extra=(head,))


def eta(params: DiffusionParams, sigma: float, trunc: TruncationPolicy) -> float:
	if not sigma > 0:
		raise ParameterRangeError(f"eta needs sigma > 0, got {sigma!r}")
	return math.exp(_log_eta(params, math.log(sigma), math.log(trunc.tail_tol), trunc.max_terms, relative=False))


def log_eta(params: DiffusionParams, sigma: float, trunc: TruncationPolicy) -> float:
	"""log eta_t(sigma), tail certified relative to the sum; finite where eta underflows."""
	if not sigma > 0:
		raise ParameterRangeError(f"eta needs sigma > 0, got {sigma!r}")
	return _log_eta(params, math.log(sigma), math.log(trunc.tail_tol), trunc.max_terms, relative=True)


@lru_cache(maxsize=65536)
def _log_psi_sq(params: DiffusionParams, log_lam: float, trunc: TruncationPolicy) -> float:
	log_sigma = -params.s * log_lam
	log_tol = math.log(trunc.tail_tol * PSI_RELATIVE_SHARE)
	return LN2 - log_lam + _log_eta(params, log_sigma, log_tol, trunc.max_terms, relative=True)


def log_psi(params: DiffusionParams, lam: float, trunc: TruncationPolicy) -> float:
	"""log psi_t(lambda); finite even where psi itself underflows."""
	if lam < 0:
		raise ParameterRangeError(f"psi needs lambda >= 0, got {lam!r}")
	if lam == 0:
		return -math.inf
	return 0.5 * _log_psi_sq(params, _log_of(lam), trunc)


@lru_cache(maxsize=65536)
def psi(params: DiffusionParams, lam: float, trunc: TruncationPolicy) -> float:
	if lam < 0:
		raise ParameterRangeError(f"psi needs lambda >= 0, got {lam!r}")
	if lam == 0:
		return 0.0
	return math.exp(0.5 * _log_psi_sq(params, _log_of(lam), trunc))


def psi_dyadic(params: DiffusionParams, i: int, trunc: TruncationPolicy) -> float:
	"""psi_t(2^i) without forming 2^i."""
	return math.exp(0.5 * _log_psi_sq(params, i * LN2, trunc))


def log_psi_dyadic(params: DiffusionParams, i: int, trunc: TruncationPolicy) -> float:
	return 0.5 * _log_psi_sq(params, i * LN2, trunc)


@lru_cache(maxsize=1024)
def psi_infinity(params: DiffusionParams, trunc: TruncationPolicy) -> float:
	"""sqrt(2 sum_{k in Z} 2^k e^{-2 t 2^{k s}})."""
	log_two_t = math.log(2.0 * params.t)
	log_rel = math.log(trunc.tail_tol * PSI_RELATIVE_SHARE)
#	right tail k >= 1 is superexponential, k = 0 rides along as an extra term
	log_right = _sum_superexponential(
		log_two_t, params.s, log_rel, trunc.max_terms, first=1, relative=True, log_extra=(-2.0 * params.t,)
	)
#	left tail k <= -1: terms below 2^k, so the rest after k is below 2^k
	log_left_terms = []
	for n, k in enumerate(count(-1, -1)):
		if n >= trunc.max_terms:
			raise CapExceededError("left tail of the bilateral series not certified", terms=n)
		log_left_terms.append(k * LN2 - _safe_exp(log_two_t + k * params.s * LN2))
		if k * LN2 <= log_rel + max(log_right, max(log_left_terms)):
			break
	log_total = _log_sum_exp([log_right, _log_sum_exp(log_left_terms)])
	return math.exp(0.5 * (LN2 + log_total))


def _integral_exp_power(s: float, epsabs: float):
	"""int_0^inf e^{-2 x^s} dx by adaptive quadrature on segments where 2 x^s doubles."""
	levels = [0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 750.0]
	try:
		breaks = [(u / 2.0) ** (1.0 / s) for u in levels]
	except OverflowError:
		raise QuadratureError(f"order s={s!r} too small for the quadrature breakpoints")
	total, error = 0.0, 0.0
	for a, b in zip(breaks[:-1], breaks[1:]):
		value, err = integrate.quad(lambda x: math.exp(-2.0 * x ** s), a, b, epsabs=epsabs, epsrel=1e-13, limit=200)
		total += value
		error += err
#	beyond 2 x^s = 750 the integrand is below e^-750
	return total, error


@lru_cache(maxsize=1024)
def c_t_s(params: DiffusionParams, trunc: TruncationPolicy) -> float:
	"""c_t(s) = t^{-1/(2s)} sqrt(int_0^inf e^{-2 x^s} dx), quadrature checked against Gamma(1+1/s) 2^{-1/s}."""
	s = params.s
	quadrature, error = _integral_exp_power(s, epsabs=1e-14)
	closed = gamma(1.0 + 1.0 / s) * 2.0 ** (-1.0 / s)
	tolerance = 1e-8 * max(1.0, closed)
	if error > tolerance or abs(quadrature - closed) > tolerance:
		raise QuadratureError(
			f"int_0^inf exp(-2x^{s}) dx: quadrature {quadrature!r} (err {error:.2e}) vs Gamma form {closed!r}"
		)
	return params.t ** (-1.0 / (2.0 * s)) * math.sqrt(quadrature)


def kernel_profile(delta: float, params: DiffusionParams, trunc: TruncationPolicy) -> float:
	"""K_s(x, y; t) for x != y with delta(x, y) = delta: -e^{-t delta^-s}/delta + sum_{m>=1} e^{-t (2^m delta)^-s}/(2^m delta)."""
	if not delta > 0:
		raise ParameterRangeError(f"kernel profile needs delta > 0, got {delta!r}")
	log_delta = math.log(delta)
	log_tol = math.log(trunc.tail_tol)
	terms = [-_safe_exp(-params.t * _safe_exp(-params.s * log_delta) - log_delta)]
	for m in count(1):
		if m > trunc.max_terms:
			raise CapExceededError("kernel ancestor series not certified", terms=m, tail_bound=math.exp(-log_delta - (m - 1) * LN2))
		log_size = log_delta + m * LN2
		terms.append(_safe_exp(-params.t * _safe_exp(-params.s * log_size) - log_size))
#		sum over the ancestors above 2^m delta is below 1/(2^m delta)
		if -log_size <= log_tol:
			break
	return math.fsum(terms)


def kernel_K(x: DyadicPoint, y: DyadicPoint, params: DiffusionParams, trunc: TruncationPolicy) -> float:
	if x != y:
		return kernel_profile(dyadic_distance(x, y), params, trunc)
#	diagonal: every I containing x contributes e^{-t|I|^-s} |I|^-1
	log_tol = math.log(trunc.tail_tol)
	log_up = []
	for m in count(0):
		if m > trunc.max_terms:
			raise CapExceededError("diagonal kernel ancestor series not certified", terms=m)
		log_up.append(-params.t * math.exp(-params.s * m * LN2) - m * LN2)
		if -m * LN2 <= log_tol:
			break
	log_down = _sum_superexponential(math.log(params.t), params.s, log_tol, trunc.max_terms, first=1)
	return math.exp(_log_sum_exp([_log_sum_exp(log_up), log_down]))


def distance_closed(x: DyadicPoint, y: DyadicPoint, params: DiffusionParams, trunc: TruncationPolicy) -> float:
	if x == y:
		return 0.0
	return psi(params, dyadic_distance(x, y), trunc)


def _log_weight(level: int, params: DiffusionParams) -> float:
	"""log e^{-2 t |I|^-s} for I at the given level."""
	return -2.0 * params.t * _safe_exp(params.s * level * LN2)


def distance_spectral(x: DyadicPoint, y: DyadicPoint, params: DiffusionParams, trunc: TruncationPolicy) -> float:
	"""sqrt(sum_h e^{-2t|I(h)|^-s} |h(x) - h(y)|^2), enumerating only the wavelets that separate x and y."""
	if x == y:
		return 0.0
	top = smallest_common_interval(x, y)
	difference = haar_eval(top, x) - haar_eval(top, y)
	log_terms = [_log_weight(top.level, params) + 2.0 * math.log(abs(difference))]

	log_rel = math.log(trunc.tail_tol * PSI_RELATIVE_SHARE / 2.0)
	log_growth = math.log(math.expm1(params.s * LN2))
#	max_depth is the finest level enumerated; the first chain level is always taken
	finest = max(trunc.max_depth, top.level + 1)
	for level in range(top.level + 1, finest + 1):
		log_tails = []
		for inside, outside in ((x, y), (y, x)):
			J = interval_containing(inside, level)
			assert not contains(J, outside), "descendant of I(x, y) holding both points"
			value = haar_eval(J, inside)
			log_term = _log_weight(level, params) + 2.0 * math.log(abs(value))
			log_terms.append(log_term)
#			ratio of consecutive chain terms: 2 exp(-2t|J|^-s (2^s - 1))
			log_ratio = LN2 - 2.0 * params.t * _safe_exp(params.s * level * LN2 + log_growth)
			log_tails.append(_log_tail_bound(log_term, log_ratio) if log_ratio <= -LN2 else math.inf)
		if max(log_tails) <= log_rel + max(log_terms):
			logger.debug("spectral distance certified at level %d (I(x, y) at level %d)", level, top.level)
			return math.exp(0.5 * _log_sum_exp(log_terms))
	raise CapExceededError(
		f"spectral sum not certified down to level max_depth={trunc.max_depth}",
		terms=len(log_terms), last_term=_safe_exp(log_terms[-1]), tail_bound=_safe_exp(max(log_tails)),
	)


def _largest_admissible_exponent(r: float, params: DiffusionParams, trunc: TruncationPolicy) -> int:
	"""Largest i with psi_t(2^i) < r, for 0 < r < psi_t(+inf)."""
	def admissible(i):
		return psi_dyadic(params, i, trunc) < r

	if admissible(0):
		i = 0
		while admissible(i + 1):
			i += 1
			if i >= config.MAX_LEVEL:
				raise CapExceededError(
					f"radius {r!r} too close to psi_inf to resolve below level -{config.MAX_LEVEL}", terms=i
				)
		return i

#	gallop downward, then bisect between the last failure and the first success
	failing, step = 0, 1
	while True:
		candidate = -min(step, trunc.max_depth)
		if admissible(candidate):
			break
		if step >= trunc.max_depth:
			raise CapExceededError(f"no dyadic ball of radius {r!r} within max_depth={trunc.max_depth}", terms=step)
		failing, step = candidate, step * 2
	passing = candidate
	while failing - passing > 1:
		middle = (failing + passing) // 2
		if admissible(middle):
			passing = middle
		else:
			failing = middle
	return passing


def ball(x: DyadicPoint, r: float, params: DiffusionParams, trunc: TruncationPolicy) -> Ball:
	if not r > 0:
		raise ParameterRangeError(f"ball radius must be positive, got {r!r}")
	if r >= psi_infinity(params, trunc):
		return Ball()
	i = _largest_admissible_exponent(r, params, trunc)
	return Ball(interval_containing(x, -i))


def ball_radius_transfer(x: DyadicPoint, r1: float, t1: float, t2: float, s: float, trunc: TruncationPolicy) -> float:
	"""A radius r2 with B_{t2}(x, r2) = B_{t1}(x, r1): the midpoint of (psi_t2(|I|), psi_t2(2|I|)]."""
	params1 = DiffusionParams(s, t1)
	if not r1 < psi_infinity(params1, trunc):
		raise ParameterRangeError(f"r1={r1!r} reaches psi_t1(+inf); the ball is all of R+")
	source = ball(x, r1, params1, trunc)
	params2 = DiffusionParams(s, t2)
	i = source.interval.log2_length
	low, high = psi_dyadic(params2, i, trunc), psi_dyadic(params2, i + 1, trunc)
	r2 = 0.5 * (low + high)
	if not low < r2 <= high:
		raise NonConvergenceError(f"psi_t2 gap ({low!r}, {high!r}] not resolvable in double precision")
	return r2


def time_ratio_bound(x: DyadicPoint, y: DyadicPoint, s: float, t1: float, t2: float, trunc: TruncationPolicy) -> TimeRatio:
	"""d_t2^2/d_t1^2 against e^{-2(t2-t1) delta^-s}, both in log form."""
	if x == y:
		raise ParameterRangeError("time ratio needs x != y")
	delta = dyadic_distance(x, y)
	params1, params2 = DiffusionParams(s, t1), DiffusionParams(s, t2)
	log_ratio = 2.0 * (log_psi(params2, delta, trunc) - log_psi(params1, delta, trunc))
	log_bound = -2.0 * (t2 - t1) * _safe_exp(-s * math.log(delta))
	return TimeRatio(log_ratio, log_bound)


def non_equivalence_witness(C: float, s: float, t1: float, t2: float, trunc: TruncationPolicy) -> Witness:
	"""Pair (0, 2^-m) with d_t1 > C d_t2, shrinking delta until one is found."""
	if not (C > 0 and 0 < t1 < t2):
		raise ParameterRangeError("need C > 0 and 0 < t1 < t2")
	params1, params2 = DiffusionParams(s, t1), DiffusionParams(s, t2)
	origin = DyadicPoint(0)
	for m in range(trunc.max_depth + 1):
		y = DyadicPoint(1, m)
		i = dyadic_distance_log2(origin, y)
		log_d1 = log_psi_dyadic(params1, i, trunc)
		log_d2 = log_psi_dyadic(params2, i, trunc)
		if log_d1 - log_d2 > math.log(C):
			return Witness(origin, y, log_d1, log_d2)
	raise CapExceededError(f"no witness for C={C!r} within max_depth={trunc.max_depth}", terms=trunc.max_depth)

