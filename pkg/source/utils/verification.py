"""
Objective: Property suites run by `verify`: dyadic, spectral, laplacian and
euclidean.

Steps:
1. Each property is a function (trunc, rng) -> (measured, threshold, detail)
   registered under its suite; it passes when measured <= threshold.
2. Every property gets its own generator seeded from (seed, position), so
   results do not depend on the order or the number of workers.
3. Properties run sequentially with a tqdm bar on stderr, or through
   joblib.Parallel with --jobs N.
"""

import logging
import math
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from utils import config, extended_precision, spectral_metric
from utils.dyadic_core import (
	DyadicInterval,
	DyadicPoint,
	HaarWavelet,
	dyadic_distance,
	interval_containing,
	smallest_common_interval,
)
from utils.errors import DyadicToolboxError
from utils.euclidean_gaussian import (
	GaussianParams,
	ball_stability_check,
	normalization_quadrature,
	ratio_limit_check,
	rho_sq_closed,
	rho_sq_derivative,
	rho_sq_quadrature,
	self_convolution_quadrature,
	translation_rotation_invariance_check,
	weierstrass,
)
from utils.laplacian_numeric import (
	HaarExpansion,
	PiecewiseDyadicFunction,
	apply_laplacian,
	evolve_pointwise,
	evolve_spectral,
	haar_eigenvalue,
)
from utils.spectral_metric import DiffusionParams, TruncationPolicy

logger = logging.getLogger(__name__)

#global params
S_GRID = (0.25, 0.5, 1.0, 2.0)
T_GRID = (0.1, 1.0, 10.0)
LAPLACIAN_ORDERS = (0.25, 0.5, 0.75)
EQUIVALENCE_PAIRS = 200
RANDOM_PAIRS = 1000
BALL_CASES = 100
BALL_SAMPLES = 1000
EVOLUTION_CASES = 50
SUITE_NAMES = ("dyadic", "spectral", "laplacian", "euclidean")

PROPERTIES = {name: [] for name in SUITE_NAMES}


@dataclass(frozen=True)
class PropertyResult:
	suite: str
	name: str
	passed: bool
	measured: float
	threshold: float
	detail: str = ""


def register(suite: str, name: str):
	def decorator(check):
		PROPERTIES[suite].append((name, check))
		return check
	return decorator


def random_point(rng, max_exponent: int = 24, span: int = 8) -> DyadicPoint:
	exponent = int(rng.integers(0, max_exponent + 1))
	return DyadicPoint(int(rng.integers(0, span << exponent)), exponent)


def random_pair(rng):
	"""Distinct points; half of the pairs are close (delta down to 2^-30)."""
	x = random_point(rng)
	if rng.random() < 0.5:
		offset = Fraction(int(rng.integers(1, 8)), 1 << int(rng.integers(0, 31)))
		return x, DyadicPoint.from_fraction(x.to_fraction() + offset)
	while True:
		y = random_point(rng)
		if y != x:
			return x, y


def random_piecewise(rng, root: DyadicInterval = DyadicInterval(-2, 0), max_level: int = 5, split: float = 0.6):
	pieces, stack = [], [root]
	while stack:
		I = stack.pop()
		if I.level < max_level and rng.random() < split:
			stack.extend(I.children())
		else:
			pieces.append((I, float(rng.uniform(-1.0, 1.0))))
	return PiecewiseDyadicFunction(tuple(pieces))


def _grid():
	return [DiffusionParams(s, t) for s in S_GRID for t in T_GRID]


# dyadic


@register("dyadic", "delta_examples")
def _delta_examples(trunc, rng):
	cases = [("0.25", "0.75", 1.0), ("0.5", "0.5", 0.0), ("0.9", "1.1", 2.0)]
	worst = 0.0
	for a, b, expected in cases:
		x, _ = DyadicPoint.parse(a)
		y, _ = DyadicPoint.parse(b)
		worst = max(worst, abs(dyadic_distance(x, y) - expected))
	return worst, 0.0, f"{len(cases)} worked examples"


@register("dyadic", "ultrametric_and_domination")
def _ultrametric(trunc, rng):
	violations = 0
	for _ in range(RANDOM_PAIRS):
		x, y = random_pair(rng)
		z = random_point(rng)
		dxy, dyz, dxz = dyadic_distance(x, y), dyadic_distance(y, z), dyadic_distance(x, z)
		violations += dxz > max(dxy, dyz)
		violations += dyadic_distance(y, x) != dxy
		violations += Fraction(dxy) < abs(x.to_fraction() - y.to_fraction())
	return violations, 0, f"{RANDOM_PAIRS} random triples"


@register("dyadic", "nested_or_disjoint")
def _nesting(trunc, rng):
	violations = 0
	for _ in range(RANDOM_PAIRS):
		I, J = (DyadicInterval(int(rng.integers(-4, 8)), int(rng.integers(0, 64))) for _ in range(2))
		overlap = max(I.left, J.left) < min(I.right, J.right)
		violations += overlap != (not I.is_disjoint(J))
	return violations, 0, f"{RANDOM_PAIRS} random interval pairs"


@register("dyadic", "haar_orthonormal")
def _haar_normalization(trunc, rng):
	violations = 0
	for _ in range(100):
		h = HaarWavelet(DyadicInterval(int(rng.integers(-20, 21)), int(rng.integers(0, 1 << 10))))
		violations += h.integral() != 0 or h.norm_sq() != 1
	return violations, 0, "integral 0 and norm 1 on 100 wavelets"


@register("dyadic", "smallest_interval_contains_both")
def _smallest_interval(trunc, rng):
	violations = 0
	for _ in range(RANDOM_PAIRS):
		x, y = random_pair(rng)
		I = smallest_common_interval(x, y)
#		minimal: the halves of I separate x and y
		violations += interval_containing(x, I.level) != I or interval_containing(y, I.level) != I
		violations += interval_containing(x, I.level + 1) == interval_containing(y, I.level + 1)
	return violations, 0, f"{RANDOM_PAIRS} random pairs"


# spectral


@register("spectral", "closed_matches_spectral")
def _closed_matches_spectral(trunc, rng):
	pairs = [random_pair(rng) for _ in range(EQUIVALENCE_PAIRS)]
	worst = 0.0
	for params in _grid():
		for x, y in pairs:
			closed = spectral_metric.distance_closed(x, y, params, trunc)
			spectral = spectral_metric.distance_spectral(x, y, params, trunc)
			worst = max(worst, abs(spectral - closed))
	return worst, 2.0 * trunc.tail_tol, f"{EQUIVALENCE_PAIRS} pairs x {len(_grid())} (s, t)"


@register("spectral", "metric_axioms")
def _metric_axioms(trunc, rng):
	violations = 0
	params = DiffusionParams(float(rng.choice(S_GRID)), float(rng.choice(T_GRID)))
	for _ in range(RANDOM_PAIRS):
		x, y = random_pair(rng)
		z = random_point(rng)
		dxy = spectral_metric.distance_closed(x, y, params, trunc)
		dyz = spectral_metric.distance_closed(y, z, params, trunc)
		dxz = spectral_metric.distance_closed(x, z, params, trunc)
		violations += dxy != spectral_metric.distance_closed(y, x, params, trunc)
		violations += spectral_metric.distance_closed(x, x, params, trunc) != 0.0
		violations += dxz > max(dxy, dyz)
	return violations, 0, f"s={params.s} t={params.t}"


@register("spectral", "profile_strictly_increasing")
def _strict_increase(trunc, rng):
	violations = []
	for params in _grid():
		violations.extend(extended_precision.strict_increase_violations(params, -40, 40))
	return len(violations), 0, "psi_t(2^i), i in [-40, 40], extended precision"


@register("spectral", "profile_vanishes_at_zero")
def _vanishing(trunc, rng):
	value = spectral_metric.psi_dyadic(DiffusionParams(1.0, 1.0), -60, trunc)
	return value, 1e-8, "psi_1(2^-60) at s=1"


@register("spectral", "psi_infinity_sandwich")
def _sandwich(trunc, rng):
	violations = 0
	for params in _grid():
		c = spectral_metric.c_t_s(params, trunc)
		top = spectral_metric.psi_infinity(params, trunc)
		violations += not (math.sqrt(2.0) * c < top < 2.0 * c)
	return violations, 0, "sqrt(2) c < psi_inf < 2 c, c checked against the Gamma form"


@register("spectral", "time_monotone")
def _time_monotone(trunc, rng):
	violations = 0
	for _ in range(RANDOM_PAIRS):
		x, y = random_pair(rng)
		s = float(rng.choice(S_GRID))
		t1, t2 = sorted(rng.choice(T_GRID, 2, replace=False))
		d1 = spectral_metric.distance_closed(x, y, DiffusionParams(s, float(t1)), trunc)
		d2 = spectral_metric.distance_closed(x, y, DiffusionParams(s, float(t2)), trunc)
		violations += d2 > d1
	return violations, 0, f"{RANDOM_PAIRS} pairs"


@register("spectral", "time_ratio_bound")
def _time_ratio(trunc, rng):
	violations = 0
	for _ in range(RANDOM_PAIRS):
		x, y = random_pair(rng)
		s = float(rng.choice(S_GRID))
		t1, t2 = sorted(rng.choice(T_GRID, 2, replace=False))
		violations += not spectral_metric.time_ratio_bound(x, y, s, float(t1), float(t2), trunc).holds
	return violations, 0, f"{RANDOM_PAIRS} pairs"


@register("spectral", "non_equivalence_witness")
def _witness(trunc, rng):
	C = 1e6
	witness = spectral_metric.non_equivalence_witness(C, 1.0, 1.0, 2.0, trunc)
	margin = witness.log_d_t1 - witness.log_d_t2 - math.log(C)
	return -margin, 0.0, f"pair ({witness.x}, {witness.y}) with log(d_t1/d_t2) - log C = {margin:.3f}"


@register("spectral", "kernel_bound")
def _kernel_bound(trunc, rng):
	violations = 0
	params = DiffusionParams(float(rng.choice(S_GRID)), float(rng.choice(T_GRID)))
	for _ in range(RANDOM_PAIRS):
		x, y = random_pair(rng)
		violations += abs(spectral_metric.kernel_K(x, y, params, trunc)) > 2.0 / dyadic_distance(x, y)
	return violations, 0, f"|K| <= 2/delta at s={params.s} t={params.t}"


def _random_ball_case(rng, trunc):
	"""(x, r, params, i) with psi(2^i) < r <= psi(2^{i+1}), so the ball has length 2^i."""
	while True:
		params = DiffusionParams(float(rng.choice(S_GRID)), float(rng.choice(T_GRID)))
		i = int(rng.integers(-12, 6))
		low = spectral_metric.psi_dyadic(params, i, trunc)
		high = spectral_metric.psi_dyadic(params, i + 1, trunc)
		r = low + float(rng.uniform(0.05, 0.95)) * (high - low)
		if low < r < high:
			return random_point(rng, max_exponent=16), r, params, i


def _brute_force_mismatches(x, r, params, found, trunc, rng):
	level = found.interval.level
	resolution = level + 12
	center = x.index_at_level(resolution)
	mismatches = 0
	for k in rng.integers(max(0, center - (1 << 13)), center + (1 << 13), BALL_SAMPLES):
		k = int(k)
		y = DyadicPoint(k, resolution) if resolution >= 0 else DyadicPoint(k << -resolution, 0)
		inside = spectral_metric.distance_closed(x, y, params, trunc) < r
		mismatches += inside != found.contains(y)
	return mismatches


@register("spectral", "ball_is_dyadic_interval")
def _ball_identity(trunc, rng):
	failures = 0
	for _ in range(BALL_CASES):
		x, r, params, i = _random_ball_case(rng, trunc)
		found = spectral_metric.ball(x, r, params, trunc)
		failures += found.is_whole_space or found.interval != interval_containing(x, -i)
		if not found.is_whole_space:
			failures += _brute_force_mismatches(x, r, params, found, trunc, rng)
	return failures, 0, f"{BALL_CASES} balls, {BALL_SAMPLES} samples each"


@register("spectral", "ball_radius_transfer")
def _ball_transfer(trunc, rng):
	failures = 0
	transfers = 0
	while transfers < 20:
		x, r1, params, i = _random_ball_case(rng, trunc)
		t2 = float(rng.choice(T_GRID))
		target_params = params.at_time(t2)
#		the psi_t2 gap over the ball size must not underflow to a single double
		if not spectral_metric.psi_dyadic(target_params, i, trunc) < spectral_metric.psi_dyadic(target_params, i + 1, trunc):
			continue
		transfers += 1
		r2 = spectral_metric.ball_radius_transfer(x, r1, params.t, t2, params.s, trunc)
		source = spectral_metric.ball(x, r1, params, trunc)
		target = spectral_metric.ball(x, r2, target_params, trunc)
		failures += source != target
	return failures, 0, "20 transfers across the t grid"


# laplacian


@register("laplacian", "haar_eigenrelation")
def _eigenrelation(trunc, rng):
	worst = 0.0
	for s in LAPLACIAN_ORDERS:
		reference = haar_eigenvalue(DyadicInterval(0, 0), s, trunc, check_scaling=False)
		for level in range(-5, 6):
			I = DyadicInterval(level, int(rng.integers(0, 16)))
#			raises ResidualError past 1e-10
			value = haar_eigenvalue(I, s, trunc)
			scaled = value * math.exp(-s * level * math.log(2.0))
			worst = max(worst, abs(scaled - reference) / reference)
	return worst, 1e-10, "lambda_I |I|^s across levels -5..5"


@register("laplacian", "eigenvalue_positive")
def _eigen_positive(trunc, rng):
	violations = 0
	for s in LAPLACIAN_ORDERS:
		for level in (-3, 0, 3):
			violations += not haar_eigenvalue(DyadicInterval(level, 1), s, trunc, check_scaling=False) > 0
	return violations, 0, "lambda > 0"


@register("laplacian", "linearity")
def _linearity(trunc, rng):
	worst = 0.0
	for _ in range(20):
		f, g = random_piecewise(rng), random_piecewise(rng)
		alpha, beta = rng.uniform(-2.0, 2.0, 2)
		s = float(rng.choice(LAPLACIAN_ORDERS))
		x = DyadicPoint(int(rng.integers(0, 5 << 10)), 10)
		combined = apply_laplacian(alpha * f + beta * g, x, s, trunc)
		parts = alpha * apply_laplacian(f, x, s, trunc), beta * apply_laplacian(g, x, s, trunc)
		worst = max(worst, abs(combined - sum(parts)) / (1.0 + abs(parts[0]) + abs(parts[1])))
	return worst, 1e-9, "20 random combinations"


@register("laplacian", "evolution_route_equivalence")
def _route_equivalence(trunc, rng):
	worst = 0.0
	for _ in range(EVOLUTION_CASES):
		f = random_piecewise(rng)
		s, t = float(rng.uniform(0.25, 2.0)), float(rng.uniform(0.1, 5.0))
		evolved = evolve_spectral(HaarExpansion.from_piecewise(f), s, t)
		for _ in range(4):
			x = DyadicPoint(int(rng.integers(0, 5 << 10)), 10)
			kernel = evolve_pointwise(f, x, s, t, trunc)
			worst = max(worst, abs(kernel - evolved.evaluate(x, trunc)))
	return worst, 1e-10, f"{EVOLUTION_CASES} random functions, 4 points each"


@register("laplacian", "semigroup")
def _semigroup(trunc, rng):
	worst = 0.0
	for _ in range(EVOLUTION_CASES):
		f = HaarExpansion.from_piecewise(random_piecewise(rng))
		s = float(rng.uniform(0.25, 2.0))
		t1, t2 = rng.uniform(0.0, 3.0, 2)
		twice = evolve_spectral(evolve_spectral(f, s, float(t1)), s, float(t2))
		once = evolve_spectral(f, s, float(t1 + t2))
		for I, c in once.coefficients.items():
			if c != 0.0:
				worst = max(worst, abs(twice.coefficients[I] - c) / abs(c))
	return worst, 1e-13, "coefficientwise relative difference"


@register("laplacian", "single_coefficient_multiplier")
def _single_coefficient(trunc, rng):
	unit = DyadicInterval(0, 0)
	expansion = evolve_spectral(HaarExpansion({unit: 1.0}), 1.0, 1.0)
	spectral_error = abs(expansion.coefficients[unit] - math.exp(-1.0))
	x = DyadicPoint(1, 2)
	pointwise_error = abs(evolve_pointwise(PiecewiseDyadicFunction.haar(unit), x, 1.0, 1.0, trunc) - math.exp(-1.0))
	return max(spectral_error, pointwise_error), 1e-12, "h_[0,1), s=1, t=1, x=0.25"


@register("laplacian", "large_time_decay")
def _large_time(trunc, rng):
	f = PiecewiseDyadicFunction.haar(DyadicInterval(0, 0)) + PiecewiseDyadicFunction.haar(DyadicInterval(2, 1), 0.5)
	x = DyadicPoint(3, 3)
	return abs(evolve_pointwise(f, x, 1.0, 1e3, trunc)), 1e-6, "mean-zero f at t=1000, s=1"


# euclidean


@register("euclidean", "quadrature_matches_closed_form")
def _quadrature_closed(trunc, rng):
	worst = 0.0
	cases = [(r, t, 1) for r in (0.1, 1.0, 3.0) for t in (0.5, 1.0, 2.0)] + [(r, 1.0, 2) for r in (0.1, 1.0, 3.0)]
	for r, t, n in cases:
		p = GaussianParams(t, n)
		worst = max(worst, abs(rho_sq_quadrature(r, p) - rho_sq_closed(r, p)))
	return worst, 1e-8, f"{len(cases)} (r, t, n)"


@register("euclidean", "derivative_formula")
def _derivative(trunc, rng):
	worst = 0.0
	p, h = GaussianParams(1.0, 1), 1e-5
	for r in (0.5, 1.0, 2.0):
		difference = (rho_sq_closed(r + h, p) - rho_sq_closed(r - h, p)) / (2.0 * h)
		worst = max(worst, abs(difference - rho_sq_derivative(r, p)) / rho_sq_derivative(r, p))
	return worst, 1e-6, "central difference, h=1e-5"


@register("euclidean", "bounded_profile")
def _bounded(trunc, rng):
	p = GaussianParams(1.0, 1)
	limit = 2.0 * (8.0 * math.pi) ** -0.5
	return max(abs(rho_sq_closed(100.0, p) - limit), abs(rho_sq_quadrature(100.0, p) - limit)), 1e-8, "r=100"


@register("euclidean", "profile_increasing")
def _increasing(trunc, rng):
	p = GaussianParams(1.0, 1)
	values = [rho_sq_quadrature(float(r), p) for r in np.linspace(0.0, 4.0, 17)]
	return int(np.sum(np.diff(values) <= 0)), 0, "quadrature on r = 0, 0.25, ..., 4"


@register("euclidean", "ratio_limit")
def _ratio_limit(trunc, rng):
	worst = 0.0
	details = []
	for t1, t2, n in ((1.0, 2.0, 1), (1.0, 4.0, 2)):
		limit = ratio_limit_check(t1, t2, n, [1e-1, 1e-2, 1e-3, 1e-4])
		worst = max(worst, limit.relative_error)
		details.append(f"({t1},{t2},n={n}) -> {limit.extrapolated:.10f} vs {limit.expected:.10f}")
	identity = ratio_limit_check(1.0, 1.0, 1, [1e-1, 1e-2, 1e-3, 1e-4])
	worst = max(worst, max(abs(v - 1.0) for v in identity.ratios))
	return worst, 1e-3, "; ".join(details)


@register("euclidean", "translation_rotation_invariance")
def _invariance(trunc, rng):
	seed = int(rng.integers(0, 2**31))
	reports = [translation_rotation_invariance_check(GaussianParams(1.0, n), 20, seed) for n in (1, 2)]
	return max(report.max_discrepancy for report in reports), 1e-6, "20 trials in n=1 and n=2"


@register("euclidean", "self_convolution")
def _self_convolution(trunc, rng):
	p = GaussianParams(1.0, 1)
	worst = max(abs(self_convolution_quadrature(x, p) - weierstrass([x], GaussianParams(2.0, 1))) for x in (0.0, 0.7, 2.0))
	return worst, 1e-8, "W_t * W_t = W_2t at x = 0, 0.7, 2"


@register("euclidean", "normalization")
def _normalization(trunc, rng):
	return max(abs(normalization_quadrature(GaussianParams(t, n)) - 1.0) for t in (0.5, 2.0) for n in (1, 2)), 1e-8, "n = 1, 2"


@register("euclidean", "ball_stability")
def _ball_stability(trunc, rng):
	mismatches = 0
	for n in (1, 2):
		for t1, t2 in ((1.0, 2.0), (2.0, 0.5)):
			r1 = 0.7 * math.sqrt(2.0 * (8.0 * math.pi * t1) ** (-0.5 * n))
			report = ball_stability_check(rng.uniform(-1.0, 1.0, n), r1, t1, t2, n, 1000, int(rng.integers(0, 2**31)))
			mismatches += report.mismatches
	return mismatches, 0, "1000 samples per (n, t1, t2)"


def run_property(suite: str, position: int, trunc: TruncationPolicy, seed: int, max_level: int = None) -> PropertyResult:
	if max_level is not None:
#		workers start from a fresh config module
		config.MAX_LEVEL = max_level
	name, check = PROPERTIES[suite][position]
	rng = np.random.default_rng([seed, SUITE_NAMES.index(suite), position])
	try:
		measured, threshold, detail = check(trunc, rng)
	except DyadicToolboxError as error:
		logger.warning("%s/%s raised %s: %s", suite, name, type(error).__name__, error)
		return PropertyResult(suite, name, False, math.nan, math.nan, f"{type(error).__name__}: {error}")
	passed = bool(measured <= threshold)
	logger.info("%s/%s: %s (measured %r, threshold %r)", suite, name, "pass" if passed else "FAIL", measured, threshold)
	return PropertyResult(suite, name, passed, float(measured), float(threshold), detail)


def run_suites(suite: str = "all", trunc: TruncationPolicy = None, seed: int = config.VERIFY_SEED, jobs: int = 1, progress: bool = True):
	"""PropertyResult for every property of the selected suite(s), in registration order."""
	trunc = trunc or TruncationPolicy()
	names = SUITE_NAMES if suite == "all" else (suite,)
	tasks = [(name, position) for name in names for position in range(len(PROPERTIES[name]))]
	bar = tqdm(total=len(tasks), desc="verify", unit=" property", file=sys.stderr, disable=not progress)
	if jobs == 1:
		results = []
		for name, position in tasks:
			results.append(run_property(name, position, trunc, seed, config.MAX_LEVEL))
			bar.update()
	else:
		runner = Parallel(n_jobs=jobs, return_as="generator")
		results = []
		for result in runner(delayed(run_property)(name, position, trunc, seed, config.MAX_LEVEL) for name, position in tasks):
			results.append(result)
			bar.update()
	bar.close()
	return results
