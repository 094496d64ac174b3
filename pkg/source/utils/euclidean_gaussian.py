"""
Objective: Euclidean baseline. Diffusion distance of the Gauss-Weierstrass
kernel W_t on R^n, its radial profile rho_t and the small-r time ratio.

Steps:
1. d_t(x, y)^2 = int |W_t(x - z) - W_t(y - z)|^2 dz by adaptive quadrature
   (n = 1, 2) on a box around x and y; the Gaussian mass outside the box is
   bounded analytically and counted against quad_tol.
2. Closed form rho_t^2(r) = 2 (8 pi t)^{-n/2} (1 - e^{-r^2/8t}) for any n,
   with derivative 4 (8 pi t)^{-n/2} e^{-r^2/8t} r/(8t).
3. rho_t1^2/rho_t2^2 -> (t2/t1)^{n/2+1} as r -> 0, extrapolated in r^2.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from numba import jit
from scipy import integrate, optimize
from scipy.special import erfc

from utils import config
from utils.errors import NonConvergenceError, ParameterRangeError, QuadratureError

logger = logging.getLogger(__name__)

#global params
BOX_SIGMAS = 12.0 # box half-width beyond max(|x - y|, 1), in units of sqrt(2t)
INVERSE_XTOL = 1e-12
QUADRATURE_DIMENSIONS = (1, 2)


@dataclass(frozen=True)
class GaussianParams:
	t: float
	n: int = 1

	def __post_init__(self):
		if not (isinstance(self.t, (int, float)) and math.isfinite(self.t) and self.t > 0):
			raise ParameterRangeError(f"t must be a positive finite real, got {self.t!r}")
		if not (isinstance(self.n, int) and self.n >= 1):
			raise ParameterRangeError(f"dimension n must be a positive integer, got {self.n!r}")
		object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class RatioLimit:
	r_grid: List[float]
	ratios: List[float]
	extrapolated: float
	expected: float

	@property
	def relative_error(self) -> float:
		"""Error of the ratio at the smallest r of the grid."""
		return abs(self.ratios[-1] - self.expected) / self.expected


@dataclass(frozen=True)
class InvarianceReport:
	trials: int
	max_discrepancy: float
	violations: List[dict] = field(default_factory=list)


@dataclass(frozen=True)
class StabilityReport:
	r2: float
	euclidean_radius: float
	samples: int
	mismatches: int
	boundary_skipped: int


@jit(nopython=True)
def _gauss(u_sq, t, n):
	return (4.0 * math.pi * t) ** (-0.5 * n) * math.exp(-u_sq / (4.0 * t))


@jit(nopython=True)
def _difference_sq_1d(z, a, b, t):
	return (_gauss((a - z) ** 2, t, 1) - _gauss((b - z) ** 2, t, 1)) ** 2


@jit(nopython=True)
def _difference_sq_2d(z2, z1, a1, a2, b1, b2, t):
	wa = _gauss((a1 - z1) ** 2 + (a2 - z2) ** 2, t, 2)
	wb = _gauss((b1 - z1) ** 2 + (b2 - z2) ** 2, t, 2)
	return (wa - wb) ** 2


@jit(nopython=True)
def _product_1d(z, x, t):
	return _gauss((x - z) ** 2, t, 1) * _gauss(z * z, t, 1)


@jit(nopython=True)
def _density_1d(z, t):
	return _gauss(z * z, t, 1)


@jit(nopython=True)
def _density_2d(z2, z1, t):
	return _gauss(z1 * z1 + z2 * z2, t, 2)


def _as_point(x, n: int) -> np.ndarray:
	point = np.atleast_1d(np.asarray(x, dtype=float))
	if point.shape != (n,):
		raise ParameterRangeError(f"expected a point of R^{n}, got shape {point.shape}")
	if not np.all(np.isfinite(point)):
		raise ParameterRangeError(f"point {point} is not finite")
	return point


def _check_quadrature_dimension(p: GaussianParams):
	if p.n not in QUADRATURE_DIMENSIONS:
		raise ParameterRangeError(f"quadrature supports n in {QUADRATURE_DIMENSIONS}, got n={p.n}")


def _run_quadrature(routine, *args, **kwargs):
	"""scipy quadrature with its accuracy warnings raised as QuadratureError."""
	with warnings.catch_warnings():
		warnings.simplefilter("error", integrate.IntegrationWarning)
		try:
			return routine(*args, **kwargs)
		except integrate.IntegrationWarning as warning:
			raise QuadratureError(f"{routine.__name__}: {warning}")


def weierstrass(x, p: GaussianParams) -> float:
	point = _as_point(x, p.n)
	return (4.0 * math.pi * p.t) ** (-0.5 * p.n) * math.exp(-float(point @ point) / (4.0 * p.t))


def _outside_box_bound(distance: float, p: GaussianParams) -> float:
	"""Bound on int |W_a - W_b|^2 outside the box, both centers at least `distance` from its edge."""
	t = p.t
	if p.n == 1:
#		(W_a - W_b)^2 <= 2 W_a^2 + 2 W_b^2, W^2 = (4 pi t)^-1 e^{-u^2/2t}
		return 4.0 * (4.0 * math.pi * t) ** -1 * math.sqrt(2.0 * math.pi * t) * erfc(distance / math.sqrt(2.0 * t))
	return 4.0 * (4.0 * math.pi * t) ** -2 * 2.0 * math.pi * t * math.exp(-distance ** 2 / (2.0 * t))


def diffusion_distance_sq_quadrature(x, y, p: GaussianParams, quad_tol: float = config.QUAD_TOL) -> float:
	"""d_t(x, y)^2 = int |W_t(x - z) - W_t(y - z)|^2 dz for n in {1, 2}."""
	_check_quadrature_dimension(p)
	a, b = _as_point(x, p.n), _as_point(y, p.n)
	if np.array_equal(a, b):
		return 0.0
	separation = float(np.linalg.norm(a - b))
	center = 0.5 * (a + b)
	half_width = max(separation, 1.0) + BOX_SIGMAS * math.sqrt(2.0 * p.t)
	tail = _outside_box_bound(half_width - 0.5 * separation, p)
	budget = 0.25 * quad_tol

	if p.n == 1:
		lo, hi = center[0] - half_width, center[0] + half_width
		value, error = _run_quadrature(
			integrate.quad, _difference_sq_1d, lo, hi, args=(a[0], b[0], p.t),
			points=sorted({a[0], b[0]}), epsabs=budget, epsrel=1e-10, limit=400,
		)
	else:
		value, error = _run_quadrature(
			integrate.dblquad, _difference_sq_2d,
			center[0] - half_width, center[0] + half_width,
			center[1] - half_width, center[1] + half_width,
			args=(a[0], a[1], b[0], b[1], p.t), epsabs=budget, epsrel=1e-10,
		)
	logger.debug("d_t^2 quadrature n=%d: %r (err %.2e, outside box %.2e)", p.n, value, error, tail)
	if error + tail > quad_tol:
		raise NonConvergenceError(f"quadrature error {error:.3e} + tail {tail:.3e} exceeds quad_tol={quad_tol:.1e}")
	return value


def rho_sq_quadrature(r: float, p: GaussianParams, quad_tol: float = config.QUAD_TOL) -> float:
	if not r >= 0:
		raise ParameterRangeError(f"r must be >= 0, got {r!r}")
	_check_quadrature_dimension(p)
	if r == 0:
		return 0.0
	e1 = np.zeros(p.n)
	e1[0] = r
	return diffusion_distance_sq_quadrature(e1, np.zeros(p.n), p, quad_tol)


def rho_sq_closed(r: float, p: GaussianParams) -> float:
	if not r >= 0:
		raise ParameterRangeError(f"r must be >= 0, got {r!r}")
	return 2.0 * (8.0 * math.pi * p.t) ** (-0.5 * p.n) * -math.expm1(-r * r / (8.0 * p.t))


def rho_sq_derivative(r: float, p: GaussianParams) -> float:
	"""d rho_t^2 / dr = -2 d/dx_1 W_2t(r e_1)."""
	if not r >= 0:
		raise ParameterRangeError(f"r must be >= 0, got {r!r}")
	return 4.0 * (8.0 * math.pi * p.t) ** (-0.5 * p.n) * math.exp(-r * r / (8.0 * p.t)) * r / (8.0 * p.t)


def rho_closed(r: float, p: GaussianParams) -> float:
	return math.sqrt(rho_sq_closed(r, p))


def rho_supremum(p: GaussianParams) -> float:
	return math.sqrt(2.0 * (8.0 * math.pi * p.t) ** (-0.5 * p.n))


def rho_inverse(value: float, p: GaussianParams) -> float:
	"""The r with rho_t(r) = value by bisection; +inf at or above sup rho_t."""
	if not value >= 0:
		raise ParameterRangeError(f"rho_inverse needs value >= 0, got {value!r}")
	if value == 0:
		return 0.0
	if value >= rho_supremum(p):
		return math.inf
	hi = 1.0
	while rho_closed(hi, p) <= value:
		hi *= 2.0
		if hi > 1e300:
			raise NonConvergenceError(f"no bracket for rho_inverse({value!r})")
	return optimize.bisect(lambda r: rho_closed(r, p) - value, 0.0, hi, xtol=INVERSE_XTOL, rtol=4 * np.finfo(float).eps, maxiter=2000)


def self_convolution_quadrature(x: float, p: GaussianParams, quad_tol: float = config.QUAD_TOL) -> float:
	"""int W_t(x - z) W_t(z) dz (n = 1); equals W_2t(x)."""
	if p.n != 1:
		raise ParameterRangeError("self convolution is checked in n = 1 only")
	value, error = _run_quadrature(
		integrate.quad, _product_1d, -np.inf, np.inf, args=(float(x), p.t), epsabs=0.1 * quad_tol, epsrel=1e-10,
	)
	if error > quad_tol:
		raise NonConvergenceError(f"self convolution error {error:.3e} exceeds quad_tol={quad_tol:.1e}")
	return value


def normalization_quadrature(p: GaussianParams, quad_tol: float = config.QUAD_TOL) -> float:
	"""int W_t over R^n, n in {1, 2}."""
	_check_quadrature_dimension(p)
	if p.n == 1:
		value, error = _run_quadrature(integrate.quad, _density_1d, -np.inf, np.inf, args=(p.t,), epsabs=0.1 * quad_tol, epsrel=1e-10)
	else:
		value, error = _run_quadrature(
			integrate.dblquad, _density_2d, -np.inf, np.inf, -np.inf, np.inf, args=(p.t,), epsabs=0.1 * quad_tol, epsrel=1e-10,
		)
	if error > quad_tol:
		raise NonConvergenceError(f"normalization error {error:.3e} exceeds quad_tol={quad_tol:.1e}")
	return value


def ratio_limit_check(t1: float, t2: float, n: int, r_grid: Sequence[float]) -> RatioLimit:
	"""rho_t1^2/rho_t2^2 along a grid decreasing to 0, Richardson-extrapolated in h = r^2."""
	p1, p2 = GaussianParams(t1, n), GaussianParams(t2, n)
	r_grid = [float(r) for r in r_grid]
	if len(r_grid) < 3:
		raise ParameterRangeError("ratio limit needs at least three grid points")
	if not all(r > 0 for r in r_grid) or any(b >= a for a, b in zip(r_grid[:-1], r_grid[1:])):
		raise ParameterRangeError("r_grid must be positive and strictly decreasing")

	ratios = [rho_sq_closed(r, p1) / rho_sq_closed(r, p2) for r in r_grid]
	steps = np.abs(np.diff(ratios))
#	the ratio is analytic in h with a linear leading error, so steps shrink with h
	if np.any(steps[1:] > steps[:-1] * (1.0 + 1e-6) + 1e-15):
		raise NonConvergenceError(f"ratio sequence is not Cauchy on the grid: steps {steps.tolist()}")
	h1, h2 = r_grid[-2] ** 2, r_grid[-1] ** 2
	extrapolated = (h1 * ratios[-1] - h2 * ratios[-2]) / (h1 - h2)
	expected = (t2 / t1) ** (0.5 * n + 1.0)
	logger.info("ratio limit t1=%s t2=%s n=%d: extrapolated %r, expected %r", t1, t2, n, extrapolated, expected)
	return RatioLimit(r_grid, ratios, extrapolated, expected)


def _rotation(angle: float) -> np.ndarray:
	c, s = math.cos(angle), math.sin(angle)
	return np.array([[c, -s], [s, c]])


def translation_rotation_invariance_check(
	p: GaussianParams, trials: int, seed: int = config.VERIFY_SEED, tolerance: float = 1e-6, quad_tol: float = config.QUAD_TOL
) -> InvarianceReport:
	"""d_t(x + v, y + v) = d_t(x, y) and, in the plane, d_t(Rx, Ry) = d_t(x, y)."""
	_check_quadrature_dimension(p)
	rng = np.random.default_rng(seed)
	violations = []
	worst = 0.0
	for trial in range(trials):
		x, y, v = (rng.uniform(-2.0, 2.0, p.n) for _ in range(3))
		base = math.sqrt(diffusion_distance_sq_quadrature(x, y, p, quad_tol))
		moved = {"translation": (x + v, y + v)}
		if p.n == 2:
			R = _rotation(rng.uniform(0.0, 2.0 * math.pi))
			moved["rotation"] = (R @ x, R @ y)
		for kind, (mx, my) in moved.items():
			discrepancy = abs(math.sqrt(diffusion_distance_sq_quadrature(mx, my, p, quad_tol)) - base)
			worst = max(worst, discrepancy)
			if discrepancy > tolerance:
				violations.append({"trial": trial, "kind": kind, "discrepancy": discrepancy})
	return InvarianceReport(trials, worst, violations)


def ball_stability_check(
	x, r1: float, t1: float, t2: float, n: int, samples: int = 1000, seed: int = config.VERIFY_SEED
) -> StabilityReport:
	"""{y : d_t1(x, y) < r1} = {y : d_t2(x, y) < r2} with r2 = rho_t2(rho_t1^{-1}(r1)), on sampled y."""
	p1, p2 = GaussianParams(t1, n), GaussianParams(t2, n)
	center = _as_point(x, n)
	radius = rho_inverse(r1, p1)
	r2 = math.inf if math.isinf(radius) else rho_closed(radius, p2)
	spread = 2.0 * radius if math.isfinite(radius) and radius > 0 else 2.0
	rng = np.random.default_rng(seed)
	mismatches = skipped = 0
	for y in center + rng.uniform(-spread, spread, (samples, n)):
		distance = float(np.linalg.norm(y - center))
		if math.isfinite(radius) and abs(distance - radius) <= 1e-9 * max(1.0, radius):
			skipped += 1
			continue
		inside1 = rho_closed(distance, p1) < r1
		inside2 = rho_closed(distance, p2) < r2
		mismatches += inside1 != inside2
	return StabilityReport(r2, radius, samples, mismatches, skipped)
