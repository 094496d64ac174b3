"""
Objective: The dyadic fractional Laplacian D^s_dy, its Haar eigenstructure,
and the heat evolution u(x, t) = int K_s(x, y; t) f(y) dy by two routes.

Steps:
1. Around a fixed x the ancestors J_j of x (level j) cut R+ into shells
   S_j = J_j minus J_{j+1}, on which delta(x, .) = 2^-j is constant.
2. For a piecewise-constant f on dyadic pieces, every shell integral is a
   finite exact sum of piece overlaps; shells finer than the finest piece
   vanish and shells past the support add up to a geometric series.
3. Spectral evolution multiplies each Haar coefficient by e^{-t |I|^-s};
   kernel evolution integrates K_s(x, .; t), constant on each shell, against f.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import count
from typing import Dict, Optional, Tuple

import numpy as np

from utils.dyadic_core import (
	DyadicInterval,
	DyadicPoint,
	contains,
	haar_amplitude,
	haar_eval,
	interval_containing,
	parent,
	smallest_common_ancestor,
)
from utils.errors import CapExceededError, ParameterRangeError, ResidualError
from utils.spectral_metric import DiffusionParams, TruncationPolicy, kernel_profile

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
MAX_LEAVES = 1 << 20 # cap on leaves of one piecewise function
RESIDUAL_TOL = 1e-10
EIGEN_SAMPLES = 16


def _check_order(s: float):
	if not 0 < s < 1:
		raise ParameterRangeError(f"the dyadic fractional Laplacian needs 0 < s < 1, got {s!r}")


def _check_time(s: float, t: float):
	if not (s > 0 and math.isfinite(s)):
		raise ParameterRangeError(f"s must be positive, got {s!r}")
	if not (t >= 0 and math.isfinite(t)):
		raise ParameterRangeError(f"t must be >= 0, got {t!r}")


def _multiplier(level: int, s: float, t: float) -> float:
	"""e^{-t |I|^-s} for I at the given level."""
	if t == 0:
		return 1.0
	exponent = s * level * LN2
	return 0.0 if exponent > 709.0 else math.exp(-t * math.exp(exponent))


@dataclass(frozen=True)
class PiecewiseDyadicFunction:
	"""Finite sum of value * indicator(I) over pairwise disjoint dyadic pieces; 0 elsewhere."""

	pieces: Tuple[Tuple[DyadicInterval, float], ...] = ()

	def __post_init__(self):
		pieces = tuple((I, float(value)) for I, value in self.pieces)
		ordered = sorted(pieces, key=lambda piece: piece[0].left)
		for (I, _), (J, _) in zip(ordered[:-1], ordered[1:]):
			if I.right > J.left:
				raise ParameterRangeError(f"pieces {I} and {J} overlap")
		object.__setattr__(self, "pieces", tuple(ordered))

	@classmethod
	def indicator(cls, I: DyadicInterval, value: float = 1.0) -> "PiecewiseDyadicFunction":
		return cls(((I, value),))

	@classmethod
	def haar(cls, I: DyadicInterval, coefficient: float = 1.0) -> "PiecewiseDyadicFunction":
		amplitude = coefficient * haar_amplitude(I.level)
		left, right = I.children()
		return cls(((left, amplitude), (right, -amplitude)))

	@classmethod
	def from_sum(cls, pieces) -> "PiecewiseDyadicFunction":
		"""
		Sum of value * indicator(I) over pieces that may overlap.

		Pieces go in coarse to fine. A piece landing inside a coarser leaf
		splits only the path down to it: the siblings along the way keep the
		leaf's value, so the leaf count grows with the level gap, not 2^gap.
		"""
		leaves: Dict[DyadicInterval, float] = {}
		coarsest = None
		for I, value in sorted(pieces, key=lambda piece: piece[0].level):
			if coarsest is None:
				coarsest = I.level
			holder = I
			while holder not in leaves and holder.level > coarsest:
				holder = parent(holder)
			if holder not in leaves:
				leaves[I] = float(value)
				continue
			base = leaves.pop(holder)
			A = I
			while A != holder:
				leaves[A.sibling()] = base
				A = parent(A)
			leaves[I] = base + value
			if len(leaves) > MAX_LEAVES:
				raise CapExceededError(f"sum spans more than {MAX_LEAVES} leaves", terms=len(leaves))
		return cls(tuple(_coarsen(leaves).items()))

	def evaluate(self, x: DyadicPoint) -> float:
		for I, value in self.pieces:
			if contains(I, x):
				return value
		return 0.0

	def mean_over(self, S: DyadicInterval) -> float:
		"""(1/|S|) int_S f, from exact overlaps of nested-or-disjoint dyadic intervals."""
		terms = []
		for P, value in self.pieces:
			if P.contains_interval(S):
				terms.append(value)
			elif S.contains_interval(P):
				terms.append(value * math.ldexp(1.0, S.level - P.level))
		return math.fsum(terms)

	def integral_over(self, S: DyadicInterval) -> float:
		return self.mean_over(S) * S.length

	def finest_level(self) -> int:
		return max(I.level for I, _ in self.pieces)

	def hull(self) -> DyadicInterval:
		"""Smallest dyadic interval containing every piece."""
		hull = self.pieces[0][0]
		for I, _ in self.pieces[1:]:
			hull = smallest_common_ancestor(hull, I)
		return hull

	def __add__(self, other: "PiecewiseDyadicFunction") -> "PiecewiseDyadicFunction":
		if not self.pieces:
			return other
		if not other.pieces:
			return self
		return PiecewiseDyadicFunction.from_sum(self.pieces + other.pieces)

	def __mul__(self, scalar: float) -> "PiecewiseDyadicFunction":
		return PiecewiseDyadicFunction(tuple((I, scalar * value) for I, value in self.pieces))

	__rmul__ = __mul__


def _coarsen(leaves: Dict[DyadicInterval, float]) -> Dict[DyadicInterval, float]:
	"""Merge sibling leaves carrying equal values; drop zeros."""
	leaves = {I: value for I, value in leaves.items() if value != 0.0}
	merged = True
	while merged:
		merged = False
		for I in sorted(leaves, key=lambda J: -J.level):
			if I not in leaves or I.index % 2:
				continue
			sibling = I.sibling()
			if sibling in leaves and leaves[sibling] == leaves[I]:
				value = leaves.pop(I)
				leaves.pop(sibling)
				leaves[parent(I)] = value
				merged = True
	return leaves


@dataclass(frozen=True)
class MeanPart:
	"""mass * indicator(root)/|root|, the part of f outside the finite Haar span, evolved to (s, t)."""

	root: DyadicInterval
	mass: float
	s: Optional[float] = None
	t: float = 0.0


@dataclass(frozen=True)
class HaarExpansion:
	coefficients: Dict[DyadicInterval, float] = field(default_factory=dict)
	mean: Optional[MeanPart] = None

	@classmethod
	def from_piecewise(cls, f: PiecewiseDyadicFunction) -> "HaarExpansion":
		"""Haar pyramid of f on its hull, down to its finest level."""
		if not f.pieces:
			return cls()
		root = f.hull()
		level = f.finest_level()
		width = 1 << (level - root.level)
		if width > MAX_LEAVES:
			raise CapExceededError(f"function spans {width} leaves at level {level}", terms=width)
		values = np.zeros(width)
		for I, value in f.pieces:
			span = 1 << (level - I.level)
			start = I.index * span - root.index * width
			values[start:start + span] = value
		integrals = values * math.ldexp(1.0, -level)

		coefficients = {}
		for j in range(level - 1, root.level - 1, -1):
			left, right = integrals[0::2], integrals[1::2]
			details = (left - right) * haar_amplitude(j)
			first = root.index << (j - root.level)
			for n in np.flatnonzero(details):
				coefficients[DyadicInterval(j, first + int(n))] = float(details[n])
			integrals = left + right
		mass = float(integrals[0])
		return cls(coefficients, MeanPart(root, mass) if mass != 0.0 else None)

	def to_piecewise(self) -> PiecewiseDyadicFunction:
		"""Exact inverse for un-evolved mean parts."""
		if self.mean is not None and self.mean.t != 0:
			raise ParameterRangeError("an evolved mean part has no finite piecewise form")
		pieces = [(half, sign * c * haar_amplitude(I.level)) for I, c in self.coefficients.items() for half, sign in zip(I.children(), (1, -1))]
		if self.mean is not None:
			pieces.append((self.mean.root, self.mean.mass / self.mean.root.length))
		return PiecewiseDyadicFunction.from_sum(pieces)

	def evaluate(self, x: DyadicPoint, trunc: TruncationPolicy) -> float:
		terms = [c * haar_eval(I, x) for I, c in self.coefficients.items()]
		if self.mean is not None:
			terms.append(_mean_part_value(self.mean, x, trunc))
		return math.fsum(terms)


def _mean_part_value(mean: MeanPart, x: DyadicPoint, trunc: TruncationPolicy) -> float:
	"""mass * sum_{A strictly above root} e^{-t|A|^-s} h_A(root) h_A(x)."""
	if mean.t == 0:
		return mean.mass / mean.root.length if contains(mean.root, x) else 0.0
	anchor = mean.root.left_point()
	terms = []
	A = mean.root
	log_tol = math.log(trunc.tail_tol)
	for m in count(1):
		if m > trunc.max_terms:
			raise CapExceededError("mean part ancestor series not certified", terms=m)
		A = parent(A)
		terms.append(_multiplier(A.level, mean.s, mean.t) * haar_eval(A, anchor) * haar_eval(A, x))
#		the rest above A is bounded by |mass| / |A|
		if math.log(abs(mean.mass) or 1e-300) + A.level * LN2 <= log_tol:
			break
	return mean.mass * math.fsum(terms)


def apply_laplacian(f: PiecewiseDyadicFunction, x: DyadicPoint, s: float, trunc: TruncationPolicy) -> float:
	"""D^s f(x) = int (f(y) - f(x)) / delta(x, y)^{1+s} dy by exact shell decomposition."""
	_check_order(s)
	if not f.pieces:
		return 0.0
	fx = f.evaluate(x)
	finest = f.finest_level()
	coarsest = smallest_common_ancestor(interval_containing(x, finest), f.hull()).level
	if finest - coarsest > trunc.max_terms:
		raise CapExceededError(f"{finest - coarsest} shells exceed max_terms", terms=finest - coarsest)

	terms = []
	for j in range(coarsest, finest):
		shell = interval_containing(x, j + 1).sibling()
#		2^{j(1+s)} * |shell| * (mean of f on shell - f(x)), |shell| = 2^{-j-1}
		terms.append(0.5 * math.exp(s * j * LN2) * (f.mean_over(shell) - fx))
#	shells above `coarsest` hold no piece: -f(x)/2 * sum_{j<coarsest} 2^{js}
	if fx != 0.0:
		terms.append(-0.5 * fx * math.exp(s * coarsest * LN2) / math.expm1(s * LN2))
	return math.fsum(terms)


def haar_eigenvalue(I: DyadicInterval, s: float, trunc: TruncationPolicy, check_scaling: bool = True) -> float:
	"""lambda_I with D^s h_I = -lambda_I h_I, measured on EIGEN_SAMPLES interior points."""
	_check_order(s)
	h = PiecewiseDyadicFunction.haar(I)
	step = (I.right - I.left) / (2 * EIGEN_SAMPLES)
	points = [DyadicPoint.from_fraction(I.left + (2 * n + 1) * step) for n in range(EIGEN_SAMPLES)]
	values = np.array([h.evaluate(x) for x in points])
	images = np.array([apply_laplacian(h, x, s, trunc) for x in points])
	estimates = -images / values
	eigenvalue = float(np.mean(estimates))

	residual = float(np.max(np.abs(images + eigenvalue * values)))
	scale = max(1.0, abs(eigenvalue) * float(np.max(np.abs(values))))
	if residual > RESIDUAL_TOL * scale:
		raise ResidualError(f"D^s h_I = -lambda h_I fails on {I}: residual {residual:.3e}")

	reference = DyadicInterval(0, 0)
	if check_scaling and I != reference:
		expected = haar_eigenvalue(reference, s, trunc, check_scaling=False) * math.exp(s * I.level * LN2)
		if abs(eigenvalue - expected) > RESIDUAL_TOL * expected:
			raise ResidualError(f"lambda_I = lambda_[0,1) |I|^-s fails on {I}: {eigenvalue!r} vs {expected!r}")
	logger.debug("eigenvalue on %s at s=%s: %r (residual %.2e)", I, s, eigenvalue, residual)
	return eigenvalue


def laplacian_constant(s: float, trunc: TruncationPolicy) -> float:
	"""m_s = lambda_[0,1): the eigenvalue of the raw integral operator at unit scale."""
	return haar_eigenvalue(DyadicInterval(0, 0), s, trunc, check_scaling=False)


def evolve_spectral(f: HaarExpansion, s: float, t: float) -> HaarExpansion:
	"""Multiply every coefficient on I by e^{-t |I|^-s}; t = 0 is the identity."""
	_check_time(s, t)
	if t == 0:
		return f
	coefficients = {I: c * _multiplier(I.level, s, t) for I, c in f.coefficients.items()}
	mean = f.mean
	if mean is not None:
		if mean.t != 0 and mean.s != s:
			raise ParameterRangeError(f"mean part already evolved at order {mean.s}, cannot continue at {s}")
		mean = MeanPart(mean.root, mean.mass, s, mean.t + t)
	return HaarExpansion(coefficients, mean)


def evolve_pointwise(f: PiecewiseDyadicFunction, x: DyadicPoint, s: float, t: float, trunc: TruncationPolicy) -> float:
	"""u(x, t) = int K_s(x, y; t) f(y) dy, with K_s(x, .; t) constant on each shell of x."""
	_check_time(s, t)
	if t == 0:
		return f.evaluate(x)
	if not f.pieces:
		return 0.0
	params = DiffusionParams(s, t)
	finest = f.finest_level()
	coarsest = smallest_common_ancestor(interval_containing(x, finest), f.hull()).level

	terms = []
	shells = max(1, finest - coarsest)
	for j in range(coarsest, finest):
		shell = interval_containing(x, j + 1).sibling()
		mean = f.mean_over(shell)
		if mean != 0.0:
			delta = math.ldexp(1.0, -j)
			weight = 0.5 * delta * mean
#			each shell gets its share of tail_tol after scaling by |shell| * mean
			local = replace(trunc, tail_tol=trunc.tail_tol / max(1.0, 2.0 * shells * abs(weight)))
			terms.append(kernel_profile(delta, params, local) * weight)

#	innermost cell J: int_J K(x, y) dy = |J| sum_{A strictly above J} e^{-t|A|^-s}/|A|
	fx = f.evaluate(x)
	if fx != 0.0:
		log_tol = math.log(trunc.tail_tol)
		inner = []
		for m in count(1):
			if m > trunc.max_terms:
				raise CapExceededError("inner kernel integral not certified", terms=m)
			inner.append(_multiplier(finest - m, s, t) * math.ldexp(1.0, -m))
			if math.log(abs(fx)) - m * LN2 <= log_tol:
				break
		terms.append(fx * math.fsum(inner))
	return math.fsum(terms)
