"""
Objective: Exact dyadic points and intervals on R+ = [0, inf), the dyadic
distance delta(x, y) and Haar wavelet evaluation.

Steps:
1. A point is x = mantissa * 2^-exponent with integers only, so interval
   membership and I(x, y) are decided bit-exactly.
2. I(x, y) comes from the longest common binary prefix of the two
   coordinates (xor bit length on a common exponent).
3. delta(x, y) = |I(x, y)| and h_I are evaluated from integer levels.

Everything here is an immutable value and a pure function.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from utils import config
from utils.errors import InputParseError, LevelRangeError, ParameterRangeError

logger = logging.getLogger(__name__)


def _pow2(exponent: int) -> float:
	"""2**exponent as a float, raising LevelRangeError instead of overflowing."""
	try:
		return math.ldexp(1.0, exponent)
	except OverflowError:
		raise LevelRangeError(f"2^{exponent} is not representable as a double")


def _check_level(level: int):
	if abs(level) > config.MAX_LEVEL:
		raise LevelRangeError(f"dyadic level {level} outside the configured range |j| <= {config.MAX_LEVEL}")


@dataclass(frozen=True)
class DyadicPoint:
	"""x = mantissa * 2^-exponent, stored in canonical form (mantissa odd or exponent 0)."""

	mantissa: int
	exponent: int = 0

	def __post_init__(self):
		if not isinstance(self.mantissa, int) or not isinstance(self.exponent, int):
			raise ParameterRangeError("mantissa and exponent must be integers")
		if self.mantissa < 0:
			raise ParameterRangeError(f"dyadic points live on R+, got mantissa {self.mantissa}")
		if self.exponent < 0:
			raise ParameterRangeError(f"exponent must be nonnegative, got {self.exponent}")
		mantissa, exponent = self.mantissa, self.exponent
		if mantissa == 0:
			exponent = 0
		elif exponent > 0:
#			strip trailing zero bits, at most down to exponent 0
			shift = min((mantissa & -mantissa).bit_length() - 1, exponent)
			mantissa >>= shift
			exponent -= shift
		object.__setattr__(self, "mantissa", mantissa)
		object.__setattr__(self, "exponent", exponent)

	@classmethod
	def from_fraction(cls, value: Fraction) -> "DyadicPoint":
		"""Exact conversion; the denominator must be a power of two."""
		value = Fraction(value)
		if value < 0:
			raise ParameterRangeError(f"dyadic points live on R+, got {value}")
		denominator = value.denominator
		if denominator & (denominator - 1):
			raise ParameterRangeError(f"{value} is not a dyadic rational")
		return cls(value.numerator, denominator.bit_length() - 1)

	@classmethod
	def from_float(cls, value: float) -> "DyadicPoint":
		"""Lossless: every finite binary float is a dyadic rational."""
		if not math.isfinite(value):
			raise ParameterRangeError(f"cannot place {value} on R+")
		return cls.from_fraction(Fraction(value))

	@classmethod
	def round_fraction(cls, value: Fraction, digits: int) -> "DyadicPoint":
		"""Nearest dyadic point with at most `digits` significant bits (ties to even)."""
		value = Fraction(value)
		if value < 0:
			raise ParameterRangeError(f"dyadic points live on R+, got {value}")
		if digits < 1:
			raise ParameterRangeError(f"binary digits must be >= 1, got {digits}")
		if value == 0:
			return cls(0, 0)
		numerator, denominator = value.numerator, value.denominator
#		floor(log2(value))
		floor_log2 = numerator.bit_length() - denominator.bit_length()
		if Fraction(2) ** floor_log2 > value:
			floor_log2 -= 1
		shift = digits - 1 - floor_log2
		mantissa = round(value * Fraction(2) ** shift)
		if shift >= 0:
			return cls(mantissa, shift)
		return cls(mantissa << -shift, 0)

	@classmethod
	def parse(cls, text: str, digits: int = None):
		"""Parse a decimal string; returns (point, rounding) with rounding = point - exact input."""
		digits = config.BINARY_DIGITS if digits is None else digits
		try:
			exact = Fraction(text.strip())
		except (ValueError, ZeroDivisionError):
			raise InputParseError(f"cannot parse {text!r} as a real number")
		point = cls.round_fraction(exact, digits)
		rounding = point.to_fraction() - exact
		if rounding:
			logger.info("input %s rounded to %d binary digits (error %.3e)", text, digits, float(rounding))
		return point, rounding

	def to_fraction(self) -> Fraction:
		return Fraction(self.mantissa, 1 << self.exponent)

	def __float__(self):
		return self.mantissa / (1 << self.exponent)

	def index_at_level(self, level: int) -> int:
		"""floor(x * 2^level): the index k of the level-j interval containing x."""
		shift = level - self.exponent
		if shift >= 0:
			return self.mantissa << shift
		return self.mantissa >> -shift

	def __str__(self):
		return repr(float(self))


@dataclass(frozen=True)
class DyadicInterval:
	"""I^j_k = [k 2^-j, (k+1) 2^-j)."""

	level: int
	index: int

	def __post_init__(self):
		if not isinstance(self.level, int) or not isinstance(self.index, int):
			raise ParameterRangeError("level and index must be integers")
		if self.index < 0:
			raise ParameterRangeError(f"dyadic index must be nonnegative, got {self.index}")
		_check_level(self.level)

	@property
	def length(self) -> float:
		return _pow2(-self.level)

	@property
	def log2_length(self) -> int:
		return -self.level

	@property
	def left(self) -> Fraction:
		return Fraction(self.index) / Fraction(2) ** self.level

	@property
	def right(self) -> Fraction:
		return Fraction(self.index + 1) / Fraction(2) ** self.level

	def left_point(self) -> DyadicPoint:
		return DyadicPoint.from_fraction(self.left)

	def children(self):
		return DyadicInterval(self.level + 1, 2 * self.index), DyadicInterval(self.level + 1, 2 * self.index + 1)

	def sibling(self) -> "DyadicInterval":
		return DyadicInterval(self.level, self.index ^ 1)

	def contains_interval(self, other: "DyadicInterval") -> bool:
		if other.level < self.level:
			return False
		return other.index >> (other.level - self.level) == self.index

	def is_disjoint(self, other: "DyadicInterval") -> bool:
		return not (self.contains_interval(other) or other.contains_interval(self))

	def __str__(self):
		return f"[{float(self.left)!r}, {float(self.right)!r})"


@dataclass(frozen=True)
class HaarWavelet:
	"""h_I: +|I|^-1/2 on the left half of I, -|I|^-1/2 on the right half."""

	support: DyadicInterval

	def __call__(self, x: DyadicPoint) -> float:
		return haar_eval(self.support, x)

	def pieces(self):
		"""[(half interval, sign)] of the step function."""
		left, right = self.support.children()
		return [(left, 1), (right, -1)]

	def integral(self) -> Fraction:
#		amplitude 2^(j/2) factors out of the exact signed sum of half lengths
		return sum((sign * (half.right - half.left) for half, sign in self.pieces()), Fraction(0))

	def norm_sq(self) -> Fraction:
		amplitude_sq = Fraction(2) ** self.support.level
		return sum((amplitude_sq * (half.right - half.left) for half, _ in self.pieces()), Fraction(0))


def interval_containing(x: DyadicPoint, level: int) -> DyadicInterval:
	return DyadicInterval(level, x.index_at_level(level))


def contains(I: DyadicInterval, x: DyadicPoint) -> bool:
	return x.index_at_level(I.level) == I.index


def parent(I: DyadicInterval) -> DyadicInterval:
	return DyadicInterval(I.level - 1, I.index >> 1)


def ancestor_chain(I: DyadicInterval, count: int):
	if count < 1:
		raise ParameterRangeError(f"ancestor chain length must be >= 1, got {count}")
	chain = [I]
	for _ in range(count - 1):
		chain.append(parent(chain[-1]))
	return chain


def smallest_common_interval(x: DyadicPoint, y: DyadicPoint):
	"""I(x, y) for x != y; None stands for the point I(x, x) = {x}."""
	if x == y:
		return None
	exponent = max(x.exponent, y.exponent)
	X = x.mantissa << (exponent - x.exponent)
	Y = y.mantissa << (exponent - y.exponent)
#	X >> b == Y >> b exactly for b >= bit length of X ^ Y
	shift = (X ^ Y).bit_length()
	return DyadicInterval(exponent - shift, X >> shift)


def dyadic_distance_log2(x: DyadicPoint, y: DyadicPoint):
	"""log2 delta(x, y) as an integer, None when x == y."""
	I = smallest_common_interval(x, y)
	return None if I is None else I.log2_length


def dyadic_distance(x: DyadicPoint, y: DyadicPoint) -> float:
	I = smallest_common_interval(x, y)
	return 0.0 if I is None else I.length


def haar_amplitude(level: int) -> float:
	"""|I|^-1/2 = 2^(j/2) for I at level j."""
	half, odd = divmod(level, 2)
	return _pow2(half) * (math.sqrt(2.0) if odd else 1.0)


def haar_eval(I: DyadicInterval, x: DyadicPoint) -> float:
	if not contains(I, x):
		return 0.0
	child = x.index_at_level(I.level + 1)
	sign = 1.0 if child == 2 * I.index else -1.0
	return sign * haar_amplitude(I.level)


def smallest_common_ancestor(I: DyadicInterval, J: DyadicInterval) -> DyadicInterval:
	"""Smallest dyadic interval containing both I and J."""
	level = min(I.level, J.level)
	a = I.index >> (I.level - level)
	b = J.index >> (J.level - level)
	shift = (a ^ b).bit_length()
	return DyadicInterval(level - shift, a >> shift)
