"""
Objective: Read and write HaarExpansion text files.

Steps:
1. One record per line: "j k coefficient" for the wavelet on I^j_k.
2. An optional "mean j k mass" line holds the nonzero-mean part, mass spread
   uniformly over I^j_k.
3. "#" starts a comment; blank lines are skipped; errors carry the 1-based
   line number.
"""

import logging
import math
from pathlib import Path
from typing import Union

from utils.dyadic_core import DyadicInterval
from utils.errors import DyadicToolboxError, InputParseError
from utils.laplacian_numeric import HaarExpansion, MeanPart

logger = logging.getLogger(__name__)

#global params
RECORD_TYPES = (int, int, float) # level, index, coefficient
MEAN_KEYWORD = "mean"
FLOAT_FORMAT = "%.16e"


def _parse_record(fields, line_number):
	if len(fields) != len(RECORD_TYPES):
		raise InputParseError(f"expected {len(RECORD_TYPES)} fields 'j k value', got {len(fields)}", line_number)
	values = []
	for cast, raw in zip(RECORD_TYPES, fields):
		try:
			values.append(cast(raw))
		except ValueError:
			raise InputParseError(f"{raw!r} is not a valid {cast.__name__}", line_number)
	level, index, value = values
	if not math.isfinite(value):
		raise InputParseError(f"non-finite value {fields[2]!r}", line_number)
	try:
		interval = DyadicInterval(level, index)
	except DyadicToolboxError as error:
		raise InputParseError(str(error), line_number)
	return interval, value


def parse_expansion(content: str) -> HaarExpansion:
	coefficients = {}
	mean = None
	for line_number, line in enumerate(content.splitlines(), start=1):
		line = line.split("#", 1)[0].strip()
		if not line:
			continue
		fields = line.split()
		if fields[0] == MEAN_KEYWORD:
			if mean is not None:
				raise InputParseError("second 'mean' record", line_number)
			root, mass = _parse_record(fields[1:], line_number)
			mean = MeanPart(root, mass) if mass != 0.0 else None
			continue
		interval, coefficient = _parse_record(fields, line_number)
		if interval in coefficients:
			raise InputParseError(f"duplicate coefficient for level {interval.level} index {interval.index}", line_number)
		if coefficient != 0.0:
			coefficients[interval] = coefficient
	logger.info("parsed %d coefficients%s", len(coefficients), " and a mean part" if mean else "")
	return HaarExpansion(coefficients, mean)


def read_expansion(path: Union[str, Path]) -> HaarExpansion:
	try:
		content = Path(path).read_text()
	except OSError as error:
		raise InputParseError(f"cannot read {path}: {error.strerror}")
	return parse_expansion(content)


def format_expansion(expansion: HaarExpansion, header: str = None) -> str:
	"""Inverse of parse_expansion. An evolved mean part has no record form and is kept as a comment."""
	lines = []
	if header:
		lines.extend(f"# {row}" for row in header.splitlines())
	lines.append("# j k coefficient")
	for I in sorted(expansion.coefficients, key=lambda J: (J.level, J.index)):
		lines.append(f"{I.level} {I.index} {FLOAT_FORMAT % expansion.coefficients[I]}")
	if expansion.mean is not None:
		root = expansion.mean.root
		if expansion.mean.t != 0:
			lines.append(
				f"# evolved {MEAN_KEYWORD} {root.level} {root.index} {FLOAT_FORMAT % expansion.mean.mass}"
				f" s={expansion.mean.s!r} t={expansion.mean.t!r}"
			)
		else:
			lines.append(f"{MEAN_KEYWORD} {root.level} {root.index} {FLOAT_FORMAT % expansion.mean.mass}")
	return "\n".join(lines) + "\n"


def write_expansion(expansion: HaarExpansion, path: Union[str, Path], header: str = None):
	Path(path).write_text(format_expansion(expansion, header))
