"""
Objective: The two output forms of the CLI.

Steps:
1. Tables: CSV from pandas, leading "# key=value" summary lines, floats as
   %.16e (17 significant digits).
2. Documents: YAML whose floats are written as %.16e so safe_load returns
   the identical double.
"""

import io
import math
from dataclasses import asdict, is_dataclass
from fractions import Fraction

import numpy as np
import pandas as pd
import yaml

from utils.errors import InputParseError

#global params
FLOAT_FORMAT = "%.16e"
SUMMARY_PREFIX = "# "


class _DocumentDumper(yaml.SafeDumper):
	pass


def _represent_float(dumper, value):
	if math.isnan(value):
		text = ".nan"
	elif math.isinf(value):
		text = ".inf" if value > 0 else "-.inf"
	else:
		text = FLOAT_FORMAT % value
	return dumper.represent_scalar("tag:yaml.org,2002:float", text)


_DocumentDumper.add_representer(float, _represent_float)


def to_plain(value):
	"""Nested builtins only: numpy scalars, dataclasses and Fractions are unwrapped."""
	if is_dataclass(value) and not isinstance(value, type):
		return to_plain(asdict(value))
	if isinstance(value, dict):
		return {str(key): to_plain(item) for key, item in value.items()}
	if isinstance(value, (list, tuple)):
		return [to_plain(item) for item in value]
	if isinstance(value, np.generic):
		return value.item()
	if isinstance(value, np.ndarray):
		return value.tolist()
	if isinstance(value, Fraction):
		return str(value)
	return value


def format_document(document: dict) -> str:
	return yaml.dump(to_plain(document), Dumper=_DocumentDumper, sort_keys=False, default_flow_style=False)


def parse_document(text: str) -> dict:
	try:
		return yaml.safe_load(text)
	except yaml.YAMLError as error:
		raise InputParseError(f"not a valid document: {error}")


def _summary_value(value) -> str:
	if isinstance(value, float):
		return FLOAT_FORMAT % value
	return str(value)


def format_table(rows, summary: dict = None) -> str:
#	nested records flatten to dotted columns (interval.level, ...)
	frame = rows if isinstance(rows, pd.DataFrame) else pd.json_normalize([to_plain(row) for row in rows])
	lines = [f"{SUMMARY_PREFIX}{key}={_summary_value(to_plain(value))}" for key, value in (summary or {}).items()]
	body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
	return "".join(line + "\n" for line in lines) + body


def parse_table(text: str):
	"""(summary dict of strings, DataFrame) from format_table output."""
	summary = {}
	body = []
	for line in text.splitlines():
		if line.startswith(SUMMARY_PREFIX) and "=" in line:
			key, value = line[len(SUMMARY_PREFIX):].split("=", 1)
			summary[key] = value
		else:
			body.append(line)
	frame = pd.read_csv(io.StringIO("\n".join(body)), float_precision="round_trip")
	return summary, frame
