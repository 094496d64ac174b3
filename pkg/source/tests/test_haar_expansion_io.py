import pytest

from utils.dyadic_core import DyadicInterval
from utils.errors import InputParseError
from utils.haar_expansion_io import format_expansion, parse_expansion, read_expansion, write_expansion
from utils.laplacian_numeric import HaarExpansion, MeanPart, evolve_spectral

SAMPLE = """# initial datum
0 0 1.0
2 1 -0.5   # finer wavelet

-3 2 2.5e-1
mean -1 0 4
"""


def test_parse_sample():
	expansion = parse_expansion(SAMPLE)
	assert expansion.coefficients == {
		DyadicInterval(0, 0): 1.0,
		DyadicInterval(2, 1): -0.5,
		DyadicInterval(-3, 2): 0.25,
	}
	assert expansion.mean == MeanPart(DyadicInterval(-1, 0), 4.0)


def test_zero_records_are_dropped():
	expansion = parse_expansion("0 0 0.0\nmean 0 0 0\n1 1 3\n")
	assert expansion.coefficients == {DyadicInterval(1, 1): 3.0}
	assert expansion.mean is None


@pytest.mark.parametrize("content, line_number", [
	("0 0 1\n0 0 2\n", 2),
	("0 0\n", 1),
	("# c\n\n0 x 1\n", 3),
	("1.5 0 1\n", 1),
	("0 0 nan\n", 1),
	("0 -1 1\n", 1),
	("mean 0 0 1\nmean 1 0 1\n", 2),
	("0 0 1 extra\n", 1),
])
def test_parse_errors_carry_line_number(content, line_number):
	with pytest.raises(InputParseError) as raised:
		parse_expansion(content)
	assert raised.value.line_number == line_number
	assert str(raised.value).startswith(f"line {line_number}:")


def test_missing_file(tmp_path):
	with pytest.raises(InputParseError):
		read_expansion(tmp_path / "absent.txt")


def test_write_then_read(tmp_path):
	expansion = HaarExpansion(
		{DyadicInterval(3, 5): 0.1, DyadicInterval(-2, 0): -1.0 / 3.0},
		MeanPart(DyadicInterval(0, 2), 0.7),
	)
	path = tmp_path / "f.txt"
	write_expansion(expansion, path, header="written by a test")
	text = path.read_text()
	assert text.startswith("# written by a test\n")
	assert read_expansion(path) == expansion


def test_evolved_mean_is_a_comment():
	expansion = evolve_spectral(HaarExpansion({}, MeanPart(DyadicInterval(0, 0), 1.0)), 0.5, 2.0)
	text = format_expansion(expansion)
	assert "# evolved mean 0 0" in text
	assert "s=0.5 t=2.0" in text
	assert parse_expansion(text) == HaarExpansion()
