import math

import mpmath
import pytest

from utils.errors import CapExceededError
from utils.extended_precision import (
	bilateral_sum_extended,
	eta_partial_sum_extended,
	psi_sq_dyadic_extended,
	strict_increase_violations,
)
from utils.spectral_metric import DiffusionParams


def test_partial_sum_at_s_one():
	params = DiffusionParams(1.0, 1.0)
	value = eta_partial_sum_extended(params, 0.5, 3)
	expected = 2 * math.exp(-1.0) + 2 * math.exp(-2.0) + 4 * math.exp(-4.0)
	assert float(value) == pytest.approx(expected, rel=1e-15)


def test_psi_sq_at_unit_scale():
	params = DiffusionParams(1.0, 1.0)
	value = psi_sq_dyadic_extended(params, 0)
	expected = 2 * (2 * mpmath.exp(-2) + mpmath.nsum(lambda l: 2 ** l * mpmath.exp(-(2 ** (l + 1))), [1, mpmath.inf]))
	assert float(value) == pytest.approx(float(expected), rel=1e-15)


def test_psi_sq_cap():
	with pytest.raises(CapExceededError):
		psi_sq_dyadic_extended(DiffusionParams(0.25, 0.1), -20, max_terms=5)


def test_bilateral_sum_is_finite():
	params = DiffusionParams(0.5, 1.0)
	total = float(bilateral_sum_extended(params, -200, 60))
	assert 0 < total < 2.0


def test_saturated_profile_still_strictly_increasing():
#	from 2^20 on psi_inf^2 - psi_t^2 is of order t 2^{-3i}, below double precision
	params = DiffusionParams(2.0, 10.0)
	assert psi_sq_dyadic_extended(params, 21) > psi_sq_dyadic_extended(params, 20)
	assert strict_increase_violations(params, 15, 25) == []
