import math

import pytest
from hypothesis import given, settings, strategies as st

from utils import extended_precision
from utils.dyadic_core import DyadicPoint, dyadic_distance, interval_containing
from utils.errors import CapExceededError, ParameterRangeError
from utils.spectral_metric import (
	Ball,
	DiffusionParams,
	TruncationPolicy,
	ball,
	ball_radius_transfer,
	c_t_s,
	distance_closed,
	distance_spectral,
	eta,
	kernel_K,
	kernel_profile,
	log_eta,
	log_psi,
	non_equivalence_witness,
	psi,
	psi_dyadic,
	psi_infinity,
	time_ratio_bound,
)

S_GRID = (0.25, 0.5, 1.0, 2.0)
T_GRID = (0.1, 1.0, 10.0)

points = st.builds(DyadicPoint, st.integers(min_value=0, max_value=1 << 30), st.integers(min_value=0, max_value=24))
orders = st.sampled_from(S_GRID)
times = st.sampled_from(T_GRID)


def point(value):
	return DyadicPoint.from_fraction(value) if not isinstance(value, float) else DyadicPoint.from_float(value)


def test_params_validation():
	with pytest.raises(ParameterRangeError):
		DiffusionParams(0.0, 1.0)
	with pytest.raises(ParameterRangeError):
		DiffusionParams(1.0, -1.0)
	with pytest.raises(ParameterRangeError):
		TruncationPolicy(tail_tol=0.0)


def test_truncation_from_env(monkeypatch):
	monkeypatch.setenv("DYADIC_TAIL_TOL", "1e-10")
	monkeypatch.setenv("DYADIC_MAX_DEPTH", "50")
	policy = TruncationPolicy.from_env()
	assert policy.tail_tol == 1e-10 and policy.max_depth == 50
	assert TruncationPolicy.from_env(max_depth=7).max_depth == 7
	monkeypatch.setenv("DYADIC_MAX_DEPTH", "many")
	with pytest.raises(ParameterRangeError):
		TruncationPolicy.from_env()


def test_eta_matches_partial_sum(trunc):
	params = DiffusionParams(0.5, 1.0)
	for sigma in (0.01, 0.3, 2.0):
		oracle = extended_precision.eta_partial_sum_extended(params, sigma, 400)
		assert eta(params, sigma, trunc) == pytest.approx(float(oracle), rel=1e-13, abs=2e-12)


def test_eta_cap_is_reported():
	params = DiffusionParams(0.25, 0.1)
	with pytest.raises(CapExceededError) as raised:
		eta(params, 1e-6, TruncationPolicy(max_terms=3))
	assert raised.value.terms == 3


def test_eta_decays_in_sigma(trunc):
	params = DiffusionParams(1.0, 1.0)
	assert eta(params, 1e6, trunc) < 1e-30
	values = [eta(params, sigma, trunc) for sigma in (0.5, 1.0, 2.0, 4.0, 8.0)]
	assert all(a > b for a, b in zip(values[:-1], values[1:]))
#	both underflow in double
	assert log_eta(params, 2.0 ** 10, trunc) < log_eta(params, 2.0 ** 9, trunc)
	assert log_eta(params, 2.0, trunc) == pytest.approx(math.log(eta(params, 2.0, trunc)), rel=1e-9)


def test_psi_examples(trunc):
	params = DiffusionParams(1.0, 1.0)
	assert psi(params, 0.0, trunc) == 0.0
#	psi_1(1)^2 = 2 (2 e^-2 + sum_l 2^l e^{-2^{l+1}})
	expected = 2.0 * (2.0 * math.exp(-2.0) + sum(2.0 ** l * math.exp(-(2.0 ** (l + 1))) for l in range(1, 12)))
	assert psi(params, 1.0, trunc) ** 2 == pytest.approx(expected, rel=1e-13)
	assert psi_dyadic(params, 0, trunc) == psi(params, 1.0, trunc)
	assert psi_dyadic(params, -3, trunc) == psi(params, 0.125, trunc)


def test_psi_matches_extended_precision(trunc):
	for s in S_GRID:
		for t in T_GRID:
			params = DiffusionParams(s, t)
			for i in (-6, 0, 5):
				oracle = math.sqrt(float(extended_precision.psi_sq_dyadic_extended(params, i)))
				assert psi_dyadic(params, i, trunc) == pytest.approx(oracle, rel=1e-13)


def test_psi_vanishes_at_zero(trunc):
	assert psi_dyadic(DiffusionParams(1.0, 1.0), -60, trunc) < 1e-8
#	log form stays finite where the value underflows
	assert math.isfinite(log_psi(DiffusionParams(2.0, 10.0), 2.0 ** -40, trunc))


@pytest.mark.parametrize("s", S_GRID)
@pytest.mark.parametrize("t", T_GRID)
def test_psi_strictly_increasing_on_powers_of_two(s, t):
	assert extended_precision.strict_increase_violations(DiffusionParams(s, t), -40, 40) == []


@pytest.mark.parametrize("s", S_GRID)
@pytest.mark.parametrize("t", T_GRID)
def test_psi_infinity_sandwich(s, t, trunc):
	params = DiffusionParams(s, t)
	c = c_t_s(params, trunc)
	top = psi_infinity(params, trunc)
	assert math.sqrt(2.0) * c < top < 2.0 * c
	oracle = math.sqrt(2.0 * float(extended_precision.bilateral_sum_extended(params, -200, 60)))
	assert top == pytest.approx(oracle, rel=1e-12)


def test_c_t_s_gamma_form(trunc):
	params = DiffusionParams(0.5, 4.0)
#	Gamma(3) 2^-2 = 1/2, t^{-1/(2s)} = 1/4
	assert c_t_s(params, trunc) == pytest.approx(0.25 * math.sqrt(0.5), rel=1e-9)


def test_distance_examples(trunc):
	params = DiffusionParams(1.0, 1.0)
	x, y = point(0.25), point(0.75)
	assert distance_closed(x, y, params, trunc) == psi(params, 1.0, trunc)
	assert distance_spectral(x, y, params, trunc) == pytest.approx(psi(params, 1.0, trunc), abs=1e-12)
	assert distance_closed(x, x, params, trunc) == 0.0
	assert distance_spectral(x, x, params, trunc) == 0.0
	later = DiffusionParams(1.0, 10.0)
	assert distance_closed(x, y, later, trunc) < distance_closed(x, y, params, trunc)


@given(points, points, orders, times)
@settings(max_examples=150, deadline=None)
def test_closed_matches_spectral(x, y, s, t):
	trunc = TruncationPolicy()
	params = DiffusionParams(s, t)
	closed = distance_closed(x, y, params, trunc)
	assert abs(distance_spectral(x, y, params, trunc) - closed) <= 2 * trunc.tail_tol


@given(points, points, points, orders, times)
@settings(max_examples=150, deadline=None)
def test_ultrametric_inequality(x, y, z, s, t):
	trunc = TruncationPolicy()
	params = DiffusionParams(s, t)
	dxy, dyz, dxz = (distance_closed(a, b, params, trunc) for a, b in ((x, y), (y, z), (x, z)))
	assert dxz <= max(dxy, dyz)
	assert dxy == distance_closed(y, x, params, trunc)
	if x == y:
		assert dxy == 0.0


def test_spectral_depth_cap():
	params = DiffusionParams(0.25, 0.1)
	with pytest.raises(CapExceededError):
		distance_spectral(point(0.25), point(0.75), params, TruncationPolicy(max_depth=3))


def test_spectral_far_pair(trunc):
#	I(x, y) at level -201, the chains certify near level 20
	params = DiffusionParams(0.25, 0.1)
	x, y = DyadicPoint(0), DyadicPoint(1 << 200)
	closed = distance_closed(x, y, params, trunc)
	assert math.isfinite(closed) and closed > 0
	assert distance_spectral(x, y, params, trunc) == pytest.approx(closed, rel=1e-10)


def test_spectral_pair_below_max_depth():
	params = DiffusionParams(1.0, 1.0)
	trunc = TruncationPolicy(max_depth=3)
	x, y = DyadicPoint(0), DyadicPoint(1, 9)
	closed = distance_closed(x, y, params, trunc)
	assert closed > 0
	assert distance_spectral(x, y, params, trunc) == pytest.approx(closed, rel=1e-10)


@given(points, points, orders, times)
@settings(max_examples=200, deadline=None)
def test_kernel_bound(x, y, s, t):
	if x == y:
		return
	value = kernel_K(x, y, DiffusionParams(s, t), TruncationPolicy())
	assert abs(value) <= 2.0 / dyadic_distance(x, y)


@pytest.mark.parametrize("s, t", [(1.0, 1.0), (2.0, 10.0), (0.25, 0.1)])
def test_kernel_diagonal(s, t, trunc):
#	K(x, x; t) = sum_j 2^j e^{-t 2^{js}}, the bilateral sum at time t/2
	oracle = float(extended_precision.bilateral_sum_extended(DiffusionParams(s, t / 2.0), -200, 200))
	x = point(0.3)
	assert kernel_K(x, x, DiffusionParams(s, t), trunc) == pytest.approx(oracle, rel=1e-12, abs=2e-12)


@given(points, points, orders, times)
@settings(max_examples=100, deadline=None)
def test_kernel_peaks_on_diagonal(x, y, s, t):
	trunc = TruncationPolicy()
	params = DiffusionParams(s, t)
	assert kernel_K(x, x, params, trunc) >= kernel_K(x, y, params, trunc) - 2 * trunc.tail_tol


def test_kernel_is_haar_sum(trunc):
#	x, y on opposite halves of [0, 1): -e^{-t}/1 + sum over ancestors of [0, 1)
	params = DiffusionParams(1.0, 1.0)
	expected = -math.exp(-1.0) + sum(math.exp(-(2.0 ** -m)) * 2.0 ** -m for m in range(1, 80))
	assert kernel_K(point(0.25), point(0.75), params, trunc) == pytest.approx(expected, abs=1e-12)
	assert kernel_profile(1.0, params, trunc) == pytest.approx(expected, abs=1e-12)


@given(points, points, orders, st.sampled_from([(0.1, 1.0), (0.1, 10.0), (1.0, 10.0)]))
@settings(max_examples=200, deadline=None)
def test_time_ratio_bound(x, y, s, times_pair):
	if x == y:
		return
	t1, t2 = times_pair
	assert time_ratio_bound(x, y, s, t1, t2, TruncationPolicy()).holds


def test_non_equivalence_witness(trunc):
	witness = non_equivalence_witness(1e6, 1.0, 1.0, 2.0, trunc)
	assert witness.log_d_t1 - witness.log_d_t2 > math.log(1e6)
	assert witness.x != witness.y


def test_ball_whole_space(trunc):
	params = DiffusionParams(1.0, 1.0)
	assert ball(point(0.3), 1e6, params, trunc) == Ball()
	assert Ball().contains(point(123.0))


def test_ball_is_dyadic_interval(trunc):
	params = DiffusionParams(1.0, 1.0)
	x = point(0.3)
	r = psi(params, 1.0, trunc) * 1.01
	found = ball(x, r, params, trunc)
#	psi(1) < r <= psi(2)
	assert found.interval == interval_containing(x, 0)
	assert found.contains(x)


def test_ball_boundary_is_strict(trunc):
	params = DiffusionParams(1.0, 1.0)
	x = point(0.3)
	found = ball(x, psi(params, 1.0, trunc), params, trunc)
	assert found.interval == interval_containing(x, 1)


def test_ball_rejects_nonpositive_radius(trunc):
	with pytest.raises(ParameterRangeError):
		ball(point(0.3), 0.0, DiffusionParams(1.0, 1.0), trunc)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("t", T_GRID)
def test_ball_matches_brute_force(s, t, trunc):
	params = DiffusionParams(s, t)
	x = DyadicPoint(4097, 13)
	r = 0.5 * (psi_dyadic(params, -3, trunc) + psi_dyadic(params, -2, trunc))
	found = ball(x, r, params, trunc)
	assert found.interval.level == 3
	for k in range(0, 4 * 2 ** 8):
		y = DyadicPoint(k, 8)
		assert found.contains(y) == (distance_closed(x, y, params, trunc) < r)


@pytest.mark.parametrize("t1, t2", [(1.0, 2.0), (1.0, 1.0), (0.1, 10.0), (10.0, 0.1)])
def test_ball_radius_transfer(t1, t2, trunc):
	x = point(0.3)
	params = DiffusionParams(1.0, t1)
	r1 = 0.5 * (psi_dyadic(params, 0, trunc) + psi_dyadic(params, 1, trunc))
	r2 = ball_radius_transfer(x, r1, t1, t2, 1.0, trunc)
	assert ball(x, r2, params.at_time(t2), trunc) == ball(x, r1, params, trunc)


def test_ball_radius_transfer_rejects_whole_space(trunc):
	with pytest.raises(ParameterRangeError):
		ball_radius_transfer(point(0.3), 1e6, 1.0, 2.0, 1.0, trunc)
