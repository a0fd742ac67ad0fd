import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sfde.analysis import (EntropySequence, brownian_smallball_exact, chung_lil_stat,
                           cover_count_time, entropy_sequence, estimate_holder,
                           fit_smallball_exponent, small_ball_mc, smallball_eps_grid,
                           talagrand_lower_bound, uniform_modulus_stat)
from sfde.covariance import v_time_metric_constant
from sfde.errors import (ConfigError, DegenerateResultError, InsufficientDataError,
                         OverflowGuardError)
from sfde.params import derive_exponents
from sfde.sampling import FieldSample, GridSpec, sample_fbm_slice, sample_field_u


def ramp_sample(n=257, paths=3):
    g = GridSpec.uniform(1.0, n)
    vals = np.tile(3.0 * np.asarray(g.t_points), (paths, 1))
    return FieldSample(g, vals, 0, "fbm_slice", "ramp")


# ---------------------------------------------------------------- Hölder fits

def test_linear_ramp_has_exponent_one():
    fit = estimate_holder(ramp_sample())
    assert fit.exponent == pytest.approx(1.0, abs=1e-12)


def test_holder_needs_a_decade_of_lags():
    with pytest.raises(InsufficientDataError):
        estimate_holder(ramp_sample(), lags=[1, 2, 3, 4])


def test_holder_fbm_quarter():
    s = sample_fbm_slice(2 ** 10, 0.25, 1.0, 1.0, seed=3, n_samples=200)
    assert 0.23 <= estimate_holder(s).exponent <= 0.27


def test_holder_she_space_axis(she):
    g = GridSpec((0.5,), tuple((x,) for x in np.linspace(0.0, 1.0, 65)))
    s = sample_field_u(g, she, 400, seed=5)
    assert 0.45 <= estimate_holder(s, axis="space").exponent <= 0.55


# ---------------------------------------------------------------- moduli

def test_uniform_modulus_band_for_brownian_slice():
    n = 4096
    s = sample_fbm_slice(n, 0.5, 1.0, (n - 1) / n, seed=7, n_samples=100)
    stat = uniform_modulus_stat(s, 0.5, 1.0)
    assert np.all(np.isfinite(stat.values)) and np.all(stat.values > 0)
    inside = (stat.ratios >= 0.5) & (stat.ratios <= 1.5)
    assert inside.mean() >= 0.9


def test_uniform_modulus_needs_enough_points():
    s = sample_fbm_slice(64, 0.5, 1.0, 1.0, seed=1)
    with pytest.raises(InsufficientDataError):
        uniform_modulus_stat(s, 0.5, 1.0)


def test_chung_statistic_brownian_median():
    s = sample_fbm_slice(2049, 0.5, 1.0, 1.0, seed=8, n_samples=100)
    eps = [1e-2, 3e-2, 1e-1]
    vals = chung_lil_stat(s, eps, 0.5)
    assert vals.shape == (100, 3)
    assert np.all(np.isfinite(vals)) and np.all(vals > 0)
    med = np.median(vals, axis=0) / math.sqrt(math.pi ** 2 / 8)
    assert np.all((med >= 0.5) & (med <= 2.0))


# ---------------------------------------------------------------- small balls

def test_brownian_exact_value():
    assert brownian_smallball_exact(1.0) == pytest.approx(0.37077, abs=1e-5)


def test_brownian_exact_limits_and_monotone():
    eps = np.linspace(0.05, 6.0, 200)
    vals = [brownian_smallball_exact(e) for e in eps]
    assert np.all(np.diff(vals) >= -1e-15)
    assert brownian_smallball_exact(20.0) == pytest.approx(1.0, abs=1e-12)


def test_brownian_exact_series_forms_agree():
    # c = pi^2/(8 eps^2) = 1/2 is where the two series hand over
    e = math.pi / 2
    lo, hi = brownian_smallball_exact(e * (1 - 1e-9)), brownian_smallball_exact(e * (1 + 1e-9))
    assert hi == pytest.approx(lo, abs=1e-8)


def test_brownian_exact_scaling_in_horizon():
    assert brownian_smallball_exact(0.5, horizon=4.0) == pytest.approx(
        brownian_smallball_exact(0.25, horizon=1.0), rel=1e-12)


@given(st.floats(0.5, 6.0), st.floats(0.1, 2.0))
def test_exponent_fit_exact_on_synthetic_law(a, k):
    eps = smallball_eps_grid(2.0, 30)
    probs = np.exp(-k * eps ** -a)
    inside = (probs >= 1e-3) & (probs <= 0.5)
    if inside.sum() < 2:
        return
    slope, half, used = fit_smallball_exponent(eps, probs, 10_000)
    assert slope == pytest.approx(a, rel=1e-9)
    assert np.array_equal(used, inside)


def test_exponent_fit_degenerate():
    with pytest.raises(DegenerateResultError):
        fit_smallball_exponent([1.0, 0.5], [1.0, 1.0], 100)


def test_smallball_grid_enforced():
    with pytest.raises(ConfigError):
        small_ball_mc("fbm_slice", "time", None, [1.0, 0.5], 100, 0, n_time=513,
                      theta1=0.5, big_c1=1.0)


def test_smallball_brownian_matches_exact_series():
    eps = smallball_eps_grid(1.2, 8)
    est = small_ball_mc("fbm_slice", "time", None, eps, 5000, seed=13, n_time=2049,
                        theta1=0.5, big_c1=1.0)
    exact = np.array([brownian_smallball_exact(e) for e in eps])
    se = np.sqrt(exact * (1 - exact) / est.n_mc)
    assert np.all(np.abs(est.probs - exact) <= 3 * se + 1e-12)
    assert est.monotone_within(2.0)
    assert est.target_exponent == 2.0
    d = est.to_dict()
    assert d["seed"] == 13 and d["grid"]["n_t"] == 2049 and "grid" in d["note"]


# ---------------------------------------------------------------- entropy machinery

def test_entropy_arithmetic_progression():
    seq = entropy_sequence(1.0, 0.0, 50)
    assert np.array_equal(seq.values, np.arange(1, 51, dtype=float))
    assert seq.asym_ratio == 1.0


def test_entropy_first_terms():
    seq = entropy_sequence(2.0, 0.5, 3)
    assert seq.values[:2].tolist() == [1.0, 3.0]
    assert seq.values[2] == pytest.approx(3 + 2 * math.sqrt(3), rel=1e-15)


@pytest.mark.parametrize("c,lam", [(1.0, 0.0), (2.0, 0.5), (0.5, 0.75)])
def test_entropy_ratio_at_one_million(c, lam):
    seq = entropy_sequence(c, lam, 10 ** 6)
    assert abs(seq.asym_ratio - 1) <= 0.01
    r = seq.ratios()[10_000::1000]
    assert np.all(np.diff(np.abs(r - 1)) <= 1e-12)


def test_entropy_overflow_guard():
    with pytest.raises(OverflowGuardError):
        entropy_sequence(1e300, 0.99, 10 ** 5)


def test_entropy_sequence_is_a_dataclass_value():
    seq = entropy_sequence(1.0, 0.5, 4)
    assert isinstance(seq, EntropySequence) and len(seq.values) == 4


def test_cover_count_trivial_and_doubling(she, she_consts):
    assert cover_count_time(1e6, she, she_consts) == 1
    # counts below about 20 are dominated by rounding of the first steps
    for e in np.geomspace(1e-3, 1e-2, 6):
        assert cover_count_time(e / 2, she, she_consts) <= 2.5 * cover_count_time(e, she, she_consts)


def test_cover_count_inverse_eps_law(she, she_consts):
    eps = np.geomspace(1e-3, 1e-1, 9)
    counts = np.array([cover_count_time(e, she, she_consts) for e in eps])
    c_hat = np.max(counts * eps)
    assert np.all(counts <= c_hat / eps)
    assert c_hat < np.inf


def test_metric_exponent_branch(she, she_consts):
    _, lam = v_time_metric_constant(she, she_consts)
    assert lam == pytest.approx(1 - derive_exponents(she).theta1, rel=1e-15)


def test_talagrand_shape(she, she_consts):
    assert talagrand_lower_bound(0.0, 2.0) == 1.0
    assert talagrand_lower_bound(2.0, 2.0) == pytest.approx(math.exp(-1), rel=1e-15)
    eps = np.geomspace(1e-1, 1e-3, 6)
    bounds = [talagrand_lower_bound(cover_count_time(e, she, she_consts), 5.0) for e in eps]
    assert np.all(np.diff(bounds) <= 0)
