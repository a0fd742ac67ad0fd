import math

import pytest
from hypothesis import given, strategies as st

from sfde.errors import ConfigError
from sfde.params import ModelParams, check_conditions, dalang_margin, derive_exponents, params_grid

valid = st.builds(
    ModelParams,
    alpha=st.floats(0.2, 4.0),
    beta=st.floats(0.05, 1.95),
    gamma_rl=st.floats(0.0, 0.95),
    h0=st.floats(0.5, 0.95),
    h_spatial=st.lists(st.floats(0.05, 0.95), min_size=1, max_size=3).map(tuple),
)


def test_she_exponents():
    ex = derive_exponents(ModelParams.she())
    assert ex.theta1 == 0.25
    assert ex.theta2 == 0.5
    assert ex.q_dim == 6.0


def test_coloured_time_exponents():
    ex = derive_exponents(ModelParams(2.0, 1.0, 0.0, 0.7, (0.5,)))
    assert ex.theta1 == pytest.approx(0.45, abs=1e-15)
    assert ex.theta2 == pytest.approx(0.9, abs=1e-15)


def test_she_conditions():
    rep = check_conditions(ModelParams.she())
    assert rep.dalang_holds
    assert rep.dalang_margin == 0.5
    assert rep.u_exist


def test_dalang_boundary_fails():
    rep = check_conditions(ModelParams(1.0, 1.0, 0.0, 0.5, (0.5,)))
    assert not rep.dalang_holds
    assert rep.dalang_margin == 0.0


def test_gamma_condition():
    rep = check_conditions(ModelParams(2.0, 1.0, 0.6, 0.5, (0.5,)))
    assert not rep.gamma_lt_1_minus_h0


def test_q_absent_when_exponent_nonpositive():
    assert derive_exponents(ModelParams(1.0, 1.0, 0.0, 0.5, (0.5,))).q_dim is None


@pytest.mark.parametrize("kw", [
    dict(alpha=0.0), dict(beta=2.0), dict(beta=0.0), dict(gamma_rl=1.0), dict(h0=0.49),
    dict(h0=1.0), dict(h_spatial=(1.0,)), dict(h_spatial=()),
])
def test_invalid_params_rejected(kw):
    base = dict(alpha=2.0, beta=1.0, gamma_rl=0.0, h0=0.5, h_spatial=(0.5,))
    base.update(kw)
    with pytest.raises(ConfigError):
        ModelParams(**base)


def test_mapping_round_trip():
    p = ModelParams(1.5, 0.7, 0.2, 0.6, (0.3, 0.8))
    assert ModelParams.from_mapping(p.to_mapping()) == p
    assert p.digest() == ModelParams.from_mapping(p.to_mapping()).digest()


def test_mapping_errors():
    m = ModelParams.she().to_mapping()
    del m["beta"]
    with pytest.raises(ConfigError, match="beta"):
        ModelParams.from_mapping(m)
    m = ModelParams.she().to_mapping()
    m["H2"] = 0.5
    with pytest.raises(ConfigError):
        ModelParams.from_mapping(m)
    m = ModelParams.she().to_mapping()
    m["alpha"] = "2"
    with pytest.raises(ConfigError):
        ModelParams.from_mapping(m)


def test_params_grid_skips_invalid():
    grid = list(params_grid([1.0, 2.0], [1.0, 2.5], [0.0], [0.5], [(0.5,)]))
    assert len(grid) == 2


@given(valid)
def test_theta2_is_scaled_theta1(p):
    ex = derive_exponents(p)
    assert ex.theta2 == pytest.approx(p.alpha / p.beta * ex.theta1, rel=1e-12, abs=1e-12)


@given(valid, st.floats(0.001, 0.04))
def test_margin_monotone_in_hurst(p, bump):
    m0 = dalang_margin(p)
    up0 = ModelParams(p.alpha, p.beta, p.gamma_rl, min(p.h0 + bump, 0.99), p.h_spatial)
    assert dalang_margin(up0) >= m0 - 1e-12
    hs = tuple(min(h + bump, 0.99) if j == 0 else h for j, h in enumerate(p.h_spatial))
    up1 = ModelParams(p.alpha, p.beta, p.gamma_rl, p.h0, hs)
    assert dalang_margin(up1) >= m0 - 1e-12


@given(valid)
def test_report_matches_definitions(p):
    rep = check_conditions(p)
    ex = derive_exponents(p)
    assert rep.dalang_holds == (rep.dalang_margin > 0)
    assert rep.theta1_lt_1 == (ex.theta1 < 1)
    assert rep.theta2_lt_1 == (ex.theta2 < 1)
    assert rep.gamma_lt_1_minus_h0 == (p.gamma_rl < 1 - p.h0)
    assert rep.v_smooth_space == (p.alpha - p.d + p.h_sum > 1)
    if rep.dalang_holds:
        assert ex.theta1 > 0 and ex.theta2 > 0
    if rep.u_exist and ex.positive:
        assert rep.dalang_holds
    d = rep.as_dict()
    assert d["dalang"]["margin"] == rep.dalang_margin
    assert math.isfinite(rep.dalang_margin)
