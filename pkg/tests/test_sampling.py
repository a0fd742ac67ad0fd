import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sfde.covariance import covariance_matrix_U, she_variogram_closed, variogram_table
from sfde.errors import ConfigError, ResourceCapError, UnsupportedParameterError
from sfde.params import ModelParams
from sfde.sampling import (MAX_POINTS, FieldSample, GaussianSampler, GridSpec, fbm_covariance,
                           sample_fbm_slice, sample_field_U, sample_field_u, sample_points_U,
                           standard_normals)
from sfde.solution import covariance_u

C1_SHE = 0.56418958354775628695


def moments_ok(x):
    z = (x - x.mean()) / x.std()
    return abs(stats.skew(z)) <= 0.1 and abs(stats.kurtosis(z)) <= 0.2


def test_grid_cap():
    with pytest.raises(ResourceCapError):
        GridSpec.uniform(1.0, 65, 1.0, 64)
    assert GridSpec.uniform(1.0, 64, 1.0, 64).n_points == MAX_POINTS


def test_grid_validation():
    with pytest.raises(ConfigError):
        GridSpec((0.5, 0.2), ((0.0,),))
    with pytest.raises(ConfigError):
        GridSpec((0.5,), ((0.0,), (0.0,)))


def test_grid_points_time_major():
    g = GridSpec((0.1, 0.2), ((0.0,), (1.0,)))
    assert g.points.tolist() == [[0.1, 0.0], [0.1, 1.0], [0.2, 0.0], [0.2, 1.0]]


def test_normals_do_not_depend_on_batching():
    whole = standard_normals(7, 10, 5)
    parts = np.vstack([standard_normals(7, 4, 5), standard_normals(7, 6, 5, start=4)])
    assert np.array_equal(whole, parts)


def test_sampler_batches_match_single_draw():
    cov = fbm_covariance(np.linspace(0.1, 1, 6), 0.3)
    s = GaussianSampler(cov, np.arange(6.0))
    assert np.array_equal(np.vstack(list(s.batches(3, 25, batch=7))), s.draw(3, 25))


def test_origin_is_pinned_to_zero(she, she_consts):
    g = GridSpec((0.0,), ((0.0,),))
    s = sample_field_U(g, she, she_consts, 50, seed=1, variogram=she_variogram_closed_vec)
    assert np.all(s.values == 0.0)


def she_variogram_closed_vec(dt, dx):
    return np.vectorize(she_variogram_closed)(dt, dx)


def test_same_seed_same_values(she, she_consts):
    g = GridSpec.uniform(1.0, 4, 1.0, 3)
    a = sample_field_U(g, she, she_consts, 20, seed=11).values
    b = sample_field_U(g, she, she_consts, 20, seed=11).values
    c = sample_field_U(g, she, she_consts, 20, seed=12).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@settings(max_examples=20)
@given(st.permutations(list(range(8))))
def test_permuting_points_permutes_values(perm):
    she = ModelParams.she()
    rng = np.random.default_rng(5)
    pts = np.column_stack([rng.uniform(0.1, 1, 8), rng.uniform(-1, 1, 8)])
    perm = np.array(perm)
    tab = variogram_table(she)
    a = sample_points_U(pts, she, None, 5, seed=3, variogram=tab)
    b = sample_points_U(pts[perm], she, None, 5, seed=3, variogram=tab)
    assert np.allclose(b, a[:, perm], rtol=0, atol=1e-12)


def test_U_marginal_variance_and_gaussianity(she, she_consts):
    g = GridSpec((0.6,), ((0.4,),))
    vals = sample_field_U(g, she, she_consts, 10_000, seed=2).values[:, 0]
    target = she_variogram_closed(0.6, 0.4)
    se = target * np.sqrt(2 / len(vals))
    assert abs(np.mean(vals ** 2) - target) <= 4 * se
    assert moments_ok(vals)


def test_brownian_increments_uncorrelated():
    s = sample_fbm_slice(5, 0.5, 1.0, 1.0, seed=4, n_samples=10_000)
    inc = np.diff(s.values, axis=1)
    r = np.corrcoef(inc[:, 0], inc[:, 2])[0, 1]
    assert abs(r) <= 4 / np.sqrt(10_000)


def test_fbm_increment_variance_and_moments():
    theta = 0.25
    s = sample_fbm_slice(9, theta, C1_SHE, 1.0, seed=9, n_samples=10_000)
    t = np.asarray(s.grid.t_points)
    inc = s.values[:, 6] - s.values[:, 2]
    target = C1_SHE * abs(t[6] - t[2]) ** (2 * theta)
    se = target * np.sqrt(2 / len(inc))
    assert abs(np.mean(inc ** 2) - target) <= 4 * se
    assert moments_ok(inc)


def test_fbm_covariance_exact_law():
    theta, n = 0.45, 20_000
    s = sample_fbm_slice(8, theta, 1.3, 1.0, seed=21, n_samples=n)
    t = np.asarray(s.grid.t_points)
    cov = fbm_covariance(t, theta, 1.3)
    emp = s.values.T @ s.values / n
    var = np.diag(cov)
    se = np.sqrt((np.outer(var, var) + cov ** 2) / n)
    live = var > 0
    dev = np.abs(emp - cov)[np.ix_(live, live)] / se[np.ix_(live, live)]
    assert dev.max() <= 5


def test_fbm_same_seed_determinism():
    a = sample_fbm_slice(16, 0.3, 1.0, 1.0, seed=1, n_samples=3).values
    b = sample_fbm_slice(16, 0.3, 1.0, 1.0, seed=1, n_samples=3).values
    assert np.array_equal(a, b)


def test_u_variance_stationarity_and_moments(she):
    g = GridSpec((1.0,), ((0.0,), (0.2,), (0.4,), (0.6,)))
    s = sample_field_u(g, she, 10_000, seed=8)
    vals = s.values
    target = covariance_u(1.0, 0.0, 1.0, 0.0, she)
    se = target * np.sqrt(2 / len(vals))
    assert abs(np.mean(vals[:, 1] ** 2) - target) <= 4 * se
    c01 = np.mean(vals[:, 0] * vals[:, 1])
    c23 = np.mean(vals[:, 2] * vals[:, 3])
    assert abs(c01 - c23) <= 4 * target * np.sqrt(2 * 2 / len(vals))
    assert moments_ok(vals[:, 2])
    again = sample_field_u(g, she, 10_000, seed=8)
    assert np.array_equal(vals, again.values)


def test_u_guards(fractional, she):
    big = GridSpec.uniform(1.0, 20, 1.0, 20, t_min=0.05)
    with pytest.raises(UnsupportedParameterError):
        sample_field_u(big, fractional, 1, seed=0)
    with pytest.raises(ConfigError):
        sample_field_u(GridSpec.uniform(1.0, 3), she, 1, seed=0)


def test_csv_and_binary_round_trip(tmp_path, she, she_consts):
    g = GridSpec.uniform(1.0, 3, 0.5, 2)
    s = sample_field_U(g, she, she_consts, 4, seed=6)
    s.to_binary(tmp_path / "s.bin")
    back = FieldSample.from_binary(tmp_path / "s.bin")
    assert back.grid == s.grid
    assert np.array_equal(back.values, s.values)
    assert (back.seed, back.field_kind, back.params_hash) == (s.seed, s.field_kind, s.params_hash)
    s.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("#schema=")
    assert lines[1] == "sample_id,t,x1,value"
    assert len(lines) == 2 + 4 * g.n_points
    last = lines[-1].split(",")
    assert float(last[-1]) == s.values[3, -1]


def test_cov_matrix_psd_for_sampler_grid(she, she_consts):
    g = GridSpec.uniform(1.0, 8, 1.0, 8)
    k = covariance_matrix_U(g.points, she, she_consts)
    assert np.linalg.eigvalsh(k).min() >= -1e-8 * np.trace(k)
