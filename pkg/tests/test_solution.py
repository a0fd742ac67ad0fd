import math

import numpy as np
import pytest

from sfde.errors import ConditionError, UnsupportedParameterError
from sfde.params import ModelParams
from sfde.solution import covariance_u, covariance_u_matrix

# mpmath evaluations of int_0^min(t,s) int e^{-(t-r) xi^2 - (s-r) xi^2} cos(xi h) dxi dr / (2 pi)
SHE_ORACLE = [
    ((1.0, 0.0, 1.0, 0.0), 0.39894228040143267794),
    ((1.0, 0.0, 1.0, 0.3), 0.32842198476342527561),
    ((1.0, 0.0, 0.5, 0.0), 0.1460230092706191403),
    ((0.7, 0.2, 0.4, -0.5), 0.11457972848363647973),
    ((2.0, 0.0, 1.5, 1.0), 0.2733473598187519332),
]


@pytest.mark.parametrize("args,expected", SHE_ORACLE)
def test_she_covariance_time_route(args, expected, she):
    assert covariance_u(*args, she) == pytest.approx(expected, rel=1e-8)


def test_she_variance_is_inverse_sqrt_two_pi(she):
    assert covariance_u(1.0, 0.0, 1.0, 0.0, she) == pytest.approx(1 / math.sqrt(2 * math.pi),
                                                                  rel=1e-10)


def test_white_noise_routes_agree(she):
    t = covariance_u(1.0, 0.0, 1.0, 0.0, she, route="time")
    f = covariance_u(1.0, 0.0, 1.0, 0.0, she, route="frequency")
    assert f == pytest.approx(t, rel=1e-4)


def test_covariance_symmetric_and_stationary_in_space(she):
    a = covariance_u(0.8, 0.1, 0.5, 0.6, she)
    b = covariance_u(0.5, 0.6, 0.8, 0.1, she)
    c = covariance_u(0.8, 1.1, 0.5, 1.6, she)
    assert a == pytest.approx(b, rel=1e-10)
    assert a == pytest.approx(c, rel=1e-10)


def test_variance_positive_fractional_kernel():
    p = ModelParams(2.0, 0.8, 0.1, 0.6, (0.5,))
    v = covariance_u(0.5, 0.0, 0.5, 0.0, p, route="frequency")
    assert 0 < v < math.inf


def test_matrix_matches_scalar_and_is_psd(she):
    pts = np.array([[0.5, 0.0], [0.5, 0.25], [1.0, 0.0], [1.0, -0.3]])
    k = covariance_u_matrix(pts, she)
    assert np.allclose(k, k.T)
    assert k[0, 3] == pytest.approx(covariance_u(0.5, 0.0, 1.0, -0.3, she), rel=1e-8)
    assert np.linalg.eigvalsh(k).min() > 0


def test_requires_positive_times(she):
    with pytest.raises(UnsupportedParameterError):
        covariance_u(0.0, 0.0, 1.0, 0.0, she)


def test_requires_dalang():
    with pytest.raises(ConditionError):
        covariance_u(1.0, 0.0, 1.0, 0.0, ModelParams(1.0, 1.0, 0.0, 0.5, (0.5,)))
