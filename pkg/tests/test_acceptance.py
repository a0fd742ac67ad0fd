"""Acceptance criteria, one test per criterion.

Each test prints ``CRITERION <n>: PASS|FAIL`` with the measured numbers and its
wall time, then asserts.  The wall-time budget is part of the criterion.
"""
import math
import time

import numpy as np
import pytest

from sfde.analysis import (brownian_smallball_exact, cover_count_time, entropy_sequence,
                           estimate_holder, small_ball_mc, smallball_eps_grid)
from sfde.covariance import (compute_constants, slnd_probe, v_increment_bound,
                             v_increment_variance, variogram_full)
from sfde.errors import ResourceCapError
from sfde.mlf import gamma_recip, mittag_leffler, mlf_fourier_closed, mlf_fourier_quadrature
from sfde.params import ModelParams, derive_exponents
from sfde.sampling import MAX_POINTS, fbm_covariance, sample_fbm_slice
from sfde.solution import covariance_u
from sfde.spectral import f_space, f_time, f_U

SHE = ModelParams.she()
FRACTIONAL = ModelParams(alpha=2.0, beta=0.8, gamma_rl=0.1, h0=0.6, h_spatial=(0.5,))


@pytest.fixture
def report(request, capsys):
    start = time.perf_counter()

    def emit(label, ok, detail, budget=None):
        elapsed = time.perf_counter() - start
        if budget is not None and elapsed > budget:
            ok = False
            detail += f"; over the {budget:.0f} s budget"
        line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.1f} s)"
        with capsys.disabled():
            print("\n" + line)
        request.config._acceptance_lines = getattr(request.config, "_acceptance_lines", []) + [line]
        return ok
    return emit


def test_criterion_01_mittag_leffler_identities(report):
    rng = np.random.default_rng(101)
    z = rng.uniform(-30.0, 5.0, 1000)
    x = rng.uniform(0.0, 20.0, 1000)
    exp_err = np.max(np.abs(mittag_leffler(1, 1, z) - np.exp(z)) / np.exp(z))
    cos_err = np.max(np.abs(mittag_leffler(2, 1, -x * x) - np.cos(x)))
    # (a, b) with b - 3a a non-positive integer, so the third expansion term vanishes
    zz = -1e4
    asym_err = 0.0
    for a, b in [(0.5, 1.5), (0.8, 1.4), (1.2, 1.6)]:
        two_term = -sum(zz ** -k * gamma_recip(b - a * k) for k in (1, 2))
        asym_err = max(asym_err, abs(mittag_leffler(a, b, zz) / two_term - 1))
    ok = exp_err <= 1e-10 and cos_err <= 1e-10 and asym_err <= 1e-8
    assert report("1", ok, f"exp rel {exp_err:.1e}, cos abs {cos_err:.1e}, "
                           f"asymptotic rel {asym_err:.1e}", budget=5)


def test_criterion_02_transform_identity(report):
    betas = [0.3, 0.7, 1.0, 1.4, 1.8]
    gammas = [0.0, 0.2, 0.4, 0.6, 0.8]
    taus = np.array([-5.0, -1.0, 0.0, 1.0, 5.0])
    worst = 0.0
    for sigma in (1.0, 0.1):
        for b in betas:
            for g in gammas:
                q = mlf_fourier_quadrature(b, g, 1.0, taus, sigma)
                c = mlf_fourier_closed(b, g, 1.0, taus, sigma)
                worst = max(worst, float(np.max(np.abs(q - c))))
    assert report("2", worst <= 1e-4, f"max |quadrature - closed| {worst:.1e} over 250 probes",
                  budget=60)


def test_criterion_03_exponents(report):
    ex = derive_exponents(SHE)
    ok = (ex.theta1, ex.theta2, ex.q_dim) == (0.25, 0.5, 6.0)
    assert report("3", ok, f"theta1={ex.theta1}, theta2={ex.theta2}, Q={ex.q_dim}")


def _random_params(rng):
    while True:
        d = int(rng.integers(1, 3))
        p = ModelParams(alpha=rng.uniform(0.8, 3.0), beta=rng.uniform(0.2, 1.95),
                        gamma_rl=rng.uniform(0.0, 0.9), h0=rng.uniform(0.5, 0.95),
                        h_spatial=tuple(rng.uniform(0.1, 0.9, d)))
        if derive_exponents(p).positive:
            return p


def test_criterion_04_spectral_scaling(report):
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(100):
        p = _random_params(rng)
        ex = derive_exponents(p)
        c = rng.uniform(0.1, 10.0)
        tau = rng.uniform(0.01, 5.0) * rng.choice([-1, 1])
        phi = rng.uniform(0.1, 1.4)
        r = rng.uniform(0.05, 5.0)
        xi = np.array([r]) if p.d == 1 else r * np.array([math.cos(phi), math.sin(phi)])
        pairs = [
            (f_U(c ** (1 / ex.theta1) * tau, c ** (1 / ex.theta2) * xi, p) * c ** (2 + ex.q_dim),
             f_U(tau, xi, p)),
            (f_space(c ** (1 / ex.theta2) * xi, p, 1.0) * c ** (2 + p.d / ex.theta2),
             f_space(xi, p, 1.0)),
        ]
        if p.d == 1:
            pairs.append((f_time(c * abs(tau), p, 1.0) * c ** (2 * ex.theta1 + 1),
                          f_time(abs(tau), p, 1.0)))
        for lhs, rhs in pairs:
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    assert report("4", worst <= 1e-12, f"max relative deviation {worst:.1e} at 100 probes",
                  budget=5)


def test_criterion_05_variogram_time_axis(report):
    worst = 0.0
    for p in (SHE, FRACTIONAL):
        consts = compute_constants(p)
        th1 = derive_exponents(p).theta1
        for dt in (0.1, 0.5, 1.0):
            val = variogram_full(dt, [0.0], p).value
            closed = consts.big_c1 * dt ** (2 * th1)
            worst = max(worst, abs(val / closed - 1))
    assert report("5", worst <= 1e-3, f"max relative deviation {worst:.1e}", budget=600)


def test_criterion_06_white_noise_routes(report):
    probes = [(1.0, 0.0, 1.0, 0.0), (1.0, 0.0, 1.0, 0.3), (1.0, 0.0, 0.5, 0.0),
              (0.7, 0.2, 0.4, -0.5), (2.0, 0.0, 1.5, 1.0)]
    worst = 0.0
    for args in probes:
        t = covariance_u(*args, SHE, route="time")
        f = covariance_u(*args, SHE, route="frequency")
        worst = max(worst, abs(f / t - 1))
    assert report("6", worst <= 1e-4, f"max relative route gap {worst:.1e}", budget=300)


def test_criterion_07_sampler_exactness(report):
    theta, n = 0.45, 20_000
    s = sample_fbm_slice(8, theta, 1.3, 1.0, seed=21, n_samples=n)
    t = np.asarray(s.grid.t_points)
    cov = fbm_covariance(t, theta, 1.3)
    emp = s.values.T @ s.values / n
    var = np.diag(cov)
    live = var > 0
    se = np.sqrt((np.outer(var, var) + cov ** 2) / n)
    dev = float((np.abs(emp - cov)[np.ix_(live, live)] / se[np.ix_(live, live)]).max())
    fits = {}
    for th in (0.25, 0.45, 0.75):
        fits[th] = estimate_holder(sample_fbm_slice(2 ** 10, th, 1.0, 1.0, seed=7,
                                                    n_samples=200)).exponent
    ok = dev <= 5 and all(abs(v - k) <= 0.02 for k, v in fits.items())
    fit_txt = ", ".join(f"{k}->{v:.4f}" for k, v in fits.items())
    assert report("7", ok, f"max covariance deviation {dev:.2f} SE; Hölder {fit_txt}",
                  budget=600)


def test_criterion_08a_smallball_quarter(report):
    eps = np.geomspace(2.4, 0.6, 17)
    est = small_ball_mc("fbm_slice", "time", None, eps, 20_000, seed=1, n_time=MAX_POINTS,
                        theta1=0.25, big_c1=1 / math.sqrt(math.pi))
    rel = est.fitted_exponent / 4.0 - 1
    assert report("8a", abs(rel) <= 0.2,
                  f"exponent {est.fitted_exponent:.3f} +- {est.ci_halfwidth:.3f} vs 4, "
                  f"{int(est.used.sum())} points fitted", budget=1200)


def test_criterion_08b_smallball_brownian(report):
    eps = smallball_eps_grid(1.2, 8)
    est = small_ball_mc("fbm_slice", "time", None, eps, 20_000, seed=2, n_time=MAX_POINTS,
                        theta1=0.5, big_c1=1.0)
    exact = np.array([brownian_smallball_exact(e) for e in eps])
    se = np.sqrt(exact * (1 - exact) / est.n_mc)
    z = np.abs(est.probs - exact) / np.where(se > 0, se, 1.0)
    ok_fit = abs(est.fitted_exponent / 2.0 - 1) <= 0.2
    ok_oracle = bool(np.all(np.abs(est.probs - exact) <= 3 * se + 1e-12))
    worst = int(np.argmax(z))
    assert report("8b", ok_fit and ok_oracle,
                  f"exponent {est.fitted_exponent:.3f} vs 2; worst oracle gap {z[worst]:.2f} SE "
                  f"at eps={eps[worst]:.3f} (MC {est.probs[worst]:.4f}, exact {exact[worst]:.4f})",
                  budget=1200)


def test_criterion_08c_smallball_joint(report):
    eps = np.geomspace(4.0, 0.6, 18)
    try:
        est = small_ball_mc("U", "joint", SHE, eps, 20_000, seed=3, n_time=2 ** 10, n_space=2 ** 6)
    except ResourceCapError as err:
        diag = small_ball_mc("U", "joint", SHE, eps, 20_000, seed=3, n_time=64, n_space=64,
                             enforce_grid=False)
        report("8c", False, f"{err}; 64x64 diagnostic exponent {diag.fitted_exponent:.3f} "
                            f"+- {diag.ci_halfwidth:.3f} vs Q=6", budget=1200)
        pytest.fail(f"2^10 x 2^6 joint grid exceeds the {MAX_POINTS}-point cap")
    rel = est.fitted_exponent / 6.0 - 1
    assert report("8c", abs(rel) <= 0.25, f"exponent {est.fitted_exponent:.3f} vs 6",
                  budget=1200)


def test_criterion_09_slnd(report):
    rep = slnd_probe(SHE, compute_constants(SHE), n_configs=50, seed=9)
    assert report("9", rep.holds, f"C_fit {rep.c_fit:.3e} over 50 configurations", budget=300)


def test_criterion_10_entropy(report):
    ratios = [entropy_sequence(c, lam, 10 ** 6).asym_ratio
              for c, lam in [(1.0, 0.0), (2.0, 0.5), (0.5, 0.75)]]
    consts = compute_constants(SHE)
    eps = np.geomspace(1e-3, 1e-1, 9)
    counts = np.array([cover_count_time(e, SHE, consts) for e in eps])
    c_hat = float(np.max(counts * eps))
    ok = all(abs(r - 1) <= 0.01 for r in ratios) and bool(np.all(counts <= c_hat / eps))
    assert report("10", ok, "ratios " + ", ".join(f"{r:.5f}" for r in ratios)
                  + f"; C_hat {c_hat:.4f}", budget=60)


def test_criterion_11_v_smoothness(report):
    consts = compute_constants(SHE)
    probes = [(1.0, 0.0, 0.5, 0.0), (0.9, 0.0, 0.8, 0.0), (0.5, 0.0, 0.3, 0.0),
              (1.0, 0.0, 1.0, 0.1), (1.0, 0.0, 1.0, 0.3)]
    worst = 0.0
    for t, x, s, y in probes:
        val = v_increment_variance(t, x, s, y, SHE, consts, route="dual")
        bound = v_increment_bound(t, s, x, y, SHE, consts)
        worst = max(worst, val / bound)
    assert report("11", worst <= 1.0, f"max variance/bound {worst:.3f}", budget=600)
