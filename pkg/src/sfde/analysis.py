"""Path statistics: Hölder fits, moduli of continuity, small balls, entropy.

Sup-norms over continuous domains are replaced by maxima over the sampling
grid.  The grid maximum never exceeds the true supremum, so every small-ball
probability estimated here is biased upward; the reports say so.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .covariance import ConstantsReport, compute_constants, covariance_matrix_U, v_time_metric_constant
from .errors import (ConfigError, DegenerateResultError, DomainError, InsufficientDataError,
                     OverflowGuardError, UnsupportedParameterError)
from .params import ModelParams, derive_exponents
from .sampling import (FieldSample, GaussianSampler, GridSpec, fbm_covariance, sample_hash)

MIN_SMALLBALL_GRID = 2 ** 10
MIN_MODULUS_POINTS = 256
GRID_BIAS_NOTE = ("sup-norm approximated by the grid maximum; grid max <= true sup, "
                  "so estimated probabilities are biased upward")


# ---------------------------------------------------------------------------
# Hölder exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderFit:
    lags: np.ndarray
    empirical_variogram: np.ndarray
    slope: float
    intercept: float
    r_squared: float

    @property
    def exponent(self) -> float:
        return 0.5 * self.slope


def _cube(sample: FieldSample) -> np.ndarray:
    g = sample.grid
    return sample.values.reshape(sample.n_samples, len(g.t_points), len(g.x_points))


def _uniform_step(coords: np.ndarray, what: str) -> float:
    if len(coords) < 2:
        raise InsufficientDataError(f"{what} axis has fewer than two points")
    steps = np.diff(coords)
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-9 * max(abs(h), 1e-300):
        raise ConfigError(f"{what} axis is not uniform")
    return h


def default_lags(n: int, max_fraction: float = 0.25) -> np.ndarray:
    """Powers of two from 1 up to ``max_fraction * n`` grid steps."""
    top = max(1, int(n * max_fraction))
    return 2 ** np.arange(int(math.log2(top)) + 1)


def estimate_holder(sample: FieldSample, axis: str = "time", lags: Optional[Sequence[int]] = None
                    ) -> HolderFit:
    """Least-squares line through ``(log lag, log mean squared increment)``.

    ``lags`` are integer multiples of the grid step.  Half the slope estimates
    the Hölder exponent.
    """
    if sample.n_samples < 1:
        raise InsufficientDataError("no samples")
    cube = _cube(sample)
    if axis == "time":
        step = _uniform_step(np.asarray(sample.grid.t_points), "time")
        arr = cube
    elif axis == "space":
        if sample.grid.d != 1:
            raise UnsupportedParameterError("space-axis fits need d = 1")
        step = _uniform_step(np.asarray(sample.grid.x_points)[:, 0], "space")
        arr = np.swapaxes(cube, 1, 2)
    else:
        raise ConfigError(f"axis must be 'time' or 'space', got {axis!r}")
    n = arr.shape[1]
    ks = np.asarray(default_lags(n) if lags is None else lags, dtype=int)
    ks = ks[(ks >= 1) & (ks < n)]
    if len(ks) < 4 or ks.max() / ks.min() < 10:
        raise InsufficientDataError("need at least 4 lags spanning a decade",
                                    n_lags=len(ks), n_points=n)
    vario = np.array([np.mean((arr[:, k:, :] - arr[:, :-k, :]) ** 2) for k in ks])
    if np.any(vario <= 0):
        raise DegenerateResultError("zero empirical variogram at some lag")
    x, y = np.log(ks * step), np.log(vario)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return HolderFit(ks * step, vario, float(slope), float(intercept), r2)


# ---------------------------------------------------------------------------
# moduli of continuity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModulusStat:
    values: np.ndarray
    limit: float
    eps: float

    @property
    def ratios(self) -> np.ndarray:
        return self.values / self.limit


def _time_paths(sample: FieldSample):
    g = sample.grid
    if len(g.x_points) != 1:
        raise ConfigError("temporal statistics need a sample with a single space point")
    return np.asarray(g.t_points), sample.values


def uniform_modulus_stat(sample: FieldSample, theta1: float, big_c1: float,
                         eps: Optional[float] = None) -> ModulusStat:
    """Per path ``max |X(t)-X(s)| / (|t-s|^theta1 sqrt(log(1 + 1/|t-s|)))`` over ``|t-s| <= eps``.

    ``eps`` defaults to the grid mesh.  The theoretical limit ``sqrt(2 C1)``
    is reported alongside.
    """
    t, paths = _time_paths(sample)
    if len(t) < MIN_MODULUS_POINTS:
        raise InsufficientDataError(f"need at least {MIN_MODULUS_POINTS} grid points, got {len(t)}")
    step = _uniform_step(t, "time")
    kmax = 1 if eps is None else max(1, int(math.floor(eps / step + 1e-9)))
    best = np.zeros(paths.shape[0])
    for k in range(1, kmax + 1):
        h = k * step
        norm = h ** theta1 * math.sqrt(math.log1p(1.0 / h))
        inc = np.max(np.abs(paths[:, k:] - paths[:, :-k]), axis=1) / norm
        best = np.maximum(best, inc)
    return ModulusStat(best, math.sqrt(2.0 * big_c1), kmax * step)


def chung_lil_stat(sample: FieldSample, eps_list: Sequence[float], theta1: float,
                   t_index: Optional[int] = None) -> np.ndarray:
    """``sup_{|s|<=eps} |X(t+s) - X(t)| / (eps^theta1 (log log 1/eps)^{-theta1})``.

    Returns an array ``[n_samples, len(eps_list)]``; ``t`` is the grid point
    at ``t_index`` (default: the middle one).
    """
    t, paths = _time_paths(sample)
    step = _uniform_step(t, "time")
    i0 = len(t) // 2 if t_index is None else int(t_index)
    out = np.empty((paths.shape[0], len(eps_list)))
    for j, eps in enumerate(eps_list):
        if not 0 < eps < math.exp(-1):
            raise DomainError(f"eps must lie in (0, 1/e) for log log 1/eps > 0, got {eps}")
        k = int(math.floor(eps / step + 1e-9))
        if k < 1 or i0 - k < 0 or i0 + k >= len(t):
            raise InsufficientDataError(f"grid cannot resolve eps={eps} around t={t[i0]}")
        window = paths[:, i0 - k:i0 + k + 1] - paths[:, [i0]]
        norm = eps ** theta1 * math.log(math.log(1.0 / eps)) ** (-theta1)
        out[:, j] = np.max(np.abs(window), axis=1) / norm
    return out


# ---------------------------------------------------------------------------
# small ball probabilities
# ---------------------------------------------------------------------------

def brownian_smallball_exact(eps: float, horizon: float = 1.0, tol: float = 1e-12) -> float:
    """``P(sup_{[0,horizon]} |B| <= eps)`` for standard Brownian motion."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    c = math.pi ** 2 * horizon / (8.0 * eps * eps)
    if c >= 0.5:
        total, k = 0.0, 0
        while True:
            m = 2 * k + 1
            term = (4.0 / math.pi) * (-1) ** k / m * math.exp(-m * m * c)
            total += term
            if abs(term) < tol:
                return min(max(total, 0.0), 1.0)
            k += 1
    # wide balls: the reflected-Gaussian form of the same law converges faster
    a = eps / math.sqrt(horizon)
    total, n = 0.0, 0
    while True:
        terms = [(-1) ** m * (special.ndtr((2 * m + 1) * a) - special.ndtr((2 * m - 1) * a))
                 for m in ((n, -n) if n else (0,))]
        total += sum(terms)
        if n > 0 and max(abs(x) for x in terms) < tol:
            return min(max(total, 0.0), 1.0)
        n += 1


def smallball_eps_grid(eps_max: float, n: int) -> np.ndarray:
    """Decreasing geometric grid with ratio ``2^{1/2}``."""
    return eps_max * 2.0 ** (-0.5 * np.arange(n))


@dataclass(frozen=True)
class SmallBallEstimate:
    epsilons: np.ndarray
    probs: np.ndarray
    std_errors: np.ndarray
    fitted_exponent: float
    ci_halfwidth: float
    n_mc: int
    seed: int
    target_exponent: float = float("nan")
    field_kind: str = ""
    domain: str = ""
    grid: dict = field(default_factory=dict)
    params_digest: str = ""
    used: np.ndarray = field(default=None)
    note: str = GRID_BIAS_NOTE

    def monotone_within(self, n_se: float = 2.0) -> bool:
        """``P(eps)`` nonincreasing as ``eps`` decreases, within ``n_se`` standard errors."""
        order = np.argsort(self.epsilons)[::-1]
        p, se = self.probs[order], self.std_errors[order]
        return bool(np.all(p[1:] <= p[:-1] + n_se * np.hypot(se[1:], se[:-1]) + 1e-15))

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, np.ndarray):
                out[k] = v.tolist()
        return out


def fit_smallball_exponent(eps, probs, n_mc: int, min_prob: float = 1e-3, max_prob: float = 0.5):
    """Weighted fit of ``log(-log P)`` against ``log(1/eps)``.

    Weights are inverse delta-method variances
    ``(1 - P) / (n P log(P)^2)``.  Only points with ``P`` in
    ``[min_prob, max_prob]`` are used.  Returns ``(slope, ci_halfwidth, used)``
    with a 95% half-width from the weighted normal equations.
    """
    eps = np.asarray(eps, dtype=float)
    probs = np.asarray(probs, dtype=float)
    used = (probs >= min_prob) & (probs <= max_prob) & (probs > 0) & (probs < 1)
    if used.sum() < 2:
        raise DegenerateResultError("fewer than two probabilities inside the fit window",
                                    probs=probs.tolist())
    p = probs[used]
    x = np.log(1.0 / eps[used])
    y = np.log(-np.log(p))
    var = (1.0 - p) / (n_mc * p * np.log(p) ** 2)
    w = 1.0 / var
    a = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(a.T @ (w[:, None] * a))
    coef = cov @ (a.T @ (w * y))
    return float(coef[1]), float(1.96 * math.sqrt(cov[1, 1])), used


def _target_exponent(domain, p: Optional[ModelParams], theta1):
    if domain == "time":
        return 1.0 / theta1
    ex = derive_exponents(p)
    return p.d / ex.theta2 if domain == "space" else ex.q_dim


def small_ball_mc(field_kind: str, domain: str, p: Optional[ModelParams], eps_list: Sequence[float],
                  n_mc: int, seed: int, *, n_time: int = MIN_SMALLBALL_GRID + 1, n_space: int = 65,
                  t_fixed: float = 1.0, consts: Optional[ConstantsReport] = None,
                  theta1: Optional[float] = None, big_c1: Optional[float] = None,
                  min_prob: float = 1e-3, max_prob: float = 0.5, batch: int = 2000,
                  enforce_grid: bool = True) -> SmallBallEstimate:
    """Monte-Carlo small-ball probabilities and their exponent fit.

    Domains: ``time`` is ``sup_{t in [0,1]} |X(t) - X(0)|``; ``space`` is
    ``sup_{x in [-1,1]} |U(t_fixed, x) - U(t_fixed, 0)|``; ``joint`` is
    ``sup_{[0,1] x [-1,1]} |U|``.  ``fbm_slice`` supports only ``time`` and
    may take ``theta1``/``big_c1`` directly instead of ``p``.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.ndim != 1 or len(eps) < 2 or np.any(eps <= 0):
        raise ConfigError("eps_list needs at least two positive values")
    if n_mc < 2:
        raise ConfigError("n_mc must be at least 2")
    if field_kind not in ("fbm_slice", "U"):
        raise UnsupportedParameterError(f"small balls are implemented for fbm_slice and U, not {field_kind!r}")
    if domain not in ("time", "space", "joint"):
        raise ConfigError(f"unknown domain {domain!r}")
    if field_kind == "fbm_slice" and domain != "time":
        raise ConfigError("fbm_slice supports only the time domain")
    if enforce_grid:
        if domain in ("time", "joint") and n_time < MIN_SMALLBALL_GRID:
            raise ConfigError(f"time axis needs at least {MIN_SMALLBALL_GRID} points")
        if domain == "space" and n_space < MIN_SMALLBALL_GRID:
            raise ConfigError(f"space axis needs at least {MIN_SMALLBALL_GRID} points")
    if domain != "time" and (p is None or p.d != 1):
        raise UnsupportedParameterError("space and joint small balls are implemented for d = 1")

    if field_kind == "fbm_slice":
        if theta1 is None or big_c1 is None:
            if p is None:
                raise ConfigError("fbm_slice needs p or theta1 and big_c1")
            theta1 = derive_exponents(p).theta1 if theta1 is None else theta1
            if big_c1 is None:
                big_c1 = (consts or compute_constants(p)).big_c1
        grid = GridSpec(tuple(np.linspace(0.0, 1.0, n_time)), ((0.0,),), "smallball-time")
        t = np.asarray(grid.t_points)
        sampler = GaussianSampler(fbm_covariance(t, theta1, big_c1), t[:, None])
        anchor = None
        digest = sample_hash("fbm_slice", grid, {"theta1": theta1, "C1": big_c1})
    else:
        consts = consts or compute_constants(p)
        if theta1 is None:
            theta1 = derive_exponents(p).theta1
        if domain == "time":
            grid = GridSpec(tuple(np.linspace(0.0, 1.0, n_time)), ((0.0,),), "smallball-time")
        elif domain == "space":
            if n_space % 2 == 0:
                raise ConfigError("space grid needs an odd point count so that x = 0 is a node")
            grid = GridSpec((t_fixed,), tuple((v,) for v in np.linspace(-1.0, 1.0, n_space)),
                            "smallball-space")
        else:
            grid = GridSpec(tuple(np.linspace(0.0, 1.0, n_time)),
                            tuple((v,) for v in np.linspace(-1.0, 1.0, n_space)), "smallball-joint")
        pts = grid.points
        sampler = GaussianSampler(covariance_matrix_U(pts, p, consts), pts)
        anchor = (n_space // 2) if domain == "space" else None
        digest = sample_hash("U", grid, {"params": p.digest()})

    sups = np.empty(n_mc)
    pos = 0
    for block in sampler.batches(seed, n_mc, batch):
        if anchor is not None:
            block = block - block[:, [anchor]]
        sups[pos:pos + len(block)] = np.max(np.abs(block), axis=1)
        pos += len(block)
    probs = np.array([np.count_nonzero(sups <= e) for e in eps]) / n_mc
    se = np.sqrt(probs * (1 - probs) / n_mc)
    slope, half, used = fit_smallball_exponent(eps, probs, n_mc, min_prob, max_prob)
    return SmallBallEstimate(
        epsilons=eps, probs=probs, std_errors=se, fitted_exponent=slope, ci_halfwidth=half,
        n_mc=int(n_mc), seed=int(seed), target_exponent=_target_exponent(domain, p, theta1),
        field_kind=field_kind, domain=domain, grid={"n_t": len(grid.t_points),
                                                    "n_x": len(grid.x_points), "label": grid.label},
        params_digest=digest, used=used)


# ---------------------------------------------------------------------------
# entropy machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntropySequence:
    c: float
    lam: float
    values: np.ndarray

    @property
    def asym_ratio(self) -> float:
        n = len(self.values)
        return float(self.values[-1] / (self.c * n * (1 - self.lam)) ** (1 / (1 - self.lam)))

    def ratios(self) -> np.ndarray:
        n = np.arange(1, len(self.values) + 1)
        return self.values / (self.c * n * (1 - self.lam)) ** (1 / (1 - self.lam))


def entropy_sequence(c: float, lam: float, n: int) -> EntropySequence:
    """``a_1 = 1``, ``a_{k+1} = a_k + c a_k^lam`` for ``k < n``."""
    if c <= 0:
        raise ConfigError("c must be positive")
    if not 0 <= lam < 1:
        raise ConfigError("lam must lie in [0, 1)")
    if n < 1:
        raise ConfigError("n must be at least 1")
    vals = np.empty(n)
    a = 1.0
    for k in range(n):
        if not math.isfinite(a):
            raise OverflowGuardError("entropy sequence left the floating range",
                                     index=k, last=float(vals[k - 1]))
        vals[k] = a
        a = a + c * a ** lam
    return EntropySequence(float(c), float(lam), vals)


def cover_count_time(eps: float, p: ModelParams, consts: ConstantsReport,
                     metric: Optional[tuple] = None) -> int:
    """Number of points ``t_j <= 1`` in the entropy construction for ``t -> V(t,x)``.

    With ``d(s,t) <= c (t-s)/s^lam`` the points ``t_j`` proportional to
    ``a_j`` are ``2 eps`` apart in that metric, so the count bounds the
    covering number of ``[0,1]``.  ``metric`` overrides ``(c, lam)`` from
    :func:`sfde.covariance.v_time_metric_constant`.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    c, lam = metric if metric is not None else v_time_metric_constant(p, consts)
    limit = c * (c ** (1 + lam) / (2.0 * eps)) ** (1.0 / (1.0 - lam))
    a, j = 1.0, 0
    while a <= limit:
        j += 1
        a += c * a ** lam
    return 1 + j


def talagrand_lower_bound(psi_at_eps: float, k_const: float) -> float:
    """``exp(-psi/K)``, the small-ball lower bound shape."""
    if psi_at_eps < 0 or k_const <= 0:
        raise DomainError("need psi >= 0 and K > 0")
    return math.exp(-psi_at_eps / k_const)
