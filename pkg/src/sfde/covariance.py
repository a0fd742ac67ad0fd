"""Variograms, covariances and increment bounds computed by quadrature.

Every radial integral that appears here has the form
``int_0^inf x^{mu-1} / (1 + 2 x cos(phi) + x^2) dx`` after the substitution
``x = r^a``; it is evaluated with QUADPACK's algebraic-weight rule on
``[0, 1]`` and, after ``x -> 1/x``, once more on ``[0, 1]``.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, optimize, special

from .errors import (CovarianceError, DivergentIntegralError, DomainError, QuadratureError,
                     SingularConditioningError, UnsupportedParameterError)
from .mlf import GK_NODES, GK_WEIGHTS, G_WEIGHTS, fit_bound_constant
from .params import ModelParams, check_conditions, derive_exponents
from .solution import _phat, covariance_u, spatial_integral
from .spectral import c_hurst

EPSREL = 1e-10


def _quad(f, a, b, **kw):
    kw.setdefault("limit", 200)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, **kw)


# ---------------------------------------------------------------------------
# one-dimensional building blocks
# ---------------------------------------------------------------------------

def mellin_rational(mu: float, cos_phi: float, epsrel: float = EPSREL):
    """``int_0^inf x^{mu-1}/(1 + 2 x cos_phi + x^2) dx`` for ``0 < mu < 2``.

    Returns ``(value, abserr)``.
    """
    if not 0 < mu < 2:
        raise DivergentIntegralError(f"Mellin exponent mu={mu} outside (0, 2)")

    def g(x):
        return 1.0 / (1.0 + 2.0 * x * cos_phi + x * x)

    v1, e1 = _quad(g, 0.0, 1.0, weight="alg", wvar=(mu - 1.0, 0.0), epsrel=epsrel, epsabs=0)
    v2, e2 = _quad(g, 0.0, 1.0, weight="alg", wvar=(1.0 - mu, 0.0), epsrel=epsrel, epsabs=0)
    return v1 + v2, e1 + e2


def mellin_rational_closed(mu: float, phi: float) -> float:
    """Closed form of :func:`mellin_rational` with ``cos_phi = cos(phi)``, ``0 < phi < pi``."""
    if abs(mu - 1.0) < 1e-12:
        return phi / math.sin(phi)
    return math.pi * math.sin((1.0 - mu) * phi) / (math.sin(mu * math.pi) * math.sin(phi))


def one_minus_cos_integral(theta: float, epsrel: float = EPSREL):
    """``int_R (1 - cos t)/|t|^{2 theta + 1} dt`` for ``0 < theta < 1``; ``(value, abserr)``."""
    if not 0 < theta < 1:
        raise DivergentIntegralError(f"(1-cos) integral diverges for theta={theta}")

    def smooth(t):
        s = math.sin(0.5 * t)
        return 2.0 * s * s / (t * t) if t > 0 else 0.5

    head, e1 = _quad(smooth, 0.0, 1.0, weight="alg", wvar=(1.0 - 2.0 * theta, 0.0),
                     epsrel=epsrel, epsabs=0)
    osc, e2 = _quad(lambda t: t ** (-2.0 * theta - 1.0), 1.0, np.inf, weight="cos", wvar=1.0)
    val = 2.0 * (head + 1.0 / (2.0 * theta) - osc)
    return val, 2.0 * (e1 + e2)


def one_minus_cos_closed(theta: float) -> float:
    return math.pi / (math.gamma(1.0 + 2.0 * theta) * math.sin(math.pi * theta))


def sphere_factor(h_spatial: Sequence[float], epsrel: float = EPSREL):
    """``int_{S^{d-1}} prod_j c_{H_j} |w_j|^{1-2H_j} dsigma(w)`` for ``d <= 2``; ``(value, abserr)``."""
    hs = tuple(h_spatial)
    if len(hs) == 1:
        return 2.0 * c_hurst(hs[0]), 0.0
    if len(hs) == 2:
        e1, e2 = 1.0 - 2.0 * hs[0], 1.0 - 2.0 * hs[1]

        def g(phi):
            # |cos|^{e1} |sin|^{e2} with the endpoint powers moved into the weight
            c = math.cos(phi) / (0.5 * math.pi - phi) if phi < 0.5 * math.pi else 1.0
            s = math.sin(phi) / phi if phi > 0 else 1.0
            return c ** e1 * s ** e2

        v, e = _quad(g, 0.0, 0.5 * math.pi, weight="alg", wvar=(e2, e1), epsrel=epsrel, epsabs=0)
        pref = 4.0 * c_hurst(hs[0]) * c_hurst(hs[1])
        return pref * v, pref * e
    raise UnsupportedParameterError("spatial integrals are implemented for d <= 2")


def sphere_factor_closed(h_spatial: Sequence[float]) -> float:
    hs = tuple(h_spatial)
    if len(hs) == 1:
        return 2.0 * c_hurst(hs[0])
    if len(hs) == 2:
        return 2.0 * c_hurst(hs[0]) * c_hurst(hs[1]) * special.beta(1.0 - hs[0], 1.0 - hs[1])
    raise UnsupportedParameterError("closed form implemented for d <= 2")


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantsReport:
    c1: float
    c2: Optional[float]
    c31: Optional[float]
    c_time: Optional[float]
    big_c1: Optional[float]
    errors: dict = field(default_factory=dict)
    params_digest: str = ""

    def to_dict(self) -> dict:
        out = asdict(self)
        out["C1"] = out.pop("big_c1")
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantsReport":
        d = dict(d)
        d["big_c1"] = d.pop("C1")
        return cls(**d)


def _radial(p: ModelParams, extra_power: float, cos_phi: float):
    """``int_0^inf r^{2d-2H-1+extra}/(1 + 2 r^a cos_phi + r^{2a}) dr`` via ``x = r^a``."""
    s = 2 * p.d - 2 * p.h_sum + extra_power
    v, e = mellin_rational(s / p.alpha, cos_phi)
    return v / p.alpha, e / p.alpha


def constant_c1(p: ModelParams, with_error: bool = False):
    """``int_{R^d} mu(xi)/(1 + |xi|^{2 alpha}) d xi``; needs ``alpha > d - H``."""
    if not p.alpha > p.d - p.h_sum:
        raise DivergentIntegralError(
            f"c1 diverges: requires alpha > d - H ({p.alpha} <= {p.d - p.h_sum})",
            condition="alpha > d - H")
    sph, es = sphere_factor(p.h_spatial)
    rad, er = _radial(p, 0.0, 0.0)
    return (sph * rad, sph * er + rad * es) if with_error else sph * rad


def constant_c2(p: ModelParams, with_error: bool = False):
    """``int_{R^d} |xi|^2 mu(xi)/(1 + |xi|^{2 alpha}) d xi``; needs ``alpha > d - H + 1``."""
    if not p.alpha > p.d - p.h_sum + 1:
        raise DivergentIntegralError(
            f"c2 diverges: requires alpha > d - H + 1 ({p.alpha} <= {p.d - p.h_sum + 1})",
            condition="alpha > d - H + 1")
    sph, es = sphere_factor(p.h_spatial)
    rad, er = _radial(p, 2.0, 0.0)
    return (sph * rad, sph * er + rad * es) if with_error else sph * rad


def constant_c_time(p: ModelParams, with_error: bool = False):
    """``int_{R^d} mu(eta)/(1 + 2|eta|^alpha cos(pi beta/2) + |eta|^{2 alpha}) d eta``."""
    if not p.alpha > p.d - p.h_sum:
        raise DivergentIntegralError(
            f"temporal constant diverges: requires alpha > d - H ({p.alpha} <= {p.d - p.h_sum})",
            condition="alpha > d - H")
    sph, es = sphere_factor(p.h_spatial)
    rad, er = _radial(p, 0.0, math.cos(0.5 * math.pi * p.beta))
    return (sph * rad, sph * er + rad * es) if with_error else sph * rad


def constant_c31(p: ModelParams, with_error: bool = False):
    """``int_R |tau|^{1-2gamma-2H0}/(|tau|^{2beta} + 2|tau|^beta cos(pi beta/2) + 1) d tau``."""
    q = 1.0 - 2.0 * p.gamma_rl - 2.0 * p.h0
    if not q > -1:
        raise DivergentIntegralError("c31 diverges at the origin: requires gamma < 1 - H0",
                                     condition="gamma < 1 - H0")
    if not 2 * p.beta + 2 * p.gamma_rl + 2 * p.h0 - 1 > 1:
        raise DivergentIntegralError("c31 diverges at infinity: requires 2beta + 2gamma + 2H0 > 2",
                                     condition="2beta + 2gamma + 2H0 - 1 > 1")
    v, e = mellin_rational((q + 1.0) / p.beta, math.cos(0.5 * math.pi * p.beta))
    v, e = 2.0 * v / p.beta, 2.0 * e / p.beta
    return (v, e) if with_error else v


def constant_big_c1(p: ModelParams, with_error: bool = False):
    """Temporal variogram constant: ``2 C_{H0} int_R (1-cos)/|t|^{2 theta1 + 1} * c_time``."""
    th1 = derive_exponents(p).theta1
    if not 0 < th1 < 1:
        raise DivergentIntegralError(f"temporal variogram requires 0 < theta1 < 1, got {th1}",
                                     condition="0 < theta1 < 1")
    ic, ei = one_minus_cos_integral(th1)
    ct, ec = constant_c_time(p, with_error=True)
    ch0 = c_hurst(p.h0)
    val = 2.0 * ch0 * ic * ct
    err = 2.0 * ch0 * (ei * ct + ic * ec)
    return (val, err) if with_error else val


def compute_constants(p: ModelParams) -> ConstantsReport:
    """All constants; optional ones are ``None`` when their integral diverges.

    ``c1`` is mandatory and its divergence is raised.
    """
    errs = {}
    c1, errs["c1"] = constant_c1(p, with_error=True)
    out = {}
    for name, fn in (("c2", constant_c2), ("c31", constant_c31), ("c_time", constant_c_time),
                     ("big_c1", constant_big_c1)):
        try:
            out[name], errs[name] = fn(p, with_error=True)
        except DivergentIntegralError:
            out[name] = None
    return ConstantsReport(c1=c1, errors=errs, params_digest=p.digest(), **out)


# ---------------------------------------------------------------------------
# variograms of U
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariogramValue:
    dt: float
    dx: tuple
    value: float
    method: str
    est_error: float


def _require_regular(p: ModelParams):
    ex = derive_exponents(p)
    if not (0 < ex.theta1 < 1 and 0 < ex.theta2 < 1):
        raise DivergentIntegralError(
            f"variogram requires 0 < theta1, theta2 < 1 (got {ex.theta1:.6g}, {ex.theta2:.6g})",
            condition="0 < theta < 1")
    if not p.gamma_rl < 1.0 - p.h0:
        raise DivergentIntegralError("variogram requires gamma < 1 - H0", condition="gamma < 1 - H0")
    return ex


def _as_vec(dx, d):
    v = np.atleast_1d(np.asarray(dx, dtype=float))
    if v.shape != (d,):
        raise DomainError(f"spatial lag must have {d} coordinates, got {v.shape}")
    return v


def variogram_time(dt: float, p: ModelParams, consts: ConstantsReport) -> VariogramValue:
    th1 = derive_exponents(p).theta1
    val = consts.big_c1 * abs(dt) ** (2 * th1)
    err = consts.errors.get("big_c1", 0.0) * abs(dt) ** (2 * th1)
    return VariogramValue(float(dt), (0.0,) * p.d, float(val), "closed_temporal", float(err))


def direction_factor(p: ModelParams, direction: Sequence[float], epsrel: float = 1e-10,
                     theta: Optional[float] = None):
    """``D(w) = int_S mu(v) int_0^inf (1 - cos(r <w, v>))/r^{2 theta + 1} dr dsigma(v)``.

    ``theta`` defaults to ``theta2``.  The inner integral equals
    ``|<w, v>|^{2 theta} J`` with ``J = int_0^inf (1 - cos r)/r^{2 theta + 1} dr``.
    Returns ``(value, abserr)``.
    """
    th2 = derive_exponents(p).theta2 if theta is None else theta
    jv, je = one_minus_cos_integral(th2)
    jv, je = 0.5 * jv, 0.5 * je
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    if p.d == 1:
        return 2.0 * c_hurst(p.h_spatial[0]) * jv, 2.0 * c_hurst(p.h_spatial[0]) * je
    if p.d != 2:
        raise UnsupportedParameterError("directional factor implemented for d <= 2")
    e1, e2 = 1.0 - 2.0 * p.h_spatial[0], 1.0 - 2.0 * p.h_spatial[1]
    psi = math.atan2(w[1], w[0])

    def g(phi):
        return (abs(math.cos(phi)) ** e1 * abs(math.sin(phi)) ** e2
                * abs(math.cos(phi - psi)) ** (2 * th2))

    # split at the axes and at the zero of cos(phi - psi)
    brk = sorted({0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi, 2 * math.pi,
                  (psi + 0.5 * math.pi) % math.pi, (psi + 0.5 * math.pi) % math.pi + math.pi})
    tot, err = 0.0, 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        if b - a < 1e-14:
            continue
        v, e = _quad(g, a, b, epsrel=epsrel, epsabs=0)
        tot += v
        err += e
    pref = c_hurst(p.h_spatial[0]) * c_hurst(p.h_spatial[1])
    return pref * tot * jv, pref * (err * jv + tot * je)


def variogram_space(dx, p: ModelParams, consts: ConstantsReport) -> VariogramValue:
    ex = _require_regular(p)
    v = _as_vec(dx, p.d)
    r = float(np.linalg.norm(v))
    if r == 0:
        return VariogramValue(0.0, tuple(v), 0.0, "quadrature_spatial", 0.0)
    dfac, derr = direction_factor(p, v)
    pref = 2.0 * c_hurst(p.h0) * consts.c31 * r ** (2 * ex.theta2)
    err = pref * derr + 2.0 * c_hurst(p.h0) * consts.errors.get("c31", 0.0) * r ** (2 * ex.theta2) * dfac
    return VariogramValue(0.0, tuple(v), float(pref * dfac), "quadrature_spatial", float(err))


class _SpaceTimeKernel:
    """Iterated quadrature of the space-time variogram along one spatial direction.

    Writing ``xi = tau^{b/a} x`` inside the spatial integral,

        W(dt, k) = 2 [T1(k) + T2(dt, k)],
        T1(k)     = int_0^inf tau^{-2 theta1 - 1} B(k tau^{b/a}) d tau,
        T2(dt, k) = int_0^inf tau^{-2 theta1 - 1} (1 - cos dt tau) C(k tau^{b/a}) d tau,

    with ``B(kk) = int_0^inf (1 - cos kk x) x^e R(x) dx``,
    ``C(kk) = int_0^inf cos(kk x) x^e R(x) dx`` and
    ``R(x) = 1/(1 + 2 x^a cos(pi b/2) + x^{2a})``.  ``e`` is the radial power of
    the noise density (``1 - 2H`` in d=1, ``2 - 2H`` plus the polar Jacobian in d=2).
    """

    def __init__(self, p: ModelParams, epsrel: float):
        self.p = p
        self.e = p.d - 2.0 * p.h_sum + (p.d - 1)
        self.cphi = math.cos(0.5 * math.pi * p.beta)
        self.th1 = derive_exponents(p).theta1
        self.ratio = p.beta / p.alpha
        self.epsrel = epsrel
        self.inner_rel = min(1e-10, epsrel * 1e-3)
        self.worst = (0.0, None)
        self._a0 = None
        # absolute floor for the inner integrals, far below what the outer rules resolve
        self._abs = 1e-3 * self.inner_rel * self.a0()[0]
        # B and C only depend on kk, and in T1 the nodes do not move with k,
        # so a kernel shared across many lags reuses most inner integrals
        self._b_memo: dict = {}
        self._c_memo: dict = {}

    def r(self, x):
        """``R(x)`` without overflow."""
        if x <= 0:
            return 1.0
        y = self.p.alpha * math.log(x)
        if y > 0:
            return math.exp(-2.0 * y) / (1.0 + 2.0 * self.cphi * math.exp(-y) + math.exp(-2.0 * y))
        ey = math.exp(y)
        return 1.0 / (1.0 + 2.0 * self.cphi * ey + ey * ey)

    def _xr(self, x):
        return x ** self.e * self.r(x) if x > 0 else 0.0

    def _note(self, err, where):
        if err > self.worst[0]:
            self.worst = (err, where)

    def _log_tail(self, a):
        """``int_a^inf x^e R(x) dx`` in the variable ``log x``."""
        e = self.e
        g = lambda v: math.exp(v * (e + 1.0)) * self.r(math.exp(v)) if v < 700 else 0.0
        return _quad(g, math.log(a), np.inf, epsrel=self.inner_rel, epsabs=0)

    def _log_mid(self, w, b):
        """``int_1^b w(x) x^e R(x) dx`` in the variable ``log x``."""
        e = self.e
        g = lambda v: w(math.exp(v)) * math.exp(v * (e + 1.0)) * self.r(math.exp(v))
        return _quad(g, 0.0, math.log(b), epsrel=self.inner_rel, epsabs=0)

    def a0(self):
        if self._a0 is None:
            rel = self.inner_rel
            v, er = _quad(self.r, 0.0, 1.0, weight="alg", wvar=(self.e, 0.0), epsrel=rel, epsabs=0)
            v2, er2 = self._log_tail(1.0)
            self._a0 = (v + v2, er + er2)
        return self._a0

    def c(self, kk):
        """``C(kk)``; ``C(0) = A0``."""
        val = self._c_memo.get(kk)
        if val is None:
            val = self._c_memo[kk] = self._c(kk)
        return val

    def _c(self, kk):
        if kk == 0:
            return self.a0()[0]
        if kk == math.inf:
            return 0.0
        e, rel = self.e, self.inner_rel
        if kk <= 1.0:
            cut = 1.0 / kk
            v, er = _quad(lambda x: math.cos(kk * x) * self.r(x), 0.0, 1.0, weight="alg",
                          wvar=(e, 0.0), epsrel=rel, epsabs=self._abs)
            v2, er2 = self._log_mid(lambda x: math.cos(kk * x), cut)
            v3, er3 = _quad(self._xr, cut, np.inf, weight="cos", wvar=kk)
            self._note(er + er2 + er3, ("C", kk))
            return v + v2 + v3
        # y = kk x: the oscillation has unit frequency and R varies on the scale kk
        rr = lambda y: self.r(y / kk)
        scale = kk ** (-e - 1.0)
        v, er = _quad(lambda y: math.cos(y) * rr(y), 0.0, 1.0, weight="alg", wvar=(e, 0.0),
                      epsrel=rel, epsabs=self._abs / scale)
        v3, er3 = _quad(lambda y: y ** e * rr(y), 1.0, np.inf, weight="cos", wvar=1.0)
        self._note(scale * (er + er3), ("C", kk))
        return scale * (v + v3)

    def b(self, kk):
        """``B(kk) = A0 - C(kk)``, summed directly where that difference would cancel."""
        val = self._b_memo.get(kk)
        if val is None:
            val = self._b_memo[kk] = self._b(kk)
        return val

    def _b(self, kk):
        if kk == 0:
            return 0.0
        if kk == math.inf:
            return self.a0()[0]
        if kk > 1.0:
            return self.a0()[0] - self.c(kk)
        e, rel = self.e, self.inner_rel
        cut = 1.0 / kk

        def omc(x):
            s = math.sin(0.5 * kk * x)
            return 2.0 * s * s

        v, er = _quad(lambda x: omc(x) * self.r(x), 0.0, 1.0, weight="alg", wvar=(e, 0.0),
                      epsrel=rel, epsabs=0)
        v2, er2 = self._log_mid(omc, cut)
        v3, er3 = self._log_tail(cut)
        v4, er4 = _quad(self._xr, cut, np.inf, weight="cos", wvar=kk)
        self._note(er + er2 + er3 + er4, ("B", kk))
        return v + v2 + v3 - v4

    def _kk(self, lk):
        return math.exp(lk) if lk < 700 else math.inf

    def t1(self, k, bfun=None):
        if k == 0:
            return 0.0, 0.0
        bfun = bfun or self.b
        th1, ratio = self.th1, self.ratio
        # log variable centred where k tau^{b/a} = 1
        v0 = -math.log(k) / ratio

        def g(v):
            lw = -2.0 * th1 * (v + v0)
            return math.exp(lw) * bfun(self._kk(ratio * v)) if lw < 700 else 0.0

        rel = self.epsrel * 0.1
        a, ea = _quad(g, -np.inf, 0.0, epsrel=rel, epsabs=0)
        b, eb = _quad(g, 0.0, np.inf, epsrel=rel, epsabs=0)
        return a + b, ea + eb

    def t2(self, dt, k, cfun=None, floor=0.0):
        """``floor`` is an absolute error target (``T1`` sets the scale of the total)."""
        if dt == 0:
            return 0.0, 0.0
        cfun = cfun or self.c
        th1, ratio = self.th1, self.ratio
        rel = self.epsrel * 0.1
        lk = math.log(k) if k > 0 else None
        tau0 = 4.0 * math.pi / dt
        lt0 = math.log(tau0)

        def cc_log(lt):
            return cfun(self._kk(lk + ratio * lt)) if lk is not None else cfun(0.0)

        def low(v):
            lt = lt0 + v
            if lt < -300:
                return 0.0
            s = math.sin(0.5 * dt * math.exp(lt))
            return 2.0 * s * s * math.exp(-2.0 * th1 * lt) * cc_log(lt)

        def plain(v):
            lt = lt0 + v
            return math.exp(-2.0 * th1 * lt) * cc_log(lt) if lt < 700 else 0.0

        a, ea = _quad(low, -np.inf, 0.0, epsrel=rel, epsabs=floor)
        b, eb = _quad(plain, 0.0, np.inf, epsrel=rel, epsabs=floor)
        c, ec = _quad(lambda t: t ** (-2.0 * th1 - 1.0) * cc_log(math.log(t)), tau0, np.inf,
                      weight="cos", wvar=dt)
        return a + b - c, ea + eb + ec

    def w(self, dt, k, bfun=None, cfun=None):
        t1, e1 = self.t1(abs(k), bfun)
        t2, e2 = self.t2(abs(dt), abs(k), cfun, floor=0.01 * self.epsrel * t1)
        return 2.0 * (t1 + t2), 2.0 * (e1 + e2)


def variogram_full(dt: float, dx, p: ModelParams, epsrel: float = 1e-6,
                   kernel: Optional[_SpaceTimeKernel] = None) -> VariogramValue:
    """Increment variance ``E|U(t+dt, x+dx) - U(t, x)|^2`` by direct spectral quadrature.

    ``kernel`` lets repeated calls for the same parameters share inner integrals.
    """
    _require_regular(p)
    v = _as_vec(dx, p.d)
    if p.d > 2:
        raise UnsupportedParameterError("variogram_full is implemented for d <= 2")
    if dt == 0 and not np.any(v):
        return VariogramValue(0.0, tuple(v), 0.0, "quadrature_full", 0.0)
    fv = _SpaceTimeKernel(p, epsrel) if kernel is None else kernel
    ch0 = c_hurst(p.h0)
    if p.d == 1:
        wv, we = fv.w(dt, v[0])
        pref = 2.0 * ch0 * 2.0 * c_hurst(p.h_spatial[0])
        val, err = pref * wv, pref * we
    else:
        r = float(np.linalg.norm(v))
        psi = math.atan2(v[1], v[0]) if r > 0 else 0.0
        e1, e2 = 1.0 - 2.0 * p.h_spatial[0], 1.0 - 2.0 * p.h_spatial[1]
        wcache = {}

        def wk(k):
            key = round(k, 14)
            if key not in wcache:
                wcache[key] = fv.w(dt, k)[0]
            return wcache[key]

        def g(phi):
            return (abs(math.cos(phi)) ** e1 * abs(math.sin(phi)) ** e2
                    * wk(r * abs(math.cos(phi - psi))))

        # the integrand has period pi; integrate over [0, pi] and double
        brk = sorted({0.0, 0.5 * math.pi, math.pi,
                      (psi + 0.5 * math.pi) % math.pi})
        tot, err = 0.0, 0.0
        for a, b in zip(brk[:-1], brk[1:]):
            if b - a < 1e-14:
                continue
            vv, ee = _quad(g, a, b, epsrel=max(epsrel, 1e-6), epsabs=0, limit=50)
            tot += vv
            err += ee
        pref = 2.0 * ch0 * c_hurst(p.h_spatial[0]) * c_hurst(p.h_spatial[1]) * 2.0
        val, err = pref * tot, pref * err
    if not np.isfinite(val) or err > max(1e-3, 100 * epsrel) * abs(val):
        raise QuadratureError(f"variogram quadrature error {err:.3g} too large for value {val:.6g}",
                              worst=fv.worst)
    return VariogramValue(float(dt), tuple(v), float(val), "quadrature_full", float(err))


def she_variogram_closed(dt: float, dx: float) -> float:
    """Closed form of the variogram for the heat equation with space-time white noise."""
    dt, dx = abs(dt), abs(dx)
    if dt == 0:
        return 0.5 * dx
    return (2.0 * math.sqrt(math.pi * dt) * math.exp(-dx * dx / (4.0 * dt))
            + math.pi * dx * math.erf(dx / (2.0 * math.sqrt(dt)))) / (2.0 * math.pi)


class VariogramTable:
    """Interpolated space-time variogram for d = 1.

    The exact scaling ``V(l^{1/theta1} dt, l^{1/theta2} dx) = l^2 V(dt, dx)``
    reduces ``V`` to two one-variable profiles,

        V = |dt|^{2 theta1} F1(y),  y = |dx| / |dt|^{theta1/theta2} <= 1,
        V = |dx|^{2 theta2} F2(w),  w = |dt| / |dx|^{theta2/theta1} <= 1,

    tabulated by :func:`variogram_full` and interpolated with cubic splines in
    ``v = log z + z / knee``: logarithmic for small lags, where the profile
    approaches its value at 0 like a power, and linear near the chart seam.
    Nodes run slightly past the seam so the spline ends do not touch the
    charts.  Below the first node the profile is continued by a power law
    towards its exactly known value at 0.
    """

    knee = 0.2
    top = 1.5

    def __init__(self, p: ModelParams, consts: ConstantsReport, n_nodes: int = 56,
                 log_min: float = -14.0, epsrel: float = 1e-7, values=None):
        if p.d != 1:
            raise UnsupportedParameterError("variogram table is implemented for d = 1")
        ex = _require_regular(p)
        self.p = p
        self.th1, self.th2 = ex.theta1, ex.theta2
        self.v = np.linspace(log_min + math.exp(log_min) / self.knee,
                             math.log(self.top) + self.top / self.knee, n_nodes)
        self.nodes = np.array([self._from_v(a) for a in self.v])
        self.z_min = float(self.nodes[0])
        if values is None:
            f1_0 = float(consts.big_c1)
            f2_0 = variogram_space([1.0], p, consts).value
            fv = _SpaceTimeKernel(p, epsrel)
            f1 = np.array([variogram_full(1.0, [y], p, epsrel, fv).value for y in self.nodes])
            f2 = np.array([variogram_full(w, [1.0], p, epsrel, fv).value for w in self.nodes])
        else:
            f1_0, f2_0, f1, f2 = values
        self.f1_0, self.f2_0 = float(f1_0), float(f2_0)
        self.f1, self.f2 = np.asarray(f1, dtype=float), np.asarray(f2, dtype=float)
        self._s1 = interpolate.CubicSpline(self.v, self.f1)
        self._s2 = interpolate.CubicSpline(self.v, self.f2)
        self._k1 = self._edge_power(self.f1, self.f1_0)
        self._k2 = self._edge_power(self.f2, self.f2_0)

    def _from_v(self, v):
        return optimize.brentq(lambda z: math.log(z) + z / self.knee - v, 1e-300, 10.0,
                               xtol=1e-300, rtol=1e-15)

    def _to_v(self, z):
        return np.log(z) + z / self.knee

    def _edge_power(self, f, f0):
        d0, d1 = f[0] - f0, f[1] - f0
        if d0 == 0 or d1 == 0 or d0 * d1 < 0:
            return 2.0
        return float(np.log(d1 / d0) / np.log(self.nodes[1] / self.nodes[0]))

    def _profile(self, z, spline, fvals, f0, kpow):
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        lo = z < self.z_min
        zz = np.where(lo, 1.0, z)
        out[~lo] = spline(self._to_v(zz[~lo]))
        out[lo] = f0 + (fvals[0] - f0) * (z[lo] / self.z_min) ** kpow
        return out

    def __call__(self, dt, dx):
        dt = np.abs(np.asarray(dt, dtype=float))
        dx = np.abs(np.asarray(dx, dtype=float))
        dt, dx = np.broadcast_arrays(dt, dx)
        out = np.zeros(dt.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = dx / dt ** (self.th1 / self.th2)
            chart1 = (dt > 0) & (y <= 1.0)
            chart2 = (dx > 0) & ~chart1
            if chart1.any():
                out[chart1] = dt[chart1] ** (2 * self.th1) * self._profile(
                    y[chart1], self._s1, self.f1, self.f1_0, self._k1)
            if chart2.any():
                w = dt[chart2] / dx[chart2] ** (self.th2 / self.th1)
                out[chart2] = dx[chart2] ** (2 * self.th2) * self._profile(
                    w, self._s2, self.f2, self.f2_0, self._k2)
        return out if out.ndim else float(out)

    def save(self, path):
        np.savez(path, v=self.v, f1=self.f1, f2=self.f2, f0=np.array([self.f1_0, self.f2_0]))

    @classmethod
    def load(cls, path, p: ModelParams):
        with np.load(path) as z:
            v = z["v"]
            tab = cls(p, None, n_nodes=len(v), log_min=_log_min_from(v[0], cls.knee),
                      values=(z["f0"][0], z["f0"][1], z["f1"], z["f2"]))
        return tab


def _log_min_from(v0, knee):
    return optimize.brentq(lambda a: a + math.exp(a) / knee - v0, -700.0, 5.0, xtol=1e-14)


_TABLES: dict = {}


def _cache_dir() -> Optional[str]:
    path = os.environ.get("SFDE_CACHE_DIR", os.path.join(os.path.expanduser("~"), ".cache", "sfde"))
    if path.lower() in ("", "0", "off", "none"):
        return None
    return path


def variogram_table(p: ModelParams, consts: Optional[ConstantsReport] = None) -> VariogramTable:
    """Cached :class:`VariogramTable` for ``p`` (in memory, and on disk under ``SFDE_CACHE_DIR``)."""
    key = p.digest()
    if key in _TABLES:
        return _TABLES[key]
    cdir = _cache_dir()
    fname = os.path.join(cdir, f"variogram-{key}-v1.npz") if cdir else None
    tab = None
    if fname and os.path.exists(fname):
        try:
            tab = VariogramTable.load(fname, p)
        except (OSError, ValueError, KeyError):
            tab = None
    if tab is None:
        tab = VariogramTable(p, consts or compute_constants(p))
        if fname:
            try:
                os.makedirs(cdir, exist_ok=True)
                tmp = fname + f".{os.getpid()}.tmp.npz"
                tab.save(tmp)
                os.replace(tmp, fname)
            except OSError:
                pass
    _TABLES[key] = tab
    return tab


def _variogram_callable(p, consts, variogram):
    if variogram is not None:
        return variogram
    if p.d == 1:
        return variogram_table(p, consts)

    def direct(dt, dx):
        dt = np.atleast_1d(np.asarray(dt, dtype=float))
        dx = np.asarray(dx, dtype=float).reshape(len(dt), p.d)
        return np.array([variogram_full(a, b, p).value for a, b in zip(dt, dx)])
    return direct


def _split_points(pts, d):
    pts = np.asarray(pts, dtype=float)
    pts = pts.reshape(-1, 1 + d)
    return pts[:, 0], pts[:, 1:]


def covariance_matrix_U(points, p: ModelParams, consts: ConstantsReport, variogram=None):
    """Covariance of ``U`` at ``points`` (rows ``(t, x_1..x_d)``), with ``U(0, 0) = 0``."""
    vg = _variogram_callable(p, consts, variogram)
    t, x = _split_points(points, p.d)
    n = len(t)
    if p.d == 1:
        g0 = vg(t, x[:, 0])
        gd = vg(t[:, None] - t[None, :], x[:, 0][:, None] - x[:, 0][None, :])
    else:
        g0 = vg(t, x)
        iu = np.triu_indices(n, 1)
        gd = np.zeros((n, n))
        vals = vg(t[iu[0]] - t[iu[1]], x[iu[0]] - x[iu[1]])
        gd[iu] = vals
        gd = gd + gd.T
    return 0.5 * (g0[:, None] + g0[None, :] - gd)


def cov_from_variogram(pt1, pt2, p: ModelParams, consts: ConstantsReport, variogram=None) -> float:
    """``(V(pt1) + V(pt2) - V(pt1 - pt2)) / 2``."""
    k = covariance_matrix_U(np.array([pt1, pt2], dtype=float), p, consts, variogram)
    return float(k[0, 1])


def jittered_cholesky(k, max_escalations=3):
    """Cholesky factor of ``k + ridge I``; returns ``(L, ridge)``.

    The ridge starts at ``1e-10 trace / n`` and grows tenfold up to
    ``max_escalations`` times.
    """
    n = k.shape[0]
    tr = float(np.trace(k))
    ridge = 1e-10 * tr / n if tr > 0 else 1e-300
    for _ in range(max_escalations + 1):
        try:
            return np.linalg.cholesky(k + ridge * np.eye(n)), ridge
        except np.linalg.LinAlgError:
            ridge *= 10.0
    raise CovarianceError("covariance matrix is not positive definite after jitter escalation",
                          ridge=ridge)


def conditional_variance(target, conditioners, p: ModelParams, consts: ConstantsReport,
                         variogram=None) -> float:
    """``Var(U(target) | U(conditioners))`` by a jittered Schur complement."""
    pts = [tuple(np.atleast_1d(target).astype(float))]
    pts += [tuple(np.atleast_1d(c).astype(float)) for c in conditioners]
    k = covariance_matrix_U(np.array(pts), p, consts, variogram)
    if len(pts) == 1:
        return float(k[0, 0])
    kcc = k[1:, 1:]
    kc = k[0, 1:]
    try:
        chol, _ = jittered_cholesky(kcc)
    except CovarianceError as exc:
        raise SingularConditioningError("conditioning covariance is singular") from exc
    w = np.linalg.solve(chol, kc)
    return float(max(k[0, 0] - w @ w, 0.0))


def anisotropic_distance(a, b, p: ModelParams) -> float:
    """``|t-s|^{theta1} + sum_i |x_i - y_i|^{theta2}``."""
    ex = derive_exponents(p)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return float(abs(a[0] - b[0]) ** ex.theta1 + np.sum(np.abs(a[1:] - b[1:]) ** ex.theta2))


@dataclass(frozen=True)
class SlndReport:
    ratios: np.ndarray
    distances: np.ndarray
    variances: np.ndarray
    n_conditioners: np.ndarray

    @property
    def c_fit(self) -> float:
        """Largest constant with ``variance >= c_fit * distance^2`` on every probe."""
        return float(np.min(self.ratios))

    @property
    def holds(self) -> bool:
        return self.c_fit > 0


def slnd_probe(p: ModelParams, consts: ConstantsReport, n_configs: int = 50,
               max_conditioners: int = 5, seed: int = 0, t_range=(0.05, 1.0),
               x_range=(-1.0, 1.0), variogram=None) -> SlndReport:
    """Conditional variances of ``U`` at random targets against random conditioners.

    Each ratio is ``Var(U(target) | U(conditioners)) / min_k rho(target, k)^2``
    with the anisotropic distance ``rho``.
    """
    rng = np.random.default_rng(seed)
    ratios, dists, vars_, ns = [], [], [], []
    for _ in range(n_configs):
        n = int(rng.integers(1, max_conditioners + 1))
        pts = np.column_stack([rng.uniform(*t_range, n + 1),
                               rng.uniform(*x_range, (n + 1, p.d))])
        target, conds = pts[0], pts[1:]
        v = conditional_variance(target, conds, p, consts, variogram)
        r = min(anisotropic_distance(target, c, p) for c in conds)
        ratios.append(v / r ** 2)
        dists.append(r)
        vars_.append(v)
        ns.append(n)
    return SlndReport(np.array(ratios), np.array(dists), np.array(vars_), np.array(ns))


# ---------------------------------------------------------------------------
# the correction field V = U - u
# ---------------------------------------------------------------------------

def hardy_littlewood_sharp(h0: float) -> float:
    """Smallest ``K`` with ``a_{H0} int int f(r) f(s) |r-s|^{2H0-2} <= K ||f||_{1/H0}^2``.

    ``a_{H0} = H0 (2H0 - 1)`` times the sharp one-dimensional Hardy-Littlewood-Sobolev
    constant for the kernel ``|r-s|^{-lam}``, ``lam = 2 - 2H0``.  Tends to 1 as
    ``H0 -> 1/2``, where the left side is ``||f||_2^2``.
    """
    if h0 == 0.5:
        return 1.0
    if not 0.5 < h0 < 1:
        raise DomainError(f"H0 must lie in [1/2, 1), got {h0}")
    lam = 2.0 - 2.0 * h0
    lieb = math.pi ** (lam - 0.5) * math.gamma(0.5 * (1 - lam)) / math.gamma(1 - 0.5 * lam)
    return h0 * (2 * h0 - 1) * lieb


def v_increment_bound(t: float, s: float, x, y, p: ModelParams, consts: ConstantsReport) -> float:
    """Explicit upper bound for ``E|V(t,x) - V(s,y)|^2``.

    Temporal increments (``x == y``) need ``0 < s < t``; spatial increments
    (``t == s``) need ``|x - y| <= 1/e``.  When both coordinates move the two
    bounds are combined through ``|a + b|^2 <= 2|a|^2 + 2|b|^2``.  The Gaussian
    time integral is bounded with :func:`hardy_littlewood_sharp` and the
    Mittag-Leffler factors with the fitted constant of
    :func:`sfde.mlf.fit_bound_constant`.
    """
    x = _as_vec(x, p.d)
    y = _as_vec(y, p.d)
    same_x = bool(np.all(x == y))
    if t == s and same_x:
        return 0.0
    if same_x:
        return _v_bound_time(t, s, p, consts)
    if t == s:
        return _v_bound_space(t, x - y, p, consts)
    return 2.0 * (_v_bound_time(max(t, s), min(t, s), p, consts)
                  + _v_bound_space(min(t, s), x - y, p, consts))


def v_time_metric_constant(p: ModelParams, consts: ConstantsReport):
    """``(c, lam)`` with ``E|V(t,x) - V(s,x)|^2 <= c^2 (t-s)^2 / s^{2 lam}`` for ``0 < s < t <= 1``.

    ``lam = 1 - theta1`` when ``beta + gamma <= 2``; otherwise the factor
    ``(t/s)^{beta+gamma-2}`` is absorbed using ``t <= 1``.
    """
    ex = _require_regular(p)
    h0, c = p.h0, p.beta + p.gamma_rl
    c_hat = fit_bound_constant(p.beta, c - 1.0).c_hat
    q = 2 * c - 4 - p.beta * (2 * p.d - 2 * p.h_sum) / p.alpha
    c_sq = hardy_littlewood_sharp(h0) * c_hat ** 2 * consts.c1 * _time_power_integral(q, h0)
    if c <= 2:
        lam = 1.0 - ex.theta1
    else:
        lam = -h0 + p.beta / p.alpha * (p.d - p.h_sum)
    return math.sqrt(c_sq), lam


def _time_power_integral(q, h0):
    """``(int_0^inf (1 + r)^{q/(2H0)} dr)^{2H0}``; finite iff ``q < -2H0``."""
    k = -q / (2 * h0) - 1.0
    if k <= 0:
        raise DomainError("time integral in the V bound diverges", exponent=q)
    return k ** (-2 * h0)


def _v_bound_time(t, s, p, consts):
    if not 0 < s < t:
        raise DomainError(f"temporal V bound needs 0 < s < t, got s={s}, t={t}")
    ex = _require_regular(p)
    h0, c = p.h0, p.beta + p.gamma_rl
    c_hat = fit_bound_constant(p.beta, c - 1.0).c_hat
    q = 2 * c - 4 - p.beta * (2 * p.d - 2 * p.h_sum) / p.alpha
    growth = max(1.0, (t / s) ** (2 * (c - 2)))
    val = (hardy_littlewood_sharp(h0) * c_hat ** 2 * consts.c1 * growth
           * s ** (2 * ex.theta1 - 2) * _time_power_integral(q, h0))
    return float(val * (t - s) ** 2)


def _v_bound_space(t, h, p, consts):
    if t <= 0:
        raise DomainError(f"spatial V bound needs t > 0, got {t}")
    r = float(np.linalg.norm(h))
    if r > math.exp(-1) * (1 + 1e-12):
        raise DomainError(f"spatial V bound needs |x-y| <= 1/e, got {r}")
    _require_regular(p)
    h0, c = p.h0, p.beta + p.gamma_rl
    c_hat = fit_bound_constant(p.beta, c).c_hat
    kappa = p.alpha - p.d + p.h_sum
    k_hl = hardy_littlewood_sharp(h0)
    if abs(kappa - 1.0) < 1e-12:
        sph, _ = sphere_factor(p.h_spatial)
        d2 = p.d ** 2
        shape = (d2 + 3) / 6.0 * r * r + 0.5 * d2 * r * r * math.log(1.0 / r)
        return float(2 * k_hl * c_hat ** 2 * t ** (2 * h0 + 2 * p.gamma_rl - 2)
                     * _time_power_integral(2 * p.gamma_rl - 2, h0) * sph * shape)
    if kappa < 1.0:
        dfac, _ = direction_factor(p, h / r, theta=kappa)
        return float(2 * k_hl * c_hat ** 2 * t ** (2 * h0 + 2 * p.gamma_rl - 2)
                     * _time_power_integral(2 * p.gamma_rl - 2, h0) * dfac * r ** (2 * kappa))
    if consts.c2 is None:
        raise DivergentIntegralError("c2 diverges")
    q = 2 * c - 2 - p.beta * (2 * p.d - 2 * p.h_sum + 2) / p.alpha
    return float(k_hl * c_hat ** 2 * consts.c2 * t ** (q + 2 * h0)
                 * _time_power_integral(q, h0) * r * r)


def _half_line_rule(m, octaves=60):
    """15-point Kronrod panels ``[0, m], [m, 2m], [2m, 4m], ...``."""
    edges = np.concatenate([[0.0], m * 2.0 ** np.arange(0, octaves + 1)])
    half = 0.5 * np.diff(edges)[:, None]
    nodes = (edges[:-1, None] + half * (1 + GK_NODES[None, :])).ravel()
    return nodes, (half * GK_WEIGHTS[None, :]).ravel(), (half * G_WEIGHTS[None, :]).ravel()


def _v_kernel(t, s, p):
    """``xi -> int_0^inf (phat(t+v) - phat(s+v))^2 dv`` (``phat(s+v)`` dropped when ``s`` is None)."""
    m = t if s is None else min(t, s)
    v, wk, wg = _half_line_rule(m)

    def kern(xi):
        lam = (np.atleast_1d(xi) ** p.alpha)[:, None]
        f = _phat(t + v[None, :], lam, p)
        if s is not None:
            f = f - _phat(s + v[None, :], lam, p)
        f2 = f * f
        k = f2 @ wk
        return k, np.abs(k - f2 @ wg) + f2[:, -1] * v[-1]
    return kern


def v_increment_variance(t: float, x, s: float, y, p: ModelParams, consts: ConstantsReport,
                         route: str = "dual") -> float:
    """``E|V(t,x) - V(s,y)|^2`` for white-in-time noise, with ``x == y`` or ``t == s``.

    ``route="dual"`` uses ``E|dU|^2 - E|du|^2``, valid because ``V`` only sees the
    noise before time 0 and ``u`` only the noise after it.  ``route="direct"``
    integrates ``int mu(xi) int_0^inf |phat(t+v) e^{-i<x,xi>} - phat(s+v) e^{-i<y,xi>}|^2``.
    """
    if p.h0 != 0.5:
        raise UnsupportedParameterError("V increments are computed for H0 = 1/2 only")
    x = _as_vec(x, p.d)
    y = _as_vec(y, p.d)
    same_x = bool(np.all(x == y))
    if not (same_x or t == s):
        raise UnsupportedParameterError("move either time or space, not both")
    if t <= 0 or s <= 0:
        raise DomainError("V increments need t, s > 0")
    h = x - y
    zero = np.zeros(p.d)
    if route == "dual":
        if same_x:
            du = (covariance_u(t, x, t, x, p) + covariance_u(s, x, s, x, p)
                  - 2 * covariance_u(t, x, s, x, p))
            return variogram_time(t - s, p, consts).value - du
        du = 2 * (covariance_u(t, x, t, x, p) - covariance_u(t, x, t, y, p))
        return variogram_space(h, p, consts).value - du
    if route == "direct":
        if same_x:
            val, _ = spatial_integral(_v_kernel(t, s, p), zero, p, t, s)
            return float(val)
        val, _ = spatial_integral(_v_kernel(t, None, p), h, p, t, t, increment=True)
        return float(2 * val)
    raise UnsupportedParameterError(f"unknown route {route!r}")


# ---------------------------------------------------------------------------
# Hardy-Littlewood inequality on step functions
# ---------------------------------------------------------------------------

def hl_double_integral(edges, values, h0: float) -> float:
    """``a_{H0} int int f(r) f(s) |r-s|^{2H0-2}`` for the step function ``f = values[i]`` on ``[edges[i], edges[i+1])``."""
    e = np.asarray(edges, dtype=float)
    v = np.asarray(values, dtype=float)
    if h0 == 0.5:
        return float(np.sum(v * v * np.diff(e)))
    kap = 2 * h0

    def g(z):
        return np.abs(z) ** kap / (kap * (kap - 1))

    a, b = e[:-1], e[1:]
    m = (g(b[:, None] - a[None, :]) + g(a[:, None] - b[None, :])
         - g(b[:, None] - b[None, :]) - g(a[:, None] - a[None, :]))
    return float(h0 * (2 * h0 - 1) * v @ m @ v)


def hl_norm_term(edges, values, h0: float) -> float:
    """``(int |f|^{1/H0})^{2 H0}``."""
    e = np.asarray(edges, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    return float(np.sum(v ** (1 / h0) * np.diff(e)) ** (2 * h0))


@dataclass(frozen=True)
class HardyLittlewoodReport:
    h0: float
    ratios: tuple
    fitted_constant: float
    sharp_constant: float

    @property
    def holds(self) -> bool:
        return self.fitted_constant <= self.sharp_constant * (1 + 1e-9)


def hardy_littlewood_check(h0: float, n_samples: int = 50, seed: int = 0,
                           max_pieces: int = 8) -> HardyLittlewoodReport:
    """Ratios double-integral / norm term over random step functions.

    The fitted constant is the largest observed ratio; it must not exceed the
    sharp constant.
    """
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_samples):
        k = int(rng.integers(1, max_pieces + 1))
        edges = np.sort(rng.uniform(-5.0, 5.0, k + 1))
        vals = rng.normal(size=k)
        if rng.random() < 0.5:
            vals = np.abs(vals)
        ratios.append(hl_double_integral(edges, vals, h0) / hl_norm_term(edges, vals, h0))
    return HardyLittlewoodReport(h0, tuple(ratios), float(max(ratios)), hardy_littlewood_sharp(h0))
