"""Covariance of the mild solution ``u`` started from zero at time 0.

For a spatial frequency ``xi`` with ``lam = |xi|^alpha`` the covariance factors as

    E[u(t,x) u(s,y)] = int mu(xi) cos(<xi, x - y>) K_{t,s}(|xi|) d xi,

and the temporal kernel ``K`` has two representations:

* time domain.  For ``H0 = 1/2`` it is ``int_0^min(t,s) phat(|t-s|+u) phat(u) du``;
  for ``H0 > 1/2`` it is ``a_{H0} int int phat(t-r1) phat(s-r2) |r1-r2|^{2H0-2}``,
  evaluated through the lag ``v = r1 - r2``.
* frequency domain.  ``2 C_{H0} Re int_0^inf tau^{1-2H0} e^{-i(t-s)tau} G_t conj(G_s) d tau``
  with ``G_t(tau) = int_0^t e^{i u tau} phat(u) du``.  Above a cutoff the tail of
  ``G_t`` is the Laplace transform of ``phat`` minus an integration-by-parts series,
  and the resulting oscillatory integrals are moved onto vertical rays in the
  complex plane (plus residues of the poles that the rotation sweeps over).

The two routes share nothing except ``phat``, so their agreement checks the
normalisation of ``C_{H0}``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ConditionError, QuadratureError, UnsupportedParameterError
from .mlf import GK_NODES, GK_WEIGHTS, G_WEIGHTS, mittag_leffler, ml_weighted_deriv
from .params import ModelParams, check_conditions
from .spectral import c_hurst


def _quad(f, a, b, **kw):
    kw.setdefault("limit", 200)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, **kw)


# ---------------------------------------------------------------------------
# graded rules
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gauss_jacobi(n, expo):
    x, w = special.roots_jacobi(n, 0.0, expo)
    return x, w


def graded_rule(width, expo, levels=45, max_width=None, n_end=15):
    """Nodes and Kronrod/Gauss weights for ``int_0^width f`` with ``f ~ w^expo`` at 0.

    Dyadic panels ``[width 2^{-k-1}, width 2^{-k}]`` carry a 15-point Kronrod rule
    (subdivided to at most ``max_width``); the innermost panel uses a
    Gauss-Jacobi rule for the weight ``w^expo``.
    """
    edges = width * 0.5 ** np.arange(levels, -1, -1)
    if max_width is not None:
        fine = [edges[0]]
        for a, b in zip(edges[:-1], edges[1:]):
            m = max(1, int(math.ceil((b - a) / max_width)))
            fine.extend(np.linspace(a, b, m + 1)[1:])
        edges = np.array(fine)
    lo = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = (lo + half * (1 + GK_NODES[None, :])).ravel()
    wk = (half * GK_WEIGHTS[None, :]).ravel()
    wg = (half * G_WEIGHTS[None, :]).ravel()
    eps = edges[0]
    xj, wj = _gauss_jacobi(n_end, expo)
    xj7, wj7 = _gauss_jacobi(max(3, n_end // 2), expo)
    # weights for f itself: int_0^eps w^expo g(w) dw with g = f / w^expo
    nj = 0.5 * eps * (1 + xj)
    wjf = wj * (0.5 * eps) ** (expo + 1) / nj ** expo
    nj7 = 0.5 * eps * (1 + xj7)
    wj7f = wj7 * (0.5 * eps) ** (expo + 1) / nj7 ** expo
    all_nodes = np.concatenate([nj, nj7, nodes])
    wk_all = np.concatenate([wjf, np.zeros_like(nj7), wk])
    wg_all = np.concatenate([np.zeros_like(nj), wj7f, wg])
    return all_nodes, wk_all, wg_all


def _phat(u, lam, p):
    """``phat(u, xi)`` for arrays ``u`` (nodes) and ``lam = |xi|^alpha`` (broadcast)."""
    c = p.beta + p.gamma_rl
    z = -(u ** p.beta) * lam
    return u ** (c - 1.0) * mittag_leffler(p.beta, c, z)


# ---------------------------------------------------------------------------
# temporal kernels
# ---------------------------------------------------------------------------

def kernel_time_white(t, s, xi, p: ModelParams):
    """``int_0^min(t,s) phat(|t-s| + u) phat(u) du`` for an array of ``xi``; returns (K, err)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    m, dlt = min(t, s), abs(t - s)
    c = p.beta + p.gamma_rl
    expo = 2 * c - 2 if dlt == 0 else c - 1
    lam_max = float(np.max(xi)) ** p.alpha if len(xi) else 0.0
    max_width = None
    if p.beta > 1 and lam_max > 0:
        max_width = max(m / 4000.0, 2.0 / lam_max ** (1.0 / p.beta))
    u, wk, wg = graded_rule(m, expo, max_width=max_width)
    lam = (xi ** p.alpha)[:, None]
    f = _phat(u[None, :], lam, p)
    g = _phat(dlt + u[None, :], lam, p) if dlt > 0 else f
    prod = f * g
    k = prod @ wk
    err = np.abs(k - prod @ wg)
    return k, err


def kernel_time_fractional(t, s, xi, p: ModelParams, levels=10):
    """``a_{H0} int_0^t int_0^s phat(t-r1) phat(s-r2) |r1-r2|^{2H0-2}`` via the lag ``v = r1 - r2``.

    ``R(v) = int phat(t - r - v) phat(s - r) dr`` is a cross-correlation that is
    integrated against ``|v|^{2H0-2}`` with graded rules at ``v = 0`` and at
    ``v = t - s``, where both factors of ``R`` become singular together.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    h0 = p.h0
    kappa = 2 * h0 - 2
    a_h = h0 * (2 * h0 - 1)
    c = p.beta + p.gamma_rl
    lam = (xi ** p.alpha)[:, None]
    # v ranges over [-s, t]; R has features at 0 and at t - s
    brk = sorted({-s, 0.0, t - s, t})
    out = np.zeros(len(xi))
    err = np.zeros(len(xi))
    for a, b in zip(brk[:-1], brk[1:]):
        mid = 0.5 * (a + b)
        for lo, hi in ((a, mid), (mid, b)):
            toward = lo if lo in (0.0, t - s) and lo > -s else hi
            if toward == 0.0:
                e_end = kappa
            elif toward == t - s:
                e_end = max(min(2 * c - 1, 0.0), -0.999)
            else:
                e_end = 0.0
            # the end rule matches the leading power; the next one fixes the depth
            gap = 1.0
            if toward == 0.0 and t == s:
                gap = min(max(2 * c - 1, 0.05), 1.0)
            lev = levels if e_end == 0.0 else int(min(45, max(levels, math.ceil(27.0 / (1 + e_end + gap)))))
            nodes, wk, wg = graded_rule(hi - lo, e_end, levels=lev)
            v = toward + (nodes if toward == lo else -nodes)
            f = _cross_corr(v, t, s, lam, p, c, levels) * np.abs(v) ** kappa
            out += f @ wk
            err += np.abs(f @ wk - f @ wg)
    return a_h * out, a_h * err


def _cross_corr(v, t, s, lam, p, c, levels):
    """``R(v) = int phat(t - r - v) phat(s - r) dr`` over the overlap, for each lag ``v``."""
    res = np.zeros((lam.shape[0], len(v)))
    for j, vj in enumerate(v):
        lo = max(0.0, -vj)
        hi = min(s, t - vj)
        width = hi - lo
        if width <= 0:
            continue
        # measured from the right end both arguments are w + shift
        sh1 = (t - vj) - hi
        sh2 = s - hi
        expo = (c - 1) * ((sh1 < 1e-300) + (sh2 < 1e-300))
        # a factor singular just outside the interval needs panels finer than its distance
        near = [x for x in (sh1, sh2) if 1e-300 <= x < width]
        lev = levels
        if near:
            lev = int(min(60, max(levels, math.ceil(math.log2(width / min(near))) + 6)))
        w, wk, _ = graded_rule(width, max(expo, -0.999), levels=lev)
        f1 = _phat(w[None, :] + sh1, lam, p)
        f2 = _phat(w[None, :] + sh2, lam, p)
        res[:, j] = (f1 * f2) @ wk
    return res


class _FrequencyKernel:
    """Temporal kernel from the frequency-domain representation for one ``xi``."""

    n_ibp = 8

    def __init__(self, t, s, p: ModelParams, cutoff=60.0):
        self.t, self.s, self.p = float(t), float(s), p
        self.c = p.beta + p.gamma_rl
        self.cutoff = cutoff
        self.ch0 = c_hurst(p.h0)

    # closed-form pieces, valid for complex tau in the swept quadrants
    def m_plus(self, tau, lam):
        w = -1j * tau
        return w ** (-self.p.gamma_rl) / (w ** self.p.beta + lam)

    def m_minus(self, tau, lam):
        w = 1j * tau
        return w ** (-self.p.gamma_rl) / (w ** self.p.beta + lam)

    def _ibp_coeffs(self, time, lam):
        p = self.p
        return np.array([ml_weighted_deriv(n, p.beta, self.c, -lam, time)
                         for n in range(self.n_ibp)])

    @staticmethod
    def _ibp_series(coef, tau, sign):
        # sum_n (-1)^n coef_n / (sign i tau)^{n+1}
        out = 0.0
        w = sign * 1j * tau
        for n, a in enumerate(coef):
            out = out + (-1) ** n * a / w ** (n + 1)
        return out

    def _low(self, lams, tau_c):
        """Part of the integral below ``tau_c`` for an array of ``lam`` sharing the cutoff."""
        t, s, p = self.t, self.s, self.p
        h0 = p.h0
        lams = np.asarray(lams, dtype=float)[None, :]
        wmax = 2.0 / tau_c
        ut, wt, _ = graded_rule(t, self.c - 1, max_width=wmax)
        us, ws, _ = graded_rule(s, self.c - 1, max_width=wmax)
        ft = _phat(ut[:, None], lams, p) * wt[:, None]
        fs = _phat(us[:, None], lams, p) * ws[:, None]
        tau_w = min(2.0 / max(t, s), tau_c / 8)
        taus, wk, wg = graded_rule(tau_c, 1 - 2 * h0, max_width=tau_w)
        val = np.zeros(lams.shape[1], dtype=complex)
        alt = np.zeros(lams.shape[1], dtype=complex)
        for i in range(0, len(taus), 256):
            blk = taus[i:i + 256, None]
            gt = np.exp(1j * blk * ut[None, :]) @ ft
            gs = np.exp(1j * blk * us[None, :]) @ fs
            wfac = (taus[i:i + 256] ** (1 - 2 * h0) * np.exp(-1j * (t - s) * taus[i:i + 256]))[:, None]
            integrand = wfac * gt * np.conj(gs)
            val += wk[i:i + 256] @ integrand
            alt += wg[i:i + 256] @ integrand
        return val, np.abs(val - alt)

    def _ray(self, g, omega, tau_c, poles):
        """``int_{tau_c}^inf g(tau) e^{i omega tau} d tau`` by rotation onto a vertical ray."""
        sg = 1.0 if omega > 0 else -1.0
        aw = abs(omega)
        ph = cmath.exp(1j * omega * tau_c)

        def re_f(y):
            return (g(tau_c + 1j * sg * y) * 1j * sg).real * math.exp(-aw * y)

        def im_f(y):
            return (g(tau_c + 1j * sg * y) * 1j * sg).imag * math.exp(-aw * y)

        vr, er = _quad(re_f, 0, np.inf, epsabs=0, epsrel=1e-11)
        vi, ei = _quad(im_f, 0, np.inf, epsabs=0, epsrel=1e-11)
        total = ph * complex(vr, vi)
        for tp, res in poles:
            if tp.real > tau_c and (tp.imag > 0) == (sg > 0):
                total += 2j * math.pi * sg * res * cmath.exp(1j * omega * tp)
        return total, (er + ei) * abs(ph)

    def cutoff_for(self, lam):
        """Cutoff and integration-by-parts coefficients for one ``lam``."""
        t, s = self.t, self.s
        tau_c = self.cutoff / min(t, s)
        at = self._ibp_coeffs(t, lam)
        bs = self._ibp_coeffs(s, lam)
        # the integration-by-parts remainder must be negligible next to G at the cutoff
        for _ in range(4):
            size = max(abs(self.m_plus(tau_c, lam)), abs(at[0]) / tau_c, abs(bs[0]) / tau_c)
            rem = max(abs(at[-1]), abs(bs[-1])) / tau_c ** (self.n_ibp + 1)
            if rem <= 1e-12 * size:
                break
            tau_c *= 2.0
        return tau_c, at, bs

    def __call__(self, xi):
        lam = float(xi) ** self.p.alpha
        tau_c, at, bs = self.cutoff_for(lam)
        low, err = self._low([lam], tau_c)
        hi, e2 = self.high(lam, tau_c, at, bs)
        return 2.0 * self.ch0 * (low[0] + hi).real, 2.0 * self.ch0 * (err[0] + e2)

    def high(self, lam, tau_c, at, bs):
        """Part of the integral above ``tau_c``; returns (complex value, error)."""
        p, t, s = self.p, self.t, self.s
        h0, beta = p.h0, p.beta
        total = 0.0
        err = 0.0
        w = lambda tau: tau ** (1 - 2 * h0)
        a_t = lambda tau: self._ibp_series(at, tau, 1.0)
        b_s = lambda tau: self._ibp_series(bs, tau, -1.0)   # conj(A_s) continued

        plus_pole = minus_pole = None
        if 1.0 < beta < 2.0:
            r = lam ** (1.0 / beta)
            plus_pole = r * cmath.exp(1j * (0.5 * math.pi - math.pi / beta))    # of m_plus
            minus_pole = r * cmath.exp(1j * (math.pi / beta - 0.5 * math.pi))   # of m_minus

        def res_plus(other, tp):
            d = -1j * beta * (-1j * tp) ** (beta - 1)
            return (-1j * tp) ** (-p.gamma_rl) * other(tp) / d

        def res_minus(other, tp):
            d = 1j * beta * (1j * tp) ** (beta - 1)
            return (1j * tp) ** (-p.gamma_rl) * other(tp) / d

        # |M|^2 e^{-i(t-s) tau}
        g1 = lambda tau: w(tau) * self.m_plus(tau, lam) * self.m_minus(tau, lam)
        if t == s:
            cb = math.cos(0.5 * math.pi * beta)
            decay = 2 * beta + 2 * h0 + 2 * p.gamma_rl - 2

            def sq(y):
                # tau^{2-2H0} |M(tau)|^2 written in inverse powers of tau = e^y
                ib = math.exp(-beta * y)
                return math.exp(-decay * y) / (1 + 2 * lam * ib * cb + (lam * ib) ** 2)

            lo = math.log(tau_c)
            v, e = _quad(sq, lo, lo + 800.0 / decay, epsabs=0, epsrel=1e-11)
            total += v
            err += e
        else:
            pl = []
            if plus_pole is not None:
                pl.append((plus_pole, res_plus(lambda z: w(z) * self.m_minus(z, lam), plus_pole)))
                pl.append((minus_pole, res_minus(lambda z: w(z) * self.m_plus(z, lam), minus_pole)))
            v, e = self._ray(g1, -(t - s), tau_c, pl)
            total += v
            err += e
        # M conj(A_s) e^{-i t tau}
        g2 = lambda tau: w(tau) * self.m_plus(tau, lam) * b_s(tau)
        pl = [] if plus_pole is None else [(plus_pole, res_plus(lambda z: w(z) * b_s(z), plus_pole))]
        v, e = self._ray(g2, -t, tau_c, pl)
        total += v
        err += e
        # conj(M) A_t e^{i s tau}
        g3 = lambda tau: w(tau) * self.m_minus(tau, lam) * a_t(tau)
        pl = [] if minus_pole is None else [(minus_pole, res_minus(lambda z: w(z) * a_t(z), minus_pole))]
        v, e = self._ray(g3, s, tau_c, pl)
        total += v
        err += e
        # A_t conj(A_s): sums of powers of tau
        for n, a in enumerate(at):
            for k, b in enumerate(bs):
                coef = (-1) ** (n + k) * a * b / ((1j) ** (n + 1) * (-1j) ** (k + 1))
                ex = 2 * h0 + n + k
                total += coef * tau_c ** (-ex) / ex
        err += abs(at[-1] * bs[0]) / tau_c ** (self.n_ibp + 2 * h0)
        return total, err


def kernel_frequency(t, s, xi, p: ModelParams):
    """Frequency-domain temporal kernel for an array of ``xi``; returns (K, err)."""
    fk = _FrequencyKernel(t, s, p)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    lams = xi ** p.alpha
    vals = np.empty(len(xi), dtype=complex)
    errs = np.empty(len(xi))
    cuts = [fk.cutoff_for(lam) for lam in lams]
    taus = np.array([c[0] for c in cuts])
    for tc in np.unique(taus):
        idx = np.flatnonzero(taus == tc)
        low, lerr = fk._low(lams[idx], tc)
        vals[idx] = low
        errs[idx] = lerr
    for i, (tc, at, bs) in enumerate(cuts):
        hv, he = fk.high(lams[i], tc, at, bs)
        vals[i] += hv
        errs[i] += he
    return 2.0 * fk.ch0 * vals.real, 2.0 * fk.ch0 * errs


# ---------------------------------------------------------------------------
# spatial integral
# ---------------------------------------------------------------------------

def _angular(rho, p: ModelParams, psi: float):
    """``Phi(rho) = int_S mu(w) cos(rho <w, e_psi>) dsigma(w)`` for an array of ``rho``."""
    rho = np.asarray(rho, dtype=float)
    if p.d == 1:
        return 2.0 * c_hurst(p.h_spatial[0]) * np.cos(rho)
    e1, e2 = 1.0 - 2.0 * p.h_spatial[0], 1.0 - 2.0 * p.h_spatial[1]
    n = int(40 + 1.5 * float(np.max(rho, initial=0.0)))
    n = 16 * ((n + 15) // 16)
    x, wj = special.roots_jacobi(n, e1, e2)   # weight (1-x)^{e1} (1+x)^{e2}
    phi = 0.25 * math.pi * (1 + x)          # maps to [0, pi/2]
    # |cos|^{e1} ~ (pi/2 - phi)^{e1}, |sin|^{e2} ~ phi^{e2}
    smooth = ((np.cos(phi) / (0.5 * math.pi - phi)) ** e1 * (np.sin(phi) / phi) ** e2)
    jac = (0.25 * math.pi) ** (1 + e1 + e2)
    total = np.zeros_like(rho)
    # four quadrants through the symmetries phi -> pi - phi, phi -> phi + pi
    for sgn in (1.0, -1.0):
        ang = np.where(sgn > 0, phi, math.pi - phi)
        cosine = np.cos(np.multiply.outer(rho, np.cos(ang - psi)))
        total += 2.0 * (cosine * (smooth * wj * jac)).sum(axis=-1)
    return c_hurst(p.h_spatial[0]) * c_hurst(p.h_spatial[1]) * total


def spatial_integral(kernel, h, p: ModelParams, t, s, decades=6.0, levels=None, increment=False,
                     grid_h=None):
    """``int mu(xi) cos(<xi, h>) K(|xi|) d xi`` with ``K`` given as an array function.

    With ``increment=True`` the weight is ``1 - cos(<xi, h>)`` instead, which keeps
    the integral finite when ``K`` is not integrable at the origin.  ``grid_h``
    (at least ``|h|``) sets the panel width, so several lags can share one grid.

    Radial nodes: graded toward 0, then octaves up to ``lam m^beta = 10^decades``;
    beyond that the radial integrand is continued by its fitted power law.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    hn = float(np.linalg.norm(h))
    psi = math.atan2(h[1], h[0]) if p.d == 2 and hn > 0 else 0.0
    e = p.d - 2.0 * p.h_sum + (p.d - 1)        # radial power incl. polar Jacobian
    m = min(t, s)
    xs = m ** (-p.beta / p.alpha)
    n_oct = int(math.ceil(decades / p.alpha * math.log2(10.0)))
    big = xs * 2.0 ** n_oct
    gh = max(hn, grid_h or 0.0)
    max_w = 2.0 * math.pi / gh if gh > 0 else None
    if levels is None:
        # K(xi) = K(0) + O(xi^alpha): the end rule is exact for the first term, so
        # only the second needs the innermost panel to be small
        levels = int(min(40, max(6, math.ceil(math.log2(1e7) / (e + p.alpha + 1)))))
    xa, wka, wga = graded_rule(xs, e, levels=levels)
    edges = xs * 2.0 ** np.arange(0, n_oct + 1)
    if max_w is not None:
        fine = [edges[0]]
        for a, b in zip(edges[:-1], edges[1:]):
            k = max(1, int(math.ceil((b - a) / max_w)))
            fine.extend(np.linspace(a, b, k + 1)[1:])
        edges = np.array(fine)
    lo = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    xb = (lo + half * (1 + GK_NODES[None, :])).ravel()
    wkb = (half * GK_WEIGHTS[None, :]).ravel()
    wgb = (half * G_WEIGHTS[None, :]).ravel()
    xi = np.concatenate([xa, xb, [0.5 * big, big]])
    kv, ke = kernel(xi)
    phi0 = float(_angular(np.array([0.0]), p, 0.0)[0])
    ang = _angular(xi * hn, p, psi) if hn > 0 else _angular(np.zeros_like(xi), p, 0.0)
    if increment:
        ang = phi0 - ang
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = np.where(xi > 0, xi ** e, 0.0)
    f = rad * kv * ang
    n_a = len(xa)
    val = f[:n_a] @ wka + f[n_a:-2] @ wkb
    err = abs(f[:n_a] @ wka - f[:n_a] @ wga) + abs(f[n_a:-2] @ wkb - f[n_a:-2] @ wgb)
    err += float((rad * ke * np.abs(ang))[:-2] @ np.concatenate([np.abs(wka), np.abs(wkb)]))
    # power-law tail of the radial part rad * K
    g1, g2 = rad[-2] * kv[-2], rad[-1] * kv[-1]
    tail = 0.0
    if g2 != 0 and g1 != 0 and g1 * g2 > 0:
        pw = -math.log(g2 / g1) / math.log(2.0)
        if pw <= 1.0:
            raise QuadratureError("radial integrand does not decay fast enough for the tail fit",
                                  exponent=pw)
        amp = g2 * big ** pw
        flat = amp * big ** (1 - pw) / (pw - 1) * phi0
        if hn == 0:
            osc = flat
        elif p.d == 1:
            o, _ = _quad(lambda x: x ** (-pw), big, np.inf, weight="cos", wvar=hn)
            osc = amp * 2.0 * c_hurst(p.h_spatial[0]) * o
        else:
            osc = 0.0  # the angular average decays; the remainder is below the estimate
            err += abs(flat) / max(1.0, big * hn)
        tail = flat - osc if increment else osc
        err += 1e-3 * abs(tail)
    return val + tail, err


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def _check_u(p: ModelParams):
    if p.d > 2:
        raise UnsupportedParameterError("covariance_u is implemented for d <= 2")
    rep = check_conditions(p)
    if not rep.dalang_holds:
        raise ConditionError(f"Dalang condition fails (margin {rep.dalang_margin:.6g})",
                             margin=rep.dalang_margin)


def _kernel_for(t, s, p, route):
    if route == "time":
        if p.h0 == 0.5:
            return lambda xi: kernel_time_white(t, s, xi, p)
        return lambda xi: kernel_time_fractional(t, s, xi, p)
    if route == "frequency":
        return lambda xi: kernel_frequency(t, s, xi, p)
    raise UnsupportedParameterError(f"unknown route {route!r}")


def _tolerance(p, route):
    return 1e-2 if (route == "time" and p.h0 != 0.5) else 1e-5


class _MemoKernel:
    """Remembers the last ``xi`` grid so several lags reuse one kernel evaluation."""

    def __init__(self, fn):
        self.fn = fn
        self.xi = None
        self.val = None

    def __call__(self, xi):
        if self.xi is None or len(self.xi) != len(xi) or not np.array_equal(self.xi, xi):
            self.xi = np.array(xi)
            self.val = self.fn(xi)
        return self.val


def covariance_u(t, x, s, y, p: ModelParams, route: str = "time", with_error: bool = False):
    """``E[u(t,x) u(s,y)]`` for the solution started from zero.

    ``route`` is ``"time"`` or ``"frequency"``.
    """
    _check_u(p)
    if t <= 0 or s <= 0:
        raise UnsupportedParameterError("covariance_u needs t, s > 0")
    h = np.atleast_1d(np.asarray(x, dtype=float)) - np.atleast_1d(np.asarray(y, dtype=float))
    val, err = spatial_integral(_kernel_for(t, s, p, route), h, p, t, s)
    tol = _tolerance(p, route)
    if not np.isfinite(val) or err > max(tol * abs(val), 1e-14):
        raise QuadratureError(f"covariance quadrature error {err:.3g} for value {val:.6g}",
                              route=route)
    return (float(val), float(err)) if with_error else float(val)


def covariance_u_matrix(points, p: ModelParams, route: str = "time"):
    """Covariance matrix of ``u`` at ``points`` (rows ``(t, x_1..x_d)``, all ``t > 0``).

    The temporal kernel is computed once per pair of distinct times and shared
    by every spatial lag.
    """
    _check_u(p)
    pts = np.asarray(points, dtype=float).reshape(-1, 1 + p.d)
    t, x = pts[:, 0], pts[:, 1:]
    if np.any(t <= 0):
        raise UnsupportedParameterError("covariance_u needs t > 0")
    n = len(t)
    lags = x[:, None, :] - x[None, :, :]
    grid_h = float(np.max(np.linalg.norm(lags, axis=-1))) if n > 1 else 0.0
    times = np.unique(t)
    out = np.zeros((n, n))
    tol = _tolerance(p, route)
    for a_i, ta in enumerate(times):
        for tb in times[a_i:]:
            kern = _MemoKernel(_kernel_for(ta, tb, p, route))
            ia = np.flatnonzero(t == ta)
            ib = np.flatnonzero(t == tb)
            done = {}
            for i in ia:
                for j in ib:
                    key = tuple(np.round(lags[i, j], 15))
                    if key not in done:
                        v, e = spatial_integral(kern, lags[i, j], p, ta, tb, grid_h=grid_h)
                        if not np.isfinite(v) or e > max(tol * abs(v), 1e-14):
                            raise QuadratureError(f"covariance quadrature error {e:.3g}",
                                                  route=route)
                        done[key] = v
                    out[i, j] = out[j, i] = done[key]
    return out
