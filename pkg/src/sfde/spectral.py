"""Spectral densities of the noise and of the stationary-increment fields.

Convention: ``F phi(xi) = int e^{-i x xi} phi(x) dx`` and every density ``f``
here is normalised so that the increment variance of the matching field is
``2 int (1 - cos<h, lambda>) f(lambda) d lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ModelParams, derive_exponents


def c_hurst(h: float) -> float:
    """``Gamma(2h+1) sin(pi h) / (2 pi)``; spectral constant of fBm with index ``h``."""
    return math.gamma(2.0 * h + 1.0) * math.sin(math.pi * h) / (2.0 * math.pi)


@dataclass(frozen=True)
class NoiseMeasure:
    h_spatial: tuple
    c_h: tuple

    @classmethod
    def from_params(cls, p: ModelParams) -> "NoiseMeasure":
        return cls(tuple(p.h_spatial), tuple(c_hurst(h) for h in p.h_spatial))

    @property
    def d(self) -> int:
        return len(self.h_spatial)

    @property
    def prefactor(self) -> float:
        return float(np.prod(self.c_h))


@dataclass(frozen=True)
class TemporalKernelH0:
    h0: float
    c_h0: float

    @classmethod
    def from_params(cls, p: ModelParams) -> "TemporalKernelH0":
        return cls(p.h0, c_hurst(p.h0))


@dataclass(frozen=True)
class SpectralPoint:
    tau: float
    xi: tuple
    density: float


def _as_xi(xi, d):
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        xi = xi[None]
    if xi.shape[-1] != d:
        if d == 1:
            xi = xi[..., None]
        else:
            raise ValueError(f"expected {d} spatial coordinates, got shape {xi.shape}")
    return xi


def mu_density(xi, nm: NoiseMeasure):
    """``prod_j c_{H_j} |xi_j|^{1-2H_j}``; +inf on an axis whose factor is singular.

    ``xi`` may be a single d-vector or an array whose last axis has length d.
    """
    xi = _as_xi(xi, nm.d)
    out = np.full(xi.shape[:-1], nm.prefactor)
    with np.errstate(divide="ignore"):
        for j, h in enumerate(nm.h_spatial):
            out = out * np.abs(xi[..., j]) ** (1.0 - 2.0 * h)
    return float(out) if out.ndim == 0 else out


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def f_u(tau, xi, p: ModelParams):
    """Space-time spectral density of ``U``."""
    nm = NoiseMeasure.from_params(p)
    tau = np.asarray(tau, dtype=float)
    xi = _as_xi(xi, p.d)
    r = np.sqrt(np.sum(xi * xi, axis=-1))
    at = np.abs(tau)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        den = (at ** (2 * p.beta) + 2 * r ** p.alpha * at ** p.beta * math.cos(math.pi * p.beta / 2)
               + r ** (2 * p.alpha))
        val = c_hurst(p.h0) * at ** (1 - 2 * p.gamma_rl - 2 * p.h0) * mu_density(xi, nm) / den
    val = np.where(np.isfinite(val) & (den > 0), val, np.inf)
    return _scalar(val)


def f_time(tau, p: ModelParams, c_time: float):
    """Spectral density of the temporal slice ``t -> U(t, x)``.

    ``c_time`` is the spatial integral returned by
    :func:`sfde.covariance.constant_c_time`; the prefactor is ``C_{H0} c_time``.
    """
    th1 = derive_exponents(p).theta1
    at = np.abs(np.asarray(tau, dtype=float))
    with np.errstate(divide="ignore"):
        val = c_hurst(p.h0) * c_time / at ** (2 * th1 + 1)
    return _scalar(val)


def space_exponent(p: ModelParams) -> float:
    """Radial decay exponent of :func:`f_space` before the noise factor."""
    return 2 * p.alpha + (p.alpha / p.beta) * (2 * p.gamma_rl + 2 * p.h0 - 2)


def f_space(xi, p: ModelParams, c31: float):
    """Spectral density of the spatial slice ``x -> U(t, x)``.

    ``c31`` is the temporal integral from :func:`sfde.covariance.constant_c31`.
    """
    nm = NoiseMeasure.from_params(p)
    xi = _as_xi(xi, p.d)
    r = np.sqrt(np.sum(xi * xi, axis=-1))
    with np.errstate(divide="ignore"):
        val = c_hurst(p.h0) * c31 * mu_density(xi, nm) / r ** space_exponent(p)
    return _scalar(val)


f_U = f_u
