"""Model parameters, regularity exponents and existence conditions.

The equation is the space-time fractional diffusion

    d^beta u = -(-Delta)^{alpha/2} u + I^gamma [W'],

driven by a Gaussian noise that is fractional in time (Hurst ``h0``) and in
each space coordinate (Hurst ``h_spatial[j]``).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import ConfigError

PARAM_KEYS = ("alpha", "beta", "gamma", "d", "H0")


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: float
    gamma_rl: float
    h0: float
    h_spatial: tuple = field(default=(0.5,))

    def __post_init__(self):
        object.__setattr__(self, "h_spatial", tuple(float(h) for h in self.h_spatial))
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.beta < 2:
            raise ConfigError(f"beta must lie in (0,2), got {self.beta}")
        if not 0 <= self.gamma_rl < 1:
            raise ConfigError(f"gamma must lie in [0,1), got {self.gamma_rl}")
        if not 0.5 <= self.h0 < 1:
            raise ConfigError(f"H0 must lie in [1/2,1), got {self.h0}")
        if len(self.h_spatial) < 1:
            raise ConfigError("at least one spatial Hurst index is required")
        for j, h in enumerate(self.h_spatial):
            if not 0 < h < 1:
                raise ConfigError(f"H{j + 1} must lie in (0,1), got {h}")

    @property
    def d(self) -> int:
        return len(self.h_spatial)

    @property
    def h_sum(self) -> float:
        return float(sum(self.h_spatial))

    @classmethod
    def she(cls) -> "ModelParams":
        """Stochastic heat equation with space-time white noise in d=1."""
        return cls(alpha=2.0, beta=1.0, gamma_rl=0.0, h0=0.5, h_spatial=(0.5,))

    @classmethod
    def from_mapping(cls, cfg: Mapping) -> "ModelParams":
        """Build from flat keys ``alpha, beta, gamma, d, H0, H1..Hd``."""
        missing = [k for k in PARAM_KEYS if k not in cfg]
        if missing:
            raise ConfigError(f"missing parameter key(s): {', '.join(missing)}")
        try:
            d = int(cfg["d"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"d must be an integer, got {cfg['d']!r}") from exc
        if d < 1 or d != cfg["d"]:
            raise ConfigError(f"d must be a positive integer, got {cfg['d']!r}")
        hs = []
        for j in range(1, d + 1):
            key = f"H{j}"
            if key not in cfg:
                raise ConfigError(f"missing parameter key: {key}")
            hs.append(_as_float(cfg, key))
        extra = [k for k in cfg if k.startswith("H") and k[1:].isdigit() and not 0 <= int(k[1:]) <= d]
        if extra:
            raise ConfigError(f"Hurst keys beyond d={d}: {', '.join(sorted(extra))}")
        return cls(
            alpha=_as_float(cfg, "alpha"),
            beta=_as_float(cfg, "beta"),
            gamma_rl=_as_float(cfg, "gamma"),
            h0=_as_float(cfg, "H0"),
            h_spatial=tuple(hs),
        )

    def to_mapping(self) -> dict:
        out = {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma_rl,
               "d": self.d, "H0": self.h0}
        for j, h in enumerate(self.h_spatial, start=1):
            out[f"H{j}"] = h
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_mapping(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _as_float(cfg, key):
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"parameter {key} must be a number, got {val!r}")
    return float(val)


@dataclass(frozen=True)
class DerivedExponents:
    theta1: float
    theta2: float
    q_dim: Optional[float]

    @property
    def positive(self) -> bool:
        return self.theta1 > 0 and self.theta2 > 0


@dataclass(frozen=True)
class ConditionReport:
    dalang_holds: bool
    dalang_margin: float
    theta1_lt_1: bool
    theta2_lt_1: bool
    gamma_lt_1_minus_h0: bool
    v_smooth_space: bool
    small_ball_extra: bool

    @property
    def u_exist(self) -> bool:
        return self.theta1_lt_1 and self.theta2_lt_1 and self.gamma_lt_1_minus_h0

    def as_dict(self) -> dict:
        return {
            "dalang": {"holds": self.dalang_holds, "margin": self.dalang_margin},
            "u_exist": {
                "theta1_lt_1": self.theta1_lt_1,
                "theta2_lt_1": self.theta2_lt_1,
                "gamma_lt_1_minus_h0": self.gamma_lt_1_minus_h0,
            },
            "v_smooth_space": self.v_smooth_space,
            "small_ball_extra": self.small_ball_extra,
        }


def derive_exponents(p: ModelParams) -> DerivedExponents:
    """Temporal and spatial Hoelder exponents and the combined dimension Q."""
    ratio = p.beta / p.alpha
    theta1 = p.beta + p.gamma_rl + p.h0 - 1.0 - ratio * (p.d - p.h_sum)
    theta2 = p.alpha - p.d + p.h_sum + (p.alpha / p.beta) * (p.gamma_rl + p.h0 - 1.0)
    q_dim = 1.0 / theta1 + p.d / theta2 if theta1 > 0 and theta2 > 0 else None
    return DerivedExponents(theta1, theta2, q_dim)


def dalang_margin(p: ModelParams) -> float:
    return (p.alpha + (p.alpha / p.beta) * min(p.gamma_rl + p.h0 - 1.0, 0.0)
            - (p.d - p.h_sum))


def check_conditions(p: ModelParams) -> ConditionReport:
    """Evaluate every condition as a strict inequality; boundaries fail."""
    ex = derive_exponents(p)
    margin = dalang_margin(p)
    excess = p.beta + p.gamma_rl - 2.0
    sb_extra = excess <= 0 or (-p.h0 + (p.beta / p.alpha) * (p.d - p.h_sum) < 1.0)
    return ConditionReport(
        dalang_holds=margin > 0,
        dalang_margin=margin,
        theta1_lt_1=ex.theta1 < 1,
        theta2_lt_1=ex.theta2 < 1,
        gamma_lt_1_minus_h0=p.gamma_rl < 1.0 - p.h0,
        v_smooth_space=p.alpha - p.d + p.h_sum > 1,
        small_ball_extra=bool(sb_extra),
    )


def params_grid(alphas: Sequence[float], betas: Sequence[float], gammas: Sequence[float],
                h0s: Sequence[float], hs: Sequence[Sequence[float]]):
    """Yield every valid ``ModelParams`` of a Cartesian parameter grid."""
    for a in alphas:
        for b in betas:
            for g in gammas:
                for h0 in h0s:
                    for h in hs:
                        try:
                            yield ModelParams(a, b, g, h0, tuple(h))
                        except ConfigError:
                            continue
