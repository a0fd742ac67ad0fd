"""Exact Gaussian samples of ``U``, of its temporal fBm slices and of ``u``.

All samplers factor a dense covariance matrix once and multiply it into
standard normal vectors.  Sample ``i`` draws its normals from a Philox
generator keyed by ``(seed, i)``, so any subset of samples can be regenerated
alone and the output does not depend on how the work is split.  Points are
put in a canonical (lexicographic) order before factoring, which makes the
values independent of the order in which the caller lists them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covariance import ConstantsReport, covariance_matrix_U, jittered_cholesky
from .errors import ConditionError, ConfigError, ResourceCapError, UnsupportedParameterError
from .params import ModelParams, check_conditions
from .solution import covariance_u_matrix

MAX_POINTS = 4096
U_COST_GUARD = 256
RNG_METHOD = "numpy-philox4x64-key(seed,index)-standard_normal-ziggurat"
FIELD_KINDS = ("U", "fbm_slice", "u")
BINARY_MAGIC = b"SFDEFS\x00\x01"
BINARY_VERSION = 1
CSV_SCHEMA = "#schema=sfde-field-sample-v1"


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid ``t_points x x_points`` listed time-major."""

    t_points: tuple
    x_points: tuple
    label: str = ""

    def __post_init__(self):
        t = tuple(float(v) for v in self.t_points)
        xs = tuple(tuple(float(c) for c in np.atleast_1d(x)) for x in self.x_points)
        object.__setattr__(self, "t_points", t)
        object.__setattr__(self, "x_points", xs)
        if not t or not xs:
            raise ConfigError("grid needs at least one time and one space point")
        if any(v < 0 for v in t):
            raise ConfigError("grid times must be nonnegative")
        if any(b <= a for a, b in zip(t[:-1], t[1:])):
            raise ConfigError("grid times must be strictly increasing")
        if len(set(xs)) != len(xs):
            raise ConfigError("grid space points must be distinct")
        if len({len(x) for x in xs}) != 1:
            raise ConfigError("grid space points must share one dimension")
        if self.n_points > MAX_POINTS:
            raise ResourceCapError(
                f"grid has {self.n_points} points, above the Cholesky cap of {MAX_POINTS}",
                n_points=self.n_points, cap=MAX_POINTS)

    @property
    def d(self) -> int:
        return len(self.x_points[0])

    @property
    def n_points(self) -> int:
        return len(self.t_points) * len(self.x_points)

    @property
    def points(self) -> np.ndarray:
        t = np.repeat(np.asarray(self.t_points), len(self.x_points))
        x = np.tile(np.asarray(self.x_points), (len(self.t_points), 1))
        return np.column_stack([t, x])

    @classmethod
    def uniform(cls, t_max: float, nt: int, x_max: float = 0.0, nx: int = 1,
                t_min: float = 0.0, x_min: float = 0.0, label: str = "") -> "GridSpec":
        """Uniform grid in ``t`` and (for d = 1) in ``x``, endpoints included."""
        t = np.linspace(t_min, t_max, nt) if nt > 1 else np.array([t_max])
        x = np.linspace(x_min, x_max, nx) if nx > 1 else np.array([x_min])
        return cls(tuple(t), tuple((v,) for v in x), label)

    def to_dict(self) -> dict:
        return {"t_points": list(self.t_points), "x_points": [list(x) for x in self.x_points],
                "label": self.label}


@dataclass(frozen=True)
class FieldSample:
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    seed: int
    field_kind: str
    params_hash: str

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        pts = self.grid.points
        with open(path, "w", newline="") as fh:
            fh.write(f"{CSV_SCHEMA} kind={self.field_kind} seed={self.seed} "
                     f"params_hash={self.params_hash}\n")
            w = csv.writer(fh)
            w.writerow(["sample_id", "t"] + [f"x{j + 1}" for j in range(self.grid.d)] + ["value"])
            for i, row in enumerate(self.values):
                for pt, v in zip(pts, row):
                    w.writerow([i] + [repr(float(c)) for c in pt] + [repr(float(v))])

    def to_binary(self, path) -> None:
        """Little-endian block: header, grid times, grid space points, row-major values."""
        head = json.dumps({"kind": self.field_kind, "seed": self.seed,
                           "params_hash": self.params_hash, "label": self.grid.label},
                          sort_keys=True).encode()
        nt, nx, d = len(self.grid.t_points), len(self.grid.x_points), self.grid.d
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<IIIIII", BINARY_VERSION, len(head), nt, nx, d, self.n_samples))
            fh.write(head)
            fh.write(np.asarray(self.grid.t_points, dtype="<f8").tobytes())
            fh.write(np.asarray(self.grid.x_points, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "FieldSample":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:len(BINARY_MAGIC)] != BINARY_MAGIC:
            raise ConfigError(f"{path} is not a field-sample file")
        off = len(BINARY_MAGIC)
        version, hlen, nt, nx, d, ns = struct.unpack_from("<IIIIII", blob, off)
        if version != BINARY_VERSION:
            raise ConfigError(f"unsupported field-sample version {version}")
        off += 24
        head = json.loads(blob[off:off + hlen])
        off += hlen
        t = np.frombuffer(blob, "<f8", nt, off)
        off += 8 * nt
        x = np.frombuffer(blob, "<f8", nx * d, off).reshape(nx, d)
        off += 8 * nx * d
        vals = np.frombuffer(blob, "<f8", ns * nt * nx, off).reshape(ns, nt * nx).copy()
        grid = GridSpec(tuple(t), tuple(map(tuple, x)), head["label"])
        return cls(grid, vals, head["seed"], head["kind"], head["params_hash"])


def standard_normals(seed: int, n_samples: int, dim: int, start: int = 0) -> np.ndarray:
    """Row ``j`` comes from a Philox stream keyed by ``(seed, start + j)``."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    out = np.empty((n_samples, dim))
    for j in range(n_samples):
        key = np.array([seed, start + j], dtype=np.uint64)
        out[j] = np.random.Generator(np.random.Philox(key=key)).standard_normal(dim)
    return out


def sample_hash(kind: str, grid: GridSpec, extra: dict) -> str:
    """Digest of everything that determines the sample values, RNG method included."""
    blob = json.dumps({"kind": kind, "grid": grid.to_dict(), "rng": RNG_METHOD, **extra},
                      sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class GaussianSampler:
    """Factored centered Gaussian law at a fixed point set.

    Points with zero variance (and hence zero covariance) are pinned to 0.
    Draws for sample indices ``start .. start + count - 1`` can be made in
    any batching and always give the same rows.
    """

    def __init__(self, cov: np.ndarray, points: np.ndarray):
        n = cov.shape[0]
        if n > MAX_POINTS:
            raise ResourceCapError(f"{n} points exceed the Cholesky cap of {MAX_POINTS}",
                                   n_points=n, cap=MAX_POINTS)
        points = np.asarray(points, dtype=float).reshape(n, -1)
        diag = np.diag(cov)
        scale = float(np.max(diag)) if n else 0.0
        live = np.flatnonzero(diag > 1e-300 * max(scale, 1e-300))
        self.n = n
        self.order = live[np.lexsort(points[live].T[::-1])]
        self.chol = None
        self.ridge = 0.0
        if len(self.order):
            sub = cov[np.ix_(self.order, self.order)]
            self.chol, self.ridge = jittered_cholesky(0.5 * (sub + sub.T))

    def draw(self, seed: int, count: int, start: int = 0) -> np.ndarray:
        out = np.zeros((count, self.n))
        if self.chol is not None:
            z = standard_normals(seed, count, len(self.order), start)
            out[:, self.order] = z @ self.chol.T
        return out

    def batches(self, seed: int, count: int, batch: int = 2000):
        for start in range(0, count, batch):
            yield self.draw(seed, min(batch, count - start), start)


def sample_gaussian(cov: np.ndarray, points: np.ndarray, n_samples: int, seed: int) -> np.ndarray:
    """Centered Gaussian draws with covariance ``cov`` at ``points``."""
    return GaussianSampler(cov, points).draw(seed, n_samples)


def sample_points_U(points, p: ModelParams, consts: ConstantsReport, n_samples: int,
                    seed: int, variogram=None) -> np.ndarray:
    """Samples of ``U`` at arbitrary points (rows ``(t, x_1..x_d)``)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 1 + p.d)
    cov = covariance_matrix_U(pts, p, consts, variogram)
    return sample_gaussian(cov, pts, n_samples, seed)


def sample_field_U(grid: GridSpec, p: ModelParams, consts: ConstantsReport, n_samples: int,
                   seed: int, variogram=None) -> FieldSample:
    if grid.d != p.d:
        raise ConfigError(f"grid dimension {grid.d} does not match d={p.d}")
    vals = sample_points_U(grid.points, p, consts, n_samples, seed, variogram)
    return FieldSample(grid, vals, int(seed), "U",
                       sample_hash("U", grid, {"params": p.digest()}))


def fbm_covariance(t, theta: float, scale: float = 1.0) -> np.ndarray:
    """``(scale/2)(|t|^{2 theta} + |s|^{2 theta} - |t - s|^{2 theta})``."""
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * theta
    a = np.abs(t) ** h2
    return 0.5 * scale * (a[:, None] + a[None, :] - np.abs(t[:, None] - t[None, :]) ** h2)


def sample_fbm_slice(n_points: int, theta1: float, big_c1: float, horizon: float, seed: int,
                     n_samples: int = 1) -> FieldSample:
    """``sqrt(C1)`` times fBm with index ``theta1`` on ``t_k = k horizon / (n - 1)``."""
    if not 0 < theta1 < 1:
        raise ConfigError(f"theta1 must lie in (0,1), got {theta1}")
    if n_points < 2:
        raise ConfigError("need at least two grid points")
    if n_points > MAX_POINTS:
        raise ResourceCapError(f"{n_points} points exceed the Cholesky cap of {MAX_POINTS}")
    grid = GridSpec(tuple(np.linspace(0.0, horizon, n_points)), ((0.0,),), "fbm-slice")
    t = np.asarray(grid.t_points)
    vals = sample_gaussian(fbm_covariance(t, theta1, big_c1), t[:, None], n_samples, seed)
    return FieldSample(grid, vals, int(seed), "fbm_slice",
                       sample_hash("fbm_slice", grid, {"theta1": theta1, "C1": big_c1}))


def sample_field_u(grid: GridSpec, p: ModelParams, n_samples: int, seed: int,
                   route: Optional[str] = None, cost_guard: int = U_COST_GUARD) -> FieldSample:
    """Samples of the solution ``u`` from its quadrature covariance.

    Needs ``d = 1`` and positive times.  For ``H0 > 1/2`` grids above
    ``cost_guard`` points are refused and the frequency route is the default.
    """
    if p.d != 1 or grid.d != 1:
        raise UnsupportedParameterError("u sampling is implemented for d = 1")
    if min(grid.t_points) <= 0:
        raise ConfigError("u sampling needs all grid times > 0")
    if p.h0 != 0.5 and grid.n_points > cost_guard:
        raise UnsupportedParameterError(
            f"u sampling with H0 > 1/2 is limited to {cost_guard} points", n_points=grid.n_points)
    rep = check_conditions(p)
    if not rep.dalang_holds:
        raise ConditionError("Dalang condition fails", margin=rep.dalang_margin)
    route = route or ("time" if p.h0 == 0.5 else "frequency")
    pts = grid.points
    cov = covariance_u_matrix(pts, p, route=route)
    vals = sample_gaussian(cov, pts, n_samples, seed)
    return FieldSample(grid, vals, int(seed), "u",
                       sample_hash("u", grid, {"params": p.digest(), "route": route}))
