"""Command line front end.

Every command reads one JSON config with a required ``config_version`` and
flat model keys (``alpha, beta, gamma, d, H0, H1..Hd``) plus an optional
section named after the command.  Unknown keys are rejected.  Outputs are
pure functions of the config and the seed.

Exit statuses: 0 success, 2 condition failed, 3 divergent integral,
4 resource cap, 5 degenerate result, 64 config error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
from typing import Optional

from .errors import ConfigError, SfdeError
from .params import ModelParams

CONFIG_VERSION = 1
MODEL_KEYS = {"alpha", "beta", "gamma", "d", "H0"}
SECTION_KEYS = {
    "variogram": {"dt", "dx"},
    "simulate": {"kind", "t_points", "x_points", "nt", "t_min", "t_max", "nx", "x_min", "x_max",
                 "n_samples", "format", "route", "horizon", "theta1", "C1"},
    "smallball": {"field_kind", "domain", "eps", "eps_max", "n_eps", "n_mc", "n_time", "n_space",
                  "t_fixed", "min_prob", "max_prob", "theta1", "C1"},
}
TOP_KEYS = {"config_version", "seed"} | MODEL_KEYS | set(SECTION_KEYS)
CSV_SCHEMA = "#schema=sfde-{name}-v1"


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if "config_version" not in cfg:
        raise ConfigError("missing config_version")
    if cfg["config_version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {cfg['config_version']!r}")
    unknown = [k for k in cfg if k not in TOP_KEYS and not (k[:1] == "H" and k[1:].isdigit())]
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for name, allowed in SECTION_KEYS.items():
        sec = cfg.get(name)
        if sec is None:
            continue
        if not isinstance(sec, dict):
            raise ConfigError(f"section {name!r} must be an object")
        bad = sorted(set(sec) - allowed)
        if bad:
            raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(bad)}")


def params_from(cfg: dict) -> ModelParams:
    return ModelParams.from_mapping({k: v for k, v in cfg.items()
                                     if k in MODEL_KEYS or (k[:1] == "H" and k[1:].isdigit())})


def _seed(cfg: dict, args) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return seed


def _out(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _section(cfg: dict, name: str) -> dict:
    return dict(cfg.get(name) or {})


def _number(sec: dict, key: str, default=None, kind=float):
    val = sec.get(key, default)
    if val is None:
        raise ConfigError(f"missing option {key!r}")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"option {key!r} must be a number, got {val!r}")
    if kind is int:
        if int(val) != val:
            raise ConfigError(f"option {key!r} must be an integer, got {val!r}")
        return int(val)
    return float(val)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    from .params import check_conditions, derive_exponents
    p = params_from(load_config(args.config))
    rep = check_conditions(p)
    ex = derive_exponents(p)
    out = {"params": p.to_mapping(), "conditions": rep.as_dict(),
           "theta1": ex.theta1, "theta2": ex.theta2, "Q": ex.q_dim}
    _print(out)
    if args.out:
        _write_json(_out(args, "check.json"), out)
    return 0 if rep.dalang_holds else 2


def cmd_mlf(args) -> int:
    from .mlf import ml_eval
    v = ml_eval(args.a, args.b, args.z)
    _print({"a": args.a, "b": args.b, "z": args.z, "value": v.value, "est_error": v.est_error,
            "method": v.method})
    return 0


def cmd_constants(args) -> int:
    from . import covariance as cv
    from .errors import DivergentIntegralError
    p = params_from(load_config(args.config))
    rep = cv.compute_constants(p)
    out = rep.to_dict()
    divergent = {}
    for name, fn in (("c2", cv.constant_c2), ("c31", cv.constant_c31),
                     ("c_time", cv.constant_c_time), ("C1", cv.constant_big_c1)):
        if out[name] is None:
            try:
                fn(p)
            except DivergentIntegralError as exc:
                divergent[name] = exc.details.get("condition", str(exc))
    out["divergent"] = divergent
    _print(out)
    _write_json(_out(args, "constants.json"), out)
    return 0


def cmd_variogram(args) -> int:
    from .covariance import she_variogram_closed, variogram_full
    cfg = load_config(args.config)
    p = params_from(cfg)
    sec = _section(cfg, "variogram")
    dts = sec.get("dt", [0.0, 0.1, 0.5, 1.0])
    dxs = sec.get("dx", [0.0, 0.1, 0.5])
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in list(dts) + list(dxs)):
        raise ConfigError("variogram dt and dx must be lists of numbers")
    tol = args.tolerance if args.tolerance is not None else 1e-6
    closed = p == ModelParams.she()
    path = _out(args, "variogram.csv")
    with open(path, "w", newline="") as fh:
        fh.write(CSV_SCHEMA.format(name="variogram") + f" params_hash={p.digest()}\n")
        w = csv.writer(fh)
        w.writerow(["dt", "dx", "value", "est_error", "method", "closed_form"])
        for dt in dts:
            for dx in dxs:
                if dt == 0 and dx == 0:
                    row = [dt, dx, 0.0, 0.0, "zero-lag", 0.0 if closed else ""]
                else:
                    v = variogram_full(float(dt), float(dx), p, epsrel=tol)
                    ref = she_variogram_closed(abs(dt), abs(dx)) if closed else ""
                    row = [dt, dx, repr(v.value), repr(v.est_error), v.method,
                           repr(ref) if closed else ""]
                w.writerow(row)
    print(path)
    return 0


def _grid_from(sec: dict, d: int):
    import numpy as np
    from .sampling import GridSpec
    if "t_points" in sec:
        t = sec["t_points"]
    else:
        nt = _number(sec, "nt", 16, int)
        t0, t1 = _number(sec, "t_min", 0.0), _number(sec, "t_max", 1.0)
        t = np.linspace(t0, t1, nt) if nt > 1 else [t1]
    if "x_points" in sec:
        x = [tuple(np.atleast_1d(v)) for v in sec["x_points"]]
    else:
        nx = _number(sec, "nx", 1, int)
        x0, x1 = _number(sec, "x_min", 0.0), _number(sec, "x_max", 0.0)
        xs = np.linspace(x0, x1, nx) if nx > 1 else [x0]
        x = [(float(v),) + (0.0,) * (d - 1) for v in xs]
    return GridSpec(tuple(float(v) for v in t), tuple(x), sec.get("kind", "U"))


def cmd_simulate(args) -> int:
    import numpy as np
    from .covariance import compute_constants, covariance_matrix_U
    from .params import derive_exponents
    from .sampling import (fbm_covariance, sample_fbm_slice, sample_field_U, sample_field_u)
    from .solution import covariance_u_matrix
    cfg = load_config(args.config)
    p = params_from(cfg)
    sec = _section(cfg, "simulate")
    seed = _seed(cfg, args)
    kind = sec.get("kind", "U")
    n = _number(sec, "n_samples", 1, int)
    fmt = sec.get("format", "csv")
    if fmt not in ("csv", "binary", "both"):
        raise ConfigError(f"format must be csv, binary or both, got {fmt!r}")
    if kind == "fbm_slice":
        theta1 = sec.get("theta1", derive_exponents(p).theta1)
        c1 = sec.get("C1")
        if c1 is None:
            c1 = compute_constants(p).big_c1
        fs = sample_fbm_slice(_number(sec, "nt", 1024, int), float(theta1), float(c1),
                              _number(sec, "horizon", 1.0), seed, n)
        model_var = np.diag(fbm_covariance(np.asarray(fs.grid.t_points), float(theta1), float(c1)))
    elif kind == "U":
        grid = _grid_from(sec, p.d)
        consts = compute_constants(p)
        fs = sample_field_U(grid, p, consts, n, seed)
        model_var = np.diag(covariance_matrix_U(grid.points, p, consts))
    elif kind == "u":
        grid = _grid_from(sec, p.d)
        fs = sample_field_u(grid, p, n, seed, route=sec.get("route"))
        route = sec.get("route") or ("time" if p.h0 == 0.5 else "frequency")
        model_var = np.diag(covariance_u_matrix(grid.points, p, route=route))
    else:
        raise ConfigError(f"simulate kind must be U, fbm_slice or u, got {kind!r}")
    written = []
    if fmt in ("csv", "both"):
        written.append(_out(args, "sample.csv"))
        fs.to_csv(written[-1])
    if fmt in ("binary", "both"):
        written.append(_out(args, "sample.bin"))
        fs.to_binary(written[-1])
    vpath = _out(args, "variance.csv")
    emp = np.mean(fs.values ** 2, axis=0)
    with open(vpath, "w", newline="") as fh:
        fh.write(CSV_SCHEMA.format(name="variance") + f" kind={kind} seed={seed} "
                 f"params_hash={fs.params_hash}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{j + 1}" for j in range(fs.grid.d)] + ["empirical_var", "model_var"])
        for pt, e, m in zip(fs.grid.points, emp, model_var):
            w.writerow([repr(float(c)) for c in pt] + [repr(float(e)), repr(float(m))])
    written.append(vpath)
    _print({"kind": kind, "seed": seed, "n_samples": n, "n_points": fs.grid.n_points,
            "params_hash": fs.params_hash, "files": written})
    return 0


def cmd_smallball(args) -> int:
    import numpy as np
    from .analysis import MIN_SMALLBALL_GRID, small_ball_mc, smallball_eps_grid
    cfg = load_config(args.config)
    p = params_from(cfg)
    sec = _section(cfg, "smallball")
    seed = _seed(cfg, args)
    if "eps" in sec:
        eps = np.asarray(sec["eps"], dtype=float)
    else:
        eps = smallball_eps_grid(_number(sec, "eps_max", 1.2), _number(sec, "n_eps", 8, int))
    kw = {}
    for key, name in (("theta1", "theta1"), ("C1", "big_c1")):
        if key in sec:
            kw[name] = _number(sec, key)
    est = small_ball_mc(sec.get("field_kind", "fbm_slice"), sec.get("domain", "time"), p, eps,
                        _number(sec, "n_mc", 2000, int), seed,
                        n_time=_number(sec, "n_time", MIN_SMALLBALL_GRID + 1, int),
                        n_space=_number(sec, "n_space", MIN_SMALLBALL_GRID + 1, int),
                        t_fixed=_number(sec, "t_fixed", 1.0),
                        min_prob=_number(sec, "min_prob", 1e-3),
                        max_prob=_number(sec, "max_prob", 0.5), **kw)
    rep = est.to_dict()
    _write_json(_out(args, "smallball.json"), rep)
    with open(_out(args, "smallball.csv"), "w", newline="") as fh:
        fh.write(CSV_SCHEMA.format(name="smallball") + f" seed={seed} params_hash={est.params_digest}\n")
        w = csv.writer(fh)
        w.writerow(["eps", "prob", "std_error", "used_in_fit"])
        for e, pr, se, u in zip(est.epsilons, est.probs, est.std_errors, est.used):
            w.writerow([repr(float(e)), repr(float(pr)), repr(float(se)), int(u)])
    with open(_out(args, "smallball.dat"), "w") as fh:
        fh.write("# log(1/eps) log(-log P)\n")
        for e, pr in zip(est.epsilons, est.probs):
            if 0 < pr < 1:
                fh.write(f"{math.log(1 / e):.12g} {math.log(-math.log(pr)):.12g}\n")
    _print({k: rep[k] for k in ("fitted_exponent", "ci_halfwidth", "target_exponent", "n_mc",
                                "seed", "note")})
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread count")
    common.add_argument("--tolerance", type=float, default=None,
                        help="relative quadrature tolerance (variogram)")
    ap = argparse.ArgumentParser(prog="sfde", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, need_cfg in (("check", cmd_check, True), ("constants", cmd_constants, True),
                               ("variogram", cmd_variogram, True), ("simulate", cmd_simulate, True),
                               ("smallball", cmd_smallball, True), ("mlf", cmd_mlf, False)):
        sp = sub.add_parser(name, parents=[common])
        sp.set_defaults(func=fn, need_config=need_cfg)
        if name == "mlf":
            sp.add_argument("--a", type=float, required=True)
            sp.add_argument("--b", type=float, required=True)
            sp.add_argument("--z", type=float, required=True)
    return ap


def _thread_limit(n: Optional[int]):
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise ConfigError("--threads must be positive")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 64 if exc.code else 0
    try:
        if args.need_config and not args.config:
            raise ConfigError("--config is required")
        if args.out is None:
            args.out = "." if args.command != "check" else None
        with _thread_limit(args.threads):
            return args.func(args)
    except SfdeError as exc:
        info = {"error": exc.code, "message": str(exc)}
        if exc.details:
            info["details"] = exc.details
        print(json.dumps(info, default=str), file=sys.stderr)
        return exc.exit_status


if __name__ == "__main__":
    sys.exit(main())
