"""Batch command line: calibrate, denoise, deconvolve, inpaint, diagnose.

Option precedence is command line > config file (key=value lines) >
built-in defaults.  Exit codes: 0 success/converged, 2 solver did not
converge (artifacts are still written), 1 usage or I/O errors.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .admm import AdmmConfig, admm_solve, write_history
from .grid import (SubsetSystem, build_system_global, build_system_s0,
                   build_system_s2, read_system)
from .imageio import read_image, write_image
from .operators import IdentityOperator, parse_operator
from .poisson import PoissonConfig, poisson_admm
from .prox import CostSpec
from .stats import (append_quantile, assign_weights, diagnose_violations,
                    lookup_quantile, simulate_quantile)

__all__ = ["main"]

ENV_QCACHE = "SMRE_QCACHE"

DEFAULTS = {
    "alpha": 0.9,
    "trials": 5000,
    "seed": 0,
    "noise": "gaussian",
    "system": "s2",
    "lam": 0.001,
    "zeta": None,
    "delta": 0.01,
    "gamma": 0.0,
    "beta": 0.0,
    "max_iter": 5000,
    "c_anscombe": 0.375,
    "sigma": None,
    "op": None,
    "qcache": None,
    "scale": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: _Parser):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--alpha", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--system", help="s2 | s0:<max side> | global | custom:<path>")
    p.add_argument("--qcache", help=f"quantile cache path (default ${ENV_QCACHE})")
    p.add_argument("--require-cache", action="store_true",
                   help="fail instead of simulating on a cache miss")


def _add_solver(p: _Parser):
    _add_common(p)
    p.add_argument("--sigma", type=float, help="noise standard deviation")
    p.add_argument("--noise", choices=["gaussian", "poisson"])
    p.add_argument("--op", help="identity | gauss:std=<px> | "
                                "gauss:fwhm_nm=<v>,pitch_nm=<v> | mask:<path>")
    p.add_argument("--lambda", dest="lam", type=float, help="ADMM step size")
    p.add_argument("--zeta", type=float)
    p.add_argument("--delta", type=float, help="floor inside sqrt(Ku), Poisson")
    p.add_argument("--c-anscombe", dest="c_anscombe", type=float)
    p.add_argument("--gamma", type=float, help="L2 augmentation weight")
    p.add_argument("--beta", type=float, help="TV smoothing for diagnostics")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--history", help="per-iteration diagnostics CSV path")


def _build_parser() -> _Parser:
    ap = _Parser(prog="smre", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="simulate or load a noise quantile")
    _add_common(p)
    p.add_argument("--dims", nargs=2, type=int, metavar=("M", "N"))
    p.add_argument("--input", help="take grid dimensions from this image")

    for name in ("denoise", "deconvolve", "inpaint"):
        p = sub.add_parser(name, help=f"{name} an image")
        p.add_argument("input")
        _add_solver(p)

    p = sub.add_parser("diagnose", help="mark constraint-violating sets")
    p.add_argument("recon", help="reconstruction image")
    _add_common(p)
    p.add_argument("--data", required=True, help="observed data image")
    p.add_argument("--sigma", type=float)
    p.add_argument("--noise", choices=["gaussian", "poisson"])
    p.add_argument("--op", help="forward operator descriptor")
    p.add_argument("--scale", type=int, help="restrict to sets of this cardinality")
    p.add_argument("--out", required=True)
    return ap


def _load_config(path) -> dict:
    cfg = {}
    with open(path, "r", encoding="ascii") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{ln}: expected key=value")
            cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


_CONVERT = {"alpha": float, "trials": int, "seed": int, "lam": float,
            "zeta": float, "delta": float, "gamma": float, "beta": float,
            "max_iter": int, "sigma": float, "c_anscombe": float,
            "scale": int}


class _Options:
    """CLI > config file > defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.filecfg = {}
        if self.args.get("config"):
            self.filecfg = _load_config(self.args["config"])

    def get(self, key):
        v = self.args.get(key)
        if v is not None and v is not False:
            return v
        if key in self.filecfg:
            raw = self.filecfg[key]
            conv = _CONVERT.get(key, str)
            try:
                return conv(raw)
            except ValueError:
                raise UsageError(f"config: bad value for {key}: {raw!r}") from None
        return DEFAULTS.get(key)


def _build_system(spec: str, m: int, n: int) -> SubsetSystem:
    if spec == "s2":
        return build_system_s2(m, n)
    if spec == "global":
        return build_system_global(m, n)
    if spec.startswith("s0:"):
        return build_system_s0(m, n, int(spec[3:]))
    if spec.startswith("custom:"):
        sys_ = read_system(spec[len("custom:"):])
        if (sys_.m, sys_.n) != (m, n):
            raise UsageError(f"custom system is {sys_.m}x{sys_.n}, "
                             f"image is {m}x{n}")
        return sys_
    raise UsageError(f"unknown system spec {spec!r}")


def _get_quantile(opt: _Options, sys_: SubsetSystem):
    alpha = float(opt.get("alpha"))
    trials = int(opt.get("trials"))
    seed = int(opt.get("seed"))
    qcache = opt.get("qcache") or os.environ.get(ENV_QCACHE)
    if qcache:
        rec = lookup_quantile(qcache, sys_.m, sys_.n, sys_.system_id,
                              alpha, trials)
        if rec is not None:
            return rec, True
    if opt.get("require_cache"):
        raise UsageError(
            f"no cached quantile for ({sys_.m}x{sys_.n}, {sys_.system_id}, "
            f"alpha={alpha}, trials={trials}) and simulation not permitted")
    rec = simulate_quantile(sys_.m, sys_.n, sys_, alpha, trials, seed)
    if qcache:
        append_quantile(qcache, rec)
    return rec, False


def _cmd_calibrate(opt: _Options) -> int:
    if opt.get("dims"):
        m, n = opt.get("dims")
    elif opt.get("input"):
        m, n = read_image(opt.get("input")).shape
    else:
        raise UsageError("calibrate needs --dims M N or --input IMAGE")
    sys_ = _build_system(opt.get("system"), int(m), int(n))
    rec, cached = _get_quantile(opt, sys_)
    src = "cache hit" if cached else "simulated"
    print(f"q_alpha={rec.q_alpha:.6f} ({src}; {rec.m}x{rec.n} "
          f"{rec.system_id} alpha={rec.alpha} trials={rec.trials} "
          f"seed={rec.seed})")
    return 0


def _make_operator(opt: _Options, command: str, shape):
    desc = opt.get("op")
    if command == "denoise":
        if desc not in (None, "identity"):
            raise UsageError("denoise uses the identity operator")
        return IdentityOperator()
    if command == "deconvolve":
        if not desc or not desc.startswith("gauss:"):
            raise UsageError("deconvolve requires --op gauss:...")
    if command == "inpaint":
        if not desc or not desc.startswith("mask:"):
            raise UsageError("inpaint requires --op mask:<path>")

    def load_mask(path):
        mask = read_image(path, normalize=False)
        if mask.shape != shape:
            raise UsageError(f"mask shape {mask.shape} does not match image")
        return (mask > 0).astype(np.float64)

    return parse_operator(desc, mask_loader=load_mask)


def _cmd_solve(opt: _Options, command: str) -> int:
    noise = opt.get("noise")
    normalize = noise == "gaussian"
    Y = read_image(opt.get("input"), normalize=normalize)
    K = _make_operator(opt, command, Y.shape)
    sys_ = _build_system(opt.get("system"), *Y.shape)
    rec, _ = _get_quantile(opt, sys_)
    sys_ = assign_weights(sys_, rec)
    gamma = float(opt.get("gamma"))
    cost = CostSpec("tv+l2" if gamma > 0 else "tv", gamma, float(opt.get("beta")))
    acfg = AdmmConfig(lam=float(opt.get("lam")), zeta=opt.get("zeta"),
                      alpha=float(opt.get("alpha")),
                      max_outer=int(opt.get("max_iter")))
    if noise == "gaussian":
        sigma = opt.get("sigma")
        if sigma is None:
            raise UsageError("gaussian noise requires --sigma")
        report = admm_solve(Y, K, sys_, float(sigma) ** 2, cost, acfg)
    else:
        pcfg = PoissonConfig(delta=float(opt.get("delta")),
                             c_anscombe=float(opt.get("c_anscombe")),
                             admm=acfg)
        report = poisson_admm(Y, K, sys_, cost, pcfg)
    write_image(report.u_hat, opt.get("out"))
    if opt.get("history"):
        write_history(report, opt.get("history"))
    print(f"{command}: {report.status} after {report.iterations} iterations "
          f"(stat={report.history[-1][2]:.4f}, q_alpha={rec.q_alpha:.4f})")
    return 0 if report.converged else 2


def _cmd_diagnose(opt: _Options) -> int:
    noise = opt.get("noise")
    normalize = noise == "gaussian"
    recon = read_image(opt.get("recon"), normalize=normalize)
    Y = read_image(opt.get("data"), normalize=normalize)
    if Y.shape != recon.shape:
        raise UsageError("data and reconstruction shapes differ")
    desc = opt.get("op") or "identity"

    def load_mask(path):
        mask = read_image(path, normalize=False)
        return (mask > 0).astype(np.float64)

    K = parse_operator(desc, mask_loader=load_mask)
    sys_ = _build_system(opt.get("system"), *Y.shape)
    rec, _ = _get_quantile(opt, sys_)
    sys_ = assign_weights(sys_, rec)
    if noise == "gaussian":
        sigma = opt.get("sigma")
        if sigma is None:
            raise UsageError("gaussian noise requires --sigma")
        residual = Y - K.apply(recon)
        sigma2 = float(sigma) ** 2
    else:
        from .poisson import anscombe
        residual = anscombe(Y) - 2.0 * np.sqrt(np.maximum(K.apply(recon), 0.0))
        sigma2 = 1.0
    mask = diagnose_violations(residual, sys_, sigma2, scale_filter=opt.get("scale"))
    write_image(mask, opt.get("out"))
    print(f"diagnose: {int(mask.sum())} of {mask.size} pixels flagged")
    return 0


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        opt = _Options(args)
        if args.command == "calibrate":
            return _cmd_calibrate(opt)
        if args.command in ("denoise", "deconvolve", "inpaint"):
            return _cmd_solve(opt, args.command)
        return _cmd_diagnose(opt)
    except UsageError as e:
        print(f"smre: error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as e:
        print(f"smre: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
