"""Command-line interface: ``spinmagic {gs, measure, scan, sre, orbit, fit}``.

Exit codes: 0 success, 1 I/O or other error, 2 malformed configuration or
arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np
import scipy.sparse.linalg

from . import __version__
from .clifford import run_orbit
from .dmrg import dmrg_ground_state
from .entspec import SpectralPanel
from .exact import sre_exact
from .magic import SamplingConsistencyError, sre_replica, sre_sampled
from .models import ModelSpec, SpecificationError, build_mpo
from .mps import MPS, NormalizationError, ResourceError
from .scan import ConfigError, ScanConfig, fit_scaling, parse_config_text, read_csv, run_scan
from .tensors import ContractViolation, FactorizationError

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

NUMERIC_ERRORS = (
    FactorizationError,
    SamplingConsistencyError,
    NormalizationError,
    ContractViolation,
    scipy.sparse.linalg.ArpackError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


def _model_from_config(path: str, L: int | None) -> tuple[ModelSpec, dict]:
    with open(path) as fh:
        raw = parse_config_text(fh.read())
    family = raw.get("model.family")
    if family is None:
        raise ConfigError("model.family", "missing")
    params = {}
    for k, v in raw.items():
        if k.startswith("model.") and k not in ("model.family", "model.periodic"):
            try:
                params[k[6:]] = float(v)
            except ValueError:
                raise ConfigError(k, f"not a number: {v!r}") from None
    if L is None:
        sizes = [s for s in raw.get("sizes", "").split(",") if s.strip()]
        if len(sizes) != 1:
            raise ConfigError("sizes", "gs needs exactly one size (or --L)")
        L = int(sizes[0])
    periodic = raw.get("model.periodic", "false").lower() in ("1", "true", "yes", "on")
    try:
        spec = ModelSpec(family, L, params, periodic)
    except SpecificationError as exc:
        raise ConfigError("model", str(exc)) from None
    return spec, raw


def cmd_gs(args) -> int:
    spec, raw = _model_from_config(args.config, args.L)
    chi = args.chi or int(raw.get("dmrg.chi_max", 64))
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    res = dmrg_ground_state(
        build_mpo(spec),
        chi_max=chi,
        energy_tol=float(raw.get("dmrg.energy_tol", 1e-10)),
        max_sweeps=int(raw.get("dmrg.max_sweeps", 30)),
        seed=seed,
        gap_chi=None if raw.get("dmrg.gap_chi") == "none" else int(raw.get("dmrg.gap_chi", 16)),
    )
    if args.output:
        res.state.save(args.output)
    print(
        f"energy={res.energy!r} converged={str(res.converged).lower()} sweeps={res.sweeps} "
        f"chi={res.state.max_bond} gap={res.gap!r} gap_flag={str(res.gap_flag).lower()}"
    )
    return EXIT_OK


def cmd_measure(args) -> int:
    state = MPS.load(args.state)
    cut = None if args.cut in (None, "half") else int(args.cut)
    d = SpectralPanel.from_spectrum(state.schmidt_spectrum(cut)).as_dict()
    print(" ".join(f"{k}={v!r}" for k, v in d.items()))
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = ScanConfig.from_file(args.config)
    if args.workers:
        cfg.workers = args.workers
    out = args.output or cfg.output
    if not out:
        raise ConfigError("output", "no output path (set output or pass --output)")
    records = run_scan(cfg, out)
    n_bad = sum(not r.converged for r in records)
    print(f"wrote {len(records)} rows to {out} ({n_bad} not converged)")
    return EXIT_OK


def cmd_sre(args) -> int:
    state = MPS.load(args.state)
    if args.method == "exact":
        value = sre_exact(state.to_statevector(), args.n)
        print(f"M{args.n:g}={value!r} method=exact std_error=0.0")
    elif args.method == "sampling":
        est = sre_sampled(state, args.n, args.samples, args.seed)
        print(f"M{args.n:g}={est.value!r} method=sampling std_error={est.std_error!r} "
              f"n_samples={est.n_samples}")
    else:
        if args.n != int(args.n):
            raise ConfigError("--n", "replica method needs an integer index")
        est = sre_replica(state, int(args.n), chi_max=args.chi or None)
        print(f"M{args.n:g}={est.value!r} method=replica chi_used={est.chi_used} "
              f"discarded={est.discarded_weight!r}")
    return EXIT_OK


def cmd_orbit(args) -> int:
    r = run_orbit(args.theta, args.L, args.layers, args.realizations, args.seed)
    print(
        f"theta={r.theta!r} L={r.L} mean_F={r.mean_F!r} mean_logLambda={r.mean_logLambda!r} "
        f"mean_CE={r.mean_CE!r} max_logLambda={r.max_logLambda!r} max_CE={r.max_CE!r} "
        f"m2_initial={r.m2_initial!r} m_lin_initial={r.m_lin_initial!r} drift_F={r.drift_F!r}"
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    rows = read_csv(args.input)
    filters = []
    for w in args.where or []:
        if "=" not in w:
            raise ConfigError("--where", f"expected key=value, got {w!r}")
        k, v = w.split("=", 1)
        filters.append((k, float(v)))
    pts = []
    for row in rows:
        if args.column not in row:
            raise ConfigError("--column", f"no column {args.column!r} in {args.input}")
        if all(math.isclose(float(row[k]), v, rel_tol=1e-9, abs_tol=1e-12) for k, v in filters):
            pts.append((float(row[args.x]), float(row[args.column])))
    res = fit_scaling(pts, args.form)
    print(f"form={res.form} intercept={res.intercept!r} slope={res.slope!r} "
          f"r_squared={res.r_squared!r} n={len(pts)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinmagic", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"spinmagic {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gs", help="DMRG ground state of a configured model")
    g.add_argument("--config", required=True)
    g.add_argument("--L", type=int)
    g.add_argument("--chi", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--output", help="cache file for the state")
    g.set_defaults(func=cmd_gs)

    m = sub.add_parser("measure", help="entanglement panel of a cached state")
    m.add_argument("--state", required=True)
    m.add_argument("--cut", default="half")
    m.set_defaults(func=cmd_measure)

    s = sub.add_parser("scan", help="run a parameter scan")
    s.add_argument("--config", required=True)
    s.add_argument("--output")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_scan)

    r = sub.add_parser("sre", help="stabilizer Renyi entropy of a cached state")
    r.add_argument("--state", required=True)
    r.add_argument("--method", choices=("exact", "sampling", "replica"), default="replica")
    r.add_argument("--n", type=float, default=2.0)
    r.add_argument("--samples", type=int, default=100_000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--chi", type=int, default=64, help="replica bond cap (0: uncompressed)")
    r.set_defaults(func=cmd_sre)

    o = sub.add_parser("orbit", help="Clifford-orbit antiflatness of a theta product state")
    o.add_argument("--theta", type=float, required=True)
    o.add_argument("--L", type=int, default=8)
    o.add_argument("--layers", type=int, default=200)
    o.add_argument("--realizations", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_orbit)

    f = sub.add_parser("fit", help="finite-size scaling fit of a CSV column")
    f.add_argument("--input", required=True)
    f.add_argument("--column", required=True)
    f.add_argument("--form", choices=("linear", "logL", "logL_squared"), required=True)
    f.add_argument("--x", default="L")
    f.add_argument("--where", action="append", help="row filter key=value (repeatable)")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpecificationError, ResourceError, ValueError) as exc:
        if isinstance(exc, NUMERIC_ERRORS):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, SpecificationError) else EXIT_ERROR
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
