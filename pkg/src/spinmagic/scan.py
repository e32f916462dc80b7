"""Parameter scans, the per-point measure panel, CSV output and scaling fits.

Config files are flat ``key = value`` lines with dotted keys; ``#`` starts a
comment. Recognized keys::

    model.family        one of the model families
    model.<param>       fixed couplings (J, gamma, delta, h, D, g_zz, ...)
    model.periodic      true/false (default false)
    sweep.param         swept parameter name (a model parameter, or ``g``
                        when ``derive = solvable_trajectory``)
    sweep.start / sweep.stop / sweep.steps
    sweep2.param, sweep2.start, sweep2.stop, sweep2.steps   optional second axis
    derive              separability_circle (h from gamma) or
                        solvable_trajectory (g_zz, g_x, g_zxz from g)
    state               dmrg (default) or cluster_ising_exact
    sizes               comma-separated chain lengths
    dmrg.chi_max, dmrg.energy_tol, dmrg.max_sweeps, dmrg.cutoff
    dmrg.gap_chi        bond cap of the excited-state run for the gap, or none
    measures            comma-separated subset of MEASURES
    sampling.n_samples  draws for M2_sampled
    replica.chi_max, replica.source_chi, replica.cutoff
    cut                 bond index or ``half``
    seed, output, workers, record_wall_time
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .dmrg import dmrg_ground_state
from .entspec import SpectralPanel
from .magic import sre_replica, sre_sampled
from .models import (
    FAMILIES,
    ModelSpec,
    SpecificationError,
    build_mpo,
    cluster_ising_exact_mps,
    separability_field,
    solvable_trajectory,
)

MEASURES = ("S", "S2", "S3", "CE", "F", "Lambda", "logLambda", "M2_replica", "M2_sampled")
DERIVE_MODES = ("separability_circle", "solvable_trajectory")
STATE_MODES = ("dmrg", "cluster_ising_exact")


class ConfigError(SpecificationError):
    """Malformed scan configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value
    return out


def _float(raw: dict, key: str, default=None) -> float:
    if key not in raw:
        if default is None:
            raise ConfigError(key, "missing")
        return default
    try:
        return float(raw[key])
    except ValueError:
        raise ConfigError(key, f"not a number: {raw[key]!r}") from None


def _int(raw: dict, key: str, default=None) -> int:
    if key not in raw:
        if default is None:
            raise ConfigError(key, "missing")
        return default
    try:
        return int(raw[key])
    except ValueError:
        raise ConfigError(key, f"not an integer: {raw[key]!r}") from None


def _bool(raw: dict, key: str, default: bool) -> bool:
    if key not in raw:
        return default
    v = raw[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"not a boolean: {raw[key]!r}")


def _list(raw: dict, key: str) -> list[str]:
    return [s.strip() for s in raw.get(key, "").split(",") if s.strip()]


@dataclass(frozen=True)
class Sweep:
    param: str
    start: float
    stop: float
    steps: int

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.steps)


@dataclass
class ScanConfig:
    family: str
    params: dict
    sweeps: list[Sweep]
    sizes: list[int]
    periodic: bool = False
    derive: str | None = None
    state: str = "dmrg"
    chi_max: int = 64
    energy_tol: float = 1e-10
    max_sweeps: int = 30
    dmrg_cutoff: float = 1e-12
    gap_chi: int | None = 16
    measures: list[str] = field(default_factory=lambda: ["S", "CE", "F"])
    n_samples: int = 10_000
    replica_chi: int | None = 64
    replica_source_chi: int | None = None
    replica_cutoff: float = 1e-12
    cut: int | None = None
    seed: int = 0
    output: str | None = None
    workers: int = 1
    record_wall_time: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, raw: dict[str, str]) -> "ScanConfig":
        known_top = {
            "derive", "state", "sizes", "measures", "cut", "seed", "output", "workers",
            "record_wall_time",
        }
        known_sections = {"model", "sweep", "sweep2", "dmrg", "sampling", "replica"}
        for key in raw:
            head = key.split(".", 1)[0]
            if "." in key and head not in known_sections:
                raise ConfigError(key, "unknown section")
            if "." not in key and key not in known_top:
                raise ConfigError(key, "unknown key")

        family = raw.get("model.family")
        if family is None:
            raise ConfigError("model.family", "missing")
        if family not in FAMILIES:
            raise ConfigError("model.family", f"unknown family {family!r}")
        fam = FAMILIES[family]
        params = {}
        for key in raw:
            if key.startswith("model.") and key not in ("model.family", "model.periodic"):
                name = key[len("model."):]
                if name not in fam.defaults:
                    raise ConfigError(key, f"not a parameter of family {family!r}")
                params[name] = _float(raw, key)

        derive = raw.get("derive") or None
        if derive is not None and derive not in DERIVE_MODES:
            raise ConfigError("derive", f"expected one of {DERIVE_MODES}")
        if derive == "solvable_trajectory" and family != "cluster_ising":
            raise ConfigError("derive", "solvable_trajectory needs model.family = cluster_ising")
        if derive == "separability_circle" and family != "xy":
            raise ConfigError("derive", "separability_circle needs model.family = xy")
        allowed = set(fam.defaults) | ({"g"} if derive == "solvable_trajectory" else set())

        sweeps = []
        for sec in ("sweep", "sweep2"):
            if f"{sec}.param" not in raw:
                continue
            p = raw[f"{sec}.param"]
            if p not in allowed:
                raise ConfigError(f"{sec}.param", f"{p!r} is not a parameter of family {family!r}")
            steps = _int(raw, f"{sec}.steps")
            if steps < 1:
                raise ConfigError(f"{sec}.steps", "must be >= 1")
            sweeps.append(Sweep(p, _float(raw, f"{sec}.start"), _float(raw, f"{sec}.stop"), steps))
        if derive == "solvable_trajectory" and "g" not in [s.param for s in sweeps]:
            raise ConfigError("sweep.param", "solvable_trajectory needs a sweep over g")
        if derive == "separability_circle" and "h" in [s.param for s in sweeps]:
            raise ConfigError("sweep.param", "h is derived on the separability circle")

        try:
            sizes = [int(s) for s in _list(raw, "sizes")]
        except ValueError:
            raise ConfigError("sizes", f"not a list of integers: {raw.get('sizes')!r}") from None
        if not sizes:
            raise ConfigError("sizes", "must list at least one chain length")
        for L in sizes:
            if L < fam.min_L:
                raise ConfigError("sizes", f"family {family!r} needs L >= {fam.min_L}")

        measures = _list(raw, "measures") or ["S", "CE", "F"]
        for m in measures:
            if m not in MEASURES:
                raise ConfigError("measures", f"unknown measure {m!r}; choose from {MEASURES}")

        state = raw.get("state", "dmrg")
        if state not in STATE_MODES:
            raise ConfigError("state", f"expected one of {STATE_MODES}")
        if state == "cluster_ising_exact" and derive != "solvable_trajectory":
            raise ConfigError("state", "cluster_ising_exact needs derive = solvable_trajectory")

        cut_raw = raw.get("cut", "half")
        if cut_raw == "half":
            cut = None
        else:
            cut = _int(raw, "cut")
            if any(not 0 < cut < L for L in sizes):
                raise ConfigError("cut", f"bond {cut} outside the chain for some size")

        rchi = raw.get("replica.chi_max", "64")
        rsrc = raw.get("replica.source_chi")
        gchi = raw.get("dmrg.gap_chi", "16")
        cfg = cls(
            family=family,
            params=params,
            sweeps=sweeps,
            sizes=sizes,
            periodic=_bool(raw, "model.periodic", False),
            derive=derive,
            state=state,
            chi_max=_int(raw, "dmrg.chi_max", 64),
            energy_tol=_float(raw, "dmrg.energy_tol", 1e-10),
            max_sweeps=_int(raw, "dmrg.max_sweeps", 30),
            dmrg_cutoff=_float(raw, "dmrg.cutoff", 1e-12),
            gap_chi=None if gchi == "none" else _int(raw, "dmrg.gap_chi", 16),
            measures=measures,
            n_samples=_int(raw, "sampling.n_samples", 10_000),
            replica_chi=None if rchi == "none" else _int(raw, "replica.chi_max", 64),
            replica_source_chi=None if rsrc in (None, "none") else _int(raw, "replica.source_chi"),
            replica_cutoff=_float(raw, "replica.cutoff", 1e-12),
            cut=cut,
            seed=_int(raw, "seed", 0),
            output=raw.get("output"),
            workers=_int(raw, "workers", 1),
            record_wall_time=_bool(raw, "record_wall_time", False),
            raw=dict(raw),
        )
        if cfg.chi_max < 2:
            raise ConfigError("dmrg.chi_max", "must be >= 2")
        if cfg.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if "M2_sampled" in measures and cfg.n_samples < 100:
            raise ConfigError("sampling.n_samples", "must be >= 100")
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "ScanConfig":
        return cls.from_dict(parse_config_text(Path(path).read_text()))

    def config_hash(self) -> str:
        text = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw))
        return hashlib.sha256(text.encode()).hexdigest()

    def param_columns(self) -> list[str]:
        cols = list(FAMILIES[self.family].defaults)
        if self.derive == "solvable_trajectory":
            cols = ["g"] + cols
        return cols

    def grid(self) -> list[tuple[int, dict, int]]:
        """Grid points ``(index, params, L)``; sizes vary slowest, the last sweep fastest."""
        axes = [s.values() for s in self.sweeps]
        names = [s.param for s in self.sweeps]
        points = []
        for L in self.sizes:
            for combo in (np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T
                          if axes else [()]):
                p = dict(self.params)
                p.update({n: float(v) for n, v in zip(names, combo)})
                points.append((len(points), self._derived(p), L))
        return points

    def _derived(self, p: dict) -> dict:
        if self.derive == "separability_circle":
            p["h"] = separability_field(p.get("gamma", 0.0))
        elif self.derive == "solvable_trajectory":
            p["g_zz"], p["g_x"], p["g_zxz"] = solvable_trajectory(p["g"])
        return p


@dataclass
class ScanRecord:
    index: int
    family: str
    params: dict
    L: int
    energy: float
    gap: float
    gap_flag: bool
    converged: bool
    sweeps: int
    chi: int
    discarded: float
    measures: dict
    wall_time: float = 0.0


def _measure_columns(measures: Sequence[str]) -> list[str]:
    cols = []
    for m in MEASURES:
        if m not in measures:
            continue
        cols.append(m)
        if m == "M2_replica":
            cols.append("M2_replica_discarded")
        if m == "M2_sampled":
            cols.append("M2_sampled_err")
    return cols


def compute_panel(state, measures: Sequence[str], cut=None, n_samples=10_000, seed=0,
                  replica_chi=64, replica_source_chi=None, replica_cutoff=1e-12) -> dict:
    """Requested measures of one state, keyed by CSV column name."""
    out: dict[str, float] = {}
    spectral = {"S", "S2", "S3", "CE", "F", "Lambda", "logLambda"} & set(measures)
    if spectral:
        d = SpectralPanel.from_spectrum(state.schmidt_spectrum(cut)).as_dict()
        for m in spectral:
            out[m] = float(d[m])
    if "M2_replica" in measures:
        est = sre_replica(state, 2, chi_max=replica_chi, cutoff=replica_cutoff,
                          source_chi=replica_source_chi)
        out["M2_replica"] = est.value
        out["M2_replica_discarded"] = est.discarded_weight
    if "M2_sampled" in measures:
        est = sre_sampled(state, 2.0, n_samples, seed)
        out["M2_sampled"] = est.value
        out["M2_sampled_err"] = est.std_error
    return out


def run_point(cfg: ScanConfig, index: int, params: dict, L: int) -> ScanRecord:
    t0 = time.perf_counter()
    model_params = {k: v for k, v in params.items() if k in FAMILIES[cfg.family].defaults}
    spec = ModelSpec(cfg.family, L, model_params, cfg.periodic)
    mpo = build_mpo(spec)
    if cfg.state == "cluster_ising_exact":
        state = cluster_ising_exact_mps(params["g"], L)
        energy = state.expectation(mpo)
        gap, gap_flag, converged, sweeps, disc = math.nan, False, True, 0, 0.0
    else:
        res = dmrg_ground_state(
            mpo,
            chi_max=cfg.chi_max,
            energy_tol=cfg.energy_tol,
            max_sweeps=cfg.max_sweeps,
            seed=cfg.seed,
            cutoff=cfg.dmrg_cutoff,
            gap_chi=cfg.gap_chi,
        )
        state, energy = res.state, res.energy
        gap, gap_flag, converged, sweeps, disc = (
            res.gap, res.gap_flag, res.converged, res.sweeps, res.max_discarded,
        )
    meas = compute_panel(
        state, cfg.measures, cfg.cut, cfg.n_samples, cfg.seed,
        cfg.replica_chi, cfg.replica_source_chi, cfg.replica_cutoff,
    )
    return ScanRecord(index, cfg.family, params, L, energy, gap, gap_flag, converged, sweeps,
                      state.max_bond, disc, meas, time.perf_counter() - t0)


def _run_point_args(args):
    return run_point(*args)


def run_scan(cfg: ScanConfig, output: str | Path | None = None) -> list[ScanRecord]:
    """Evaluate every grid point and write the CSV (if an output path is set).

    The output file is opened before any computation so an unwritable path
    fails fast.
    """
    path = output if output is not None else cfg.output
    fh = open(path, "w", newline="") if path else None
    try:
        points = cfg.grid()
        tasks = [(cfg, i, p, L) for i, p, L in points]
        if cfg.workers > 1 and len(tasks) > 1:
            with concurrent.futures.ProcessPoolExecutor(cfg.workers) as pool:
                records = list(pool.map(_run_point_args, tasks))
        else:
            records = [_run_point_args(t) for t in tasks]
        records.sort(key=lambda r: r.index)
        if fh is not None:
            fh.write(records_to_csv(cfg, records))
    finally:
        if fh is not None:
            fh.close()
    return records


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def csv_columns(cfg: ScanConfig) -> list[str]:
    cols = ["index", "family"] + cfg.param_columns()
    cols += ["L", "energy", "gap", "gap_flag", "converged", "sweeps", "chi", "discarded"]
    cols += _measure_columns(cfg.measures)
    if cfg.record_wall_time:
        cols.append("wall_time")
    return cols


def records_to_csv(cfg: ScanConfig, records: Iterable[ScanRecord]) -> str:
    buf = io.StringIO()
    buf.write(f"# spinmagic {__version__}\n")
    buf.write(f"# config_sha256 {cfg.config_hash()}\n")
    buf.write(f"# seed {cfg.seed}\n")
    cols = csv_columns(cfg)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = []
        for c in cols:
            if c == "index":
                row.append(_fmt(r.index))
            elif c == "family":
                row.append(r.family)
            elif c in r.params:
                row.append(_fmt(r.params[c]))
            elif c in r.measures:
                row.append(_fmt(r.measures[c]))
            elif c == "wall_time":
                row.append(_fmt(r.wall_time))
            else:
                row.append(_fmt(getattr(r, c)))
        w.writerow(row)
    return buf.getvalue()


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------------------
# finite-size scaling

FIT_FORMS = {
    "linear": lambda L: L,
    "logL": np.log,
    "logL_squared": lambda L: np.log(L) ** 2,
}


@dataclass
class FitResult:
    form: str
    intercept: float
    slope: float
    r_squared: float

    @property
    def coefficients(self) -> tuple[float, float]:
        return self.intercept, self.slope


def fit_scaling(points: Sequence[tuple[float, float]], form: str) -> FitResult:
    """Least-squares ``value = a + b * f(L)`` with ``f`` chosen by ``form``."""
    if form not in FIT_FORMS:
        raise SpecificationError(f"unknown fit form {form!r}; choose from {sorted(FIT_FORMS)}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(np.unique(pts[:, 0])) < 3:
        raise SpecificationError("fit_scaling needs at least three distinct sizes")
    x = FIT_FORMS[form](pts[:, 0])
    y = pts[:, 1]
    A = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (a + b * x)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(form, float(a), float(b), r2)
