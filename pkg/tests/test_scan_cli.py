import math

import numpy as np
import pytest

from spinmagic.cli import EXIT_CONFIG, EXIT_ERROR, EXIT_NUMERIC, EXIT_OK, main
from spinmagic.dmrg import dmrg_ground_state
from spinmagic.exact import sre_exact
from spinmagic.magic import m2_closed_form_cluster_ising
from spinmagic.models import ModelSpec, build_mpo
from spinmagic.mps import MPS
from spinmagic.scan import (
    ConfigError,
    ScanConfig,
    fit_scaling,
    parse_config_text,
    read_csv,
    run_point,
    run_scan,
)
from spinmagic.models import SpecificationError

XY_CFG = """
# small XY scan
model.family = xy
model.J = 2.0
model.gamma = 0.7
sweep.param = h
sweep.start = 0.5
sweep.stop = 1.5
sweep.steps = 3
sizes = 8, 10
measures = S, CE, F, logLambda, M2_replica
dmrg.chi_max = 8
replica.chi_max = none
seed = 3
"""


def cfg_from(text):
    return ScanConfig.from_dict(parse_config_text(text))


def test_grid_shape_and_order():
    cfg = cfg_from(XY_CFG)
    grid = cfg.grid()
    assert len(grid) == 6
    assert [g[2] for g in grid] == [8, 8, 8, 10, 10, 10]
    assert [g[1]["h"] for g in grid[:3]] == [0.5, 1.0, 1.5]
    assert all(g[1]["gamma"] == 0.7 for g in grid)


def test_derived_parameters():
    cfg = cfg_from("model.family = xy\nmodel.J = 2\nderive = separability_circle\n"
                   "sweep.param = gamma\nsweep.start = 0.6\nsweep.stop = 0.6\nsweep.steps = 1\nsizes = 8\n")
    (_, p, _), = cfg.grid()
    assert math.isclose(p["h"], 0.8)
    cfg = cfg_from("model.family = cluster_ising\nderive = solvable_trajectory\nstate = cluster_ising_exact\n"
                   "sweep.param = g\nsweep.start = 0\nsweep.stop = 1\nsweep.steps = 2\nsizes = 8\n")
    assert [(p["g_zz"], p["g_x"], p["g_zxz"]) for _, p, _ in cfg.grid()] == [(2, 1, 1), (0, 4, 0)]


@pytest.mark.parametrize(
    "text, key",
    [
        ("model.family = potts\nsizes = 8\n", "model.family"),
        ("sizes = 8\n", "model.family"),
        ("model.family = xy\nmodel.delta = 1\nsizes = 8\n", "model.delta"),
        ("model.family = xy\nsizes = eight\n", "sizes"),
        ("model.family = xy\nsizes = 8\nmeasures = S, M3\n", "measures"),
        ("model.family = xy\nsizes = 8\nbogus = 1\n", "bogus"),
        ("model.family = xy\nsizes = 8\nsweep.param = g_x\nsweep.start = 0\nsweep.stop = 1\nsweep.steps = 2\n",
         "sweep.param"),
        ("model.family = xy\nsizes = 8\ncut = 9\n", "cut"),
        ("model.family = xy\nsizes = 8\ndmrg.chi_max = 1\n", "dmrg.chi_max"),
        ("model.family = xy\nsizes = 8\nderive = solvable_trajectory\n", "derive"),
    ],
)
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        cfg_from(text)
    assert info.value.key == key


def test_run_scan_values(tmp_path):
    cfg = cfg_from(XY_CFG)
    out = tmp_path / "xy.csv"
    records = run_scan(cfg, out)
    rows = read_csv(out)
    assert len(rows) == len(records) == 6
    header = out.read_text().splitlines()[:3]
    assert header[0].startswith("# spinmagic") and header[1].startswith("# config_sha256")
    for r in records:
        assert r.converged
        spec = ModelSpec("xy", r.L, {k: r.params[k] for k in ("J", "gamma", "h")})
        psi = dmrg_ground_state(build_mpo(spec), chi_max=8, seed=3).state.to_statevector()
        assert abs(r.measures["M2_replica"] - sre_exact(psi, 2)) < 1e-8


def test_single_point_equals_scan_row(tmp_path):
    cfg = cfg_from(XY_CFG.replace("M2_replica", "S2"))
    records = run_scan(cfg)
    idx, params, L = cfg.grid()[4]
    single = run_point(cfg, idx, params, L)
    for k, v in single.measures.items():
        assert abs(v - records[4].measures[k]) <= 1e-12


def test_scan_is_byte_deterministic(tmp_path):
    text = XY_CFG.replace("M2_replica", "M2_sampled") + "sampling.n_samples = 500\n"
    cfg = cfg_from(text)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_scan(cfg, a)
    run_scan(cfg, b)
    assert a.read_bytes() == b.read_bytes()


def test_parallel_scan_matches_serial(tmp_path):
    cfg = cfg_from(XY_CFG.replace("M2_replica", "S2"))
    run_scan(cfg, tmp_path / "serial.csv")
    cfg.workers = 2
    run_scan(cfg, tmp_path / "par.csv")
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "par.csv").read_bytes()


def test_cluster_exact_scan_matches_closed_form(tmp_path):
    cfg = cfg_from("model.family = cluster_ising\nderive = solvable_trajectory\nstate = cluster_ising_exact\n"
                   "model.periodic = true\nsweep.param = g\nsweep.start = -1\nsweep.stop = 1\nsweep.steps = 5\n"
                   "sizes = 24\nmeasures = S, M2_replica\nreplica.chi_max = none\n")
    for r in run_scan(cfg):
        g = r.params["g"]
        assert abs(r.measures["M2_replica"] / 24 - m2_closed_form_cluster_ising(g)) < 5e-3
        assert math.isclose(r.energy / 24, -2 * (1 + g * g), abs_tol=1e-9)


def test_fit_scaling():
    L = np.array([16.0, 32.0, 64.0])
    res = fit_scaling(list(zip(L, 0.1 + 0.25 * np.log(L))), "logL")
    assert math.isclose(res.slope, 0.25) and math.isclose(res.intercept, 0.1, abs_tol=1e-12)
    assert math.isclose(res.r_squared, 1.0)
    res = fit_scaling(list(zip(L, 3 * L)), "linear")
    assert math.isclose(res.slope, 3)
    with pytest.raises(SpecificationError):
        fit_scaling([(16, 1), (32, 2)], "linear")
    with pytest.raises(SpecificationError):
        fit_scaling(list(zip(L, L)), "cubic")


# ---------------------------------------------------------------------------
# CLI


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_gs_measure_sre(tmp_path, capsys):
    cfg = write(tmp_path, "tfim.cfg", "model.family = xy\nmodel.gamma = 1\nmodel.h = 1\nsizes = 8\n")
    state = str(tmp_path / "gs.mps")
    assert main(["gs", "--config", cfg, "--chi", "8", "--output", state]) == EXIT_OK
    out = capsys.readouterr().out
    assert "energy=" in out and "converged=true" in out
    assert main(["measure", "--state", state]) == EXIT_OK
    out = capsys.readouterr().out
    assert "S=" in out and "logLambda=" in out
    exact = sre_exact(MPS.load(state).to_statevector(), 2)
    assert main(["sre", "--state", state, "--method", "replica", "--chi", "0"]) == EXIT_OK
    val = float(capsys.readouterr().out.split()[0].split("=")[1])
    assert abs(val - exact) < 1e-9
    assert main(["sre", "--state", state, "--method", "exact"]) == EXIT_OK


def test_cli_scan_and_fit(tmp_path, capsys):
    cfg = write(tmp_path, "s.cfg", "model.family = xy\nmodel.J = 2\nmodel.gamma = 0.7\nmodel.h = 1\n"
                "sizes = 8, 12, 16\nmeasures = S\ndmrg.chi_max = 16\n")
    out = str(tmp_path / "s.csv")
    assert main(["scan", "--config", cfg, "--output", out]) == EXIT_OK
    capsys.readouterr()
    assert main(["fit", "--input", out, "--column", "S", "--form", "logL"]) == EXIT_OK
    line = capsys.readouterr().out
    assert "r_squared=" in line and "n=3" in line


def test_cli_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, "bad.cfg", "model.family = potts\nsizes = 8\n")
    assert main(["scan", "--config", bad, "--output", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert "model.family" in capsys.readouterr().err
    assert main(["measure", "--state", str(tmp_path / "missing.mps")]) == EXIT_ERROR
    assert main(["nonsense"]) == EXIT_CONFIG
    good = write(tmp_path, "ok.cfg", "model.family = xy\nsizes = 8\n")
    assert main(["scan", "--config", good, "--output", str(tmp_path / "no" / "dir.csv")]) == EXIT_ERROR
    # a corrupted cache holding a zero tensor cannot be normalized
    zero = MPS([np.zeros((1, 2, 1), dtype=complex)] * 3)
    zpath = str(tmp_path / "zero.mps")
    zero.save(zpath)
    assert main(["sre", "--state", zpath, "--method", "sampling", "--samples", "200"]) == EXIT_NUMERIC
