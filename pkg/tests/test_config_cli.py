import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixedpipe import cli
from mixedpipe.cli import convergence_harness, emit_outputs, main
from mixedpipe.closures import FluidConstants
from mixedpipe.config import PRESETS, ConfigError, parse_config, preset, serialize
from mixedpipe.solver import BoundaryCondition, ProfileSpec, Region, SimConfig, run

MINIMAL = "time.t_end = 1.0\n"


def test_minimal_config_uses_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.t_end == 1.0
    assert cfg.cells == SimConfig().cells
    assert cfg.fluid == FluidConstants()


def test_full_config_with_units():
    text = """
    # dam break
    profile.length = 100 m
    profile.radius = 1 m
    mesh.cells = 200
    time.t_end = 10 s
    time.cfl = 0.5
    bc.left.kind = wall
    bc.right.kind = wall
    init.0.x_end = 50 m
    init.0.level = 0.5 m
    init.1.level = -0.5 m
    output.probes = 50, 150
    """
    cfg = parse_config(text)
    assert cfg.profile.length == 100.0 and cfg.cells == 200 and cfg.cfl == 0.5
    assert cfg.init == (Region(x_end=50.0, level=0.5), Region(level=-0.5))
    assert cfg.probes == (50, 150)


@pytest.mark.parametrize("text,key", [
    ("time.t_end = 1\ntime.cfl = 1.5\n", "time.cfl"),
    ("time.t_end = 1\nbc.left.kind = reservoir\nbc.left.level = 2.0\n", "bc.left.level"),
    ("time.t_end = 1\nmesh.colour = 3\n", "mesh.colour"),
    ("time.t_end = 1\nprofile.length = 10 ft\n", "profile.length"),
    ("time.t_end = 1\nprofile.length = ten\n", "profile.length"),
    ("time.t_end = 1\ntime.t_end = 2\n", "time.t_end"),
    ("mesh.cells = 10\n", "time.t_end"),
    ("time.t_end = 1\nbc.right.kind = sluice\n", "bc.right.kind"),
    ("time.t_end = 1\ninit.1.level = 0\n", "init"),
    ("time.t_end = 1\nmesh.cells = 10\noutput.probes = 12\n", "output.probes"),
    ("time.t_end = 1\nbc.left.kind = periodic\n", "bc"),
    ("time.t_end = 1\njust some words\n", "line 2"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert str(info.value).startswith(key)


def test_reservoir_level_checked_against_local_radius():
    ok = "time.t_end = 1\nprofile.radius = 2\nbc.left.kind = reservoir\nbc.left.level = 1.5\n"
    assert parse_config(ok).bc_left.level == 1.5


finite = st.floats(0.05, 5.0, allow_nan=False)


@st.composite
def configs(draw):
    length = draw(st.floats(10.0, 500.0))
    radius = draw(st.floats(0.2, 2.0))
    cells = draw(st.integers(3, 400))
    nreg = draw(st.integers(1, 3))
    cuts = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=nreg - 1, max_size=nreg - 1)))
    regions = []
    for k in range(nreg):
        x_end = cuts[k] * length if k < nreg - 1 else math.inf
        if draw(st.booleans()):
            regions.append(Region(x_end=x_end, level=draw(st.floats(-0.9, 0.9)) * radius,
                                  velocity=draw(st.floats(-2.0, 2.0))))
        else:
            regions.append(Region(x_end=x_end, ratio=draw(st.floats(1.0, 1.01)),
                                  discharge=draw(st.floats(-3.0, 3.0))))
    left = draw(st.sampled_from([
        BoundaryCondition("wall"),
        BoundaryCondition("reservoir", level=0.3 * radius),
        BoundaryCondition("discharge", discharge=1.25),
    ]))
    right = draw(st.sampled_from([
        BoundaryCondition("wall"),
        BoundaryCondition("valve", discharge=0.5, close_time=draw(finite)),
    ]))
    return SimConfig(
        profile=ProfileSpec(length=length, radius=radius, slope=draw(st.floats(-0.05, 0.05))),
        cells=cells, cfl=draw(st.floats(0.1, 1.0)), t_end=draw(finite), output_every=draw(st.floats(0.0, 1.0)),
        fluid=FluidConstants(Ks=draw(st.sampled_from([math.inf, 70.0, 33.3]))),
        bc_left=left, bc_right=right, init=tuple(regions),
        probes=tuple(sorted(set(draw(st.lists(st.integers(0, cells - 1), max_size=3))))),
    )


@given(configs())
def test_serialize_round_trip(cfg):
    text = serialize(cfg)
    assert parse_config(text) == cfg
    assert serialize(parse_config(text)) == text


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    cfg = preset(name)
    assert parse_config(serialize(cfg)) == cfg


def test_unknown_preset_lists_available():
    with pytest.raises(ConfigError) as info:
        preset("flood")
    for name in PRESETS:
        assert name in str(info.value)


def _small_traj(probes=(1, 3)):
    cfg = SimConfig(profile=ProfileSpec(length=10.0), cells=5, t_end=1.0, output_every=0.25,
                    init=(Region(x_end=5.0, level=0.4), Region(level=-0.2)), probes=probes)
    return run(cfg)


def test_emit_outputs_files(tmp_path):
    traj = _small_traj()
    man = emit_outputs(traj, traj.mesh, tmp_path / "out")
    rows = (tmp_path / "out" / "snapshots.csv").read_text().splitlines()
    assert rows[0] == ",".join(cli.SNAPSHOT_COLUMNS)
    assert len(rows) == 1 + traj.mesh.n * len(traj.snapshots)
    probes = (tmp_path / "out" / "probes.csv").read_text().splitlines()
    assert probes[0].split(",")[:4] == ["t", "A@1", "Q@1", "E@1"]
    assert len(probes) == 1 + len(traj.snapshots)
    diag = (tmp_path / "out" / "diagnostics.csv").read_text().splitlines()
    assert len(diag) == 1 + len(traj.diagnostics)
    for path in man.files.values():
        assert (tmp_path / "out").joinpath(path.split("/")[-1]).exists()
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert parse_config(manifest["config"]) == traj.config


def test_emit_outputs_values_round_trip(tmp_path):
    traj = _small_traj(probes=())
    emit_outputs(traj, traj.mesh, tmp_path)
    assert not (tmp_path / "probes.csv").exists()
    data = np.loadtxt(tmp_path / "snapshots.csv", delimiter=",", skiprows=1)
    last = data[-traj.mesh.n:]
    np.testing.assert_array_equal(last[:, 2], traj.snapshots[-1].A)
    np.testing.assert_array_equal(last[:, 3], traj.snapshots[-1].Q)


def test_emit_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    emit_outputs(_small_traj(), _small_traj().mesh, a)
    emit_outputs(_small_traj(), _small_traj().mesh, b)
    for name in ("snapshots.csv", "diagnostics.csv", "probes.csv", "manifest.json"):
        assert (a / name).read_bytes().replace(b"/a/", b"/x/") == (b / name).read_bytes().replace(b"/b/", b"/x/")


def test_emit_outputs_rejects_empty(tmp_path):
    traj = _small_traj()
    with pytest.raises(ValueError):
        emit_outputs(dataclasses.replace(traj, snapshots=[]), traj.mesh, tmp_path)


def test_convergence_identical_levels_zero():
    cfg = SimConfig(profile=ProfileSpec(length=10.0), t_end=0.5, init=(Region(x_end=5.0, level=0.3), Region(level=0.0)))
    table = convergence_harness(cfg, [20, 20])
    assert table.err_A == (0.0, 0.0) and table.err_Q == (0.0, 0.0)


def test_convergence_still_water_rounding_level():
    cfg = SimConfig(profile=ProfileSpec(length=10.0), t_end=1.0, init=(Region(level=0.2),))
    table = convergence_harness(cfg, [10, 20, 40])
    assert max(table.err_A) <= 1e-12 and max(table.err_Q) <= 1e-12


def test_convergence_smooth_free_surface_order():
    cfg = SimConfig(profile=ProfileSpec(length=20.0), t_end=1.0, bc_left=BoundaryCondition("periodic"),
                    bc_right=BoundaryCondition("periodic"),
                    init=(Region(level=0.0, hump_amplitude=0.05, hump_center=10.0, hump_width=4.0),))
    table = convergence_harness(cfg, [25, 50, 100, 400])
    assert table.order_A[0] >= 0.8 and table.order_A[1] >= 0.8
    assert "cells,err_A" in table.to_text()


def test_convergence_level_errors():
    cfg = SimConfig(t_end=0.1)
    with pytest.raises(ValueError):
        convergence_harness(cfg, [30])
    with pytest.raises(ValueError):
        convergence_harness(cfg, [30, 40])


def _stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return json.loads(err[0])


def test_cli_run_preset(tmp_path, capsys):
    code = main(["run", "--preset", "still-water", "--tmax", "0.5", "--cells", "10", "--out-dir", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "snapshots.csv").exists() and (tmp_path / "manifest.json").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "mesh.cells = 10" in manifest["config"]


def test_cli_run_config_file(tmp_path, capsys):
    cfg = tmp_path / "case.cfg"
    cfg.write_text("profile.length = 10 m\nmesh.cells = 8\ntime.t_end = 0.2 s\n")
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "diagnostics.csv").exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("time.t_end = 1\ntime.cfl = 1.5\n")
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2
    payload = _stderr_json(capsys)
    assert payload["error"] == "config" and payload["key"] == "time.cfl"


def test_cli_needs_exactly_one_source(tmp_path, capsys):
    assert main(["run", "--out-dir", str(tmp_path)]) == 2
    assert _stderr_json(capsys)["key"] == "config"
    assert main(["run", "--preset", "still-water", "--config", "x.cfg"]) == 2
    _stderr_json(capsys)


def test_cli_override_error(capsys):
    assert main(["run", "--preset", "still-water", "--cfl", "2"]) == 2
    assert _stderr_json(capsys)["key"] == "--cfl"


def test_cli_missing_file(capsys, tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_cli_solver_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "dry.cfg"
    cfg.write_text("profile.length = 10\nmesh.cells = 5\ntime.t_end = 1\ninit.0.level = -1\n")
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 3
    payload = _stderr_json(capsys)
    assert "step" in payload and "cell" in payload


def test_cli_io_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--preset", "still-water", "--tmax", "0.1", "--out-dir", str(blocker / "sub")]) == 4
    assert _stderr_json(capsys)["error"] == "io"


def test_cli_converge(capsys):
    assert main(["converge", "--preset", "still-water", "--levels", "10,20"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "cells,err_A,err_Q,order_A,order_Q" and len(out) == 3
    assert main(["converge", "--preset", "still-water", "--levels", "10,x"]) == 2
    assert _stderr_json(capsys)["key"] == "--levels"


def test_cli_usage_error_is_json(capsys):
    assert main(["run", "--preset", "nope"]) == 2
    assert _stderr_json(capsys)["key"] == "args"
    assert main(["frobnicate"]) == 2
    _stderr_json(capsys)
