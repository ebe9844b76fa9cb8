"""Command line front end: batch runs, output files and self-convergence.

::

    mixedpipe run --config case.cfg --out-dir out/
    mixedpipe run --preset water-hammer --tmax 3
    mixedpipe converge --config case.cfg --levels 50,100,200,400
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, kernels
from .config import ConfigError, parse_config, preset, serialize, PRESETS
from .diagnostics import cell_fields
from .solver import Mesh, SimConfig, SolverError, Trajectory, run

__all__ = [
    "RunManifest",
    "ConvergenceTable",
    "emit_outputs",
    "convergence_harness",
    "main",
]

log = logging.getLogger(__name__)

SNAPSHOT_COLUMNS = ("t", "x", "A", "Q", "E", "S", "u", "density_ratio", "p", "head")
DIAGNOSTIC_COLUMNS = ("t", "total_A", "total_entropy", "entropy_flux_boundary", "max_abs_u",
                      "max_density_ratio", "head_spread", "E_front_positions")


@dataclass(frozen=True)
class RunManifest:
    config: str
    version: str
    backend: str
    wall_clock: float
    files: dict[str, str]

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def _g(x) -> str:
    return "%.17g" % x


def emit_outputs(traj: Trajectory, mesh: Mesh, paths: str | Path, wall_clock: float = 0.0) -> RunManifest:
    """Write ``snapshots.csv``, ``diagnostics.csv``, ``probes.csv`` (when the
    config has probes) and ``manifest.json`` into the directory ``paths``.

    Raises
    ------
    OSError
        The directory cannot be created or written.
    ValueError
        Empty trajectory.
    """
    if not traj.snapshots:
        raise ValueError("trajectory has no snapshots")
    out = Path(paths)
    out.mkdir(parents=True, exist_ok=True)
    consts = traj.consts
    files = {}

    fields = [cell_fields(s.A, s.Q, s.E, mesh.R, mesh.cos_theta, mesh.Z, consts) for s in traj.snapshots]

    path = out / "snapshots.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_COLUMNS)
        for snap, f in zip(traj.snapshots, fields):
            t = _g(snap.t)
            for i in range(mesh.n):
                w.writerow((t, _g(mesh.X[i]), _g(snap.A[i]), _g(snap.Q[i]), int(snap.E[i]), _g(mesh.S[i]),
                            _g(f["u"][i]), _g(f["ratio"][i]), _g(f["p"][i]), _g(f["head"][i])))
    files["snapshots"] = str(path)

    path = out / "diagnostics.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAGNOSTIC_COLUMNS)
        for rec in traj.diagnostics:
            w.writerow((_g(rec.t), _g(rec.total_A), _g(rec.total_entropy), _g(rec.entropy_flux_boundary),
                        _g(rec.max_abs_u), _g(rec.max_density_ratio), _g(rec.head_spread),
                        " ".join(str(i) for i in rec.E_front_positions)))
    files["diagnostics"] = str(path)

    probes = traj.config.probes if traj.config is not None else ()
    if probes:
        path = out / "probes.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["t"]
            for p in probes:
                header += [f"{name}@{p}" for name in ("A", "Q", "E", "density_ratio", "p", "head")]
            w.writerow(header)
            for snap, f in zip(traj.snapshots, fields):
                row = [_g(snap.t)]
                for p in probes:
                    row += [_g(snap.A[p]), _g(snap.Q[p]), int(snap.E[p]), _g(f["ratio"][p]),
                            _g(f["p"][p]), _g(f["head"][p])]
                w.writerow(row)
        files["probes"] = str(path)

    path = out / "manifest.json"
    files["manifest"] = str(path)
    manifest = RunManifest(
        config=serialize(traj.config) if traj.config is not None else "",
        version=__version__,
        backend=kernels.BACKEND,
        wall_clock=float(wall_clock),
        files=files,
    )
    path.write_text(manifest.to_json() + "\n")
    return manifest


@dataclass(frozen=True)
class ConvergenceTable:
    """L1 errors of the final ``A`` and ``Q`` against the finest level.

    ``order_*[k]`` compares levels ``k`` and ``k+1``; the finest level has
    zero error by construction and is the last entry.
    """

    levels: tuple[int, ...]
    err_A: tuple[float, ...]
    err_Q: tuple[float, ...]
    order_A: tuple[float, ...]
    order_Q: tuple[float, ...]

    def to_text(self) -> str:
        lines = ["cells,err_A,err_Q,order_A,order_Q"]
        for k, n in enumerate(self.levels):
            oa = self.order_A[k - 1] if k > 0 else math.nan
            oq = self.order_Q[k - 1] if k > 0 else math.nan
            lines.append(f"{n},{_g(self.err_A[k])},{_g(self.err_Q[k])},{_g(oa)},{_g(oq)}")
        return "\n".join(lines) + "\n"


def _coarsen(v: np.ndarray, n: int) -> np.ndarray:
    return v.reshape(n, -1).mean(axis=1)


def _order(e0: float, e1: float, n0: int, n1: int) -> float:
    if e0 == 0.0 or e1 == 0.0 or n0 == n1:
        return math.nan
    return math.log(e0 / e1) / math.log(n1 / n0)


def convergence_harness(config: SimConfig, levels: Sequence[int]) -> ConvergenceTable:
    """Self-convergence study of ``config`` over mesh sizes ``levels``.

    Every level must divide the finest one; finer solutions are averaged
    onto the coarse cells before taking the L1 norm.
    """
    levels = tuple(int(n) for n in levels)
    if len(levels) < 2:
        raise ValueError("convergence study needs at least two levels")
    order = sorted(levels)
    fine = order[-1]
    for n in order:
        if fine % n:
            raise ValueError(f"level {n} does not divide the finest level {fine}")
    finals = {}
    for n in sorted(set(order)):
        cfg = dataclasses.replace(config, cells=n, output_every=config.t_end, probes=())
        traj = run(cfg)
        finals[n] = (traj.snapshots[-1], traj.mesh.dX)
    ref, _ = finals[fine]
    err_A, err_Q = [], []
    for n in order:
        snap, dX = finals[n]
        err_A.append(float(np.sum(np.abs(snap.A - _coarsen(ref.A, n))) * dX))
        err_Q.append(float(np.sum(np.abs(snap.Q - _coarsen(ref.Q, n))) * dX))
    oA = tuple(_order(err_A[k], err_A[k + 1], order[k], order[k + 1]) for k in range(len(order) - 1))
    oQ = tuple(_order(err_Q[k], err_Q[k + 1], order[k], order[k + 1]) for k in range(len(order) - 1))
    return ConvergenceTable(tuple(order), tuple(err_A), tuple(err_Q), oA, oQ)


class _Parser(argparse.ArgumentParser):
    """Usage errors become ``ConfigError`` so they leave as one JSON line."""

    def error(self, message):
        raise ConfigError("args", message)


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mixedpipe", description="Mixed free-surface / pressurized pipe flow solver")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one configuration and write CSV outputs")
    r.add_argument("--config", help="configuration file")
    r.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in scenario")
    r.add_argument("--out-dir", default="out", help="output directory (default: out)")
    r.add_argument("--cfl", type=float)
    r.add_argument("--tmax", type=float, help="end time [s]")
    r.add_argument("--cells", type=int)

    c = sub.add_parser("converge", help="self-convergence table over mesh sizes")
    c.add_argument("--config", help="configuration file")
    c.add_argument("--preset", choices=sorted(PRESETS))
    c.add_argument("--levels", required=True, help="comma separated cell counts, e.g. 50,100,200")
    return ap


def _load(args) -> SimConfig:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("config", "give exactly one of --config and --preset")
    if args.preset is not None:
        return preset(args.preset)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
    return parse_config(text)


def _overrides(cfg: SimConfig, args) -> SimConfig:
    changes = {}
    if args.cfl is not None:
        changes["cfl"] = args.cfl
    if args.tmax is not None:
        changes["t_end"] = args.tmax
    if args.cells is not None:
        changes["cells"] = args.cells
        if args.cells > 0:
            # probes keep their position along the pipe
            changes["probes"] = tuple(sorted({p * args.cells // cfg.cells for p in cfg.probes}))
    if not changes:
        return cfg
    try:
        return dataclasses.replace(cfg, **changes)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in changes if msg.startswith(k)), next(iter(changes)))
        raise ConfigError("--" + key.replace("t_end", "tmax"), msg) from None


def _fail(kind: str, message: str, code: int, **extra) -> int:
    payload = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except ConfigError as exc:
        return _fail("config", str(exc), 2, key=exc.key)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "run":
            cfg = _overrides(cfg, args)
            t0 = time.perf_counter()
            traj = run(cfg)
            wall = time.perf_counter() - t0
            manifest = emit_outputs(traj, traj.mesh, args.out_dir, wall)
            log.info("%d steps in %.2f s, outputs in %s", traj.snapshots[-1].step, wall, args.out_dir)
            print(manifest.files["manifest"])
        else:
            try:
                levels = [int(p) for p in args.levels.split(",") if p.strip()]
            except ValueError:
                raise ConfigError("--levels", f"expected comma separated integers, got {args.levels!r}") from None
            try:
                table = convergence_harness(cfg, levels)
            except ValueError as exc:
                raise ConfigError("--levels", str(exc)) from None
            sys.stdout.write(table.to_text())
    except ConfigError as exc:
        return _fail("config", str(exc), 2, key=exc.key)
    except SolverError as exc:
        return _fail(type(exc).__name__, str(exc), 3, step=exc.step, cell=exc.cell)
    except OSError as exc:
        return _fail("io", str(exc), 4)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
