"""Diagnostics on solver states and trajectories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import kernels
from .closures import FluidConstants

if TYPE_CHECKING:
    from .solver import Mesh, Snapshot, Trajectory

__all__ = [
    "DiagnosticsError",
    "DiagnosticsRecord",
    "cell_fields",
    "mass_total",
    "total_entropy",
    "boundary_entropy_flux",
    "friction_dissipation",
    "entropy_budget",
    "local_entropy_production",
    "still_water_residual",
    "front_positions",
    "surge_metrics",
    "record",
]


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    total_A: float
    total_entropy: float
    entropy_flux_boundary: float
    max_abs_u: float
    max_density_ratio: float
    head_spread: float
    E_front_positions: tuple[int, ...]


def cell_fields(A, Q, E, R, cos_theta, Z, consts: FluidConstants) -> dict[str, np.ndarray]:
    """Closed-form closures for arrays of cells.

    Keys: ``wet, level, p, cs, u, ratio, head, still_head, entropy,
    entropy_flux, balanced_flux, zbar``. ``still_head`` is the total head
    without the kinetic term.

    ``entropy_flux`` is ``(entropy + p) u``. In free-surface cells that
    product carries a ``c^2 S u`` part with no matching time derivative
    (``c^2 S`` is constant there), so budgets over open boundaries or
    single cells use ``balanced_flux``, which drops it. The two agree in
    pressurized cells and their sums telescope identically between walls.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    E = np.asarray(E)
    S = np.pi * np.asarray(R, dtype=float) ** 2
    c2, g = consts.c2, consts.g
    wet, level, _alpha, I1, p, cs = kernels.section_state(A, E, R, cos_theta, c2, g)
    u = Q / A
    ratio = A / wet
    log_ratio = np.where(E != 0, np.log(ratio), 0.0)
    still = c2 * log_ratio + g * level * cos_theta + g * np.asarray(Z)
    zbar = level - I1 / wet
    ent = 0.5 * Q * u + c2 * A * log_ratio + c2 * S + g * A * zbar * cos_theta + g * A * np.asarray(Z)
    flux = (ent + p) * u
    return {
        "wet": wet, "level": level, "p": p, "cs": cs, "u": u, "ratio": ratio,
        "head": 0.5 * u * u + still, "still_head": still,
        "entropy": ent, "entropy_flux": flux,
        "balanced_flux": np.where(E != 0, flux, flux - c2 * S * u), "zbar": zbar,
    }


def _mesh_fields(A, Q, E, mesh: "Mesh", consts: FluidConstants):
    return cell_fields(A, Q, E, mesh.R, mesh.cos_theta, mesh.Z, consts)


def mass_total(A, mesh: "Mesh") -> float:
    return float(np.sum(A) * mesh.dX)


def total_entropy(A, Q, E, mesh: "Mesh", consts: FluidConstants) -> float:
    return float(np.sum(_mesh_fields(A, Q, E, mesh, consts)["entropy"]) * mesh.dX)


def boundary_entropy_flux(A, Q, E, ghosts, mesh: "Mesh", consts: FluidConstants) -> float:
    """Net entropy outflow rate through both ends.

    Each boundary face uses the Rusanov entropy flux
    ``(G_L + G_R)/2 - s (eta_R - eta_L)/2`` between ghost and cell, with
    the balanced flux ``G`` and the scheme's speed ``s``. It vanishes
    exactly at a wall (mirror ghost).
    """
    (al, ql, el), (ar, qr, er) = ghosts
    n = len(A) - 1
    f = cell_fields(
        np.array([al, A[0], A[n], ar]), np.array([ql, Q[0], Q[n], qr]),
        np.array([el, E[0], E[n], er]),
        mesh.R[[0, 0, n, n]], mesh.cos_theta[[0, 0, n, n]], mesh.Z[[0, 0, n, n]], consts,
    )
    G, eta = f["balanced_flux"], f["entropy"]
    speed = np.abs(f["u"]) + f["cs"]

    def face(i):
        s = max(speed[i], speed[i + 1])
        return 0.5 * (G[i] + G[i + 1]) - 0.5 * s * (eta[i + 1] - eta[i])

    return float(face(2) - face(0))


def friction_dissipation(A, Q, E, mesh: "Mesh", consts: FluidConstants) -> float:
    """``-sum g A K u^2 |u| dX``: entropy production rate due to friction."""
    if consts.inv_ks2 == 0.0:
        return 0.0
    A = np.asarray(A, dtype=float)
    wet, _level, alpha, *_ = kernels.section_state(A, E, mesh.R, mesh.cos_theta, consts.c2, consts.g)
    K = consts.inv_ks2 * (2.0 * mesh.R * alpha / wet) ** (4.0 / 3.0)
    u = np.asarray(Q) / A
    return float(-np.sum(consts.g * A * K * u * u * np.abs(u)) * mesh.dX)


def entropy_budget(traj: "Trajectory") -> np.ndarray:
    """Entropy production between consecutive snapshots.

    ``delta(sum E dX) + integral of boundary outflow``; non-positive for an
    entropy-dissipating scheme.
    """
    snaps = traj.snapshots
    if len(snaps) < 2:
        raise DiagnosticsError("entropy budget needs at least two snapshots")
    tot = np.array([total_entropy(s.A, s.Q, s.E, traj.mesh, traj.consts) for s in snaps])
    bnd = np.array([s.boundary_entropy for s in snaps])
    return np.diff(tot) + np.diff(bnd)


def local_entropy_production(before: "Snapshot", after: "Snapshot", mesh: "Mesh",
                             consts: FluidConstants) -> np.ndarray:
    """Per-cell entropy production over one step.

    Uses the relative entropy ``entropy - c^2 (A if pressurized else S)``
    (the removed part is a constant or a multiple of the conserved mass)
    and the Rusanov entropy flux
    ``(G_L + G_R)/2 - s (eta_R - eta_L)/2`` with the same ``s`` as the
    scheme. Boundary cells are returned as NaN (their face fluxes need
    ghosts). Exact sign control holds for horizontal prismatic pipes;
    elsewhere the centred sources leave an O(dX) residual.
    """
    dt = after.t - before.t
    c2 = consts.c2
    f0 = _mesh_fields(before.A, before.Q, before.E, mesh, consts)
    f1 = _mesh_fields(after.A, after.Q, after.E, mesh, consts)

    def rel(f, snap):
        return f["entropy"] - c2 * np.where(snap.E != 0, snap.A, mesh.S)

    eta0, eta1 = rel(f0, before), rel(f1, after)
    G0 = f0["balanced_flux"] - c2 * np.where(before.E != 0, before.Q, 0.0)
    speed = np.abs(f0["u"]) + f0["cs"]
    s = np.maximum(speed[:-1], speed[1:])
    G = 0.5 * (G0[:-1] + G0[1:]) - 0.5 * s * (eta0[1:] - eta0[:-1])
    out = np.full(mesh.n, np.nan)
    out[1:-1] = (eta1[1:-1] - eta0[1:-1]) * mesh.dX + dt * (G[1:] - G[:-1])
    return out


def still_water_residual(A, Q, E, mesh: "Mesh", consts: FluidConstants) -> tuple[float, float]:
    """``(max |u|, max cell-to-cell jump of c^2 ln(A/S) + g H cos + g Z)``."""
    f = _mesh_fields(A, Q, E, mesh, consts)
    return float(np.max(np.abs(f["u"]))), float(np.max(np.abs(np.diff(f["still_head"]))))


def front_positions(E) -> tuple[int, ...]:
    """Cells that start a new indicator run, i.e. ``i`` with ``E[i-1] != E[i]``."""
    E = np.asarray(E)
    return tuple(int(i) + 1 for i in np.flatnonzero(E[1:] != E[:-1]))


def surge_metrics(traj: "Trajectory", probe: int) -> tuple[float, float | None]:
    """Peak density ratio at ``probe`` and the oscillation period.

    The period is twice the mean spacing of the zero crossings of
    ``ratio - 1`` (linear interpolation between snapshots); ``None`` when
    fewer than two crossings occur.
    """
    n = traj.mesh.n
    if not 0 <= probe < n:
        raise DiagnosticsError(f"probe {probe} outside mesh of {n} cells")
    t = traj.times
    S = traj.mesh.S[probe]
    ratio = np.array([s.A[probe] / (S if s.E[probe] else s.A[probe]) for s in traj.snapshots])
    peak = float(ratio.max())
    d = ratio - 1.0
    crossings = []
    last = None
    for k in range(len(d)):
        if d[k] == 0.0:
            continue
        if last is not None and np.sign(d[k]) != np.sign(d[last]):
            tc = t[last] + (t[k] - t[last]) * d[last] / (d[last] - d[k])
            crossings.append(tc)
        last = k
    if len(crossings) < 2:
        return peak, None
    return peak, float(2.0 * np.mean(np.diff(crossings)))


def record(snap: "Snapshot", mesh: "Mesh", consts: FluidConstants, ghosts) -> DiagnosticsRecord:
    f = _mesh_fields(snap.A, snap.Q, snap.E, mesh, consts)
    return DiagnosticsRecord(
        t=snap.t,
        total_A=mass_total(snap.A, mesh),
        total_entropy=float(np.sum(f["entropy"]) * mesh.dX),
        entropy_flux_boundary=boundary_entropy_flux(snap.A, snap.Q, snap.E, ghosts, mesh, consts),
        max_abs_u=float(np.max(np.abs(f["u"]))),
        max_density_ratio=float(np.max(f["ratio"])),
        head_spread=float(np.ptp(f["head"])),
        E_front_positions=front_positions(snap.E),
    )
