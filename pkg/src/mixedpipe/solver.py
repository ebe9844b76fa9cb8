"""Explicit finite-volume solver.

First-order Rusanov fluxes, forward Euler in time, sources evaluated at
cell centres (friction semi-implicitly) and a per-cell indicator ``E``
that switches between the free-surface and the pressurized pressure law.
The per-cell work is done in :mod:`mixedpipe.kernels`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .closures import ClosureError, FlowState, FluidConstants
from .geometry import CellGeometry, PipeProfile, build_profile, cell_geometry, read_profile

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "PositivityError",
    "Mesh",
    "BoundaryCondition",
    "Region",
    "ProfileSpec",
    "SimConfig",
    "Snapshot",
    "Trajectory",
    "Simulation",
    "interface_flux",
    "cfl_dt",
    "update_indicator",
    "apply_bc",
    "initial_state",
    "step",
    "run",
]

DRY_FLOOR = 1e-10  # relative to the full section
BC_KINDS = ("wall", "reservoir", "discharge", "valve", "periodic")


class SolverError(RuntimeError):
    def __init__(self, message: str, step: int | None = None, cell: int | None = None):
        super().__init__(message)
        self.message = message
        self.step = step
        self.cell = cell

    def __str__(self) -> str:
        where = [f"{k} {v}" for k, v in (("step", self.step), ("cell", self.cell)) if v is not None]
        return f"{self.message} ({', '.join(where)})" if where else self.message


class PositivityError(SolverError):
    pass


# ---------------------------------------------------------------------------
# mesh


@dataclass(frozen=True, eq=False)
class Mesh:
    profile: PipeProfile
    cells: tuple[CellGeometry, ...]
    dX: float
    X: np.ndarray
    R: np.ndarray
    S: np.ndarray
    dSdX: np.ndarray
    dRdX: np.ndarray
    sin_theta: np.ndarray
    cos_theta: np.ndarray
    dcos_dX: np.ndarray
    Z: np.ndarray
    interface_X: np.ndarray
    interface_S: np.ndarray

    @property
    def n(self) -> int:
        return len(self.cells)

    @classmethod
    def from_profile(cls, profile: PipeProfile, n: int) -> "Mesh":
        if n < 3:
            raise SolverError(f"mesh needs at least 3 cells, got {n}")
        dX = profile.length / n
        if not dX > 0.0:
            raise SolverError("profile has zero length")
        if profile.resolution == n and len(profile.cells) == n:
            cells = profile.cells
        else:
            cells = tuple(cell_geometry(profile, (i + 0.5) * dX) for i in range(n))

        def col(name):
            a = np.ascontiguousarray([getattr(c, name) for c in cells], dtype=float)
            a.flags.writeable = False
            return a

        S = col("S")
        iS = np.concatenate(([S[0]], 0.5 * (S[:-1] + S[1:]), [S[-1]]))
        return cls(
            profile=profile, cells=cells, dX=dX,
            X=col("X_center"), R=col("R"), S=S, dSdX=col("dSdX"), dRdX=col("dRdX"),
            sin_theta=col("sin_theta"), cos_theta=col("cos_theta"),
            dcos_dX=col("dcos_theta_dX"), Z=col("Z"),
            interface_X=np.arange(n + 1) * dX, interface_S=iS,
        )


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundaryCondition:
    """Ghost-cell boundary condition.

    ``reservoir`` takes either ``level`` (free-surface level above the axis)
    or ``ratio`` (density ratio of a pressurized reservoir); ``discharge``
    imposes ``discharge``; ``valve`` imposes ``discharge`` until
    ``close_time`` and is a wall afterwards.
    """

    kind: str = "wall"
    level: float | None = None
    ratio: float | None = None
    discharge: float | None = None
    close_time: float | None = None

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}; expected one of {BC_KINDS}")
        if self.kind == "reservoir":
            if (self.level is None) == (self.ratio is None):
                raise ValueError("reservoir needs exactly one of level or ratio")
            if self.ratio is not None and not self.ratio > 0.0:
                raise ValueError("reservoir ratio must be positive")
        if self.kind == "discharge" and self.discharge is None:
            raise ValueError("discharge boundary needs a discharge value")
        if self.kind == "valve":
            if self.close_time is None or self.close_time < 0.0:
                raise ValueError("valve needs close_time >= 0")

    def validate(self, geom: CellGeometry) -> None:
        if self.kind == "reservoir" and self.level is not None and abs(self.level) > geom.R:
            raise ValueError(f"reservoir level {self.level} outside section [-{geom.R}, {geom.R}]")


def _circle_area(R: float, level: float) -> float:
    alpha = math.acos(max(-1.0, min(1.0, -level / R)))
    return R * R * (alpha - math.sin(alpha) * math.cos(alpha))


def apply_bc(bc: BoundaryCondition, adjacent: FlowState, geom: CellGeometry, t: float) -> FlowState:
    """Ghost state for one boundary. ``periodic`` is handled by the caller."""
    A, Q, E = adjacent.A, adjacent.Q, adjacent.E
    kind = bc.kind
    if kind == "valve":
        kind = "discharge" if t < bc.close_time else "wall"
    if kind == "wall":
        return FlowState(A, -Q, E)
    if kind == "discharge":
        return FlowState(A, float(bc.discharge), E)
    if kind == "reservoir":
        if bc.ratio is not None:
            return FlowState(bc.ratio * geom.S, Q, 1)
        bc.validate(geom)
        if bc.level >= geom.R:
            return FlowState(geom.S, Q, 1)
        return FlowState(max(_circle_area(geom.R, bc.level), DRY_FLOOR * geom.S), Q, 0)
    raise ValueError(f"boundary kind {bc.kind!r} needs the opposite cell")


def _ghosts(A, Q, E, mesh: Mesh, bcs: tuple[BoundaryCondition, BoundaryCondition], t: float):
    left, right = bcs
    n = mesh.n
    if left.kind == "periodic" or right.kind == "periodic":
        if left.kind != right.kind:
            raise SolverError("periodic boundaries must be set on both ends")
        return (A[n - 1], Q[n - 1], int(E[n - 1])), (A[0], Q[0], int(E[0]))
    gl = apply_bc(left, FlowState(A[0], Q[0], int(E[0])), mesh.cells[0], t)
    gr = apply_bc(right, FlowState(A[n - 1], Q[n - 1], int(E[n - 1])), mesh.cells[-1], t)
    return (gl.A, gl.Q, gl.E), (gr.A, gr.Q, gr.E)


# ---------------------------------------------------------------------------
# initial condition and configuration


@dataclass(frozen=True)
class Region:
    """Initial data on ``X < x_end`` (after the previous region).

    Exactly one of ``level``, ``ratio`` and ``head`` fixes the area.
    ``head`` is the elevation of the hydraulic grade line,
    ``level*cos(theta) + Z`` for free-surface cells; with a ``discharge``
    the subcritical Bernoulli level is used.
    """

    x_end: float = math.inf
    level: float | None = None
    ratio: float | None = None
    head: float | None = None
    velocity: float = 0.0
    discharge: float | None = None
    hump_amplitude: float = 0.0
    hump_center: float = 0.0
    hump_width: float = 1.0

    def __post_init__(self):
        given = [k for k in ("level", "ratio", "head") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"region needs exactly one of level, ratio, head (got {given or 'none'})")
        if self.ratio is not None and not self.ratio > 0.0:
            raise ValueError("region ratio must be positive")
        if self.hump_width <= 0.0:
            raise ValueError("hump_width must be positive")


def _bell(x, center, width):
    s = (np.asarray(x, dtype=float) - center) / width
    return np.where(np.abs(s) < 0.5, 0.5 * (1.0 + np.cos(2.0 * np.pi * s)), 0.0)


def _head_state(H0: float, Q: float, geom: CellGeometry, consts: FluidConstants) -> tuple[float, int]:
    """Area and indicator with ``u^2/2 + g*level*cos + g*Z (+ acoustic) = g*H0``."""
    from scipy.optimize import brentq, minimize_scalar

    R, S, g, cth = geom.R, geom.S, consts.g, geom.cos_theta
    target = g * H0

    def f(level):
        A = _circle_area(R, level)
        return 0.5 * (Q / A) ** 2 + g * level * cth + g * geom.Z - target

    top = R * (1.0 - 1e-12)
    if f(top) < 0.0:
        ratio = 1.0
        for _ in range(50):
            u = Q / (ratio * S)
            new = math.exp((target - 0.5 * u * u - g * R * cth - g * geom.Z) / consts.c2)
            if abs(new - ratio) <= 1e-16:
                break
            ratio = new
        return ratio * S, 1
    if Q == 0.0:
        level = (H0 - geom.Z) / cth
        if level <= -R:
            return DRY_FLOOR * S, 0
        return _circle_area(R, level), 0
    crit = minimize_scalar(f, bounds=(-R * (1.0 - 1e-9), top), method="bounded",
                           options={"xatol": 1e-12 * R}).x
    if f(crit) > 0.0:
        raise ValueError(f"head {H0} too low to pass discharge {Q} at X={geom.X_center:.6g}")
    level = brentq(f, crit, top, xtol=1e-14 * R)
    return _circle_area(R, level), 0


def initial_state(regions: Sequence[Region], mesh: Mesh, consts: FluidConstants):
    """``(A, Q, E)`` arrays for a sequence of regions, indicator made consistent."""
    n = mesh.n
    A = np.empty(n)
    Q = np.empty(n)
    E = np.zeros(n, dtype=np.int8)
    if regions[-1].x_end < mesh.X[-1]:
        raise ValueError("initial regions do not cover the pipe")
    for i, geom in enumerate(mesh.cells):
        X = geom.X_center
        reg = next(r for r in regions if X < r.x_end)
        S, R = geom.S, geom.R
        if reg.level is not None:
            level = reg.level + reg.hump_amplitude * float(_bell(X, reg.hump_center, reg.hump_width))
            if level >= R:
                A[i], E[i] = S, 1
            elif level <= -R:
                A[i], E[i] = DRY_FLOOR * S, 0
            else:
                A[i], E[i] = _circle_area(R, level), 0
            Q[i] = reg.discharge if reg.discharge is not None else reg.velocity * A[i]
        elif reg.ratio is not None:
            A[i], E[i] = reg.ratio * S, 1
            Q[i] = reg.discharge if reg.discharge is not None else reg.velocity * A[i]
        else:
            if reg.discharge is not None:
                A[i], E[i] = _head_state(reg.head, reg.discharge, geom, consts)
                Q[i] = reg.discharge
            else:
                A[i], E[i] = _head_state(reg.head, 0.0, geom, consts)
                Q[i] = reg.velocity * A[i]
    E = update_indicator(A, E, mesh.S)
    return A, Q, E


@dataclass(frozen=True)
class ProfileSpec:
    """Pipe geometry: a sample file, or an analytic pipe.

    The analytic pipe has axis ``b = slope*x + bed_bump*bell(x)`` and radius
    ``R = radius + (radius_out - radius)*x/length + radius*bump_amplitude*bell(x)``
    where ``bell`` is a raised cosine of width ``bump_width``.
    """

    file: str | None = None
    length: float = 100.0
    radius: float = 1.0
    radius_out: float | None = None
    slope: float = 0.0
    bump_amplitude: float = 0.0
    bed_bump: float = 0.0
    bump_center: float = 50.0
    bump_width: float = 20.0
    samples: int = 201

    def build(self) -> PipeProfile:
        if self.file is not None:
            return read_profile(self.file)
        x = np.linspace(0.0, self.length, self.samples)
        bell = _bell(x, self.bump_center, self.bump_width)
        b = self.slope * x + self.bed_bump * bell
        R_out = self.radius if self.radius_out is None else self.radius_out
        R = self.radius + (R_out - self.radius) * x / self.length + self.radius * self.bump_amplitude * bell
        return build_profile(np.column_stack([x, b, R]))


@dataclass(frozen=True)
class SimConfig:
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    cells: int = 100
    cfl: float = 0.9
    t_end: float = 1.0
    output_every: float = 0.0
    max_steps: int | None = None
    fluid: FluidConstants = field(default_factory=FluidConstants)
    bc_left: BoundaryCondition = field(default_factory=BoundaryCondition)
    bc_right: BoundaryCondition = field(default_factory=BoundaryCondition)
    init: tuple[Region, ...] = (Region(level=0.0),)
    probes: tuple[int, ...] = ()

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.t_end < 0.0:
            raise ValueError("t_end must be non-negative")
        if self.output_every < 0.0:
            raise ValueError("output_every must be non-negative")
        if self.cells < 3:
            raise ValueError("cells must be at least 3")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if (self.bc_left.kind == "periodic") != (self.bc_right.kind == "periodic"):
            raise ValueError("periodic boundaries must be set on both ends")
        for p in self.probes:
            if not 0 <= p < self.cells:
                raise ValueError(f"probe {p} outside mesh of {self.cells} cells")


# ---------------------------------------------------------------------------
# numerics


def interface_flux(left: FlowState, right: FlowState, geom_left: CellGeometry,
                   geom_right: CellGeometry, consts: FluidConstants) -> tuple[float, float]:
    """Rusanov flux between two states, each with its own geometry."""
    vals = (left.A, left.Q, right.A, right.Q)
    if not all(math.isfinite(v) for v in vals):
        raise SolverError("non-finite state in interface flux")
    for s, g in ((left, geom_left), (right, geom_right)):
        if not s.A > 0.0 or (s.E == 0 and s.A > g.S):
            raise ClosureError(f"inadmissible state {s}")
    _, _, _, _, p, cs = kernels.section_state(
        np.array([left.A, right.A]), np.array([left.E, right.E]),
        np.array([geom_left.R, geom_right.R]),
        np.array([geom_left.cos_theta, geom_right.cos_theta]), consts.c2, consts.g,
    )
    uL, uR = left.Q / left.A, right.Q / right.A
    s = max(abs(uL) + cs[0], abs(uR) + cs[1])
    FA = 0.5 * (left.Q + right.Q) - 0.5 * s * (right.A - left.A)
    FQ = 0.5 * (left.Q * uL + p[0] + right.Q * uR + p[1]) - 0.5 * s * (right.Q - left.Q)
    return float(FA), float(FQ)


def wave_speeds(A, Q, E, R, cos_theta, consts: FluidConstants):
    cs = kernels.section_state(A, E, R, cos_theta, consts.c2, consts.g)[5]
    return np.abs(np.asarray(Q) / np.asarray(A)) + cs


def cfl_dt(A, Q, E, mesh: Mesh, consts: FluidConstants, cfl: float, ghosts=None) -> float:
    """Largest stable step ``cfl*dX / max(|u| + c)``; ghost states optional."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        raise SolverError("empty mesh")
    if np.all(A <= DRY_FLOOR * mesh.S * (1.0 + 1e-9)):
        raise SolverError("every cell is dry")
    smax = float(np.max(wave_speeds(A, Q, E, mesh.R, mesh.cos_theta, consts)))
    if ghosts is not None:
        (al, ql, el), (ar, qr, er) = ghosts
        gs = wave_speeds(np.array([al, ar]), np.array([ql, qr]), np.array([el, er]),
                         np.array([mesh.R[0], mesh.R[-1]]),
                         np.array([mesh.cos_theta[0], mesh.cos_theta[-1]]), consts)
        smax = max(smax, float(np.max(gs)))
    if not smax > 0.0:
        raise SolverError("no wave speed: every cell is dry and at rest")
    if not math.isfinite(smax):
        raise SolverError("non-finite wave speed")
    return cfl * mesh.dX / smax


def update_indicator(A, E, S, ghost_E: tuple[int, int] | None = None) -> np.ndarray:
    """New indicator field.

    A cell is pressurized when it is full. A pressurized cell that is no
    longer full stays pressurized (depression) unless a direct neighbour is
    free-surface, so a pressurized region shrinks by at most one cell per
    call.
    """
    A = np.asarray(A, dtype=float)
    E = np.asarray(E).astype(np.int8)
    full = A >= np.asarray(S)
    left = np.empty_like(E)
    right = np.empty_like(E)
    left[1:], right[:-1] = E[:-1], E[1:]
    if ghost_E is None:
        left[0], right[-1] = E[0], E[-1]
    else:
        left[0], right[-1] = ghost_E
    free_neighbour = (left == 0) | (right == 0)
    out = np.where(full, 1, np.where((E == 1) & free_neighbour, 0, E))
    return out.astype(np.int8)


def step(A, Q, E, mesh: Mesh, consts: FluidConstants, dt: float,
         bcs: tuple[BoundaryCondition, BoundaryCondition] = (BoundaryCondition(), BoundaryCondition()),
         t: float = 0.0, ghosts=None):
    """Advance ``(A, Q, E)`` by ``dt``; returns new arrays."""
    if ghosts is None:
        ghosts = _ghosts(A, Q, E, mesh, bcs, t)
    A_new, Q_new, bad = kernels.advance(
        np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(Q, dtype=float),
        np.asarray(E), ghosts[0], ghosts[1],
        mesh.R, mesh.S, mesh.dSdX, mesh.dRdX, mesh.sin_theta, mesh.cos_theta, mesh.dcos_dX,
        dt, mesh.dX, consts.c2, consts.g, consts.inv_ks2, DRY_FLOOR,
    )
    if bad >= 0:
        raise PositivityError("wet area became negative", cell=int(bad))
    finite = np.isfinite(A_new) & np.isfinite(Q_new)
    if not finite.all():
        raise SolverError("non-finite state", cell=int(np.argmin(finite)))
    E_new = update_indicator(A_new, E, mesh.S, (ghosts[0][2], ghosts[1][2]))
    return A_new, Q_new, E_new


# ---------------------------------------------------------------------------
# time loop


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: float
    step: int
    A: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    # time integral of the net boundary entropy outflow since t = 0
    boundary_entropy: float = 0.0


@dataclass(eq=False)
class Trajectory:
    mesh: Mesh
    consts: FluidConstants
    config: SimConfig | None = None
    snapshots: list[Snapshot] = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def field(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.snapshots])


def _frozen(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


class Simulation:
    """Stateful driver around :func:`step` for a given configuration."""

    def __init__(self, config: SimConfig, mesh: Mesh | None = None):
        self.config = config
        self.consts = config.fluid
        self.mesh = mesh if mesh is not None else Mesh.from_profile(config.profile.build(), config.cells)
        for bc, geom in ((config.bc_left, self.mesh.cells[0]), (config.bc_right, self.mesh.cells[-1])):
            bc.validate(geom)
        self.bcs = (config.bc_left, config.bc_right)
        self.A, self.Q, self.E = initial_state(config.init, self.mesh, self.consts)
        self.t = 0.0
        self.nstep = 0
        self.boundary_entropy = 0.0

    def ghosts(self):
        return _ghosts(self.A, self.Q, self.E, self.mesh, self.bcs, self.t)

    def snapshot(self) -> Snapshot:
        return Snapshot(self.t, self.nstep, _frozen(self.A), _frozen(self.Q), _frozen(self.E),
                        self.boundary_entropy)

    def advance(self, dt: float | None = None, t_limit: float | None = None) -> float:
        from .diagnostics import boundary_entropy_flux

        ghosts = self.ghosts()
        if dt is None:
            dt = cfl_dt(self.A, self.Q, self.E, self.mesh, self.consts, self.config.cfl, ghosts)
            if t_limit is not None:
                dt = min(dt, t_limit - self.t)
        flux = boundary_entropy_flux(self.A, self.Q, self.E, ghosts, self.mesh, self.consts)
        try:
            self.A, self.Q, self.E = step(self.A, self.Q, self.E, self.mesh, self.consts, dt,
                                          self.bcs, self.t, ghosts)
        except SolverError as exc:
            exc.step = self.nstep + 1
            raise
        self.boundary_entropy += dt * flux
        self.t += dt
        self.nstep += 1
        return dt


def run(config: SimConfig, callback: Callable[[Simulation], None] | None = None,
        mesh: Mesh | None = None) -> Trajectory:
    """Integrate ``config`` to its end time (or ``max_steps``).

    Snapshots are taken at ``t = 0``, every ``output_every`` seconds (every
    step when 0) and at the final time. ``callback`` is called with the
    simulation after every step.
    """
    from .diagnostics import record

    sim = Simulation(config, mesh)
    traj = Trajectory(sim.mesh, sim.consts, config)

    def take():
        snap = sim.snapshot()
        traj.snapshots.append(snap)
        traj.diagnostics.append(record(snap, sim.mesh, sim.consts, sim.ghosts()))

    take()
    every = config.output_every
    k_out = 1
    t_end = config.t_end
    while sim.t < t_end and (config.max_steps is None or sim.nstep < config.max_steps):
        limit = t_end
        if every > 0.0:
            limit = min(limit, k_out * every)
        sim.advance(t_limit=limit)
        if callback is not None:
            callback(sim)
        if every == 0.0:
            take()
        elif sim.t >= k_out * every * (1.0 - 1e-12):
            take()
            while k_out * every <= sim.t * (1.0 + 1e-12):
                k_out += 1
    if traj.snapshots[-1].step != sim.nstep:
        take()
    log.debug("run finished: %d steps, t=%g, backend=%s", sim.nstep, sim.t, kernels.BACKEND)
    return traj
