"""Constitutive relations of the mixed free-surface / pressurized model.

Scalar reference implementations built on the quadrature geometry. The
solver evaluates the same relations in closed form through
:mod:`mixedpipe.kernels`; the test-suite checks one against the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import CellGeometry

__all__ = [
    "ClosureError",
    "FluidConstants",
    "FlowState",
    "physical_wet_area",
    "water_level",
    "density_ratio",
    "pressure",
    "sound_speed",
    "eigenvalues",
    "total_head",
    "entropy",
    "entropy_flux",
]


class ClosureError(ValueError):
    """State not admissible for the requested relation."""


@dataclass(frozen=True)
class FluidConstants:
    """Water properties. ``Ks = inf`` switches friction off."""

    rho0: float = 1000.0
    beta0: float = 5.0e-10
    g: float = 9.81
    Ks: float = math.inf

    def __post_init__(self):
        for name in ("rho0", "beta0", "g", "Ks"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ClosureError(f"{name} must be positive, got {v!r}")

    @property
    def c2(self) -> float:
        return 1.0 / (self.beta0 * self.rho0)

    @property
    def c(self) -> float:
        """Acoustic wave speed of the pressurized state."""
        return math.sqrt(self.c2)

    @property
    def inv_ks2(self) -> float:
        return 0.0 if math.isinf(self.Ks) else 1.0 / (self.Ks * self.Ks)


@dataclass(frozen=True)
class FlowState:
    A: float
    Q: float
    E: int = 0

    @property
    def u(self) -> float:
        return self.Q / self.A


def _check(A: float, E: int, S: float) -> None:
    if E not in (0, 1):
        raise ClosureError(f"indicator must be 0 or 1, got {E!r}")
    if not A > 0.0:
        raise ClosureError(f"wet area must be positive, got {A!r}")
    if E == 0 and A > S:
        raise ClosureError(f"free-surface state with A={A!r} exceeding full area S={S!r}")


def physical_wet_area(A: float, E: int, S: float) -> float:
    """Full section when pressurized, the wet area itself otherwise."""
    _check(A, E, S)
    return S if E == 1 else A


def water_level(A: float, E: int, geom: CellGeometry) -> float:
    """Water level measured from the pipe axis."""
    _check(A, E, geom.S)
    if E == 1:
        return geom.R
    return geom.section().level_from_area(A)


def density_ratio(A: float, E: int, S: float) -> float:
    return A / physical_wet_area(A, E, S)


def pressure(A: float, E: int, geom: CellGeometry, consts: FluidConstants) -> float:
    """Mixed pressure law (per unit reference density), continuous at ``A = S``."""
    wet = physical_wet_area(A, E, geom.S)
    level = water_level(A, E, geom)
    return consts.c2 * (A - wet) + consts.g * geom.section().i1(level) * geom.cos_theta


def sound_speed(A: float, E: int, geom: CellGeometry, consts: FluidConstants) -> float:
    _check(A, E, geom.S)
    if E == 1:
        return consts.c
    T = geom.section().top_width(A)
    if T <= 0.0:
        raise ClosureError("free-surface state fills the section; it must be pressurized")
    return math.sqrt(consts.g * A / T * geom.cos_theta)


def eigenvalues(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> tuple[float, float]:
    c = sound_speed(state.A, state.E, geom, consts)
    u = state.u
    return u - c, u + c


def total_head(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    A, E = state.A, state.E
    wet = physical_wet_area(A, E, geom.S)
    level = water_level(A, E, geom)
    log_term = consts.c2 * math.log(A / wet) if E == 1 else 0.0
    return 0.5 * state.u**2 + log_term + consts.g * level * geom.cos_theta + consts.g * geom.Z


def entropy(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    A, Q, E = state.A, state.Q, state.E
    wet = physical_wet_area(A, E, geom.S)
    level = water_level(A, E, geom)
    zb = geom.section().zbar(wet, level)
    log_term = consts.c2 * A * math.log(A / wet) if E == 1 else 0.0
    return (
        Q * Q / (2.0 * A)
        + log_term
        + consts.c2 * geom.S
        + consts.g * A * zb * geom.cos_theta
        + consts.g * A * geom.Z
    )


def entropy_flux(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    return (entropy(state, geom, consts) + pressure(state.A, state.E, geom, consts)) * state.u
