"""Right-hand side of the momentum equation: slope, section variation,
axis curvature and Manning-Strickler friction."""

from __future__ import annotations

from dataclasses import dataclass

from .closures import FlowState, FluidConstants, physical_wet_area, water_level
from .geometry import CellGeometry, GeometryError

__all__ = [
    "SourceBreakdown",
    "slope_term",
    "pressure_source",
    "curvature_term",
    "friction_coefficient",
    "friction_term",
    "source_breakdown",
]


@dataclass(frozen=True)
class SourceBreakdown:
    slope: float
    pressure_source: float
    curvature: float
    friction: float

    @property
    def total(self) -> float:
        return self.slope + self.pressure_source - self.curvature - self.friction


def slope_term(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    return -consts.g * state.A * geom.dZdX


def pressure_source(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    A, E = state.A, state.E
    wet = physical_wet_area(A, E, geom.S)
    level = water_level(A, E, geom)
    acoustic = consts.c2 * (A / wet - 1.0) * geom.dSdX if E == 1 else 0.0
    return acoustic + consts.g * geom.section().i2(level) * geom.cos_theta


def curvature_term(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    wet = physical_wet_area(state.A, state.E, geom.S)
    level = water_level(state.A, state.E, geom)
    zb = geom.section().zbar(wet, level)
    return consts.g * state.A * zb * geom.dcos_theta_dX


def friction_coefficient(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    """``K = 1 / (Ks**2 Rh**(4/3))`` with the hydraulic radius of the physical wet area."""
    wet = physical_wet_area(state.A, state.E, geom.S)
    if wet <= 0.0:
        raise GeometryError("friction needs a positive wet area")
    if consts.inv_ks2 == 0.0:
        return 0.0
    sec = geom.section()
    level = water_level(state.A, state.E, geom)
    Rh = wet / sec.wetted_perimeter(level)
    return consts.inv_ks2 / Rh ** (4.0 / 3.0)


def friction_term(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> float:
    K = friction_coefficient(state, geom, consts)
    return consts.g * K * state.Q * abs(state.Q) / state.A


def source_breakdown(state: FlowState, geom: CellGeometry, consts: FluidConstants) -> SourceBreakdown:
    return SourceBreakdown(
        slope=slope_term(state, geom, consts),
        pressure_source=pressure_source(state, geom, consts),
        curvature=curvature_term(state, geom, consts),
        friction=friction_term(state, geom, consts),
    )
