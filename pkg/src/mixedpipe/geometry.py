"""Pipe axis and cross-section geometry.

A pipe is described by samples ``(x, b, R)``: horizontal coordinate, axis
elevation and section radius. The axis is parametrised by its arc length
``X``; every quantity the flow model needs (section width, wet area, the
hydrostatic integrals ``I1``/``I2``, centroid height, wetted perimeter) is
evaluated at a given ``X`` through a :class:`Section`.

The integrals here are computed by adaptive quadrature (QUADPACK via
:func:`scipy.integrate.quad`) and serve as the reference route. The solver
kernels use closed forms for circular sections and are checked against
these.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

__all__ = [
    "GeometryError",
    "ProfileError",
    "Section",
    "CircularSection",
    "RectangularSection",
    "PipeProfile",
    "CellGeometry",
    "build_profile",
    "read_profile",
    "cell_geometry",
    "sigma",
    "full_area",
    "wet_area",
    "level_from_area",
    "top_width",
    "i1",
    "i2",
    "zbar",
    "hydraulic_radius",
]

QUAD_EPSREL = 1e-12
QUAD_EPSABS = 0.0
QUAD_ACCEPT = 1e-6


class GeometryError(ValueError):
    """Argument outside the section or profile range."""


class ProfileError(GeometryError):
    """Invalid pipe samples."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"{message} (sample {index})")
        self.index = index


def _quad(f, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    # square-root endpoints (circular walls) make QUADPACK warn about
    # roundoff long after it has converged; judge by the error estimate
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    if not err <= QUAD_ACCEPT * abs(val) + 1e-15:
        raise GeometryError(f"quadrature on [{a!r}, {b!r}] did not converge (error estimate {err:.3g})")
    return val


class Section:
    """A cross-section at fixed ``X``, spanning ``zmin <= z <= zmax``.

    Subclasses provide the width ``sigma(z)`` and its axial derivative; the
    integrals below only rely on those two.
    """

    zmin: float
    zmax: float

    def sigma(self, z: float) -> float:
        raise NotImplementedError

    def dsigma_dX(self, z: float) -> float:
        raise NotImplementedError

    def _check_level(self, h: float) -> None:
        span = self.zmax - self.zmin
        if not (self.zmin - 1e-14 * span <= h <= self.zmax + 1e-14 * span):
            raise GeometryError(f"level {h!r} outside section [{self.zmin}, {self.zmax}]")

    def _clip(self, h: float) -> float:
        self._check_level(h)
        return min(max(h, self.zmin), self.zmax)

    @property
    def full_area(self) -> float:
        return self.wet_area(self.zmax)

    def wet_area(self, h: float) -> float:
        h = self._clip(h)
        return _quad(self.sigma, self.zmin, h)

    def level_from_area(self, A: float) -> float:
        S = self.full_area
        if A < 0.0 or A > S * (1.0 + 1e-14):
            raise GeometryError(f"area {A!r} outside [0, {S}]")
        if A <= 0.0:
            return self.zmin
        if A >= S:
            return self.zmax
        tol = 1e-12 * S
        lo, hi = self.zmin, self.zmax
        h = self.zmin + (self.zmax - self.zmin) * A / S
        for _ in range(100):
            r = self.wet_area(h) - A
            if abs(r) <= 0.25 * tol:
                return h
            if r > 0.0:
                hi = h
            else:
                lo = h
            w = self.sigma(h)
            step = h - r / w if w > 0.0 else 0.5 * (lo + hi)
            h = step if lo < step < hi else 0.5 * (lo + hi)
            if hi - lo <= 4.0 * np.finfo(float).eps * (self.zmax - self.zmin):
                return h
        return h

    def top_width(self, A: float) -> float:
        if A <= 0.0:
            raise GeometryError("top width needs a positive wet area")
        return self.sigma(self.level_from_area(A))

    def i1(self, level: float) -> float:
        level = self._clip(level)
        return _quad(lambda z: (level - z) * self.sigma(z), self.zmin, level)

    def i2(self, level: float) -> float:
        level = self._clip(level)
        return _quad(lambda z: (level - z) * self.dsigma_dX(z), self.zmin, level)

    def zbar(self, wet: float, level: float) -> float:
        if wet <= 0.0:
            raise GeometryError("centroid of an empty section is undefined")
        return level - self.i1(level) / wet

    def wetted_perimeter(self, level: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class CircularSection(Section):
    R: float
    dRdX: float = 0.0

    @property
    def zmin(self) -> float:  # type: ignore[override]
        return -self.R

    @property
    def zmax(self) -> float:  # type: ignore[override]
        return self.R

    @property
    def full_area(self) -> float:
        return math.pi * self.R**2

    def sigma(self, z: float) -> float:
        if abs(z) > self.R * (1.0 + 1e-14):
            raise GeometryError(f"z={z!r} outside circular section of radius {self.R}")
        return 2.0 * math.sqrt(max(self.R * self.R - z * z, 0.0))

    def dsigma_dX(self, z: float) -> float:
        # d/dX of 2 sqrt(R^2 - z^2); singular at |z| = R
        return 2.0 * self.R * self.dRdX / math.sqrt(self.R * self.R - z * z)

    def i2(self, level: float) -> float:
        level = self._clip(level)
        if self.dRdX == 0.0:
            return 0.0
        # z = R sin(phi) removes the 1/sqrt(R - |z|) endpoint singularity
        R = self.R
        top = math.asin(max(-1.0, min(1.0, level / R)))
        k = 2.0 * R * self.dRdX
        return _quad(lambda phi: k * (level - R * math.sin(phi)), -0.5 * math.pi, top)

    def wetted_perimeter(self, level: float) -> float:
        level = self._clip(level)
        return 2.0 * self.R * (0.5 * math.pi + math.asin(max(-1.0, min(1.0, level / self.R))))


@dataclass(frozen=True)
class RectangularSection(Section):
    """Closed rectangle of constant width; bottom at ``z = 0``."""

    width: float
    height: float
    dwidth_dX: float = 0.0

    @property
    def zmin(self) -> float:  # type: ignore[override]
        return 0.0

    @property
    def zmax(self) -> float:  # type: ignore[override]
        return self.height

    def sigma(self, z: float) -> float:
        if not (-1e-14 * self.height <= z <= self.height * (1.0 + 1e-14)):
            raise GeometryError(f"z={z!r} outside rectangular section")
        return self.width

    def dsigma_dX(self, z: float) -> float:
        return self.dwidth_dX

    def wetted_perimeter(self, level: float) -> float:
        level = self._clip(level)
        if level >= self.height:
            return 2.0 * (self.width + self.height)
        return self.width + 2.0 * level


# ---------------------------------------------------------------------------
# profile


@dataclass(frozen=True)
class CellGeometry:
    """Geometric coefficients at one cell centre."""

    X_center: float
    R: float
    S: float
    dSdX: float
    dRdX: float
    sin_theta: float
    cos_theta: float
    dcos_theta_dX: float
    dZdX: float
    Z: float

    def section(self) -> CircularSection:
        return CircularSection(self.R, self.dRdX)

    @classmethod
    def circular(cls, R: float, theta: float = 0.0, dRdX: float = 0.0,
                 dcos_theta_dX: float = 0.0, Z: float = 0.0, X: float = 0.0) -> "CellGeometry":
        """Stand-alone cell, without a profile."""
        return cls(
            X_center=X, R=R, S=math.pi * R * R, dSdX=2.0 * math.pi * R * dRdX, dRdX=dRdX,
            sin_theta=math.sin(theta), cos_theta=math.cos(theta),
            dcos_theta_dX=dcos_theta_dX, dZdX=math.sin(theta), Z=Z,
        )


@dataclass(frozen=True, eq=False)
class PipeProfile:
    x: np.ndarray
    b: np.ndarray
    R: np.ndarray
    X: np.ndarray
    theta: np.ndarray
    dZdX: np.ndarray
    dRdX: np.ndarray
    dcos_dX: np.ndarray
    resolution: int | None = None
    cells: tuple[CellGeometry, ...] = field(default=(), repr=False)
    _b: PchipInterpolator = field(default=None, repr=False)  # type: ignore[assignment]
    _R: PchipInterpolator = field(default=None, repr=False)  # type: ignore[assignment]

    @property
    def length(self) -> float:
        """Total arc length of the axis."""
        return float(self.X[-1])

    def _check_X(self, X: float) -> None:
        L = self.length
        if not (-1e-12 * L <= X <= L * (1.0 + 1e-12)):
            raise GeometryError(f"X={X!r} outside profile [0, {L}]")

    def _arc(self, xa: float, xb: float) -> float:
        db = self._b.derivative()
        return _quad(lambda s: math.sqrt(1.0 + float(db(s)) ** 2), xa, xb)

    def x_of(self, X: float) -> float:
        """Horizontal coordinate at arc length ``X``."""
        self._check_X(X)
        X = min(max(X, 0.0), self.length)
        k = int(np.searchsorted(self.X, X, side="right")) - 1
        k = min(max(k, 0), len(self.x) - 2)
        x0, x1, X0 = float(self.x[k]), float(self.x[k + 1]), float(self.X[k])
        if X <= X0:
            return x0
        if X >= self.X[k + 1]:
            return x1
        c = self._b.c[:, k]
        if c[0] == 0.0 and c[1] == 0.0:
            # straight segment
            return x0 + (X - X0) / math.sqrt(1.0 + float(c[2]) ** 2)
        return brentq(
            lambda s: X0 + self._arc(x0, s) - X, x0, x1,
            xtol=1e-15 * max(1.0, abs(x1)), rtol=4 * np.finfo(float).eps,
        )

    def radius(self, X: float) -> float:
        return float(self._R(self.x_of(X)))

    def elevation(self, X: float) -> float:
        return float(self._b(self.x_of(X)))

    def local(self, X: float) -> tuple[float, float, float, float, float]:
        """``(R, dR/dX, theta, d cos(theta)/dX, Z)`` at arc length ``X``."""
        x = self.x_of(X)
        bp = float(self._b(x, 1))
        bpp = float(self._b(x, 2))
        q = math.sqrt(1.0 + bp * bp)
        cos = 1.0 / q
        R = float(self._R(x))
        dRdX = float(self._R(x, 1)) * cos
        dcos = -bp * bpp / q**3 * cos
        return R, dRdX, math.atan(bp), dcos, float(self._b(x))

    def section(self, X: float) -> CircularSection:
        R, dRdX, *_ = self.local(X)
        return CircularSection(R, dRdX)


def _circumradius(p0, p1, p2) -> float:
    a = math.dist(p0, p1)
    b = math.dist(p1, p2)
    c = math.dist(p0, p2)
    cross = float((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))
    num, den = a * b * c, 2.0 * abs(cross)
    if den <= num * 1e-300:  # collinear to rounding; also avoids overflow
        return math.inf
    return num / den


def build_profile(samples: Iterable[Sequence[float]], resolution: int | None = None) -> PipeProfile:
    """Build a :class:`PipeProfile` from ``(x, b, R)`` samples.

    The axis ``b(x)`` and radius ``R(x)`` are interpolated with monotone
    cubics; arc length is integrated along the interpolant. When
    ``resolution`` is given, the geometry of a uniform mesh with that many
    cells is precomputed and stored on the profile.

    Raises
    ------
    ProfileError
        Fewer than two samples, non-increasing ``x``, non-positive ``R``,
        or an axis curvature radius not exceeding the section radius.
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ProfileError("samples must be rows of (x, b, R)")
    if len(arr) < 2:
        raise ProfileError("at least two samples are required")
    x, b, R = arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr).all(axis=1))[0, 0])
        raise ProfileError("non-finite sample", bad)
    dx = np.diff(x)
    if np.any(dx <= 0.0):
        raise ProfileError("x must be strictly increasing", int(np.argmax(dx <= 0.0)) + 1)
    if np.any(R <= 0.0):
        raise ProfileError("radius must be positive", int(np.argmax(R <= 0.0)))
    for k in range(1, len(x) - 1):
        rc = _circumradius((x[k - 1], b[k - 1]), (x[k], b[k]), (x[k + 1], b[k + 1]))
        if rc <= R[k]:
            raise ProfileError(f"axis curvature radius {rc:.6g} does not exceed pipe radius {R[k]:.6g}", k)

    # subnormal secants overflow the harmonic mean inside PCHIP; the
    # resulting zero slope is exact to machine precision
    with np.errstate(over="ignore", divide="ignore"):
        bi = PchipInterpolator(x, b)
        Ri = PchipInterpolator(x, R)
    db = bi.derivative()
    X = np.zeros_like(x)
    for k in range(len(x) - 1):
        X[k + 1] = X[k] + _quad(lambda s: math.sqrt(1.0 + float(db(s)) ** 2), x[k], x[k + 1])

    bp = bi(x, 1)
    bpp = bi(x, 2)
    q = np.sqrt(1.0 + bp * bp)
    theta = np.arctan(bp)
    prof = PipeProfile(
        x=x, b=b, R=R, X=X, theta=theta,
        dZdX=bp / q,
        dRdX=Ri(x, 1) / q,
        dcos_dX=-bp * bpp / q**4,
        resolution=resolution,
        _b=bi, _R=Ri,
    )
    if resolution is not None:
        object.__setattr__(prof, "cells", tuple(_mesh_cells(prof, resolution)))
    return prof


def _mesh_cells(profile: PipeProfile, n: int) -> list[CellGeometry]:
    if n < 1:
        raise ProfileError("resolution must be a positive cell count")
    dX = profile.length / n
    return [cell_geometry(profile, (i + 0.5) * dX) for i in range(n)]


def read_profile(path: str | Path, resolution: int | None = None) -> PipeProfile:
    """Read whitespace-separated ``x b R`` rows; ``#`` starts a comment."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ProfileError(f"{path}:{lineno}: expected 3 columns 'x b R', got {len(parts)}")
        rows.append([float(p) for p in parts])
    return build_profile(rows, resolution)


def cell_geometry(profile: PipeProfile, X: float) -> CellGeometry:
    R, dRdX, theta, dcos, Z = profile.local(X)
    return CellGeometry(
        X_center=X,
        R=R,
        S=math.pi * R * R,
        dSdX=2.0 * math.pi * R * dRdX,
        dRdX=dRdX,
        sin_theta=math.sin(theta),
        cos_theta=math.cos(theta),
        dcos_theta_dX=dcos,
        dZdX=math.sin(theta),
        Z=Z,
    )


# ---------------------------------------------------------------------------
# functional interface on a profile


def sigma(profile: PipeProfile, X: float, z: float) -> float:
    return profile.section(X).sigma(z)


def full_area(profile: PipeProfile, X: float) -> float:
    return profile.section(X).full_area


def wet_area(profile: PipeProfile, X: float, h: float) -> float:
    return profile.section(X).wet_area(h)


def level_from_area(profile: PipeProfile, X: float, A: float) -> float:
    return profile.section(X).level_from_area(A)


def top_width(profile: PipeProfile, X: float, A: float) -> float:
    return profile.section(X).top_width(A)


def i1(profile: PipeProfile, X: float, level: float) -> float:
    """Hydrostatic pressure integral below ``level``."""
    return profile.section(X).i1(level)


def i2(profile: PipeProfile, X: float, level: float) -> float:
    """Pressure source integral due to axial variation of the section."""
    return profile.section(X).i2(level)


def zbar(profile: PipeProfile, X: float, wet: float, level: float) -> float:
    return profile.section(X).zbar(wet, level)


def hydraulic_radius(profile: PipeProfile, X: float, wet: float) -> tuple[float, float]:
    """Wetted perimeter and hydraulic radius for physical wet area ``wet``."""
    if wet <= 0.0:
        raise GeometryError("hydraulic radius needs a positive wet area")
    sec = profile.section(X)
    P = sec.wetted_perimeter(sec.level_from_area(min(wet, sec.full_area)))
    return P, wet / P
