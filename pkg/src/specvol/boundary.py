"""Boundary closures supplying exterior trace states at domain faces.

Closures are ghost *states*, not ghost cells: the residual only needs the
exterior trace at face quadrature points.  The double-Mach closures encode
the moving oblique shock of the classical reflection problem: the top
boundary is postshock left of the shock foot x = 1/6 + (1 + 20 t)/sqrt(3)
and preshock beyond it; the bottom boundary is postshock for x < 1/6 and a
reflecting wall after.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PERIODIC = "periodic"
OUTFLOW = "outflow"
REFLECTIVE = "reflective"
INFLOW = "inflow"
DOUBLE_MACH_TOP = "double_mach_top"
DOUBLE_MACH_BOTTOM = "double_mach_bottom"

_KINDS = (PERIODIC, OUTFLOW, REFLECTIVE, INFLOW, DOUBLE_MACH_TOP, DOUBLE_MACH_BOTTOM)

# Mach-10 oblique-shock states (rho, vx, vy, p) used by the double-Mach closures.
DM_POSTSHOCK = (8.0, 8.25 * np.cos(np.pi / 6), -8.25 * np.sin(np.pi / 6), 116.5)
DM_PRESHOCK = (1.4, 0.0, 0.0, 1.0)


def dm_shock_foot(t: float) -> float:
    """x-position where the moving shock meets the top boundary (y = 1)."""
    return 1.0 / 6.0 + (1.0 + 20.0 * t) / np.sqrt(3.0)


@dataclass(frozen=True)
class Side:
    """One boundary side: a closure kind plus an optional prescribed state.

    For INFLOW, `state` is either a conserved-state vector or a callable
    mapping face coordinates and time to conserved states.
    """

    kind: str
    state: object = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == INFLOW and self.state is None:
            raise ValueError("inflow boundary requires a state")


@dataclass(frozen=True)
class Boundary1D:
    left: Side
    right: Side

    def __post_init__(self):
        _check_periodic_pairing([(self.left, self.right)])


@dataclass(frozen=True)
class Boundary2D:
    left: Side
    right: Side
    bottom: Side
    top: Side

    def __post_init__(self):
        _check_periodic_pairing([(self.left, self.right), (self.bottom, self.top)])


def _check_periodic_pairing(pairs):
    for a, b in pairs:
        if (a.kind == PERIODIC) != (b.kind == PERIODIC):
            raise ValueError("periodic closures must be paired on opposite sides")


def periodic_1d() -> Boundary1D:
    return Boundary1D(Side(PERIODIC), Side(PERIODIC))


def outflow_1d() -> Boundary1D:
    return Boundary1D(Side(OUTFLOW), Side(OUTFLOW))


def reflective_1d() -> Boundary1D:
    return Boundary1D(Side(REFLECTIVE), Side(REFLECTIVE))


def periodic_2d() -> Boundary2D:
    return Boundary2D(Side(PERIODIC), Side(PERIODIC), Side(PERIODIC), Side(PERIODIC))


def mirror_state(u: np.ndarray, equation, axis: int) -> np.ndarray:
    """Reflect a conserved state across a wall with normal along `axis`."""
    out = np.array(u, dtype=float, copy=True)
    if equation.n_components == 1:
        return out
    out[..., 1 + axis] = -out[..., 1 + axis]
    return out


def _prescribed(state, coords, t, n_components):
    if callable(state):
        return np.asarray(state(*coords, t), dtype=float)
    state = np.asarray(state, dtype=float)
    shape = np.shape(coords[0]) if np.ndim(coords[0]) else ()
    return np.broadcast_to(state, shape + (n_components,)).copy()


def exterior_state(side: Side, interior: np.ndarray, coords, t: float, equation, axis: int):
    """Exterior trace for one boundary side.

    `interior` holds the interior trace at the face points (..., q); `coords`
    is a tuple of coordinate arrays broadcastable to the point shape.  For
    PERIODIC the caller passes the opposite side's trace, which is returned
    unchanged.
    """
    kind = side.kind
    if kind in (PERIODIC, OUTFLOW):
        return interior
    if kind == REFLECTIVE:
        return mirror_state(interior, equation, axis)
    if kind == INFLOW:
        return _prescribed(side.state, coords, t, equation.n_components)
    if kind == DOUBLE_MACH_TOP:
        x = np.asarray(coords[0], dtype=float)
        post = equation.conserved(*DM_POSTSHOCK)
        pre = equation.conserved(*DM_PRESHOCK)
        sel = (x < dm_shock_foot(t))[..., None]
        return np.where(sel, post, pre)
    if kind == DOUBLE_MACH_BOTTOM:
        x = np.asarray(coords[0], dtype=float)
        post = equation.conserved(*DM_POSTSHOCK)
        mirrored = mirror_state(interior, equation, axis)
        sel = (x < 1.0 / 6.0)[..., None]
        return np.where(sel, np.broadcast_to(post, mirrored.shape), mirrored)
    raise ValueError(f"unknown boundary kind {kind!r}")
