"""Equation models: linear advection and compressible Euler, plus fluxes.

States are stored conserved-first along a 'component' axis.  Fluxes are
vectorized over arbitrary leading shapes; the component axis is always the
last one so pointwise evaluation can run on large sampled-point arrays.

The interface flux is local Lax-Friedrichs for systems and the plain upwind
trace flux for advection.
"""

from __future__ import annotations

import numpy as np

from .errors import NonPhysicalState


class Advection1D:
    """u_t + beta u_x = 0."""

    ndim = 1
    n_components = 1
    is_linear = True

    def __init__(self, beta: float = 1.0):
        self.beta = float(beta)

    def flux(self, u, axis=0):
        return self.beta * u

    def wavespeed(self, u, axis=0):
        return np.full(np.asarray(u).shape[:-1], abs(self.beta))

    def jacobian_radius(self, ubar, axis=0):
        return np.full(np.asarray(ubar).shape[:-1], abs(self.beta))


class Advection2D:
    """u_t + betax u_x + betay u_y = 0."""

    ndim = 2
    n_components = 1
    is_linear = True

    def __init__(self, betax: float = 1.0, betay: float = 1.0):
        self.betax = float(betax)
        self.betay = float(betay)

    def _beta(self, axis):
        return self.betax if axis == 0 else self.betay

    def flux(self, u, axis=0):
        return self._beta(axis) * u

    def wavespeed(self, u, axis=0):
        return np.full(np.asarray(u).shape[:-1], abs(self._beta(axis)))

    def jacobian_radius(self, ubar, axis=0):
        return np.full(np.asarray(ubar).shape[:-1], abs(self._beta(axis)))


def _check_physical(rho, p, where: str):
    bad = (rho <= 0.0) | (p <= 0.0)
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), np.shape(bad))
        raise NonPhysicalState(
            f"non-physical state at {where}: rho={np.asarray(rho)[idx]:.6g}, "
            f"p={np.asarray(p)[idx]:.6g}",
            cell=idx,
        )


class Euler1D:
    """1D compressible Euler equations, conserved state (rho, rho v, E)."""

    ndim = 1
    n_components = 3
    is_linear = False

    def __init__(self, gamma: float = 1.4):
        self.gamma = float(gamma)

    def pressure(self, u):
        rho = u[..., 0]
        mom = u[..., 1]
        E = u[..., 2]
        return (self.gamma - 1.0) * (E - 0.5 * mom * mom / rho)

    def primitive(self, u):
        """(rho, v, p) from conserved state."""
        rho = u[..., 0]
        v = u[..., 1] / rho
        p = self.pressure(u)
        return rho, v, p

    def conserved(self, rho, v, p):
        rho = np.asarray(rho, dtype=float)
        v = np.asarray(v, dtype=float)
        p = np.asarray(p, dtype=float)
        E = p / (self.gamma - 1.0) + 0.5 * rho * v * v
        return np.stack(np.broadcast_arrays(rho, rho * v, E), axis=-1)

    def flux(self, u, axis=0, check: bool = True):
        rho, v, p = self.primitive(u)
        if check:
            _check_physical(rho, p, "flux evaluation")
        mom = u[..., 1]
        E = u[..., 2]
        return np.stack([mom, mom * v + p, (E + p) * v], axis=-1)

    def sound_speed(self, u, check: bool = True):
        rho, _, p = self.primitive(u)
        if check:
            _check_physical(rho, p, "sound speed")
        return np.sqrt(self.gamma * p / rho)

    def wavespeed(self, u, axis=0):
        _, v, _ = self.primitive(u)
        return np.abs(v) + self.sound_speed(u)

    def jacobian_radius(self, ubar, axis=0):
        return self.wavespeed(ubar, axis)


class Euler2D:
    """2D compressible Euler equations, conserved state (rho, rho u, rho v, E)."""

    ndim = 2
    n_components = 4
    is_linear = False

    def __init__(self, gamma: float = 1.4):
        self.gamma = float(gamma)

    def pressure(self, u):
        rho = u[..., 0]
        ke = 0.5 * (u[..., 1] ** 2 + u[..., 2] ** 2) / rho
        return (self.gamma - 1.0) * (u[..., 3] - ke)

    def primitive(self, u):
        """(rho, vx, vy, p) from conserved state."""
        rho = u[..., 0]
        return rho, u[..., 1] / rho, u[..., 2] / rho, self.pressure(u)

    def conserved(self, rho, vx, vy, p):
        rho = np.asarray(rho, dtype=float)
        vx = np.asarray(vx, dtype=float)
        vy = np.asarray(vy, dtype=float)
        p = np.asarray(p, dtype=float)
        E = p / (self.gamma - 1.0) + 0.5 * rho * (vx * vx + vy * vy)
        return np.stack(np.broadcast_arrays(rho, rho * vx, rho * vy, E), axis=-1)

    def flux(self, u, axis=0, check: bool = True):
        rho, vx, vy, p = self.primitive(u)
        if check:
            _check_physical(rho, p, f"flux evaluation (axis {axis})")
        E = u[..., 3]
        vn = vx if axis == 0 else vy
        f = np.stack(
            [
                rho * vn,
                u[..., 1] * vn,
                u[..., 2] * vn,
                (E + p) * vn,
            ],
            axis=-1,
        )
        f[..., 1 + axis] += p
        return f

    def sound_speed(self, u, check: bool = True):
        rho, _, _, p = self.primitive(u)
        if check:
            _check_physical(rho, p, "sound speed")
        return np.sqrt(self.gamma * p / rho)

    def wavespeed(self, u, axis=0):
        vn = u[..., 1 + axis] / u[..., 0]
        return np.abs(vn) + self.sound_speed(u)

    def jacobian_radius(self, ubar, axis=0):
        return self.wavespeed(ubar, axis)


def euler_flux_1d(u, gamma: float = 1.4):
    """Physical flux (rho v, rho v^2 + p, (E+p) v) of a 1D Euler state."""
    return Euler1D(gamma).flux(np.asarray(u, dtype=float))


def numerical_flux(u_minus, u_plus, equation, axis: int = 0):
    """Interface flux along the given axis, oriented minus -> plus.

    Advection: upwind trace flux.  Systems: local Lax-Friedrichs
    0.5 (f(u-) + f(u+)) - (alpha/2) (u+ - u-) with alpha the larger of the
    two traces' wavespeeds in the axis direction.
    """
    if equation.is_linear:
        beta = equation.beta if equation.ndim == 1 else equation._beta(axis)
        return equation.flux(u_minus if beta >= 0 else u_plus, axis)
    fm = equation.flux(u_minus, axis)
    fp = equation.flux(u_plus, axis)
    alpha = np.maximum(equation.wavespeed(u_minus, axis), equation.wavespeed(u_plus, axis))
    return 0.5 * (fm + fp) - 0.5 * alpha[..., None] * (u_plus - u_minus)


def max_wavespeed(cell_averages, equation, axis: int = 0) -> float:
    """Largest wavespeed over the cell-average states (drives the CFL step)."""
    return float(np.max(equation.wavespeed(cell_averages, axis)))
