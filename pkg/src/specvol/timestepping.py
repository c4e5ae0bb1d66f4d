"""Runge-Kutta stage tables, step drivers, and the CFL-controlled run loop.

Schemes are kept in the stage form

    u^{l+1} = sum_{0 <= kappa <= l} ( c_{l,kappa} u^kappa
                                      + tau d_{l,kappa} L(u^kappa) ),

with sum_kappa c_{l,kappa} = 1 on every row.  The filtered step applies the
damping filter to every stage output before it is used by later stages; the
filter's pseudo-time equals the full step size.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import SolutionField, sv_residual_modal
from .equations import max_wavespeed
from .errors import NonPhysicalState, NoProgress, UnknownScheme
from .filtering import apply_filter


@dataclass(frozen=True)
class RKScheme:
    """Stage-form coefficient tables c[l][kappa], d[l][kappa].

    stage_times holds the canonical evaluation time of each stage input as a
    fraction of tau (needed by time-dependent boundary closures).
    """

    name: str
    order: int
    stages: int
    c: tuple
    d: tuple
    stage_times: tuple

    def __post_init__(self):
        for row in self.c:
            if abs(sum(row) - 1.0) > 1e-14:
                raise ValueError("every c row must sum to 1")


_SCHEMES = {
    "ssprk2": RKScheme(
        name="ssprk2", order=2, stages=2,
        c=((1.0,), (0.5, 0.5)),
        d=((1.0,), (0.0, 0.5)),
        stage_times=(0.0, 1.0),
    ),
    "ssprk3": RKScheme(
        name="ssprk3", order=3, stages=3,
        c=((1.0,), (0.75, 0.25), (1.0 / 3.0, 0.0, 2.0 / 3.0)),
        d=((1.0,), (0.0, 0.25), (0.0, 0.0, 2.0 / 3.0)),
        stage_times=(0.0, 1.0, 0.5),
    ),
    "rk4": RKScheme(
        name="rk4", order=4, stages=4,
        c=((1.0,), (1.0, 0.0), (1.0, 0.0, 0.0),
           (-1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0)),
        d=((0.5,), (0.0, 0.5), (0.0, 0.0, 1.0),
           (0.0, 0.0, 0.0, 1.0 / 6.0)),
        stage_times=(0.0, 0.5, 0.5, 1.0),
    ),
}


def builtin_scheme(name: str) -> RKScheme:
    """Look up one of the built-in schemes: ssprk2, ssprk3, rk4."""
    try:
        return _SCHEMES[name.lower()]
    except KeyError:
        raise UnknownScheme(
            f"unknown scheme {name!r}; known: {sorted(_SCHEMES)}") from None


def scheme_for_order(order: int) -> RKScheme:
    """Scheme matching a requested temporal order (capped at 4)."""
    return _SCHEMES[{1: "ssprk2", 2: "ssprk2", 3: "ssprk3"}.get(order, "rk4")]


def _stages(field, equation, bc, scheme, tau, t, filtered, alpha_norm="max"):
    us = [field]
    rhs = []
    n_stages = scheme.stages
    for ell in range(n_stages):
        rhs.append(sv_residual_modal(
            us[ell], equation, bc, t + scheme.stage_times[ell] * tau))
        acc = np.zeros_like(field.coeffs)
        for kappa in range(ell + 1):
            ck = scheme.c[ell][kappa]
            dk = scheme.d[ell][kappa]
            if ck != 0.0:
                acc += ck * us[kappa].coeffs
            if dk != 0.0:
                acc += tau * dk * rhs[kappa]
        out = SolutionField(field.mesh, acc)
        if filtered:
            out = apply_filter(out, equation, tau, bc=bc,
                               t=t + tau, alpha_norm=alpha_norm)
        us.append(out)
    return us[-1]


def step_rksv(field, equation, bc, scheme: RKScheme, tau: float, t: float = 0.0):
    """One unfiltered Runge-Kutta step of the spatial scheme."""
    return _stages(field, equation, bc, scheme, tau, t, filtered=False)


def step_oesv(field, equation, bc, scheme: RKScheme, tau: float, t: float = 0.0,
              alpha_norm: str = "max"):
    """One step with the damping filter applied after every stage."""
    if field.k < 1:
        raise ValueError("the filtered step requires k >= 1")
    return _stages(field, equation, bc, scheme, tau, t, filtered=True,
                   alpha_norm=alpha_norm)


@dataclass
class RunResult:
    field: SolutionField
    t: float
    steps: int
    wall_time: float
    history: dict = dc_field(default_factory=dict)


def _cfl_dt(field, equation, cfl):
    avgs = field.cell_averages()
    if field.ndim == 1:
        lam = max_wavespeed(avgs, equation)
        return cfl * float(np.min(field.mesh.h)) / lam
    lx = max_wavespeed(avgs, equation, 0)
    ly = max_wavespeed(avgs, equation, 1)
    return cfl / (lx / field.mesh.hx + ly / field.mesh.hy)


def run(
    field: SolutionField,
    equation,
    bc,
    scheme: RKScheme,
    cfl: float,
    t_final: float,
    use_filter: bool = True,
    t0: float = 0.0,
    fixed_dt: float | None = None,
    callbacks=(),
    max_steps: int = 50_000_000,
    alpha_norm: str = "max",
) -> RunResult:
    """March to t_final with wavespeed-adaptive steps (or a fixed dt).

    The step size is cfl * h / lambda in 1D and cfl / (lx/hx + ly/hy) in 2D,
    recomputed from the current cell averages every step; the last step is
    clipped to land exactly on t_final.  Callbacks receive (step, t, field)
    after every accepted step (and once at t0).
    """
    if cfl <= 0.0:
        raise ValueError("CFL must be positive")
    t = t0
    steps = 0
    wall0 = _time.perf_counter()
    for cb in callbacks:
        cb(0, t, field)
    stepper = step_oesv if use_filter else step_rksv
    while t < t_final - 1e-14 * max(1.0, abs(t_final)):
        tau = fixed_dt if fixed_dt is not None else _cfl_dt(field, equation, cfl)
        tau = min(tau, t_final - t)
        if not tau > 0.0 or t + tau == t:
            raise NoProgress(f"time step underflow at t={t:.6g} (tau={tau:.3g})")
        try:
            field = stepper(field, equation, bc, scheme, tau, t,
                            **({"alpha_norm": alpha_norm} if use_filter else {}))
        except NonPhysicalState as exc:
            exc.time = t
            raise
        t += tau
        steps += 1
        for cb in callbacks:
            cb(steps, t, field)
        if steps >= max_steps:
            raise NoProgress(f"step budget exhausted at t={t:.6g}")
    return RunResult(field=field, t=t, steps=steps,
                     wall_time=_time.perf_counter() - wall0)


class HistoryRecorder:
    """Callback collecting per-step scalar diagnostics.

    Records t and dt always; energy (star norm), the jump seminorm, and the
    steady-state residue are opt-in.  The residue at step n is the mean
    absolute cell-average rate between consecutive accepted steps.
    """

    def __init__(self, energy: bool = False, jumps: bool = False,
                 residue: bool = False, periodic: bool = True, stride: int = 1):
        self.energy = energy
        self.jumps = jumps
        self.residue = residue
        self.periodic = periodic
        self.stride = stride
        self.rows = []
        self._prev_avg = None
        self._prev_t = None

    def __call__(self, step, t, field):
        from .analysis import average_residue_from_averages
        from .core import jump_seminorm, star_norm

        avg = field.cell_averages() if self.residue else None
        if step % self.stride == 0 or self.residue:
            row = {"step": step, "t": t}
            if self.energy:
                row["energy"] = star_norm(field)
            if self.jumps:
                row["jump"] = jump_seminorm(field, periodic=self.periodic)
            if self.residue and self._prev_avg is not None:
                row["residue"] = average_residue_from_averages(
                    self._prev_avg, avg, t - self._prev_t)
            if step % self.stride == 0:
                self.rows.append(row)
        if self.residue:
            self._prev_avg = avg
            self._prev_t = t

    def column(self, name):
        return np.array([r[name] for r in self.rows if name in r])
