"""Error norms, convergence tables, residue and overshoot metrics."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import SolutionField, _as_components, cell_ops
from .mesh import Mesh1D


def error_norms(field: SolutionField, exact, t: float):
    """(L1, L2, Linf) errors against an exact solution.

    exact(x, t) (or exact(x, y, t) in 2D) returns states with a trailing
    component axis; errors are summed over components.  Quadrature is the
    (k+2)-point Gauss rule per direction; Linf is the max over those nodes.
    """
    ops = cell_ops(field.mesh.rule)
    q = field.n_components
    if field.ndim == 1:
        x = field.mesh.physical_points(ops.err_xi)              # (N, g)
        uh = np.einsum("nqm,gm->ngq", field.coeffs, ops.P_err)
        diff = np.abs(uh - _as_components(exact(x, t), q))
        jac = 0.5 * field.mesh.h
        l1 = np.sum(jac * np.einsum("ngq,g->n", diff, ops.err_w))
        l2 = np.sqrt(np.sum(jac * np.einsum("ngq,g->n", diff**2, ops.err_w)))
        return float(l1), float(l2), float(np.max(diff))
    mesh = field.mesh
    x = mesh.physical_x(ops.err_xi)
    y = mesh.physical_y(ops.err_xi)
    xx = x[:, None, :, None] + 0.0 * y[None, :, None, :]
    yy = y[None, :, None, :] + 0.0 * x[:, None, :, None]
    uh = np.einsum("xyqmn,am,bn->xyabq", field.coeffs, ops.P_err, ops.P_err,
                   optimize=True)
    diff = np.abs(uh - _as_components(exact(xx, yy, t), q))
    jac = 0.25 * mesh.hx * mesh.hy
    l1 = jac * np.einsum("xyabq,a,b->", diff, ops.err_w, ops.err_w)
    l2 = np.sqrt(jac * np.einsum("xyabq,a,b->", diff**2, ops.err_w, ops.err_w))
    return float(l1), float(l2), float(np.max(diff))


def density_error_norms(field: SolutionField, exact, t: float):
    """Error norms of the first component only (density for gas problems)."""
    first = SolutionField(field.mesh, field.coeffs[:, :1] if field.ndim == 1
                          else field.coeffs[:, :, :1])

    def exact_first(*args):
        return _as_components(exact(*args), field.n_components)[..., :1]

    return error_norms(first, exact_first, t)


@dataclass
class ConvergenceTable:
    """Rows of (resolution label, L1, L2, Linf) with dyadic refinement rates."""

    sizes: list = dc_field(default_factory=list)     # N or (nx, ny)
    l1: list = dc_field(default_factory=list)
    l2: list = dc_field(default_factory=list)
    linf: list = dc_field(default_factory=list)

    def add_row(self, size, l1, l2, linf):
        if self.sizes:
            prev = np.atleast_1d(self.sizes[-1])
            cur = np.atleast_1d(size)
            if not np.all(cur == 2 * prev):
                raise ValueError("rows must refine the mesh by a factor of 2")
        self.sizes.append(size)
        self.l1.append(float(l1))
        self.l2.append(float(l2))
        self.linf.append(float(linf))

    def rates(self, norm: str = "l2"):
        errs = getattr(self, norm)
        return [float(np.log2(errs[i - 1] / errs[i])) for i in range(1, len(errs))]

    def label(self, i):
        s = self.sizes[i]
        return f"{s[0]}x{s[1]}" if isinstance(s, (tuple, list)) else str(s)

    def formatted(self) -> str:
        lines = [f"{'N':>12} {'L1':>12} {'rate':>6} {'L2':>12} {'rate':>6} "
                 f"{'Linf':>12} {'rate':>6}"]
        r1 = ["-"] + [f"{r:.2f}" for r in self.rates("l1")]
        r2 = ["-"] + [f"{r:.2f}" for r in self.rates("l2")]
        ri = ["-"] + [f"{r:.2f}" for r in self.rates("linf")]
        for i in range(len(self.sizes)):
            lines.append(
                f"{self.label(i):>12} {self.l1[i]:>12.3e} {r1[i]:>6} "
                f"{self.l2[i]:>12.3e} {r2[i]:>6} {self.linf[i]:>12.3e} {ri[i]:>6}")
        return "\n".join(lines)


def average_residue_from_averages(prev_avg, next_avg, tau: float) -> float:
    """Mean absolute cell-average rate between two consecutive steps."""
    rates = np.abs(next_avg - prev_avg) / tau
    return float(np.mean(rates))


def average_residue(field_prev: SolutionField, field_next: SolutionField,
                    tau: float) -> float:
    """Steady-state residue: mean of |du_bar/dt| over cells and components."""
    return average_residue_from_averages(
        field_prev.cell_averages(), field_next.cell_averages(), tau)


def overshoot_metric(field: SolutionField, lo: float, hi: float,
                     component: int = 0):
    """(max undershoot below lo, max overshoot above hi) over Gauss nodes."""
    ops = cell_ops(field.mesh.rule)
    if field.ndim == 1:
        vals = np.einsum("nm,gm->ng", field.coeffs[:, component], ops.P_norm)
    else:
        vals = np.einsum("xymn,am,bn->xyab", field.coeffs[:, :, component],
                         ops.P_norm, ops.P_norm, optimize=True)
    under = max(lo - float(np.min(vals)), 0.0)
    over = max(float(np.max(vals)) - hi, 0.0)
    return under, over


def sample_extrema(field: SolutionField, component: int = 0):
    """Min and max of a component over the per-cell Gauss nodes."""
    ops = cell_ops(field.mesh.rule)
    if field.ndim == 1:
        vals = np.einsum("nm,gm->ng", field.coeffs[:, component], ops.P_norm)
    else:
        vals = np.einsum("xymn,am,bn->xyab", field.coeffs[:, :, component],
                         ops.P_norm, ops.P_norm, optimize=True)
    return float(np.min(vals)), float(np.max(vals))
