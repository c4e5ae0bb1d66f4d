"""Oscillation-eliminating post-processing filter.

After each Runge-Kutta stage, modal groups j = 1..k of every cell are scaled
by exp(-tau * sum_{m=0..j} delta_K^m), where the damping coefficients

    delta_K^m = sum_{faces e} beta_e * sigma_{e,K}^m / h_{e,K}

are driven by jumps of the solution's derivatives across element faces:

    sigma_{e,K}^m = (2m+1) h_{e,K}^m / (2 (2k-1) m!) *
                    sum_{|alpha| = m} mean_e |[[d^alpha u]]| / ||u - avg||_inf,

with sigma = 0 for a globally constant component.  The indicator is
dimensionless and scale-invariant: avg is the global average and the
sup-norm is sampled on (k+1) Gauss points per direction.  beta_e is the
spectral radius of the normal flux Jacobian at the cell average; h_{e,K} is
the cell extent perpendicular to the face.  Face means of |jump| use the
two-point trapezoid rule in 2D (the jump at a point in 1D).  For
tensor-product elements |alpha| = max(alpha_x, alpha_y) and mode group j
collects modes of max degree j; the total-degree convention of simplex
elements is available via ``alpha_norm="sum"``.

Jumps at non-periodic domain boundaries are measured against the closure's
ghost polynomial: a copy for outflow (zero jump), the mirrored polynomial
for reflecting walls, and the constant prescribed state for inflow-type
closures (whose higher derivatives vanish).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import boundary as bd
from .core import SolutionField, cell_ops

_CONST_FLOOR = 1e-300


@dataclass(eq=False)
class DampingReport:
    """Diagnostics of one filter application.

    sigma has one entry per cell, face and derivative order (component max
    already taken); exponents hold tau * cumulative delta per mode group.
    """

    avg: np.ndarray          # (q,) global averages
    norm: np.ndarray         # (q,) sup norms of u - avg
    sigma: np.ndarray        # 1D: (N, 2, k+1); 2D: (nx, ny, 4, k+1)
    delta: np.ndarray        # 1D: (N, k+1); 2D: (nx, ny, k+1)
    exponents: np.ndarray    # (..., groups) tau * cumulative delta, group >= 1

    def to_csv(self, path):
        """Dump per-cell damping data as CSV (flattened cell index)."""
        n_faces, k1 = self.sigma.shape[-2], self.sigma.shape[-1]
        sig = self.sigma.reshape(-1, n_faces * k1)
        dlt = self.delta.reshape(-1, self.delta.shape[-1])
        exp_ = self.exponents.reshape(-1, self.exponents.shape[-1])
        with open(path, "w") as f:
            cols = ["cell"]
            cols += [f"sigma_f{e}_m{m}" for e in range(n_faces) for m in range(k1)]
            cols += [f"delta_m{m}" for m in range(k1)]
            cols += [f"exponent_j{j}" for j in range(1, exp_.shape[-1] + 1)]
            f.write(",".join(cols) + "\n")
            for i in range(sig.shape[0]):
                row = [str(i)]
                row += ["%.17g" % v for v in sig[i]]
                row += ["%.17g" % v for v in dlt[i]]
                row += ["%.17g" % v for v in exp_[i]]
                f.write(",".join(row) + "\n")


def _order_coefficients(k: int) -> np.ndarray:
    """(2m+1) / (2 (2k-1) m!) for m = 0..k."""
    m = np.arange(k + 1)
    fact = np.array([math.factorial(int(mm)) for mm in m], dtype=float)
    return (2 * m + 1) / (2.0 * (2 * k - 1) * fact)


def _global_stats(field: SolutionField):
    """Global averages and sup norms of u - avg sampled on Gauss nodes."""
    ops = cell_ops(field.mesh.rule)
    c = field.coeffs
    if field.ndim == 1:
        h = field.mesh.h
        avg = np.einsum("n,nq->q", h, c[..., 0]) / np.sum(h)
        vals = np.einsum("nqm,gm->nqg", c, ops.P_norm)
        norm = np.max(np.abs(vals - avg[:, None]), axis=(0, 2))
    else:
        avg = c[..., 0, 0].mean(axis=(0, 1))
        vals = np.einsum("xyqmn,am,bn->xyqab", c, ops.P_norm, ops.P_norm,
                         optimize=True)
        norm = np.max(np.abs(vals - avg[:, None, None]), axis=(0, 1, 3, 4))
    return avg, norm


# ---------------------------------------------------------------------------
# 1D jumps
# ---------------------------------------------------------------------------


def _derivative_traces_1d(field: SolutionField):
    """d^m u at both cell ends, shapes (N, q, k+1 orders) each, physical."""
    ops = cell_ops(field.mesh.rule)
    c = field.coeffs
    left = np.einsum("nqm,om->nqo", c, ops.D_end[:, 0])
    right = np.einsum("nqm,om->nqo", c, ops.D_end[:, 1])
    scale = (2.0 / field.mesh.h)[:, None, None] ** np.arange(ops.k + 1)
    return left * scale, right * scale


def _boundary_jump_1d(side: bd.Side, trace, t, x, equation):
    """|ghost - interior| per derivative order at one domain end.

    trace has shape (q, k+1 orders).
    """
    q, k1 = trace.shape
    if side.kind == bd.OUTFLOW:
        return np.zeros((q, k1))
    if side.kind == bd.REFLECTIVE:
        ghost = trace * (-1.0) ** np.arange(k1)
        if equation.n_components > 1:
            ghost[1] = -ghost[1]
        return np.abs(trace - ghost)
    state = bd.exterior_state(side, trace[:, 0], (x,), t, equation, 0)
    jump = np.abs(trace)
    jump[:, 0] = np.abs(trace[:, 0] - state)
    return jump


def _face_jumps_1d(field: SolutionField, bc, t: float, equation):
    """Per-cell face jumps |[[d^m u]]|, shape (N, 2, q, k+1 orders)."""
    mesh = field.mesh
    n = mesh.n_cells
    left, right = _derivative_traces_1d(field)
    interior = np.abs(left[1:] - right[:-1])          # (N-1, q, k+1)
    jumps = np.empty((n, 2) + left.shape[1:])
    jumps[1:, 0] = interior
    jumps[:-1, 1] = interior
    if bc.left.kind == bd.PERIODIC:
        wrap = np.abs(left[0] - right[-1])
        jumps[0, 0] = wrap
        jumps[-1, 1] = wrap
    else:
        jumps[0, 0] = _boundary_jump_1d(bc.left, left[0], t, mesh.a, equation)
        jumps[-1, 1] = _boundary_jump_1d(bc.right, right[-1], t, mesh.b, equation)
    return jumps


# ---------------------------------------------------------------------------
# 2D jumps
# ---------------------------------------------------------------------------


def _corner_derivatives_2d(field: SolutionField):
    """All mixed derivatives at the four cell corners.

    Returns (nx, ny, q, ox, ex, oy, ey): order ox in x evaluated at the
    x-end ex, order oy in y at y-end ey, with physical 2/h scaling.
    """
    ops = cell_ops(field.mesh.rule)
    mesh = field.mesh
    vals = np.einsum("xyqmn,aem,bfn->xyqaebf", field.coeffs, ops.D_end, ops.D_end,
                     optimize=True)
    k1 = ops.k + 1
    sx = (2.0 / mesh.hx) ** np.arange(k1)
    sy = (2.0 / mesh.hy) ** np.arange(k1)
    return vals * sx[:, None, None, None] * sy[:, None]


def _mirror_trace(trace, flip_component: int):
    """Ghost trace of a slip wall: odd normal derivatives and the normal
    momentum change sign.  trace: (n, q, o_normal, o_tang, 2 ends)."""
    orders = trace.shape[2]
    ghost = trace * ((-1.0) ** np.arange(orders))[:, None, None]
    ghost[:, flip_component] = -ghost[:, flip_component]
    return ghost


def _boundary_corner_jump(side, trace, coords, t, equation, axis):
    """|ghost - interior| for one 2D side; trace (n, q, oN, oT, 2 ends)."""
    kind = side.kind
    if kind == bd.OUTFLOW:
        return np.zeros_like(trace)
    if kind == bd.REFLECTIVE:
        return np.abs(trace - _mirror_trace(trace, 1 + axis))
    if kind == bd.DOUBLE_MACH_BOTTOM:
        wall = np.abs(trace - _mirror_trace(trace, 1 + axis))
        post = equation.conserved(*bd.DM_POSTSHOCK)
        dirich = np.abs(trace)
        dirich[:, :, 0, 0, :] = np.abs(
            trace[:, :, 0, 0, :] - post[None, :, None]
        )
        x = coords[0]                                  # (n, 2) corner abscissae
        sel = (x < 1.0 / 6.0)[:, None, None, None, :]
        return np.where(sel, dirich, wall)
    # Constant prescribed states: ghost derivatives vanish.
    interior0 = trace[:, :, 0, 0, :].transpose(0, 2, 1)    # (n, 2, q)
    state = bd.exterior_state(side, interior0, coords, t, equation, axis)
    jump = np.abs(trace)
    jump[:, :, 0, 0, :] = np.abs(interior0 - state).transpose(0, 2, 1)
    return jump


def _corner_coords(mesh, axis):
    """Tangential coordinates of the two face corners per boundary cell, (n, 2)."""
    if axis == 0:
        centers, h = mesh.y_centers, mesh.hy
    else:
        centers, h = mesh.x_centers, mesh.hx
    return centers[:, None] + 0.5 * h * np.array([-1.0, 1.0])


def _face_jumps_2d(field: SolutionField, bc, t: float, equation):
    """|[[d^alpha u]]| at the trapezoid corners of every element face.

    Returns (jx, jy_bottom, jy_top):
      jx        (nx+1, ny, q, ox, oy, 2) on x-interfaces;
      jy_bottom (nx, ny+1, q, oy, ox, 2) as seen by the cell above the face;
      jy_top    same shape, as seen by the cell below (differs only at
                internal walls, where each side jumps against its mirror).
    """
    mesh = field.mesh
    corners = _corner_derivatives_2d(field)
    nx, ny = mesh.nx, mesh.ny

    right = corners[:, :, :, :, 1]                      # (nx, ny, q, ox, oy, ey)
    left = corners[:, :, :, :, 0]
    jx = np.empty((nx + 1,) + right.shape[1:])
    jx[1:nx] = np.abs(left[1:] - right[:-1])
    if bc.left.kind == bd.PERIODIC:
        wrap = np.abs(left[0] - right[-1])
        jx[0] = wrap
        jx[nx] = wrap
    else:
        yc = _corner_coords(mesh, axis=0)
        jx[0] = _boundary_corner_jump(
            bc.left, left[0], (np.full_like(yc, mesh.x0), yc), t, equation, 0)
        jx[nx] = _boundary_corner_jump(
            bc.right, right[-1], (np.full_like(yc, mesh.x1), yc), t, equation, 0)

    # y-interfaces: reorder to (n, q, o_normal=oy, o_tang=ox, end=ex).
    top = corners[:, :, :, :, :, :, 1].transpose(0, 1, 2, 5, 3, 4)
    bottom = corners[:, :, :, :, :, :, 0].transpose(0, 1, 2, 5, 3, 4)
    jy = np.empty((nx, ny + 1) + top.shape[2:])
    jy[:, 1:ny] = np.abs(bottom[:, 1:] - top[:, :-1])
    if bc.bottom.kind == bd.PERIODIC:
        wrap = np.abs(bottom[:, 0] - top[:, -1])
        jy[:, 0] = wrap
        jy[:, ny] = wrap
    else:
        xc = _corner_coords(mesh, axis=1)
        jy[:, 0] = _boundary_corner_jump(
            bc.bottom, bottom[:, 0], (xc, np.full_like(xc, mesh.y0)), t, equation, 1)
        jy[:, ny] = _boundary_corner_jump(
            bc.top, top[:, -1], (xc, np.full_like(xc, mesh.y1)), t, equation, 1)

    jy_bottom = jy_top = jy
    if getattr(mesh, "walls", ()):
        jy_bottom = jy.copy()
        jy_top = jy.copy()
        for wall in mesh.walls:
            j = wall.edge_index
            sl = slice(wall.lo, wall.hi)
            below = top[sl, j - 1]
            above = bottom[sl, j]
            jy_top[sl, j] = np.abs(below - _mirror_trace(below, 2))
            jy_bottom[sl, j] = np.abs(above - _mirror_trace(above, 2))
    return jx, jy_bottom, jy_top


# ---------------------------------------------------------------------------
# Damping coefficients and the filter
# ---------------------------------------------------------------------------


def _alpha_sets(k: int, alpha_norm: str):
    """Multi-index groups: sets[m] lists (ax, ay) with |alpha| = m."""
    sets = []
    for m in range(k + 1):
        if alpha_norm == "max":
            idx = [(m, j) for j in range(m + 1)] + [(j, m) for j in range(m)]
        else:
            idx = [(a, m - a) for a in range(m + 1) if a <= k and m - a <= k]
        sets.append(idx)
    return sets


def damping_report(field: SolutionField, equation, tau: float, bc=None,
                   t: float = 0.0, alpha_norm: str = "max") -> DampingReport:
    """Compute sigma, delta and the per-group damping exponents."""
    k = field.k
    if k < 1:
        raise ValueError("the damping filter requires k >= 1")
    coefs = _order_coefficients(k)
    avg, norm = _global_stats(field)
    active = norm >= _CONST_FLOOR
    safe_norm = np.where(active, norm, 1.0)

    if field.ndim == 1:
        if bc is None:
            bc = bd.periodic_1d()
        mesh = field.mesh
        jumps = _face_jumps_1d(field, bc, t, equation)        # (N, 2, q, k+1)
        hpow = mesh.h[:, None, None, None] ** np.arange(k + 1)
        sig_comp = coefs * hpow * jumps / safe_norm[:, None]
        sig_comp *= active[:, None]
        sigma = np.max(sig_comp, axis=2)                      # (N, 2, k+1)
        beta = equation.jacobian_radius(field.cell_averages())
        delta = beta[:, None] * sigma.sum(axis=1) / mesh.h[:, None]
        exponents = tau * np.cumsum(delta, axis=-1)[:, 1:]
        return DampingReport(avg=avg, norm=norm, sigma=sigma, delta=delta,
                             exponents=exponents)

    if bc is None:
        bc = bd.periodic_2d()
    mesh = field.mesh
    jx, jy_bottom, jy_top = _face_jumps_2d(field, bc, t, equation)
    alpha = _alpha_sets(k, alpha_norm)
    q = field.n_components
    nx, ny = mesh.nx, mesh.ny

    # jx layout (..., q, ox, oy, end); jy layout (..., q, oy, ox, end).
    mean_x = 0.5 * (jx[..., 0] + jx[..., 1])
    mean_yb = 0.5 * (jy_bottom[..., 0] + jy_bottom[..., 1])
    mean_yt = 0.5 * (jy_top[..., 0] + jy_top[..., 1])
    sx = np.zeros((k + 1, nx + 1, ny, q))
    syb = np.zeros((k + 1, nx, ny + 1, q))
    syt = np.zeros((k + 1, nx, ny + 1, q))
    for m in range(k + 1):
        for (ax, ay) in alpha[m]:
            sx[m] += mean_x[:, :, :, ax, ay]
            syb[m] += mean_yb[:, :, :, ay, ax]
            syt[m] += mean_yt[:, :, :, ay, ax]

    hx, hy = mesh.hx, mesh.hy
    cpx = (coefs * hx ** np.arange(k + 1))[:, None, None, None]
    cpy = (coefs * hy ** np.arange(k + 1))[:, None, None, None]
    sig_xl = cpx * sx[:, :nx] / safe_norm * active
    sig_xr = cpx * sx[:, 1:] / safe_norm * active
    sig_yb = cpy * syb[:, :, :ny] / safe_norm * active
    sig_yt = cpy * syt[:, :, 1:] / safe_norm * active
    sig_xl, sig_xr, sig_yb, sig_yt = (
        np.max(s, axis=-1) for s in (sig_xl, sig_xr, sig_yb, sig_yt))

    avgs = field.cell_averages()
    bx = equation.jacobian_radius(avgs, 0)
    by = equation.jacobian_radius(avgs, 1)
    delta = (bx * (sig_xl + sig_xr) / hx + by * (sig_yb + sig_yt) / hy)
    delta = delta.transpose(1, 2, 0)                          # (nx, ny, k+1)
    sigma = np.stack([sig_xl, sig_xr, sig_yb, sig_yt], axis=0).transpose(2, 3, 0, 1)
    cum = np.cumsum(delta, axis=-1)
    if alpha_norm == "max":
        exponents = tau * cum[..., 1 : k + 1]
    else:
        # Total-degree grouping has groups up to 2k; orders above k reuse
        # the full cumulative sum.
        tail = np.repeat(cum[..., k:], k, axis=-1)
        exponents = tau * np.concatenate([cum[..., 1 : k + 1], tail], axis=-1)
    return DampingReport(avg=avg, norm=norm, sigma=sigma, delta=delta,
                         exponents=exponents)


def sigma(field: SolutionField, cell, face: int, m: int, equation=None, bc=None,
          component: int | None = None) -> float:
    """Point query of the jump indicator for one cell face and order.

    `face` indexes (left, right) in 1D and (left, right, bottom, top) in 2D.
    The system max over components is returned (the quantity delta uses).
    """
    eq = equation if equation is not None else _ScalarProbe()
    rep = damping_report(field, eq, tau=1.0, bc=bc)
    idx = (cell,) if field.ndim == 1 else tuple(cell)
    return float(rep.sigma[idx + (face, m)])


def delta(field: SolutionField, equation, cell, m: int, bc=None) -> float:
    """Point query of the damping coefficient delta_K^m."""
    rep = damping_report(field, equation, tau=1.0, bc=bc)
    idx = (cell,) if field.ndim == 1 else tuple(cell)
    return float(rep.delta[idx + (m,)])


class _ScalarProbe:
    """Unit-wavespeed stand-in equation for sigma point queries."""

    n_components = 1
    is_linear = True

    def jacobian_radius(self, u, axis=0):
        return np.ones(np.asarray(u).shape[:-1])


def _group_map(k: int, alpha_norm: str) -> np.ndarray:
    mx, my = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    return np.maximum(mx, my) if alpha_norm == "max" else mx + my


def apply_filter(field: SolutionField, equation, tau: float, bc=None,
                 t: float = 0.0, alpha_norm: str = "max") -> SolutionField:
    """One application of the damping filter F_tau (cell averages untouched)."""
    rep = damping_report(field, equation, tau, bc=bc, t=t, alpha_norm=alpha_norm)
    k = field.k
    if field.ndim == 1:
        scales = np.ones(rep.exponents.shape[:-1] + (k + 1,))
        scales[..., 1:] = np.exp(-rep.exponents)
        return SolutionField(field.mesh, field.coeffs * scales[:, None, :])
    gm = _group_map(k, alpha_norm)
    n_groups = rep.exponents.shape[-1]
    scales = np.ones(rep.exponents.shape[:-1] + (n_groups + 1,))
    scales[..., 1:] = np.exp(-rep.exponents)
    mult = scales[..., gm]                                    # (nx, ny, k+1, k+1)
    return SolutionField(field.mesh, field.coeffs * mult[:, :, None])
