"""The discrete heart: trial-to-test mapping, star inner product, residuals.

The scheme enforces conservation on each control volume (CV) of a cell's
subdivision.  Writing the trial-to-test mapping M* per cell as

    (M* v)|_{CV_0} = v(left+) + A_0 v'(x_0),
    (M* v)|_{CV_j} - (M* v)|_{CV_{j-1}} = A_j v'(x_j),   j = 1..k,

the scheme has an equivalent Galerkin form whose bilinear form
<v, M* w> is an inner product exactly when the subdivision quadrature is
degree-(2k-1) exact with a positive margin; its Gram matrix G agrees with
the standard Legendre mass matrix except in the (k, k) entry.  Residuals
are offered in two independently computed forms:

* control-volume form: net face fluxes per CV (the conservation statement);
* modal form: a quadrature-based right-hand side per basis function,
  followed by a solve with G.

The two must produce identical per-CV rates; the property suite checks this.

Array layout: 1D coefficients are (cells, components, modes); 2D tensor
coefficients are (nx, ny, components, modes_x, modes_y).  Sampled point
values always carry the component axis last so equation fluxes can be
applied directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import boundary as bd
from .basis import (
    SubdivisionRule,
    gauss_rule,
    legendre_deriv_vandermonde,
    legendre_endpoint_derivs,
    legendre_vandermonde,
)
from .equations import numerical_flux
from .errors import NotSPD
from .mesh import Mesh1D, Mesh2D


# ---------------------------------------------------------------------------
# Reference-element operator bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellOps:
    """Precomputed reference-element operators for one subdivision rule.

    All matrices live on [-1, 1]; physical cells scale integrals by h/2 and
    derivatives by 2/h.  G is the reference star Gram matrix (physical
    star matrix = (h/2) G).
    """

    rule: SubdivisionRule
    k: int
    P_nodes: np.ndarray        # (k+2, k+1) basis at subdivision nodes
    dP_nodes: np.ndarray       # (k+2, k+1) basis derivative at nodes
    W: np.ndarray              # (k+1, k+1) CV integrals of the basis
    M: np.ndarray              # (k+1, k+1) M* values per CV
    G: np.ndarray              # (k+1, k+1) star Gram matrix, reference
    Winv: np.ndarray
    Ginv: np.ndarray
    B: np.ndarray              # (k+2, k+1) A_j * P_m'(xi_j), modal rhs kernel
    cv_gauss_xi: np.ndarray    # (k+1, k+1) Gauss points inside each CV
    cv_gauss_w: np.ndarray     # (k+1, k+1) matching reference weights
    P_cvg: np.ndarray          # (k+1, k+1, k+1) basis at CV Gauss points
    err_xi: np.ndarray         # (k+2,) projection/error quadrature points
    err_w: np.ndarray
    P_err: np.ndarray          # (k+2, k+1)
    pstar_xi: np.ndarray       # (k+1,) interior nodes + right endpoint
    pstar_inv: np.ndarray      # (k+1, k+1) nodal -> modal for the above
    norm_xi: np.ndarray        # (k+1,) Gauss points for sup-norm sampling
    P_norm: np.ndarray         # (k+1, k+1)
    edge_w: np.ndarray         # (k+1,) Gauss weights matching norm_xi
    D_end: np.ndarray          # (k+1, 2, k+1) endpoint derivatives d^m P_n(+-1)
    S: np.ndarray              # (k+1, k+1) exact integrals of P_m P_n'
    norm_diag: np.ndarray      # (k+1,) reference L2 norms 2/(2m+1)


def _cv_integrals(nodes: np.ndarray, k: int) -> np.ndarray:
    """W[j, m] = integral of P_m over [nodes[j], nodes[j+1]]."""
    # Antiderivative of P_m: (P_{m+1} - P_{m-1}) / (2m+1) for m >= 1, xi for m = 0.
    prim = np.zeros((len(nodes), k + 1))
    prim[:, 0] = nodes
    for m in range(1, k + 1):
        prim[:, m] = (
            legendre_vandermonde(m + 1, nodes)[:, m + 1]
            - legendre_vandermonde(m - 1, nodes)[:, m - 1]
        ) / (2 * m + 1)
    return prim[1:] - prim[:-1]


@lru_cache(maxsize=None)
def cell_ops(rule: SubdivisionRule) -> CellOps:
    k = rule.k
    nodes = rule.nodes
    A = rule.weights
    P_nodes = legendre_vandermonde(k, nodes)
    dP_nodes = legendre_deriv_vandermonde(k, nodes)

    W = _cv_integrals(nodes, k)
    M = np.empty((k + 1, k + 1))
    M[0] = P_nodes[0] + A[0] * dP_nodes[0]
    for j in range(1, k + 1):
        M[j] = M[j - 1] + A[j] * dP_nodes[j]
    G = W.T @ M
    if np.max(np.abs(G - G.T)) > 1e-13 * max(1.0, np.max(np.abs(G))):
        raise NotSPD("star Gram matrix is not symmetric")
    if np.min(np.linalg.eigvalsh(0.5 * (G + G.T))) <= 0.0:
        raise NotSPD("star Gram matrix is not positive definite")

    B = A[:, None] * dP_nodes

    gk, gw = gauss_rule(k + 1)
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    half = 0.5 * (nodes[1:] - nodes[:-1])
    cv_gauss_xi = mid[:, None] + half[:, None] * gk
    cv_gauss_w = half[:, None] * gw
    P_cvg = legendre_vandermonde(k, cv_gauss_xi)

    err_xi, err_w = gauss_rule(k + 2)
    P_err = legendre_vandermonde(k, err_xi)

    pstar_xi = np.concatenate([nodes[1:-1], [1.0]])
    pstar_inv = np.linalg.inv(legendre_vandermonde(k, pstar_xi))

    norm_xi, edge_w = gauss_rule(k + 1)
    P_norm = legendre_vandermonde(k, norm_xi)

    D_end = legendre_endpoint_derivs(k, k)

    S = np.zeros((k + 1, k + 1))
    for m in range(k + 1):
        for n in range(k + 1):
            if n > m and (n + m) % 2 == 1:
                S[m, n] = 2.0

    norm_diag = 2.0 / (2.0 * np.arange(k + 1) + 1.0)

    return CellOps(
        rule=rule, k=k, P_nodes=P_nodes, dP_nodes=dP_nodes, W=W, M=M, G=G,
        Winv=np.linalg.inv(W), Ginv=np.linalg.inv(G), B=B,
        cv_gauss_xi=cv_gauss_xi, cv_gauss_w=cv_gauss_w, P_cvg=P_cvg,
        err_xi=err_xi, err_w=err_w, P_err=P_err,
        pstar_xi=pstar_xi, pstar_inv=pstar_inv,
        norm_xi=norm_xi, P_norm=P_norm, edge_w=edge_w,
        D_end=D_end, S=S, norm_diag=norm_diag,
    )


# ---------------------------------------------------------------------------
# Star mass matrix and M* as standalone operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StarMassMatrix:
    """Physical star Gram matrix for one cell size, with its inverse."""

    k: int
    h: float
    matrix: np.ndarray
    inverse: np.ndarray


def mstar_apply(cell_coeffs: np.ndarray, rule: SubdivisionRule, h: float = 2.0) -> np.ndarray:
    """Control-volume constants of M* applied to a cell polynomial.

    The recursion is h-independent: physical weights carry h/2 while the
    derivative carries 2/h.  Accepts batched coefficients (..., k+1).
    """
    ops = cell_ops(rule)
    return np.asarray(cell_coeffs) @ ops.M.T


def star_mass_matrix(rule: SubdivisionRule, k: int, h: float) -> StarMassMatrix:
    if k != rule.k:
        raise ValueError("degree mismatch between rule and request")
    ops = cell_ops(rule)
    mat = 0.5 * h * ops.G
    return StarMassMatrix(k=k, h=h, matrix=mat, inverse=np.linalg.inv(mat))


# ---------------------------------------------------------------------------
# Solution fields and projections
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SolutionField:
    """Modal Legendre coefficients per cell per conserved component."""

    mesh: object
    coeffs: np.ndarray

    @property
    def ndim(self) -> int:
        return 1 if isinstance(self.mesh, Mesh1D) else 2

    @property
    def k(self) -> int:
        return self.mesh.rule.k

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[1 if self.ndim == 1 else 2]

    def copy(self) -> "SolutionField":
        return SolutionField(self.mesh, self.coeffs.copy())

    def cell_averages(self) -> np.ndarray:
        """Mean per cell per component; equals the zeroth mode."""
        if self.ndim == 1:
            return self.coeffs[..., 0]
        return self.coeffs[..., 0, 0]

    def zeros_like(self) -> "SolutionField":
        return SolutionField(self.mesh, np.zeros_like(self.coeffs))


def _as_components(values: np.ndarray, n_components: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if n_components == 1 and (values.ndim == 0 or values.shape[-1] != 1):
        values = values[..., None]
    return values


def l2_project(function, mesh, n_components: int = 1) -> SolutionField:
    """L2 projection into the broken polynomial space of the mesh's rule.

    `function` maps physical coordinates to state values with a trailing
    component axis (scalar functions may omit it).  Uses a (k+2)-point Gauss
    rule per direction, exact for polynomial data of degree <= k.
    """
    ops = cell_ops(mesh.rule)
    k = ops.k
    scale = (2.0 * np.arange(k + 1) + 1.0) / 2.0
    if isinstance(mesh, Mesh1D):
        x = mesh.physical_points(ops.err_xi)                   # (N, gq)
        vals = _as_components(function(x), n_components)        # (N, gq, q)
        coeffs = np.einsum("ngq,g,gm->nqm", vals, ops.err_w, ops.P_err)
        return SolutionField(mesh, coeffs * scale)
    x = mesh.physical_x(ops.err_xi)                             # (nx, gq)
    y = mesh.physical_y(ops.err_xi)                             # (ny, gq)
    xx = x[:, None, :, None]
    yy = y[None, :, None, :]
    vals = _as_components(function(xx + 0.0 * yy, yy + 0.0 * xx), n_components)
    coeffs = np.einsum(
        "xyabq,a,b,am,bn->xyqmn", vals, ops.err_w, ops.err_w, ops.P_err, ops.P_err,
        optimize=True,
    )
    return SolutionField(mesh, coeffs * (scale[:, None] * scale[None, :]))


def pstar_project(function, mesh, n_components: int = 1) -> SolutionField:
    """Piecewise interpolation at the interior subdivision points plus the
    right endpoint (tensorized in 2D); exact on the broken polynomial space."""
    ops = cell_ops(mesh.rule)
    if isinstance(mesh, Mesh1D):
        x = mesh.physical_points(ops.pstar_xi)                  # (N, k+1)
        vals = _as_components(function(x), n_components)        # (N, k+1, q)
        coeffs = np.einsum("npq,pm->nqm", vals, ops.pstar_inv.T)
        return SolutionField(mesh, coeffs)
    x = mesh.physical_x(ops.pstar_xi)
    y = mesh.physical_y(ops.pstar_xi)
    xx = x[:, None, :, None]
    yy = y[None, :, None, :]
    vals = _as_components(function(xx + 0.0 * yy, yy + 0.0 * xx), n_components)
    coeffs = np.einsum("xyabq,am,bn->xyqmn", vals, ops.pstar_inv.T, ops.pstar_inv.T,
                       optimize=True)
    return SolutionField(mesh, coeffs)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def star_norm(field: SolutionField) -> float:
    """Energy norm induced by the star inner product, summed over components."""
    ops = cell_ops(field.mesh.rule)
    c = field.coeffs
    if field.ndim == 1:
        quad = np.einsum("nqm,mM,nqM->n", c, ops.G, c)
        return float(np.sqrt(np.sum(0.5 * field.mesh.h * quad)))
    quad = np.einsum("xyqmn,mM,nN,xyqMN->", c, ops.G, ops.G, c, optimize=True)
    return float(np.sqrt(0.25 * field.mesh.hx * field.mesh.hy * quad))


def star_inner(a: SolutionField, b: SolutionField) -> float:
    """Star inner product of two fields on the same mesh."""
    ops = cell_ops(a.mesh.rule)
    if a.ndim == 1:
        quad = np.einsum("nqm,mM,nqM->n", a.coeffs, ops.G, b.coeffs)
        return float(np.sum(0.5 * a.mesh.h * quad))
    quad = np.einsum("xyqmn,mM,nN,xyqMN->", a.coeffs, ops.G, ops.G, b.coeffs,
                     optimize=True)
    return float(0.25 * a.mesh.hx * a.mesh.hy * quad)


def l2_norm(field: SolutionField) -> float:
    """Broken L2 norm (exact, from modal orthogonality)."""
    ops = cell_ops(field.mesh.rule)
    c = field.coeffs
    if field.ndim == 1:
        quad = np.einsum("nqm,m->n", c * c, ops.norm_diag)
        return float(np.sqrt(np.sum(0.5 * field.mesh.h * quad)))
    quad = np.einsum("xyqmn,m,n->", c * c, ops.norm_diag, ops.norm_diag)
    return float(np.sqrt(0.25 * field.mesh.hx * field.mesh.hy * quad))


def _traces_1d(field: SolutionField):
    ops = cell_ops(field.mesh.rule)
    c = field.coeffs
    return c @ ops.P_nodes[0], c @ ops.P_nodes[-1]


def jump_seminorm(field: SolutionField, periodic: bool = True) -> float:
    """Square root of the summed squared interface jumps.

    In 2D each element-face jump is integrated with a (k+1)-point Gauss rule
    along the face.  Non-periodic domain boundaries are not counted.
    """
    ops = cell_ops(field.mesh.rule)
    if field.ndim == 1:
        u_left, u_right = _traces_1d(field)
        jumps = u_left[1:] - u_right[:-1]
        total = np.sum(jumps**2)
        if periodic:
            total += np.sum((u_left[0] - u_right[-1]) ** 2)
        return float(np.sqrt(total))
    c = field.coeffs
    mesh = field.mesh
    # x-direction faces: tangential samples at the (k+1)-point edge rule.
    left = np.einsum("xyqmn,m,gn->xyqg", c, ops.P_nodes[0], ops.P_norm, optimize=True)
    right = np.einsum("xyqmn,m,gn->xyqg", c, ops.P_nodes[-1], ops.P_norm, optimize=True)
    jx = left[1:] - right[:-1]
    total = np.einsum("xyqg,g->", jx**2, ops.edge_w) * mesh.hy / 2.0
    if periodic:
        wrap = left[:1] - right[-1:]
        total += np.einsum("xyqg,g->", wrap**2, ops.edge_w) * mesh.hy / 2.0
    bottom = np.einsum("xyqmn,gm,n->xyqg", c, ops.P_norm, ops.P_nodes[0], optimize=True)
    top = np.einsum("xyqmn,gm,n->xyqg", c, ops.P_norm, ops.P_nodes[-1], optimize=True)
    jy = bottom[:, 1:] - top[:, :-1]
    total += np.einsum("xyqg,g->", jy**2, ops.edge_w) * mesh.hx / 2.0
    if periodic:
        wrap = bottom[:, :1] - top[:, -1:]
        total += np.einsum("xyqg,g->", wrap**2, ops.edge_w) * mesh.hx / 2.0
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# 1D residual
# ---------------------------------------------------------------------------


def _interface_states_1d(field: SolutionField, equation, bc, t: float):
    """Minus/plus trace states at the N+1 interfaces, boundary-closed."""
    mesh = field.mesh
    n = mesh.n_cells
    u_left, u_right = _traces_1d(field)
    q = u_left.shape[-1]
    minus = np.empty((n + 1, q))
    plus = np.empty((n + 1, q))
    minus[1:] = u_right
    plus[:n] = u_left
    if bc.left.kind == bd.PERIODIC:
        minus[0] = u_right[-1]
        plus[n] = u_left[0]
    else:
        minus[0] = bd.exterior_state(bc.left, u_left[0], (mesh.a,), t, equation, 0)
        plus[n] = bd.exterior_state(bc.right, u_right[-1], (mesh.b,), t, equation, 0)
    return minus, plus


def _flux_table_1d(field: SolutionField, equation, bc, t: float):
    """Numerical fluxes at interfaces plus physical fluxes at interior nodes.

    Returns (fhat, Fhat) with fhat of shape (N+1, q) and Fhat of shape
    (N, k+2, q) holding the flux at every subdivision node of every cell.
    """
    ops = cell_ops(field.mesh.rule)
    minus, plus = _interface_states_1d(field, equation, bc, t)
    fhat = numerical_flux(minus, plus, equation)
    k = ops.k
    n = field.mesh.n_cells
    q = field.n_components
    Fhat = np.empty((n, k + 2, q))
    Fhat[:, 0] = fhat[:-1]
    Fhat[:, -1] = fhat[1:]
    if k > 0:
        u_int = np.einsum("nqm,jm->njq", field.coeffs, ops.P_nodes[1:-1])
        Fhat[:, 1:-1] = equation.flux(u_int)
    return fhat, Fhat


def sv_residual_cv(field: SolutionField, equation, bc, t: float = 0.0) -> np.ndarray:
    """Per-CV integral rates d/dt int_CV u (inflow minus outflow flux)."""
    if field.ndim == 2:
        return _residual_2d(field, equation, bc, t, want="cv")
    _, Fhat = _flux_table_1d(field, equation, bc, t)
    return (Fhat[:, :-1] - Fhat[:, 1:]).transpose(0, 2, 1)


def sv_residual_modal(field: SolutionField, equation, bc, t: float = 0.0) -> np.ndarray:
    """Modal coefficient rates du/dt via the Galerkin right-hand side.

    Assembles, for each basis function w, the quadrature term Q(fhat w') plus
    interface terms, then solves with the star Gram matrix.  Produces the
    same per-CV integral rates as :func:`sv_residual_cv`.
    """
    if field.ndim == 2:
        return _residual_2d(field, equation, bc, t, want="modal")
    ops = cell_ops(field.mesh.rule)
    fhat, Fhat = _flux_table_1d(field, equation, bc, t)
    r = np.einsum("njq,jm->nqm", Fhat, ops.B)
    r += fhat[:-1, :, None] * ops.P_nodes[0]
    r -= fhat[1:, :, None] * ops.P_nodes[-1]
    rates = r @ ops.Ginv
    rates *= (2.0 / field.mesh.h)[:, None, None]
    return rates


# ---------------------------------------------------------------------------
# 2D residual
# ---------------------------------------------------------------------------


def _face_points_2d(mesh: Mesh2D, ops: CellOps, axis: int):
    """Tangential physical coordinates of CV-face Gauss points on a boundary."""
    if axis == 0:
        centers, h = mesh.y_centers, mesh.hy
    else:
        centers, h = mesh.x_centers, mesh.hx
    return centers[:, None, None] + 0.5 * h * ops.cv_gauss_xi[None]


def _interface_fluxes_2d(field, equation, bc, t, axis):
    """LF fluxes on all element interfaces orthogonal to `axis`.

    Returns an array of shape (nx+1, ny, cv, g, q) for axis 0 or
    (nx, ny+1, cv, g, q) for axis 1.
    """
    ops = cell_ops(field.mesh.rule)
    mesh = field.mesh
    c = field.coeffs
    if axis == 0:
        lo_line = np.einsum("xyqmn,m->xynq", c, ops.P_nodes[0])
        hi_line = np.einsum("xyqmn,m->xynq", c, ops.P_nodes[-1])
        side_lo, side_hi = bc.left, bc.right
        coord_edges = (mesh.x0, mesh.x1)
    else:
        lo_line = np.einsum("xyqmn,n->xymq", c, ops.P_nodes[0])
        hi_line = np.einsum("xyqmn,n->xymq", c, ops.P_nodes[-1])
        side_lo, side_hi = bc.bottom, bc.top
        coord_edges = (mesh.y0, mesh.y1)
    u_lo = np.einsum("xymq,cgm->xycgq", lo_line, ops.P_cvg)
    u_hi = np.einsum("xymq,cgm->xycgq", hi_line, ops.P_cvg)

    n_axis = mesh.nx if axis == 0 else mesh.ny
    shape = list(u_lo.shape)
    shape[axis] += 1
    minus = np.empty(shape)
    plus = np.empty(shape)
    sl_in = [slice(None)] * 5
    sl_in[axis] = slice(1, None)
    minus[tuple(sl_in)] = u_hi
    sl_in[axis] = slice(0, n_axis)
    plus[tuple(sl_in)] = u_lo

    first = [slice(None)] * 5
    last = [slice(None)] * 5
    first[axis] = 0
    last[axis] = n_axis
    first, last = tuple(first), tuple(last)
    tang = _face_points_2d(mesh, ops, axis)  # (n_tang, cv, g)
    if side_lo.kind == bd.PERIODIC:
        hi_last = [slice(None)] * 5
        hi_last[axis] = n_axis - 1
        lo_first = [slice(None)] * 5
        lo_first[axis] = 0
        minus[first] = u_hi[tuple(hi_last)]
        plus[last] = u_lo[tuple(lo_first)]
    else:
        if axis == 0:
            coords_lo = (np.full_like(tang, coord_edges[0]), tang)
            coords_hi = (np.full_like(tang, coord_edges[1]), tang)
        else:
            coords_lo = (tang, np.full_like(tang, coord_edges[0]))
            coords_hi = (tang, np.full_like(tang, coord_edges[1]))
        minus[first] = bd.exterior_state(side_lo, plus[first], coords_lo, t, equation, axis)
        plus[last] = bd.exterior_state(side_hi, minus[last], coords_hi, t, equation, axis)
    return numerical_flux(minus, plus, equation, axis)


def _apply_walls_y(fhat_y, field, equation):
    """Split the y-interface flux table at internal slip walls.

    Returns (flux_for_lower, flux_for_upper): the array used when the face
    acts as a cell's top face, and the one used when it acts as a bottom
    face.  Without walls both are the same object.
    """
    mesh = field.mesh
    if not mesh.walls:
        return fhat_y, fhat_y
    ops = cell_ops(mesh.rule)
    c = field.coeffs
    lower = fhat_y.copy()
    upper = fhat_y.copy()
    for wall in mesh.walls:
        if wall.axis != "y":
            raise NotImplementedError("only y-axis internal walls are supported")
        j = wall.edge_index
        sl = slice(wall.lo, wall.hi)
        # Cell below the wall: its own trace against its mirror image.
        below_line = np.einsum("xqmn,n->xmq", c[sl, j - 1], ops.P_nodes[-1])
        u_below = np.einsum("xmq,cgm->xcgq", below_line, ops.P_cvg)
        ghost_b = bd.mirror_state(u_below, equation, 1)
        lower[sl, j] = numerical_flux(u_below, ghost_b, equation, 1)
        above_line = np.einsum("xqmn,n->xmq", c[sl, j], ops.P_nodes[0])
        u_above = np.einsum("xmq,cgm->xcgq", above_line, ops.P_cvg)
        ghost_a = bd.mirror_state(u_above, equation, 1)
        upper[sl, j] = numerical_flux(ghost_a, u_above, equation, 1)
    return lower, upper


def _residual_2d(field: SolutionField, equation, bc, t: float, want: str):
    ops = cell_ops(field.mesh.rule)
    mesh = field.mesh
    c = field.coeffs
    k = ops.k
    nx, ny = mesh.nx, mesh.ny
    q = field.n_components
    wq = ops.cv_gauss_w

    # x-direction: numerical fluxes at element interfaces, physical fluxes at
    # the k interior subdivision planes, integrated over each tangential CV.
    fhat_x = _interface_fluxes_2d(field, equation, bc, t, axis=0)
    int_x = np.einsum("Xycgq,cg->Xycq", fhat_x, wq) * (mesh.hy / 2.0)
    pos_x = np.empty((nx, ny, k + 2, k + 1, q))
    pos_x[:, :, 0] = int_x[:-1]
    pos_x[:, :, -1] = int_x[1:]
    if k > 0:
        lines = np.einsum("xyqmn,jm->xyjnq", c, ops.P_nodes[1:-1], optimize=True)
        vals = np.einsum("xyjnq,cgn->xyjcgq", lines, ops.P_cvg, optimize=True)
        fvals = equation.flux(vals, axis=0)
        pos_x[:, :, 1:-1] = np.einsum("xyjcgq,cg->xyjcq", fvals, wq) * (mesh.hy / 2.0)
    F = pos_x[:, :, :-1] - pos_x[:, :, 1:]          # (nx, ny, jx, jy, q)

    fhat_y = _interface_fluxes_2d(field, equation, bc, t, axis=1)
    fy_as_top, fy_as_bottom = _apply_walls_y(fhat_y, field, equation)
    int_as_bottom = np.einsum("xYcgq,cg->xYcq", fy_as_bottom, wq) * (mesh.hx / 2.0)
    int_as_top = (
        int_as_bottom
        if fy_as_top is fy_as_bottom
        else np.einsum("xYcgq,cg->xYcq", fy_as_top, wq) * (mesh.hx / 2.0)
    )
    pos_y = np.empty((nx, ny, k + 2, k + 1, q))
    pos_y[:, :, 0] = int_as_bottom[:, :-1]
    pos_y[:, :, -1] = int_as_top[:, 1:]
    if k > 0:
        lines = np.einsum("xyqmn,jn->xyjmq", c, ops.P_nodes[1:-1], optimize=True)
        vals = np.einsum("xyjmq,cgm->xyjcgq", lines, ops.P_cvg, optimize=True)
        fvals = equation.flux(vals, axis=1)
        pos_y[:, :, 1:-1] = np.einsum("xyjcgq,cg->xyjcq", fvals, wq) * (mesh.hx / 2.0)
    # y-face differences act in the jy slot with jx as the tangential CV index.
    F += (pos_y[:, :, :-1] - pos_y[:, :, 1:]).transpose(0, 1, 3, 2, 4)

    if want == "cv":
        return F.transpose(0, 1, 4, 2, 3)
    r = np.einsum("xyjlq,jm,ln->xyqmn", F, ops.M, ops.M, optimize=True)
    rates = np.einsum("xyqmn,mM,nN->xyqMN", r, ops.Ginv, ops.Ginv, optimize=True)
    rates *= 4.0 / (mesh.hx * mesh.hy)
    return rates


# ---------------------------------------------------------------------------
# Verification-facing bilinear forms and the temporal difference operator
# ---------------------------------------------------------------------------


def bilinear_h_quadrature(v: SolutionField, w: SolutionField, beta: float = 1.0) -> float:
    """Advection bilinear form via the subdivision quadrature (periodic).

    H(v, w) = beta ( sum_i Q_i(v w') + sum_i v^-[[w]] - sum_i A_0 (w')^+ [[v]] ).
    """
    ops = cell_ops(v.mesh.rule)
    cv, cw = v.coeffs, w.coeffs
    v_nodes = np.einsum("nqm,jm->njq", cv, ops.P_nodes)
    dw_nodes = np.einsum("nqm,jm->njq", cw, ops.dP_nodes)
    quad = np.einsum("njq,njq,j->", v_nodes, dw_nodes, ops.rule.weights)
    v_minus = cv @ ops.P_nodes[-1]
    w_left = cw @ ops.P_nodes[0]
    w_right = cw @ ops.P_nodes[-1]
    jump_w = np.roll(w_left, -1, axis=0) - w_right
    upwind = np.sum(v_minus * jump_w)
    v_left = cv @ ops.P_nodes[0]
    jump_v = np.roll(v_left, -1, axis=0) - v_minus
    dw_plus = np.roll(cw @ ops.dP_nodes[0], -1, axis=0)
    downwind = ops.rule.weights[0] * np.sum(dw_plus * jump_v)
    return float(beta * (quad + upwind - downwind))


def bilinear_h_exact(v: SolutionField, w: SolutionField, beta: float = 1.0) -> float:
    """Upwind-reduced advection form with exact volume integration (periodic).

    H(v, w) = beta ( sum_i int v w' + sum_i v^-[[w]] ); equals the quadrature
    form on the broken polynomial space under the upwind condition.
    """
    ops = cell_ops(v.mesh.rule)
    cv, cw = v.coeffs, w.coeffs
    vol = np.einsum("nqm,mM,nqM->", cv, ops.S, cw)
    v_minus = cv @ ops.P_nodes[-1]
    jump_w = np.roll(cw @ ops.P_nodes[0], -1, axis=0) - cw @ ops.P_nodes[-1]
    return float(beta * (vol + np.sum(v_minus * jump_w)))


def bilinear_h_function(func, w: SolutionField, beta: float = 1.0) -> float:
    """Quadrature form H(func, w) with the first argument a plain function."""
    ops = cell_ops(w.mesh.rule)
    mesh = w.mesh
    cw = w.coeffs
    x_nodes = mesh.subdivision_points()                    # (N, k+2)
    v_nodes = _as_components(func(x_nodes), w.n_components)
    dw_nodes = np.einsum("nqm,jm->njq", cw, ops.dP_nodes)
    quad = np.einsum("njq,njq,j->", v_nodes, dw_nodes, ops.rule.weights)
    v_minus = v_nodes[:, -1]
    jump_w = np.roll(cw @ ops.P_nodes[0], -1, axis=0) - cw @ ops.P_nodes[-1]
    upwind = np.sum(v_minus * jump_w)
    v_plus = np.roll(v_nodes[:, 0], -1, axis=0)
    dw_plus = np.roll(cw @ ops.dP_nodes[0], -1, axis=0)
    downwind = ops.rule.weights[0] * np.sum(dw_plus * (v_plus - v_minus))
    return float(beta * (quad + upwind - downwind))


def temporal_difference(field: SolutionField, equation, tau: float) -> SolutionField:
    """The operator D* with <D* v, w>_* = tau H(v, w) (periodic advection)."""
    from .boundary import periodic_1d

    rates = sv_residual_modal(field, equation, periodic_1d(), 0.0)
    return SolutionField(field.mesh, tau * rates)
