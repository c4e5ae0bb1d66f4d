"""Legendre basis and cell-subdivision quadrature rules.

Everything lives on the reference element xi in [-1, 1] with the standard
Legendre polynomials P_l (P_l(1) = 1).  Physical cells are reached through
the affine map x = x_center + (h/2) xi, so integrals pick up a factor h/2
and derivatives a factor 2/h.

A subdivision rule for degree k consists of k interior nodes together with
the endpoints -1 and +1, plus quadrature weights A_0..A_{k+1} that are exact
for polynomials of degree <= 2k-1 and satisfy the upwind condition A_0 = 0.
Admissible interior nodes are the zeros of

    p_k(xi) = P_k(xi) + c/(k(1-c)) * (xi+1) * P_k'(xi),   -1/k < c < 1,

with c = 0 giving the Gauss points.  The right-Radau family is built
directly from the (k+1)-point right-endpoint Radau rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ExactnessViolation, NonDistinctRoots

GAUSS = "gauss"
RIGHT_RADAU = "radau"
PARAM_C = "paramc"

_FAMILIES = (GAUSS, RIGHT_RADAU, PARAM_C)

_ROOT_TOL = 1e-14
_EXACTNESS_TOL = 1e-12


def legendre_eval(ell: int, xi):
    """Evaluate P_ell(xi) by the three-term recurrence.

    Works on scalars or arrays; exact at the endpoints (P_ell(1) = 1,
    P_ell(-1) = (-1)^ell).
    """
    xi = np.asarray(xi, dtype=float)
    if ell == 0:
        return np.ones_like(xi)
    p_prev = np.ones_like(xi)
    p = xi.copy()
    for n in range(1, ell):
        p, p_prev = ((2 * n + 1) * xi * p - n * p_prev) / (n + 1), p
    return p


def legendre_deriv(ell: int, xi):
    """Evaluate P_ell'(xi), companion to :func:`legendre_eval`."""
    xi = np.asarray(xi, dtype=float)
    if ell == 0:
        return np.zeros_like(xi)
    p_prev = np.ones_like(xi)
    p = xi.copy()
    d_prev = np.zeros_like(xi)
    d = np.ones_like(xi)
    for n in range(1, ell):
        p_next = ((2 * n + 1) * xi * p - n * p_prev) / (n + 1)
        d_next = ((2 * n + 1) * (p + xi * d) - n * d_prev) / (n + 1)
        p, p_prev = p_next, p
        d, d_prev = d_next, d
    return d


def legendre_vandermonde(degree: int, xi) -> np.ndarray:
    """Matrix V[..., m] = P_m(xi) for m = 0..degree."""
    xi = np.asarray(xi, dtype=float)
    return np.stack([legendre_eval(m, xi) for m in range(degree + 1)], axis=-1)


def legendre_deriv_vandermonde(degree: int, xi) -> np.ndarray:
    """Matrix V[..., m] = P_m'(xi) for m = 0..degree."""
    xi = np.asarray(xi, dtype=float)
    return np.stack([legendre_deriv(m, xi) for m in range(degree + 1)], axis=-1)


def legendre_endpoint_derivs(degree: int, max_order: int) -> np.ndarray:
    """d^m P_n at the endpoints, D[m, e, n] with e=0 for xi=-1, e=1 for xi=+1.

    Uses the closed form d^m P_n(1) = (n+m)! / (2^m m! (n-m)!) and the parity
    d^m P_n(-1) = (-1)^(n+m) d^m P_n(1); exact in double precision for the
    degrees used here.
    """
    out = np.zeros((max_order + 1, 2, degree + 1))
    for m in range(max_order + 1):
        for n in range(degree + 1):
            if m > n:
                continue
            val = 1.0
            for j in range(n - m + 1, n + m + 1):
                val *= j
            val /= 2.0**m * math.factorial(m)
            out[m, 1, n] = val
            out[m, 0, n] = val * (-1.0) ** (n + m)
    return out


def gauss_rule(n: int):
    """Standard n-point Gauss-Legendre rule on [-1, 1] (exact to degree 2n-1)."""
    if not 1 <= n <= 16:
        raise ValueError(f"gauss_rule supports 1 <= n <= 16, got {n}")
    return np.polynomial.legendre.leggauss(n)


def _bracketed_roots(fun, dfun, count: int, scan_points: int = 64):
    """Find `count` simple zeros of `fun` on (-1, 1) by bracketing + Newton."""
    xs = np.linspace(-1.0, 1.0, scan_points + 1)
    fs = fun(xs)
    roots = []
    for i in range(scan_points):
        fa, fb = fs[i], fs[i + 1]
        if fa == 0.0:
            roots.append(xs[i])
            continue
        if fa * fb >= 0.0:
            continue
        a, b = xs[i], xs[i + 1]
        x = 0.5 * (a + b)
        for _ in range(100):
            fx = fun(x)
            if fx == 0.0:
                break
            if fun(a) * fx < 0.0:
                b = x
            else:
                a = x
            dx = fx / dfun(x)
            x_newton = x - dx
            x = x_newton if a < x_newton < b else 0.5 * (a + b)
            if abs(b - a) < _ROOT_TOL and abs(dx) < _ROOT_TOL:
                break
        roots.append(x)
    roots = np.array(sorted(r for r in roots if -1.0 < r < 1.0))
    if len(roots) != count or (len(roots) > 1 and np.min(np.diff(roots)) < 1e-10):
        raise NonDistinctRoots(
            f"expected {count} distinct interior zeros, found {len(roots)}"
        )
    return roots


def subdivision_nodes(k: int, family: str, c: float | None = None) -> np.ndarray:
    """Interior subdivision nodes (k strictly increasing points in (-1, 1)).

    Gauss: zeros of P_k.  ParamC: zeros of p_k for the given c (requires
    -1/k < c < 1).  Right Radau: interior nodes of the (k+1)-point
    right-endpoint Radau rule, i.e. the interior zeros of P_k - P_{k+1}.
    """
    if k < 1:
        raise ValueError("subdivision nodes require k >= 1")
    if family == RIGHT_RADAU:
        fun = lambda x: legendre_eval(k, x) - legendre_eval(k + 1, x)
        dfun = lambda x: legendre_deriv(k, x) - legendre_deriv(k + 1, x)
        return _bracketed_roots(fun, dfun, k, scan_points=256)
    if family == GAUSS:
        c = 0.0
    elif family == PARAM_C:
        if c is None:
            raise ValueError("ParamC family requires the parameter c")
        if not (-1.0 / k < c < 1.0):
            raise NonDistinctRoots(f"c={c} outside the valid range (-1/{k}, 1)")
    else:
        raise ValueError(f"unknown subdivision family {family!r}")
    coef = c / (k * (1.0 - c))
    fun = lambda x: legendre_eval(k, x) + coef * (x + 1.0) * legendre_deriv(k, x)

    def dfun(x):
        # p_k' = P_k' + coef * (P_k' + (x+1) P_k''), with P_k'' from the
        # Legendre ODE (1-x^2) P'' = 2x P' - k(k+1) P.
        d1 = legendre_deriv(k, x)
        p = legendre_eval(k, x)
        d2 = (2.0 * x * d1 - k * (k + 1) * p) / (1.0 - x * x)
        return d1 + coef * (d1 + (x + 1.0) * d2)

    return _bracketed_roots(fun, dfun, k, scan_points=64)


def quadrature_weights(k: int, nodes: np.ndarray) -> np.ndarray:
    """Weights A_0..A_{k+1} for the nodes {-1, interior..., +1}.

    A_0 is fixed to zero (upwind condition); the remaining k+1 weights solve
    the moment system for exactness on degree <= k.  Exactness on degree
    <= 2k-1 is then verified and must hold, which happens exactly when the
    interior nodes belong to the admissible p_k family.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape != (k + 2,):
        raise ValueError(f"expected {k + 2} nodes (endpoints included)")
    # Legendre moments: sum_j A_j P_m(xi_j) = 2 delta_{m0}, m = 0..k.
    V = legendre_vandermonde(k, nodes[1:]).T
    rhs = np.zeros(k + 1)
    rhs[0] = 2.0
    weights = np.zeros(k + 2)
    weights[1:] = np.linalg.solve(V, rhs)
    # Clean solver noise so rules whose endpoint weight vanishes analytically
    # (Gauss) carry an exact zero; admissible weights are O(1).
    weights[np.abs(weights) < 1e-13] = 0.0
    for p in range(k + 1, 2 * k):
        exact = 2.0 / (p + 1) if p % 2 == 0 else 0.0
        resid = abs(np.dot(weights, nodes**p) - exact)
        if resid > _EXACTNESS_TOL * 2.0:
            raise ExactnessViolation(
                f"degree-{p} monomial residual {resid:.3e} exceeds tolerance; "
                "nodes are not an admissible subdivision family"
            )
    return weights


@dataclass(frozen=True, eq=False)
class SubdivisionRule:
    """Per-degree subdivision nodes and weights on the reference element.

    nodes holds all k+2 points (endpoints included); weights the matching
    A_0..A_{k+1} scaled for [-1, 1] (multiply by h/2 on a physical cell).
    """

    k: int
    family: str
    c: float | None
    nodes: np.ndarray
    weights: np.ndarray
    upwind: bool
    positivity_margin: float

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    def quadrature(self, values: np.ndarray) -> np.ndarray:
        """Apply the rule to values sampled at all k+2 nodes (last axis)."""
        return np.asarray(values) @ self.weights


def positivity_margin(k: int, nodes: np.ndarray, weights: np.ndarray) -> float:
    """Margin 2/(2k-1) - Q(P_{k+1} P_{k-1}) on the reference element.

    Positivity of this quantity is what makes the star bilinear form an
    inner product; it is checked at rule-construction time.
    """
    if k == 0:
        return float("inf")
    q = np.dot(weights, legendre_eval(k + 1, nodes) * legendre_eval(k - 1, nodes))
    return 2.0 / (2 * k - 1) - q


@lru_cache(maxsize=None)
def _cached_rule(k: int, family: str, c: float | None) -> SubdivisionRule:
    if k == 0:
        # Degenerate rule: one control volume, weight concentrated at +1
        # is not needed; the single-CV scheme only uses the endpoints.
        nodes = np.array([-1.0, 1.0])
        weights = np.array([0.0, 2.0])
    else:
        interior = subdivision_nodes(k, family, c)
        nodes = np.concatenate(([-1.0], interior, [1.0]))
        weights = quadrature_weights(k, nodes)
    margin = positivity_margin(k, nodes, weights)
    if margin <= 0.0:
        raise ExactnessViolation(
            f"positivity margin {margin:.3e} not positive for k={k}, {family}"
        )
    return SubdivisionRule(
        k=k,
        family=family,
        c=c,
        nodes=nodes,
        weights=weights,
        upwind=bool(weights[0] == 0.0),
        positivity_margin=margin,
    )


def subdivision_rule(k: int, family: str = GAUSS, c: float | None = None) -> SubdivisionRule:
    """Build (and cache) the subdivision rule for degree k."""
    if family not in _FAMILIES:
        raise ValueError(f"unknown subdivision family {family!r}; expected {_FAMILIES}")
    if family != PARAM_C:
        c = None
    return _cached_rule(k, family, c)
