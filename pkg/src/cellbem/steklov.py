"""Discrete Poincare-Steklov (Dirichlet-to-Neumann) operators.

Interior domains use P = V^-1 (K + I/2) on their own boundary curve.  The
extracellular domain couples the cell-facing boundaries with the zero-flux
outer boundary: the two trace identities are assembled into one block system
in (conormal on the inner boundaries, trace on the outer boundary) and the
outer unknowns are eliminated by the block solve.  All conormal derivatives
follow the owning domain's outward normal; for the extracellular domain that
normal points into the cells on the inner boundaries.

A closed curve whose logarithmic capacity is 1 makes the single-layer
operator singular on constants; assemblies detect bad conditioning and redo
the solve on a geometry scaled by 2, mapping the operator back (DtN scales
inversely with length).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .bem import assemble_layers
from .geometry import ParamCurve

_RCOND_FLOOR = 1e-12
_RESCALE = 2.0


class _Factorized:
    """LU factorization with a 1-norm reciprocal condition estimate."""

    def __init__(self, A: np.ndarray):
        self.anorm = float(np.linalg.norm(A, 1))
        self.lu, self.piv = lu_factor(A)
        gecon = get_lapack_funcs("gecon", (A,))
        self.rcond, info = gecon(self.lu, self.anorm, norm="1")
        if info != 0:
            raise np.linalg.LinAlgError(f"condition estimate failed (info={info})")

    def solve(self, b):
        return lu_solve((self.lu, self.piv), b)


class SteklovOperator:
    """Dense DtN map P on one domain boundary, optionally regularized.

    ``solve_plus`` solves with P+ = P + alpha e e^T (available after
    :func:`regularize`); the factorization is cached and reused for every
    right-hand side.
    """

    def __init__(self, P: np.ndarray, domain_index: int | None = None,
                 rescaled: bool = False, rcond: float | None = None):
        if not np.all(np.isfinite(P)):
            raise FloatingPointError("DtN assembly produced non-finite entries")
        self.P = P
        self.P.flags.writeable = False
        self.M = P.shape[0]
        self.domain_index = domain_index
        self.rescaled = rescaled
        self.rcond = rcond
        self.alpha = None
        self._plus = None
        self._inv_plus = None

    def apply(self, v):
        return self.P @ np.asarray(v, float)

    def solve_plus(self, b):
        if self._plus is None:
            raise RuntimeError("operator is not regularized; call regularize() first")
        return self._plus.solve(np.asarray(b, float))

    def inverse_plus(self) -> np.ndarray:
        """(P+)^-1 computed as M solves against the cached factorization."""
        if self._inv_plus is None:
            self._inv_plus = self.solve_plus(np.eye(self.M))
            self._inv_plus.flags.writeable = False
        return self._inv_plus

    def symmetry_defect(self) -> float:
        """||P - P^T||_F / ||P||_F (tracked, not enforced)."""
        return float(np.linalg.norm(self.P - self.P.T) / np.linalg.norm(self.P))

    def kernel_defect(self) -> float:
        """||P e||_inf: how well constants sit in the kernel."""
        return float(np.abs(self.P @ np.ones(self.M)).max())

    def to_csv(self) -> str:
        rows = ["row,col,value"]
        for k in range(self.M):
            for j in range(self.M):
                rows.append(f"{k},{j},{self.P[k, j]!r}")
        return "\n".join(rows) + "\n"


def regularize(op: SteklovOperator, alpha: float | None = None) -> SteklovOperator:
    """Attach the rank-one shift P+ = P + alpha e e^T and factor it.

    alpha defaults to ||P||_inf / M, scaling the shift to the operator.
    alpha = 0 is allowed only when P is already invertible (unbounded bath).
    """
    if alpha is None:
        alpha = float(np.linalg.norm(op.P, np.inf)) / op.M
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    out = SteklovOperator(op.P.copy(), op.domain_index, op.rescaled, op.rcond)
    out.alpha = float(alpha)
    out._plus = _Factorized(op.P + alpha * np.ones((op.M, op.M)))
    if out._plus.rcond < _RCOND_FLOOR:
        raise np.linalg.LinAlgError(
            f"regularized operator is numerically singular (rcond={out._plus.rcond:.2e}); "
            "alpha = 0 is only valid for the unbounded-bath operator")
    return out


def interior_dtn(curve: ParamCurve, domain_index: int | None = None,
                 _allow_rescale: bool = True) -> SteklovOperator:
    """DtN map of the interior harmonic extension: P = V^-1 (K + I/2)."""
    if curve.M < 8:
        raise ValueError("interior DtN needs at least 8 collocation nodes")
    ops = assemble_layers(curve)
    rhs = ops.K + 0.5 * np.eye(curve.M)
    fac = _Factorized(ops.V)
    if fac.rcond < _RCOND_FLOOR:
        if not _allow_rescale:
            raise np.linalg.LinAlgError(
                f"single-layer operator numerically singular (rcond={fac.rcond:.2e})")
        scaled = interior_dtn(curve.scaled(_RESCALE), domain_index, _allow_rescale=False)
        return SteklovOperator(_RESCALE * scaled.P, domain_index,
                               rescaled=True, rcond=scaled.rcond)
    return SteklovOperator(fac.solve(rhs), domain_index, rcond=fac.rcond)


def multi_boundary_dtn(curves, outward, domain_index: int | None = None,
                       _allow_rescale: bool = True) -> SteklovOperator:
    """DtN of a domain bounded by several closed curves (holes allowed).

    ``outward[p]`` marks whether curve p's ccw normal points out of the
    domain (the enclosing curve of a bounded domain: True; hole boundaries
    and all boundaries of an unbounded complement: False).  Taking traces of
    the Green representation from inside the domain gives

        V psi = (I/2 + K_S) u,

    where K_S carries a sign flip on the columns of hole parts (their domain
    normal is the negated curve normal); psi is the conormal derivative along
    the domain's outward normal on every part.  With a single True part this
    is the interior map, with a single False part the unbounded-bath map.
    """
    curves = list(curves)
    outward = list(outward)
    if len(curves) != len(outward) or not curves:
        raise ValueError("need matching non-empty curve and orientation lists")
    _check_disjoint([c for c, o in zip(curves, outward) if not o] or curves, None)
    V, K = _multi_curve_blocks(curves)
    total = sum(c.M for c in curves)
    offs = np.concatenate(([0], np.cumsum([c.M for c in curves])))
    for p, out in enumerate(outward):
        if not out:
            K[:, offs[p]:offs[p + 1]] *= -1.0
    fac = _Factorized(V)
    if fac.rcond < _RCOND_FLOOR:
        if not _allow_rescale:
            raise np.linalg.LinAlgError(
                f"single-layer block numerically singular (rcond={fac.rcond:.2e})")
        scaled = multi_boundary_dtn(_scaled_all(curves), outward, domain_index,
                                    _allow_rescale=False)
        return SteklovOperator(_RESCALE * scaled.P, domain_index,
                               rescaled=True, rcond=scaled.rcond)
    return SteklovOperator(fac.solve(0.5 * np.eye(total) + K), domain_index,
                           rcond=fac.rcond)


def exterior_dtn(inner_curves, outer: ParamCurve | None,
                 _allow_rescale: bool = True) -> SteklovOperator:
    """DtN map of the extracellular domain on its cell-facing boundaries.

    ``inner_curves`` are the closed boundaries separating the bath from the
    cell block (counterclockwise as stored; the bath-side normal is their
    negation).  ``outer`` carries the homogeneous Neumann condition and its
    trace unknowns are eliminated by the block solve.  ``outer=None`` selects
    the unbounded-bath variant P = V^-1 (I/2 - K), which has no constant
    kernel and admits alpha = 0.
    """
    inner_curves = list(inner_curves)
    if not inner_curves:
        raise ValueError("need at least one inner boundary curve")
    _check_disjoint(inner_curves, outer)
    m_parts = [c.M for c in inner_curves]
    M0 = sum(m_parts)

    V_hh, K_hh = _multi_curve_blocks(inner_curves)
    I_h = np.eye(M0)

    if outer is None:
        fac = _Factorized(V_hh)
        if fac.rcond < _RCOND_FLOOR:
            if not _allow_rescale:
                raise np.linalg.LinAlgError("unbounded-bath DtN assembly singular")
            scaled = exterior_dtn(_scaled_all(inner_curves), None, _allow_rescale=False)
            return SteklovOperator(_RESCALE * scaled.P, 0, rescaled=True, rcond=scaled.rcond)
        return SteklovOperator(fac.solve(0.5 * I_h - K_hh), 0, rcond=fac.rcond)

    hull_nodes = np.vstack([c.nodes for c in inner_curves])
    Mo = outer.M
    cross_ho = assemble_layers(outer, hull_nodes)     # outer sources, hull targets
    cross_oh_V = np.hstack([assemble_layers(c, outer.nodes).V for c in inner_curves])
    cross_oh_K = np.hstack([assemble_layers(c, outer.nodes).K for c in inner_curves])
    K_oo = assemble_layers(outer).K

    A = np.zeros((M0 + Mo, M0 + Mo))
    A[:M0, :M0] = V_hh
    A[:M0, M0:] = -cross_ho.K
    A[M0:, :M0] = cross_oh_V
    A[M0:, M0:] = -(K_oo + 0.5 * np.eye(Mo))
    rhs = np.vstack((0.5 * I_h - K_hh, -cross_oh_K))

    fac = _Factorized(A)
    if fac.rcond < _RCOND_FLOOR:
        if not _allow_rescale:
            raise np.linalg.LinAlgError(
                f"exterior DtN block system numerically singular (rcond={fac.rcond:.2e})")
        scaled = exterior_dtn(_scaled_all(inner_curves, outer), _scaled_outer(inner_curves, outer),
                              _allow_rescale=False)
        return SteklovOperator(_RESCALE * scaled.P, 0, rescaled=True, rcond=scaled.rcond)
    return SteklovOperator(fac.solve(rhs)[:M0, :], 0, rcond=fac.rcond)


def _multi_curve_blocks(curves):
    """Concatenated single/double layer blocks over a family of curves."""
    sizes = [c.M for c in curves]
    total = sum(sizes)
    V = np.zeros((total, total))
    K = np.zeros((total, total))
    offs = np.concatenate(([0], np.cumsum(sizes)))
    for a, ca in enumerate(curves):
        for b, cb in enumerate(curves):
            ops = assemble_layers(cb) if a == b else assemble_layers(cb, ca.nodes)
            V[offs[a]:offs[a + 1], offs[b]:offs[b + 1]] = ops.V
            K[offs[a]:offs[a + 1], offs[b]:offs[b + 1]] = ops.K
    return V, K


def _geometry_center(curves, outer=None):
    pts = np.vstack([c.nodes for c in curves] + ([outer.nodes] if outer is not None else []))
    return pts.mean(axis=0)


def _scaled_all(curves, outer=None):
    about = _geometry_center(curves, outer)
    return [c.scaled(_RESCALE, about) for c in curves]


def _scaled_outer(curves, outer):
    return outer.scaled(_RESCALE, _geometry_center(curves, outer))


def _check_disjoint(inner_curves, outer):
    """Reject intersecting inner curves / inner curves escaping the outer."""
    for i, a in enumerate(inner_curves):
        for b in inner_curves[i + 1:]:
            d = a.nodes[:, None, :] - b.nodes[None, :, :]
            if np.min(np.einsum("ijc,ijc->ij", d, d)) == 0.0:
                raise ValueError("inner boundary curves intersect")
    if outer is not None:
        lo_o = outer.nodes.min(axis=0)
        hi_o = outer.nodes.max(axis=0)
        for c in inner_curves:
            if np.any(c.nodes.min(axis=0) <= lo_o) or np.any(c.nodes.max(axis=0) >= hi_o):
                raise ValueError("inner boundary is not strictly inside the outer boundary")
