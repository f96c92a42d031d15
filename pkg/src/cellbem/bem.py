"""Laplace layer potentials on closed curves, Nystrom collocation style.

Single- and double-layer matrices act on nodal values (the trigonometric
Lagrange basis is cardinal at the equispaced parameters, so quadrature rules
are applied to nodal data directly, never forming the basis).  The
logarithmic singularity of the single layer on its own curve is handled by
the classical periodic splitting

    G(x_k, gamma(t)) = -(1/4 pi) ln(4 sin^2(pi (t_k - t))) + smooth,

where the log factor is integrated exactly against trigonometric polynomials
by precomputed weights and the smooth remainder by the periodic trapezoidal
rule.  The double-layer kernel is smooth on smooth curves with diagonal
limit -curvature * speed / (4 pi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ParamCurve

_INV_2PI = 1.0 / (2.0 * np.pi)
_INV_4PI = 1.0 / (4.0 * np.pi)


def greens(x, y) -> float:
    """Laplace fundamental solution G(x, y) = -(1/2 pi) ln |x - y|."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    r = np.hypot(*(x - y).T) if x.ndim > 1 else float(np.hypot(*(x - y)))
    if np.any(np.asarray(r) == 0.0):
        raise ValueError("greens(x, y) is undefined at x == y")
    return -_INV_2PI * np.log(r)


def greens_normal(x, y, n_y) -> float:
    """Normal derivative of G in its second argument along the unit n_y.

    grad_y G(x, y) . n_y = (1/2 pi) <x - y, n_y> / |x - y|^2.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n_y = np.asarray(n_y, float)
    d = x - y
    r2 = np.sum(d * d, axis=-1)
    if np.any(np.asarray(r2) == 0.0):
        raise ValueError("greens_normal(x, y, n_y) is undefined at x == y")
    return _INV_2PI * np.sum(d * n_y, axis=-1) / r2


def log_quadrature_weights(M: int) -> np.ndarray:
    """Weights W with (W f)_k ~= int_0^1 ln(4 sin^2(pi (t_k - t))) f(t) dt.

    Exact when f is a trigonometric polynomial of degree <= M/2 sampled at
    t_j = j/M.  Built from the Fourier series of the kernel,
    ln(4 sin^2(pi t)) = -2 sum_{m>=1} cos(2 pi m t)/m, truncated consistently
    with the cardinal interpolant (Nyquist term carries half weight).
    """
    if M % 2 != 0:
        raise ValueError("M must be even")
    n = M // 2
    d = np.arange(M)
    m = np.arange(1, n)
    row = -(2.0 / M) * (np.cos(2.0 * np.pi * np.outer(d, m) / M) / m).sum(axis=1)
    row -= ((-1.0) ** d) / (M * n)
    return row[(d[:, None] - d[None, :]) % M]


@dataclass(frozen=True)
class LayerOperators:
    """Dense single/double layer matrices mapping nodal densities to targets."""

    V: np.ndarray
    K: np.ndarray
    self_interaction: bool

    def __post_init__(self):
        if not (np.all(np.isfinite(self.V)) and np.all(np.isfinite(self.K))):
            raise FloatingPointError("layer operator assembly produced non-finite entries")

    def to_csv(self, which: str = "V") -> str:
        A = self.V if which == "V" else self.K
        rows = ["row,col,value"]
        for k in range(A.shape[0]):
            for j in range(A.shape[1]):
                rows.append(f"{k},{j},{A[k, j]!r}")
        return "\n".join(rows) + "\n"


def assemble_layers(source: ParamCurve, targets: np.ndarray | None = None) -> LayerOperators:
    """Collocation matrices of the single and double layer on ``source``.

    ``targets=None`` (or the source nodes themselves) selects the singular
    self-interaction rules; any other target set must stay off the curve.
    """
    if not source.uniform_params:
        raise ValueError("layer assembly requires equispaced curve parameters")
    if targets is None or targets is source.nodes:
        return _assemble_self(source)
    targets = np.asarray(targets, float)
    if targets.ndim != 2 or targets.shape[1] != 2:
        raise ValueError("targets must be an (n, 2) array")
    if targets.shape == source.nodes.shape and np.array_equal(targets, source.nodes):
        return _assemble_self(source)
    return _assemble_cross(source, targets)


def _assemble_self(curve: ParamCurve) -> LayerOperators:
    M = curve.M
    x = curve.nodes
    sp = curve.node_speed
    d = x[:, None, :] - x[None, :, :]
    r2 = np.einsum("kjc,kjc->kj", d, d)

    dt = (np.arange(M)[:, None] - np.arange(M)[None, :]) / M
    sin2 = 4.0 * np.sin(np.pi * dt) ** 2
    np.fill_diagonal(r2, 1.0)
    np.fill_diagonal(sin2, 1.0)

    smooth = -_INV_4PI * np.log(r2 / sin2)
    np.fill_diagonal(smooth, -_INV_4PI * np.log(sp**2 / (2.0 * np.pi) ** 2))
    V = (-_INV_4PI * log_quadrature_weights(M) + smooth / M) * sp[None, :]

    nrm = curve.node_normal
    Kk = _INV_2PI * np.einsum("kjc,jc->kj", d, nrm) / r2
    np.fill_diagonal(Kk, -curve.node_curvature / (4.0 * np.pi))
    K = (sp[None, :] / M) * Kk
    return LayerOperators(V=V, K=K, self_interaction=True)


def _assemble_cross(curve: ParamCurve, targets: np.ndarray) -> LayerOperators:
    d = targets[:, None, :] - curve.nodes[None, :, :]
    r2 = np.einsum("kjc,kjc->kj", d, d)
    tol = 1e-6 * curve.diameter()
    if np.any(r2 < tol * tol) or _min_curve_distance(curve, targets) < tol:
        raise ValueError("target point lies on (or too close to) the source curve; "
                         "use self-interaction assembly for on-curve targets")
    sp = curve.node_speed
    V = (sp[None, :] / curve.M) * (-_INV_2PI) * 0.5 * np.log(r2)
    K = (sp[None, :] / curve.M) * _INV_2PI * np.einsum("kjc,jc->kj", d, curve.node_normal) / r2
    return LayerOperators(V=V, K=K, self_interaction=False)


def _min_curve_distance(curve: ParamCurve, targets: np.ndarray, oversample: int = 8) -> float:
    """Min distance between targets and a dense sampling of the curve."""
    pts = curve.point(np.arange(oversample * curve.M) / (oversample * curve.M))
    best = np.inf
    for k in range(0, len(targets), 256):   # block to bound memory
        blk = targets[k:k + 256]
        d = blk[:, None, :] - pts[None, :, :]
        best = min(best, float(np.sqrt(np.einsum("kjc,kjc->kj", d, d).min())))
    return best


def double_layer_potential(curve: ParamCurve, density: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the double-layer potential of a nodal density off the curve."""
    ops = assemble_layers(curve, np.asarray(points, float))
    return ops.K @ np.asarray(density, float)


def single_layer_potential(curve: ParamCurve, density: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the single-layer potential of a nodal density off the curve."""
    ops = assemble_layers(curve, np.asarray(points, float))
    return ops.V @ np.asarray(density, float)
