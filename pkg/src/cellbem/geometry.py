"""Closed-curve parametrizations and multi-domain cell scenes.

Curves are stored as trigonometric (Fourier) interpolants through an even
number of collocation nodes at equispaced parameters t_j = j/M on [0, 1).
Scenes describe the topology of a cell cluster inside a bath: per-domain
boundary curves, shared interface segments, and the signed connectivity
between local (per-domain) and global node numberings.

Units: coordinates in micrometres, conductivities as given (mS/cm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

MEMBRANE = "membrane"
JUNCTION = "junction"


# ---------------------------------------------------------------------------
# trigonometric interpolation
# ---------------------------------------------------------------------------

def _trig_coeffs(values: np.ndarray) -> np.ndarray:
    """rfft coefficients of a real sample vector at t_j = j/M."""
    return np.fft.rfft(np.asarray(values, dtype=float))


def _trig_eval(coeffs: np.ndarray, M: int, t: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Evaluate the balanced trigonometric interpolant (or a derivative).

    The interpolant of real data f_j is
        f(t) = (2/M) Re[ sum_{m=0}^{M/2} c_m F_m exp(2 pi i m t) ],
    with half weights c_0 = c_{M/2} = 1/2 (Nyquist term is a pure cosine for
    real data, which keeps the interpolant real and M-periodic).
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    n = M // 2
    m = np.arange(n + 1)
    fac = coeffs * (1j * TWO_PI * m) ** deriv if deriv else coeffs.copy()
    fac[0] *= 0.5
    fac[-1] *= 0.5
    vals = (2.0 / M) * (np.exp(2j * np.pi * np.outer(t, m)) @ fac).real
    return vals[0] if scalar else vals


def _coeffs_from_general_params(nodes: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Interpolation coefficients for non-equispaced parameters.

    Solves the dense trigonometric Vandermonde system in the real basis
    {1, cos 2 pi m t, sin 2 pi m t (m < M/2), cos pi M t} and converts back
    to the rfft-style complex layout used by :func:`_trig_eval`.
    """
    M = len(params)
    n = M // 2
    cols = [np.ones(M)]
    for m in range(1, n):
        cols.append(np.cos(TWO_PI * m * params))
        cols.append(np.sin(TWO_PI * m * params))
    cols.append(np.cos(TWO_PI * n * params))
    A = np.column_stack(cols)
    sol = np.linalg.solve(A, nodes)
    coeffs = np.zeros((n + 1,) + nodes.shape[1:], dtype=complex)
    coeffs[0] = M * sol[0]
    for m in range(1, n):
        a = sol[2 * m - 1]
        b = sol[2 * m]
        coeffs[m] = 0.5 * M * (a - 1j * b)
    coeffs[n] = M * sol[-1]
    return coeffs


class ParamCurve:
    """Smooth closed curve through collocation nodes.

    gamma: [0, 1) -> R^2 is 1-periodic, interpolates gamma(t_j) = x_j, and is
    oriented counterclockwise (positive enclosed area).  Clockwise input is
    reversed automatically and flagged via ``reversed_input``.
    """

    def __init__(self, nodes, params=None):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must be an (M, 2) array of 2D points")
        M = nodes.shape[0]
        if M < 4:
            raise ValueError(f"need at least 4 nodes, got {M}")
        if M % 2 != 0:
            raise ValueError(f"node count must be even, got {M}")
        diffs = nodes - np.roll(nodes, 1, axis=0)
        if np.any(np.einsum("ij,ij->i", diffs, diffs) == 0.0):
            raise ValueError("duplicate consecutive nodes")

        self.reversed_input = False
        area = _polygon_area(nodes)
        if area == 0.0:
            raise ValueError("degenerate node polygon (zero signed area)")
        if area < 0.0:
            if params is not None:
                raise ValueError("clockwise node order with explicit params; "
                                 "reorder the input counterclockwise")
            nodes = nodes[::-1].copy()
            self.reversed_input = True

        if params is None:
            params = np.arange(M) / M
            self.uniform_params = True
        else:
            params = np.asarray(params, dtype=float)
            if params.shape != (M,):
                raise ValueError("params must match node count")
            if np.any(np.diff(params) <= 0) or params[0] < 0 or params[-1] >= 1:
                raise ValueError("params must be strictly increasing in [0, 1)")
            self.uniform_params = bool(np.allclose(params, params[0] + np.arange(M) / M, atol=1e-12))

        self.M = M
        self.nodes = nodes
        self.t = params
        if self.uniform_params and abs(params[0]) < 1e-15:
            self._cx = _trig_coeffs(nodes[:, 0])
            self._cy = _trig_coeffs(nodes[:, 1])
        else:
            self._cx = _coeffs_from_general_params(nodes[:, 0], params)
            self._cy = _coeffs_from_general_params(nodes[:, 1], params)

        d1 = self.tangent(self.t)
        self.node_speed = np.hypot(d1[:, 0], d1[:, 1])
        if np.any(self.node_speed == 0.0):
            raise ValueError("degenerate parametrization: gamma'(t_j) = 0")
        self.node_normal = np.column_stack((d1[:, 1], -d1[:, 0])) / self.node_speed[:, None]
        d2 = self.second(self.t)
        self.node_curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / self.node_speed**3
        for arr in (self.nodes, self.t, self.node_speed, self.node_normal, self.node_curvature):
            arr.flags.writeable = False

    # -- evaluation ---------------------------------------------------------

    def point(self, t):
        """gamma(t), shape (len(t), 2)."""
        return np.stack((_trig_eval(self._cx, self.M, t),
                         _trig_eval(self._cy, self.M, t)), axis=-1)

    def tangent(self, t):
        """gamma'(t)."""
        return np.stack((_trig_eval(self._cx, self.M, t, deriv=1),
                         _trig_eval(self._cy, self.M, t, deriv=1)), axis=-1)

    def second(self, t):
        """gamma''(t)."""
        return np.stack((_trig_eval(self._cx, self.M, t, deriv=2),
                         _trig_eval(self._cy, self.M, t, deriv=2)), axis=-1)

    def speed(self, t):
        """|gamma'(t)|."""
        d = self.tangent(t)
        return np.hypot(d[..., 0], d[..., 1])

    def normal(self, t):
        """Unit outward normal (tangent rotated by -90 degrees)."""
        d = self.tangent(t)
        sp = np.hypot(d[..., 0], d[..., 1])
        return np.stack((d[..., 1], -d[..., 0]), axis=-1) / sp[..., None]

    # -- utilities ----------------------------------------------------------

    def enclosed_area(self, oversample: int = 10) -> float:
        """Signed polygonal area of the curve sampled at oversample*M points."""
        ts = np.arange(oversample * self.M) / (oversample * self.M)
        pts = self.point(ts)
        return _polygon_area(pts)

    def arclength(self, oversample: int = 20) -> float:
        ts = np.arange(oversample * self.M) / (oversample * self.M)
        return float(np.mean(self.speed(ts)))

    def diameter(self) -> float:
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def scaled(self, factor: float, about=None) -> "ParamCurve":
        """Similarity-scaled copy (used to dodge unit logarithmic capacity)."""
        about = self.nodes.mean(axis=0) if about is None else np.asarray(about, float)
        return ParamCurve(about + factor * (self.nodes - about),
                          None if self.uniform_params else self.t)

    def __repr__(self):
        return f"ParamCurve(M={self.M})"


def _polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def fourier_closed_curve(nodes, params=None) -> ParamCurve:
    """Build the closed Fourier interpolant through ordered 2D nodes.

    Nodes must be counterclockwise (clockwise input is auto-reversed and
    flagged), even in number, with no duplicated consecutive points.
    """
    return ParamCurve(nodes, params)


def circle_nodes(radius: float, M: int, center=(0.0, 0.0), phase: float = 0.0) -> np.ndarray:
    th = phase + TWO_PI * np.arange(M) / M
    return np.column_stack((center[0] + radius * np.cos(th),
                            center[1] + radius * np.sin(th)))


# ---------------------------------------------------------------------------
# piecewise-analytic paths (true geometry used for node placement)
# ---------------------------------------------------------------------------

class _Line:
    def __init__(self, p0, p1):
        self.p0 = np.asarray(p0, float)
        self.p1 = np.asarray(p1, float)
        self.length = float(np.hypot(*(self.p1 - self.p0)))

    def point_at(self, s):
        u = np.asarray(s, float) / self.length
        return self.p0 + np.multiply.outer(u, self.p1 - self.p0)


class _Arc:
    """Circular arc from angle th0 to th1 (traversal sign = sign(th1 - th0))."""

    def __init__(self, center, radius, th0, th1):
        self.center = np.asarray(center, float)
        self.radius = float(radius)
        self.th0 = float(th0)
        self.th1 = float(th1)
        self.length = abs(th1 - th0) * self.radius

    def point_at(self, s):
        th = self.th0 + np.sign(self.th1 - self.th0) * np.asarray(s, float) / self.radius
        return self.center + self.radius * np.stack((np.cos(th), np.sin(th)), axis=-1)


class _SineEdge:
    """Straight chord p0 -> p1 with sinusoidal transverse displacement.

    Displacement a*sin(2 pi k u) along the left normal of the chord, u the
    chord fraction; it vanishes at both endpoints so corners stay put.
    """

    _SAMPLES_PER_PERIOD = 256

    def __init__(self, p0, p1, amplitude, freq):
        self.p0 = np.asarray(p0, float)
        self.p1 = np.asarray(p1, float)
        self.a = float(amplitude)
        self.k = int(freq)
        chord = self.p1 - self.p0
        self.chord_len = float(np.hypot(*chord))
        tang = chord / self.chord_len
        self.nrm = np.array([-tang[1], tang[0]])
        ns = self._SAMPLES_PER_PERIOD * max(1, self.k)
        u = np.linspace(0.0, 1.0, ns + 1)
        pts = self._point_of_u(u)
        seg = np.hypot(*(np.diff(pts, axis=0).T))
        self._cum = np.concatenate(([0.0], np.cumsum(seg)))
        self._u = u
        self.length = float(self._cum[-1])

    def _point_of_u(self, u):
        u = np.asarray(u, float)
        base = self.p0 + np.multiply.outer(u, self.p1 - self.p0)
        return base + np.multiply.outer(self.a * np.sin(TWO_PI * self.k * u), self.nrm)

    def point_at(self, s):
        u = np.interp(np.asarray(s, float), self._cum, self._u)
        return self._point_of_u(u)


def _place_on_path(pieces, n: int) -> np.ndarray:
    """n nodes at midpoint-equispaced arclength along concatenated pieces.

    Midpoint placement keeps piece endpoints (corners, triple points) strictly
    between nodes.
    """
    lengths = np.array([p.length for p in pieces])
    total = lengths.sum()
    cum = np.concatenate(([0.0], np.cumsum(lengths)))
    s = (np.arange(n) + 0.5) * total / n
    out = np.empty((n, 2))
    for i, piece in enumerate(pieces):
        mask = (s >= cum[i]) & (s < cum[i + 1])
        if np.any(mask):
            out[mask] = piece.point_at(s[mask] - cum[i])
    return out


def _even_count(length: float, dx: float, minimum: int = 2) -> int:
    n = max(minimum, int(round(length / dx)))
    return n + (n % 2)


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """One interface piece Gamma_ij, 0 <= j < i, carrying its global nodes.

    ``ds`` is the true arclength carried by each node (segment length over
    node count for the uniform placements used here); it is the node weight
    of boundary quadratures on the true geometry.
    """

    pair: tuple
    kind: str
    points: np.ndarray
    global_idx: np.ndarray
    ds: np.ndarray = None

    def __post_init__(self):
        i, j = self.pair
        if not (0 <= j < i):
            raise ValueError(f"segment pair must satisfy 0 <= j < i, got {self.pair}")
        expected = MEMBRANE if j == 0 else JUNCTION
        if self.kind != expected:
            raise ValueError(f"segment {self.pair} must have kind {expected!r}")
        if self.ds is None:
            # fall back to chord lengths of the closed node polygon
            d = np.hypot(*np.diff(self.points, axis=0).T)
            ds = np.empty(len(self.points))
            ds[1:-1] = 0.5 * (d[:-1] + d[1:])
            ds[0] = d[0]
            ds[-1] = d[-1]
            object.__setattr__(self, "ds", ds)


@dataclass(frozen=True)
class DomainBoundary:
    """A domain-side view of one closed boundary curve.

    ``global_idx[k]`` is the global node behind curve-local node k and
    ``signs[k]`` the corresponding B-matrix entry (+1 when this domain is the
    larger index of the owning pair, else -1).  ``outward`` says whether the
    curve's ccw normal points out of the domain (False for holes, i.e. the
    bath side of a cell boundary or the inner boundary of an annular cell).
    """

    curve: ParamCurve
    global_idx: np.ndarray
    signs: np.ndarray
    outward: bool = True


@dataclass(frozen=True)
class Scene:
    """Multi-domain topology: cells 1..N, extracellular domain 0, optional outer boundary."""

    domains: tuple          # per domain i = 0..N, a tuple of DomainBoundary parts
    outer: ParamCurve | None
    sigma: np.ndarray       # (N+1,) conductivities, sigma[0] extracellular
    segments: tuple
    M: int
    M0: int
    Mg: int

    @property
    def N(self) -> int:
        return len(self.domains) - 1

    @property
    def hull(self):
        return self.domains[0]

    @property
    def cells(self):
        """Single-curve view of the cells (first part of each)."""
        return tuple(parts[0] for parts in self.domains[1:])

    def domain_boundaries(self, i: int):
        """Boundary parts of domain i (one part per closed curve)."""
        return list(self.domains[i])

    def domain_size(self, i: int) -> int:
        return sum(len(b.global_idx) for b in self.domain_boundaries(i))

    def node_coordinates(self) -> np.ndarray:
        out = np.empty((self.M, 2))
        for seg in self.segments:
            out[seg.global_idx] = seg.points
        return out

    def node_owners(self) -> np.ndarray:
        """(M, 2) array of (i, j) owner pairs per global node."""
        out = np.empty((self.M, 2), dtype=int)
        for seg in self.segments:
            out[seg.global_idx] = seg.pair
        return out

    def node_weights(self) -> np.ndarray:
        """True-arclength quadrature weight per global node."""
        out = np.empty(self.M)
        for seg in self.segments:
            out[seg.global_idx] = seg.ds
        return out

    def summary(self) -> str:
        coords = self.node_coordinates()
        lo, hi = coords.min(axis=0), coords.max(axis=0)
        lines = [
            f"domains: {self.N} cells + extracellular bath",
            f"nodes: M={self.M} (membrane M0={self.M0}, junction Mg={self.Mg})",
            f"segments: {len(self.segments)}",
            f"membrane bounding box: [{lo[0]:.3f}, {hi[0]:.3f}] x [{lo[1]:.3f}, {hi[1]:.3f}] um",
            f"sigma (mS/cm): {np.array2string(self.sigma, precision=4)}",
        ]
        if self.outer is not None:
            olo = self.outer.nodes.min(axis=0)
            ohi = self.outer.nodes.max(axis=0)
            lines.append(f"outer boundary: {self.outer.M} nodes, "
                         f"box [{olo[0]:.3f}, {ohi[0]:.3f}] x [{olo[1]:.3f}, {ohi[1]:.3f}] um")
        else:
            lines.append("outer boundary: none (unbounded bath)")
        for i in range(self.N + 1):
            lines.append(f"  M_{i} = {self.domain_size(i)}")
        return "\n".join(lines)

    def nodes_csv(self) -> str:
        coords = self.node_coordinates()
        owners = self.node_owners()
        rows = ["global_index,x_um,y_um,domain_i,domain_j"]
        for l in range(self.M):
            rows.append(f"{l},{coords[l, 0]!r},{coords[l, 1]!r},{owners[l, 0]},{owners[l, 1]}")
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class Connectivity:
    """Sparse A_i / B_i selection matrices as index + sign lists.

    Row k of A_i selects global node ``idx[i][k]``; B_i additionally carries
    ``sign[i][k]``.  A0/Ag select membrane / junction global blocks (global
    numbering puts membrane nodes first).
    """

    idx: tuple
    sign: tuple
    M: int
    M0: int

    def apply_A(self, i, v):
        return np.asarray(v)[..., self.idx[i]]

    def apply_AT(self, i, w):
        out = np.zeros(self.M)
        out[self.idx[i]] = w
        return out

    def apply_B(self, i, v):
        return self.sign[i] * np.asarray(v)[..., self.idx[i]]

    def apply_BT(self, i, w):
        out = np.zeros(self.M)
        out[self.idx[i]] = self.sign[i] * np.asarray(w)
        return out

    def dense_A(self, i):
        m = len(self.idx[i])
        A = np.zeros((m, self.M))
        A[np.arange(m), self.idx[i]] = 1.0
        return A

    def dense_B(self, i):
        m = len(self.idx[i])
        B = np.zeros((m, self.M))
        B[np.arange(m), self.idx[i]] = self.sign[i]
        return B


def connectivity(scene: Scene) -> Connectivity:
    """Assemble the signed connectivity of all domains, checking the topology."""
    idx, sign = [], []
    counts = np.zeros(scene.M, dtype=int)
    for i in range(scene.N + 1):
        parts = scene.domain_boundaries(i)
        gi = np.concatenate([b.global_idx for b in parts])
        sg = np.concatenate([b.signs for b in parts])
        if len(np.unique(gi)) != len(gi):
            raise ValueError(f"domain {i} references a global node twice")
        counts[gi] += 1
        idx.append(gi)
        sign.append(sg)
    if not np.all(counts == 2):
        bad = np.nonzero(counts != 2)[0]
        raise ValueError(f"nodes {bad[:5]} belong to {counts[bad[:5]]} domains (expected 2)")
    conn = Connectivity(idx=tuple(idx), sign=tuple(sign), M=scene.M, M0=scene.M0)
    if not np.array_equal(conn.idx[0], np.arange(scene.M0)) or np.any(conn.sign[0] != -1.0):
        raise AssertionError("global ordering must list membrane nodes in hull order (B0 = -A0)")
    return conn


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_single_cell(inner_radius: float, outer_radius: float, M: int,
                      M_outer: int | None = None, sigma=(20.0, 3.0)) -> Scene:
    """One circular cell of radius ``inner_radius`` in a circular bath."""
    if not (0 < inner_radius < outer_radius):
        raise ValueError("need 0 < inner_radius < outer_radius")
    if M % 2 != 0:
        raise ValueError("M must be even")
    if M_outer is None:
        M_outer = M
    nodes = circle_nodes(inner_radius, M)
    curve = ParamCurve(nodes)
    gidx = np.arange(M)
    seg = Segment(pair=(1, 0), kind=MEMBRANE, points=nodes, global_idx=gidx,
                  ds=np.full(M, TWO_PI * inner_radius / M))
    cell = DomainBoundary(curve=curve, global_idx=gidx, signs=np.ones(M))
    hull = DomainBoundary(curve=curve, global_idx=gidx, signs=-np.ones(M), outward=False)
    outer = ParamCurve(circle_nodes(outer_radius, M_outer))
    return Scene(domains=((hull,), (cell,)), outer=outer,
                 sigma=np.asarray(sigma, float), segments=(seg,),
                 M=M, M0=M, Mg=0)


def build_nested_pair(r_inner: float, r_mid: float, r_outer: float,
                      M_inner: int, M_mid: int, M_outer: int,
                      sigma=(20.0, 3.0, 3.0)) -> Scene:
    """Two nested cells: a disc inside an annular cell inside a circular bath.

    The circle of radius ``r_inner`` is a closed gap junction between the two
    cells; the circle of radius ``r_mid`` is the transmembrane boundary.  All
    boundaries are smooth, which makes this the cleanest multi-cell topology
    with a genuinely active gap junction.
    """
    if not (0 < r_inner < r_mid < r_outer):
        raise ValueError("need 0 < r_inner < r_mid < r_outer")
    if M_inner % 2 or M_mid % 2 or M_outer % 2:
        raise ValueError("all node counts must be even")
    mid = ParamCurve(circle_nodes(r_mid, M_mid))
    inner = ParamCurve(circle_nodes(r_inner, M_inner))
    g_mem = np.arange(M_mid)
    g_jun = np.arange(M_mid, M_mid + M_inner)
    segs = (
        Segment(pair=(1, 0), kind=MEMBRANE, points=mid.nodes, global_idx=g_mem,
                ds=np.full(M_mid, TWO_PI * r_mid / M_mid)),
        Segment(pair=(2, 1), kind=JUNCTION, points=inner.nodes, global_idx=g_jun,
                ds=np.full(M_inner, TWO_PI * r_inner / M_inner)),
    )
    hull = (DomainBoundary(curve=mid, global_idx=g_mem, signs=-np.ones(M_mid),
                           outward=False),)
    cell1 = (DomainBoundary(curve=mid, global_idx=g_mem, signs=np.ones(M_mid)),
             DomainBoundary(curve=inner, global_idx=g_jun, signs=-np.ones(M_inner),
                            outward=False))
    cell2 = (DomainBoundary(curve=inner, global_idx=g_jun, signs=np.ones(M_inner)),)
    outer = ParamCurve(circle_nodes(r_outer, M_outer))
    return Scene(domains=(hull, cell1, cell2), outer=outer,
                 sigma=np.asarray(sigma, float), segments=segs,
                 M=M_mid + M_inner, M0=M_mid, Mg=M_inner)


def split_circle_counts(M: int) -> tuple:
    """(nodes per half-arc, nodes on the junction) for a total of M nodes.

    Arc/junction counts follow the arclength ratio pi/2, adjusted so that the
    per-cell count (m_arc + m_jun) is even, which requires M + m_jun = 0 mod 4.
    """
    if M % 2 != 0 or M < 12:
        raise ValueError("M must be even and >= 12")
    m_jun = max(2, int(round(M / (math.pi + 1.0))))
    while (M + m_jun) % 4 != 0:
        m_jun += 1
    m_arc = (M - m_jun) // 2
    if m_arc < 4:
        raise ValueError(f"M={M} too small to split between arcs and junction")
    return m_arc, m_jun


def build_split_circle(radius: float, outer_radius: float, gap: float, fillet: float,
                       M_per_segment, M_outer: int | None = None,
                       sigma=(20.0, 3.0, 3.0)) -> Scene:
    """Two half-disc cells inside a circular bath.

    gap = 0: the half discs share a vertical gap junction (the diameter).
    gap > 0: the cells are pulled apart horizontally and fully isolated;
    fillet > 0 additionally rounds their four corners with arcs tangent to
    both the straight edge and the outer arc.
    """
    if not (0 < radius < outer_radius):
        raise ValueError("need 0 < radius < outer_radius")
    if gap < 0 or fillet < 0:
        raise ValueError("gap and fillet must be nonnegative")
    if fillet > 0 and gap == 0:
        raise ValueError("fillet requires gap > 0 (isolated cells)")
    if fillet >= radius / 2:
        raise ValueError("fillet too large for the straight edge")
    if isinstance(M_per_segment, tuple):
        m_arc, m_jun = M_per_segment
    else:
        m_arc = m_jun = int(M_per_segment)
    if (m_arc + m_jun) % 2 != 0:
        raise ValueError("per-cell node count m_arc + m_jun must be even")
    if M_outer is None:
        M_outer = 2 * m_arc
    outer = ParamCurve(circle_nodes(outer_radius, M_outer))
    sigma = np.asarray(sigma, float)

    if gap == 0.0:
        return _split_circle_joined(radius, m_arc, m_jun, outer, sigma)
    return _split_circle_isolated(radius, gap, fillet, m_arc + m_jun, outer, sigma)


def _split_circle_joined(R, m_arc, m_jun, outer, sigma):
    # Half-arc nodes at midpoint angles so that the union of both arcs is the
    # full equispaced circle; junction nodes strictly inside the diameter.
    th_left = math.pi / 2 + math.pi * (np.arange(m_arc) + 0.5) / m_arc
    th_right = -math.pi / 2 + math.pi * (np.arange(m_arc) + 0.5) / m_arc
    left_pts = R * np.column_stack((np.cos(th_left), np.sin(th_left)))
    right_pts = R * np.column_stack((np.cos(th_right), np.sin(th_right)))
    jun_y = -R + 2 * R * (np.arange(m_jun) + 0.5) / m_jun
    jun_pts = np.column_stack((np.zeros(m_jun), jun_y))

    M0 = 2 * m_arc
    M = M0 + m_jun
    # Hull (full circle) order: right arc then left arc = increasing angle
    # from -pi/2; membrane globals follow that order.
    g_right = np.arange(m_arc)
    g_left = np.arange(m_arc, 2 * m_arc)
    g_jun = np.arange(M0, M)

    segs = (
        Segment(pair=(1, 0), kind=MEMBRANE, points=left_pts, global_idx=g_left,
                ds=np.full(m_arc, math.pi * R / m_arc)),
        Segment(pair=(2, 0), kind=MEMBRANE, points=right_pts, global_idx=g_right,
                ds=np.full(m_arc, math.pi * R / m_arc)),
        Segment(pair=(2, 1), kind=JUNCTION, points=jun_pts, global_idx=g_jun,
                ds=np.full(m_jun, 2.0 * R / m_jun)),
    )

    hull_curve = ParamCurve(np.vstack((right_pts, left_pts)))
    hull = DomainBoundary(curve=hull_curve, global_idx=np.arange(M0),
                          signs=-np.ones(M0), outward=False)

    # Cell 1 (left half disc), ccw: arc top->bottom then junction upwards.
    c1_nodes = np.vstack((left_pts, jun_pts))
    c1 = DomainBoundary(curve=ParamCurve(c1_nodes),
                        global_idx=np.concatenate((g_left, g_jun)),
                        signs=np.concatenate((np.ones(m_arc), -np.ones(m_jun))))
    # Cell 2 (right half disc), ccw: arc bottom->top then junction downwards.
    c2_nodes = np.vstack((right_pts, jun_pts[::-1]))
    c2 = DomainBoundary(curve=ParamCurve(c2_nodes),
                        global_idx=np.concatenate((g_right, g_jun[::-1])),
                        signs=np.ones(m_arc + m_jun))
    return Scene(domains=((hull,), (c1,), (c2,)), outer=outer, sigma=sigma,
                 segments=segs, M=M, M0=M0, Mg=m_jun)


def _split_circle_isolated(R, gap, fillet, m_cell, outer, sigma):
    if m_cell % 2 != 0:
        raise ValueError("per-cell node count must be even")

    def half_disc(side):
        # The left half disc (flat edge at x = -gap/2, arc opening left) is
        # built explicitly; the right cell is its mirror image.
        cx = -gap / 2.0
        center = np.array([cx, 0.0])
        if fillet == 0.0:
            pieces = [
                _Arc(center, R, math.pi / 2, 3 * math.pi / 2),
                _Line((cx, -R), (cx, R)),
            ]
        else:
            f = fillet
            cy = math.sqrt((R - f) ** 2 - f ** 2)
            # Fillet centers sit a distance f inside the flat edge and R - f
            # from the disc center, making the small arcs tangent to both the
            # straight edge and the big arc.
            c_top = center + np.array([-f, cy])
            c_bot = center + np.array([-f, -cy])
            phi = math.atan2(cy, -f)  # polar angle of the top tangency ray
            pieces = [
                _Arc(center, R, phi, TWO_PI - phi),
                _Arc(c_bot, f, -phi, 0.0),
                _Line((cx, -cy), (cx, cy)),
                _Arc(c_top, f, 0.0, phi),
            ]
        pts = _place_on_path(pieces, m_cell)
        if side > 0:
            pts = pts * np.array([-1.0, 1.0])
            pts = pts[::-1]
        return pts, sum(p.length for p in pieces)

    left_pts, perim = half_disc(-1)
    right_pts, _ = half_disc(+1)
    # Keep right cell ccw after mirroring: mirror flips orientation, the
    # reversal above restores ccw order.
    M = 2 * m_cell
    g_left = np.arange(m_cell)
    g_right = np.arange(m_cell, M)
    ds = np.full(m_cell, perim / m_cell)
    segs = (
        Segment(pair=(1, 0), kind=MEMBRANE, points=left_pts, global_idx=g_left, ds=ds),
        Segment(pair=(2, 0), kind=MEMBRANE, points=right_pts, global_idx=g_right, ds=ds),
    )
    c_left = ParamCurve(left_pts)
    c_right = ParamCurve(right_pts)
    cell1 = DomainBoundary(curve=c_left, global_idx=g_left, signs=np.ones(m_cell))
    cell2 = DomainBoundary(curve=c_right, global_idx=g_right, signs=np.ones(m_cell))
    hull = (
        DomainBoundary(curve=c_left, global_idx=g_left, signs=-np.ones(m_cell),
                       outward=False),
        DomainBoundary(curve=c_right, global_idx=g_right, signs=-np.ones(m_cell),
                       outward=False),
    )
    return Scene(domains=(hull, (cell1,), (cell2,)), outer=outer, sigma=sigma,
                 segments=segs, M=M, M0=M, Mg=0)


def build_cell_array(rows: int, cols: int, c_w: float, c_l: float,
                     bath_w: float, bath_l: float,
                     dx: float, dx_outer: float | None = None,
                     junction_amplitude: float = 0.0, junction_frequency: int = 0,
                     sigma_bath: float = 20.0, sigma_cell: float = 3.0) -> Scene:
    """Array of rows x cols rectangular cells inside a rectangular bath.

    Cell (i, j) has its bottom-left vertex at (i*c_l, j*c_w).  Vertical
    inter-cell edges (perpendicular to the array axis) become sine waves of
    the given amplitude/frequency when junction_amplitude > 0.  ``dx`` is the
    target node spacing on cell boundaries; segment counts are rounded to
    even so every closed curve has an even node count.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if bath_l <= cols * c_l or bath_w <= rows * c_w:
        raise ValueError("bath must strictly contain the cell block")
    if junction_amplitude < 0 or junction_amplitude >= c_l / 2:
        raise ValueError("sinusoid amplitude must lie in [0, c_l/2)")
    if junction_amplitude > 0 and junction_frequency < 1:
        raise ValueError("sinusoid frequency must be >= 1")
    if dx_outer is None:
        dx_outer = 4.0 * dx

    def cell_id(i, j):
        return 1 + j * cols + i

    # --- build one point set per edge segment -----------------------------
    def h_edge_points(x0, y):
        n = _even_count(c_l, dx)
        return _place_on_path([_Line((x0, y), (x0 + c_l, y))], n)

    def v_edge_points(x, y0, wavy):
        if wavy and junction_amplitude > 0.0:
            piece = _SineEdge((x, y0), (x, y0 + c_w), junction_amplitude, junction_frequency)
        else:
            piece = _Line((x, y0), (x, y0 + c_w))
        n = _even_count(piece.length, dx)
        return _place_on_path([piece], n)

    # edge tables keyed by (i, j, side); shared edges stored once
    bottom = {}
    left = {}
    for j in range(rows):
        for i in range(cols):
            bottom[(i, j)] = h_edge_points(i * c_l, j * c_w)
            left[(i, j)] = v_edge_points(i * c_l, j * c_w, wavy=(i > 0))
    top_row = {i: h_edge_points(i * c_l, rows * c_w) for i in range(cols)}
    right_col = {j: v_edge_points(cols * c_l, j * c_w, wavy=False) for j in range(rows)}

    def edge(i, j, side):
        """Canonical point array of a cell edge (+x order for h, +y for v)."""
        if side == "bottom":
            return bottom[(i, j)]
        if side == "top":
            return top_row[i] if j == rows - 1 else bottom[(i, j + 1)]
        if side == "left":
            return left[(i, j)]
        return right_col[j] if i == cols - 1 else left[(i + 1, j)]

    def edge_pair(i, j, side):
        """(owner pair, kind) of a cell edge seen from cell (i, j)."""
        me = cell_id(i, j)
        if side == "bottom":
            other = cell_id(i, j - 1) if j > 0 else 0
        elif side == "top":
            other = cell_id(i, j + 1) if j < rows - 1 else 0
        elif side == "left":
            other = cell_id(i - 1, j) if i > 0 else 0
        else:
            other = cell_id(i + 1, j) if i < cols - 1 else 0
        pair = (max(me, other), min(me, other))
        return pair, (MEMBRANE if other == 0 else JUNCTION)

    # --- hull traversal (block perimeter, ccw) -----------------------------
    hull_edges = []
    for i in range(cols):
        hull_edges.append(((i, 0, "bottom"), False))
    for j in range(rows):
        hull_edges.append(((cols - 1, j, "right"), False))
    for i in range(cols - 1, -1, -1):
        hull_edges.append(((i, rows - 1, "top"), True))
    for j in range(rows - 1, -1, -1):
        hull_edges.append(((0, j, "left"), True))

    # --- assign global indices: membrane (in hull traversal order) first,
    # then junctions; canonical segment index lists undo edge reversals.
    global_of = {}
    next_g = 0
    hull_gidx = []
    hull_pts = []
    for (i, j, side), rev in hull_edges:
        pts = edge(i, j, side)
        n = len(pts)
        g_trav = np.arange(next_g, next_g + n)
        next_g += n
        global_of[(i, j, side)] = g_trav[::-1] if rev else g_trav
        hull_gidx.append(g_trav)
        hull_pts.append(pts[::-1] if rev else pts)
    M0 = next_g

    segments = []
    for (i, j, side), _ in hull_edges:
        pair, kind = edge_pair(i, j, side)
        segments.append(Segment(pair=pair, kind=kind,
                                points=edge(i, j, side), global_idx=global_of[(i, j, side)]))

    # junction segments: owned edges are each cell's left edge (i > 0) and
    # bottom edge (j > 0); all other edges alias these.
    for j in range(rows):
        for i in range(cols):
            for side in ("left", "bottom"):
                if (side == "left" and i > 0) or (side == "bottom" and j > 0):
                    pts = edge(i, j, side)
                    g = np.arange(next_g, next_g + len(pts))
                    global_of[(i, j, side)] = g
                    next_g += len(pts)
                    pair, kind = edge_pair(i, j, side)
                    segments.append(Segment(pair=pair, kind=kind, points=pts, global_idx=g))
    M = next_g
    Mg = M - M0

    def lookup(i, j, side):
        if (i, j, side) in global_of:
            return global_of[(i, j, side)]
        if side == "top":
            return global_of[(i, j + 1, "bottom")]
        if side == "right":
            return global_of[(i + 1, j, "left")]
        raise KeyError((i, j, side))

    # --- per-cell boundaries (ccw: bottom, right, top reversed, left reversed)
    cells = []
    for j in range(rows):
        for i in range(cols):
            me = cell_id(i, j)
            pts_list, gidx_list, sign_list = [], [], []
            for side, rev in (("bottom", False), ("right", False),
                              ("top", True), ("left", True)):
                pts = edge(i, j, side)
                g = lookup(i, j, side)
                pair, _ = edge_pair(i, j, side)
                s = 1.0 if pair[0] == me else -1.0
                if rev:
                    pts, g = pts[::-1], g[::-1]
                pts_list.append(pts)
                gidx_list.append(g)
                sign_list.append(np.full(len(g), s))
            cells.append((DomainBoundary(curve=ParamCurve(np.vstack(pts_list)),
                                         global_idx=np.concatenate(gidx_list),
                                         signs=np.concatenate(sign_list)),))

    hull_curve = ParamCurve(np.vstack(hull_pts))
    hull = DomainBoundary(curve=hull_curve, global_idx=np.concatenate(hull_gidx),
                          signs=-np.ones(M0), outward=False)

    # --- outer rectangle ----------------------------------------------------
    x0 = cols * c_l / 2 - bath_l / 2
    y0 = rows * c_w / 2 - bath_w / 2
    corners = [(x0, y0), (x0 + bath_l, y0), (x0 + bath_l, y0 + bath_w), (x0, y0 + bath_w)]
    out_pts = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        line = _Line(a, b)
        out_pts.append(_place_on_path([line], _even_count(line.length, dx_outer)))
    outer = ParamCurve(np.vstack(out_pts))

    sigma = np.concatenate(([sigma_bath], np.full(rows * cols, sigma_cell)))
    return Scene(domains=tuple([(hull,)] + cells), outer=outer, sigma=sigma,
                 segments=tuple(segments), M=M, M0=M0, Mg=Mg)
