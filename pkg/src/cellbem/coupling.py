"""Lagrange-multiplier coupling of the per-domain DtN maps.

The transmission problem on all interfaces is reduced to saddle systems in
the interface current density lambda and per-cell gauge constants beta:

* single cell: [[F, e], [e^T, 0]] with F = -(s1^-1 (P1+)^-1 + s0^-1 (P0+)^-1);
* general:     F = -sum_i sigma_i^-1 B_i^T (P_i+)^-1 B_i, G_i = B_i^T e_i,
               solved either in full (lambda on all interfaces, given the full
               jump vector V) or reduced to the membrane unknowns
               (lambda_0, lambda_g, beta) with the gap-junction law
               kappa * V_g = lambda_g eliminated into the (2,2) block.

``psi`` evaluates the membrane map V_m -> lambda_0 from the cached
factorization; it is the right-hand side of the membrane ODE and the only
piece the time integrator touches.
"""

from __future__ import annotations

import numpy as np

from .geometry import Scene, connectivity
from .steklov import (_Factorized, exterior_dtn, interior_dtn,
                      multi_boundary_dtn, regularize)


def build_steklov_maps(scene: Scene, alpha: float | None = None) -> list:
    """Regularized DtN operators for every domain of a scene.

    Domain 0 couples all hull curves with the outer boundary; cells are
    interior maps on their own curve (multi-boundary if the cell has holes).
    """
    ops = [regularize(exterior_dtn([b.curve for b in scene.hull], scene.outer), alpha)]
    for i in range(1, scene.N + 1):
        parts = scene.domain_boundaries(i)
        if len(parts) == 1 and parts[0].outward:
            op = interior_dtn(parts[0].curve, i)
        else:
            op = multi_boundary_dtn([p.curve for p in parts],
                                    [p.outward for p in parts], i)
        ops.append(regularize(op, alpha))
    return ops


class UnicellSystem:
    """Saddle system of the single-cell reduction (one cell, one gauge)."""

    def __init__(self, scene: Scene, ops):
        if scene.N != 1:
            raise ValueError("unicell system requires exactly one cell")
        op0, op1 = ops[0], ops[1]
        M = scene.M
        if op0.M != M or op1.M != M:
            raise ValueError("operator sizes do not match the scene")
        if op0.alpha is None or op1.alpha is None:
            raise ValueError("both DtN operators must be regularized")
        s0, s1 = scene.sigma[0], scene.sigma[1]
        self.M = M
        self.F = -(op1.inverse_plus() / s1 + op0.inverse_plus() / s0)
        self.G = np.ones(M)
        S = np.zeros((M + 1, M + 1))
        S[:M, :M] = self.F
        S[:M, M] = self.G
        S[M, :M] = self.G
        self.matrix = S
        self._fac = _Factorized(S)
        self._ops = (op0, op1)
        self._sigma = (s0, s1)

    def solve(self, V_m):
        """(lambda, beta_1) for membrane jump data V_m."""
        V_m = np.asarray(V_m, float)
        if V_m.shape != (self.M,):
            raise ValueError(f"V_m must have length {self.M}")
        sol = self._fac.solve(np.concatenate((V_m, [0.0])))
        return sol[:self.M], sol[self.M]

    def potentials(self, V_m):
        """(u0, u1, beta_1) recovered from the multiplier; u0 is mean-free."""
        lam, beta1 = self.solve(V_m)
        u0 = self._ops[0].solve_plus(lam) / self._sigma[0]
        u1 = -self._ops[1].solve_plus(lam) / self._sigma[1] + beta1
        return u0, u1, beta1


class CoupledSystem:
    """Factorized reduction of the multi-cell transmission problem.

    Holds both the full interface system (size M + N, in the complete jump
    vector V) and the membrane-reduced system (size M0 + Mg + N) whose solve
    defines psi(V_m) = lambda_0.  The matrices are time independent: factor
    once, back-substitute per evaluation.
    """

    def __init__(self, scene: Scene, ops, kappa: float):
        if kappa <= 0:
            raise ValueError("gap-junction permeability kappa must be positive")
        if len(ops) != scene.N + 1:
            raise ValueError("need one DtN operator per domain")
        conn = connectivity(scene)
        for i, op in enumerate(ops):
            if op.alpha is None:
                raise ValueError(f"operator {i} is not regularized")
            if op.M != len(conn.idx[i]):
                raise ValueError(f"operator {i} size {op.M} does not match domain "
                                 f"size {len(conn.idx[i])}")

        self.scene = scene
        self.conn = conn
        self.kappa = float(kappa)
        self.ops = list(ops)
        M, M0, Mg, N = scene.M, scene.M0, scene.Mg, scene.N
        self.M, self.M0, self.Mg, self.N = M, M0, Mg, N

        F = np.zeros((M, M))
        for i, op in enumerate(ops):
            gi = conn.idx[i]
            si = conn.sign[i]
            W = op.inverse_plus()
            F[np.ix_(gi, gi)] -= (np.outer(si, si) * W) / scene.sigma[i]
        G = np.zeros((M, N))
        for i in range(1, N + 1):
            G[conn.idx[i], i - 1] = conn.sign[i]
        self.F, self.G = F, G

        # membrane-reduced system in (lambda_0, lambda_g, beta)
        n = M0 + Mg + N
        S = np.zeros((n, n))
        S[:M0, :M0] = F[:M0, :M0]
        S[:M0, M0:M] = F[:M0, M0:]
        S[M0:M, :M0] = F[M0:, :M0]
        S[M0:M, M0:M] = F[M0:, M0:] - np.eye(Mg) / self.kappa
        S[:M0, M:] = G[:M0, :]
        S[M0:M, M:] = G[M0:, :]
        S[M:, :M0] = G[:M0, :].T
        S[M:, M0:M] = G[M0:, :].T
        self.reduced_matrix = S
        self._fac_reduced = _Factorized(S)
        self._fac_full = None

    # -- membrane map --------------------------------------------------------

    def solve_reduced(self, V_m):
        """(lambda_0, lambda_g, beta) for membrane voltage V_m."""
        V_m = np.asarray(V_m, float)
        if V_m.shape != (self.M0,):
            raise ValueError(f"V_m must have length {self.M0}")
        if not np.all(np.isfinite(V_m)):
            raise ValueError("V_m contains non-finite entries")
        rhs = np.zeros(self.M0 + self.Mg + self.N)
        rhs[:self.M0] = V_m
        sol = self._fac_reduced.solve(rhs)
        return sol[:self.M0], sol[self.M0:self.M0 + self.Mg], sol[self.M0 + self.Mg:]

    def psi(self, V_m):
        """Membrane current density lambda_0 driven by membrane voltage V_m."""
        return self.solve_reduced(V_m)[0]

    # -- full interface system -----------------------------------------------

    def solve_full(self, V):
        """(lambda, beta) for a full jump vector V on all interfaces."""
        V = np.asarray(V, float)
        if V.shape != (self.M,):
            raise ValueError(f"V must have length {self.M}")
        if self._fac_full is None:
            n = self.M + self.N
            S = np.zeros((n, n))
            S[:self.M, :self.M] = self.F
            S[:self.M, self.M:] = self.G
            S[self.M:, :self.M] = self.G.T
            self._fac_full = _Factorized(S)
        sol = self._fac_full.solve(np.concatenate((V, np.zeros(self.N))))
        return sol[:self.M], sol[self.M:]

    def flux_maps(self, lam):
        """psi_i(V) = -B_i lambda for every domain, from a full multiplier."""
        return [-self.conn.apply_B(i, lam) for i in range(self.N + 1)]

    def potentials_from_lambda(self, lam, beta):
        """u_i = -sigma_i^-1 (P_i+)^-1 B_i lambda + beta_i e_i (beta_0 = 0)."""
        beta_full = np.concatenate(([0.0], np.asarray(beta, float)))
        out = []
        for i, op in enumerate(self.ops):
            bi = self.conn.apply_B(i, lam)
            out.append(-op.solve_plus(bi) / self.scene.sigma[i] + beta_full[i])
        return out


def build_unicell(scene: Scene, ops) -> UnicellSystem:
    return UnicellSystem(scene, ops)


def build_coupled(scene: Scene, ops, kappa: float) -> CoupledSystem:
    return CoupledSystem(scene, ops, kappa)


def psi(system: CoupledSystem, V_m) -> np.ndarray:
    return system.psi(V_m)


def recover_all_potentials(system: CoupledSystem, V_m):
    """All domain potentials and gauge constants behind psi(V_m).

    The full multiplier is reconstructed from the reduced solution via
    lambda = A0^T lambda_0 + Ag^T lambda_g and V_g = lambda_g / kappa.
    Returns (list of u_i for i = 0..N, beta).
    """
    lam0, lamg, beta = system.solve_reduced(V_m)
    lam = np.concatenate((lam0, lamg))
    return system.potentials_from_lambda(lam, beta), beta


def monolithic_reference(scene: Scene, ops, kappa: float, V_m) -> np.ndarray:
    """Least-norm solve of the undressed discrete transmission system.

    Unknowns are all local traces u_i and the gap jumps V_g; equations are
    the flux balance, the jump conditions against V = A0^T V_m + Ag^T V_g,
    and the gap-junction law.  Returns lambda_0 = sigma_0 P_0 u_0, serving as
    an independent oracle for psi.  Dense and unfactorized on purpose.
    """
    conn = connectivity(scene)
    M, M0, Mg, N = scene.M, scene.M0, scene.Mg, scene.N
    sizes = [len(conn.idx[i]) for i in range(N + 1)]
    offs = np.concatenate(([0], np.cumsum(sizes)))
    nu = offs[-1]
    n_unk = nu + Mg
    rows = []
    rhs = []

    A_list = [conn.dense_A(i) for i in range(N + 1)]
    B_list = [conn.dense_B(i) for i in range(N + 1)]
    P_list = [op.P for op in ops]

    # flux balance: sum_i sigma_i A_i^T P_i u_i = 0
    blk = np.zeros((M, n_unk))
    for i in range(N + 1):
        blk[:, offs[i]:offs[i + 1]] = scene.sigma[i] * A_list[i].T @ P_list[i]
    rows.append(blk)
    rhs.append(np.zeros(M))

    # jump conditions: sum_i B_i^T u_i - Ag^T V_g = A0^T V_m
    blk = np.zeros((M, n_unk))
    for i in range(N + 1):
        blk[:, offs[i]:offs[i + 1]] = B_list[i].T
    blk[M0:, nu:] = -np.eye(Mg)
    rows.append(blk)
    rhs.append(np.concatenate((np.asarray(V_m, float), np.zeros(Mg))))

    # gap-junction law: sum_{i>=1} sigma_i Ag B_i^T P_i u_i + 2 kappa V_g = 0
    if Mg:
        blk = np.zeros((Mg, n_unk))
        for i in range(1, N + 1):
            blk[:, offs[i]:offs[i + 1]] = scene.sigma[i] * (B_list[i].T @ P_list[i])[M0:, :]
        blk[:, nu:] = 2.0 * kappa * np.eye(Mg)
        rows.append(blk)
        rhs.append(np.zeros(Mg))

    sol, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    u0 = sol[offs[0]:offs[1]]
    return scene.sigma[0] * (P_list[0] @ u0)
