import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cellbem import bem
from cellbem import geometry as geo
from conftest import blob_nodes, kite_nodes

INV_2PI = 1.0 / (2.0 * np.pi)


class TestGreens:
    def test_unit_distance_is_zero(self):
        assert bem.greens((0.0, 0.0), (1.0, 0.0)) == 0.0

    def test_distance_e(self):
        # ln e = 1
        assert abs(bem.greens((0.0, 0.0), (np.e, 0.0)) - (-INV_2PI)) < 1e-15

    def test_symmetry(self):
        assert bem.greens((0, 0), (3, 4)) == bem.greens((3, 4), (0, 0))

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            bem.greens((1.0, 2.0), (1.0, 2.0))

    @given(st.floats(0.1, 10), st.floats(0, 2 * np.pi))
    @settings(max_examples=30, deadline=None)
    def test_radial_symmetry(self, r, th):
        x = (r * np.cos(th), r * np.sin(th))
        assert abs(bem.greens(x, (0, 0)) - (-INV_2PI * np.log(r))) < 1e-12


class TestGreensNormal:
    def test_direct_value(self):
        assert abs(bem.greens_normal((2, 0), (1, 0), (1, 0)) - INV_2PI) < 1e-15

    def test_orthogonal_normal_vanishes(self):
        assert abs(bem.greens_normal((2, 0), (1, 0), (0, 1))) < 1e-15

    def test_inverse_distance_decay(self):
        # fixed angle, doubling distance quarters <x-y, n>/r^2
        n = (1.0, 0.0)
        v1 = bem.greens_normal((1.0, 0.0), (0.0, 0.0), n)
        v2 = bem.greens_normal((2.0, 0.0), (0.0, 0.0), n)
        assert abs(v1 / v2 - 2.0) < 1e-12

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            bem.greens_normal((1.0, 0.0), (1.0, 0.0), (1.0, 0.0))


SMOOTH_CURVES = {
    "circle": lambda M: geo.circle_nodes(2.0, M),
    "ellipse": lambda M: np.column_stack(
        (2 * np.cos(2 * np.pi * np.arange(M) / M),
         np.sin(2 * np.pi * np.arange(M) / M))),
    "blob": blob_nodes,
}


class TestLayerOperators:
    @pytest.mark.parametrize("name", SMOOTH_CURVES)
    def test_gauss_identity(self, name):
        c = geo.ParamCurve(SMOOTH_CURVES[name](64))
        ops = bem.assemble_layers(c)
        e = np.ones(c.M)
        assert np.abs(ops.K @ e + 0.5 * e).max() < 1e-10

    def test_gauss_identity_small_M(self):
        c = geo.ParamCurve(SMOOTH_CURVES["circle"](32))
        ops = bem.assemble_layers(c)
        assert np.abs(ops.K @ np.ones(32) + 0.5).max() < 1e-10

    def test_single_layer_constant_on_circle(self):
        # potential of the unit density on a circle of radius R is -R ln R
        for R, expect in ((1.0, 0.0), (2.0, -2.0 * np.log(2.0))):
            c = geo.ParamCurve(geo.circle_nodes(R, 64))
            ops = bem.assemble_layers(c)
            assert np.abs(ops.V @ np.ones(64) - expect).max() < 1e-12

    def test_single_layer_circle_spectrum(self):
        # V cos(n t) = R/(2 n) cos(n t) on a circle of radius R
        R, M = 2.0, 64
        c = geo.ParamCurve(geo.circle_nodes(R, M))
        ops = bem.assemble_layers(c)
        th = 2 * np.pi * np.arange(M) / M
        for n in range(1, 9):
            err = np.abs(ops.V @ np.cos(n * th) - R / (2 * n) * np.cos(n * th)).max()
            assert err < 1e-10, (n, err)

    def test_double_layer_jump_relations(self):
        # unit circle, M = 64: targets at distance >= 0.5 from the curve
        c = geo.ParamCurve(geo.circle_nodes(1.0, 64))
        e = np.ones(64)
        inside = np.array([[0.25, 0.3], [-0.5, 0.0], [0.0, 0.0]])
        outside = np.array([[1.5, 0.0], [0.0, -2.5], [4.0, 4.0]])
        assert np.abs(bem.double_layer_potential(c, e, inside) + 1.0).max() < 1e-8
        assert np.abs(bem.double_layer_potential(c, e, outside)).max() < 1e-8

    def test_spectral_self_convergence(self):
        # doubling M gains >10x accuracy against a 4M-node reference
        def apply_V(M):
            c = geo.ParamCurve(kite_nodes(M))
            ops = bem.assemble_layers(c)
            t = np.arange(M) / M
            dens = np.exp(np.cos(2 * np.pi * t))
            # compare the potential at fixed off-curve points
            pts = np.array([[0.4, 0.1], [-0.5, -0.6]])
            return bem.single_layer_potential(c, dens, pts)

        ref = apply_V(256)
        errs = [np.abs(apply_V(M) - ref).max() for M in (16, 32, 64)]
        for a, b in zip(errs, errs[1:]):
            if a > 1e-12:
                assert b < a / 10.0

    def test_on_curve_target_rejected(self):
        c = geo.ParamCurve(geo.circle_nodes(2.0, 32))
        t_mid = (c.t[0] + c.t[1]) / 2
        target = c.point(np.array([t_mid]))
        with pytest.raises(ValueError, match="on .*the source curve"):
            bem.assemble_layers(c, target)

    def test_finite_entries(self):
        c = geo.ParamCurve(kite_nodes(48))
        ops = bem.assemble_layers(c)
        assert np.all(np.isfinite(ops.V)) and np.all(np.isfinite(ops.K))

    def test_nonuniform_params_rejected(self):
        th = np.sort(np.random.default_rng(0).uniform(0, 1, 16))
        th -= th[0]
        c = geo.ParamCurve(geo.circle_nodes(1.0, 16), params=th)
        with pytest.raises(ValueError, match="equispaced"):
            bem.assemble_layers(c)


class TestLogWeights:
    def test_rows_integrate_kernel_exactly_on_modes(self):
        # int_0^1 ln(4 sin^2(pi(t_k - t))) cos(2 pi m t) dt = -cos(2 pi m t_k)/m
        M = 32
        W = bem.log_quadrature_weights(M)
        t = np.arange(M) / M
        for m in (1, 3, 7):
            got = W @ np.cos(2 * np.pi * m * t)
            assert np.abs(got + np.cos(2 * np.pi * m * t) / m).max() < 1e-12
        assert np.abs(W @ np.ones(M)).max() < 1e-12   # zero-mean kernel


class TestQuadratureOracle:
    """Entrywise adaptive-quadrature assembly as an independent check."""

    def test_dtn_action_matches_bruteforce(self):
        M, R = 32, 2.0
        c = geo.ParamCurve(geo.circle_nodes(R, M))
        t = np.arange(M) / M
        n = M // 2

        def lagrange(j, tt):
            d = tt - t[j]
            num = np.sin(np.pi * M * d)
            den = np.tan(np.pi * d)
            out = np.where(np.abs(np.sin(np.pi * d)) < 1e-14, 1.0,
                           num / np.where(den == 0, 1, den) / M)
            return out

        # circulant: one row of V and K suffices on the circle
        xk = c.nodes[0]
        speed = 2 * np.pi * R

        def v_entry(j):
            f = lambda tt: (-INV_2PI) * np.log(
                np.hypot(*(xk - c.point(np.array([tt]))[0]))) * lagrange(j, tt) * speed
            val, _ = quad(f, 0.0, 1.0, points=[t[0], t[j]], limit=200)
            return val

        def k_entry(j):
            def f(tt):
                y = c.point(np.array([tt]))[0]
                ny = c.normal(np.array([tt]))[0]
                d = xk - y
                return INV_2PI * (d @ ny) / (d @ d) * lagrange(j, tt) * speed
            if j == 0:
                # kernel is the constant -1/(4 pi R) on a circle; times the
                # speed 2 pi R and int L_0 = 1/M this is -1/(2M)
                return -0.5 / M
            val, _ = quad(f, 0.0, 1.0, points=[t[j]], limit=200)
            return val

        row_v = np.array([v_entry(j) for j in range(M)])
        row_k = np.array([k_entry(j) for j in range(M)])
        idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
        V_o = row_v[idx]
        K_o = row_k[idx]
        P_o = np.linalg.solve(V_o, K_o + 0.5 * np.eye(M))

        from cellbem import steklov as stk
        P = stk.interior_dtn(c)
        th = 2 * np.pi * t
        data = np.cos(th) + 0.3 * np.cos(3 * th)
        assert np.abs(P.apply(data) - P_o @ data).max() < 1e-8

    def test_csv_export(self):
        c = geo.ParamCurve(geo.circle_nodes(1.0, 8))
        ops = bem.assemble_layers(c)
        lines = ops.to_csv("V").strip().split("\n")
        assert lines[0] == "row,col,value" and len(lines) == 65
