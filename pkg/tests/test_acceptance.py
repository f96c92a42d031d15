"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; tolerances are asserted exactly as stated, never loosened to the
measured values.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from cellbem import coupling as cpl
from cellbem import geometry as geo
from cellbem import harness as H
from cellbem import integrator as itg
from cellbem import ionic
from cellbem import steklov as stk
from conftest import blob_nodes

KAPPA_EFF = H.KAPPA * H.CM_PER_UM


def _line(num, ok, detail):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


# --------------------------------------------------------------------------
# 1. exponential convergence on the smooth single cell
# --------------------------------------------------------------------------

def test_criterion_1_exponential_single_cell():
    t0 = time.perf_counter()
    rows = H.run_convergence("a", [8, 16, 32, 64])
    runtime = time.perf_counter() - t0
    e1 = {r.M: r.e1 for r in rows}
    ratios_ok = all(e1[2 * M] / e1[M] < 0.1
                    for M in (8, 16, 32) if e1[2 * M] > 1e-12)
    ok = e1[64] < 1e-8 and ratios_ok and runtime < 10.0
    _line(1, ok, f"e1(64) = {e1[64]:.2e}, halving ratios < 0.1 above 1e-12: "
                 f"{ratios_ok}, runtime {runtime:.1f} s")
    assert e1[64] < 1e-8
    assert ratios_ok
    assert runtime < 10.0


# --------------------------------------------------------------------------
# 2. algebraic rates on the split circle
# --------------------------------------------------------------------------

def test_criterion_2_split_circle_rates():
    t0 = time.perf_counter()
    Ms = [64, 128, 256, 512, 1024]
    rows = H.run_convergence("b", Ms)
    runtime = time.perf_counter() - t0
    s0 = H.fitted_slope(Ms, [r.e0 for r in rows])
    s1 = H.fitted_slope(Ms, [r.e1 for r in rows])
    ok0 = abs(s0 + 1.5) <= 0.3
    ok1 = abs(s1 + 0.5) <= 0.3
    ok = ok0 and ok1 and runtime < 120.0
    _line(2, ok, f"slope e0 = {s0:.3f} (target -1.5 +- 0.3), "
                 f"slope e1 = {s1:.3f} (target -0.5 +- 0.3), runtime {runtime:.0f} s")
    assert runtime < 120.0
    assert ok1, f"e1 slope {s1:.3f} outside -0.5 +- 0.3"
    assert ok0, f"e0 slope {s0:.3f} outside -1.5 +- 0.3"


# --------------------------------------------------------------------------
# 3. corner smoothing restores accuracy
# --------------------------------------------------------------------------

def test_criterion_3_fillets_beat_sharp_corners():
    Ms = [128, 256, 512]
    rows_c = H.run_convergence("c", Ms)
    rows_d = H.run_convergence("d", Ms)
    pointwise = all(rd.e0 < rc.e0 for rc, rd in zip(rows_c, rows_d))
    sc = H.fitted_slope(Ms, [r.e0 for r in rows_c])
    sd = H.fitted_slope(Ms, [r.e0 for r in rows_d])
    steeper = (sc - sd) >= 0.3
    ok = pointwise and steeper
    _line(3, ok, f"e0(d) < e0(c) at all M: {pointwise}; slopes c = {sc:.2f}, "
                 f"d = {sd:.2f} (gap {sc - sd:.2f} >= 0.3)")
    assert pointwise
    assert steeper


# --------------------------------------------------------------------------
# 4. DtN spectral oracle on circles
# --------------------------------------------------------------------------

def test_criterion_4_dtn_spectrum():
    worst = 0.0
    for R in (1.0, 2.0):   # R = 1 goes through the capacity rescale
        P = stk.interior_dtn(geo.ParamCurve(geo.circle_nodes(R, 64)))
        th = 2 * np.pi * np.arange(64) / 64
        for n in range(1, 9):
            for data in (np.cos(n * th), np.sin(n * th)):
                err = np.abs(P.apply(data) - (n / R) * data).max() / (n / R)
                worst = max(worst, err)
    ok = worst < 1e-8
    _line(4, ok, f"worst relative eigen-action error (R in {{1,2}}, n <= 8): {worst:.2e}")
    assert worst < 1e-8


# --------------------------------------------------------------------------
# 5. Gauss identity and operator kernels
# --------------------------------------------------------------------------

def test_criterion_5_gauss_and_kernels():
    from cellbem.bem import assemble_layers
    curves = {
        "circle": geo.ParamCurve(geo.circle_nodes(2.0, 64)),
        "ellipse": geo.ParamCurve(np.column_stack(
            (2 * np.cos(2 * np.pi * np.arange(64) / 64),
             np.sin(2 * np.pi * np.arange(64) / 64)))),
        "blob": geo.ParamCurve(blob_nodes(64)),
    }
    worst_gauss = max(np.abs(assemble_layers(c).K @ np.ones(c.M) + 0.5).max()
                      for c in curves.values())
    kernels = [stk.interior_dtn(c).kernel_defect() for c in curves.values()]
    kernels.append(stk.exterior_dtn(
        [curves["circle"]], geo.ParamCurve(geo.circle_nodes(4.0, 64))).kernel_defect())
    worst_kernel = max(kernels)
    ok = worst_gauss < 1e-10 and worst_kernel < 1e-9
    _line(5, ok, f"max |(K + I/2) e| = {worst_gauss:.2e} (< 1e-10), "
                 f"max |P e| = {worst_kernel:.2e} (< 1e-9)")
    assert worst_gauss < 1e-10
    assert worst_kernel < 1e-9


# --------------------------------------------------------------------------
# 6. reduction equivalence against the monolithic solve
# --------------------------------------------------------------------------

def test_criterion_6_reduction_equivalence(nested_pair_system):
    t0 = time.perf_counter()
    scene, ops, system = nested_pair_system
    assert scene.M <= 200
    Vm = np.random.default_rng(42).standard_normal(scene.M0)
    lam0, lamg, beta = system.solve_reduced(Vm)
    lam = np.concatenate((lam0, lamg))
    mono = cpl.monolithic_reference(scene, ops, system.kappa, Vm)
    err_mono = np.abs(system.psi(Vm) - mono).max()
    err_comp = max(abs(system.conn.apply_B(i, lam).sum())
                   for i in range(1, scene.N + 1))
    us, _ = cpl.recover_all_potentials(system, Vm)
    Vg = sum(system.conn.apply_BT(i, us[i]) for i in range(scene.N + 1))[scene.M0:]
    err_gap = np.abs(system.kappa * Vg - lamg).max()
    runtime = time.perf_counter() - t0
    ok = err_mono < 1e-8 and err_comp < 1e-9 and err_gap < 1e-9 and runtime < 30.0
    _line(6, ok, f"monolithic {err_mono:.2e} (< 1e-8), compatibility "
                 f"{err_comp:.2e} (< 1e-9), kappa Vg - lambda_g {err_gap:.2e} "
                 f"(< 1e-9), runtime {runtime:.1f} s")
    assert err_mono < 1e-8
    assert err_comp < 1e-9
    assert err_gap < 1e-9
    assert runtime < 30.0


# --------------------------------------------------------------------------
# 7. gauge independence
# --------------------------------------------------------------------------

def test_criterion_7_gauge_independence(nested_pair_system, single_cell_system):
    worst = 0.0
    for scene, ops, system in (nested_pair_system, single_cell_system):
        Vm = np.random.default_rng(7).standard_normal(scene.M0)
        base = system.psi(Vm)
        ops10 = [stk.regularize(op, 10.0 * op.alpha) for op in ops]
        sys10 = cpl.build_coupled(scene, ops10, system.kappa)
        worst = max(worst, np.abs(sys10.psi(Vm) - base).max() / np.abs(base).max())
    ok = worst < 1e-9
    _line(7, ok, f"relative psi change under 10x alpha: {worst:.2e} (< 1e-9)")
    assert worst < 1e-9


# --------------------------------------------------------------------------
# 8. stabilized stepping
# --------------------------------------------------------------------------

def test_criterion_8_stabilized_stepping():
    # certificate over a 10 ms stimulated run
    scene = geo.build_single_cell(10.0, 40.0, 32, sigma=(20.0, 3.0))
    system = cpl.build_coupled(scene, cpl.build_steklov_maps(scene), KAPPA_EFF)
    stim = ionic.Stimulus(300.0, 0.0, 1.0, np.arange(scene.M0 // 2))
    rhs = itg.SplitRHS(system, ionic.MitchellSchaeffer(), stim)
    res = itg.simulate(rhs, 10.0, itg.StepperConfig(dt=0.02))
    cert_ok = res.certificate_max <= 1.0 + 1e-12

    # Dahlquist stability across the claimed interval with auto stage counts
    dahl_ok = True
    for dtrho in (1.0, 10.0, 100.0, 1000.0):
        s = itg.stage_count(1.0, dtrho)
        zs = np.linspace(-0.6 * s * s, 0.0, 300)
        dahl_ok &= all(abs(itg.stability_polynomial(s, 0.05, z)) <= 1.0 + 1e-12
                       for z in zs)

    # first order by Richardson on a nonlinear scalar problem
    def run(dt):
        y, t = np.array([1.0]), 0.0
        for _ in range(int(round(2.0 / dt))):
            y = itg.rkc_step(y, t, dt, lambda t_, y_: -y_ * y_, 4)
            t += dt
        return abs(y[0] - 1.0 / (1.0 + t))

    errs = [run(dt) for dt in (0.1, 0.05, 0.025, 0.0125)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    rich_ok = all(r >= 1.9 for r in ratios)

    ok = cert_ok and dahl_ok and rich_ok
    _line(8, ok, f"certificate max |R| = {res.certificate_max:.12f}, Dahlquist "
                 f"bounded on [-0.6 s^2, 0]: {dahl_ok}, Richardson ratios "
                 f"{[f'{r:.2f}' for r in ratios]}")
    assert cert_ok
    assert dahl_ok
    assert rich_ok


# --------------------------------------------------------------------------
# 9. propagation physics on the 2 x 10 array
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def cv_suite():
    t0 = time.perf_counter()
    base = H.CVConfig()   # 2 x 10 array, reference stimulus
    results = {"base": H.run_cv(base)}
    results["fine"] = H.run_cv(replace(base, dx=5.0, dt=0.01))
    results["kappa_cut"] = H.run_cv(replace(base, kappa=H.KAPPA / 1e4, t_end=40.0))
    cache = {}
    sweeps = {}
    for kind, values in (("kappa", [172.5, 345.0, 690.0]),
                         ("sigma_i", [1.5, 3.0, 6.0]),
                         ("cell_length", [150.0, 200.0, 250.0]),
                         ("cell_width", [10.0, 20.0, 40.0])):
        sweeps[kind] = H.run_sweep(kind, values, base)
    results["sweeps"] = sweeps
    results["runtime"] = time.perf_counter() - t0
    return results


def test_criterion_9_propagation_physics(cv_suite):
    base, fine = cv_suite["base"], cv_suite["fine"]
    prop_ok = (not base.failed) and np.all(np.isfinite(base.activation))
    consistency = abs(base.cv - fine.cv) / fine.cv
    cons_ok = consistency < 0.05
    cut_ok = cv_suite["kappa_cut"].failed
    trends = {}
    for kind, increasing in (("kappa", True), ("sigma_i", True),
                             ("cell_length", False), ("cell_width", True)):
        cvs = [cv for _, cv, failed in cv_suite["sweeps"][kind] if not failed]
        mono = np.all(np.diff(cvs) >= 0) if increasing else np.all(np.diff(cvs) <= 0)
        trends[kind] = bool(mono) and len(cvs) == 3
    trend_ok = all(trends.values())
    runtime_ok = cv_suite["runtime"] < 900.0
    ok = prop_ok and cons_ok and cut_ok and trend_ok and runtime_ok
    _line(9, ok, f"propagates: {prop_ok}; CV {base.cv:.0f} vs {fine.cv:.0f} um/ms "
                 f"({consistency:.2%} < 5%); kappa/1e4 fails: {cut_ok}; "
                 f"monotone trends {trends}; runtime {cv_suite['runtime']:.0f} s")
    assert prop_ok
    assert cons_ok, f"CV self-consistency {consistency:.2%} exceeds 5%"
    assert cut_ok
    assert trend_ok, trends
    assert runtime_ok


# --------------------------------------------------------------------------
# 10. exterior map with the zero-flux outer boundary
# --------------------------------------------------------------------------

def test_criterion_10_exterior_map():
    M = 64
    inner = geo.ParamCurve(geo.circle_nodes(2.0, M))
    outer = geo.ParamCurve(geo.circle_nodes(4.0, M))
    P = stk.exterior_dtn([inner], outer)
    c = 3.0 / 20.0
    x2 = inner.nodes[:, 1]
    u0 = c * (16.0 + 4.0) / (6.0 * 4.0) * x2
    err = np.abs(P.apply(u0) - c * x2 / 4.0).max()
    ok = err < 1e-8
    _line(10, ok, f"annulus exact-solution error {err:.2e} (< 1e-8)")
    assert err < 1e-8
