"""Acceptance suite: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. The reference inclusion scenario is a disk of radius 0.25
centered at (0.3, 0) with isotropic contrast 3, swept on a 0.05 grid with
relative discrepancy 1e-2 at truncation N = 16.
"""

import time

import numpy as np
import pytest

from eitlsm import (
    AuxCircle,
    BoundaryField,
    DipoleSpec,
    SingularTraceComputer,
    build_disk_mesh,
    compute_background_nd_map,
    compute_nd_map,
    estimate_support,
    fourier_modes,
    indicator_map,
    layer_current_matrix,
    make_relative_data,
    morozov_alpha,
    parse_scenario,
    singular_trace,
    tikhonov_solve,
)
from eitlsm.sampling import _solve_weighted
from conftest import ANISO_DOC, SWEEP_DOC, two_phase_diagonal

N_ORDER = 16
H_FINE = 0.02
SWEEP_H = 0.03
SWEEP_CENTER = np.array([0.3, 0.0])
SWEEP_RADIUS = 0.25


def report(name, ok, detail):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def fine_background():
    t0 = time.monotonic()
    mesh = build_disk_mesh(H_FINE)
    nd = compute_background_nd_map(mesh, N_ORDER)
    return mesh, nd, time.monotonic() - t0


@pytest.fixture(scope="module")
def sweep():
    """Full pipeline on the reference scenario; shared by four criteria."""
    t0 = time.monotonic()
    mesh = build_disk_mesh(SWEEP_H)
    field = parse_scenario(SWEEP_DOC)
    measured = compute_nd_map(mesh, field, N_ORDER)
    background = compute_background_nd_map(mesh, N_ORDER)
    data = make_relative_data(measured, background)
    computer = SingularTraceComputer(mesh, N_ORDER)
    imap = indicator_map(
        data, mesh, {"spacing": 0.05, "r_max": 0.9}, {"epsilon": 1e-2},
        trace_computer=computer,
    )
    elapsed = time.monotonic() - t0
    inside = np.linalg.norm(imap.points - SWEEP_CENTER, axis=1) < SWEEP_RADIUS
    return data, computer, imap, inside, elapsed


def test_background_spectrum(fine_background):
    mesh, nd, elapsed = fine_background
    modes = nd.modes
    band = np.abs(modes) <= 8
    rel = np.abs(np.diag(nd.matrix) - 1.0 / np.abs(modes)) * np.abs(modes)
    err = float(rel[band].max())
    report("background-spectrum", err <= 0.02 and elapsed <= 60.0,
           f"max rel diag error {err:.2e} <= 2e-2 for |n|<=8, runtime {elapsed:.1f}s <= 60s")


def test_two_phase_spectrum(fine_background):
    mesh, _, _ = fine_background
    field = parse_scenario({"inclusions": [{
        "shape": "disk", "center": [0.0, 0.0], "radius": 0.5,
        "h": [[1.0, 0.0], [0.0, 1.0]],
    }]})
    nd = compute_nd_map(mesh, field, N_ORDER)
    modes = nd.modes
    band = np.abs(modes) <= 8
    oracle = two_phase_diagonal(modes, rho=0.5, sigma=2.0)
    err = float((np.abs(np.diag(nd.matrix) - oracle) / np.abs(oracle))[band].max())
    report("two-phase-spectrum", err <= 0.02,
           f"max rel diag error {err:.2e} <= 2e-2 for |n|<=8 (rho=0.5, sigma=2)")


def test_reciprocity(fine_background):
    mesh, _, _ = fine_background
    field = parse_scenario(ANISO_DOC)
    defect = compute_nd_map(mesh, field, N_ORDER).symmetry_defect()
    fine = build_disk_mesh(0.01)
    defect_ref = compute_nd_map(fine, field, N_ORDER).symmetry_defect()
    # the default (trapezoid-paired) load is adjoint-exact, so its defect sits
    # at solver roundoff at every resolution; the mesh-dependent tightening is
    # exhibited by the galerkin load, whose defect is consistency-order
    gal = compute_nd_map(mesh, field, N_ORDER, load_rule="galerkin").symmetry_defect()
    gal_ref = compute_nd_map(fine, field, N_ORDER, load_rule="galerkin").symmetry_defect()
    ok = defect <= 1e-6 and defect_ref <= 1e-6 and gal_ref < gal
    report("reciprocity", ok,
           f"defect {defect:.2e} <= 1e-6 at h=0.02 (refined: {defect_ref:.2e}); "
           f"galerkin-load defect {gal:.2e} -> {gal_ref:.2e} under refinement")


def test_dipole_trace(fine_background):
    mesh, _, _ = fine_background
    phi = singular_trace(mesh, DipoleSpec(y=(0.0, 0.0), direction=(1.0, 0.0)), N_ORDER)
    modes = phi.modes
    target = np.zeros(2 * N_ORDER, dtype=complex)
    target[np.abs(modes) == 1] = -1.0 / (2.0 * np.pi)
    err = float(np.abs(phi.coeffs - target).max() * 2.0 * np.pi)
    report("dipole-trace", err <= 0.01,
           f"centered dipole coeff error {err:.2e} <= 1e-2 vs -cos(theta)/pi")


def test_layer_operator_modes():
    aux = AuxCircle(radius=2.0, count=128)
    lmat = layer_current_matrix(aux, N=8)
    modes = fourier_modes(8)
    worst = 0.0
    for k in range(-8, 9):
        if k == 0:
            out = lmat @ np.ones(aux.count)
            worst = max(worst, float(np.abs(out).max()))
            continue
        out = lmat @ np.exp(1j * k * aux.angles)
        expected = np.where(modes == k, 0.5 * aux.radius ** (1 - abs(k)), 0.0)
        worst = max(worst, float(np.abs(out - expected).max()))
    report("layer-operator-modes", worst <= 1e-8,
           f"max defect {worst:.2e} <= 1e-8 vs (1/2) R^(1-|k|), |k|<=8, Q=128")


def test_morozov_contract(sweep):
    data, computer, imap, _, _ = sweep
    feasible = imap.feasible
    rel = np.abs(imap.residual[feasible] - imap.delta[feasible]) / imap.delta[feasible]
    discrepancy_ok = float(rel.max()) <= 1e-6

    phi = BoundaryField(
        computer.trace_batch([(0.25, 0.1)], [(1.0, 0.0)])[0], N_ORDER, 0.5
    )
    phit = data.weighted_rhs(phi)
    residuals = [
        _solve_weighted(data, phit, alpha)[1] for alpha in np.logspace(-12, 2, 20)
    ]
    ladder_ok = bool((np.diff(residuals) > 0).all())
    report("morozov-contract", discrepancy_ok and ladder_ok,
           f"max |residual-delta|/delta {rel.max():.2e} <= 1e-6 over "
           f"{int(feasible.sum())} feasible points; 20-point ladder monotone: {ladder_ok}")


def test_indicator_dichotomy(sweep):
    _, _, imap, inside, elapsed = sweep
    med_in = float(np.median(imap.indicator[inside]))
    med_out = float(np.median(imap.indicator[~inside]))
    ratio = med_out / med_in
    report("indicator-dichotomy", ratio >= 5.0 and elapsed <= 600.0,
           f"median outside/inside = {ratio:.3g} >= 5, sweep {elapsed:.1f}s <= 600s")


def test_support_recovery(sweep):
    _, _, imap, inside, _ = sweep
    mask = estimate_support(imap)  # default cut-off rule
    symdiff = float((mask != inside).sum() / inside.sum())
    # secondary record: the alpha-based cut-off agrees with the norm-based one
    amask = estimate_support(imap, use_alpha=True)
    agreement = float((amask == mask).mean())
    report("support-recovery", symdiff <= 0.30 and agreement >= 0.80,
           f"|Dhat sym-diff D| = {symdiff:.3f} |D| <= 0.30 (default rule); "
           f"alpha-mask agreement {agreement:.3f} >= 0.80")


def test_blowup_trend(sweep):
    _, _, imap, _, _ = sweep
    # ray from the inclusion center through its boundary along +x: the last
    # three interior lattice points and the first beyond
    xs = (0.40, 0.45, 0.50, 0.55)
    vals = []
    for x in xs:
        idx = np.argmin(np.linalg.norm(imap.points - np.array([x, 0.0]), axis=1))
        vals.append(float(imap.indicator[idx]))
    ok = all(a <= b for a, b in zip(vals, vals[1:]))
    report("blow-up-trend", ok,
           "indicator along exit ray " + " <= ".join(f"{v:.3g}" for v in vals))


def test_density_of_layer_range():
    rng = np.random.default_rng(5)
    N = 8
    modes = fourier_modes(N)
    target = np.where(np.abs(modes) <= 6,
                      rng.standard_normal(2 * N) + 1j * rng.standard_normal(2 * N), 0.0)
    w = np.abs(modes).astype(float) ** -0.5
    residuals = []
    for count in (64, 96, 128):
        aux = AuxCircle(radius=2.0, count=count)
        lmat = layer_current_matrix(aux, N)
        sol, *_ = np.linalg.lstsq(w[:, None] * lmat, w * target, rcond=None)
        residuals.append(float(
            np.linalg.norm(w * (lmat @ sol - target)) / np.linalg.norm(w * target)
        ))
    ok = residuals[0] <= 1e-3 and all(b <= a + 1e-12 for a, b in zip(residuals, residuals[1:]))
    report("density-of-layer-range", ok,
           f"rel residual {residuals[0]:.2e} <= 1e-3 at Q=64, non-increasing over Q=(64,96,128)")
