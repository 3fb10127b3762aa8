import numpy as np
import pytest

from eitlsm import (
    AdmittanceField,
    BoundaryField,
    ConfigurationError,
    Disk,
    InclusionGeometry,
    SolverError,
    add_noise,
    assemble_system,
    build_disk_mesh,
    compute_background_nd_map,
    compute_nd_map,
    fourier_modes,
    load_nd_map,
    nd_map_from_system,
    parse_scenario,
    reciprocity_defect,
    save_nd_map,
    solve_neumann,
    trace_to_fourier,
)
from conftest import ANISO_DOC, two_phase_diagonal


def background_field():
    return AdmittanceField(InclusionGeometry(components=[]), [])


def mode_field(N, n, amplitude=1.0):
    coeffs = np.zeros(2 * N, dtype=complex)
    coeffs[fourier_modes(N) == n] = amplitude
    return BoundaryField(coeffs, N, smoothness=-0.5)


def cos_field(N, n):
    coeffs = np.zeros(2 * N, dtype=complex)
    modes = fourier_modes(N)
    coeffs[modes == n] = 0.5
    coeffs[modes == -n] = 0.5
    return BoundaryField(coeffs, N, smoothness=-0.5)


# ---------------------------------------------------------------------------
# assembly


def test_stiffness_constant_nullspace_and_symmetry(aniso_field):
    mesh = build_disk_mesh(0.1)
    system = assemble_system(mesh, aniso_field)
    K = system.stiffness
    # constants in the null space of the unconstrained Neumann matrix
    ones = np.ones(mesh.n_vertices)
    assert np.abs(K @ ones).max() <= 1e-12
    # complex symmetric (not Hermitian) for symmetric gamma
    defect = abs(K - K.T).max()
    assert defect <= 1e-14
    assert abs(K - K.conj().T).max() > 1e-3  # genuinely complex


def _cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def test_identity_admittance_gives_laplace_stiffness():
    mesh = build_disk_mesh(0.2)
    system = assemble_system(mesh, background_field())
    # cotangent-formula oracle on a few random triangles
    rng = np.random.default_rng(0)
    K = system.stiffness.toarray()
    for _ in range(10):
        t = mesh.triangles[rng.integers(len(mesh.triangles))]
        p = mesh.vertices[t]
        for i in range(3):
            j = (i + 1) % 3
            k = (j + 1) % 3
            u, v = p[i] - p[k], p[j] - p[k]
            expected = -0.5 * (u @ v) / abs(_cross2(u, v))
            others = [tt for tt in mesh.triangles
                      if t[i] in tt and t[j] in tt and not np.array_equal(tt, t)]
            for tt in others:
                kk = [w for w in tt if w not in (t[i], t[j])][0]
                q = mesh.vertices
                u2, v2 = q[t[i]] - q[kk], q[t[j]] - q[kk]
                expected += -0.5 * (u2 @ v2) / abs(_cross2(u2, v2))
            assert K[t[i], t[j]].real == pytest.approx(expected, abs=1e-12)


def test_assembly_refuses_non_coercive_field():
    geom = InclusionGeometry(components=[Disk(center=(0.0, 0.0), radius=0.3)])
    hopeless = AdmittanceField(geom, [np.diag([-4.0, -4.0])])  # gamma = -3 I inside
    mesh = build_disk_mesh(0.2)
    with pytest.raises(SolverError, match="coercivity"):
        assemble_system(mesh, hopeless)


# ---------------------------------------------------------------------------
# Neumann solves


def test_zero_current_zero_potential():
    mesh = build_disk_mesh(0.2)
    system = assemble_system(mesh, background_field())
    u = solve_neumann(system, mode_field(4, 1, 0.0))
    assert np.abs(u).max() <= 1e-14


def test_harmonic_mode_one():
    mesh = build_disk_mesh(0.05)
    system = assemble_system(mesh, background_field())
    u = solve_neumann(system, cos_field(8, 1))
    # separation of variables: u = r cos(theta)
    exact = mesh.vertices[:, 0]
    err = np.abs(u - exact).max()
    assert err <= 2.0 * 0.05**2
    trace = u[mesh.boundary]
    assert np.abs(trace - np.cos(mesh.boundary_angles)).max() <= 2.0 * 0.05**2
    # boundary trace mean is zero
    assert abs(system.constraint @ u) / system.constraint.sum() <= 1e-10


def test_harmonic_mode_two_trace():
    mesh = build_disk_mesh(0.05)
    system = assemble_system(mesh, background_field())
    u = solve_neumann(system, cos_field(8, 2))
    trace = trace_to_fourier(mesh, u[mesh.boundary], 8, 0.5)
    expect = cos_field(8, 2).coeffs / 2.0  # mode-n trace = f_n / |n|
    assert np.abs(trace.coeffs - expect).max() <= 1e-3


def test_sup_error_quadratic_in_h():
    errs = []
    for h in (0.1, 0.05):
        mesh = build_disk_mesh(h)
        system = assemble_system(mesh, background_field())
        u = solve_neumann(system, cos_field(8, 1))
        errs.append(np.abs(u - mesh.vertices[:, 0]).max())
    assert errs[1] <= 0.35 * errs[0]  # ~ 4x drop for O(h^2)


# ---------------------------------------------------------------------------
# ND maps


def test_nd_map_zero_perturbation_matches_background(mesh05):
    empty = parse_scenario({"inclusions": []})
    nd = compute_nd_map(mesh05, empty, 8)
    nd0 = compute_background_nd_map(mesh05, 8)
    assert np.abs(nd.matrix - nd0.matrix).max() <= 1e-10


def test_background_analytic_diagonal():
    nd = compute_background_nd_map(None, 4)
    modes = fourier_modes(4)
    assert np.array_equal(nd.matrix, np.diag(1.0 / np.abs(modes).astype(float)))
    assert nd.provenance == "analytic"
    # cos current -> cos voltage at mode 1
    out = nd.apply(cos_field(4, 1))
    assert np.abs(out.coeffs - cos_field(4, 1).coeffs).max() <= 1e-15
    assert out.smoothness == 0.5


def test_background_fem_matches_analytic(background_nd05):
    modes = background_nd05.modes
    band = np.abs(modes) <= 8
    diag = np.diag(background_nd05.matrix)
    oracle = 1.0 / np.abs(modes).astype(float)
    rel = np.abs(diag - oracle) / oracle
    assert rel[band].max() <= 0.02


def test_concentric_diagonal_oracle(concentric_nd05):
    modes = concentric_nd05.modes
    band = np.abs(modes) <= 8
    diag = np.diag(concentric_nd05.matrix)
    oracle = two_phase_diagonal(modes, rho=0.5, sigma=2.0)
    rel = np.abs(diag - oracle) / np.abs(oracle)
    assert rel[band].max() <= 0.02


def test_concentric_difference_decays_monotonically(concentric_nd05, background_nd05):
    diff = np.abs(np.diag(concentric_nd05.matrix - background_nd05.matrix))
    pos = diff[concentric_nd05.N:]  # n = 1..N
    assert (np.diff(pos) < 0).all()


def test_diagonal_error_shrinks_under_refinement(concentric_field):
    # ring counts with even M resolve the rho = 0.5 interface exactly, so the
    # comparison sees the pure FEM error rather than interface smearing
    errs = []
    for h in (0.05, 0.025):
        mesh = build_disk_mesh(h)
        nd = compute_nd_map(mesh, concentric_field, 8)
        modes = nd.modes
        oracle = two_phase_diagonal(modes, 0.5, 2.0)
        errs.append((np.abs(np.diag(nd.matrix) - oracle) / np.abs(oracle)).max())
    assert errs[1] <= 0.5 * errs[0]


def test_reciprocity_anisotropic(mesh05, aniso_field):
    nd = compute_nd_map(mesh05, aniso_field, 12)
    assert nd.symmetry_defect() <= 1e-8  # map invariant
    # galerkin load: the defect is consistency-order and shrinks with h
    coarse = compute_nd_map(build_disk_mesh(0.1), aniso_field, 12, load_rule="galerkin")
    fine = compute_nd_map(mesh05, aniso_field, 12, load_rule="galerkin")
    assert fine.symmetry_defect() < coarse.symmetry_defect()


def test_real_gamma_preserves_real_fields(concentric_nd05):
    # real map in Fourier coordinates: conj(M[m, n]) = M[-m, -n]
    m = concentric_nd05.matrix
    flipped = np.flipud(np.fliplr(m))
    assert np.abs(np.conj(m) - flipped).max() <= 1e-12 * np.abs(m).max()


def test_nd_map_truncation_guard():
    mesh = build_disk_mesh(0.5)  # 12 boundary vertices
    with pytest.raises(ConfigurationError):
        compute_nd_map(mesh, parse_scenario({"inclusions": []}), 6)


# ---------------------------------------------------------------------------
# noise


def test_add_noise_contract(background_nd05):
    nd = background_nd05
    same = add_noise(nd, 0.0, 123)
    assert np.array_equal(same.matrix, nd.matrix)
    a = add_noise(nd, 0.01, 7)
    b = add_noise(nd, 0.01, 7)
    assert np.array_equal(a.matrix, b.matrix)
    c = add_noise(nd, 0.01, 8)
    assert not np.array_equal(a.matrix, c.matrix)
    rel = np.linalg.norm(a.matrix - nd.matrix) / np.linalg.norm(nd.matrix)
    assert abs(rel - 0.01) <= 1e-12
    assert a.provenance == "noisy(0.01,7)"
    # symmetrized noise preserves reciprocity
    assert reciprocity_defect(a.matrix) <= 1e-8


def test_add_noise_level_validated(background_nd05):
    with pytest.raises(ConfigurationError):
        add_noise(background_nd05, 1.5, 0)


# ---------------------------------------------------------------------------
# file format


def test_nd_file_round_trip(tmp_path, concentric_nd05):
    noisy = add_noise(concentric_nd05, 0.037, 99)
    path = tmp_path / "map.nd"
    save_nd_map(noisy, path)
    back = load_nd_map(path)
    assert np.array_equal(back.matrix, noisy.matrix)  # bit-exact
    assert back.N == noisy.N
    assert back.provenance == noisy.provenance


def test_nd_file_malformed_header(tmp_path):
    path = tmp_path / "bad.nd"
    path.write_text("not an ndmap\n")
    with pytest.raises(ConfigurationError):
        load_nd_map(path)
