"""P1 finite-element Neumann solves and Neumann-to-Dirichlet maps.

The weak form int_B gamma grad(u) . grad(v) dx = int_dB f v dS is assembled
with linear triangles and gamma frozen at each centroid; the zero-mean trace
constraint is a single Lagrange multiplier row, which keeps the system
complex symmetric. ND maps are stored as (2N)x(2N) complex matrices in the
zero-mean Fourier basis (column n = Fourier trace of the solution driven by
the current exp(i n theta)).

Boundary loads use the periodic trapezoid quadrature paired with the
trapezoid trace projection; on the uniformly spaced boundary this pairing
is adjoint-exact, so discrete reciprocity M[m,n] = M[-n,-m] holds to solver
roundoff, and it is also markedly more accurate for the ND diagonal than
the P1-consistent ("galerkin") load, which is kept as an option.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, SolverError
from .geometry import BoundaryField, DiskMesh, fourier_modes, fourier_to_trace, trace_to_fourier
from .media import AdmittanceField, InclusionGeometry, check_coercivity

__all__ = [
    "FemSystem",
    "NdMap",
    "assemble_system",
    "solve_neumann",
    "compute_nd_map",
    "compute_background_nd_map",
    "nd_map_from_system",
    "add_noise",
    "reciprocity_defect",
    "save_nd_map",
    "load_nd_map",
]


@dataclass(eq=False)
class NdMap:
    """Neumann-to-Dirichlet map on zero-mean Fourier coefficients.

    ``matrix`` acts on coefficient vectors ordered n = -N..-1, 1..N and maps
    smoothness -1/2 (currents) to +1/2 (traces). ``provenance`` is one of
    ``analytic``, ``fem`` or ``noisy(level,seed)``.
    """

    matrix: np.ndarray
    N: int
    provenance: str
    source_smoothness: float = -0.5
    target_smoothness: float = 0.5

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (2 * self.N, 2 * self.N):
            raise ConfigurationError(
                f"ND matrix shape {self.matrix.shape} does not match N={self.N}"
            )

    @property
    def modes(self) -> np.ndarray:
        return fourier_modes(self.N)

    def apply(self, fld: BoundaryField) -> BoundaryField:
        if fld.N != self.N:
            raise ConfigurationError(f"field order {fld.N} does not match map order {self.N}")
        return BoundaryField(self.matrix @ fld.coeffs, self.N, self.target_smoothness)

    def symmetry_defect(self) -> float:
        """Relative reciprocity defect ||M - M_sym|| / ||M|| (Frobenius)."""
        return reciprocity_defect(self.matrix)


def reciprocity_defect(matrix: np.ndarray) -> float:
    sym = np.flipud(np.fliplr(matrix.T))
    return float(np.linalg.norm(matrix - sym) / np.linalg.norm(matrix))


class FemSystem:
    """Assembled and factorized Neumann system on a disk mesh.

    Holds the complex-symmetric stiffness matrix for int gamma grad(u).grad(v),
    the boundary mean-constraint vector and the LU factorization of the
    Lagrange-augmented system. The factorization is reused by every solve;
    it is immutable and safe to share read-only.
    """

    def __init__(self, mesh: DiskMesh, stiffness: sp.csc_matrix, constraint: np.ndarray,
                 admittance: AdmittanceField):
        self.mesh = mesh
        self.stiffness = stiffness
        self.constraint = constraint
        self.admittance = admittance
        n = mesh.n_vertices
        augmented = sp.bmat(
            [[stiffness, sp.csc_matrix(constraint[:, None])],
             [sp.csc_matrix(constraint[None, :]), None]],
            format="csc", dtype=complex,
        )
        try:
            self._lu = spla.splu(augmented)
        except RuntimeError as exc:
            raise SolverError(f"constrained Neumann system is singular: {exc}") from None
        self._n = n
        # boundary quadrature data, precomputed once
        self.boundary_theta = mesh.boundary_angles
        self.boundary_weights = self._trapezoid_weights(mesh)
        self._edge_lengths = mesh.boundary_edge_lengths()

    @staticmethod
    def _trapezoid_weights(mesh: DiskMesh) -> np.ndarray:
        theta = mesh.boundary_angles
        gaps = np.diff(theta, append=theta[0] + 2 * np.pi)
        return 0.5 * (gaps + np.roll(gaps, 1))

    def neumann_load(self, nodal, rule: str = "trapezoid") -> np.ndarray:
        """Load vector b_i = int f phi_i dS from nodal boundary currents.

        ``trapezoid`` (default) uses the periodic trapezoid rule in angle,
        the adjoint of the trace projection; ``galerkin`` evaluates the
        P1-consistent edge mass exactly.
        """
        nodal = np.asarray(nodal, dtype=complex)
        bnd = self.mesh.boundary
        ell = self._edge_lengths
        b = np.zeros(self._n, dtype=complex)
        if rule == "trapezoid":
            b[bnd] = nodal * self.boundary_weights
        elif rule == "galerkin":
            nxt = np.roll(nodal, -1)
            prv = np.roll(nodal, 1)
            b[bnd] = (ell * (2 * nodal + nxt) + np.roll(ell, 1) * (2 * nodal + prv)) / 6.0
        else:
            raise ConfigurationError(f"unknown load rule {rule!r}")
        return b

    def solve(self, loads: np.ndarray) -> np.ndarray:
        """Solve the constrained system for one load vector or a stack of columns."""
        loads = np.asarray(loads, dtype=complex)
        single = loads.ndim == 1
        cols = loads[:, None] if single else loads
        rhs = np.zeros((self._n + 1, cols.shape[1]), dtype=complex)
        rhs[: self._n] = cols
        sol = self._lu.solve(rhs)
        if not np.isfinite(sol).all():
            raise SolverError("Neumann solve produced non-finite values")
        u = sol[: self._n]
        return u[:, 0] if single else u


def assemble_system(mesh: DiskMesh, admittance: AdmittanceField,
                    z_grid_size: int = 64) -> FemSystem:
    """Assemble the P1 stiffness matrix with gamma frozen at centroids.

    The coercivity assumption is checked on the triangle centroids first;
    assembly is refused when it fails, since the constrained system is then
    not guaranteed solvable (no Lax-Milgram bound).
    """
    verts, tris = mesh.vertices, mesh.triangles
    centroids = verts[tris].mean(axis=1)
    verdict = check_coercivity(admittance, centroids, z_grid_size=z_grid_size)
    if not verdict["holds"]:
        raise SolverError(
            "admittance fails the coercivity assumption on this mesh "
            f"(best alpha={verdict['alpha']:.3g} at z={verdict['z']:.3g}); "
            "the Lax-Milgram hypothesis is unavailable"
        )

    p = verts[tris]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * det
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / det[:, None]
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / det[:, None]
    gam = admittance.evaluate_batch(centroids)
    gax = gam[:, 0, 0][:, None] * gx + gam[:, 0, 1][:, None] * gy
    gay = gam[:, 1, 0][:, None] * gx + gam[:, 1, 1][:, None] * gy
    kloc = area[:, None, None] * (
        gx[:, :, None] * gax[:, None, :] + gy[:, :, None] * gay[:, None, :]
    )
    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    stiffness = sp.coo_matrix(
        (kloc.reshape(-1), (rows, cols)), shape=(mesh.n_vertices,) * 2
    ).tocsc()

    ell = mesh.boundary_edge_lengths()
    constraint = np.zeros(mesh.n_vertices)
    constraint[mesh.boundary] = 0.5 * (ell + np.roll(ell, 1))
    return FemSystem(mesh, stiffness, constraint, admittance)


def solve_neumann(system: FemSystem, current: BoundaryField,
                  rule: str = "trapezoid") -> np.ndarray:
    """Nodal potential for the boundary current; trace mean is zero.

    The current is synthesized at the boundary vertices and fed through the
    boundary quadrature; the Lagrange multiplier absorbs any residual mean
    defect of the discrete data.
    """
    nodal = fourier_to_trace(current, system.mesh)
    u = system.solve(system.neumann_load(nodal, rule=rule))
    mean = abs(system.constraint @ u) / system.constraint.sum()
    if mean > 1e-10 * max(1.0, float(np.abs(u).max())):
        raise SolverError(f"boundary trace mean {mean:.3g} exceeds tolerance")
    return u


def compute_nd_map(mesh: DiskMesh, admittance: AdmittanceField, N: int,
                   load_rule: str = "trapezoid") -> NdMap:
    """FEM Neumann-to-Dirichlet map: columns are traces of mode solves."""
    if 2 * N + 1 > mesh.n_boundary:
        raise ConfigurationError(
            f"N={N} needs 2N+1 <= {mesh.n_boundary} boundary vertices"
        )
    system = assemble_system(mesh, admittance)
    return nd_map_from_system(system, N, load_rule=load_rule)


def nd_map_from_system(system: FemSystem, N: int, load_rule: str = "trapezoid") -> NdMap:
    """ND map from an already assembled system (column solves are batched)."""
    mesh = system.mesh
    if 2 * N + 1 > mesh.n_boundary:
        raise ConfigurationError(
            f"N={N} needs 2N+1 <= {mesh.n_boundary} boundary vertices"
        )
    theta = system.boundary_theta
    modes = fourier_modes(N)
    loads = np.stack(
        [system.neumann_load(np.exp(1j * mo * theta), rule=load_rule) for mo in modes],
        axis=1,
    )
    traces = system.solve(loads)[mesh.boundary]
    matrix = np.stack(
        [trace_to_fourier(mesh, traces[:, k], N, 0.5).coeffs for k in range(2 * N)],
        axis=1,
    )
    return NdMap(matrix=matrix, N=N, provenance="fem")


def compute_background_nd_map(mesh: DiskMesh | None, N: int,
                              load_rule: str = "trapezoid") -> NdMap:
    """Inclusion-free ND map.

    With ``mesh=None`` returns the analytic diagonal 1/|n| (the separation
    of variables solution on the disk); otherwise runs the FEM path with
    gamma = I on the given mesh.
    """
    if mesh is None:
        modes = fourier_modes(N)
        matrix = np.diag(1.0 / np.abs(modes).astype(float)).astype(complex)
        return NdMap(matrix=matrix, N=N, provenance="analytic")
    background = AdmittanceField(InclusionGeometry(components=[]), [])
    return compute_nd_map(mesh, background, N, load_rule=load_rule)


def add_noise(nd: NdMap, level: float, seed: int) -> NdMap:
    """Frobenius-calibrated symmetric complex Gaussian perturbation.

    M' = M + level * ||M||_F * E / ||E||_F with E symmetrized to preserve
    the reciprocity invariant; the (level, seed) pair is recorded in the
    provenance tag and the construction is deterministic in the seed.
    """
    if not (0.0 <= level < 1.0):
        raise ConfigurationError(f"noise level must lie in [0, 1), got {level}")
    if level == 0.0:
        return NdMap(matrix=nd.matrix.copy(), N=nd.N, provenance=nd.provenance)
    rng = np.random.default_rng(seed)
    shape = nd.matrix.shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    sym = 0.5 * (raw + np.flipud(np.fliplr(raw.T)))
    scale = level * np.linalg.norm(nd.matrix) / np.linalg.norm(sym)
    return NdMap(
        matrix=nd.matrix + scale * sym,
        N=nd.N,
        provenance=f"noisy({level!r},{seed})",
    )


def save_nd_map(nd: NdMap, path) -> None:
    """Write the text ND-map format.

    Header ``ndmap N <N> provenance <tag>``; then the 2N x 2N complex matrix,
    one row per line, entries as ``re im`` pairs at 17 significant digits
    (bit-exact round trip).
    """
    with open(path, "w") as fh:
        fh.write(f"ndmap N {nd.N} provenance {nd.provenance}\n")
        for row in nd.matrix:
            fh.write(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) + "\n")


def load_nd_map(path) -> NdMap:
    """Read the text ND-map format written by :func:`save_nd_map`."""
    try:
        fh = open(path)
    except FileNotFoundError:
        raise ConfigurationError(f"ND-map file not found: {path}") from None
    with fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "ndmap" or header[1] != "N" or header[3] != "provenance":
            raise ConfigurationError(f"malformed ND-map header in {path}")
        N = int(header[2])
        provenance = header[4]
        rows = []
        for k in range(2 * N):
            vals = [float(t) for t in fh.readline().split()]
            if len(vals) != 4 * N:
                raise ConfigurationError(f"ND-map row {k} in {path} has {len(vals)} values")
            arr = np.asarray(vals).reshape(2 * N, 2)
            rows.append(arr[:, 0] + 1j * arr[:, 1])
    return NdMap(matrix=np.stack(rows), N=N, provenance=provenance)
