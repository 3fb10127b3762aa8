"""Unit-disk triangulations and zero-mean Fourier boundary fields.

The disk is meshed with concentric rings of vertices (ring i of M carries
6i vertices, uniformly spaced in angle) joined by a deterministic annulus
zip, so the boundary ring is exactly uniform and every downstream quadrature
over the boundary is a plain periodic trapezoid rule.

Boundary data lives in ``BoundaryField``: truncated Fourier coefficients
for modes 1 <= |n| <= N with the n = 0 component structurally absent, which
realizes the zero-mean constraint on boundary currents and traces. The
Sobolev norm of smoothness s is sum_n |n|^(2s) |f_n|^2 on this mean-free
space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "DiskMesh",
    "BoundaryField",
    "fourier_modes",
    "build_disk_mesh",
    "trace_to_fourier",
    "fourier_to_trace",
    "triangle_areas",
    "max_edge_length",
    "save_mesh",
    "load_mesh",
]


def fourier_modes(N: int) -> np.ndarray:
    """Mode numbers in coefficient-vector order: -N..-1, 1..N."""
    return np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])


@dataclass(eq=False)
class BoundaryField:
    """Zero-mean function on the unit circle, stored as Fourier coefficients.

    Parameters
    ----------
    coeffs : complex array, shape (2N,)
        Coefficients f_n ordered n = -N..-1, 1..N (no n = 0 entry).
    N : int
        Truncation order, N >= 1.
    smoothness : float
        Sobolev index s of the space the field is viewed in (-1/2 for
        currents, +1/2 for traces).
    """

    coeffs: np.ndarray
    N: int
    smoothness: float

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.N < 1:
            raise ConfigurationError(f"truncation order must be >= 1, got {self.N}")
        if self.coeffs.shape != (2 * self.N,):
            raise ConfigurationError(
                f"coefficient vector has shape {self.coeffs.shape}, expected ({2 * self.N},)"
            )

    @property
    def modes(self) -> np.ndarray:
        return fourier_modes(self.N)

    def sobolev_norm(self, s: float | None = None) -> float:
        """Norm ( sum |n|^(2s) |f_n|^2 )^(1/2); s defaults to the field's tag."""
        if s is None:
            s = self.smoothness
        w = np.abs(self.modes).astype(float) ** s
        return float(np.linalg.norm(w * self.coeffs))

    def is_real_valued(self, tol: float = 1e-12) -> bool:
        """True when f_{-n} = conj(f_n) for all modes, i.e. the field is real."""
        defect = self.coeffs[::-1] - np.conj(self.coeffs)
        scale = max(float(np.abs(self.coeffs).max()), 1e-300)
        return float(np.abs(defect).max()) <= tol * scale


@dataclass(eq=False)
class DiskMesh:
    """Conforming triangulation of the unit disk.

    Fields
    ------
    vertices : float array (nv, 2)
    triangles : int array (nt, 3), positively oriented
    boundary : int array (nb,), vertex indices on the unit circle ordered
        by strictly increasing polar angle in [0, 2pi)
    h_target : float, requested maximum edge length
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h_target: float
    _boundary_angles: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    @property
    def boundary_angles(self) -> np.ndarray:
        if self._boundary_angles is None:
            bp = self.vertices[self.boundary]
            self._boundary_angles = np.mod(np.arctan2(bp[:, 1], bp[:, 0]), 2 * np.pi)
        return self._boundary_angles

    def boundary_edge_lengths(self) -> np.ndarray:
        """Length of boundary edge k = (boundary[k], boundary[k+1]), cyclic."""
        bp = self.vertices[self.boundary]
        return np.linalg.norm(np.roll(bp, -1, axis=0) - bp, axis=1)


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def triangle_areas(mesh: DiskMesh) -> np.ndarray:
    """Signed areas of all triangles (positive for a valid mesh)."""
    return _signed_areas(mesh.vertices, mesh.triangles)


def max_edge_length(mesh: DiskMesh) -> float:
    p = mesh.vertices[mesh.triangles]
    edges = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
    return float(np.linalg.norm(edges, axis=1).max())


def build_disk_mesh(h_target: float) -> DiskMesh:
    """Triangulate the unit disk with maximum edge length <= 1.5 * h_target.

    Vertices sit on M = ceil(1/h_target) concentric rings, ring i holding
    6i uniformly spaced vertices at radius i/M; annuli are zipped by angular
    merge. All triangles are positively oriented and the triangulation is
    conforming by construction.

    Parameters
    ----------
    h_target : float
        Requested edge scale, 0 < h_target <= 0.5.
    """
    if not (0.0 < h_target <= 0.5):
        raise ConfigurationError(f"h_target must lie in (0, 0.5], got {h_target}")
    M = math.ceil(1.0 / h_target)
    verts = [np.zeros((1, 2))]
    ring_start = np.zeros(M + 1, dtype=int)
    count = 1
    for i in range(1, M + 1):
        n_i = 6 * i
        ring_start[i] = count
        ang = 2.0 * np.pi * np.arange(n_i) / n_i
        r = i / M
        verts.append(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
        count += n_i
    vertices = np.concatenate(verts)

    tris = []
    s1 = ring_start[1]
    for j in range(6):
        tris.append((0, s1 + j, s1 + (j + 1) % 6))
    for i in range(1, M):
        na, nb = 6 * i, 6 * (i + 1)
        sa, sb = ring_start[i], ring_start[i + 1]
        ia = ib = 0
        while ia < na or ib < nb:
            # advance whichever ring has the smaller next (unwrapped) angle
            if ib >= nb or (ia < na and (ia + 1) * nb <= (ib + 1) * na):
                tris.append((sa + ia % na, sb + ib % nb, sa + (ia + 1) % na))
                ia += 1
            else:
                tris.append((sa + ia % na, sb + ib % nb, sb + (ib + 1) % nb))
                ib += 1
    triangles = np.array(tris, dtype=int)

    areas = _signed_areas(vertices, triangles)
    flip = areas < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    boundary = ring_start[M] + np.arange(6 * M)
    return DiskMesh(vertices=vertices, triangles=triangles, boundary=boundary, h_target=h_target)


def trace_to_fourier(mesh: DiskMesh, nodal, N: int, smoothness: float) -> BoundaryField:
    """Project nodal boundary values to a zero-mean Fourier field.

    Coefficients are periodic trapezoid-rule integrals over the
    angle-parameterized boundary,

        f_n = (1/2pi) sum_k w_k f(theta_k) exp(-i n theta_k),

    with w_k = (theta_{k+1} - theta_{k-1})/2; the n = 0 component is
    discarded (mean removal is structural).

    Parameters
    ----------
    mesh : DiskMesh
    nodal : complex array, one value per boundary vertex
    N : int
        Truncation order; requires 2N + 1 <= number of boundary vertices.
    smoothness : float
        Sobolev tag attached to the result.
    """
    nodal = np.asarray(nodal, dtype=complex)
    nb = mesh.n_boundary
    if nodal.shape != (nb,):
        raise ConfigurationError(
            f"nodal data has shape {nodal.shape}, expected ({nb},) for this mesh"
        )
    if 2 * N + 1 > nb:
        raise ConfigurationError(
            f"truncation N={N} aliases on {nb} boundary vertices (need 2N+1 <= {nb})"
        )
    theta = mesh.boundary_angles
    gaps = np.diff(theta, append=theta[0] + 2 * np.pi)
    w = 0.5 * (gaps + np.roll(gaps, 1))
    modes = fourier_modes(N)
    E = np.exp(-1j * np.outer(modes, theta))
    coeffs = (E * w) @ nodal / (2 * np.pi)
    return BoundaryField(coeffs=coeffs, N=N, smoothness=smoothness)


def fourier_to_trace(field: BoundaryField, mesh: DiskMesh) -> np.ndarray:
    """Synthesize f(theta_k) = sum_n f_n exp(i n theta_k) at boundary vertices."""
    if 2 * field.N + 1 > mesh.n_boundary:
        raise ConfigurationError(
            f"field order N={field.N} exceeds boundary resolution "
            f"({mesh.n_boundary} vertices)"
        )
    theta = mesh.boundary_angles
    E = np.exp(1j * np.outer(theta, field.modes))
    return E @ field.coeffs


def save_mesh(mesh: DiskMesh, path) -> None:
    """Write the plain-text mesh format.

    Layout: header ``vertices <nv> triangles <nt> boundary <nb> h_target <h>``,
    then nv lines ``x y``, nt lines ``a b c``, nb lines of boundary indices.
    Coordinates use 17 significant digits and round-trip bit-exactly.
    """
    with open(path, "w") as fh:
        fh.write(
            f"vertices {mesh.n_vertices} triangles {len(mesh.triangles)} "
            f"boundary {mesh.n_boundary} h_target {mesh.h_target!r}\n"
        )
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        for k in mesh.boundary:
            fh.write(f"{k}\n")


def load_mesh(path) -> DiskMesh:
    """Read the plain-text mesh format written by :func:`save_mesh`."""
    try:
        fh = open(path)
    except FileNotFoundError:
        raise ConfigurationError(f"mesh file not found: {path}") from None
    with fh:
        header = fh.readline().split()
        if len(header) != 8 or header[0] != "vertices" or header[2] != "triangles" \
                or header[4] != "boundary" or header[6] != "h_target":
            raise ConfigurationError(f"malformed mesh header: {' '.join(header)}")
        nv, nt, nb = int(header[1]), int(header[3]), int(header[5])
        h_target = float(header[7])
        vertices = np.array(
            [[float(t) for t in fh.readline().split()] for _ in range(nv)]
        )
        triangles = np.array(
            [[int(t) for t in fh.readline().split()] for _ in range(nt)], dtype=int
        )
        boundary = np.array([int(fh.readline()) for _ in range(nb)], dtype=int)
    return DiskMesh(vertices=vertices, triangles=triangles, boundary=boundary, h_target=h_target)
