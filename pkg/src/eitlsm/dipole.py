"""Dipole singular solutions and auxiliary-circle layer potentials.

A unit dipole at y with direction a generates the free-space field
a . Psi(x - y) with Psi(r) = -(1/2pi) r/|r|^2; subtracting the background
Neumann correction yields the singular solution whose boundary trace drives
the sampling equation. The additive constant of the singular solution is
absorbed by working in zero-mean Fourier coordinates throughout.

Layer potentials live on an auxiliary circle of radius R > 1 enclosing the
body. The single layer with the logarithmic kernel is discretized by the
periodic trapezoid rule (geometrically convergent here, since the kernel
between the two circles is analytic); its boundary normal derivative maps
density samples to zero-mean boundary currents and is also available in
closed Fourier form with mode multiplier (1/2) R^(1-|k|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .forward import FemSystem, assemble_system
from .geometry import BoundaryField, DiskMesh, fourier_modes, trace_to_fourier
from .media import AdmittanceField, InclusionGeometry

__all__ = [
    "DipoleSpec",
    "AuxCircle",
    "dipole_field",
    "greens_function",
    "SingularTraceComputer",
    "singular_trace",
    "single_layer_interior",
    "single_layer_gradient",
    "layer_current_matrix",
    "layer_current_multipliers",
]


@dataclass
class DipoleSpec:
    """Dipole source location y (strictly interior) and unit direction."""

    y: tuple[float, float]
    direction: tuple[float, float]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        if np.hypot(*y) >= 1.0:
            raise ConfigurationError(f"dipole location {tuple(y)} is not interior")
        norm = np.hypot(*d)
        if norm == 0.0:
            raise ConfigurationError("dipole direction must be nonzero")
        self.y = (float(y[0]), float(y[1]))
        self.direction = (float(d[0] / norm), float(d[1] / norm))


@dataclass
class AuxCircle:
    """Quadrature circle of radius > 1 enclosing the body.

    ``count`` uniform nodes carry the density samples; an operator built for
    truncation N requires count >= 4N + 4.
    """

    radius: float = 2.0
    count: int = 128

    def __post_init__(self):
        if self.radius <= 1.0:
            raise ConfigurationError(f"auxiliary radius must exceed 1, got {self.radius}")
        if self.count < 4:
            raise ConfigurationError(f"need at least 4 quadrature nodes, got {self.count}")

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.count) / self.count

    @property
    def nodes(self) -> np.ndarray:
        ang = self.angles
        return self.radius * np.column_stack([np.cos(ang), np.sin(ang)])

    @property
    def weight(self) -> float:
        """Arc length per node (trapezoid weight)."""
        return 2.0 * np.pi * self.radius / self.count

    def require_order(self, N: int) -> None:
        if self.count < 4 * N + 4:
            raise ConfigurationError(
                f"{self.count} quadrature nodes are too few for truncation N={N} "
                f"(need >= {4 * N + 4})"
            )


def dipole_field(x, spec: DipoleSpec) -> float:
    """a . Psi(x - y) = -(1/2pi) a.(x - y)/|x - y|^2 at a single point."""
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(spec.y)
    r2 = float(d @ d)
    if r2 == 0.0:
        raise ConfigurationError("dipole field evaluated at its own singularity")
    return float(-(d @ np.asarray(spec.direction)) / (2.0 * np.pi * r2))


def greens_function(x, z) -> float:
    """Laplace Green's function (1/2pi) log(1/|x - z|)."""
    d = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    r = float(np.hypot(*d))
    if r == 0.0:
        raise ConfigurationError("Green's function evaluated at coincident points")
    return float(np.log(1.0 / r) / (2.0 * np.pi))


def _dipole_boundary_values(bpts: np.ndarray, ys: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """a . Psi(x - y) at boundary points for a batch of (y, a); shape (B, nb)."""
    d = bpts[None, :, :] - ys[:, None, :]
    r2 = np.einsum("bki,bki->bk", d, d)
    ad = np.einsum("bki,bi->bk", d, dirs)
    return -ad / (2.0 * np.pi * r2)


def _dipole_neumann_data(bpts: np.ndarray, ys: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Outward normal derivative of a . Psi(x - y) on the unit circle.

    With nu = x on |x| = 1 this is
    -(1/2pi) [ nu.a / r^2 - 2 (nu.(x-y)) (a.(x-y)) / r^4 ].
    """
    d = bpts[None, :, :] - ys[:, None, :]
    r2 = np.einsum("bki,bki->bk", d, d)
    nd = np.einsum("ki,bki->bk", bpts, d)
    ad = np.einsum("bki,bi->bk", d, dirs)
    na = np.einsum("ki,bi->bk", bpts, dirs)
    return -(na / r2 - 2.0 * nd * ad / r2**2) / (2.0 * np.pi)


class SingularTraceComputer:
    """Boundary traces of dipole singular solutions on a fixed mesh.

    Assembles and factorizes the background (gamma = I) system once; each
    trace then costs one back-substitution. ``trace_batch`` solves all
    requested dipoles in a single multi-column solve.
    """

    def __init__(self, mesh: DiskMesh, N: int, system: FemSystem | None = None):
        if 2 * N + 1 > mesh.n_boundary:
            raise ConfigurationError(
                f"N={N} needs 2N+1 <= {mesh.n_boundary} boundary vertices"
            )
        self.mesh = mesh
        self.N = N
        if system is None:
            background = AdmittanceField(InclusionGeometry(components=[]), [])
            system = assemble_system(mesh, background)
        elif not system.admittance.is_background():
            raise ConfigurationError("singular traces require the background system")
        self.system = system
        self._clearance = 2.0 * mesh.h_target

    def _check_interior(self, ys: np.ndarray) -> None:
        rad = np.hypot(ys[:, 0], ys[:, 1])
        limit = 1.0 - self._clearance
        if (rad > limit).any():
            worst = float(rad.max())
            raise ConfigurationError(
                f"dipole location at radius {worst:.4g} is closer than 2*h_target "
                f"= {self._clearance:.4g} to the boundary; the trace would be inaccurate"
            )

    def trace_batch(self, ys, dirs) -> np.ndarray:
        """Fourier coefficients of phi_y for each (y, direction); shape (B, 2N)."""
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        self._check_interior(ys)
        mesh = self.mesh
        bpts = mesh.vertices[mesh.boundary]
        g = _dipole_neumann_data(bpts, ys, dirs)
        g = g - g.mean(axis=1, keepdims=True)  # admissible (zero-mean) currents
        loads = np.stack(
            [self.system.neumann_load(row) for row in g.astype(complex)], axis=1
        )
        traces = self.system.solve(loads)[mesh.boundary].T
        w = _dipole_boundary_values(bpts, ys, dirs)
        phi = w - traces
        return np.stack(
            [trace_to_fourier(mesh, row, self.N, 0.5).coeffs for row in phi]
        )

    def trace(self, spec: DipoleSpec) -> BoundaryField:
        coeffs = self.trace_batch([spec.y], [spec.direction])[0]
        return BoundaryField(coeffs=coeffs, N=self.N, smoothness=0.5)


def singular_trace(mesh: DiskMesh, spec: DipoleSpec, N: int) -> BoundaryField:
    """Trace phi_y of the dipole singular solution, as a zero-mean field.

    Computes the dipole's Neumann data on the boundary analytically, removes
    its mean, corrects with the background solve, and projects the resulting
    boundary values to Fourier coefficients (smoothness +1/2). For repeated
    calls on one mesh use :class:`SingularTraceComputer` directly.
    """
    return SingularTraceComputer(mesh, N).trace(spec)


# ---------------------------------------------------------------------------
# Layer potentials on the auxiliary circle


def single_layer_interior(aux: AuxCircle, points) -> np.ndarray:
    """Matrix of the single layer at interior points: (S w)_p = sum_q G(x_p, z_q) w_q ds.

    Valid for targets off the auxiliary circle; realizes both the interior
    potential and (with targets on an inclusion boundary) the trace operator
    into the inclusion.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    nodes = aux.nodes
    d = points[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("pqi,pqi->pq", d, d)
    if (r2 < 1e-24).any():
        raise ConfigurationError("single-layer target coincides with a quadrature node")
    return (-0.5 * np.log(r2) / (2.0 * np.pi)) * aux.weight


def single_layer_gradient(aux: AuxCircle, points) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of the gradient of the single layer at interior points.

    Row p of the pair gives d/dx and d/dy of the potential at x_p as linear
    functionals of the density samples (grad_x G(x,z) = Psi(x - z)).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    nodes = aux.nodes
    d = points[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("pqi,pqi->pq", d, d)
    if (r2 < 1e-24).any():
        raise ConfigurationError("single-layer target coincides with a quadrature node")
    scale = -aux.weight / (2.0 * np.pi)
    return scale * d[..., 0] / r2, scale * d[..., 1] / r2


def layer_current_matrix(aux: AuxCircle, N: int, n_theta: int | None = None) -> np.ndarray:
    """Quadrature form of the boundary-current operator: density samples to
    zero-mean Fourier coefficients of the normal derivative on the unit circle.

    The kernel nu . grad_x G(x, z) is evaluated on a uniform boundary grid
    and projected by the trapezoid rule; the n = 0 row is structurally
    absent, consistent with the layer current having zero mean.
    """
    aux.require_order(N)
    if n_theta is None:
        n_theta = max(4 * N + 4, 256)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    xb = np.column_stack([np.cos(theta), np.sin(theta)])
    nodes = aux.nodes
    d = xb[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("pqi,pqi->pq", d, d)
    nd = np.einsum("pi,pqi->pq", xb, d)
    kernel = -(nd / r2) / (2.0 * np.pi) * aux.weight  # (n_theta, count)
    modes = fourier_modes(N)
    proj = np.exp(-1j * np.outer(modes, theta)) / n_theta
    return proj @ kernel


def layer_current_multipliers(aux: AuxCircle, N: int) -> np.ndarray:
    """Closed Fourier form of the boundary-current operator.

    Maps density Fourier modes to current modes diagonally: mode k with
    k != 0 carries the multiplier (1/2) R^(1-|k|); the constant density
    produces zero current. Returned as the (2N, count) matrix composed with
    the nodal DFT, so it acts on density samples exactly like the quadrature
    form (up to the trapezoid aliasing error).
    """
    aux.require_order(N)
    modes = fourier_modes(N)
    mult = 0.5 * aux.radius ** (1.0 - np.abs(modes).astype(float))
    # density samples -> density Fourier modes (trapezoid DFT on the circle)
    dft = np.exp(-1j * np.outer(modes, aux.angles)) / aux.count
    return mult[:, None] * dft
