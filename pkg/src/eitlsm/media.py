"""Admittance distributions gamma = I + h on inclusion supports.

An inclusion is a union of disks/ellipses strictly inside the unit disk,
each carrying a 2x2 complex symmetric perturbation h (constant or a
pointwise callable). The two model assumptions are verified numerically:

* coercivity  -- Re(z conj(zeta) . gamma(x) zeta) >= alpha |zeta|^2 for some
  unimodular z, checked by scanning z on a grid of the unit circle and
  taking the smallest eigenvalue of the Hermitian part of z * gamma(x);
* absorption  -- Im(conj(zeta) . h(x) zeta) <= -beta |zeta|^2 on an open
  subset of the inclusion, checked through the largest eigenvalue of Im h.

Scenario documents are JSON; parse errors name the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Disk",
    "Ellipse",
    "InclusionGeometry",
    "AdmittanceField",
    "evaluate_admittance",
    "check_coercivity",
    "check_absorption",
    "load_scenario",
    "parse_scenario",
]

_IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigurationError(f"disk radius must be positive, got {self.radius}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.einsum("...i,...i->...", d, d) < self.radius**2

    def bounding_radius(self) -> float:
        """Radius of the smallest origin-independent bounding circle."""
        return self.radius

    def outer_radius_from_origin(self) -> float:
        return float(np.hypot(*self.center)) + self.radius

    def sample_interior(self) -> np.ndarray:
        """Deterministic interior sample: center plus three scaled rings."""
        pts = [np.asarray(self.center, dtype=float)]
        for t in (0.3, 0.6, 0.9):
            ang = 2 * np.pi * np.arange(8) / 8
            ring = np.column_stack([np.cos(ang), np.sin(ang)]) * (t * self.radius)
            pts.append(ring + self.center)
        return np.vstack(pts)


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    tilt: float = 0.0

    def __post_init__(self):
        a, b = self.semi_axes
        if a <= 0 or b <= 0:
            raise ConfigurationError(f"ellipse semi-axes must be positive, got {self.semi_axes}")

    def _local(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        c, s = np.cos(self.tilt), np.sin(self.tilt)
        return np.stack([c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1]], axis=-1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        q = self._local(points)
        a, b = self.semi_axes
        return (q[..., 0] / a) ** 2 + (q[..., 1] / b) ** 2 < 1.0

    def bounding_radius(self) -> float:
        return max(self.semi_axes)

    def outer_radius_from_origin(self) -> float:
        return float(np.hypot(*self.center)) + max(self.semi_axes)

    def sample_interior(self) -> np.ndarray:
        c, s = np.cos(self.tilt), np.sin(self.tilt)
        rot = np.array([[c, -s], [s, c]])
        a, b = self.semi_axes
        pts = [np.asarray(self.center, dtype=float)]
        for t in (0.3, 0.6, 0.9):
            ang = 2 * np.pi * np.arange(8) / 8
            ring = np.column_stack([a * np.cos(ang), b * np.sin(ang)]) * t
            pts.append(ring @ rot.T + self.center)
        return np.vstack(pts)


Shape = Disk | Ellipse


@dataclass
class InclusionGeometry:
    """Union of inclusion components with positive clearance from the boundary.

    Invariants (enforced at construction): every component closure lies
    strictly inside the unit disk, and the components' bounding circles are
    pairwise disjoint (a conservative separation test).
    """

    components: list[Shape] = field(default_factory=list)

    def __post_init__(self):
        for k, shape in enumerate(self.components):
            if shape.outer_radius_from_origin() >= 1.0:
                raise ConfigurationError(
                    f"inclusion component {k} touches or crosses the unit circle "
                    f"(outer radius {shape.outer_radius_from_origin():.6g})"
                )
        for i in range(len(self.components)):
            for j in range(i + 1, len(self.components)):
                a, b = self.components[i], self.components[j]
                gap = np.hypot(*(np.asarray(a.center) - np.asarray(b.center)))
                if gap <= a.bounding_radius() + b.bounding_radius():
                    raise ConfigurationError(
                        f"inclusion components {i} and {j} have overlapping bounding circles"
                    )

    @property
    def clearance(self) -> float:
        """Minimum distance from the components' bounding circles to the unit circle."""
        if not self.components:
            return 1.0
        return 1.0 - max(s.outer_radius_from_origin() for s in self.components)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1], dtype=bool)
        for shape in self.components:
            out |= shape.contains(points)
        return out


def _as_h_matrix(h, where: str) -> np.ndarray:
    m = np.asarray(h, dtype=complex)
    if m.shape != (2, 2):
        raise ConfigurationError(f"{where}: h must be a 2x2 matrix, got shape {m.shape}")
    if abs(m[0, 1] - m[1, 0]) > 1e-12 * max(1.0, float(np.abs(m).max())):
        raise ConfigurationError(f"{where}: h must be symmetric (h[0,1] != h[1,0])")
    return m


class AdmittanceField:
    """Admittance gamma(x) = I + h(x) chi_D(x) with anisotropic complex h.

    Parameters
    ----------
    geometry : InclusionGeometry
    perturbations : list, one entry per geometry component
        Each entry is a constant 2x2 complex symmetric matrix or a callable
        point -> 2x2 matrix (C^1 smoothness is the caller's responsibility).
    absorption_region : list of shapes or None
        Open subset of D on which the absorption assumption is claimed;
        defaults to the whole inclusion.
    """

    def __init__(self, geometry: InclusionGeometry, perturbations, absorption_region=None):
        if len(perturbations) != len(geometry.components):
            raise ConfigurationError(
                f"{len(perturbations)} perturbation entries for "
                f"{len(geometry.components)} inclusion components"
            )
        self.geometry = geometry
        self.perturbations = []
        for k, h in enumerate(perturbations):
            if callable(h):
                self.perturbations.append(h)
            else:
                self.perturbations.append(_as_h_matrix(h, f"component {k}"))
        self.absorption_region = absorption_region

    def is_background(self) -> bool:
        return not self.geometry.components

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """gamma at many points, shape (npts, 2, 2); no domain check."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.broadcast_to(_IDENTITY, (len(points), 2, 2)).copy()
        for shape, h in zip(self.geometry.components, self.perturbations):
            mask = shape.contains(points)
            if not mask.any():
                continue
            if callable(h):
                for idx in np.nonzero(mask)[0]:
                    out[idx] += _as_h_matrix(h(points[idx]), "callable perturbation")
            else:
                out[mask] += h
        return out

    def absorption_sample_points(self) -> np.ndarray:
        """Deterministic sample of the absorption region (empty if no region)."""
        region = self.absorption_region
        if region is None:
            region = self.geometry.components
        if not region:
            return np.zeros((0, 2))
        return np.vstack([s.sample_interior() for s in region])


def evaluate_admittance(fld: AdmittanceField, x) -> np.ndarray:
    """gamma(x) = I + h(x) if x lies in the inclusion, else I.

    Raises ConfigurationError when |x| > 1 (outside the body).
    """
    x = np.asarray(x, dtype=float)
    if np.hypot(x[0], x[1]) > 1.0 + 1e-12:
        raise ConfigurationError(f"point {tuple(x)} lies outside the unit disk")
    return fld.evaluate_batch(x[None, :])[0]


def _hermitian_eigmin(mats: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of 2x2 Hermitian matrices, closed form."""
    a = mats[..., 0, 0].real
    d = mats[..., 1, 1].real
    b = mats[..., 0, 1]
    disc = np.sqrt(((a - d) / 2) ** 2 + np.abs(b) ** 2)
    return (a + d) / 2 - disc


def _hermitian_eigmax(mats: np.ndarray) -> np.ndarray:
    a = mats[..., 0, 0].real
    d = mats[..., 1, 1].real
    b = mats[..., 0, 1]
    disc = np.sqrt(((a - d) / 2) ** 2 + np.abs(b) ** 2)
    return (a + d) / 2 + disc


def check_coercivity(fld: AdmittanceField, sample_points, z_grid_size: int = 64) -> dict:
    """Scan unimodular z for Re(z conj(zeta) . gamma zeta) >= alpha |zeta|^2.

    For every z = exp(i phi_k) on a uniform grid, alpha(z) is the minimum
    over the sample points (plus the identity background, which is present
    in any admissible body) of the smallest eigenvalue of the Hermitian part
    of z * gamma(x). Returns the best candidate.

    Returns
    -------
    dict with keys ``holds`` (alpha > 0), ``alpha`` and ``z``.
    """
    if z_grid_size < 8:
        raise ConfigurationError(f"z_grid_size must be >= 8, got {z_grid_size}")
    sample_points = np.atleast_2d(np.asarray(sample_points, dtype=float))
    gam = fld.evaluate_batch(sample_points)
    zs = np.exp(2j * np.pi * np.arange(z_grid_size) / z_grid_size)
    best = {"holds": False, "alpha": -np.inf, "z": complex(1.0)}
    for z in zs:
        zg = z * gam
        herm = 0.5 * (zg + np.conj(np.swapaxes(zg, -1, -2)))
        alpha = min(float(_hermitian_eigmin(herm).min()), float(z.real))
        if alpha > best["alpha"]:
            best = {"holds": alpha > 0.0, "alpha": alpha, "z": complex(z)}
    return best


def check_absorption(fld: AdmittanceField, sample_points=None) -> dict:
    """Verify Im(conj(zeta) . h zeta) <= -beta |zeta|^2 on the absorption region.

    beta is minus the largest eigenvalue of Im h (a real symmetric matrix
    for symmetric h) over the sample points. With no sample points the
    verdict is negative and carries an explanatory ``reason``.
    """
    if sample_points is None:
        sample_points = fld.absorption_sample_points()
    sample_points = np.asarray(sample_points, dtype=float).reshape(-1, 2)
    if len(sample_points) == 0:
        return {"holds": False, "beta": 0.0, "reason": "absorption region is empty"}
    gam = fld.evaluate_batch(sample_points)
    h_im = np.imag(gam - _IDENTITY)
    beta = -float(_hermitian_eigmax(h_im).max())
    return {"holds": beta > 0.0, "beta": beta}


# ---------------------------------------------------------------------------
# Scenario documents


def _complex_from_json(v, where: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigurationError(f"{where}: expected a number or [re, im] pair, got {v!r}")


def _shape_from_json(spec, where: str) -> Shape:
    if not isinstance(spec, dict):
        raise ConfigurationError(f"{where}: expected an object, got {type(spec).__name__}")
    kind = spec.get("shape")
    known = {
        "disk": {"shape", "center", "radius"},
        "ellipse": {"shape", "center", "semi_axes", "tilt"},
    }
    if kind not in known:
        raise ConfigurationError(f"{where}.shape: expected 'disk' or 'ellipse', got {kind!r}")
    extra = set(spec) - known[kind] - {"h"}
    if extra:
        raise ConfigurationError(f"{where}: unknown keys {sorted(extra)}")
    try:
        center = (float(spec["center"][0]), float(spec["center"][1]))
    except (KeyError, TypeError, IndexError, ValueError):
        raise ConfigurationError(f"{where}.center: expected [x, y]") from None
    if kind == "disk":
        if "radius" not in spec:
            raise ConfigurationError(f"{where}.radius: missing")
        return Disk(center=center, radius=float(spec["radius"]))
    if "semi_axes" not in spec:
        raise ConfigurationError(f"{where}.semi_axes: missing")
    axes = spec["semi_axes"]
    return Ellipse(center=center, semi_axes=(float(axes[0]), float(axes[1])),
                   tilt=float(spec.get("tilt", 0.0)))


def parse_scenario(doc: dict) -> AdmittanceField:
    """Build an AdmittanceField from a scenario document (parsed JSON).

    Schema::

        {"inclusions": [{"shape": "disk", "center": [x, y], "radius": r,
                         "h": [[h11, h12], [h21, h22]]}, ...],
         "absorption_region": {"components": [indices]}          # optional
                            | {"shapes": [shape objects]}}

    Every h entry holds four complex numbers written as [re, im] pairs
    (plain numbers are taken as real); h21 must equal h12.
    """
    if not isinstance(doc, dict):
        raise ConfigurationError("scenario: top level must be an object")
    extra = set(doc) - {"inclusions", "absorption_region"}
    if extra:
        raise ConfigurationError(f"scenario: unknown keys {sorted(extra)}")
    inclusions = doc.get("inclusions", [])
    if not isinstance(inclusions, list):
        raise ConfigurationError("scenario.inclusions: expected a list")
    shapes, perts = [], []
    for k, entry in enumerate(inclusions):
        where = f"inclusions[{k}]"
        shapes.append(_shape_from_json(entry, where))
        if "h" not in entry:
            raise ConfigurationError(f"{where}.h: missing")
        hm = entry["h"]
        if not (isinstance(hm, list) and len(hm) == 2
                and all(isinstance(r, list) and len(r) == 2 for r in hm)):
            raise ConfigurationError(f"{where}.h: expected a 2x2 matrix")
        mat = np.array(
            [[_complex_from_json(hm[i][j], f"{where}.h[{i}][{j}]") for j in range(2)]
             for i in range(2)]
        )
        if mat[0, 1] != mat[1, 0]:
            raise ConfigurationError(f"{where}.h: not symmetric (h[0][1] != h[1][0])")
        perts.append(mat)
    geometry = InclusionGeometry(components=shapes)

    region = None
    spec = doc.get("absorption_region")
    if spec is not None:
        if not isinstance(spec, dict):
            raise ConfigurationError("scenario.absorption_region: expected an object")
        extra = set(spec) - {"components", "shapes"}
        if extra:
            raise ConfigurationError(f"scenario.absorption_region: unknown keys {sorted(extra)}")
        if ("components" in spec) == ("shapes" in spec):
            raise ConfigurationError(
                "scenario.absorption_region: give exactly one of 'components' or 'shapes'"
            )
        if "components" in spec:
            try:
                region = [geometry.components[int(i)] for i in spec["components"]]
            except (IndexError, ValueError):
                raise ConfigurationError(
                    "scenario.absorption_region.components: bad component index"
                ) from None
        else:
            region = [_shape_from_json(s, f"scenario.absorption_region.shapes[{j}]")
                      for j, s in enumerate(spec["shapes"])]
    return AdmittanceField(geometry, perts, absorption_region=region)


def load_scenario(path) -> AdmittanceField:
    """Parse a scenario JSON file; errors cite the offending field."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario {path}: invalid JSON ({exc})") from None
    return parse_scenario(doc)
