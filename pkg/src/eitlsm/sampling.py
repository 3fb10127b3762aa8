"""Sobolev-weighted Tikhonov inversion, Morozov selection and the grid sweep.

The sampling equation (Lambda - Lambda0) psi_y = phi_y is solved in weighted
coordinates: with W_s = diag(|n|^s) the functional

    ||A psi - phi||_{1/2}^2 + alpha ||psi||_{-1/2}^2

becomes an ordinary least-squares problem for the matrix W_{1/2} A W_{1/2},
whose SVD is computed once per data set and reused by every sweep point.
The Morozov parameter alpha(delta) is found by bisection in log(alpha),
using the strict monotonicity of the residual.

The indicator I(y) = ||psi_y^delta||_{-1/2} is small where the dipole trace
is (approximately) in the range of the data operator - i.e. inside the
inclusion - and blows up outside; thresholding it yields the support
estimate. Both the psi-norm and the selected alpha are recorded, since it
is genuinely open which makes the better cut-off.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dipole import AuxCircle, SingularTraceComputer, layer_current_matrix, layer_current_multipliers
from .errors import ConfigurationError, EstimationError
from .forward import NdMap
from .geometry import BoundaryField, DiskMesh, fourier_modes

__all__ = [
    "RelativeData",
    "MorozovResult",
    "IndicatorMap",
    "DensityResult",
    "make_relative_data",
    "tikhonov_solve",
    "morozov_alpha",
    "grid_points",
    "indicator_map",
    "estimate_support",
    "reconstruct_via_density",
    "write_indicator_csv",
    "write_mask_csv",
    "write_indicator_pgm",
    "DEFAULT_CUTOFF_MULTIPLIER",
]

# Calibrated on the reference inclusion scenario (see decision record in the
# repository README): the band [min I, c min I] must cover the whole of the
# inclusion's indicator range while excluding exterior points.
DEFAULT_CUTOFF_MULTIPLIER = 70.0

MOROZOV_RTOL = 1e-8


class RelativeData:
    """Difference map Lambda - Lambda0 with its Sobolev-weighted singular system.

    ``weighted`` holds W_{1/2} A W_{1/2}; its SVD (U, s, Vh) is cached and
    shared read-only by all solves. Immutable after construction.
    """

    def __init__(self, difference: np.ndarray, N: int):
        difference = np.asarray(difference, dtype=complex)
        if difference.shape != (2 * N, 2 * N):
            raise ConfigurationError(
                f"difference matrix shape {difference.shape} does not match N={N}"
            )
        self.N = N
        self.modes = fourier_modes(N)
        self.matrix = difference
        self.weights = np.abs(self.modes).astype(float) ** 0.5
        self.weighted = self.weights[:, None] * difference * self.weights[None, :]
        u, s, vh = np.linalg.svd(self.weighted)
        self.U, self.singular_values, self.Vh = u, s, vh

    def weighted_rhs(self, rhs: BoundaryField) -> np.ndarray:
        if rhs.N != self.N:
            raise ConfigurationError(f"rhs order {rhs.N} does not match data order {self.N}")
        return self.weights * rhs.coeffs

    def residual_floor(self, phit: np.ndarray) -> float:
        """Limit of the residual as alpha -> 0+ over the truncated system."""
        beta = self.U.conj().T @ phit
        null = self.singular_values <= 0.0
        return float(np.linalg.norm(beta[null]))


def make_relative_data(measured: NdMap, background: NdMap) -> RelativeData:
    """Assemble Lambda - Lambda0 and its weighted singular system."""
    if measured.N != background.N:
        raise ConfigurationError(
            f"truncation mismatch: measured N={measured.N}, background N={background.N}"
        )
    if (measured.source_smoothness, measured.target_smoothness) != (
        background.source_smoothness,
        background.target_smoothness,
    ):
        raise ConfigurationError("smoothness tags of the two maps do not match")
    return RelativeData(measured.matrix - background.matrix, measured.N)


def _solve_weighted(data: RelativeData, phit: np.ndarray, alpha: float):
    """Tikhonov minimizer in weighted coordinates; returns (psit, residual)."""
    s = data.singular_values
    beta = data.U.conj().T @ phit
    psit = data.Vh.conj().T @ ((s / (s**2 + alpha)) * beta)
    residual = float(np.linalg.norm((alpha / (s**2 + alpha)) * beta))
    return psit, residual


def _unweight(data: RelativeData, psit: np.ndarray) -> BoundaryField:
    return BoundaryField(data.weights * psit, data.N, smoothness=-0.5)


def tikhonov_solve(data: RelativeData, rhs: BoundaryField, alpha: float) -> BoundaryField:
    """Unique minimizer of the weighted Tikhonov functional (alpha > 0).

    The returned field has smoothness -1/2 and its Sobolev norm equals the
    Euclidean norm of the weighted solution by construction.
    """
    if alpha <= 0.0:
        raise ConfigurationError(f"regularization parameter must be positive, got {alpha}")
    psit, _ = _solve_weighted(data, data.weighted_rhs(rhs), alpha)
    return _unweight(data, psit)


@dataclass
class MorozovResult:
    alpha: float
    psi: BoundaryField
    residual: float
    delta: float
    flag: str  # "ok" | "infeasible-low" | "infeasible-high"
    residual_floor: float
    residual_ceiling: float

    @property
    def feasible(self) -> bool:
        return self.flag == "ok"


def morozov_alpha(data: RelativeData, rhs: BoundaryField, delta: float) -> MorozovResult:
    """Select alpha so that the residual matches the discrepancy level delta.

    residual(alpha) increases strictly from the alpha -> 0 floor to ||rhs||;
    bisection on log(alpha) brings it within MOROZOV_RTOL of delta. Outside
    the feasible window the result is flagged: below the floor the alpha -> 0
    (minimum-norm) solution is returned, at or above ||rhs|| the zero current
    already satisfies the constraint.
    """
    if delta <= 0.0:
        raise ConfigurationError(f"discrepancy level must be positive, got {delta}")
    phit = data.weighted_rhs(rhs)
    ceiling = float(np.linalg.norm(phit))
    floor = data.residual_floor(phit)

    if delta >= ceiling:
        psi = _unweight(data, np.zeros_like(phit))
        return MorozovResult(math.inf, psi, ceiling, delta, "infeasible-high", floor, ceiling)
    if delta <= floor:
        s = data.singular_values
        beta = data.U.conj().T @ phit
        pos = s > 0.0
        psit = data.Vh.conj().T[:, pos] @ (beta[pos] / s[pos])
        return MorozovResult(0.0, _unweight(data, psit), floor, delta, "infeasible-low",
                             floor, ceiling)

    s1 = float(data.singular_values[0])
    hi = max(s1**2, 1.0)
    _, r_hi = _solve_weighted(data, phit, hi)
    while r_hi < delta:
        hi *= 16.0
        _, r_hi = _solve_weighted(data, phit, hi)
    lo = hi
    _, r_lo = _solve_weighted(data, phit, lo)
    while r_lo > delta:
        lo /= 16.0
        if lo < 1e-300:
            break
        _, r_lo = _solve_weighted(data, phit, lo)

    alpha = math.sqrt(lo * hi)
    for _ in range(300):
        alpha = math.sqrt(lo * hi)
        psit, res = _solve_weighted(data, phit, alpha)
        if abs(res - delta) <= MOROZOV_RTOL * delta:
            break
        if res < delta:
            lo = alpha
        else:
            hi = alpha
    psit, res = _solve_weighted(data, phit, alpha)
    return MorozovResult(alpha, _unweight(data, psit), res, delta, "ok", floor, ceiling)


# ---------------------------------------------------------------------------
# Grid sweep


_DIRECTION_SETS = {
    "max-xy": ((1.0, 0.0), (0.0, 1.0)),
    "x": ((1.0, 0.0),),
    "y": ((0.0, 1.0),),
}


@dataclass(eq=False)
class IndicatorMap:
    """Per-point sweep results on a square grid clipped to |y| <= r_max."""

    points: np.ndarray  # (P, 2)
    indicator: np.ndarray  # (P,)  direction-combined ||psi||_{-1/2}
    alpha: np.ndarray  # (P,)  selected regularization parameter
    feasible: np.ndarray  # (P,) bool
    residual: np.ndarray  # (P,) achieved residual
    delta: np.ndarray  # (P,) per-point discrepancy level
    spacing: float
    r_max: float
    epsilon: float
    directions: str
    N: int

    def __len__(self) -> int:
        return len(self.points)


def grid_points(spacing: float, r_max: float) -> np.ndarray:
    """Square lattice of pitch ``spacing`` clipped to the disk |y| <= r_max."""
    if spacing <= 0.0:
        raise ConfigurationError(f"grid spacing must be positive, got {spacing}")
    k = int(math.floor(r_max / spacing + 1e-9))
    pts = []
    for i in range(-k, k + 1):
        for j in range(-k, k + 1):
            x, y = i * spacing, j * spacing
            if math.hypot(x, y) <= r_max + 1e-12:
                pts.append((x, y))
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def indicator_map(data: RelativeData, mesh: DiskMesh, grid_spec: dict, delta_rule: dict,
                  directions: str = "max-xy", threads: int = 1,
                  trace_computer: SingularTraceComputer | None = None) -> IndicatorMap:
    """Sweep the sampling grid: Morozov-regularized solve per point and direction.

    Parameters
    ----------
    data : RelativeData
    mesh : DiskMesh
        Carries the background system for the dipole traces.
    grid_spec : dict with keys ``spacing`` and ``r_max`` (r_max <= 0.9)
    delta_rule : dict with key ``epsilon``; per point delta = epsilon * ||phi_y||_{1/2}
    directions : "max-xy" (default), "x" or "y"
        The indicator is the maximum of ||psi||_{-1/2} over the listed dipole
        directions; alpha and feasibility follow the maximizing direction.
    threads : int
        Worker threads for the per-point solves (results are ordered, so the
        output is independent of the thread count).
    """
    try:
        spacing = float(grid_spec["spacing"])
        r_max = float(grid_spec["r_max"])
    except KeyError as exc:
        raise ConfigurationError(f"grid_spec is missing key {exc}") from None
    try:
        epsilon = float(delta_rule["epsilon"])
    except KeyError:
        raise ConfigurationError("delta_rule is missing key 'epsilon'") from None
    if r_max > 0.9:
        raise ConfigurationError(f"r_max must be <= 0.9 (trace accuracy margin), got {r_max}")
    if epsilon <= 0.0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    if directions not in _DIRECTION_SETS:
        raise ConfigurationError(
            f"unknown direction strategy {directions!r}; choose from {sorted(_DIRECTION_SETS)}"
        )
    dirs = _DIRECTION_SETS[directions]
    pts = grid_points(spacing, r_max)
    n_pts = len(pts)
    out = IndicatorMap(
        points=pts,
        indicator=np.zeros(n_pts),
        alpha=np.zeros(n_pts),
        feasible=np.zeros(n_pts, dtype=bool),
        residual=np.zeros(n_pts),
        delta=np.zeros(n_pts),
        spacing=spacing,
        r_max=r_max,
        epsilon=epsilon,
        directions=directions,
        N=data.N,
    )
    if n_pts == 0:
        return out

    if trace_computer is None:
        trace_computer = SingularTraceComputer(mesh, data.N)
    ys = np.repeat(pts, len(dirs), axis=0)
    ds = np.tile(np.asarray(dirs, dtype=float), (n_pts, 1))
    traces = trace_computer.trace_batch(ys, ds)  # (P * ndir, 2N)

    def sweep_point(k: int):
        best = None
        for d in range(len(dirs)):
            phi = BoundaryField(traces[k * len(dirs) + d], data.N, smoothness=0.5)
            delta = epsilon * phi.sobolev_norm()
            res = morozov_alpha(data, phi, delta)
            norm = res.psi.sobolev_norm()
            if best is None or norm > best[0]:
                best = (norm, res)
        return best

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(sweep_point, range(n_pts)))
    else:
        results = [sweep_point(k) for k in range(n_pts)]

    for k, (norm, res) in enumerate(results):
        out.indicator[k] = norm
        out.alpha[k] = res.alpha
        out.feasible[k] = res.feasible
        out.residual[k] = res.residual
        out.delta[k] = res.delta
    return out


def estimate_support(imap: IndicatorMap, rule: str = "multiplier",
                     c: float = DEFAULT_CUTOFF_MULTIPLIER, q: float = 0.1,
                     use_alpha: bool = False) -> np.ndarray:
    """Binary inside/outside mask over the sweep grid.

    The default rule marks y as inside when I(y) <= c * min I over feasible
    points (the alternative thresholds at the q-quantile of the feasible
    indicator values). With ``use_alpha`` the same band logic is applied to
    the regularization parameter, which is large inside: alpha(y) >= max/c.
    Infeasible points are never marked inside.
    """
    feasible = imap.feasible
    if len(imap) == 0 or not feasible.any():
        raise EstimationError("no feasible sweep point; cannot estimate the support")
    values = imap.alpha if use_alpha else imap.indicator
    if rule == "multiplier":
        if c < 1.0:
            raise ConfigurationError(f"cut-off multiplier must be >= 1, got {c}")
        if use_alpha:
            mask = values >= values[feasible].max() / c
        else:
            mask = values <= c * values[feasible].min()
    elif rule == "quantile":
        if not (0.0 < q < 1.0):
            raise ConfigurationError(f"quantile must lie in (0, 1), got {q}")
        if use_alpha:
            mask = values >= np.quantile(values[feasible], 1.0 - q)
        else:
            mask = values <= np.quantile(values[feasible], q)
    else:
        raise ConfigurationError(f"unknown cut-off rule {rule!r}")
    return mask & feasible


@dataclass(eq=False)
class DensityResult:
    omega: np.ndarray  # density samples on the auxiliary circle
    psi: BoundaryField  # induced boundary current L omega (smoothness -1/2)
    residual: float  # ||A L omega - phi||_{1/2}
    omega_norm: float  # ||omega||_{L2(dOmega)}


def reconstruct_via_density(data: RelativeData, aux: AuxCircle, rhs: BoundaryField,
                            alpha: float, form: str = "quadrature") -> DensityResult:
    """Tikhonov solve parameterized through the auxiliary-circle density.

    Minimizes ||A L omega - phi||_{1/2}^2 + alpha ||omega||_{L2(dOmega)}^2
    over the density samples; the induced current L omega plays the role of
    psi. ``form`` selects the quadrature kernel (default) or the closed
    Fourier multipliers for the layer operator.
    """
    if alpha <= 0.0:
        raise ConfigurationError(f"regularization parameter must be positive, got {alpha}")
    if form == "quadrature":
        lmat = layer_current_matrix(aux, data.N)
    elif form == "fourier":
        lmat = layer_current_multipliers(aux, data.N)
    else:
        raise ConfigurationError(f"unknown layer-operator form {form!r}")
    phit = data.weighted_rhs(rhs)
    design = (data.weights[:, None] * data.matrix) @ lmat  # omega -> weighted residual space
    gram = design.conj().T @ design + (alpha * aux.weight) * np.eye(aux.count)
    omega = np.linalg.solve(gram, design.conj().T @ phit)
    residual = float(np.linalg.norm(design @ omega - phit))
    psi = BoundaryField(lmat @ omega, data.N, smoothness=-0.5)
    return DensityResult(
        omega=omega,
        psi=psi,
        residual=residual,
        omega_norm=float(np.linalg.norm(omega) * math.sqrt(aux.weight)),
    )


# ---------------------------------------------------------------------------
# Output files


def write_indicator_csv(imap: IndicatorMap, path) -> None:
    """CSV with header x,y,indicator,alpha,feasible (17 significant digits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "indicator", "alpha", "feasible"])
        for k in range(len(imap)):
            writer.writerow([
                f"{imap.points[k, 0]:.17g}",
                f"{imap.points[k, 1]:.17g}",
                f"{imap.indicator[k]:.17g}",
                f"{imap.alpha[k]:.17g}",
                int(imap.feasible[k]),
            ])


def write_mask_csv(imap: IndicatorMap, mask: np.ndarray, path) -> None:
    """CSV with header x,y,inside."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "inside"])
        for k in range(len(imap)):
            writer.writerow([
                f"{imap.points[k, 0]:.17g}",
                f"{imap.points[k, 1]:.17g}",
                int(mask[k]),
            ])


def write_indicator_pgm(imap: IndicatorMap, path) -> None:
    """ASCII portable graymap of log10 I(y) for visual inspection.

    Bright pixels mark large indicator values (exterior points); grid cells
    outside the sweep disk or infeasible render black. The scaling is
    deterministic (min/max of the finite feasible values).
    """
    spacing, r_max = imap.spacing, imap.r_max
    k = int(math.floor(r_max / spacing + 1e-9))
    size = 2 * k + 1
    img = np.zeros((size, size), dtype=int)
    vals = imap.indicator[imap.feasible & (imap.indicator > 0)]
    if len(vals) > 0:
        lo, hi = math.log10(vals.min()), math.log10(vals.max())
        span = hi - lo if hi > lo else 1.0
        for p, ind, feas in zip(imap.points, imap.indicator, imap.feasible):
            if not feas or ind <= 0:
                continue
            col = int(round(p[0] / spacing)) + k
            row = k - int(round(p[1] / spacing))
            level = (math.log10(ind) - lo) / span
            img[row, col] = 1 + int(round(level * 254))
    with open(path, "w") as fh:
        fh.write(f"P2\n{size} {size}\n255\n")
        for row in img:
            fh.write(" ".join(str(v) for v in row) + "\n")
