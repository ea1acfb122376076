"""Deterministic residual bounds for the kernel-EDMD surrogate and their validation.

The residual ``r(x, u)`` of the bilinear surrogate is bounded by

    c_x |x| + c_u |u| + c_xx |x|^2 + c_xu |x||u| + c_uu |u|^2

with coefficients assembled from system constants, kernel quantities, the
fill distance and the sampling period. ``C1`` and ``C2`` are domain
constants without a closed form; they are supplied by the caller or
calibrated against measured residuals.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import TripletSet, fmt, generate
from .errors import ConfigError, ExcitationError
from .kernel import KernelSpec, estimate_D_phi, kernel_matrix, rkhs_feature_norms
from .regress import fit_all, perturbation_gap
from .surrogate import BilinearSurrogate, build_kedmd, residual
from .system import ControlAffineSystem, SamplingConfig, SystemConstants, estimate_constants


@dataclass(frozen=True)
class BoundConstants:
    c_x: float
    c_u: float
    c_xx: float
    c_xu: float
    c_uu: float
    C1: float
    C2: float
    C3: float
    inputs: dict = field(default_factory=dict, compare=False)

    def coefficients(self) -> dict:
        return {k: getattr(self, k) for k in ("c_x", "c_u", "c_xx", "c_xu", "c_uu")}

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ProportionalBound:
    c_tilde_x: float
    c_tilde_u: float

    def __call__(self, x, u):
        return self.c_tilde_x * _norms(x) + self.c_tilde_u * _norms(u)


def compute_C3(constants: SystemConstants, excitation) -> float:
    """``0.5 (L_f x_bar + G_bar u_bar)(L_f + L_G u_bar) max_j sqrt(d_j) / sigma_min_j``.

    ``excitation`` is an iterable of ``(d_j, sigma_min)`` pairs.
    """
    excitation = list(excitation)
    if not excitation:
        raise ValueError("no excitation data")
    worst = 0.0
    for d_j, smin in excitation:
        if not smin > 0:
            raise ExcitationError(f"sigma_min = {smin} violates the input rank condition")
        worst = max(worst, math.sqrt(d_j) / smin)
    c = constants
    return 0.5 * (c.L_f * c.x_bar + c.G_bar * c.u_bar) * (c.L_f + c.L_G * c.u_bar) * worst


def excitation_of(triplets: list[TripletSet]) -> list[tuple[int, float]]:
    return [(t.d_j, t.sigma_min) for t in triplets]


def compute_constants(
    system_constants: SystemConstants,
    *,
    excitation,
    D_phi: float,
    phi_norm: float,
    Kinv_norm: float,
    h_X: float,
    s: int,
    dt: float,
    d: int,
    m: int,
    C1: float | None = None,
    C2: float | None = None,
    h0: float | None = None,
) -> BoundConstants:
    if C1 is None or C2 is None:
        raise ConfigError(
            "bound constants C1 and C2 are required; supply them or calibrate C1 via validate_empirically"
        )
    if C1 < 0 or C2 < 0:
        raise ValueError("C1 and C2 must be nonnegative")
    if h0 is not None and h_X > h0:
        raise ValueError(f"fill distance {h_X} exceeds the declared h0 = {h0}")
    excitation = list(excitation)
    sc = system_constants
    C3 = compute_C3(sc, excitation)
    proj = C1 * h_X ** (s - 0.5) * phi_norm
    dt2 = dt * dt
    sd = math.sqrt(d)
    c_x = sc.u_tilde * (proj + sd * dt2 * C2 * C3 * Kinv_norm)
    c_u = dt2 * (math.sqrt(m * d) * C2 * C3 * Kinv_norm + sd * 0.5 * D_phi * sc.G_bar**2)
    c_xu = math.sqrt(m) * proj + 2.0 * sd * dt2 * D_phi * sc.L_f * sc.G_bar
    c_xx = sd * dt2 * 0.5 * D_phi * sc.L_f**2 * (1.0 + sc.u_tilde + sc.u_one_max)
    c_uu = sd * dt2 * 0.5 * D_phi * sc.G_bar**2
    inputs = dict(sc.to_dict())
    inputs.update(
        D_phi=D_phi,
        phi_norm=phi_norm,
        Kinv_norm=Kinv_norm,
        h_X=h_X,
        s=s,
        dt=dt,
        d=d,
        m=m,
        h0=h0,
        d_j=[int(e[0]) for e in excitation],
        sigma_min=[float(e[1]) for e in excitation],
        matrix_norm="spectral",
    )
    return BoundConstants(c_x, c_u, c_xx, c_xu, c_uu, float(C1), float(C2), C3, inputs)


def constants_for(
    surrogate: BilinearSurrogate,
    triplets: list[TripletSet],
    system: ControlAffineSystem,
    sampling: SamplingConfig,
    h_X: float,
    C1: float | None = 1.0,
    C2: float | None = 1.0,
    h0: float | None = None,
    grid_resolution: int = 2001,
    system_constants: SystemConstants | None = None,
) -> BoundConstants:
    """Gather every bound ingredient for a fitted surrogate and evaluate the coefficients."""
    sc = system_constants or estimate_constants(system, grid_resolution)
    kernel = surrogate.kernel
    D_phi = estimate_D_phi(kernel, surrogate.centers, system.state_box, grid_resolution).value
    _, phi_norm = rkhs_feature_norms(kernel, surrogate.centers)
    Kinv = kernel_matrix(kernel, surrogate.centers).inverse_norm
    return compute_constants(
        sc,
        excitation=excitation_of(triplets),
        D_phi=D_phi,
        phi_norm=phi_norm,
        Kinv_norm=Kinv,
        h_X=h_X,
        s=kernel.s,
        dt=sampling.dt,
        d=surrogate.centers.shape[0],
        m=system.m,
        C1=C1,
        C2=C2,
        h0=h0,
    )


def _norms(v) -> np.ndarray | float:
    a = np.asarray(v, dtype=float)
    if a.ndim <= 1:
        return float(np.linalg.norm(a))
    return np.linalg.norm(a, axis=-1)


def _quadratic(c_x, c_u, c_xx, c_xu, c_uu, nx, nu):
    return c_x * nx + c_u * nu + c_xx * nx * nx + c_xu * nx * nu + c_uu * nu * nu


def eval_bound(constants: BoundConstants, x, u):
    """Quadratic residual bound in ``(||x||, ||u||)``; batches along the first axis."""
    c = constants
    return _quadratic(c.c_x, c.c_u, c.c_xx, c.c_xu, c.c_uu, _norms(x), _norms(u))


# relative outward rounding of the proportional coefficients; covers the
# rounding error of evaluating the five-term quadratic bound
_OUTWARD = 1.0 + 8.0 * np.finfo(float).eps


def proportional(constants: BoundConstants) -> ProportionalBound:
    """Linear over-approximation valid on X x U (uses ``x_bar`` and ``u_bar``).

    Coefficients are rounded up so the dominance also holds in floating point
    at the box corners, where it is tight.
    """
    c = constants
    x_bar = c.inputs["x_bar"]
    u_bar = c.inputs["u_bar"]
    return ProportionalBound(
        c_tilde_x=math.fsum([c.c_x, c.c_xx * x_bar, c.c_xu * u_bar]) * _OUTWARD,
        c_tilde_u=math.fsum([c.c_u, c.c_uu * u_bar]) * _OUTWARD,
    )


def calibrate_C1(constants: BoundConstants, x, u, rnorm) -> float | None:
    """Smallest ``C1 >= 0`` with ``eval_bound >= ||r||`` at every sample, ``C2`` fixed.

    Returns None when samples at ``x = 0`` (where ``C1`` has no effect) already
    violate the bound.
    """
    inp = constants.inputs
    m = inp["m"]
    a = inp["h_X"] ** (inp["s"] - 0.5) * inp["phi_norm"]
    nx, nu = np.atleast_1d(_norms(x)), np.atleast_1d(_norms(u))
    rnorm = np.atleast_1d(np.asarray(rnorm, dtype=float))
    slope = a * (inp["u_tilde"] * nx + math.sqrt(m) * nx * nu)
    c = constants
    # coefficients with the C1 contribution removed
    base = _quadratic(
        c.c_x - inp["u_tilde"] * c.C1 * a,
        c.c_u,
        c.c_xx,
        c.c_xu - math.sqrt(m) * c.C1 * a,
        c.c_uu,
        nx,
        nu,
    )
    deficit = rnorm - base
    flat = slope <= 0
    if np.any(deficit[flat] > 1e-15):
        return None
    active = ~flat
    if not np.any(active):
        return 0.0
    return float(max(0.0, np.max(deficit[active] / slope[active])))


# -- empirical validation ----------------------------------------------------


def validation_grid(system: ControlAffineSystem, nx: int = 101, nu: int = 101) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product of state and input grids, flattened to (N, n) and (N, m)."""
    xs = system.state_box.grid(nx)
    us = system.input_box.grid(nu)
    X = np.repeat(xs, us.shape[0], axis=0)
    U = np.tile(us, (xs.shape[0], 1))
    return X, U


def loglog_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def fit_surrogate(
    system: ControlAffineSystem,
    sampling: SamplingConfig,
    kernel: KernelSpec,
    d: int,
    d_j: int = 2,
    seed: int = 0,
    sigma_threshold: float = 0.1,
):
    """Collect data, regress each center and build the surrogate."""
    data = generate(system, sampling, kernel, d, d_j=d_j, seed=seed, sigma_threshold=sigma_threshold)
    estimates = fit_all(data.triplets)
    return data, estimates, build_kedmd(data.centers, estimates, kernel)


@dataclass
class ScalingStudy:
    parameter: str
    values: list
    measured: list
    slope: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def gap_scaling_study(system, kernel, d, dts, d_j=2, seed=0, substeps=100, sigma_threshold=0.1) -> ScalingStudy:
    """Max over centers of ``||H_hat_j - H_j||`` against the sampling period."""
    gaps = []
    for dt in dts:
        sampling = SamplingConfig(dt, substeps)
        data = generate(system, sampling, kernel, d, d_j=d_j, seed=seed, sigma_threshold=sigma_threshold)
        ests = fit_all(data.triplets)
        gaps.append(max(perturbation_gap(e, system, sampling, data.centers.points[e.center_index])[0] for e in ests))
    return ScalingStudy("dt", [float(v) for v in dts], gaps, loglog_slope(dts, gaps))


def dt_scaling_study(
    system, kernel, d, dts, d_j=2, seed=0, substeps=100, sigma_threshold=0.1, nu=21
) -> ScalingStudy:
    """Max residual at the centers (over an input grid) against the sampling period.

    At the centers the kernel projection error vanishes, leaving the
    O(dt^2) bilinearization and regression terms.
    """
    vals = []
    for dt in dts:
        sampling = SamplingConfig(dt, substeps)
        data, _, sur = fit_surrogate(system, sampling, kernel, d, d_j, seed, sigma_threshold)
        us = system.input_box.grid(nu)
        X = np.repeat(data.centers.points, us.shape[0], axis=0)
        U = np.tile(us, (data.centers.d, 1))
        vals.append(float(np.max(np.linalg.norm(residual(sur, system, sampling, X, U), axis=1))))
    return ScalingStudy("dt", [float(v) for v in dts], vals, loglog_slope(dts, vals))


def fill_scaling_study(
    system, kernel, ds, dt, d_j=2, seed=0, substeps=100, sigma_threshold=0.1, nx=101, nu=21
) -> ScalingStudy:
    """Grid-max residual for a sequence of center counts at fixed sampling period."""
    sampling = SamplingConfig(dt, substeps)
    X, U = validation_grid(system, nx, nu)
    vals, hs = [], []
    for d in ds:
        data, _, sur = fit_surrogate(system, sampling, kernel, d, d_j, seed, sigma_threshold)
        vals.append(float(np.max(np.linalg.norm(residual(sur, system, sampling, X, U), axis=1))))
        hs.append(data.centers.fill_distance)
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    slope = loglog_slope(hs, vals) if len(ds) > 1 else None
    return ScalingStudy("d", [int(v) for v in ds], vals, slope, {"h_X": hs, "strictly_decreasing": decreasing})


@dataclass
class ValidationReport:
    grid_points: int
    max_residual: float
    mean_residual: float
    origin_residual: float
    dt_scaling: ScalingStudy | None = None
    fill_scaling: ScalingStudy | None = None
    C1: float | None = None
    C2: float | None = None
    bound_margin: float | None = None
    calibrated_C1: float | None = None
    constants: BoundConstants | None = None
    flags: list = field(default_factory=list)
    rows: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            k: getattr(self, k)
            for k in (
                "grid_points",
                "max_residual",
                "mean_residual",
                "origin_residual",
                "C1",
                "C2",
                "bound_margin",
                "calibrated_C1",
                "flags",
            )
        }
        out["dt_scaling"] = self.dt_scaling.to_dict() if self.dt_scaling else None
        out["fill_scaling"] = self.fill_scaling.to_dict() if self.fill_scaling else None
        out["constants"] = self.constants.to_dict() if self.constants else None
        return out

    def write(self, json_path, csv_path=None) -> None:
        json_path = Path(json_path)
        json_path.parent.mkdir(parents=True, exist_ok=True)
        with open(json_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if csv_path is None or not self.rows:
            return
        X, U, r, b = self.rows["x"], self.rows["u"], self.rows["residual"], self.rows["bound"]
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(
                [f"x_{i + 1}" for i in range(X.shape[1])] + [f"u_{i + 1}" for i in range(U.shape[1])] + ["residual", "bound"]
            )
            for xi, ui, ri, bi in zip(X, U, r, b):
                w.writerow([fmt(v) for v in xi] + [fmt(v) for v in ui] + [fmt(ri), fmt(bi)])


def validate_empirically(
    surrogate: BilinearSurrogate,
    system: ControlAffineSystem,
    sampling: SamplingConfig,
    grid: tuple[np.ndarray, np.ndarray] | None = None,
    constants: BoundConstants | None = None,
    dt_study: ScalingStudy | None = None,
    fill_study: ScalingStudy | None = None,
) -> ValidationReport:
    """Measure residuals on a state-input grid and compare them with the bound.

    Violations are recorded in ``flags`` instead of raising.
    """
    X, U = grid if grid is not None else validation_grid(system)
    r = np.linalg.norm(residual(surrogate, system, sampling, X, U), axis=1)
    r0 = float(np.linalg.norm(residual(surrogate, system, sampling, np.zeros(system.n), np.zeros(system.m))))
    report = ValidationReport(
        grid_points=int(X.shape[0]),
        max_residual=float(r.max()),
        mean_residual=float(r.mean()),
        origin_residual=r0,
        dt_scaling=dt_study,
        fill_scaling=fill_study,
    )
    if r0 >= 1e-8:
        report.flags.append(f"residual at the origin is {r0:.3e}")
    if dt_study is not None and dt_study.slope is not None and not 1.8 <= dt_study.slope <= 2.2:
        report.flags.append(f"dt-scaling slope {dt_study.slope:.3f} outside [1.8, 2.2]")
    if fill_study is not None and not fill_study.extra.get("strictly_decreasing", True):
        report.flags.append("grid-max residual does not decrease with d")
    bound = np.full_like(r, np.nan)
    if constants is not None:
        bound = eval_bound(constants, X, U)
        report.C1, report.C2 = constants.C1, constants.C2
        report.constants = constants
        report.bound_margin = float(np.min(bound - r))
        report.calibrated_C1 = calibrate_C1(constants, X, U, r)
        if report.bound_margin < 0:
            report.flags.append(f"bound violated on the grid (min margin {report.bound_margin:.3e})")
        if report.calibrated_C1 is None:
            report.flags.append("no C1 satisfies the bound at x = 0 with the given C2")
    report.rows = {"x": X, "u": U, "residual": r, "bound": bound}
    return report
