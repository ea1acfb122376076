"""Center placement, excitation-checked inputs and data-triplet collection."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .domain import Box, points_per_axis
from .errors import DatasetFormatError, ExcitationError, TrajectoryDivergedError
from .kernel import KernelSpec
from .system import ControlAffineSystem, SamplingConfig, flow

DEFAULT_SIGMA_THRESHOLD = 0.1
DEFAULT_FILL_RESOLUTION = 10_000
MAX_EXCITATION_ATTEMPTS = 100

MANIFEST = "manifest.json"
CENTERS_CSV = "centers.csv"
TRIPLETS_CSV = "triplets.csv"


def fmt(value: float) -> str:
    """17 significant digits: round-trips every double exactly."""
    return format(float(value), ".17g")


@dataclass
class CenterSet:
    points: np.ndarray
    fill_distance: float = math.nan
    fill_resolution: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        self.points = pts

    @property
    def d(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]


@dataclass
class TripletSet:
    """All data triplets ``(x_j, u_jl, x+_jl)`` collected at one center."""

    center_index: int
    center: np.ndarray
    inputs: np.ndarray
    successors: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).ravel()
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.successors = np.atleast_2d(np.asarray(self.successors, dtype=float))
        if self.inputs.shape[0] != self.successors.shape[0]:
            raise ValueError("inputs and successors have different counts")

    @property
    def d_j(self) -> int:
        return self.inputs.shape[0]

    @property
    def sigma_min(self) -> float:
        return sigma_min(self.inputs)


@dataclass
class Dataset:
    system: str
    kernel: KernelSpec
    sampling: SamplingConfig
    seed: int
    centers: CenterSet
    triplets: list[TripletSet]
    m: int
    sigma_threshold: float = DEFAULT_SIGMA_THRESHOLD
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.centers.n

    @property
    def n_triplets(self) -> int:
        return sum(t.d_j for t in self.triplets)

    def pooled(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stack every triplet as (states, inputs, successors)."""
        X = np.concatenate([np.repeat(t.center[None, :], t.d_j, axis=0) for t in self.triplets])
        U = np.concatenate([t.inputs for t in self.triplets])
        Xp = np.concatenate([t.successors for t in self.triplets])
        return X, U, Xp


def augmented_inputs(inputs: np.ndarray) -> np.ndarray:
    """Ones row stacked over the inputs, shape (m + 1, d_j)."""
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    return np.vstack([np.ones((1, U.shape[0])), U.T])


def sigma_min(inputs: np.ndarray) -> float:
    Ubar = augmented_inputs(inputs)
    if Ubar.shape[1] < Ubar.shape[0]:
        return 0.0
    sv = np.linalg.svd(Ubar, compute_uv=False)
    return float(sv[Ubar.shape[0] - 1])


def _axis_with_origin(lo: float, hi: float, k: int) -> tuple[np.ndarray, bool]:
    pts = np.linspace(lo, hi, k)
    idx = int(np.argmin(np.abs(pts)))
    shifted = abs(pts[idx]) > 1e-12
    pts[idx] = 0.0
    return pts, shifted


def build_centers(domain: Box, d: int, fill_resolution: int = DEFAULT_FILL_RESOLUTION) -> CenterSet:
    """Uniform grid of centers with the origin placed first.

    In 1D the grid has spacing ``(hi - lo) / (d - 1)``; if no grid point
    falls on 0 the nearest one is moved there (with a warning). For n > 1 a
    tensor grid with the smallest per-axis count ``k`` such that
    ``k**n >= d`` is used.
    """
    if d < 2:
        raise ValueError(f"need at least 2 centers, got d={d}")
    if not domain.contains_origin_interior():
        raise ValueError("domain must contain the origin in its interior")
    n = domain.dim
    k = d if n == 1 else int(math.ceil(d ** (1.0 / n) - 1e-9))
    axes = []
    any_shift = False
    for lo, hi in zip(domain.lo, domain.hi):
        ax, shifted = _axis_with_origin(lo, hi, k)
        axes.append(ax)
        any_shift |= shifted
    if any_shift:
        warnings.warn(
            f"uniform grid with {k} points per axis misses the origin; nearest point moved to 0",
            stacklevel=2,
        )
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    origin = int(np.flatnonzero(np.all(pts == 0.0, axis=1))[0])
    order = [origin] + [i for i in range(pts.shape[0]) if i != origin]
    pts = pts[order]
    h = fill_distance(pts, domain, fill_resolution)
    return CenterSet(pts, fill_distance=h, fill_resolution=points_per_axis(fill_resolution, n))


def fill_distance(centers, domain: Box, resolution: int = DEFAULT_FILL_RESOLUTION) -> float:
    """Dense-probe estimate (from below) of ``sup_x min_j ||x - x_j||`` over ``domain``."""
    pts = np.asarray(getattr(centers, "points", centers), dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if resolution < 10 * pts.shape[0]:
        raise ValueError(f"fill-distance resolution {resolution} below 10 * d = {10 * pts.shape[0]}")
    probes = domain.grid(points_per_axis(resolution, domain.dim))
    return float(_backend.min_distances(probes, pts).max())


def excite_inputs(
    input_box: Box,
    d_j: int,
    rng_seed: int | np.random.Generator,
    sigma_threshold: float = DEFAULT_SIGMA_THRESHOLD,
    max_attempts: int = MAX_EXCITATION_ATTEMPTS,
) -> np.ndarray:
    """Draw ``d_j`` inputs uniformly from ``input_box`` until the excitation floor holds."""
    m = input_box.dim
    if d_j < m + 1:
        raise ValueError(f"need d_j >= m + 1 = {m + 1} inputs per center, got {d_j}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    for _ in range(max_attempts):
        U = input_box.sample(rng, d_j)
        if sigma_min(U) >= sigma_threshold:
            return U
    raise ExcitationError(
        f"excitation failure: no input draw reached sigma_min >= {sigma_threshold} in {max_attempts} attempts"
    )


def collect(
    system: ControlAffineSystem,
    sampling: SamplingConfig,
    centers: CenterSet,
    input_plan: list[np.ndarray],
) -> list[TripletSet]:
    """Integrate the true system from every center under its planned inputs."""
    if len(input_plan) != centers.d:
        raise ValueError(f"input plan covers {len(input_plan)} centers, expected {centers.d}")
    out = []
    for j, (xj, U) in enumerate(zip(centers.points, input_plan)):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        try:
            succ = flow(system, sampling, np.repeat(xj[None, :], U.shape[0], axis=0), U)
        except TrajectoryDivergedError:
            for ell, u in enumerate(U):
                try:
                    flow(system, sampling, xj, u)
                except TrajectoryDivergedError as exc:
                    raise TrajectoryDivergedError(f"{exc} (center j={j}, input l={ell})") from exc
            raise
        out.append(TripletSet(j, xj, U, succ))
    return out


def generate(
    system: ControlAffineSystem,
    sampling: SamplingConfig,
    kernel: KernelSpec,
    d: int,
    d_j: int = 2,
    seed: int = 0,
    sigma_threshold: float = DEFAULT_SIGMA_THRESHOLD,
    fill_resolution: int = DEFAULT_FILL_RESOLUTION,
) -> Dataset:
    """Build centers, design inputs center by center from one seeded stream, and collect."""
    centers = build_centers(system.state_box, d, fill_resolution)
    rng = np.random.default_rng(seed)
    plan = [excite_inputs(system.input_box, d_j, rng, sigma_threshold) for _ in range(centers.d)]
    triplets = collect(system, sampling, centers, plan)
    return Dataset(
        system=system.name,
        kernel=kernel,
        sampling=sampling,
        seed=int(seed),
        centers=centers,
        triplets=triplets,
        m=system.m,
        sigma_threshold=sigma_threshold,
    )


# -- persistence -------------------------------------------------------------


def save(dataset: Dataset, path) -> Path:
    """Write ``manifest.json``, ``centers.csv`` and ``triplets.csv`` into ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n, m = dataset.n, dataset.m
    manifest = {
        "kernel": dataset.kernel.to_dict(),
        "sampling": dataset.sampling.to_dict(),
        "seed": int(dataset.seed),
        "system": dataset.system,
        "n": n,
        "m": m,
        "sigma_threshold": float(dataset.sigma_threshold),
        "fill_distance": float(dataset.centers.fill_distance),
        "fill_resolution": int(dataset.centers.fill_resolution),
        "files": {"centers": CENTERS_CSV, "triplets": TRIPLETS_CSV},
    }
    manifest.update(dataset.extra)
    with open(path / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(path / CENTERS_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j"] + [f"x_{i + 1}" for i in range(n)])
        for j, p in enumerate(dataset.centers.points):
            w.writerow([j] + [fmt(v) for v in p])
    with open(path / TRIPLETS_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "l"] + [f"u_{i + 1}" for i in range(m)] + [f"xplus_{i + 1}" for i in range(n)])
        for t in dataset.triplets:
            for ell, (u, xp) in enumerate(zip(t.inputs, t.successors)):
                w.writerow([t.center_index, ell] + [fmt(v) for v in u] + [fmt(v) for v in xp])
    return path


def _read_table(file: Path, expected: list[str]) -> list[list]:
    try:
        fh = open(file, newline="")
    except OSError as exc:
        raise DatasetFormatError(f"{file}: cannot open ({exc})") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise DatasetFormatError(f"{file}:1: header {header} does not match expected {expected}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise DatasetFormatError(f"{file}:{lineno}: expected {len(expected)} fields, got {len(row)}")
            parsed = []
            for name, raw in zip(expected, row):
                try:
                    parsed.append(int(raw) if name in ("j", "l") else float(raw))
                except ValueError:
                    raise DatasetFormatError(f"{file}:{lineno}: field {name!r}: cannot parse {raw!r}") from None
            rows.append(parsed)
    return rows


def load(path) -> Dataset:
    path = Path(path)
    try:
        with open(path / MANIFEST) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise DatasetFormatError(f"{path / MANIFEST}: cannot open ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path / MANIFEST}:{exc.lineno}: {exc.msg}") from exc
    try:
        kernel = KernelSpec.from_dict(manifest["kernel"])
        sampling = SamplingConfig.from_dict(manifest["sampling"])
        n, m = int(manifest["n"]), int(manifest["m"])
        seed = int(manifest["seed"])
        system = str(manifest["system"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{path / MANIFEST}: invalid or missing key: {exc}") from exc

    crows = _read_table(path / CENTERS_CSV, ["j"] + [f"x_{i + 1}" for i in range(n)])
    if not crows:
        raise DatasetFormatError(f"{path / CENTERS_CSV}: no centers")
    for k, row in enumerate(crows):
        if row[0] != k:
            raise DatasetFormatError(f"{path / CENTERS_CSV}:{k + 2}: field 'j': expected {k}, got {row[0]}")
    points = np.array([row[1:] for row in crows], dtype=float)
    if np.any(points[0] != 0.0):
        raise DatasetFormatError(f"{path / CENTERS_CSV}:2: first center must be the origin, got {points[0]}")

    trows = _read_table(
        path / TRIPLETS_CSV,
        ["j", "l"] + [f"u_{i + 1}" for i in range(m)] + [f"xplus_{i + 1}" for i in range(n)],
    )
    grouped: dict[int, list] = {j: [] for j in range(points.shape[0])}
    for lineno, row in enumerate(trows, start=2):
        if row[0] not in grouped:
            raise DatasetFormatError(f"{path / TRIPLETS_CSV}:{lineno}: field 'j': unknown center {row[0]}")
        grouped[row[0]].append(row)
    triplets = []
    for j, rows in grouped.items():
        if len(rows) < m + 1:
            raise DatasetFormatError(
                f"{path / TRIPLETS_CSV}: center j={j} has d_j={len(rows)} triplets, need at least m + 1 = {m + 1}"
            )
        rows = sorted(rows, key=lambda r: r[1])
        U = np.array([r[2 : 2 + m] for r in rows], dtype=float)
        Xp = np.array([r[2 + m :] for r in rows], dtype=float)
        triplets.append(TripletSet(j, points[j], U, Xp))

    centers = CenterSet(
        points,
        fill_distance=float(manifest.get("fill_distance", math.nan)),
        fill_resolution=int(manifest.get("fill_resolution", 0)),
    )
    return Dataset(
        system=system,
        kernel=kernel,
        sampling=sampling,
        seed=seed,
        centers=centers,
        triplets=triplets,
        m=m,
        sigma_threshold=float(manifest.get("sigma_threshold", DEFAULT_SIGMA_THRESHOLD)),
    )
