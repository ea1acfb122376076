"""Bilinear lifted surrogates ``Psi+ = A Psi + B0 u + sum_i u_i B_i Psi``.

``BilinearSurrogate`` is the kernel-EDMD model built from per-center Euler-map
estimates. ``BaselineSurrogate`` is a plain bilinear EDMD least-squares fit
over pooled triplets, used as a comparison in the prediction benchmark.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .kernel import KernelSpec, as_states, features, kernel_matrix
from .regress import LocalEstimate
from .system import ControlAffineSystem, SamplingConfig, flow

COND_THRESHOLD = 1e12


class Rollout(NamedTuple):
    states: np.ndarray
    truncated: bool


def _as_inputs(u, m: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if m == 1 and arr.shape[0] != 1:
            return arr.reshape(-1, 1), False
        return arr.reshape(1, -1), True
    return arr, False


class _BilinearModel:
    A: np.ndarray
    B: np.ndarray
    B0: np.ndarray

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    def lift(self, x) -> np.ndarray:
        raise NotImplementedError

    def predict_step(self, psi, u) -> np.ndarray:
        return predict_step(self, psi, u)

    def rollout(self, x0, inputs) -> Rollout:
        return rollout(self, x0, inputs)


@dataclass
class BilinearSurrogate(_BilinearModel):
    kernel: KernelSpec
    centers: np.ndarray
    A: np.ndarray
    B: np.ndarray
    B0: np.ndarray
    phi0: np.ndarray
    f_images: np.ndarray
    G_images: np.ndarray
    build_report: dict = field(default_factory=dict)

    def features(self, x) -> np.ndarray:
        return features(self.kernel, self.centers, x)

    def lift(self, x) -> np.ndarray:
        return self.features(x) - self.phi0

    def interpolation_residual(self) -> float:
        """``max_j ||A Phi(x_j) - Phi(f_hat(x_j))||_inf``."""
        lhs = self.features(self.centers) @ self.A.T
        rhs = self.features(self.f_images)
        return float(np.max(np.abs(lhs - rhs)))

    def equilibrium_residual(self) -> float:
        """``||A Phi(0) - Phi(0)||_inf``."""
        return float(np.max(np.abs(self.A @ self.phi0 - self.phi0)))


def build_kedmd_from_images(
    kernel: KernelSpec,
    centers,
    f_images: np.ndarray,
    G_images: np.ndarray,
    cond_threshold: float = COND_THRESHOLD,
) -> BilinearSurrogate:
    """Assemble ``A``, ``B_i`` and ``B0`` from images of the centers under ``f`` and ``G``.

    ``f_images`` has shape (d, n); ``G_images`` has shape (d, n, m). The
    images may be regression estimates or, for oracle checks, true Euler maps.
    """
    pts = np.asarray(getattr(centers, "points", centers), dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    f_images = np.asarray(f_images, dtype=float).reshape(pts.shape)
    G_images = np.asarray(G_images, dtype=float)
    d, n = pts.shape
    m = G_images.shape[2]
    KX = kernel_matrix(kernel, pts)
    # K_F[a, b] = k(x_b, F(x_a)); A = K_F^T K_X^{-1} = (K_X^{-1} K_F)^T
    Kf = features(kernel, pts, f_images)
    A = KX.solve(Kf).T
    B = np.empty((m, d, d))
    for i in range(m):
        Kg = features(kernel, pts, f_images + G_images[:, :, i])
        B[i] = KX.solve(Kg - Kf).T
    phi0 = features(kernel, pts, np.zeros(n))
    B0 = np.stack([B[i] @ phi0 for i in range(m)], axis=1)

    warn = []
    if KX.condition_estimate > cond_threshold:
        warn.append(f"kernel matrix condition estimate {KX.condition_estimate:.3e} exceeds {cond_threshold:.1e}")
    report = {
        "condition": KX.condition_estimate,
        "min_eigenvalue": KX.min_eigenvalue,
        "kinv_norm": KX.inverse_norm,
        "warnings": warn,
    }
    sur = BilinearSurrogate(kernel, pts, A, B, B0, phi0, f_images, G_images, report)
    report["interpolation_residual"] = sur.interpolation_residual()
    report["equilibrium_residual"] = sur.equilibrium_residual()
    for msg in warn:
        warnings.warn(msg, stacklevel=2)
    return sur


def build_kedmd(centers, estimates: list[LocalEstimate], kernel: KernelSpec, **kw) -> BilinearSurrogate:
    """Kernel-EDMD surrogate from per-center regression estimates."""
    pts = np.asarray(getattr(centers, "points", centers), dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    by_index = {e.center_index: e for e in estimates}
    missing = [j for j in range(pts.shape[0]) if j not in by_index]
    if missing:
        raise ValueError(f"no estimate for centers {missing}")
    if np.any(pts[0] != 0.0):
        raise ValueError("first center must be the origin")
    if np.any(by_index[0].f_hat != 0.0):
        raise ValueError("origin estimate must have f_hat = 0")
    f_images = np.stack([by_index[j].f_hat for j in range(pts.shape[0])])
    G_images = np.stack([by_index[j].G_hat for j in range(pts.shape[0])])
    return build_kedmd_from_images(kernel, pts, f_images, G_images, **kw)


def predict_step(model: _BilinearModel, psi, u) -> np.ndarray:
    """One surrogate step; accepts single vectors or matching batches."""
    P = np.asarray(psi, dtype=float)
    single_p = P.ndim == 1
    P = np.atleast_2d(P)
    U, single_u = _as_inputs(u, model.m)
    with np.errstate(over="ignore", invalid="ignore"):
        out = P @ model.A.T + U @ model.B0.T + np.einsum("ki,ipq,kq->kp", U, model.B, P)
    return out[0] if (single_p and single_u) else out


def rollout(model: _BilinearModel, x0, inputs) -> Rollout:
    """Iterate ``predict_step`` from ``lift(x0)``.

    ``inputs`` of shape (T, m) gives states (T + 1, dim). Inputs of shape
    (R, T, m) with ``x0`` of shape (R, n) roll out R realizations together,
    giving (R, T + 1, dim). Iteration stops at the first non-finite iterate.
    """
    inputs = np.asarray(inputs, dtype=float)
    batched = inputs.ndim == 3
    if not batched:
        inputs = inputs.reshape(1, inputs.shape[0], -1)
    R, T, _ = inputs.shape
    psi = np.atleast_2d(model.lift(x0))
    if psi.shape[0] == 1 and R > 1:
        psi = np.repeat(psi, R, axis=0)
    traj = np.empty((R, T + 1, model.dim))
    traj[:, 0] = psi
    truncated = False
    for t in range(T):
        psi = predict_step(model, psi, inputs[:, t])
        psi = np.atleast_2d(psi)
        if not np.all(np.isfinite(psi)):
            truncated = True
            traj = traj[:, : t + 1]
            break
        traj[:, t + 1] = psi
    return Rollout(traj if batched else traj[0], truncated)


def residual(model: _BilinearModel, system: ControlAffineSystem, sampling: SamplingConfig, x, u) -> np.ndarray:
    """``Psi(flow(x, u)) - predict_step(Psi(x), u)``; batches allowed."""
    xplus = flow(system, sampling, x, u)
    return model.lift(xplus) - predict_step(model, model.lift(x), u)


# -- baselines ---------------------------------------------------------------


def monomial_exponents(n: int, degree: int = 3) -> list[tuple[int, ...]]:
    out = []
    for deg in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            out.append(tuple(combo.count(k) for k in range(n)))
    return out


def monomial_lift(x, n: int, degree: int = 3) -> np.ndarray:
    """Monomials of total degree 1..degree; ``[x, x^2, x^3]`` for n = 1."""
    xs, single = as_states(x, n)
    cols = [np.prod(xs ** np.array(e), axis=1) for e in monomial_exponents(n, degree)]
    out = np.stack(cols, axis=1)
    return out[0] if single else out


@dataclass
class BaselineSurrogate(_BilinearModel):
    kind: str
    n: int
    A: np.ndarray
    B: np.ndarray
    B0: np.ndarray
    kernel: KernelSpec | None = None
    centers: np.ndarray | None = None
    degree: int = 3
    rank: int = 0
    warnings: list = field(default_factory=list)

    def lift(self, x) -> np.ndarray:
        if self.kind == "kernel":
            phi0 = features(self.kernel, self.centers, np.zeros(self.n))
            return features(self.kernel, self.centers, x) - phi0
        return monomial_lift(x, self.n, self.degree)


def build_baseline(
    states: np.ndarray,
    inputs: np.ndarray,
    successors: np.ndarray,
    kind: str,
    kernel: KernelSpec | None = None,
    centers=None,
    degree: int = 3,
) -> BaselineSurrogate:
    """Least-squares bilinear EDMD over pooled triplets in a fixed dictionary.

    ``kind`` is ``"kernel"`` (shifted canonical features at ``centers``) or
    ``"monomial"``. Rank-deficient problems get the minimum-norm solution.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[1] if states.shape[0] else 0
    U = np.asarray(inputs, dtype=float).reshape(states.shape[0], -1)
    if states.shape[0] == 0:
        raise ValueError("no data triplets")
    if kind == "kernel":
        if kernel is None or centers is None:
            raise ValueError("kernel dictionary needs a kernel spec and centers")
        pts = np.asarray(getattr(centers, "points", centers), dtype=float).reshape(-1, n)
        model = BaselineSurrogate("kernel", n, np.empty((0, 0)), np.empty((0, 0, 0)), np.empty((0, 0)), kernel, pts)
    elif kind == "monomial":
        model = BaselineSurrogate("monomial", n, np.empty((0, 0)), np.empty((0, 0, 0)), np.empty((0, 0)), degree=degree)
    else:
        raise ValueError(f"unknown dictionary kind {kind!r}")

    P = np.atleast_2d(model.lift(states))
    Pp = np.atleast_2d(model.lift(successors))
    N, m = P.shape[1], U.shape[1]
    Z = np.hstack([P, U] + [U[:, [i]] * P for i in range(m)])
    W, _, rank, _ = np.linalg.lstsq(Z, Pp, rcond=None)
    W = W.T
    model.A = W[:, :N]
    model.B0 = W[:, N : N + m]
    model.B = np.stack([W[:, N + m + i * N : N + m + (i + 1) * N] for i in range(m)])
    model.rank = int(rank)
    if rank < Z.shape[1]:
        msg = f"{kind} baseline regression is rank deficient ({rank} < {Z.shape[1]}); using minimum-norm solution"
        model.warnings.append(msg)
        warnings.warn(msg, stacklevel=2)
    return model


# -- model files -------------------------------------------------------------


def save_model(model: BilinearSurrogate, path) -> Path:
    """JSON model file; floats use the shortest exact round-trip representation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "kernel": model.kernel.to_dict(),
        "centers": model.centers.tolist(),
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "B0": model.B0.tolist(),
        "phi0": model.phi0.tolist(),
        "estimates": {"f_hat": model.f_images.tolist(), "G_hat": model.G_images.tolist()},
        "build_report": {
            "condition": float(model.build_report.get("condition", float("nan"))),
            "warnings": list(model.build_report.get("warnings", [])),
            "min_eigenvalue": float(model.build_report.get("min_eigenvalue", float("nan"))),
            "interpolation_residual": float(model.build_report.get("interpolation_residual", float("nan"))),
            "equilibrium_residual": float(model.build_report.get("equilibrium_residual", float("nan"))),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return path


def load_model(path) -> BilinearSurrogate:
    with open(path) as fh:
        doc = json.load(fh)
    kernel = KernelSpec.from_dict(doc["kernel"])
    centers = np.asarray(doc["centers"], dtype=float).reshape(-1, kernel.n)
    B = np.asarray(doc["B"], dtype=float)
    return BilinearSurrogate(
        kernel=kernel,
        centers=centers,
        A=np.asarray(doc["A"], dtype=float),
        B=B,
        B0=np.asarray(doc["B0"], dtype=float).reshape(centers.shape[0], B.shape[0]),
        phi0=np.asarray(doc["phi0"], dtype=float),
        f_images=np.asarray(doc["estimates"]["f_hat"], dtype=float).reshape(centers.shape),
        G_images=np.asarray(doc["estimates"]["G_hat"], dtype=float),
        build_report=dict(doc.get("build_report", {})),
    )

