"""Per-center least-squares estimates of the forward-Euler maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import TripletSet, augmented_inputs, sigma_min
from .errors import ExcitationError
from .system import ControlAffineSystem, SamplingConfig, euler_maps

RANK_TOL = 1e-12


@dataclass(frozen=True)
class LocalEstimate:
    center_index: int
    f_hat: np.ndarray
    G_hat: np.ndarray
    residual_norm: float

    @property
    def H_hat(self) -> np.ndarray:
        """``[f_hat  G_hat]`` with shape (n, m + 1)."""
        return np.hstack([self.f_hat[:, None], self.G_hat])


def _lstsq_qr(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``min ||M z - rhs||`` for full-column-rank ``M`` through a thin QR."""
    Q, R = np.linalg.qr(M, mode="reduced")
    return scipy.linalg.solve_triangular(R, Q.T @ rhs, lower=False)


def fit_local(triplets: TripletSet, is_origin: bool = False) -> LocalEstimate:
    """Fit ``x+ ~ f(x_j) + G(x_j) u`` over the triplets of one center.

    At the origin the drift estimate is pinned to zero and only ``G`` is
    regressed on the inputs.
    """
    U = triplets.inputs
    Xp = triplets.successors
    n, m = Xp.shape[1], U.shape[1]
    smin = sigma_min(U)
    if smin <= RANK_TOL:
        raise ExcitationError(
            f"center {triplets.center_index}: ones-augmented inputs are rank deficient "
            f"(sigma_min = {smin:.3e})"
        )
    if is_origin:
        if np.linalg.svd(U, compute_uv=False)[-1] <= RANK_TOL:
            raise ExcitationError(f"center {triplets.center_index}: inputs do not span R^{m}")
        Gt = _lstsq_qr(U, Xp)  # (m, n)
        f_hat = np.zeros(n)
        G_hat = Gt.T
    else:
        Ht = _lstsq_qr(augmented_inputs(U).T, Xp)  # (m + 1, n)
        f_hat = Ht[0]
        G_hat = Ht[1:].T
    fitted = f_hat[None, :] + U @ G_hat.T
    return LocalEstimate(
        center_index=triplets.center_index,
        f_hat=np.asarray(f_hat, dtype=float),
        G_hat=np.asarray(G_hat, dtype=float),
        residual_norm=float(np.linalg.norm(Xp - fitted)),
    )


def fit_all(triplet_sets: list[TripletSet]) -> list[LocalEstimate]:
    """Estimate every center; the center with index 0 is treated as the origin."""
    return [fit_local(t, is_origin=(t.center_index == 0)) for t in triplet_sets]


def perturbation_gap(
    estimate: LocalEstimate,
    system: ControlAffineSystem,
    sampling: SamplingConfig,
    center: np.ndarray,
    C3: float | None = None,
) -> tuple[float, float]:
    """Spectral-norm distance of ``H_hat`` from the true Euler maps, and ``dt**2 * C3``.

    ``bound`` is NaN when ``C3`` is not supplied.
    """
    f, _, G = euler_maps(system, sampling, np.asarray(center, dtype=float))
    H = np.hstack([np.atleast_1d(f)[:, None], np.atleast_2d(G)])
    gap = float(np.linalg.norm(estimate.H_hat - H, ord=2))
    bound = float("nan") if C3 is None else sampling.dt**2 * float(C3)
    return gap, bound
