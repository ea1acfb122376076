"""Wendland kernels, canonical features and kernel matrices.

The radial profile for smoothness ``s`` is the compactly supported Wendland
function ``(1 - r)_+^(l + s) p_s(r)`` with ``l = floor(max(n, 3) / 2) + s + 1``,
normalized so that ``theta(0) = 1``. For ``n <= 3`` and ``s = 1`` this is
``(1 - r)^4 (4 r + 1)``. Kernels are evaluated as ``theta(||x - y|| / scale)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from numpy.polynomial import Polynomial

from . import _backend
from .domain import Box, GridMax, points_per_axis
from .errors import (
    DuplicateCentersError,
    NumericallyIndefiniteError,
    UnsupportedSmoothnessError,
)

SUPPORTED_SMOOTHNESS = (1, 2, 3)
DUPLICATE_TOL = 1e-12


def _wendland_factors(n: int, s: int) -> tuple[int, Polynomial]:
    ell = max(n, 3) // 2 + s + 1
    if s == 1:
        p = Polynomial([1.0, ell + 1.0])
    elif s == 2:
        p = Polynomial([3.0, 3.0 * ell + 6.0, ell**2 + 4.0 * ell + 3.0]) / 3.0
    elif s == 3:
        p = Polynomial(
            [
                15.0,
                15.0 * ell + 45.0,
                6.0 * ell**2 + 36.0 * ell + 45.0,
                ell**3 + 9.0 * ell**2 + 23.0 * ell + 15.0,
            ]
        ) / 15.0
    else:
        raise UnsupportedSmoothnessError(
            f"unimplemented smoothness s={s}; supported: {SUPPORTED_SMOOTHNESS}"
        )
    return ell + s, p


@dataclass(frozen=True)
class RadialPiece:
    """``(1 - r)^power * poly(r)`` on [0, 1), zero beyond."""

    power: int
    coeffs: np.ndarray = field(repr=False)

    def __call__(self, r):
        return _backend.radial(np.asarray(r, dtype=float), self.power, self.coeffs)


@dataclass(frozen=True)
class KernelSpec:
    """Wendland kernel on R^n with smoothness ``s`` and support radius ``scale``."""

    n: int
    s: int = 1
    scale: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"state dimension must be a positive integer, got {self.n}")
        if int(self.s) != self.s or self.s < 1:
            raise UnsupportedSmoothnessError(f"smoothness must be an integer >= 1, got {self.s}")
        if not self.scale > 0:
            raise ValueError(f"support scale must be positive, got {self.scale}")
        if self.s not in SUPPORTED_SMOOTHNESS:
            raise UnsupportedSmoothnessError(
                f"unimplemented smoothness s={self.s}; supported: {SUPPORTED_SMOOTHNESS}"
            )

    @cached_property
    def _pieces(self) -> dict[str, RadialPiece]:
        power, p = _wendland_factors(self.n, self.s)
        one_minus_r = Polynomial([1.0, -1.0])
        # d/dr (1-r)^a q = (1-r)^(a-1) [ -a q + (1-r) q' ]
        p1 = -power * p + one_minus_r * p.deriv()
        p2 = -(power - 1) * p1 + one_minus_r * p1.deriv()
        # theta'(r) = r * g(r); s >= 1 guarantees p1(0) = 0
        quot, rem = divmod(p1, Polynomial([0.0, 1.0]))
        assert np.allclose(rem.coef, 0.0)
        return {
            "theta": RadialPiece(power, p.coef.copy()),
            "d1": RadialPiece(power - 1, p1.coef.copy()),
            "d2": RadialPiece(power - 2, p2.coef.copy()),
            "d1_over_r": RadialPiece(power - 1, quot.coef.copy()),
        }

    def theta(self, r):
        """Raw radial profile (no scaling)."""
        return self._pieces["theta"](r)

    def dtheta(self, r):
        return self._pieces["d1"](r)

    def d2theta(self, r):
        return self._pieces["d2"](r)

    def dtheta_over_r(self, r):
        """``theta'(r) / r``, continuous at ``r = 0``."""
        return self._pieces["d1_over_r"](r)

    @property
    def diagonal(self) -> float:
        return float(self.theta(0.0))

    def to_dict(self) -> dict:
        return {"n": int(self.n), "s": int(self.s), "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        return cls(n=int(data["n"]), s=int(data.get("s", 1)), scale=float(data.get("scale", 1.0)))


def as_states(x, n: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to an (N, n) array; the flag tells whether a single state was given."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
        single = True
    elif arr.ndim == 1:
        if n == 1 and arr.shape[0] != 1:
            return arr.reshape(-1, 1), False
        arr = arr.reshape(1, -1)
        single = True
    elif arr.ndim == 2:
        single = False
    else:
        raise ValueError(f"states must be at most 2-D, got shape {arr.shape}")
    if arr.shape[1] != n:
        raise ValueError(f"dimension mismatch: expected states of dimension {n}, got {arr.shape[1]}")
    return arr, single


def _center_points(centers) -> np.ndarray:
    pts = getattr(centers, "points", centers)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[0] == 0:
        raise ValueError("center set is empty")
    return pts


def eval_theta(spec: KernelSpec, r) -> float | np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radial argument must be nonnegative")
    out = spec.theta(r)
    return float(out) if out.ndim == 0 else out


def eval_kernel(spec: KernelSpec, x, y) -> float:
    xs, _ = as_states(x, spec.n)
    ys, _ = as_states(y, spec.n)
    if xs.shape[0] != 1 or ys.shape[0] != 1:
        raise ValueError("eval_kernel takes single states; use cross_kernel for batches")
    return float(cross_kernel(spec, xs, ys)[0, 0])


def cross_kernel(spec: KernelSpec, X, Y) -> np.ndarray:
    """Matrix with entries ``k(X[i], Y[j])``."""
    X, _ = as_states(X, spec.n)
    Y, _ = as_states(Y, spec.n)
    pc = spec._pieces["theta"]
    return _backend.cross_kernel(X, Y, float(spec.scale), pc.power, pc.coeffs)


def features(spec: KernelSpec, centers, x) -> np.ndarray:
    """Canonical feature vector ``Phi(x)``; entry j is ``k(x_j, x)``.

    Returns shape (d,) for a single state and (N, d) for a batch.
    """
    pts = _center_points(centers)
    xs, single = as_states(x, spec.n)
    out = cross_kernel(spec, xs, pts)
    return out[0] if single else out


def lifted_state(spec: KernelSpec, centers, x) -> np.ndarray:
    """``Psi(x) = Phi(x) - Phi(0)``."""
    pts = _center_points(centers)
    phi0 = features(spec, pts, np.zeros(spec.n))
    return features(spec, pts, x) - phi0


class KernelMatrix:
    """Symmetric positive definite kernel matrix with a cached Cholesky factor."""

    def __init__(self, entries: np.ndarray):
        entries = np.array(entries, dtype=float)
        entries.setflags(write=False)
        self.entries = entries
        try:
            self._cho = scipy.linalg.cho_factor(entries, lower=True, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise NumericallyIndefiniteError(f"kernel matrix is numerically indefinite: {exc}") from exc
        eig = np.linalg.eigvalsh(entries)
        self.min_eigenvalue = float(eig[0])
        self.max_eigenvalue = float(eig[-1])
        if self.min_eigenvalue <= 0:
            raise NumericallyIndefiniteError(
                f"kernel matrix is numerically indefinite (min eigenvalue {self.min_eigenvalue:.3e})"
            )
        self.condition_estimate = self.max_eigenvalue / self.min_eigenvalue

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def inverse_norm(self) -> float:
        """Spectral norm of the inverse, ``1 / lambda_min``."""
        return 1.0 / self.min_eigenvalue

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._cho, b)

    def __repr__(self):
        return f"KernelMatrix(d={self.size}, cond={self.condition_estimate:.3e})"


def kernel_matrix(spec: KernelSpec, centers) -> KernelMatrix:
    pts = _center_points(centers)
    if pts.shape[1] != spec.n:
        raise ValueError(f"dimension mismatch: centers have dimension {pts.shape[1]}, kernel {spec.n}")
    if pts.shape[0] > 1:
        dist = _backend.pairwise_distances(pts, pts)
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] < DUPLICATE_TOL:
            raise DuplicateCentersError(f"centers {i} and {j} coincide (distance {dist[i, j]:.3e})")
    # entry (i, j) = k(x_j, x_i); symmetric, so cross_kernel(X, X) is already in that layout
    return KernelMatrix(cross_kernel(spec, pts, pts))


def _offsets(spec: KernelSpec, center, x):
    c, _ = as_states(center, spec.n)
    xs, single = as_states(x, spec.n)
    z = (xs - c[0]) / spec.scale
    r = np.sqrt(np.sum(z * z, axis=1))
    return z, r, single


def feature_gradient(spec: KernelSpec, center, x) -> np.ndarray:
    """Gradient of ``x -> k(center, x)``."""
    z, r, single = _offsets(spec, center, x)
    grad = spec.dtheta_over_r(r)[:, None] * z / spec.scale
    return grad[0] if single else grad


def feature_hessian(spec: KernelSpec, center, x) -> np.ndarray:
    """Hessian of ``x -> k(center, x)``, shape (n, n) or (N, n, n)."""
    z, r, single = _offsets(spec, center, x)
    q = spec.dtheta_over_r(r)
    dd = spec.d2theta(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        zhat = np.where(r[:, None] > 0, z / r[:, None], 0.0)
    eye = np.eye(spec.n)
    hess = q[:, None, None] * eye + (dd - q)[:, None, None] * zhat[:, :, None] * zhat[:, None, :]
    hess = hess / spec.scale**2
    return hess[0] if single else hess


def hessian_spectral_norm(spec: KernelSpec, r) -> np.ndarray:
    """Spectral norm of the feature Hessian at scaled distance ``r``.

    The radial Hessian has eigenvalue ``theta''(r)`` along the offset and
    ``theta'(r)/r`` (multiplicity n-1) across it.
    """
    r = np.asarray(r, dtype=float)
    val = np.abs(spec.d2theta(r))
    if spec.n > 1:
        val = np.maximum(val, np.abs(spec.dtheta_over_r(r)))
    return val / spec.scale**2


def estimate_D_phi(spec: KernelSpec, centers, domain: Box, grid_resolution: int = 2001) -> GridMax:
    """Grid maximum over ``domain`` and all centers of the feature Hessian norm."""
    pts = _center_points(centers)
    per_axis = points_per_axis(grid_resolution, domain.dim)
    grid = domain.grid(per_axis)
    r = _backend.pairwise_distances(grid, pts) / spec.scale
    return GridMax(float(hessian_spectral_norm(spec, r).max()), per_axis)


def rkhs_feature_norms(spec: KernelSpec, centers) -> tuple[np.ndarray, float]:
    """Native-space norms of the canonical features and their stacked Euclidean norm.

    By the reproducing property ``||phi_x||^2 = k(x, x) = theta(0)``.
    """
    pts = _center_points(centers)
    per = np.full(pts.shape[0], np.sqrt(spec.diagonal))
    return per, float(np.sqrt(np.sum(per**2)))
