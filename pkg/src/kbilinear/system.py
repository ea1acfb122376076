"""Continuous-time control-affine plants and their sampled-data ground truth.

Systems are described by vectorized callables: ``drift(x)`` maps an (N, n)
array to (N, n) and ``control_columns(x)`` maps (N, n) to (N, n, m).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .domain import Box, points_per_axis
from .errors import TrajectoryDivergedError

FD_STEP = 1e-6


@dataclass(frozen=True)
class ControlAffineSystem:
    n: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    control_columns: Callable[[np.ndarray], np.ndarray]
    state_box: Box
    input_box: Box
    name: str = "custom"
    drift_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # (N, n) -> (N, n, m, n): derivative of G_c(x)[:, i] w.r.t. x
    control_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.state_box.dim != self.n or self.input_box.dim != self.m:
            raise ValueError("box dimensions do not match (n, m)")
        if not (self.state_box.contains_origin_interior() and self.input_box.contains_origin_interior()):
            raise ValueError("state and input boxes must contain the origin in their interiors")
        f0 = self.drift(np.zeros((1, self.n)))
        if not np.allclose(f0, 0.0, atol=1e-12):
            raise ValueError(f"drift must vanish at the origin, got f_c(0) = {f0.ravel()}")

    def vector_field(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.drift(x) + np.einsum("nij,nj->ni", self.control_columns(x), u)


@dataclass(frozen=True)
class SamplingConfig:
    dt: float
    substeps: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"sampling period must be positive, got {self.dt}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be an integer >= 1, got {self.substeps}")

    def to_dict(self) -> dict:
        return {"dt": float(self.dt), "substeps": int(self.substeps)}

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingConfig":
        return cls(dt=float(data["dt"]), substeps=int(data.get("substeps", 100)))


@dataclass(frozen=True)
class SystemConstants:
    L_f: float
    L_G: float
    G_bar: float
    x_bar: float
    u_bar: float
    u_tilde: float
    u_one_max: float
    resolution: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _batch(arr, dim: int) -> tuple[np.ndarray, bool]:
    a = np.asarray(arr, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1), True
    if a.ndim == 1:
        if dim == 1 and a.shape[0] != 1:
            return a.reshape(-1, 1), False
        return a.reshape(1, -1), True
    return a, False


def flow(system: ControlAffineSystem, sampling: SamplingConfig, x0, u) -> np.ndarray:
    """State after one sampling period under a constant input (fixed-step RK4).

    ``x0`` and ``u`` may be single vectors or batches of equal length.
    """
    x, single_x = _batch(x0, system.n)
    uu, single_u = _batch(u, system.m)
    if uu.shape[0] == 1 and x.shape[0] > 1:
        uu = np.broadcast_to(uu, (x.shape[0], system.m))
    elif x.shape[0] == 1 and uu.shape[0] > 1:
        x = np.broadcast_to(x, (uu.shape[0], system.n))
    if x.shape[1] != system.n or uu.shape[1] != system.m:
        raise ValueError("state/input dimension mismatch")
    h = sampling.dt / sampling.substeps
    x = np.array(x, dtype=float)
    # overflow is reported through the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(sampling.substeps):
            k1 = system.vector_field(x, uu)
            k2 = system.vector_field(x + 0.5 * h * k1, uu)
            k3 = system.vector_field(x + 0.5 * h * k2, uu)
            k4 = system.vector_field(x + h * k3, uu)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise TrajectoryDivergedError("trajectory diverged during integration")
    return x[0] if (single_x and single_u) else x


def euler_maps(system: ControlAffineSystem, sampling: SamplingConfig, x):
    """Forward-Euler maps ``f(x)``, ``g~_i(x)`` (columns) and ``G(x) = g~ - f``."""
    xs, single = _batch(x, system.n)
    fc = system.drift(xs)
    Gc = system.control_columns(xs)
    f = xs + sampling.dt * fc
    g_tilde = xs[:, :, None] + sampling.dt * (fc[:, :, None] + Gc)
    G = sampling.dt * Gc
    if single:
        return f[0], g_tilde[0], G[0]
    return f, g_tilde, G


def _fd_jacobian(fun, x: np.ndarray, out_shape: tuple[int, ...]) -> np.ndarray:
    n = x.shape[1]
    jac = np.empty((x.shape[0],) + out_shape + (n,))
    for k in range(n):
        e = np.zeros(n)
        e[k] = FD_STEP
        jac[..., k] = (fun(x + e) - fun(x - e)) / (2 * FD_STEP)
    return jac


def estimate_constants(system: ControlAffineSystem, grid_resolution: int = 2001) -> SystemConstants:
    """Grid estimates of ``L_f, L_G, G_bar``; exact vertex formulas for the box extrema.

    ``L_G`` uses the spectral norm of the Jacobian of vec(G_c), which dominates
    the Lipschitz constant of ``G_c`` in the induced 2-norm.
    """
    per_axis = points_per_axis(grid_resolution, system.n)
    grid = system.state_box.grid(per_axis)
    n, m = system.n, system.m

    if system.drift_jacobian is not None:
        Jf = system.drift_jacobian(grid)
    else:
        Jf = _fd_jacobian(system.drift, grid, (n,))
    L_f = float(np.max(np.linalg.norm(Jf, ord=2, axis=(1, 2))))

    if system.control_jacobian is not None:
        JG = system.control_jacobian(grid)
    else:
        JG = _fd_jacobian(system.control_columns, grid, (n, m))
    L_G = float(np.max(np.linalg.norm(JG.reshape(grid.shape[0], n * m, n), ord=2, axis=(1, 2))))

    G = system.control_columns(grid)
    G_bar = float(np.max(np.linalg.norm(G, ord=2, axis=(1, 2))))

    return SystemConstants(
        L_f=L_f,
        L_G=L_G,
        G_bar=G_bar,
        x_bar=system.state_box.max_norm(),
        u_bar=system.input_box.max_norm(),
        u_tilde=system.input_box.max_abs_one_minus_sum(),
        u_one_max=system.input_box.max_l1_norm(),
        resolution=per_axis,
    )


def zone_temp_benchmark(V_z: float = 2.0, T_0: float = -2.0) -> ControlAffineSystem:
    """Scalar zone-temperature process ``x' = u (T_0 cos(x/5) - x^3) / V_z``.

    No drift; X = [-1, 1], U = [-2, 2].
    """

    def drift(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def control_columns(x):
        x = np.asarray(x, dtype=float)
        return ((T_0 * np.cos(x * 0.2) - x**3) / V_z)[:, :, None]

    def drift_jacobian(x):
        return np.zeros((np.shape(x)[0], 1, 1))

    def control_jacobian(x):
        x = np.asarray(x, dtype=float)
        return ((-0.2 * T_0 * np.sin(x * 0.2) - 3.0 * x**2) / V_z)[:, :, None, None]

    return ControlAffineSystem(
        n=1,
        m=1,
        drift=drift,
        control_columns=control_columns,
        state_box=Box.interval(-1.0, 1.0),
        input_box=Box.interval(-2.0, 2.0),
        name="zone_temp",
        drift_jacobian=drift_jacobian,
        control_jacobian=control_jacobian,
    )


_REGISTRY: dict[str, Callable[[], ControlAffineSystem]] = {"zone_temp": zone_temp_benchmark}


def register_system(name: str, factory: Callable[[], ControlAffineSystem]) -> None:
    _REGISTRY[name] = factory


def get_system(name: str) -> ControlAffineSystem:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown system {name!r}; known: {sorted(_REGISTRY)}") from None


def available_systems() -> list[str]:
    return sorted(_REGISTRY)
