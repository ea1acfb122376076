import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from kbilinear import (
    Box,
    DuplicateCentersError,
    KernelSpec,
    UnsupportedSmoothnessError,
    cross_kernel,
    estimate_D_phi,
    eval_kernel,
    eval_theta,
    feature_gradient,
    feature_hessian,
    features,
    kernel_matrix,
    lifted_state,
    rkhs_feature_norms,
)
from kbilinear.kernel import hessian_spectral_norm

R = sp.Symbol("r", nonnegative=True)
T = sp.Symbol("t", nonnegative=True)


def wendland_symbolic(n, s):
    """Apply the integral operator phi -> int_r^1 t phi(t) dt s times to (1-r)^l, then normalize."""
    ell = sp.floor(sp.Rational(max(n, 3), 2)) + s + 1
    phi = (1 - R) ** ell
    for _ in range(s):
        phi = sp.integrate((T * phi.subs(R, T)), (T, R, 1))
    phi = sp.expand(phi / phi.subs(R, 0))
    return phi


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("s", [1, 2, 3])
def test_profile_matches_symbolic_wendland(n, s):
    spec = KernelSpec(n=n, s=s)
    phi = wendland_symbolic(n, s)
    r = np.linspace(0, 1, 57)
    ref = sp.lambdify(R, phi, "numpy")
    d1 = sp.lambdify(R, sp.diff(phi, R), "numpy")
    d2 = sp.lambdify(R, sp.diff(phi, R, 2), "numpy")
    np.testing.assert_allclose(spec.theta(r), ref(r), atol=1e-12)
    np.testing.assert_allclose(spec.dtheta(r), d1(r) * np.ones_like(r), atol=1e-10)
    np.testing.assert_allclose(spec.d2theta(r), d2(r) * np.ones_like(r), atol=1e-9)


def test_s1_low_dim_closed_form():
    spec = KernelSpec(n=1, s=1)
    r = np.linspace(0, 1, 101)
    np.testing.assert_allclose(spec.theta(r), (1 - r) ** 4 * (4 * r + 1), atol=1e-15)
    np.testing.assert_allclose(spec.theta(r), 1 - 10 * r**2 + 20 * r**3 - 15 * r**4 + 4 * r**5, atol=1e-13)
    np.testing.assert_allclose(spec.dtheta(r), -20 * r * (1 - r) ** 3, atol=1e-13)
    np.testing.assert_allclose(spec.d2theta(r), (1 - r) ** 2 * (80 * r - 20), atol=1e-12)


def test_theta_values():
    spec = KernelSpec(n=1)
    assert eval_theta(spec, 0.0) == 1.0
    assert eval_theta(spec, 1.0) == 0.0
    assert eval_theta(spec, 3.7) == 0.0
    assert eval_theta(spec, 0.5) == pytest.approx(0.1875, abs=1e-15)
    with pytest.raises(ValueError):
        eval_theta(spec, -0.1)


def test_kernel_examples():
    spec = KernelSpec(n=1)
    assert eval_kernel(spec, 0.3, 0.3) == 1.0
    assert eval_kernel(spec, -0.5, 0.5) == 0.0
    wide = KernelSpec(n=1, scale=2.0)
    assert eval_kernel(wide, 0.0, 1.0) == pytest.approx(0.1875, abs=1e-15)


def test_spec_validation():
    with pytest.raises(UnsupportedSmoothnessError):
        KernelSpec(n=1, s=4)
    with pytest.raises(UnsupportedSmoothnessError):
        KernelSpec(n=1, s=0)
    with pytest.raises(ValueError):
        KernelSpec(n=1, scale=0.0)
    with pytest.raises(ValueError):
        KernelSpec(n=0)
    assert KernelSpec.from_dict(KernelSpec(2, 3, 0.5).to_dict()) == KernelSpec(2, 3, 0.5)


@given(
    st.integers(1, 3),
    st.integers(1, 3),
    st.floats(0.25, 4.0),
    st.lists(st.floats(-2, 2), min_size=6, max_size=6),
)
@settings(max_examples=60, deadline=None)
def test_kernel_symmetric_bounded(n, s, scale, vals):
    spec = KernelSpec(n=n, s=s, scale=scale)
    x = np.array(vals[:n])
    y = np.array(vals[3 : 3 + n])
    kxy = eval_kernel(spec, x, y)
    assert kxy == eval_kernel(spec, y, x)
    assert 0.0 <= kxy <= 1.0
    if np.linalg.norm(x - y) >= scale:
        assert kxy == 0.0


@given(st.integers(0, 4), st.integers(1, 3))
@settings(max_examples=20, deadline=None)
def test_scaling_equivariance(power, s):
    # k_alpha(alpha x, alpha y) = k_1(x, y); powers of two keep the scaling exact
    alpha = 2.0**power
    pts = np.linspace(-1, 1, 9)[:, None]
    base = cross_kernel(KernelSpec(1, s, 1.0), pts, pts[::-1])
    scaled = cross_kernel(KernelSpec(1, s, alpha), alpha * pts, alpha * pts[::-1])
    np.testing.assert_array_equal(base, scaled)


def test_features_and_lift_shapes():
    spec = KernelSpec(n=1)
    centers = np.array([[0.0], [0.5], [-0.5]])
    phi = features(spec, centers, 0.25)
    assert phi.shape == (3,)
    assert features(spec, centers, np.linspace(-1, 1, 7)).shape == (7, 3)
    np.testing.assert_array_equal(lifted_state(spec, centers, 0.0), np.zeros(3))
    np.testing.assert_allclose(features(spec, centers, 0.0), [1.0, 0.1875, 0.1875])


@pytest.mark.parametrize("d", [2, 5, 9, 17, 33])
def test_kernel_matrix_positive_definite(d):
    spec = KernelSpec(n=1)
    K = kernel_matrix(spec, np.linspace(-1, 1, d)[:, None])
    assert K.min_eigenvalue > 0
    assert K.inverse_norm == pytest.approx(1 / K.min_eigenvalue)
    assert K.condition_estimate >= 1
    b = np.arange(d, dtype=float)
    np.testing.assert_allclose(K.entries @ K.solve(b), b, atol=1e-9)
    with pytest.raises(ValueError):
        K.entries[0, 0] = 2.0


def test_kernel_matrix_2d_positive_definite(rng):
    spec = KernelSpec(n=2, s=2, scale=1.5)
    K = kernel_matrix(spec, rng.uniform(-1, 1, (40, 2)))
    assert K.min_eigenvalue > 0


def test_duplicate_centers_rejected():
    spec = KernelSpec(n=1)
    with pytest.raises(DuplicateCentersError):
        kernel_matrix(spec, np.array([[0.0], [0.3], [0.3 + 1e-14]]))


@pytest.mark.parametrize("n,s", [(1, 1), (1, 3), (2, 1), (2, 2), (3, 3)])
def test_hessian_matches_finite_differences(n, s, rng):
    spec = KernelSpec(n=n, s=s, scale=1.3)
    center = rng.uniform(-0.5, 0.5, n)
    h = 1e-4
    for _ in range(10):
        x = center + rng.uniform(-0.9, 0.9, n)
        H = feature_hessian(spec, center, x)
        fd = np.empty((n, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = h
            fd[:, a] = (feature_gradient(spec, center, x + e) - feature_gradient(spec, center, x - e)) / (2 * h)
        np.testing.assert_allclose(H, fd, atol=1e-4)
        g = feature_gradient(spec, center, x)
        gfd = np.empty(n)
        for a in range(n):
            e = np.zeros(n)
            e[a] = h
            gfd[a] = (eval_kernel(spec, center, x + e) - eval_kernel(spec, center, x - e)) / (2 * h)
        np.testing.assert_allclose(g, gfd, atol=1e-4)


def test_hessian_at_center():
    spec = KernelSpec(n=2, s=1)
    np.testing.assert_allclose(feature_hessian(spec, [0.0, 0.0], [0.0, 0.0]), -20 * np.eye(2))


def test_hessian_spectral_norm_matches_eig(rng):
    spec = KernelSpec(n=3, s=2)
    for _ in range(20):
        x = rng.uniform(-0.6, 0.6, 3)
        H = feature_hessian(spec, np.zeros(3), x)
        assert hessian_spectral_norm(spec, np.linalg.norm(x)) == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(H))))


def test_D_phi_symbolic():
    phi = wendland_symbolic(1, 1)
    d2 = sp.diff(phi, R, 2)
    crit = [c for c in sp.solve(sp.diff(d2, R), R) if 0 <= c <= 1] + [0, 1]
    exact = max(abs(float(d2.subs(R, c))) for c in crit)
    assert exact == 20
    spec = KernelSpec(n=1)
    est = estimate_D_phi(spec, np.linspace(-1, 1, 9)[:, None], Box.interval(-1, 1))
    assert est.value == pytest.approx(20.0, abs=1e-3)
    assert est.resolution == 2001


def test_D_phi_scale():
    spec = KernelSpec(n=1, scale=2.0)
    est = estimate_D_phi(spec, [[0.0]], Box.interval(-1, 1))
    assert est.value == pytest.approx(5.0, abs=1e-9)


def test_rkhs_norms():
    per, total = rkhs_feature_norms(KernelSpec(n=1), np.zeros((9, 1)) + np.arange(9)[:, None])
    np.testing.assert_array_equal(per, np.ones(9))
    assert total == 3.0
