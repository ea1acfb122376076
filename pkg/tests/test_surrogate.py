import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbilinear import (
    KernelSpec,
    SamplingConfig,
    build_baseline,
    build_kedmd,
    build_kedmd_from_images,
    euler_maps,
    fit_all,
    generate,
    load_model,
    predict_step,
    residual,
    rollout,
    save_model,
)
from kbilinear.surrogate import monomial_exponents, monomial_lift


@pytest.mark.parametrize("d", [5, 9, 17])
def test_interpolation_identity(fitted, d):
    _, ests, model = fitted[d]
    assert model.interpolation_residual() < 1e-9
    for e in ests:
        x = model.centers[e.center_index]
        np.testing.assert_allclose(model.A @ model.features(x), model.features(e.f_hat), atol=1e-9)


@pytest.mark.parametrize("d", [5, 9, 17])
def test_equilibrium(fitted, zone, sampling, d):
    model = fitted[d][2]
    assert model.equilibrium_residual() < 1e-9
    assert np.linalg.norm(residual(model, zone, sampling, 0.0, 0.0)) < 1e-8
    np.testing.assert_array_equal(model.lift(0.0), np.zeros(d))
    np.testing.assert_allclose(predict_step(model, np.zeros(d), 0.0), 0.0, atol=1e-12)


def test_input_channel_identity(fitted):
    # B_i Phi(x_j) = Phi(f_hat + G_hat e_i) - Phi(f_hat) at every center
    model = fitted[9][2]
    for j, x in enumerate(model.centers):
        lhs = model.B[0] @ model.features(x)
        rhs = model.features(model.f_images[j] + model.G_images[j, :, 0]) - model.features(model.f_images[j])
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)
    np.testing.assert_allclose(model.B0[:, 0], model.B[0] @ model.phi0)


def test_true_images_variant(zone, k1):
    # with exact Euler-map images the residual at centers is only the O(dt^2) Euler defect
    pts = np.linspace(-1, 1, 9)
    pts = np.concatenate([[0.0], pts[pts != 0]])[:, None]
    u = np.full(9, 1.5)
    res = []
    dts = (0.01, 0.005, 0.0025)
    for dt in dts:
        sm = SamplingConfig(dt)
        f, _, G = euler_maps(zone, sm, pts)
        model = build_kedmd_from_images(k1, pts, f, G)
        res.append(np.max(np.abs(residual(model, zone, sm, pts, u))))
    slope = np.polyfit(np.log(dts), np.log(res), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_validation_of_estimates(fitted, k1):
    data, ests, _ = fitted[5]
    with pytest.raises(ValueError):
        build_kedmd(data.centers, ests[1:], k1)
    with pytest.raises(ValueError):
        build_kedmd(data.centers.points[::-1], ests, k1)


def test_condition_warning(zone, k1):
    pts = np.array([[0.0], [1e-4], [2e-4]])
    with pytest.warns(UserWarning, match="condition"):
        m = build_kedmd_from_images(k1, pts, pts, np.ones((3, 1, 1)) * 0.01, cond_threshold=10.0)
    assert m.build_report["warnings"]


@given(st.integers(1, 6), st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_batch_matches_single(count, seed):
    model = _model()
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, count)
    U = rng.uniform(-2, 2, count)
    batch = predict_step(model, model.lift(X[:, None]), U[:, None])
    for k in range(count):
        np.testing.assert_allclose(batch[k], predict_step(model, model.lift(X[k]), U[k]), atol=1e-14)


_CACHE = {}


def _model():
    if "m" not in _CACHE:
        from kbilinear import zone_temp_benchmark

        k = KernelSpec(1)
        data = generate(zone_temp_benchmark(), SamplingConfig(0.01), k, 7, seed=2)
        _CACHE["m"] = build_kedmd(data.centers, fit_all(data.triplets), k)
    return _CACHE["m"]


def test_rollout_shapes(rng):
    model = _model()
    single = rollout(model, 0.0, rng.uniform(-2, 2, (12, 1)))
    assert single.states.shape == (13, 7) and not single.truncated
    batch = rollout(model, np.zeros((4, 1)), rng.uniform(-2, 2, (4, 12, 1)))
    assert batch.states.shape == (4, 13, 7)
    np.testing.assert_array_equal(batch.states[:, 0], 0.0)


def test_rollout_truncates_on_blowup():
    model = _model()
    wild = type(model)(**{**model.__dict__, "A": model.A * 1e200})
    out = rollout(wild, 0.5, np.ones((20, 1)))
    assert out.truncated
    assert np.all(np.isfinite(out.states))


def test_residual_small_near_origin(zone, sampling):
    model = _model()
    r_near = np.linalg.norm(residual(model, zone, sampling, 0.01, 0.01))
    r_far = np.linalg.norm(residual(model, zone, sampling, 0.9, 1.9))
    assert r_near < r_far


def test_model_round_trip(tmp_path, rng):
    model = _model()
    path = save_model(model, tmp_path / "m.json")
    back = load_model(path)
    for name in ("A", "B", "B0", "phi0", "centers", "f_images", "G_images"):
        np.testing.assert_array_equal(getattr(back, name), getattr(model, name))
    psi = model.lift(rng.uniform(-1, 1, (10, 1)))
    U = rng.uniform(-2, 2, (10, 1))
    np.testing.assert_array_equal(predict_step(back, psi, U), predict_step(model, psi, U))
    assert back.build_report["condition"] == model.build_report["condition"]


def test_monomials():
    np.testing.assert_array_equal(monomial_lift(2.0, 1), [2.0, 4.0, 8.0])
    assert len(monomial_exponents(2, 3)) == 9
    assert monomial_lift(np.array([[1.0, 2.0]]), 2, 2).tolist() == [[1.0, 2.0, 1.0, 2.0, 4.0]]


def test_baselines_are_least_squares_solutions(zone, k1, sampling):
    data = generate(zone, sampling, k1, 9, seed=0)
    X, U, Xp = data.pooled()
    with pytest.warns(UserWarning, match="rank deficient"):
        kernel_model = build_baseline(X, U, Xp, "kernel", k1, data.centers)
    assert kernel_model.warnings
    mono = build_baseline(X, U, Xp, "monomial")
    assert mono.rank == 7 and not mono.warnings
    for model in (kernel_model, mono):
        P = model.lift(X)
        Z = np.hstack([P, U, U * P])
        fit = predict_step(model, P, U)
        # normal equations: the misfit is orthogonal to every regressor
        np.testing.assert_allclose(Z.T @ (fit - model.lift(Xp)), 0.0, atol=1e-9)
    with pytest.raises(ValueError):
        build_baseline(X, U, Xp, "fourier")


def test_monomial_baseline_recovers_linear_system(rng):
    # x+ = 0.9 x + 0.1 u + 0.05 u x is exactly bilinear in the degree-1 monomial
    X = rng.uniform(-1, 1, (40, 1))
    U = rng.uniform(-2, 2, (40, 1))
    Xp = 0.9 * X + 0.1 * U + 0.05 * U * X
    model = build_baseline(X, U, Xp, "monomial", degree=1)
    np.testing.assert_allclose(model.A, [[0.9]], atol=1e-12)
    np.testing.assert_allclose(model.B0, [[0.1]], atol=1e-12)
    np.testing.assert_allclose(model.B[0], [[0.05]], atol=1e-12)
