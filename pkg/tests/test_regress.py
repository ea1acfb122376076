import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kbilinear import ExcitationError, SamplingConfig, TripletSet, fit_local, generate, perturbation_gap
from kbilinear.bounds import compute_C3, excitation_of
from kbilinear.system import estimate_constants

finite = st.floats(-3, 3, allow_nan=False)


@given(
    arrays(float, 2, elements=finite),
    arrays(float, (2, 2), elements=finite),
    st.integers(3, 8),
    st.integers(0, 2**31),
)
@settings(max_examples=50, deadline=None)
def test_exact_recovery_of_affine_data(f, G, d_j, seed):
    rng = np.random.default_rng(seed)
    U = rng.uniform(-2, 2, (d_j, 2))
    Xp = f + U @ G.T
    est = fit_local(TripletSet(1, [0.3, 0.1], U, Xp))
    np.testing.assert_allclose(est.f_hat, f, atol=1e-9)
    np.testing.assert_allclose(est.G_hat, G, atol=1e-9)
    assert est.H_hat.shape == (2, 3)


def test_origin_pins_drift():
    U = np.array([[1.0], [-0.5], [2.0]])
    Xp = 0.3 * U + 0.01
    est = fit_local(TripletSet(0, [0.0], U, Xp), is_origin=True)
    assert est.f_hat[0] == 0.0
    assert est.G_hat[0, 0] == pytest.approx(0.3 + 0.01 * U.sum() / (U**2).sum())


def test_rank_deficient_inputs():
    U = np.array([[1.0], [1.0]])
    with pytest.raises(ExcitationError):
        fit_local(TripletSet(2, [0.5], U, np.ones((2, 1))))


def test_gap_within_dt_squared(zone, k1):
    # the regression gap stays below dt^2 C3 at every center
    consts = estimate_constants(zone)
    for dt in (0.1, 0.02):
        sm = SamplingConfig(dt)
        data = generate(zone, sm, k1, 9, seed=0)
        C3 = compute_C3(consts, excitation_of(data.triplets))
        for t in data.triplets:
            est = fit_local(t, t.center_index == 0)
            gap, bound = perturbation_gap(est, zone, sm, t.center, C3)
            assert gap <= bound


def test_gap_bound_nan_without_C3(zone, k1, sampling):
    data = generate(zone, sampling, k1, 5, seed=0)
    est = fit_local(data.triplets[1])
    gap, bound = perturbation_gap(est, zone, sampling, data.triplets[1].center)
    assert gap >= 0 and np.isnan(bound)
