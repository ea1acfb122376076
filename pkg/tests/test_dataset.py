import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbilinear import (
    Box,
    DatasetFormatError,
    ExcitationError,
    build_centers,
    collect,
    excite_inputs,
    fill_distance,
    flow,
    generate,
    load_dataset,
    save_dataset,
)
from kbilinear.dataset import sigma_min


def test_five_centers(zone, k1, sampling):
    data = generate(zone, sampling, k1, 5, d_j=2, seed=0)
    assert data.n_triplets == 10
    assert data.centers.fill_distance == pytest.approx(0.25, abs=1e-3)
    np.testing.assert_array_equal(data.centers.points[0], [0.0])
    assert sorted(data.centers.points[:, 0]) == [-1.0, -0.5, 0.0, 0.5, 1.0]


def test_even_grid_moves_nearest_point_to_origin():
    with pytest.warns(UserWarning, match="origin"):
        c = build_centers(Box.interval(-1, 1), 4)
    assert c.d == 4
    assert c.points[0, 0] == 0.0
    assert len(set(c.points[:, 0])) == 4


def test_odd_grid_no_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_centers(Box.interval(-1, 1), 9)


def test_two_dimensional_grid():
    c = build_centers(Box((-1, -2), (1, 2)), 9, fill_resolution=10_000)
    assert c.d == 9 and c.n == 2
    np.testing.assert_array_equal(c.points[0], [0.0, 0.0])
    assert c.fill_distance == pytest.approx(np.hypot(0.5, 1.0), abs=0.02)


def test_too_few_centers():
    with pytest.raises(ValueError):
        build_centers(Box.interval(-1, 1), 1)


def test_fill_distance_resolution_floor():
    with pytest.raises(ValueError):
        fill_distance(np.zeros((20, 1)), Box.interval(-1, 1), 100)


@given(st.integers(3, 40))
@settings(max_examples=25, deadline=None)
def test_fill_distance_halves_spacing(d):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        c = build_centers(Box.interval(-1, 1), d, 20_000)
    gaps = np.diff(np.sort(c.points[:, 0]))
    assert c.fill_distance <= gaps.max() / 2 + 1e-12
    assert c.fill_distance >= gaps.max() / 2 - 2 / 20_000


def test_excitation_floor(rng):
    U = excite_inputs(Box.interval(-2, 2), 2, rng, sigma_threshold=0.5)
    assert sigma_min(U) >= 0.5
    with pytest.raises(ExcitationError):
        excite_inputs(Box.interval(-2, 2), 2, 0, sigma_threshold=50.0, max_attempts=5)
    with pytest.raises(ValueError):
        excite_inputs(Box.interval(-2, 2), 1, 0)


def test_sigma_min_examples():
    assert sigma_min(np.array([[1.0], [1.0]])) == pytest.approx(0.0, abs=1e-15)
    assert sigma_min(np.array([[1.0], [-1.0]])) == pytest.approx(np.sqrt(2))
    assert sigma_min(np.array([[1.0]])) == 0.0


def test_collect_matches_flow(zone, k1, sampling):
    data = generate(zone, sampling, k1, 5, seed=3)
    for t in data.triplets:
        for u, xp in zip(t.inputs, t.successors):
            np.testing.assert_array_equal(xp, flow(zone, sampling, t.center, u))


def test_collect_plan_length(zone, sampling):
    c = build_centers(zone.state_box, 5)
    with pytest.raises(ValueError):
        collect(zone, sampling, c, [np.ones((2, 1))])


def test_generate_deterministic(zone, k1, sampling):
    a = generate(zone, sampling, k1, 7, seed=11)
    b = generate(zone, sampling, k1, 7, seed=11)
    for ta, tb in zip(a.triplets, b.triplets):
        np.testing.assert_array_equal(ta.inputs, tb.inputs)
        np.testing.assert_array_equal(ta.successors, tb.successors)


def test_save_load_round_trip(zone, k1, sampling, tmp_path):
    data = generate(zone, sampling, k1, 5, seed=1)
    save_dataset(data, tmp_path / "ds")
    back = load_dataset(tmp_path / "ds")
    np.testing.assert_array_equal(back.centers.points, data.centers.points)
    assert back.kernel == k1 and back.sampling == sampling and back.seed == 1
    assert back.centers.fill_distance == data.centers.fill_distance
    for ta, tb in zip(data.triplets, back.triplets):
        np.testing.assert_array_equal(ta.inputs, tb.inputs)
        np.testing.assert_array_equal(ta.successors, tb.successors)
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert manifest["n"] == 1 and manifest["m"] == 1
    assert (tmp_path / "ds" / "triplets.csv").read_text().splitlines()[0] == "j,l,u_1,xplus_1"


@pytest.fixture
def saved(zone, k1, sampling, tmp_path):
    save_dataset(generate(zone, sampling, k1, 5, seed=1), tmp_path / "ds")
    return tmp_path / "ds"


def test_load_reports_bad_field(saved):
    f = saved / "triplets.csv"
    lines = f.read_text().splitlines()
    parts = lines[3].split(",")
    parts[2] = "abc"
    lines[3] = ",".join(parts)
    f.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError, match=r"triplets.csv:4: field 'u_1'"):
        load_dataset(saved)


def test_load_rejects_nonzero_first_center(saved):
    f = saved / "centers.csv"
    lines = f.read_text().splitlines()
    lines[1] = "0,0.5"
    f.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError, match="origin"):
        load_dataset(saved)


def test_load_rejects_underexcited_center(saved):
    f = saved / "triplets.csv"
    lines = f.read_text().splitlines()
    f.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DatasetFormatError, match="d_j=1"):
        load_dataset(saved)


def test_load_missing_files(tmp_path):
    with pytest.raises(DatasetFormatError):
        load_dataset(tmp_path)
