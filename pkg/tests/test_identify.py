import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geometry_props import check_exact_split, check_inflation, check_monotone_in_reference
from invariset.dynamics import ConstraintBox, LinearMap, example_system
from invariset.horizon import estimate_horizon
from invariset.identify import (
    LabeledReference,
    NearestNeighborIndex,
    Phase2Config,
    SetClassifier,
    classify,
    h_value,
    identify_set,
    label_points,
    nn_distance,
    solve_delta_star,
)
from invariset.oracle import brute_force_delta_star, brute_force_nn_distance
from invariset.sampling import phase1_sample_size, sample_uniform, scenario_confidence

SQUARE = ConstraintBox.symmetric(1.0, 1.0)


def ref(inside, outside, t_star=1):
    return LabeledReference.from_sets(inside, outside, t_star, dim=2)


# --- nearest neighbours -----------------------------------------------------------


def test_nn_distance_examples():
    idx = NearestNeighborIndex([[0.0, 0.0], [3.0, 4.0]])
    assert nn_distance(idx, [0.0, 0.0]) == 0.0
    assert nn_distance(idx, [3.0, 0.0]) == 3.0
    assert nn_distance(idx, [3.0, 5.0]) == 1.0


def test_nn_distance_empty_index():
    assert nn_distance(NearestNeighborIndex(np.zeros((0, 2))), [0.5, 0.5]) == np.inf


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 300), st.integers(1, 3))
def test_nn_matches_brute_force(seed, n, dim):
    rng = np.random.default_rng(seed)
    P, Q = rng.normal(size=(n, dim)), rng.normal(size=(50, dim))
    np.testing.assert_allclose(NearestNeighborIndex(P).query(Q), brute_force_nn_distance(P, Q), rtol=0, atol=1e-12)


# --- labelling ----------------------------------------------------------------------


def test_label_points_example1():
    system, box = example_system("example1")
    lab = label_points(system, [[0.0, 0.0], [1.0, 1.0]], box, 3)
    assert lab.inside_mask.tolist() == [True, False]


def test_label_points_zero_horizon_keeps_everything():
    system, box = example_system("example1")
    pts = sample_uniform(box, 50, seed=0).points
    assert label_points(system, pts, box, 0).inside_mask.all()


def test_label_points_rejects_points_outside_box():
    system, box = example_system("example1")
    with pytest.raises(ValueError):
        label_points(system, [[2.0, 0.0]], box, 1)


# --- classification -----------------------------------------------------------------


def test_classify_examples():
    r = ref([[0.0, 0.0]], [[1.0, 0.0]])
    assert classify(SetClassifier(r, 0.0, SQUARE), [0.0, 0.0])
    assert not classify(SetClassifier(r, 0.0, SQUARE), [0.75, 0.0])
    assert classify(SetClassifier(r, 0.5, SQUARE), [0.75, 0.0])  # boundary counts
    assert classify(SetClassifier(r, SQUARE.diameter, SQUARE), [0.99, -0.99])
    assert not classify(SetClassifier(r, 10.0, SQUARE), [1.5, 0.0])  # box first


def test_empty_side_conventions():
    pts = sample_uniform(SQUARE, 100, seed=1).points
    no_outside = SetClassifier(ref([[0.0, 0.0]], np.zeros((0, 2))), -5.0, SQUARE)
    assert no_outside.contains(pts).all()
    no_inside = SetClassifier(ref(np.zeros((0, 2)), [[0.0, 0.0]]), 5.0, SQUARE)
    assert not no_inside.contains(pts).any()
    neither = SetClassifier(ref(np.zeros((0, 2)), np.zeros((0, 2))), 5.0, SQUARE)
    assert not neither.contains(pts).any()


def test_h_value_examples():
    r = ref([[0.0, 0.0]], np.zeros((0, 2)))
    assert h_value(np.array([0.0, 0.0]), True, r) == 0.0
    assert h_value(np.array([0.3, 0.0]), True, r) == pytest.approx(0.3)
    assert h_value(np.array([0.3, 0.0]), False, r) == np.inf


def test_solve_delta_star_examples():
    r = ref([[0.0, 0.0], [0.5, 0.5]], [[0.9, 0.9]])
    assert solve_delta_star(r, r) == 0.0
    assert solve_delta_star(ref([[0.2, 0.0]], np.zeros((0, 2))), r) == pytest.approx(0.2)
    assert solve_delta_star(ref(np.zeros((0, 2)), np.zeros((0, 2))), r) == 0.0
    assert solve_delta_star(ref(np.zeros((0, 2)), [[0.0, 0.0]]), ref([[0.0, 0.0]], np.zeros((0, 2)))) == np.inf
    with pytest.raises(ValueError):
        solve_delta_star(ref([[0.0, 0.0]], [], t_star=2), r)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_delta_star_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n_ref, n_test = rng.integers(2, 120, size=2)
    R = rng.uniform(-1, 1, size=(n_ref, 2))
    T = rng.uniform(-1, 1, size=(n_test, 2))
    lr, lt = rng.random(n_ref) < 0.5, rng.random(n_test) < 0.5
    lr[0], lr[1] = True, False
    got = solve_delta_star(LabeledReference(T, lt, 1), LabeledReference(R, lr, 1))
    assert got == pytest.approx(brute_force_delta_star(T, lt, R, lr), abs=1e-12)


# --- geometric properties ---------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_exact_split_property(seed):
    assert check_exact_split(np.random.default_rng(seed))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_monotone_in_reference(seed):
    assert check_monotone_in_reference(np.random.default_rng(seed))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_inflation_inequalities(seed):
    assert check_inflation(np.random.default_rng(seed))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.floats(-1, 1), st.floats(0, 1))
def test_radius_monotone_and_sandwich(seed, r, gap):
    rng = np.random.default_rng(seed)
    clf = SetClassifier(ref(rng.uniform(-1, 1, (20, 2)), rng.uniform(-1, 1, (20, 2))), r, SQUARE)
    X = rng.uniform(-1, 1, (300, 2))
    small, large = clf.contains(X), clf.with_radius(r + gap).contains(X)
    assert np.all(large[small])


# --- the identification loop --------------------------------------------------------


@pytest.fixture(scope="module")
def example1_phase1():
    system, box = example_system("example1")
    omega = sample_uniform(box, phase1_sample_size(1e-3, 0.05), seed=7)
    return system, box, omega, estimate_horizon(system, omega, box)


def test_generous_tolerance_stops_after_one_round(example1_phase1):
    system, box, omega, hz = example1_phase1
    res = identify_set(system, omega, hz, box, Phase2Config(delta_bar=box.diameter, n_delta=500), seed=7)
    assert len(res.rounds) == 1 and res.converged


def test_reference_grows_by_test_size_each_round(example1_phase1):
    system, box, omega, hz = example1_phase1
    seen = []
    res = identify_set(system, omega, hz, box, Phase2Config(delta_bar=0.02), seed=7, callback=seen.append)
    assert seen == res.rounds
    sizes = [r.n_reference for r in res.rounds]
    assert sizes[0] == omega.count
    assert all(b - a == res.n_delta for a, b in zip(sizes, sizes[1:]))
    assert len(res.reference) == sizes[-1] + res.n_delta
    assert res.converged and res.delta_star <= 0.02
    assert res.beta_delta == scenario_confidence(res.n_delta, 1e-3, 1) < 0.01


def test_tighter_tolerance_needs_more_work(example1_phase1):
    system, box, omega, hz = example1_phase1
    loose = identify_set(system, omega, hz, box, Phase2Config(delta_bar=0.02), seed=7)
    tight = identify_set(system, omega, hz, box, Phase2Config(delta_bar=0.01), seed=7)
    assert len(tight.rounds) >= len(loose.rounds)
    assert len(tight.reference) >= len(loose.reference)


def test_inner_inside_outer(example1_phase1):
    system, box, omega, hz = example1_phase1
    res = identify_set(system, omega, hz, box, Phase2Config(delta_bar=0.05), seed=7)
    X = sample_uniform(box, 20000, seed=99).points
    inner, outer = res.inner.contains(X), res.outer.contains(X)
    assert np.all(outer[inner])
    assert res.inner.radius == -res.outer.radius == -res.delta_star


def test_round_cap_is_flagged(example1_phase1, caplog):
    system, box, omega, hz = example1_phase1
    res = identify_set(system, omega, hz, box, Phase2Config(delta_bar=1e-9, max_rounds=2, n_delta=200), seed=7)
    assert res.hit_round_cap and len(res.rounds) == 2
    assert "stopped after 2 rounds" in caplog.text


def test_invariant_system_has_everything_inside():
    system = LinearMap(0.5 * np.eye(2))
    omega = sample_uniform(SQUARE, 300, seed=0)
    res = identify_set(system, omega, 0, SQUARE, Phase2Config(delta_bar=0.1, n_delta=300), seed=0)
    assert res.delta_star < 0.1
    assert res.outer.contains(sample_uniform(SQUARE, 1000, seed=5).points).all()


def test_config_validation():
    for bad in (dict(delta_bar=0), dict(delta_bar=0.1, d=0), dict(delta_bar=0.1, max_rounds=0),
                dict(delta_bar=0.1, eps_tilde=2.0), dict(delta_bar=0.1, d=3, n_delta=2)):
        with pytest.raises(ValueError):
            Phase2Config(**bad).validate()
    assert Phase2Config(delta_bar=0.1).test_size() == 4603
    assert Phase2Config(delta_bar=0.1, n_delta=4800).test_size() == 4800
