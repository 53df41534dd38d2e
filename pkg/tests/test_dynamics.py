import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invariset.dynamics import (
    PWA_GENERATORS,
    PWA_MATRICES,
    Chatala,
    ConstraintBox,
    DimensionMismatchError,
    Example1,
    ExternalSystem,
    LinearMap,
    Lure,
    PWA,
    ProcessDiedError,
    ProtocolError,
    SimulationError,
    example_system,
    exit_times,
    lure_nonlinearity,
    simulate,
    step,
    step_batch,
)
from invariset.oracle import grid_centers

# --- straight-line scalar re-implementations used as oracles ----------------


def ref_example1(x1, x2):
    a = 2 * x1 ** 2 + x2
    return a, -2 * a ** 2 - 0.8 * x1


def ref_phi(y):
    if y < 0:
        return -ref_phi(-y)
    if y < 2:
        return y
    if y < 4:
        return 0.25 * y + 1.5
    return 2.5


def ref_lure(x1, x2):
    u = ref_phi(0.6290 * x1 + 1.2261 * x2)
    return 1.2 * x1 + x2 - 0.5 * u, 1.2 * x2 - u


def ref_chatala(x1, x2):
    return x1 + x2, -0.5952 + x1 ** 2


def expm_series(m, terms=50):
    out = np.eye(2)
    term = np.eye(2)
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


def ref_pwa(x1, x2):
    a = expm_series(PWA_GENERATORS[0]) if abs(x1) > abs(x2) else expm_series(PWA_GENERATORS[1])
    return tuple(a @ np.array([x1, x2]))


REFERENCE = {"example1": ref_example1, "lure": ref_lure, "chatala": ref_chatala, "pwa": ref_pwa}


# --- box ----------------------------------------------------------------------


def test_box_rejects_degenerate_axis():
    with pytest.raises(ValueError):
        ConstraintBox([0.0, 0.0], [1.0, 0.0])


def test_box_volume_and_membership():
    box = ConstraintBox.symmetric(1.0, 2.0)
    assert box.volume == 8.0
    assert box.diameter == pytest.approx(math.hypot(2, 4))
    assert box.contains([1.0, -2.0])  # closed
    assert not box.contains([1.0 + 1e-12, 0.0])
    np.testing.assert_array_equal(box.contains(np.array([[0, 0], [3, 0]])), [True, False])


# --- one-step maps --------------------------------------------------------------


def test_example1_fixed_point():
    np.testing.assert_array_equal(step(Example1(), [0.0, 0.0]), [0.0, 0.0])


def test_example1_hand_value():
    np.testing.assert_allclose(step(Example1(), [0.1, 0.1]), [0.12, -0.1088], rtol=0, atol=1e-15)


def test_chatala_near_fixed_point():
    y = step(Chatala(), [0.7715, 0.0])
    assert y[0] == 0.7715
    assert abs(y[1]) < 2e-5


def test_pwa_branch_selection():
    sys_ = PWA()
    x = np.array([2.0, 1.0])
    np.testing.assert_allclose(sys_.step(x), PWA.A1 @ x, rtol=0, atol=1e-14)
    x = np.array([1.0, -2.0])
    np.testing.assert_allclose(sys_.step(x), PWA.A2 @ x, rtol=0, atol=1e-14)
    x = np.array([1.5, -1.5])  # tie goes to the second matrix
    np.testing.assert_allclose(sys_.step(x), PWA.A2 @ x, rtol=0, atol=1e-14)


@pytest.mark.parametrize("i", [0, 1])
def test_pwa_matrices_match_power_series(i):
    np.testing.assert_allclose(PWA_MATRICES[i], expm_series(PWA_GENERATORS[i]), rtol=0, atol=1e-12)


@pytest.mark.parametrize("y, expected", [(0.0, 0.0), (2.0, 2.0), (-5.0, -2.5), (1.0, 1.0), (3.0, 2.25), (-3.0, -2.25)])
def test_lure_nonlinearity_values(y, expected):
    assert lure_nonlinearity(y) == pytest.approx(expected, abs=1e-15)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_lure_nonlinearity_odd_and_bounded(y):
    assert lure_nonlinearity(-y) == -lure_nonlinearity(y)
    assert abs(lure_nonlinearity(y)) <= 2.5


@pytest.mark.parametrize("tag", sorted(REFERENCE))
def test_builtin_examples_match_reference_on_grid(tag):
    system, box = example_system(tag)
    pts = grid_centers(box, 60)
    got = step_batch(system, pts)
    ref = np.array([REFERENCE[tag](*p) for p in pts])
    scale = np.maximum(1.0, np.abs(ref))
    assert np.max(np.abs(got - ref) / scale) <= 1e-12


@pytest.mark.parametrize("tag", sorted(REFERENCE))
def test_batch_and_single_step_bitwise_equal(tag):
    system, box = example_system(tag)
    pts = grid_centers(box, 25)
    batch = step_batch(system, pts)
    single = np.array([system.step(p) for p in pts])
    assert np.array_equal(batch, single)
    assert np.array_equal(batch, step_batch(system, pts))  # determinism


def test_non_finite_step_is_an_error():
    class Blowup:
        def dim(self):
            return 1

        def step(self, x):
            return np.array([np.inf])

    with pytest.raises(SimulationError) as info:
        step(Blowup(), [0.5])
    np.testing.assert_array_equal(info.value.state, [0.5])


def test_step_checks_dimension():
    with pytest.raises(ValueError):
        step(Example1(), [0.0, 0.0, 0.0])


# --- simulation -----------------------------------------------------------------


def test_contraction_never_exits():
    traj = simulate(LinearMap(0.5 * np.eye(2)), [0.9, 0.9], ConstraintBox.symmetric(1, 1), 10)
    assert traj.first_exit is None
    assert len(traj) == 11


def test_example1_exits_at_step_one():
    traj = simulate(Example1(), [1.0, 1.0], Example1.default_box, 50)
    assert traj.first_exit == 1
    np.testing.assert_allclose(traj.states[-1], [3.0, -18.8])


def test_origin_stays():
    assert simulate(Example1(), [0.0, 0.0], Example1.default_box, 50).first_exit is None


def test_simulate_rejects_outside_start():
    with pytest.raises(ValueError):
        simulate(Example1(), [2.0, 0.0], Example1.default_box, 5)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(REFERENCE)), st.floats(0, 1), st.floats(0, 1))
def test_trajectory_consistency_and_exit_minimality(tag, u, v):
    system, box = example_system(tag)
    x0 = box.lower + np.array([u, v]) * (box.upper - box.lower)
    traj = simulate(system, x0, box, 60)
    for t in range(len(traj) - 1):
        assert np.array_equal(traj.states[t + 1], system.step(traj.states[t]))
    inside = box.contains(traj.states)
    if traj.first_exit is None:
        assert inside.all()
    else:
        assert inside[: traj.first_exit].all() and not inside[traj.first_exit]
        assert len(traj) == traj.first_exit + 1


def test_exit_times_agree_with_simulate():
    system, box = example_system("chatala")
    pts = grid_centers(box, 15)
    times = exit_times(system, pts, box, 40)
    for p, t in zip(pts, times):
        traj = simulate(system, p, box, 40)
        assert (traj.first_exit or 0) == t


# --- external process protocol ----------------------------------------------------


def test_external_echo_is_identity(echo_command):
    with ExternalSystem(echo_command) as ext:
        assert ext.dim() == 2
        x = np.array([0.1, -1.0 / 3.0])
        assert np.array_equal(ext.step(x), x)  # shortest repr round-trips exactly


def test_external_matches_builtin_example1(example1_command):
    system, box = example_system("example1")
    pts = grid_centers(box, 12)
    with ExternalSystem(example1_command) as ext:
        got = np.array([ext.step(p) for p in pts])
        traj_ext = simulate(ext, [0.3, -0.2], box, 20)
    np.testing.assert_allclose(got, step_batch(system, pts), rtol=0, atol=1e-12)
    traj = simulate(system, [0.3, -0.2], box, 20)
    assert traj.first_exit == traj_ext.first_exit
    np.testing.assert_allclose(traj.states, traj_ext.states, rtol=0, atol=1e-12)


def test_external_dimension_mismatch(three_numbers_command):
    with ExternalSystem(three_numbers_command) as ext:
        with pytest.raises(DimensionMismatchError):
            ext.step([0.0, 0.0])
        with pytest.raises(DimensionMismatchError):
            ext.step([0.0, 0.0, 0.0])


def test_external_malformed_reply(garbage_command):
    with ExternalSystem(garbage_command) as ext:
        with pytest.raises(ProtocolError):
            ext.step([0.0, 0.0])


def test_external_process_death(dying_command):
    with ExternalSystem(dying_command) as ext:
        with pytest.raises(ProcessDiedError):
            ext.step([0.0, 0.0])
        with pytest.raises(ProcessDiedError):
            ext.step([0.0, 0.0])


def test_external_clone_is_independent(echo_command):
    with ExternalSystem(echo_command) as a, a.clone() as b:
        assert a._proc.pid != b._proc.pid
        assert np.array_equal(a.step([1.0, 2.0]), b.step([1.0, 2.0]))


def test_serve_module_speaks_protocol():
    import sys

    with ExternalSystem([sys.executable, "-m", "invariset.dynamics", "chatala"]) as ext:
        x = np.array([0.25, -0.5])
        assert np.array_equal(ext.step(x), Chatala().step(x))
