import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinepath.jumps import DiracAt, ExponentialOnCoordinate, JumpMeasure
from affinepath.levy import (
    CadlagPath,
    HorizonExceeded,
    InvariantViolation,
    dump_path,
    dyadic_approximant,
    extend_path,
    generate_path,
    split,
)
from affinepath.params import LevyTriplet


def pure_drift(beta):
    beta = np.asarray(beta, dtype=float)
    return LevyTriplet(beta, np.zeros((beta.size, beta.size)))


def jump_cir_triplet():
    return LevyTriplet(
        np.array([-0.5, 0.2]),
        np.diag([0.2, 0.0]),
        JumpMeasure(2.0, ExponentialOnCoordinate(2, 0, 0.3)),
    )


def test_pure_drift_values():
    p = generate_path(pure_drift([1.0, 0.0]), 2.0, seed=1)
    s = np.linspace(0, 2, 17)
    assert np.allclose(p.evaluate(s), np.column_stack([s, 0 * s]), atol=1e-12)


def test_point_mass_compensation_mean():
    tr = LevyTriplet(np.zeros(2), np.zeros((2, 2)), JumpMeasure(3.0, DiracAt((1.0, 0.0))))
    ends = np.array([generate_path(tr, 1.0, seed=5, stream=(k,)).evaluate(1.0)[0] for k in range(10_000)])
    # staircase with drift -3 between jumps; zero mean
    assert abs(ends.mean()) < 5 * ends.std() / 100
    p = generate_path(tr, 1.0, seed=5, stream=(0,))
    gaps = np.diff(p.grid_values[:, 0])
    assert np.allclose(gaps, -3.0 * p.mesh)


def test_determinism_and_extension():
    tr = jump_cir_triplet()
    a = generate_path(tr, 1.0, seed=9, stream=(3, 0))
    b = generate_path(tr, 1.0, seed=9, stream=(3, 0))
    assert np.array_equal(a.grid_values, b.grid_values) and np.array_equal(a.jump_times, b.jump_times)
    assert extend_path(a, a.horizon) is a
    two = extend_path(extend_path(a, 2.5), 5.0)
    one = generate_path(tr, 5.0, seed=9, stream=(3, 0))
    assert np.array_equal(two.grid_values, one.grid_values)
    assert np.array_equal(two.jump_sizes, one.jump_sizes)
    s = np.linspace(0, a.horizon, 50)
    assert np.array_equal(two.evaluate(s), a.evaluate(s))


def test_horizon_is_enforced():
    p = generate_path(pure_drift([1.0]), 1.0, seed=0)
    with pytest.raises(HorizonExceeded):
        p.evaluate(p.horizon + 0.1)


def test_right_continuity():
    p = CadlagPath(np.zeros((3, 1)), 0.5, np.array([0.3]), np.array([[2.0]]))
    assert p.evaluate(0.3)[0] == 2.0
    assert p.left_limit(0.3)[0] == 0.0
    assert p.evaluate(0.29)[0] == 0.0


def test_split_examples():
    p = generate_path(pure_drift([2.0, 3.0]), 1.0, seed=0)
    sp = split(p, 0, 2)
    s = np.linspace(0, 1, 11)
    assert np.allclose(sp.tilde.evaluate(s), np.column_stack([2 * s, 0 * s]))
    assert np.allclose(sp.notilde.evaluate(s), np.column_stack([0 * s, 3 * s]))
    q = CadlagPath(np.zeros((3, 2)), 0.5, np.array([0.4]), np.array([[1.0, 4.0]]))
    sq = split(q, 0, 2)
    assert np.allclose(sq.tilde.jump_sizes, [[1.0, 0.0]])
    assert np.allclose(sq.notilde.jump_sizes, [[0.0, 4.0]])


def test_split_reconstructs_parent():
    p = generate_path(jump_cir_triplet(), 3.0, seed=2)
    sp = split(p, 0, 1)
    s = np.concatenate([np.linspace(0, p.horizon, 1001), p.jump_times])
    assert np.max(np.abs(sp.evaluate(s) - p.evaluate(s))) <= 1e-12


def test_split_detects_decreasing_part():
    p = generate_path(pure_drift([0.0, -1.0]), 1.0, seed=0)
    with pytest.raises(InvariantViolation):
        split(p, 0, 2)


def test_dyadic_examples():
    zero = split(generate_path(pure_drift([1.0, 0.0]), 1.0, seed=0), 0, 2)
    for M in range(4):
        for direction in ("up", "down"):
            ap = dyadic_approximant(zero, M, direction)
            assert not ap.node_values.any()
    q = CadlagPath(np.zeros((1025, 2)), 2.0**-10, np.array([0.3]), np.array([[0.0, 1.0]]))
    sq = split(q, 0, 2)
    up = dyadic_approximant(sq, 1, "up")
    down = dyadic_approximant(sq, 1, "down")
    assert up.evaluate(np.array([0.0, 0.49]))[:, 1].tolist() == [0.0, 0.0]
    assert up.evaluate(np.array([0.5, 0.99]))[:, 1].tolist() == [1.0, 1.0]
    assert down.evaluate(np.array([0.0, 0.49]))[:, 1].tolist() == [1.0, 1.0]
    assert 0.3 in up.event_times and 0.5 in up.event_times


def two_driver_split(seed):
    tr = LevyTriplet(
        np.array([0.4, 0.7]), np.diag([0.3, 0.0]), JumpMeasure(3.0, DiracAt((0.1, 0.25))), np.array([True, False])
    )
    return split(generate_path(tr, 2.0, seed=seed), 0, 2)


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.integers(2, 7))
def test_approximant_sandwich_and_refinement(seed, M):
    sp = two_driver_split(seed)
    s = np.random.default_rng(seed).uniform(0, 1.5, 100)
    exact = sp.notilde.evaluate(s)[:, 1]
    up0 = dyadic_approximant(sp, M, "up").evaluate(s)[:, 1]
    up1 = dyadic_approximant(sp, M + 1, "up").evaluate(s)[:, 1]
    dn1 = dyadic_approximant(sp, M + 1, "down").evaluate(s)[:, 1]
    dn0 = dyadic_approximant(sp, M, "down").evaluate(s)[:, 1]
    assert np.all(up0 <= up1) and np.all(up1 <= exact) and np.all(exact <= dn1) and np.all(dn1 <= dn0)


def test_change_points_reproduce_approximant():
    sp = two_driver_split(4)
    for direction in ("up", "down"):
        ap = dyadic_approximant(sp, 5, direction)
        times, deltas = ap.change_points()
        s = np.linspace(0, ap.horizon - 1e-9, 333)
        rebuilt = ap.initial() + np.array([deltas[times <= v].sum(axis=0) for v in s])
        assert np.allclose(rebuilt, ap.evaluate(s))


def test_spectral_positivity_of_generated_jumps():
    p = generate_path(jump_cir_triplet(), 10.0, seed=3)
    assert p.jump_sizes.shape[0] > 0 and np.all(p.jump_sizes[:, 0] >= 0)


def test_dump_path_format():
    p = CadlagPath(np.array([[0.0], [0.5], [1.0]]), 0.5, np.array([0.7]), np.array([[0.25]]))
    buf = io.StringIO()
    dump_path(p, buf, ["seed = 1"])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# seed = 1"
    assert lines[2] == "s,Z1" and lines[3] == "0,0"
    assert lines[-1] == "0.69999999999999996,0.25"
