import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import euler_tau

from affinepath.jumps import DiracAt, ExponentialOnCoordinate, JumpMeasure
from affinepath.levy import CadlagPath, HorizonExceeded, generate_path, split
from affinepath.params import LevyTriplet
from affinepath.timechange import (
    ConvergenceFailure,
    DiagonalProfile,
    PastingLimitExceeded,
    assemble,
    solve_converged,
    solve_diagonal,
    solve_pasted,
)


def drift_profile(b, horizon=20.0, mesh=2.0**-6):
    nodes = np.arange(int(horizon / mesh) + 1) * mesh
    return DiagonalProfile.from_arrays(nodes, b * nodes)


def test_constant_field():
    prof = DiagonalProfile.from_arrays([0.0, 10.0], [0.0, 0.0])
    sol = solve_diagonal(prof, 2.0, 1.0, 0.5, 3.0)
    t = np.linspace(1.0, 3.0, 9)
    assert np.allclose(sol.evaluate(t), 0.5 + 2.0 * (t - 1.0), atol=1e-14)


@pytest.mark.parametrize("b", [0.7, -0.4])
def test_linear_field_closed_form(b):
    x, t0, tau0 = 1.3, 0.2, 0.4
    sol = solve_diagonal(drift_profile(b), x, t0, tau0, 2.0)
    t = np.linspace(t0, 2.0, 41)
    e = np.exp(b * (t - t0))
    assert np.allclose(sol.evaluate(t), x * (e - 1) / b + tau0 * e, rtol=1e-12, atol=1e-13)


def test_absorption_by_negative_jump():
    x, s_star = 0.8, 0.5
    prof = DiagonalProfile.from_arrays([0.0, 5.0], [0.0, 0.0], [s_star], [-x])
    sol = solve_diagonal(prof, x, 0.0, 0.0, 3.0)
    t = np.linspace(0, 3, 31)
    tau = sol.evaluate(t)
    assert np.allclose(tau, np.minimum(x * t, s_star))
    assert sol.absorbed_at == pytest.approx(s_star / x)


def test_horizon_request():
    prof = drift_profile(0.5, horizon=1.0)
    with pytest.raises(HorizonExceeded):
        solve_diagonal(prof, 1.0, 0.0, 0.0, 5.0)


def drivers(seed, betas, jumps=None, horizon=8.0, alpha=None):
    """Driver k compensates its own coordinate and the real-valued ones."""
    out = []
    m = len(betas)
    for k, beta in enumerate(betas):
        d = len(beta)
        mask = np.arange(d) >= m
        mask[k] = True
        tr = LevyTriplet(
            np.asarray(beta, dtype=float),
            np.zeros((d, d)) if alpha is None else alpha[k],
            jumps[k] if jumps else JumpMeasure(),
            mask,
        )
        out.append(generate_path(tr, horizon, seed=seed, stream=(0, k)))
    return out


def test_no_increasing_part_means_no_pastes():
    Z = drivers(1, [[0.3, 0.0], [0.0, -0.2]])
    sps = [split(z, k, 2) for k, z in enumerate(Z)]
    sol = solve_pasted(sps, np.array([1.0, 2.0]), 5, "up", 1.0)
    assert sol.n_pastes == 0
    for k, (b, x) in enumerate([(0.3, 1.0), (-0.2, 2.0)]):
        diag = solve_diagonal(DiagonalProfile.from_split(sps[k]), x, 0.0, 0.0, 1.0)
        assert np.allclose(sol.tau[:, k], diag.evaluate(sol.output_grid), atol=1e-14)
        assert np.allclose(sol.tau[:, k], x * np.expm1(b * sol.output_grid) / b, rtol=1e-10)
    conv = solve_converged(sps, np.array([1.0, 2.0]), 1.0)
    assert conv.gap == 0.0 and conv.level == 4


def test_off_diagonal_dirac_against_euler():
    jumps = [JumpMeasure(4.0, DiracAt((0.0, 0.3))), JumpMeasure()]
    Z = drivers(3, [[0.2, 0.0], [0.0, 0.1]], jumps)
    sps = [split(z, k, 2) for k, z in enumerate(Z)]
    x = np.array([1.0, 0.5])
    sol = solve_pasted(sps, x, 8, "up", 1.0)
    # every change of the lower approximant is a jump of driver 1, crossed by tau_1
    tau1_T = sol.trajectory.evaluate([1.0])[0, 0]
    times, _ = __import__("affinepath.levy", fromlist=["x"]).dyadic_approximant(sps[0], 8, "up").change_points()
    assert sol.n_pastes == int(np.sum(times < tau1_T))
    te, ta = euler_tau(Z, x, 1.0, h=1e-5)
    ref = np.column_stack([np.interp(sol.output_grid, te, ta[:, k]) for k in range(2)])
    assert np.max(np.abs(sol.tau - ref)) <= 1e-3


def test_converged_drift_against_euler():
    Z = drivers(0, [[0.1, 0.6], [0.3, -0.2]])
    sps = [split(z, k, 2) for k, z in enumerate(Z)]
    x = np.array([0.7, 1.1])
    gaps = []
    for M in (4, 5, 6, 7):
        up = solve_pasted(sps, x, M, "up", 1.0)
        dn = solve_pasted(sps, x, M, "down", 1.0)
        gaps.append(np.max(dn.tau - up.tau))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all((ratios > 1.6) & (ratios < 2.5))
    sol = solve_converged(sps, x, 1.0, tol=1e-4)
    assert sol.gap <= 1e-4
    te, ta = euler_tau(Z, x, 1.0, h=1e-5)
    ref = np.column_stack([np.interp(sol.output_grid, te, ta[:, k]) for k in range(2)])
    assert np.max(np.abs(sol.tau - ref)) <= 1e-4 + 1e-4


def test_convergence_failure_and_paste_cap():
    Z = drivers(0, [[0.1, 0.6], [0.3, -0.2]])
    sps = [split(z, k, 2) for k, z in enumerate(Z)]
    with pytest.raises(ConvergenceFailure) as info:
        solve_converged(sps, np.array([0.7, 1.1]), 1.0, tol=1e-6, level_cap=6)
    assert info.value.gap > 1e-6
    with pytest.raises(PastingLimitExceeded):
        solve_pasted(sps, np.array([0.7, 1.1]), 8, "up", 1.0, paste_cap=10)


def random_instance(seed):
    """Two positive components, positive cross drift, at most a few jumps."""
    r = np.random.default_rng(seed)
    betas, jumps = [], []
    for k in range(2):
        beta = np.zeros(2)
        beta[k] = r.uniform(-0.3, 0.8)
        beta[1 - k] = r.uniform(0.2, 1.0)
        betas.append(beta)
        point = np.zeros(2)
        point[k] = r.uniform(0, 0.5)
        point[1 - k] = r.uniform(0, 0.5)
        jumps.append(JumpMeasure(r.uniform(0.5, 1.5), DiracAt(tuple(point))))
    x = r.uniform(0.5, 1.5, 2)
    return betas, jumps, x


@settings(max_examples=8)
@given(st.integers(0, 2**31 - 1))
def test_monotone_in_initial_state(seed):
    betas, jumps, x = random_instance(seed)
    Z = drivers(seed, betas, jumps)
    sps = [split(z, k, 2) for k, z in enumerate(Z)]
    y = x + np.abs(np.random.default_rng(seed).normal(0, 0.3, 2))
    for direction in ("up", "down"):
        a = solve_pasted(sps, x, 6, direction, 1.0)
        b = solve_pasted(sps, y, 6, direction, 1.0)
        assert np.all(a.tau <= b.tau + 1e-12)


@settings(max_examples=8)
@given(st.integers(0, 2**31 - 1))
def test_tau_properties(seed):
    betas, jumps, x = random_instance(seed)
    Z = drivers(seed, betas, jumps)
    sps = [split(z, k, 2) for k, z in enumerate(Z)]
    sol = solve_pasted(sps, x, 7, "up", 1.0)
    assert np.all(sol.tau[0] == 0)
    assert np.all(np.diff(sol.tau, axis=0) >= 0)
    # continuity across pastes
    for t in sol.paste_times[:50]:
        left = sol.trajectory.evaluate([t * (1 - 1e-13)])[0]
        right = sol.trajectory.evaluate([t])[0]
        assert np.max(np.abs(right - left)) <= 1e-12 * max(1.0, t) + 1e-12


def test_assemble_identities():
    jumps = [JumpMeasure(2.0, DiracAt((0.2, 0.1, -0.3))), JumpMeasure(1.0, DiracAt((0.1, 0.3, 0.5)))]
    Z = drivers(7, [[0.1, 0.4, 0.3], [0.2, -0.1, -0.2]], jumps)
    sps = [split(z, k, 2) for k, z in enumerate(Z)]
    x0 = np.array([1.0, 0.6, -0.4])
    sol = solve_converged(sps, x0[:2], 1.0)
    path = assemble(Z, sol, x0)
    recon = x0 + sum(Z[k].evaluate(path.tau[:, k]) for k in range(2))
    assert np.max(np.abs(path.X - recon)) <= 1e-12
    assert np.all(np.diff(path.output_grid) > 0)
    assert path.events.any()
    jumps_at = np.flatnonzero(path.events)
    assert np.all(np.abs(path.X[jumps_at] - path.X_left[jumps_at]).max(axis=1) > 0)


def test_assemble_zero_and_drift_only():
    zero = drivers(0, [[0.0]])
    sol = solve_converged([split(zero[0], 0, 1)], np.array([2.0]), 1.0)
    assert np.all(assemble(zero, sol, np.array([2.0])).X == 2.0)
    Z = drivers(0, [[0.5]])
    sol = solve_converged([split(Z[0], 0, 1)], np.array([1.0]), 2.0)
    path = assemble(Z, sol, np.array([1.0]))
    assert np.max(np.abs(path.X[:, 0] - np.exp(0.5 * path.output_grid))) <= 1e-12


def test_diffusive_absorption_freezes_tau():
    tr = LevyTriplet(np.array([-3.0]), np.array([[1.0]]))
    absorbed = 0
    for s in range(50):
        Z = [generate_path(tr, 4.0, seed=s, stream=(0,))]
        sol = solve_converged([split(Z[0], 0, 1)], np.array([0.2]), 3.0)
        path = assemble(Z, sol, np.array([0.2]))
        t_abs = path.absorbed_at[0]
        if t_abs is None:
            continue
        absorbed += 1
        after = path.output_grid >= t_abs
        assert np.all(path.tau[after, 0] == path.tau[after, 0][0])
        assert np.all(path.X[after, 0] == path.X[after, 0][0])
        assert abs(path.X[after, 0][0]) <= 1e-9
    assert absorbed >= 40


def test_linear_profile_edge_and_walk_inverse():
    prof = DiagonalProfile.from_arrays(np.linspace(0, 12, 193), np.sin(np.linspace(0, 12, 193)), [1.0], [0.4])
    sol = solve_diagonal(prof, 1.5, 0.0, 0.0, 2.0)
    t = np.linspace(0, 2, 50)
    tau = sol.evaluate(t)
    back = np.array([sol.time_at(s) for s in tau])
    assert np.allclose(back, t, atol=1e-12)


def test_profile_from_cadlag_matches_path():
    p = CadlagPath(np.array([[0.0], [1.0], [0.5]]), 0.5, np.array([0.2, 0.7]), np.array([[0.3], [0.1]]))
    prof = DiagonalProfile.from_arrays(np.arange(3) * 0.5, p.grid_values[:, 0], p.jump_times, p.jump_sizes[:, 0])
    s = np.linspace(0, 0.999, 101)
    assert np.allclose(prof.value(s), p.evaluate(s)[:, 0])


def test_jump_in_own_coordinate_with_exponential_sizes():
    tr = LevyTriplet(np.array([-0.5]), np.array([[0.2]]), JumpMeasure(1.0, ExponentialOnCoordinate(1, 0, 0.3)))
    Z = [generate_path(tr, 4.0, seed=1, stream=(0,))]
    sol = solve_converged([split(Z[0], 0, 1)], np.array([1.0]), 1.0)
    path = assemble(Z, sol, np.array([1.0]))
    crossed = Z[0].jump_times[Z[0].jump_times <= path.tau[-1, 0]]
    assert path.events.sum() == crossed.size
