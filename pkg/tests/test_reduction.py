import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affinepath.levy import generate_path, split
from affinepath.params import AdmissibleParams, classify_heston, validate
from affinepath.reduction import (
    ReductionError,
    apply_moving_frames,
    augment,
    forward_frames,
    invert_frames,
    reduce,
)
from affinepath.riccati import cf_affine, eval_F, eval_R
from affinepath.simulate import SimulationConfig, Simulator
from affinepath.timechange import ProcessPath, assemble, solve_converged


def random_u(rng, dim):
    return np.concatenate([-rng.exponential(1.0, dim.m) + 1j * rng.normal(0, 2, dim.m), 1j * rng.normal(0, 2, dim.n)])


@pytest.mark.parametrize("name", ["cir", "jump_cir", "heston", "general"])
def test_augmented_R0_equals_F(configs, name):
    from affinepath.config import load_params

    p = load_params(configs / f"{name}.toml")
    plan = augment(p)
    assert validate(plan.augmented).ok
    rng = np.random.default_rng(5)
    for _ in range(100):
        u = random_u(rng, p.dim)
        assert abs(eval_R(plan.augmented, plan.frequency_embed(u), 0) - eval_F(p, u)) <= 1e-12


def test_augmented_cf_identity(general_params):
    plan = augment(general_params)
    x = np.array([0.6, -0.2])
    u = np.array([-0.5 + 1j, 2j])
    a = cf_affine(general_params, u, x, 1.0)
    b = cf_affine(plan.augmented, plan.frequency_embed(u), plan.embed(x), 1.0)
    assert np.max(np.abs(a - b)) <= 1e-7


def test_killing_and_infinite_structure_rejected(cir_params):
    with pytest.raises(ReductionError, match="c=0"):
        augment(cir_params.replace(c=0.1))
    with pytest.raises(ReductionError, match="gamma"):
        reduce(cir_params.replace(gamma=np.array([0.2])))


def test_married_augmentation_adds_zero_driver(heston_params):
    plan = augment(heston_params)
    assert plan.augmented.dim.m == 2
    assert not plan.augmented.beta[0].any() and not plan.augmented.alpha[0].any()
    assert plan.augmented.M[0].is_zero
    assert classify_heston(plan.augmented) == (True, True, True)


def test_moving_frames():
    p = AdmissibleParams.zeros(1, 1).replace(beta=np.array([[-0.3, 0.2], [0.0, 0.7]]))
    q, B = apply_moving_frames(p)
    assert q.beta[1, 1] == 0 and B.tolist() == [[0.7]]
    assert q.beta[0].tolist() == [-0.3, 0.2]
    same, B0 = apply_moving_frames(q)
    assert same is q and not B0.any()


def test_reduce_gives_heston_type(general_params):
    plan = reduce(general_params)
    assert plan.has_aux and plan.has_frames
    assert classify_heston(plan.augmented) == (True, True, True)
    assert validate(plan.augmented).ok


def synthetic_path(grid, Y):
    Y = np.asarray(Y, dtype=float)
    k = grid.size
    return ProcessPath(grid, Y.copy(), Y.copy(), Y[0].copy(), np.zeros((k, 0)), [], np.zeros(k, bool), 0)


@pytest.mark.parametrize("kappa", [0.8, -1.5])
def test_scalar_resolvent(kappa):
    grid = np.arange(1025) * 2.0**-10
    y = 0.7
    out = invert_frames(synthetic_path(grid, np.full((grid.size, 1), y)), [[kappa]])
    assert np.max(np.abs(out.X[:, 0] - y * np.exp(kappa * grid))) <= 1e-6
    assert not out.warnings
    coarse = np.linspace(0, 1, 6)
    out = invert_frames(synthetic_path(coarse, np.full((6, 1), y)), [[kappa]], tol=1e-6)
    assert out.warnings


def test_zero_frame_is_identity():
    grid = np.linspace(0, 1, 11)
    Y = np.column_stack([grid, np.sin(grid)])
    out = invert_frames(synthetic_path(grid, Y), np.zeros((1, 1)))
    assert np.array_equal(out.X, Y)


def _raw_augmented_path(params, x0, seed, T=1.0):
    """Simulate the reduced system and return it without undoing anything."""
    plan = reduce(params)
    red = plan.augmented
    m = red.dim.m
    Z = [generate_path(red.driver_triplet(k), 16.0, seed=seed, stream=(0, k)) for k in range(m)]
    sol = solve_converged([split(z, k, m) for k, z in enumerate(Z)], plan.embed(x0)[:m], T)
    return plan, assemble(Z, sol, plan.embed(x0))


@settings(max_examples=5)
@given(st.integers(0, 1000))
def test_auxiliary_component_is_one(seed):
    from conftest import CONFIGS
    from affinepath.config import load_params

    p = load_params(CONFIGS / "jump_cir.toml")
    _, path = _raw_augmented_path(p, np.array([0.5]), seed)
    assert np.all(path.X[:, 0] == 1.0)
    assert np.allclose(path.tau[:, 0], path.output_grid, rtol=0, atol=1e-12)


def test_frame_round_trip_on_simulated_paths(general_params):
    cfg = SimulationConfig(general_params, np.array([0.5, 0.1]), 1.0, seed=3)
    sim = Simulator(cfg)
    for i in range(3):
        path = sim.sample(i)
        back = invert_frames(forward_frames(path, sim.plan.frame_matrix), sim.plan.frame_matrix)
        assert np.max(np.abs(back.X - path.X)) <= 1e-12
        assert np.max(np.abs(back.X_left - path.X_left)) <= 1e-12


def test_pipeline_matches_manual_reduction(general_params):
    x0 = np.array([0.5, 0.1])
    plan, raw = _raw_augmented_path(general_params, x0, 4)
    manual = invert_frames(raw, plan.frame_matrix, strip_aux=True)
    assert manual.dim == 2 and manual.m == 1
    assert np.all(manual.X[:, 0] >= 0)
    assert np.array_equal(manual.X[0], x0)
