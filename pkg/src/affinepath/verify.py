"""
Statistical checks of simulated paths against the affine transform formula.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import expm

from .riccati import DEFAULT_ATOL, DEFAULT_RTOL, frequency_vector, solve_riccati
from .simulate import SimulationConfig, iter_samples

log = logging.getLogger(__name__)

DEFAULT_T_LIST = (0.25, 0.5, 1.0)
I_GRID = (-2.0, -1.0, -0.5)
J_GRID = (0.0, 1.0j, -1.0j, 2.0j, -2.0j)
MAX_GRID = 64
FAILURE_RATE = 1e-3
SIGNIFICANCE = 0.01


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class CFEstimate:
    u0: tuple
    t: float
    estimate: complex
    std_error: float
    n_samples: int


def default_u_grid(dim, cap=MAX_GRID):
    axes = [I_GRID] * dim.m + [J_GRID] * dim.n
    return [np.array(u, dtype=complex) for u in itertools.islice(itertools.product(*axes), cap)]


def _key(u, t):
    return tuple(complex(v) for v in np.asarray(u).reshape(-1)), float(t)


def _collect(config: SimulationConfig, t_list, n_samples, workers, fn, width):
    """Run the samples in order and stack ``fn(X at t_list)`` per sample."""
    t_list = np.asarray(t_list, dtype=float)
    times = np.union1d([0.0], t_list)
    pos = np.searchsorted(times, t_list)
    rows = []
    failures = 0
    for block in iter_samples(config, n_samples, workers, times=times, include_jumps=False):
        for p in block:
            if isinstance(p, Exception):
                failures += 1
                log.warning("sample failed: %s", p)
                continue
            rows.append(fn(p.X[pos]))
    if failures > FAILURE_RATE * n_samples:
        raise HarnessError(f"{failures} of {n_samples} samples failed (limit {FAILURE_RATE:.1%})")
    return np.array(rows).reshape(len(rows), *width), failures


def mc_cf(config: SimulationConfig, u0_list, t_list=DEFAULT_T_LIST, n_samples=10_000, seed=None, workers=1):
    """Sample means of ``exp(<u0, X_t>)`` with standard errors.

    The standard error of a complex mean is ``sqrt((Var Re + Var Im) / n)``.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    if seed is not None:
        config = _with_seed(config, seed)
    dim = config.params.dim
    U = np.array([frequency_vector(u, dim) for u in u0_list])
    vals, _ = _collect(config, t_list, n_samples, workers, lambda X: np.exp(X @ U.T), (len(t_list), len(U)))
    n = vals.shape[0]
    # shifted by the first sample so that constant samples come back exactly
    dev = vals - vals[0]
    mean = vals[0] + dev.mean(axis=0)
    var = dev.real.var(axis=0, ddof=1) + dev.imag.var(axis=0, ddof=1)
    se = np.sqrt(var / n)
    out = []
    for a, u in enumerate(U):
        for b, t in enumerate(t_list):
            out.append(CFEstimate(_key(u, t)[0], float(t), complex(mean[b, a]), float(se[b, a]), n))
    return out


def _with_seed(config, seed):
    from dataclasses import replace

    return replace(config, seed=int(seed))


def riccati_predictions(params, x0, u0_list, t_list, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """``{(u, t): exp(phi + <x0, psi>)}`` for the original parameter set."""
    t_list = np.asarray(t_list, dtype=float)
    out = {}
    for u in u0_list:
        times = np.union1d([0.0], t_list)
        sol = solve_riccati(params, u, float(times[-1]), rtol, atol, times=times)
        cf = np.exp(sol.phi + sol.psi @ np.asarray(x0, dtype=float))
        for t in t_list:
            out[_key(u, t)] = complex(cf[np.searchsorted(times, t)])
    return out


@dataclass
class PointResult:
    u0: tuple
    t: float
    estimate: complex
    std_error: float
    prediction: complex
    z: float
    flagged: bool


@dataclass
class CFReport:
    points: list
    z_threshold: float
    p_value: float
    passed: bool

    @property
    def n_flagged(self):
        return sum(p.flagged for p in self.points)


def _z(est, pred, se):
    diff = abs(est - pred)
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.inf


def compare_cf(estimates, predictions, z_threshold=3.0, significance=SIGNIFICANCE) -> CFReport:
    """Flag points with ``z > z_threshold`` and gate the count with a binomial test.

    Under the null each point is flagged with probability ``2 (1 - Phi(z))``;
    the run passes unless that many flags (or more) has probability below
    ``significance``.
    """
    points = []
    for e in estimates:
        key = _key(e.u0, e.t)
        if key not in predictions:
            raise KeyError(f"no prediction for u={e.u0}, t={e.t}")
        pred = predictions[key]
        z = _z(e.estimate, pred, e.std_error)
        points.append(PointResult(e.u0, e.t, e.estimate, e.std_error, pred, z, z > z_threshold))
    k = sum(p.flagged for p in points)
    p0 = 2.0 * stats.norm.sf(z_threshold)
    p_value = float(stats.binom.sf(k - 1, len(points), p0)) if k else 1.0
    if any(math.isinf(p.z) for p in points):
        p_value = 0.0
    return CFReport(points, z_threshold, p_value, p_value > significance)


@dataclass
class MomentReport:
    t: np.ndarray
    sample_mean: np.ndarray
    std_error: np.ndarray
    predicted: np.ndarray
    flagged: np.ndarray
    skipped: str = ""
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = not bool(np.any(self.flagged))


def mean_curve(params, x0, t_list):
    """Solution of ``m' = b_tilde + B_tilde m``, ``m(0) = x0`` at the given times."""
    bt, B = params.mean_matrix()
    d = params.dim.d
    G = np.zeros((d + 1, d + 1))
    G[:d, :d] = B
    G[:d, d] = bt
    z0 = np.concatenate([np.asarray(x0, dtype=float), [1.0]])
    return np.array([(expm(G * t) @ z0)[:d] for t in t_list])


def moment_check(config: SimulationConfig, t_list=DEFAULT_T_LIST, n_samples=10_000, workers=1, n_se=3.0):
    params = config.params
    measures = (params.m_measure,) + tuple(params.M)
    if not all(mu.finite_first_moment for mu in measures):
        return MomentReport(np.asarray(t_list), None, None, None, np.zeros(0, bool), "infinite jump mean")
    X, _ = _collect(config, t_list, n_samples, workers, lambda X: X, (len(t_list), params.dim.d))
    dev = X - X[0]
    mean = X[0] + dev.mean(axis=0)
    se = dev.std(axis=0, ddof=1) / math.sqrt(X.shape[0])
    pred = mean_curve(params, config.x0, t_list)
    diff = np.abs(mean - pred)
    tol = n_se * se + 1e-9 * (1 + np.abs(pred))
    return MomentReport(np.asarray(t_list), mean, se, pred, diff > tol)


def markov_check(config: SimulationConfig, u0, t, h, n_samples=10_000, workers=1, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Tower-property test ``E[exp(<u, X_{t+h}>)] = E[exp(phi(h, u) + <X_t, psi(h, u)>)]``.

    Returns ``(left estimate, right estimate, z)`` using the per-sample
    difference so that the shared randomness cancels in the standard error.
    """
    params = config.params
    u = frequency_vector(u0, params.dim)
    sol = solve_riccati(params, u, h, rtol, atol, times=[0.0, h])
    phi, psi = sol.phi[-1], sol.psi[-1]
    fn = lambda X: np.array([np.exp(X[1] @ u), np.exp(phi + X[0] @ psi)])
    vals, _ = _collect(config, [t, t + h], n_samples, workers, fn, (2,))
    diff = vals[:, 0] - vals[:, 1]
    se = math.sqrt((diff.real.var(ddof=1) + diff.imag.var(ddof=1)) / diff.size)
    left, right = vals[:, 0].mean(), vals[:, 1].mean()
    return complex(left), complex(right), _z(left, right, se)
