"""
Sample paths of an affine process through the reduced time-change system.

Every sample owns its driver paths, drawn from streams ``(sample, driver)``
of the run seed, so a sample is the same whatever the worker layout.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .levy import CHUNK_STEPS, DEFAULT_MESH, HorizonExceeded, extend_path, generate_path, split
from .params import AdmissibleParams, validate
from .reduction import ReductionPlan, invert_frames, reduce, strip_auxiliary
from .timechange import (
    DEFAULT_LEVEL0,
    DEFAULT_LEVEL_CAP,
    DEFAULT_PASTE_CAP,
    DEFAULT_TAU_TOL,
    ConvergenceFailure,
    PastingLimitExceeded,
    PositivityError,
    ProcessPath,
    assemble,
    default_grid,
    solve_converged,
)

log = logging.getLogger(__name__)

SAMPLE_ERRORS = (PositivityError, ConvergenceFailure, PastingLimitExceeded)
MAX_EXTENSIONS = 40


@dataclass
class SimulationConfig:
    params: AdmissibleParams
    x0: np.ndarray
    T: float
    mesh: float = DEFAULT_MESH
    level0: int = DEFAULT_LEVEL0
    level_cap: int = DEFAULT_LEVEL_CAP
    tau_tol: float = DEFAULT_TAU_TOL
    seed: int = 0
    times: np.ndarray | None = None
    include_jumps: bool = True
    paste_cap: int = DEFAULT_PASTE_CAP
    plan: ReductionPlan | None = None  # precomputed reduction of ``params``, e.g. from a frames sidecar

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if not (self.T > 0 and self.mesh > 0 and self.tau_tol > 0):
            raise ValueError("T, mesh and tau_tol must be positive")
        if not self.params.dim.in_domain(self.x0):
            raise ValueError(f"x0 = {self.x0} is not in the state space")

    @property
    def grid(self):
        return default_grid(self.T) if self.times is None else np.asarray(self.times, dtype=float)


class Simulator:
    """Pipeline ``reduce -> simulate the Heston-type system -> undo frames``."""

    def __init__(self, config: SimulationConfig):
        self.config = config
        params = config.params
        report = validate(params)
        if not report.ok:
            raise ValueError("parameters are not admissible:\n" + str(report))
        self.plan = config.plan if config.plan is not None else reduce(params, force_augment=False)
        red = self.plan.augmented
        self.reduced = red
        self.m = red.dim.m
        for j in red.dim.J:
            if not red.driver_triplet(j).is_zero():
                raise AssertionError(f"driver {j + 1} of the reduced system is not zero")
        self.triplets = [red.driver_triplet(k) for k in range(self.m)]
        self.x0 = self.plan.embed(config.x0)
        self.horizon = self._initial_horizon()

    def _initial_horizon(self):
        """One and a half times the expected internal time at ``T`` plus one chunk, rounded to whole chunks."""
        cfg = self.config
        red = self.reduced
        bt, B = red.mean_matrix()
        d = red.dim.d
        # E[int_0^T X] from the augmented linear system [[B, bt], [0, 0]]
        G = np.zeros((2 * d + 1, 2 * d + 1))
        G[:d, :d] = B
        G[:d, d] = bt
        G[d + 1 :, :d] = np.eye(d)
        G *= cfg.T
        z0 = np.zeros(2 * d + 1)
        z0[:d] = self.x0
        z0[d] = 1.0
        with np.errstate(all="ignore"):
            integ = (expm(G) @ z0)[d + 1 :]
        need = float(np.max(np.abs(integ[: self.m]))) if self.m else 0.0
        if not math.isfinite(need):
            need = cfg.T
        chunk = CHUNK_STEPS * cfg.mesh
        return chunk * math.ceil((1.5 * need + chunk) / chunk)

    def drivers(self, sample, horizon=None):
        horizon = self.horizon if horizon is None else horizon
        cfg = self.config
        return [generate_path(tr, horizon, cfg.mesh, cfg.seed, (sample, k)) for k, tr in enumerate(self.triplets)]

    def sample(self, index, times=None, include_jumps=None) -> ProcessPath:
        """Path number ``index`` in original coordinates."""
        cfg = self.config
        times = cfg.grid if times is None else np.asarray(times, dtype=float)
        include_jumps = cfg.include_jumps if include_jumps is None else include_jumps
        Z = self.drivers(index)
        horizon = self.horizon
        for _ in range(MAX_EXTENSIONS):
            try:
                splits = [split(z, k, self.m) for k, z in enumerate(Z)]
                sol = solve_converged(
                    splits, self.x0[: self.m], cfg.T, cfg.tau_tol, times, cfg.level0, cfg.level_cap, cfg.paste_cap
                )
                path = assemble(Z, sol, self.x0, include_jumps)
                break
            except HorizonExceeded:
                horizon *= 2.0
                Z = [extend_path(z, horizon) for z in Z]
        else:
            raise RuntimeError(f"driver horizon could not be extended far enough for sample {index}")
        path.info.update(level=sol.level, gap=sol.gap, pastes=sol.n_pastes)
        if self.plan.has_frames:
            path = invert_frames(path, self.plan.frame_matrix)
        if self.plan.has_aux:
            path = strip_auxiliary(path)
        return path


def _run_block(args):
    config, indices, times, include_jumps = args
    sim = Simulator(config)
    out = []
    for i in indices:
        try:
            out.append(sim.sample(i, times, include_jumps))
        except SAMPLE_ERRORS as exc:
            out.append(exc)
    return out


def simulate(config: SimulationConfig, n_samples, workers=1, times=None, include_jumps=None, block=64):
    """Samples ``0 .. n_samples-1``; failed samples are returned as their exception.

    Results are in sample order and independent of ``workers``.
    """
    blocks = [range(s, min(s + block, n_samples)) for s in range(0, n_samples, block)]
    tasks = [(config, b, times, include_jumps) for b in blocks]
    if workers <= 1 or len(tasks) == 1:
        results = [_run_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_block, tasks))
    return [p for r in results for p in r]


def iter_samples(config: SimulationConfig, n_samples, workers=1, times=None, include_jumps=None, block=256):
    """Like ``simulate`` but yields blocks in order to bound memory."""
    sim = Simulator(config) if workers <= 1 else None
    for s in range(0, n_samples, block):
        idx = range(s, min(s + block, n_samples))
        if sim is not None:
            out = []
            for i in idx:
                try:
                    out.append(sim.sample(i, times, include_jumps))
                except SAMPLE_ERRORS as exc:
                    out.append(exc)
            yield out
        else:
            yield simulate_block_parallel(config, idx, workers, times, include_jumps)


def simulate_block_parallel(config, indices, workers, times, include_jumps):
    parts = np.array_split(np.asarray(indices), workers)
    tasks = [(config, list(p), times, include_jumps) for p in parts if p.size]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return [p for r in ex.map(_run_block, tasks) for p in r]
