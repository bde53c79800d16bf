"""
Cadlag Levy driver paths.

A path is kept as a gridded continuous part (drift plus Brownian motion,
linearly interpolated between nodes) and an explicit list of jump events.
Randomness is drawn chunk by chunk from a counter-based Philox stream keyed by
``(seed, stream, chunk)``, so extending a path never changes the part that was
already generated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import LevyTriplet

DEFAULT_MESH = 2.0**-10
CHUNK_STEPS = 1024


class LevyGenerationError(RuntimeError):
    pass


class HorizonExceeded(RuntimeError):
    """Raised when a path is evaluated beyond the generated horizon."""

    def __init__(self, needed, horizon):
        super().__init__(f"path horizon {horizon} exceeded (needed {needed})")
        self.needed = needed
        self.horizon = horizon


class InvariantViolation(RuntimeError):
    pass


def chunk_rng(seed, stream, chunk):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream) + (chunk,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class CadlagPath:
    """Piecewise-linear-plus-jumps path on ``[0, horizon]`` in R^d.

    ``grid_values[j]`` is the continuous part at ``j * mesh``; jumps are
    ``(jump_times[q], jump_sizes[q])`` with strictly increasing times.
    """

    grid_values: np.ndarray
    mesh: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    triplet: LevyTriplet | None = None
    seed: int | None = None
    stream: tuple = ()
    chunk_steps: int = CHUNK_STEPS
    _jump_cumsum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = np.asarray(self.jump_sizes, dtype=float).reshape(-1, self.dim)
        cum = np.vstack([np.zeros((1, self.dim)), np.cumsum(sizes, axis=0)])
        object.__setattr__(self, "jump_sizes", sizes)
        object.__setattr__(self, "_jump_cumsum", cum)

    @property
    def dim(self):
        return self.grid_values.shape[1]

    @property
    def horizon(self):
        return (self.grid_values.shape[0] - 1) * self.mesh

    @property
    def n_chunks(self):
        return (self.grid_values.shape[0] - 1) // self.chunk_steps

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if s.size and (np.max(s) > self.horizon * (1 + 1e-15) or np.min(s) < 0):
            raise HorizonExceeded(float(np.max(s)), self.horizon)
        return s

    def continuous(self, s):
        s = self._check(s)
        pos = np.clip(s / self.mesh, 0.0, self.grid_values.shape[0] - 1)
        j = np.minimum(np.floor(pos).astype(np.intp), self.grid_values.shape[0] - 2)
        w = (pos - j)[..., None]
        g = self.grid_values
        return g[j] * (1.0 - w) + g[j + 1] * w

    def evaluate(self, s):
        """Right-continuous value at internal time(s) ``s``."""
        s = self._check(s)
        q = np.searchsorted(self.jump_times, s, side="right")
        return self.continuous(s) + self._jump_cumsum[q]

    def left_limit(self, s):
        s = self._check(s)
        q = np.searchsorted(self.jump_times, s, side="left")
        return self.continuous(s) + self._jump_cumsum[q]

    def coordinate(self, k):
        """One-dimensional view (grid values, jump times, nonzero jump sizes)."""
        sizes = self.jump_sizes[:, k]
        keep = sizes != 0
        return self.grid_values[:, k], self.jump_times[keep], sizes[keep]


def _generate_chunk(triplet: LevyTriplet, mesh, seed, stream, chunk, steps, start_value):
    rng = chunk_rng(seed, stream, chunk)
    d = triplet.dim
    drift = triplet.path_drift() * mesh
    if triplet.alpha.any():
        incr = math.sqrt(mesh) * rng.standard_normal((steps, d)) @ triplet.diffusion_factor.T
        incr += drift
    else:
        incr = np.broadcast_to(drift, (steps, d))
    vals = start_value + np.cumsum(incr, axis=0)
    t0 = chunk * steps * mesh
    span = steps * mesh
    if triplet.jumps.is_zero:
        times = np.empty(0)
        sizes = np.empty((0, d))
    else:
        count = rng.poisson(triplet.jumps.rate * span)
        times = np.sort(t0 + span * rng.random(count))
        sizes = triplet.jumps.law.sample(rng, count)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(sizes))):
        raise LevyGenerationError(f"non-finite values in chunk {chunk} of stream {stream}")
    return vals, times, sizes


def generate_path(triplet: LevyTriplet, horizon, mesh=DEFAULT_MESH, seed=0, stream=(), chunk_steps=CHUNK_STEPS):
    """Sample a path of the Levy process with the given triplet on ``[0, horizon]``.

    The generated horizon is rounded up to a whole number of chunks.
    """
    if not (horizon > 0 and mesh > 0):
        raise ValueError("horizon and mesh must be positive")
    base = CadlagPath(
        np.zeros((1, triplet.dim)),
        mesh,
        np.empty(0),
        np.empty((0, triplet.dim)),
        triplet,
        seed,
        tuple(stream),
        chunk_steps,
    )
    return extend_path(base, horizon)


def extend_path(path: CadlagPath, new_horizon) -> CadlagPath:
    """Return the same path continued up to ``new_horizon``.

    The restriction to the old horizon is bitwise identical.
    """
    if path.triplet is None:
        raise LevyGenerationError("path has no generating triplet and cannot be extended")
    if new_horizon <= path.horizon:
        return path
    if path.seed is None:
        raise LevyGenerationError("path has no seed")
    steps = path.chunk_steps
    need = math.ceil(new_horizon / (steps * path.mesh) - 1e-12)
    grids, times, sizes = [path.grid_values], [path.jump_times], [path.jump_sizes]
    last = path.grid_values[-1]
    for chunk in range(path.n_chunks, need):
        vals, t, s = _generate_chunk(path.triplet, path.mesh, path.seed, path.stream, chunk, steps, last)
        grids.append(vals)
        times.append(t)
        sizes.append(s)
        last = vals[-1]
    jt = np.concatenate(times)
    if jt.size > 1 and np.any(np.diff(jt) <= 0):
        raise LevyGenerationError("jump times are not strictly increasing")
    return CadlagPath(
        np.vstack(grids),
        path.mesh,
        jt,
        np.vstack(sizes),
        path.triplet,
        path.seed,
        path.stream,
        steps,
    )


# ---------------------------------------------------------------------------
# Levy-Ito split and dyadic approximants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPath:
    """``Z = tilde + notilde`` for driver ``index`` of a system with ``m`` positive components.

    ``tilde`` lives on coordinate ``index`` only; ``notilde`` is zero there and
    nondecreasing on the other positive coordinates.
    """

    parent: CadlagPath
    index: int
    m: int
    tilde: CadlagPath
    notilde: CadlagPath
    diffusive: bool

    def evaluate(self, s):
        return self.tilde.evaluate(s) + self.notilde.evaluate(s)


def split(path: CadlagPath, i: int, m: int) -> SplitPath:
    d = path.dim
    if not 0 <= i < m <= d:
        raise ValueError("split index must be a positive coordinate")
    keep = np.zeros(d, bool)
    keep[i] = True
    g_t = np.where(keep, path.grid_values, 0.0)
    g_n = np.where(keep, 0.0, path.grid_values)
    s_t = np.where(keep, path.jump_sizes, 0.0)
    s_n = np.where(keep, 0.0, path.jump_sizes)
    nz_t = np.any(s_t != 0, axis=1)
    nz_n = np.any(s_n != 0, axis=1)
    tilde = CadlagPath(g_t, path.mesh, path.jump_times[nz_t], s_t[nz_t], None, path.seed, path.stream, path.chunk_steps)
    notilde = CadlagPath(g_n, path.mesh, path.jump_times[nz_n], s_n[nz_n], None, path.seed, path.stream, path.chunk_steps)

    others = [k for k in range(m) if k != i]
    if others:
        if np.any(np.diff(g_n[:, others], axis=0) < 0) or np.any(s_n[:, others] < 0):
            raise InvariantViolation(
                f"increasing part of driver {i + 1} decreases on a positive coordinate"
            )
    if np.any(s_t[:, i] < 0):
        raise InvariantViolation(f"driver {i + 1} has negative jumps in its own coordinate")
    diffusive = path.triplet is not None and path.triplet.alpha[i, i] > 0
    return SplitPath(path, i, m, tilde, notilde, diffusive)


@dataclass(frozen=True)
class DyadicApproximant:
    """Piecewise-constant lower (``up``) or upper (``down``) approximation of ``notilde``.

    Only the positive coordinates other than the driver index are kept
    (``values`` has shape ``(n_nodes, m)``). ``event_times`` is the dyadic
    partition augmented with the driver's jump times.
    """

    level: int
    direction: str
    base: CadlagPath
    index: int
    m: int
    node_values: np.ndarray
    event_times: np.ndarray

    @property
    def step(self):
        return 2.0**-self.level

    @property
    def n_nodes(self):
        return self.node_values.shape[0]

    def _node(self, s):
        s = np.asarray(s, dtype=float)
        k = np.floor(s / self.step).astype(np.intp)
        if self.direction == "down":
            k = k + 1
        if np.any(k >= self.n_nodes):
            raise HorizonExceeded(float(np.max(s)), (self.n_nodes - 1 - (self.direction == "down")) * self.step)
        return k

    def evaluate(self, s):
        return self.node_values[self._node(s)]

    def initial(self):
        return self.node_values[1 if self.direction == "down" else 0]

    def change_points(self):
        """Internal times where the approximant changes and the size of each change."""
        v = self.node_values
        delta = np.diff(v, axis=0)
        nz = np.flatnonzero(np.any(delta != 0, axis=1))
        if self.direction == "up":
            times = (nz + 1) * self.step
        else:
            times = nz * self.step
            keep = nz >= 1
            nz, times = nz[keep], times[keep]
            # the change at node 0 is already part of the initial value
        return times, delta[nz]

    @property
    def horizon(self):
        return (self.n_nodes - 1 - (self.direction == "down")) * self.step


def dyadic_approximant(sp: SplitPath, level: int, direction: str = "up") -> DyadicApproximant:
    if level < 0:
        raise ValueError("level must be nonnegative")
    if direction not in ("up", "down"):
        raise ValueError("direction is 'up' or 'down'")
    step = 2.0**-level
    base = sp.notilde
    n_nodes = int(math.floor(base.horizon / step + 1e-9)) + 1
    nodes = np.arange(n_nodes) * step
    vals = np.zeros((n_nodes, sp.m))
    others = [k for k in range(sp.m) if k != sp.index]
    if others:
        vals[:, others] = base.evaluate(nodes)[:, others]
    events = np.union1d(nodes, base.jump_times[base.jump_times <= nodes[-1]])
    return DyadicApproximant(level, direction, base, sp.index, sp.m, vals, events)


# ---------------------------------------------------------------------------
# text dump
# ---------------------------------------------------------------------------


def dump_path(path: CadlagPath, fh, header=()):
    """Write ``s, Z_1..Z_d`` at grid nodes followed by a jump-event block."""
    for line in header:
        fh.write(f"# {line}\n")
    d = path.dim
    fh.write("# continuous part\n")
    fh.write("s," + ",".join(f"Z{k + 1}" for k in range(d)) + "\n")
    for j, row in enumerate(path.grid_values):
        fh.write(f"{j * path.mesh:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
    fh.write("# jumps\n")
    fh.write("s," + ",".join(f"dZ{k + 1}" for k in range(d)) + "\n")
    for t, row in zip(path.jump_times, path.jump_sizes):
        fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")
