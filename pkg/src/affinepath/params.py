"""
Admissible parameter sets on the state space R_+^m x R^n.

The tuple ``(b, beta, a, alpha, c, gamma, m, M)`` is stored with the
convention that ``beta[k]`` is the drift vector of the k-th driver and
``alpha[k]`` its diffusion matrix (0-based k; configuration files are 1-based).
``m_measure`` is the state-independent jump measure, ``M[k]`` the jump measure
attached to component k.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .jumps import ZERO_MEASURE, JumpMeasure

PSD_TOL = 1e-12


class ParameterStructureError(ValueError):
    """Field shapes are inconsistent with the declared dimensions."""


@dataclass(frozen=True)
class StateDim:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or self.m + self.n < 1:
            raise ParameterStructureError(f"invalid state dimension m={self.m}, n={self.n}")

    @property
    def d(self):
        return self.m + self.n

    @property
    def I(self):  # noqa: E743
        return range(self.m)

    @property
    def J(self):
        return range(self.m, self.d)

    def proj_I(self, x):
        return np.asarray(x)[..., : self.m]

    def proj_J(self, x):
        return np.asarray(x)[..., self.m :]

    def in_domain(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        return x.shape[-1] == self.d and bool(np.all(x[..., : self.m] >= -slack))


def is_psd(mat, tol=PSD_TOL):
    mat = np.asarray(mat, dtype=float)
    if not np.array_equal(mat, mat.T):
        return False
    w = np.linalg.eigvalsh(mat)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    return bool(np.all(w >= -tol * scale))


def psd_sqrt(mat):
    """A factor ``L`` with ``L @ L.T == mat`` for a PSD matrix."""
    w, v = np.linalg.eigh(np.asarray(mat, dtype=float))
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class LevyTriplet:
    """Levy triplet ``(beta, alpha, jumps)`` under the truncation ``h(x)=x 1{|x|<=1}``.

    ``compensate`` marks the coordinates on which small jumps are compensated;
    by default all of them. Drivers built from an admissible set compensate only
    on ``J`` plus their own index, matching the functional characteristic R_k.
    """

    beta: np.ndarray
    alpha: np.ndarray
    jumps: JumpMeasure = ZERO_MEASURE
    compensate: np.ndarray | None = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        d = beta.shape[0]
        if alpha.shape != (d, d):
            raise ParameterStructureError("alpha must be a d x d matrix")
        if not self.jumps.is_zero and self.jumps.dim != d:
            raise ParameterStructureError("jump law dimension does not match drift")
        if not is_psd(alpha):
            raise ValueError("alpha must be symmetric positive semidefinite")
        comp = np.ones(d, bool) if self.compensate is None else np.asarray(self.compensate, bool)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "compensate", comp)

    @property
    def dim(self):
        return self.beta.shape[0]

    @cached_property
    def diffusion_factor(self):
        return psd_sqrt(self.alpha)

    def path_drift(self):
        """Drift of the path once compensation is folded into a linear term."""
        return self.beta - self.jumps.compensator(self.compensate)

    def mean_drift(self):
        """``E[Z_1]``: drift plus the uncompensated part of the jump mean."""
        return self.path_drift() + self.jumps.first_moment()

    def exponent(self, u):
        u = np.asarray(u, dtype=complex)
        return u @ self.beta + 0.5 * np.einsum("...k,kl,...l->...", u, self.alpha, u) + self.jumps.integral(
            u, self.compensate
        )

    def is_zero(self):
        return not self.beta.any() and not self.alpha.any() and self.jumps.is_zero


@dataclass(frozen=True)
class AdmissibleParams:
    dim: StateDim
    b: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    alpha: np.ndarray
    c: float = 0.0
    gamma: np.ndarray | None = None
    m_measure: JumpMeasure = ZERO_MEASURE
    M: tuple = field(default=())

    def __post_init__(self):
        d = self.dim.d
        cast = lambda v: np.array(v, dtype=float)
        object.__setattr__(self, "b", cast(self.b))
        object.__setattr__(self, "beta", cast(self.beta))
        object.__setattr__(self, "a", cast(self.a))
        object.__setattr__(self, "alpha", cast(self.alpha))
        gamma = np.zeros(d) if self.gamma is None else cast(self.gamma)
        object.__setattr__(self, "gamma", gamma)
        M = tuple(self.M) if self.M else (ZERO_MEASURE,) * d
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "c", float(self.c))
        shapes = {
            "b": (self.b.shape, (d,)),
            "beta": (self.beta.shape, (d, d)),
            "a": (self.a.shape, (d, d)),
            "alpha": (self.alpha.shape, (d, d, d)),
            "gamma": (self.gamma.shape, (d,)),
        }
        for name, (got, want) in shapes.items():
            if got != want:
                raise ParameterStructureError(f"{name} has shape {got}, expected {want}")
        if len(self.M) != d:
            raise ParameterStructureError(f"M has {len(self.M)} measures, expected {d}")
        for k, meas in enumerate((self.m_measure,) + self.M):
            if not meas.is_zero and meas.dim != d:
                name = "m" if k == 0 else f"M_{k}"
                raise ParameterStructureError(f"jump law of {name} has dimension {meas.dim}, expected {d}")

    @classmethod
    def zeros(cls, m, n):
        dim = StateDim(m, n)
        d = dim.d
        return cls(dim, np.zeros(d), np.zeros((d, d)), np.zeros((d, d)), np.zeros((d, d, d)))

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def drift_matrix(self):
        """Matrix with the drift vectors ``beta_k`` as columns."""
        return self.beta.T.copy()

    def compensation_mask(self, k=None):
        """Coordinates compensated in R_k (``J`` and ``k``) or in F (``k=None``)."""
        mask = np.zeros(self.dim.d, bool)
        mask[self.dim.m :] = True
        if k is not None:
            mask[k] = True
        return mask

    def driver_triplet(self, k):
        return LevyTriplet(self.beta[k], self.alpha[k], self.M[k], self.compensation_mask(k))

    def constant_triplet(self):
        return LevyTriplet(self.b, self.a, self.m_measure, self.compensation_mask(None))

    def mean_matrix(self):
        """Affine drift of the first moment: ``d/dt E[X] = b_tilde + B_tilde E[X]``."""
        d = self.dim.d
        cols = np.zeros((d, d))
        for k in range(d):
            cols[:, k] = self.driver_triplet(k).mean_drift()
        return self.constant_triplet().mean_drift(), cols


class Violation(NamedTuple):
    row: str
    condition: str
    indices: tuple

    def __str__(self):
        where = ", ".join(str(i) for i in self.indices)
        return f"[{self.row}] {self.condition}" + (f" at {where}" if where else "")


class ValidationReport(list):
    """List of violated admissibility conditions; empty means admissible."""

    @property
    def ok(self):
        return not self

    def __str__(self):
        if not self:
            return "admissible"
        return "\n".join(str(v) for v in self)


def validate(params: AdmissibleParams) -> ValidationReport:
    """Check every admissibility condition and report the violated ones.

    Zero conditions use exact equality on the stored values. Indices in the
    report are 1-based to match the usual notation.
    """
    dim = params.dim
    I, J = list(dim.I), list(dim.J)
    out = []

    def add(row, cond, idx=()):
        out.append(Violation(row, cond, tuple(i + 1 if isinstance(i, int) else i for i in idx)))

    # diffusion
    if not is_psd(params.a):
        add("diffusion", "a positive semidefinite")
    for k in range(dim.d):
        for l in range(dim.d):
            if (k in I or l in I) and params.a[k, l] != 0:
                add("diffusion", "a_kl=0 for k in I or l in I", (k, l))
    for k in range(dim.d):
        if not is_psd(params.alpha[k]):
            add("diffusion", "alpha_k positive semidefinite", (k,))
    for j in J:
        if params.alpha[j].any():
            add("diffusion", "alpha_j=0 for all j in J", (j,))
    for i in I:
        off = [q for q in I if q != i]
        for k in range(dim.d):
            for l in range(dim.d):
                if (k in off or l in off) and params.alpha[i][k, l] != 0:
                    add("diffusion", "(alpha_i)_kl=0 if k or l in I\\{i}", (i, k, l))

    # drift
    for i in I:
        if params.b[i] < 0:
            add("drift", "b in D", (i,))
    for i in I:
        for k in I:
            if k != i and params.beta[i][k] < 0:
                add("drift", "(beta_i)_k>=0 for i in I, k in I\\{i}", (i, k))
    for j in J:
        for k in I:
            if params.beta[j][k] != 0:
                add("drift", "(beta_j)_k=0 for j in J, k in I", (j, k))

    # killing
    if params.c < 0:
        add("killing", "c>=0")
    for k in range(dim.d):
        if params.gamma[k] < 0:
            add("killing", "gamma_k>=0", (k,))
    for j in J:
        if params.gamma[j] != 0:
            add("killing", "gamma_j=0 for all j in J", (j,))

    # jumps
    if not params.m_measure.is_zero:
        bad = params.m_measure.law.support_violations(dim.m)
        if bad:
            add("jumps", "supp m in D", bad)
    for j in J:
        if not params.M[j].is_zero:
            add("jumps", "M_j=0 for all j in J", (j,))
    for i in I:
        meas = params.M[i]
        if not meas.is_zero:
            bad = meas.law.support_violations(dim.m)
            if bad:
                add("jumps", "supp M_i in D", (i, *bad))

    out.sort(key=lambda v: (v.row, v.condition, v.indices))
    return ValidationReport(out)


class HestonFlags(NamedTuple):
    married: bool
    H: bool
    ring: bool


def classify_heston(params: AdmissibleParams) -> HestonFlags:
    dim = params.dim
    married = (
        not params.b.any() and not params.a.any() and params.c == 0 and params.m_measure.is_zero
    )
    J = list(dim.J)
    H = all(params.beta[i][j] == 0 for i in J for j in J)
    ring = (
        params.c == 0
        and all(params.gamma[i] == 0 for i in dim.I)
        and all(params.M[i].finite_first_moment for i in dim.I)
    )
    return HestonFlags(married, H, ring)
