"""
Finite-activity jump laws with closed-form Fourier-Laplace transforms.

A jump measure is stored as ``rate * law`` where ``law`` is a probability
distribution on R^d taken from a small catalog:

* ``DiracAt``                  point mass at a fixed vector
* ``ExponentialOnCoordinate``  exponential size along a single axis
* ``IndependentProduct``       independent one-dimensional laws per coordinate
* ``FiniteMixture``            convex combination of catalog laws

Every law exposes ``transform(u) = E[exp(<u, xi>)]`` for complex ``u`` (bilinear
pairing, no conjugation), the truncated mean ``E[xi 1{|xi| <= 1}]`` used by the
truncation function ``h(x) = x 1{|x| <= 1}``, the plain mean, and a sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import integrate, special


class JumpDomainError(ValueError):
    """The transform of a law does not exist at the requested frequency."""


# ---------------------------------------------------------------------------
# one-dimensional laws (building blocks of IndependentProduct)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dirac1:
    value: float = 0.0

    kind = "dirac"
    nonnegative_support = property(lambda self: self.value >= 0.0)
    random = False

    def sample(self, rng, n):
        return np.full(n, float(self.value))

    def transform(self, z):
        return np.exp(self.value * z)

    def mean(self):
        return float(self.value)

    def within(self, rho):
        """Return ``(P(|r| <= rho), E[r 1{|r| <= rho}])``."""
        if abs(self.value) <= rho:
            return 1.0, float(self.value)
        return 0.0, 0.0


@dataclass(frozen=True)
class Exponential1:
    mean_size: float

    kind = "exp"
    nonnegative_support = True
    random = True

    def __post_init__(self):
        if not self.mean_size > 0:
            raise ValueError("exponential mean must be positive")

    def sample(self, rng, n):
        return rng.exponential(self.mean_size, size=n)

    def transform(self, z):
        z = np.asarray(z, dtype=complex)
        if np.any(z.real * self.mean_size >= 1.0):
            raise JumpDomainError(
                f"exponential law with mean {self.mean_size} has no transform "
                "where Re(u) * mean >= 1"
            )
        return 1.0 / (1.0 - self.mean_size * z)

    def mean(self):
        return self.mean_size

    def pdf(self, r):
        return math.exp(-r / self.mean_size) / self.mean_size

    def support(self, rho):
        return 0.0, rho

    def within(self, rho):
        mu = self.mean_size
        if rho <= 0:
            return 0.0, 0.0
        tail = math.exp(-rho / mu)
        return -math.expm1(-rho / mu), mu - (rho + mu) * tail


@dataclass(frozen=True)
class HalfNormal1:
    """Law of ``|N(0, scale^2)|``."""

    scale: float

    kind = "halfnormal"
    nonnegative_support = True
    random = True

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("half-normal scale must be positive")

    def sample(self, rng, n):
        return np.abs(rng.normal(0.0, self.scale, size=n))

    def transform(self, z):
        # E[e^{z|N|}] = exp(s^2 z^2 / 2) erfc(-s z / sqrt 2), written through the
        # Faddeeva function to stay finite for large imaginary z.
        z = np.asarray(z, dtype=complex)
        return special.wofz(-1j * self.scale * z / math.sqrt(2.0))

    def mean(self):
        return self.scale * math.sqrt(2.0 / math.pi)

    def pdf(self, r):
        s = self.scale
        return math.sqrt(2.0 / math.pi) / s * math.exp(-0.5 * (r / s) ** 2)

    def support(self, rho):
        return 0.0, rho

    def within(self, rho):
        s = self.scale
        if rho <= 0:
            return 0.0, 0.0
        p = math.erf(rho / (s * math.sqrt(2.0)))
        m = s * math.sqrt(2.0 / math.pi) * -math.expm1(-0.5 * (rho / s) ** 2)
        return p, m


@dataclass(frozen=True)
class Normal1:
    """Gaussian jump size; only admissible on real-valued (J) coordinates."""

    loc: float
    scale: float

    kind = "normal"
    nonnegative_support = False
    random = True

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("normal scale must be positive")

    def sample(self, rng, n):
        return rng.normal(self.loc, self.scale, size=n)

    def transform(self, z):
        z = np.asarray(z, dtype=complex)
        return np.exp(self.loc * z + 0.5 * self.scale**2 * z * z)

    def mean(self):
        return float(self.loc)

    def pdf(self, r):
        s = self.scale
        return math.exp(-0.5 * ((r - self.loc) / s) ** 2) / (s * math.sqrt(2 * math.pi))

    def support(self, rho):
        return -rho, rho

    def within(self, rho):
        if rho <= 0:
            return 0.0, 0.0
        s, mu = self.scale, self.loc
        lo, hi = (-rho - mu) / s, (rho - mu) / s
        p = special.ndtr(hi) - special.ndtr(lo)
        phi = lambda v: math.exp(-0.5 * v * v) / math.sqrt(2 * math.pi)
        return float(p), float(mu * p - s * (phi(hi) - phi(lo)))


ONE_DIM_LAWS = {
    "dirac": lambda spec: Dirac1(float(spec.get("value", 0.0))),
    "exp": lambda spec: Exponential1(float(spec["mean"])),
    "halfnormal": lambda spec: HalfNormal1(float(spec["scale"])),
    "normal": lambda spec: Normal1(float(spec.get("mean", 0.0)), float(spec["std"])),
}


def _ball_moments(laws, rho):
    """P(sum r_k^2 <= rho^2) and E[r_k 1{...}] for independent random laws."""
    first = laws[0]
    if len(laws) == 1:
        p, m = first.within(rho)
        return np.array([p, m])
    rest = laws[1:]

    def integrand(r):
        inner = _ball_moments(rest, math.sqrt(max(rho * rho - r * r, 0.0)))
        w = first.pdf(r)
        return w * np.concatenate(([inner[0], r * inner[0]], inner[1:]))

    lo, hi = first.support(rho)
    if hi <= lo:
        return np.zeros(len(laws) + 1)
    val, _ = integrate.quad_vec(integrand, lo, hi, epsabs=1e-13, epsrel=1e-11)
    return val


# ---------------------------------------------------------------------------
# d-dimensional catalog
# ---------------------------------------------------------------------------


class JumpLaw:
    """Common interface of the catalog entries (probability laws on R^d)."""

    dim: int
    kind: str

    def transform(self, u):
        raise NotImplementedError

    def truncated_mean(self) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng, n) -> np.ndarray:
        raise NotImplementedError

    def support_violations(self, m: int) -> list[int]:
        """Coordinates ``k < m`` on which the law can put negative mass."""
        raise NotImplementedError


@dataclass(frozen=True)
class DiracAt(JumpLaw):
    point: tuple

    kind = "dirac"

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))

    @property
    def dim(self):
        return len(self.point)

    def transform(self, u):
        u = np.asarray(u, dtype=complex)
        return np.exp(u @ np.asarray(self.point))

    def truncated_mean(self):
        xi = np.asarray(self.point)
        return xi.copy() if np.linalg.norm(xi) <= 1.0 else np.zeros_like(xi)

    def mean(self):
        return np.asarray(self.point)

    def sample(self, rng, n):
        return np.tile(np.asarray(self.point), (n, 1))

    def support_violations(self, m):
        return [k for k in range(m) if self.point[k] < 0]


@dataclass(frozen=True)
class ExponentialOnCoordinate(JumpLaw):
    """Jump ``E * e_index`` with ``E`` exponential of the given mean."""

    dim: int
    index: int
    mean_size: float

    kind = "exp_coord"

    def __post_init__(self):
        if not 0 <= self.index < self.dim:
            raise ValueError("coordinate index out of range")
        if not self.mean_size > 0:
            raise ValueError("exponential mean must be positive")

    def transform(self, u):
        u = np.asarray(u, dtype=complex)
        return Exponential1(self.mean_size).transform(u[..., self.index])

    def truncated_mean(self):
        out = np.zeros(self.dim)
        out[self.index] = Exponential1(self.mean_size).within(1.0)[1]
        return out

    def mean(self):
        out = np.zeros(self.dim)
        out[self.index] = self.mean_size
        return out

    def sample(self, rng, n):
        out = np.zeros((n, self.dim))
        out[:, self.index] = rng.exponential(self.mean_size, size=n)
        return out

    def support_violations(self, m):
        return []


@dataclass(frozen=True)
class IndependentProduct(JumpLaw):
    laws: tuple

    kind = "product"

    def __post_init__(self):
        object.__setattr__(self, "laws", tuple(self.laws))

    @property
    def dim(self):
        return len(self.laws)

    def transform(self, u):
        u = np.asarray(u, dtype=complex)
        out = np.ones(u.shape[:-1], dtype=complex)
        for k, law in enumerate(self.laws):
            out = out * law.transform(u[..., k])
        return out

    def truncated_mean(self):
        return self._truncated_mean.copy()

    @cached_property
    def _truncated_mean(self):
        # nested quadrature over the unit ball; evaluated once per law
        fixed = [k for k, law in enumerate(self.laws) if not law.random]
        rand = [k for k, law in enumerate(self.laws) if law.random]
        rho2 = 1.0 - sum(self.laws[k].value ** 2 for k in fixed)
        out = np.zeros(self.dim)
        if rho2 < 0:
            return out
        if not rand:
            return np.array([law.value for law in self.laws], dtype=float)
        moments = _ball_moments([self.laws[k] for k in rand], math.sqrt(rho2))
        prob = moments[0]
        for k in fixed:
            out[k] = self.laws[k].value * prob
        for pos, k in enumerate(rand):
            out[k] = moments[pos + 1]
        return out

    def mean(self):
        return np.array([law.mean() for law in self.laws])

    def sample(self, rng, n):
        return np.column_stack([law.sample(rng, n) for law in self.laws])

    def support_violations(self, m):
        return [k for k in range(m) if not self.laws[k].nonnegative_support]


@dataclass(frozen=True)
class FiniteMixture(JumpLaw):
    weights: tuple
    components: tuple

    kind = "mixture"

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))
        if len(w) != len(self.components) or not w:
            raise ValueError("mixture needs one weight per component")
        if any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if len({c.dim for c in self.components}) != 1:
            raise ValueError("mixture components must share a dimension")

    @property
    def dim(self):
        return self.components[0].dim

    def transform(self, u):
        return sum(w * c.transform(u) for w, c in zip(self.weights, self.components))

    def truncated_mean(self):
        return sum(w * c.truncated_mean() for w, c in zip(self.weights, self.components))

    def mean(self):
        return sum(w * c.mean() for w, c in zip(self.weights, self.components))

    def sample(self, rng, n):
        which = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        out = np.zeros((n, self.dim))
        for j, comp in enumerate(self.components):
            idx = np.flatnonzero(which == j)
            if idx.size:
                out[idx] = comp.sample(rng, idx.size)
        return out

    def support_violations(self, m):
        bad = set()
        for w, c in zip(self.weights, self.components):
            if w > 0:
                bad.update(c.support_violations(m))
        return sorted(bad)


# ---------------------------------------------------------------------------
# jump measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpMeasure:
    """Finite Levy measure ``rate * law``.

    ``rate == 0`` is the zero measure; ``law`` is then irrelevant and may be None.
    Every catalog law has a finite first moment, so ``finite_first_moment`` is
    always true; it is kept as an explicit flag for the admissibility checks.
    """

    rate: float = 0.0
    law: JumpLaw | None = None
    finite_first_moment: bool = field(default=True, init=False)

    def __post_init__(self):
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError("jump rate must be finite and nonnegative")
        if self.rate > 0 and self.law is None:
            raise ValueError("a positive rate needs a jump law")

    @property
    def is_zero(self):
        return self.rate == 0.0

    @property
    def dim(self):
        return None if self.law is None else self.law.dim

    def integral(self, u, compensate):
        """``int (e^{<u,xi>} - 1 - <u, mask * h(xi)>) rate * law(dxi)``.

        ``compensate`` is a boolean mask of the coordinates carrying the
        small-jump compensation.
        """
        u = np.asarray(u, dtype=complex)
        if self.is_zero:
            return np.zeros(u.shape[:-1], dtype=complex)
        comp = np.where(compensate, self.law.truncated_mean(), 0.0)
        return self.rate * (self.law.transform(u) - 1.0 - u @ comp)

    def compensator(self, compensate):
        """Drift correction ``rate * mask * E[h(xi)]`` of the compensated sum."""
        if self.is_zero:
            return 0.0
        return self.rate * np.where(compensate, self.law.truncated_mean(), 0.0)

    def first_moment(self):
        if self.is_zero:
            return 0.0
        return self.rate * self.law.mean()


ZERO_MEASURE = JumpMeasure()


def embed_law(law: JumpLaw, front: int = 1) -> JumpLaw:
    """Push a law forward under ``xi -> (0, ..., 0, xi)`` with ``front`` zeros."""
    if isinstance(law, DiracAt):
        return DiracAt((0.0,) * front + law.point)
    if isinstance(law, ExponentialOnCoordinate):
        return ExponentialOnCoordinate(law.dim + front, law.index + front, law.mean_size)
    if isinstance(law, IndependentProduct):
        return IndependentProduct((Dirac1(0.0),) * front + law.laws)
    if isinstance(law, FiniteMixture):
        return FiniteMixture(law.weights, tuple(embed_law(c, front) for c in law.components))
    raise TypeError(f"unknown jump law {law!r}")


def embed_measure(measure: JumpMeasure, front: int = 1) -> JumpMeasure:
    if measure.is_zero:
        return ZERO_MEASURE
    return JumpMeasure(measure.rate, embed_law(measure.law, front))


# ---------------------------------------------------------------------------
# (de)serialisation to plain mappings
# ---------------------------------------------------------------------------


def law_from_mapping(spec: dict, dim: int) -> JumpLaw:
    kind = spec.get("kind")
    if kind == "dirac":
        point = spec["point"]
        if len(point) != dim:
            raise ValueError(f"dirac point has length {len(point)}, expected {dim}")
        return DiracAt(tuple(point))
    if kind == "exp_coord":
        # indices are 1-based in configuration files
        return ExponentialOnCoordinate(dim, int(spec["index"]) - 1, float(spec["mean"]))
    if kind == "product":
        laws = spec["laws"]
        if len(laws) != dim:
            raise ValueError(f"product has {len(laws)} factors, expected {dim}")
        out = []
        for entry in laws:
            one = entry.get("kind")
            if one not in ONE_DIM_LAWS:
                raise ValueError(f"unknown one-dimensional law kind {one!r}")
            out.append(ONE_DIM_LAWS[one](entry))
        return IndependentProduct(tuple(out))
    if kind == "mixture":
        comps = tuple(law_from_mapping(c, dim) for c in spec["components"])
        return FiniteMixture(tuple(spec["weights"]), comps)
    raise ValueError(f"unknown jump law kind {kind!r}")


def _one_dim_to_mapping(law) -> dict:
    if isinstance(law, Dirac1):
        return {"kind": "dirac", "value": law.value}
    if isinstance(law, Exponential1):
        return {"kind": "exp", "mean": law.mean_size}
    if isinstance(law, HalfNormal1):
        return {"kind": "halfnormal", "scale": law.scale}
    if isinstance(law, Normal1):
        return {"kind": "normal", "mean": law.loc, "std": law.scale}
    raise TypeError(law)


def law_to_mapping(law: JumpLaw) -> dict:
    if isinstance(law, DiracAt):
        return {"kind": "dirac", "point": list(law.point)}
    if isinstance(law, ExponentialOnCoordinate):
        return {"kind": "exp_coord", "index": law.index + 1, "mean": law.mean_size}
    if isinstance(law, IndependentProduct):
        return {"kind": "product", "laws": [_one_dim_to_mapping(v) for v in law.laws]}
    if isinstance(law, FiniteMixture):
        return {
            "kind": "mixture",
            "weights": list(law.weights),
            "components": [law_to_mapping(c) for c in law.components],
        }
    raise TypeError(law)


def measure_from_mapping(spec: dict | None, dim: int) -> JumpMeasure:
    if not spec:
        return ZERO_MEASURE
    rate = float(spec.get("rate", 0.0))
    if rate == 0.0:
        return ZERO_MEASURE
    return JumpMeasure(rate, law_from_mapping(spec, dim))


def measure_to_mapping(measure: JumpMeasure) -> dict:
    if measure.is_zero:
        return {"rate": 0.0}
    out = {"rate": measure.rate}
    out.update(law_to_mapping(measure.law))
    return out


def product(*laws: Sequence) -> IndependentProduct:
    return IndependentProduct(tuple(laws))
