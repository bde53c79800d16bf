"""
Functional characteristics F, R and the generalized Riccati system.

``psi' = R(psi)``, ``phi' = F(psi)`` with ``psi(0) = u``, ``phi(0) = 0`` is
integrated with an adaptive Dormand-Prince pair in complex arithmetic. The
pairing ``<u, x>`` is bilinear throughout (no conjugation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .params import AdmissibleParams

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
U_TOL = 1e-8
# dense output is only 4th order; a step cap keeps it at the level of the nodes
MIN_STEPS = 32


class RiccatiEscapeError(ArithmeticError):
    """``psi`` left the set of admissible frequencies (or the integrator broke down)."""

    def __init__(self, time, message=""):
        super().__init__(f"Riccati solution left U at t={time:.6g}" + (f": {message}" if message else ""))
        self.time = time


def in_frequency_set(u, m, tol=U_TOL):
    """Membership in ``C_{<=0}^m x iR^n`` up to ``tol``."""
    u = np.asarray(u, dtype=complex)
    return bool(np.all(u.real[..., :m] <= tol) and np.all(np.abs(u.real[..., m:]) <= tol))


def frequency_vector(u, dim, tol=U_TOL) -> np.ndarray:
    """Validate and return ``u`` as a complex vector of length ``d``."""
    u = np.asarray(u, dtype=complex).reshape(-1)
    if u.shape != (dim.d,):
        raise ValueError(f"frequency vector has length {u.size}, expected {dim.d}")
    if not in_frequency_set(u, dim.m, tol):
        raise ValueError(f"frequency vector {u} is outside C_<=0^{dim.m} x iR^{dim.n}")
    return u


def _quad(u, mat):
    return np.einsum("...k,kl,...l->...", u, mat, u)


def eval_F(params: AdmissibleParams, u):
    """State-independent characteristic ``F(u)``; ``u`` may carry leading batch axes."""
    u = np.asarray(u, dtype=complex)
    out = u @ params.b + 0.5 * _quad(u, params.a) - params.c
    return out + params.m_measure.integral(u, params.compensation_mask(None))


def eval_R(params: AdmissibleParams, u, k):
    """Component ``R_k(u)``, with small jumps compensated on ``J`` and ``k``."""
    u = np.asarray(u, dtype=complex)
    out = u @ params.beta[k] + 0.5 * _quad(u, params.alpha[k]) - params.gamma[k]
    return out + params.M[k].integral(u, params.compensation_mask(k))


def eval_R_vector(params: AdmissibleParams, u):
    u = np.asarray(u, dtype=complex)
    return np.stack([eval_R(params, u, k) for k in range(params.dim.d)], axis=-1)


@dataclass
class RiccatiSolution:
    time_grid: np.ndarray
    phi: np.ndarray
    psi: np.ndarray  # shape (len(time_grid), d)
    u0: np.ndarray
    step_stats: dict = field(default_factory=dict)
    dense: object = None

    def at(self, t):
        """``(phi, psi)`` at arbitrary times inside the integration range."""
        y = self.dense(np.atleast_1d(np.asarray(t, dtype=float)))
        return y[0], y[1:].T


def solve_riccati(
    params: AdmissibleParams,
    u0,
    T,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    times=None,
    n_grid=101,
) -> RiccatiSolution:
    """Integrate the Riccati system on ``[0, T]`` and report it on a grid."""
    if not T > 0:
        raise ValueError("T must be positive")
    dim = params.dim
    u0 = frequency_vector(u0, dim)
    grid = np.linspace(0.0, T, n_grid) if times is None else np.asarray(times, dtype=float)
    zero_F = params.b.any() or params.a.any() or params.c or not params.m_measure.is_zero

    def rhs(_t, y):
        psi = y[1:]
        dphi = eval_F(params, psi) if zero_F else 0.0
        return np.concatenate([[dphi], eval_R_vector(params, psi)])

    y0 = np.concatenate([[0.0 + 0.0j], u0])
    res = solve_ivp(rhs, (0.0, T), y0, method="RK45", rtol=rtol, atol=atol, dense_output=True, max_step=T / MIN_STEPS)
    if res.status != 0:
        raise RiccatiEscapeError(float(res.t[-1]), res.message)
    for t, y in zip(res.t, res.y.T):
        if not np.all(np.isfinite(y)) or not in_frequency_set(y[1:], dim.m):
            raise RiccatiEscapeError(float(t))
    vals = res.sol(grid)
    phi, psi = vals[0], vals[1:].T
    bad = [not in_frequency_set(p, dim.m) for p in psi]
    if any(bad):
        raise RiccatiEscapeError(float(grid[bad.index(True)]))
    # exact initial values on the grid
    if grid.size and grid[0] == 0.0:
        phi[0] = 0.0
        psi[0] = u0
    stats = {"steps": int(res.t.size - 1), "nfev": int(res.nfev)}
    return RiccatiSolution(grid, phi, psi, u0, stats, res.sol)


def cf_affine(params: AdmissibleParams, u0, x, T, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, times=None, n_grid=101):
    """``exp(phi(t, u0) + <x, psi(t, u0)>)`` on the time grid."""
    x = np.asarray(x, dtype=float)
    if not params.dim.in_domain(x):
        raise ValueError("initial state outside the state space")
    sol = solve_riccati(params, u0, T, rtol, atol, times, n_grid)
    return np.exp(sol.phi + sol.psi @ x)


def cir_psi(t, u, b, sigma2):
    """Closed form of ``psi' = b psi + sigma2 psi^2 / 2``, ``psi(0) = u``."""
    t = np.asarray(t, dtype=float)
    if b == 0:
        return u / (1.0 - 0.5 * sigma2 * u * t)
    e = np.exp(b * t)
    return u * e / (1.0 - sigma2 * u / (2.0 * b) * (e - 1.0))


def cir_laplace(t, u, x, b, sigma2):
    """``E_x[exp(u X_t)]`` for the CIR process without state-independent part."""
    return np.exp(x * cir_psi(t, u, b, sigma2))
