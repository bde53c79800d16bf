"""
Reduction of a general parameter set to Heston type.

Two steps: the state is enlarged by a constant component equal to one, which
carries the state-independent part as an ordinary driver, and the drift block
acting from ``J`` to ``J`` is removed by a moving frame
``Y_J = X_J - B_J int X_J ds``. After simulating the reduced process the frame
is undone by solving the linear integral equation pathwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .jumps import embed_measure
from .params import AdmissibleParams, StateDim, classify_heston
from .timechange import ProcessPath

log = logging.getLogger(__name__)

FRAME_TOL = 1e-4


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class ReductionPlan:
    original: AdmissibleParams
    augmented: AdmissibleParams
    frame_matrix: np.ndarray
    has_aux: bool = True

    def embed(self, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([[1.0], x]) if self.has_aux else x

    def frequency_embed(self, u):
        u = np.asarray(u, dtype=complex)
        return np.concatenate([[0.0], u]) if self.has_aux else u

    @property
    def has_frames(self):
        return bool(self.frame_matrix.any())


def _check_ring(params):
    bad = []
    if params.c != 0:
        bad.append("c=0")
    if any(params.gamma[i] != 0 for i in params.dim.I):
        bad.append("gamma_i=0 for i in I")
    if not all(params.M[i].finite_first_moment for i in params.dim.I):
        bad.append("M_i with finite first moment")
    if bad:
        raise ReductionError("reduction needs " + ", ".join(bad))


def _augment_params(params: AdmissibleParams) -> AdmissibleParams:
    m, n = params.dim.m, params.dim.n
    d = m + n
    e = d + 1
    beta = np.zeros((e, e))
    alpha = np.zeros((e, e, e))
    beta[0, 1:] = params.b
    alpha[0, 1:, 1:] = params.a
    beta[1:, 1:] = params.beta
    alpha[1:, 1:, 1:] = params.alpha
    M = (embed_measure(params.m_measure),) + tuple(embed_measure(mu) for mu in params.M)
    return AdmissibleParams(StateDim(m + 1, n), np.zeros(e), beta, np.zeros((e, e)), alpha, 0.0, None, M=M)


def augment(params: AdmissibleParams) -> ReductionPlan:
    """Enlarge the state by a constant component so that the result has no state-independent part.

    The new driver 0 carries ``(b, a, m)``; its ``R_0`` evaluated at ``(0, u)``
    equals ``F(u)`` of the original set.
    """
    _check_ring(params)
    aug = _augment_params(params)
    return ReductionPlan(params, aug, np.zeros((params.dim.n, params.dim.n)), True)


def frame_matrix(params: AdmissibleParams) -> np.ndarray:
    """``B_J`` with ``(B_J)_{jk} = (beta_k)_j`` for ``j, k`` in ``J``."""
    m = params.dim.m
    return params.beta[m:, m:].T.copy()


def apply_moving_frames(params: AdmissibleParams):
    """Remove the ``J`` to ``J`` drift block. Returns ``(params_H, B_J)``."""
    B = frame_matrix(params)
    if not B.any():
        return params, B
    beta = params.beta.copy()
    m = params.dim.m
    beta[m:, m:] = 0.0
    return replace(params, beta=beta), B


def reduce(params: AdmissibleParams, force_augment=True) -> ReductionPlan:
    """Full reduction: enlargement (skipped for married sets unless forced) then moving frames."""
    _check_ring(params)
    married = classify_heston(params).married
    if force_augment or not married:
        aug = _augment_params(params)
        has_aux = True
    else:
        aug, has_aux = params, False
    reduced, B = apply_moving_frames(aug)
    flags = classify_heston(reduced)
    assert flags.married and flags.H, flags
    return ReductionPlan(params, reduced, B, has_aux)


# ---------------------------------------------------------------------------
# pathwise frames
# ---------------------------------------------------------------------------


def _integrals(grid, X, X_left):
    """Trapezoidal ``int_0^t X ds`` at grid nodes, treating nodes as possible jump points."""
    h = np.diff(grid)[:, None]
    incr = 0.5 * h * (X[:-1] + X_left[1:])
    return np.vstack([np.zeros((1, X.shape[1])), np.cumsum(incr, axis=0)])


def forward_frames(path: ProcessPath, B) -> ProcessPath:
    """``Y_J = X_J - B_J int_0^t X_J ds``; other components unchanged."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    if not B.any():
        return path
    J = slice(path.dim - n, path.dim)
    integ = _integrals(path.output_grid, path.X[:, J], path.X_left[:, J])
    X = path.X.copy()
    XL = path.X_left.copy()
    X[:, J] -= integ @ B.T
    XL[:, J] -= integ @ B.T
    return replace(path, X=X, X_left=XL)


def _invert_on(grid, Y, YL, B):
    n = B.shape[0]
    K = grid.size
    X = np.empty_like(Y)
    XL = np.empty_like(YL)
    X[0] = Y[0]
    XL[0] = YL[0]
    integ = np.zeros(n)
    eye = np.eye(n)
    for k in range(K - 1):
        h = grid[k + 1] - grid[k]
        A = eye - 0.5 * h * B
        rhs = YL[k + 1] + B @ (integ + 0.5 * h * X[k])
        XL[k + 1] = np.linalg.solve(A, rhs)
        X[k + 1] = XL[k + 1] + (Y[k + 1] - YL[k + 1])
        integ = integ + 0.5 * h * (X[k] + XL[k + 1])
    return X, XL


def invert_frames(path: ProcessPath, B, strip_aux=False, tol=FRAME_TOL) -> ProcessPath:
    """Recover ``X_J`` from ``Y_J = X_J - B_J int X_J`` by stepwise trapezoidal updates.

    The update is the exact algebraic inverse of ``forward_frames`` on the same
    grid. A coarse-grid warning is attached when a Richardson estimate of the
    quadrature error (half grid against full grid) exceeds ``tol``.
    """
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    out = path
    if B.any():
        J = slice(path.dim - n, path.dim)
        grid = path.output_grid
        X, XL = _invert_on(grid, path.X[:, J], path.X_left[:, J], B)
        warnings = list(path.warnings)
        if grid.size >= 5:
            sub = np.arange(0, grid.size, 2)
            Xc, _ = _invert_on(grid[sub], path.X[sub, J], path.X_left[sub, J], B)
            est = float(np.max(np.abs(Xc - X[sub]))) / 3.0
            if est > tol:
                msg = f"frame inversion error estimate {est:.2e} exceeds {tol:.0e}; refine the output grid"
                log.warning(msg)
                warnings.append(msg)
        Xf = path.X.copy()
        XLf = path.X_left.copy()
        Xf[:, J] = X
        XLf[:, J] = XL
        out = replace(path, X=Xf, X_left=XLf, warnings=warnings)
    return strip_auxiliary(out) if strip_aux else out


def strip_auxiliary(path: ProcessPath) -> ProcessPath:
    """Drop the constant component added by the enlargement."""
    absorbed = list(path.absorbed_at)[1:]
    return replace(
        path,
        X=path.X[:, 1:],
        X_left=path.X_left[:, 1:],
        x0=path.x0[1:],
        tau=path.tau[:, 1:],
        absorbed_at=absorbed,
        m=path.m - 1,
    )
