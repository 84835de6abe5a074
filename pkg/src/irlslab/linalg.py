"""Dense linear-algebra kernels shared by the IRLS solvers.

Vectors and matrices are plain float64 numpy arrays; matrices are stored
row-major (C order) with shape ``(rows, cols)``.  All public functions
validate their inputs and raise :class:`ValueError` on malformed arguments,
:class:`SingularSystemError` when a normal system cannot be factorized, and
:class:`InfeasibleError` when a constrained solve fails its feasibility
post-check.
"""

from __future__ import annotations

import re

import numpy as np
import scipy.linalg as sla

# Pivots below this fraction of the largest diagonal entry count as singular.
PIVOT_RTOL = 1e-12
# Feasibility post-check: ||Phi x - y||_inf <= FEAS_RTOL * (1 + ||y||_inf).
FEAS_RTOL = 1e-8

_MINOR_RE = re.compile(r"^(\d+)-th leading minor")


class SingularSystemError(np.linalg.LinAlgError):
    """A symmetric positive-definite solve hit a (near-)zero pivot."""

    def __init__(self, pivot: int, detail: str = ""):
        self.pivot = int(pivot)
        msg = f"normal system is numerically singular at pivot {pivot}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InfeasibleError(ValueError):
    """The right-hand side is not attainable by the constraint matrix."""


def as_vector(x, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_matrix(a, name: str = "A") -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_weights(w, n: int | None = None, name: str = "w") -> np.ndarray:
    v = as_vector(w, name)
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {n}")
    if v.size and v.min() <= 0.0:
        raise ValueError(f"{name} must be strictly positive")
    return v


def nonincreasing_rearrangement(x) -> np.ndarray:
    """Absolute values of ``x`` sorted in nonincreasing order."""
    v = as_vector(x)
    if v.size == 0:
        raise ValueError("rearrangement of an empty vector is undefined")
    return np.sort(np.abs(v))[::-1]


def sigma_tail(x, j: int) -> float:
    """Tail sum beyond the ``j`` largest magnitudes.

    Returns ``sum_{i > j} r_i(x)`` where ``r`` is the nonincreasing
    rearrangement of ``|x|``; zero exactly when ``x`` is j-sparse.
    """
    v = as_vector(x)
    n = v.size
    if not 0 <= j <= n:
        raise ValueError(f"tail index j={j} outside [0, {n}]")
    if j == n:
        return 0.0
    av = np.abs(v)
    if j == 0:
        return float(av.sum())
    # partition puts the n-j smallest magnitudes first
    return float(np.partition(av, n - j - 1)[: n - j].sum())


def smoothed_objective(x, eps: float) -> float:
    """Smoothed l1 surrogate ``sum_i sqrt(x_i^2 + eps^2)``."""
    v = as_vector(x)
    if not np.isfinite(eps) or eps < 0.0:
        raise ValueError(f"smoothing parameter must be >= 0, got {eps}")
    return float(np.hypot(v, eps).sum())


def weighted_inner(u, v, w) -> float:
    """Weighted inner product ``sum_i w_i u_i v_i``."""
    uu = as_vector(u, "u")
    vv = as_vector(v, "v")
    ww = as_weights(w, uu.shape[0])
    if uu.shape[0] != vv.shape[0]:
        raise ValueError(f"length mismatch: {uu.shape[0]} vs {vv.shape[0]}")
    return float((ww * uu * vv).sum())


def weighted_norm(u, w) -> float:
    return float(np.sqrt(max(weighted_inner(u, u, w), 0.0)))


def spd_solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``G x = rhs`` for symmetric positive-definite ``G``.

    Factorizes by Cholesky and rejects pivots below
    ``PIVOT_RTOL * max(diag(G))`` instead of regularizing, so that a
    near-singular system raises rather than silently perturbing iterates.
    """
    try:
        factor = sla.cho_factor(G, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        match = _MINOR_RE.match(str(exc))
        pivot = int(match.group(1)) - 1 if match else G.shape[0] - 1
        raise SingularSystemError(pivot, "factorization failed") from exc
    diag = np.diagonal(factor[0])
    pivots = diag * diag
    floor = PIVOT_RTOL * float(np.diagonal(G).max())
    small = int(np.argmin(pivots))
    if pivots[small] < floor:
        raise SingularSystemError(small, f"pivot {pivots[small]:.3e} below {floor:.3e}")
    return sla.cho_solve(factor, rhs, check_finite=False)


def _constrained_ls(phi: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Min of ||x||^2_w over {x : phi x = y} with d_i = 1/w_i (no validation)."""
    G = (phi * d) @ phi.T
    u = spd_solve(G, y)
    x = d * (phi.T @ u)
    resid = float(np.abs(phi @ x - y).max())
    if resid > FEAS_RTOL * (1.0 + float(np.abs(y).max(initial=0.0))):
        raise InfeasibleError(
            f"constrained solve violates phi x = y by {resid:.3e}; "
            "right-hand side may be outside the range of phi"
        )
    return x


def constrained_weighted_ls(phi, y, w) -> np.ndarray:
    """Minimize the weighted 2-norm over the affine solution set of ``phi x = y``.

    Parameters
    ----------
    phi : (m, N) array with full row rank.
    y : (m,) array in the range of ``phi``.
    w : (N,) strictly positive weights.

    Returns
    -------
    The unique minimizer ``D phi^T (phi D phi^T)^{-1} y`` with ``D = diag(1/w)``.
    """
    p = as_matrix(phi, "phi")
    yy = as_vector(y, "y")
    ww = as_weights(w, p.shape[1])
    if yy.shape[0] != p.shape[0]:
        raise ValueError(f"y has length {yy.shape[0]}, expected {p.shape[0]}")
    return _constrained_ls(p, yy, 1.0 / ww)


def _regression_ls(A: np.ndarray, b: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Minimizer of ``sum_i theta_i (a_i^T z - b_i)^2`` (no validation)."""
    M = (A * theta[:, None]).T @ A
    rhs = A.T @ (theta * b)
    return spd_solve(M, rhs)


def weighted_regression_ls(A, b, theta) -> np.ndarray:
    """Weighted least-squares fit: solve ``(A^T diag(theta) A) z = A^T diag(theta) b``.

    ``A`` must have full column rank and ``theta`` one positive weight per row.
    """
    AA = as_matrix(A)
    bb = as_vector(b, "b")
    tt = as_weights(theta, AA.shape[0], "theta")
    if bb.shape[0] != AA.shape[0]:
        raise ValueError(f"b has length {bb.shape[0]}, expected {AA.shape[0]}")
    return _regression_ls(AA, bb, tt)
