"""Problem-instance constructors and the null-space-property checker.

The centerpiece is the stacked-identity failure family: a small l1-regression
problem on which the original (ddfg) smoothing schedule provably stalls at a
positive distance from the true solution, together with the closed-form
scalar recursion that predicts the stalled dynamics exactly.

All randomness flows through :func:`numpy.random.default_rng` seeded with
``(seed, tag)`` tuples (PCG64 bit generator, ziggurat normal variates), so
every construction is reproducible across platforms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .linalg import as_matrix, as_vector
from .problems import FAILURE_FAMILY, CsInstance, RegressionInstance


def nu_critical(k: int) -> float:
    """Smallest gamma for which the failure construction is valid.

    ``nu(k) = sqrt((4 k^2 (2k+1)^2 + 1) / (4 k^2 (2k+1)^2 + 4))``; for k=5
    this prints as 0.999876 to six digits.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = 4.0 * k * k * (2 * k + 1) ** 2
    return math.sqrt((q + 1.0) / (q + 4.0))


def build_tilde_A(k: int) -> np.ndarray:
    """Stack 2k+1 copies of the k-by-k identity: shape (2k^2+k, k).

    Satisfies the null-space ratio bound with the sharp constant k/(k+1)
    at order K=k.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return np.tile(np.eye(k), (2 * k + 1, 1))


def build_A_gamma(k: int, gamma: float) -> np.ndarray:
    """Stacked identities with the first k blocks' (1,1) entry set to (k+1)gamma/k.

    Requires ``gamma`` in ``(k/(k+1), 1)`` so the planted ratio exceeds the
    base construction's k/(k+1); the witness direction e_1 then attains the
    ratio ``gamma`` exactly.
    """
    if not k / (k + 1.0) < gamma < 1.0:
        raise ValueError(
            f"gamma={gamma} must lie in (k/(k+1), 1) = ({k / (k + 1.0)}, 1) for k={k}"
        )
    A = build_tilde_A(k)
    A[np.arange(k) * k, 0] = (k + 1) * gamma / k
    return A


def spike_positions(k: int) -> np.ndarray:
    """Row indices jk (0-based) carrying the planted right-hand-side spikes."""
    return np.arange(k) * k


def default_z_star(k: int, seed: int = 0) -> np.ndarray:
    """Strictly positive reference solution: |N(0,1)| + 0.1 per entry."""
    rng = np.random.default_rng((seed, 2718))
    return np.abs(rng.standard_normal(k)) + 0.1


def sanitize_z_star(z_star) -> np.ndarray:
    """Force strict positivity (|z| + 0.1 on offending entries), warning if needed.

    The failure construction requires z* in the open positive orthant while
    the experiment protocols sample it from a centered normal.
    """
    z = as_vector(z_star, "z_star").copy()
    bad = z <= 0.0
    if bad.any():
        warnings.warn(
            f"z_star has {int(bad.sum())} nonpositive entries; "
            "replacing with |z| + 0.1 to honor the positivity requirement",
            stacklevel=2,
        )
        z[bad] = np.abs(z[bad]) + 0.1
    return z


@dataclass(frozen=True)
class CounterexampleParams:
    """Validated parameters of the failure family."""

    k: int
    gamma: float
    delta: float
    z_star: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        nu = nu_critical(self.k)
        if not nu <= self.gamma < 1.0:
            raise ValueError(
                f"gamma={self.gamma} violates gamma >= nu({self.k}) = {nu:.8f} "
                "(failure-family precondition)"
            )
        cap = self.k * (2 * self.k + 1)
        if not 0.0 < self.delta <= cap:
            raise ValueError(
                f"delta={self.delta} violates 0 < delta <= k(2k+1) = {cap}"
            )
        z = as_vector(self.z_star, "z_star")
        if z.shape[0] != self.k:
            raise ValueError(f"z_star must have length k={self.k}")
        if z.min() <= 0.0:
            raise ValueError("z_star must be strictly positive (use sanitize_z_star)")
        object.__setattr__(self, "z_star", z)


@dataclass(frozen=True)
class CounterexampleInstance:
    """A fully built failure instance with its derived constants.

    ``s_star = k(2k+1) sqrt(xi^2 - 1)`` is the fixed point of the failure
    ratio and ``limit_gap = delta s* / (1 + alpha s*)`` the limiting offset
    ``z_1 - z*_1`` certifying non-convergence of the ddfg schedule.
    """

    k: int
    gamma: float
    delta: float
    z_star: np.ndarray
    A: np.ndarray
    b: np.ndarray
    z0: np.ndarray
    x_star: np.ndarray
    alpha: float
    xi: float
    nu: float
    s_star: float
    limit_gap: float
    z0_position: float

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def as_regression(self) -> RegressionInstance:
        return RegressionInstance(
            A=self.A,
            b=self.b,
            z_star=self.z_star,
            z0=self.z0,
            meta={
                "family": FAILURE_FAMILY,
                "k": self.k,
                "gamma": self.gamma,
                "delta": self.delta,
                "alpha": self.alpha,
                "xi": self.xi,
                "nu": self.nu,
                "s_star": self.s_star,
                "limit_gap": self.limit_gap,
                "z0_position": self.z0_position,
            },
        )


def build_counterexample(
    params: CounterexampleParams, z0_position: float = 0.5
) -> CounterexampleInstance:
    """Materialize the failure instance and place z0 inside its critical interval.

    ``z0_position`` interpolates between the interval endpoints
    ``z*_1 + delta/(alpha + gamma/(k(2k+1) sqrt(xi^2-1)))`` (position 0) and
    ``z*_1 + delta/(alpha + 1)`` (position 1); the remaining coordinates of
    z0 equal z*.
    """
    if not 0.0 <= z0_position <= 1.0:
        raise ValueError(f"z0_position={z0_position} must lie in [0, 1]")
    k, gamma, delta = params.k, params.gamma, params.delta
    c = k * (2 * k + 1)
    alpha = gamma * (k + 1) / k
    xi = gamma * math.sqrt(1.0 + 1.0 / (c * c))
    nu = nu_critical(k)
    # construction-validity gate; cannot fail once params validated
    if not alpha > 1.0:
        raise AssertionError(f"violated alpha > 1 (alpha = {alpha})")
    if not xi > 1.0:
        raise AssertionError(f"violated xi > 1 (xi = {xi})")
    s_star = c * math.sqrt(xi * xi - 1.0)
    if not gamma / s_star > 1.0:
        raise AssertionError(
            f"violated gamma / (k(2k+1) sqrt(xi^2-1)) > 1 (value = {gamma / s_star})"
        )
    A = build_A_gamma(k, gamma)
    spikes = spike_positions(k)
    b = A @ params.z_star
    b[spikes] += delta
    x_star = np.zeros(A.shape[0])
    x_star[spikes] = -delta
    lo = params.z_star[0] + delta / (alpha + gamma / s_star)
    hi = params.z_star[0] + delta / (alpha + 1.0)
    assert lo < hi, "empty z0 interval"
    z0 = params.z_star.copy()
    z0[0] = lo + z0_position * (hi - lo)
    return CounterexampleInstance(
        k=k,
        gamma=gamma,
        delta=delta,
        z_star=params.z_star,
        A=A,
        b=b,
        z0=z0,
        x_star=x_star,
        alpha=alpha,
        xi=xi,
        nu=nu,
        s_star=s_star,
        limit_gap=delta * s_star / (1.0 + alpha * s_star),
        z0_position=z0_position,
    )


@dataclass
class OracleTrace:
    """Closed-form failure dynamics: arrays indexed by iteration 0..n_steps."""

    s: np.ndarray
    eps: np.ndarray
    z1: np.ndarray


def scalar_recursion_oracle(
    instance: CounterexampleInstance, n_steps: int
) -> OracleTrace:
    """Replay the ddfg run on a failure instance through its scalar recursion.

    With ``e_n := z^n_1 - z*_1`` the run satisfies ``s_n = e_n/(delta - alpha e_n)``,
    ``s_1 = gamma sqrt((e_0^2 + 1)/((delta - alpha e_0)^2 + 1))`` and thereafter
    ``s_{n+1} = xi s_n / sqrt(1 + s_n^2/(k(2k+1))^2)``, while the smoothing
    parameter tracks ``eps_n = e_n / (k(2k+1))`` from n = 1 on.  The sequence
    ``s_n`` decreases to the fixed point ``s_star``.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    k, gamma, delta, alpha, xi = (
        instance.k,
        instance.gamma,
        instance.delta,
        instance.alpha,
        instance.xi,
    )
    c = float(k * (2 * k + 1))
    e0 = instance.z0[0] - instance.z_star[0]
    s = np.empty(n_steps + 1)
    s[0] = e0 / (delta - alpha * e0)
    s[1] = gamma * math.sqrt((e0 * e0 + 1.0) / ((delta - alpha * e0) ** 2 + 1.0))
    for n in range(1, n_steps):
        s[n + 1] = xi * s[n] / math.sqrt(1.0 + s[n] * s[n] / (c * c))
    gaps = delta * s / (1.0 + alpha * s)
    gaps[0] = e0
    eps = gaps / c
    eps[0] = 1.0
    return OracleTrace(s=s, eps=eps, z1=instance.z_star[0] + gaps)


def perturb_counterexample(
    instance: CounterexampleInstance, sigma: float, seed: int = 0
) -> RegressionInstance:
    """Gaussian perturbation ``A + sigma R`` with the right-hand side rebuilt.

    ``sigma = 0`` returns the unperturbed matrix bit-for-bit.  The perturbed
    residual-side truth stays exactly the k-sparse spike vector.
    """
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        A = instance.A.copy()
    else:
        rng = np.random.default_rng((seed, 31337))
        A = instance.A + sigma * rng.standard_normal(instance.A.shape)
    b = A @ instance.z_star
    b[spike_positions(instance.k)] += instance.delta
    return RegressionInstance(
        A=A,
        b=b,
        z_star=instance.z_star,
        meta={
            "family": "perturbed_failure",
            "k": instance.k,
            "gamma": instance.gamma,
            "delta": instance.delta,
            "sigma": sigma,
            "seed": seed,
        },
    )


def random_gaussian_instance(
    m: int, N: int, sparsity: int, value_std: float = 1.0, seed: int = 0
) -> CsInstance:
    """Random sensing matrix with a planted sparse solution.

    ``phi`` has i.i.d. standard normal entries; the true solution is
    supported on the first ``sparsity`` coordinates with i.i.d. centered
    normal values of standard deviation ``value_std``; ``y = phi x*``.
    The matrix is drawn before the values, so instances with equal seeds
    and different ``value_std`` share their matrix.
    """
    if not 0 <= sparsity <= m:
        raise ValueError(f"need 0 <= sparsity <= m, got sparsity={sparsity}, m={m}")
    if not m < N:
        raise ValueError(f"need m < N for an underdetermined system, got {m} >= {N}")
    rng = np.random.default_rng((seed, 1618))
    phi = rng.standard_normal((m, N))
    x_star = np.zeros(N)
    x_star[:sparsity] = value_std * rng.standard_normal(sparsity)
    return CsInstance(
        phi=phi,
        y=phi @ x_star,
        x_star=x_star,
        support=np.arange(sparsity),
        meta={
            "m": m,
            "N": N,
            "sparsity": sparsity,
            "value_std": value_std,
            "seed": seed,
        },
    )


@dataclass
class NspReport:
    """Result of the sampling null-space-property check.

    ``gamma_estimate`` is the largest observed ratio
    ``||(Az)_T||_1 / ||(Az)_{T^c}||_1``; the checker can refute the property
    (a witness above gamma) but only gather evidence for it.  ``exhaustive``
    is True when every support of size K was enumerated rather than taking
    the K largest magnitudes per sample.
    """

    order_K: int
    gamma: float
    gamma_estimate: float
    samples: int
    exhaustive: bool
    witness_z: np.ndarray | None = None
    witness_support: np.ndarray | None = None

    @property
    def passes(self) -> bool:
        return self.gamma_estimate <= self.gamma


def _ratio_batch(av: np.ndarray, K: int, enum):
    """Max support ratio per column of |A z|; returns (ratios, supports)."""
    N, B = av.shape
    totals = av.sum(axis=0)
    if enum is None:
        part = np.partition(av, N - K - 1, axis=0) if K < N else av
        tops = part[N - K :].sum(axis=0)
        supports = np.argpartition(av, N - K - 1, axis=0)[N - K :] if K < N else None
    else:
        combs, indicator = enum
        sums = indicator @ av  # (n_combs, B)
        best = sums.argmax(axis=0)
        tops = sums[best, np.arange(B)]
        supports = combs[best].T  # (K, B)
    rest = totals - tops
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rest > 0.0, tops / np.where(rest > 0.0, rest, 1.0), np.inf)
    ratios = np.where(tops == 0.0, 0.0, ratios)
    if supports is None:
        supports = np.tile(np.arange(N)[:, None], (1, B))
    return ratios, supports


def nsp_check(
    matrix,
    K: int,
    gamma: float,
    samples: int = 10_000,
    exhaustive_cap: int = 100_000,
    seed: int = 0,
) -> NspReport:
    """Estimate the order-K null-space constant of the column span of ``matrix``.

    Candidates are the standard basis directions (canonical witnesses for the
    stacked-identity family) plus ``samples`` random unit vectors.  For each
    candidate the support is either enumerated exhaustively (when C(N, K)
    does not exceed ``exhaustive_cap``) or taken as the K largest magnitudes
    of ``A z``, which maximizes the ratio for fixed z.
    """
    A = as_matrix(matrix)
    N, p = A.shape
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= {N}, got K={K}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if samples < 0:
        raise ValueError(f"samples must be >= 0, got {samples}")
    exhaustive = math.comb(N, K) <= exhaustive_cap
    enum = None
    if exhaustive:
        combs = np.array(list(combinations(range(N), K)), dtype=int)
        indicator = np.zeros((combs.shape[0], N))
        indicator[np.arange(combs.shape[0])[:, None], combs] = 1.0
        enum = (combs, indicator)
    rng = np.random.default_rng((seed, 271828))
    best = -1.0
    witness_z = None
    witness_T = None
    done = 0
    chunk = 256
    pending = [np.eye(p)]
    while done < samples:
        take = min(chunk, samples - done)
        Z = rng.standard_normal((p, take))
        Z /= np.linalg.norm(Z, axis=0)
        pending.append(Z)
        done += take
    for Z in pending:
        for lo in range(0, Z.shape[1], chunk):
            block = Z[:, lo : lo + chunk]
            ratios, supports = _ratio_batch(np.abs(A @ block), K, enum)
            j = int(ratios.argmax())
            if ratios[j] > best:
                best = float(ratios[j])
                witness_z = block[:, j].copy()
                witness_T = np.sort(supports[:, j])
    return NspReport(
        order_K=K,
        gamma=gamma,
        gamma_estimate=best,
        samples=samples,
        exhaustive=exhaustive,
        witness_z=witness_z,
        witness_support=witness_T,
    )


__all__ = [
    "FAILURE_FAMILY",
    "nu_critical",
    "build_tilde_A",
    "build_A_gamma",
    "spike_positions",
    "default_z_star",
    "sanitize_z_star",
    "CounterexampleParams",
    "CounterexampleInstance",
    "build_counterexample",
    "OracleTrace",
    "scalar_recursion_oracle",
    "perturb_counterexample",
    "random_gaussian_instance",
    "NspReport",
    "nsp_check",
]
