"""The two IRLS iterations and their shared trace machinery.

Both algorithms alternate a weighted least-squares solve with the weight
update ``w_i = (x_i^2 + eps^2)^{-1/2}``; they differ only in how the
smoothing parameter ``eps`` is driven down:

* ``ddfg``      : eps <- min(eps, r_{K+1}(x) / N)
* ``modified``  : eps <- min(eps, eta (1 - gamma) sigma_K(x) / N)

where ``r`` is the nonincreasing rearrangement of magnitudes and ``sigma_K``
the tail sum beyond the K largest.  A run stops when eps hits exactly zero
(the iterate is K-sparse), when the step norm drops below ``step_tol``, or
at ``max_iter``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import as_vector
from .problems import FAILURE_FAMILY, CsInstance, RegressionInstance

DDFG = "ddfg"
MODIFIED = "modified"
VARIANTS = (DDFG, MODIFIED)

RUNNING = "Running"
EPS_ZERO = "EpsZero"
STEP_TOL = "StepTol"
MAX_ITER = "MaxIter"


def weights_from_iterate(x, eps: float) -> np.ndarray:
    """IRLS weights ``((x_i)^2 + eps^2)^{-1/2}``; requires eps > 0."""
    v = as_vector(x)
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return 1.0 / np.hypot(v, eps)


def eps_update_ddfg(eps: float, x_next, K: int, N: int) -> float:
    """Original schedule: ``min(eps, r_{K+1}(x_next) / N)``."""
    v = as_vector(x_next)
    if K + 1 > N:
        raise ValueError(f"ddfg update needs K+1 <= N, got K={K}, N={N}")
    r_k1 = float(np.partition(np.abs(v), N - K - 1)[N - K - 1])
    return min(eps, r_k1 / N)


def eps_update_modified(
    eps: float, x_next, K: int, N: int, gamma: float, eta: float
) -> float:
    """Modified schedule: ``min(eps, eta (1-gamma) sigma_K(x_next) / N)``.

    Returns exactly zero iff eps is zero or ``x_next`` is K-sparse.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if K > N:
        raise ValueError(f"modified update needs K <= N, got K={K}, N={N}")
    return min(eps, eta * (1.0 - gamma) * linalg.sigma_tail(x_next, K) / N)


@dataclass(frozen=True)
class IrlsConfig:
    """Solver configuration.

    ``K`` defaults to ``floor(N/2)`` at run time (the recommended a-priori
    choice when the null-space order is unknown).  ``eta`` only enters the
    modified schedule.  ``seed`` is carried for callers that derive random
    initializations; the solver itself is deterministic.  ``store_every``
    keeps every m-th iterate vector in the trace; set it above 1 (or to 0,
    storing none) to bound memory on very long runs.  The final iterate is
    always kept when storage is on.
    """

    variant: str = MODIFIED
    K: int | None = None
    gamma: float = 0.9
    eta: float = 0.9
    eps0: float = 1.0
    max_iter: int = 100_000
    step_tol: float = 1e-10
    seed: int = 0
    store_every: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.K is not None and self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if not self.eps0 > 0.0:
            raise ValueError(f"eps0 must be positive, got {self.eps0}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.step_tol < 0.0:
            raise ValueError(f"step_tol must be >= 0, got {self.step_tol}")
        if self.store_every < 0:
            raise ValueError(f"store_every must be >= 0, got {self.store_every}")

    @classmethod
    def from_eta_product(cls, eta_times_one_minus_gamma: float, gamma: float = 0.9, **kw):
        """Build a config from the single product ``eta * (1 - gamma)``.

        Only the product enters the modified update, so callers who know it
        need not split it; ``gamma`` is still required for NSP bookkeeping.
        """
        p = eta_times_one_minus_gamma
        if not 0.0 < p < 1.0 - gamma:
            raise ValueError(
                f"eta*(1-gamma)={p} must lie in (0, 1-gamma)=(0, {1.0 - gamma})"
            )
        return cls(gamma=gamma, eta=p / (1.0 - gamma), **kw)

    def resolve_K(self, N: int) -> int:
        K = self.K if self.K is not None else N // 2
        if K < 1:
            raise ValueError(f"resolved K={K} must be >= 1")
        if self.variant == DDFG and K + 1 > N:
            raise ValueError(f"ddfg schedule needs K+1 <= N, got K={K}, N={N}")
        if K > N:
            raise ValueError(f"K={K} exceeds dimension N={N}")
        return K


@dataclass
class IterationTrace:
    """Per-iteration scalars of one run, plus optionally stored iterates.

    Row ``i`` describes iterate ``n[i]``: its smoothing parameter, smoothed
    objective, distances to ground truth (NaN when no truth was supplied),
    the weighted step ``||x^{n+1} - x^n||_{w^n}`` leaving it (NaN on the last
    row), and the failure ratio ``s`` when the instance tracks it.
    """

    n: np.ndarray
    eps: np.ndarray
    J: np.ndarray
    err1: np.ndarray
    err2: np.ndarray
    step_w: np.ndarray
    status: str
    s: np.ndarray | None = None
    iterate_ns: np.ndarray | None = None
    iterates: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return self.n.shape[0]

    def row_status(self, i: int) -> str:
        return self.status if i == len(self) - 1 else RUNNING

    def first_below(self, tol: float) -> int | None:
        """Smallest iteration index with err2 <= tol, or None."""
        hit = np.nonzero(self.err2 <= tol)[0]
        return int(self.n[hit[0]]) if hit.size else None


@dataclass
class IrlsResult:
    x: np.ndarray
    trace: IterationTrace
    status: str
    iterations: int
    z: np.ndarray | None = None


class _TraceBuilder:
    def __init__(self, x_star, store_every: int, ratio_fn=None):
        self.x_star = x_star
        self.store_every = store_every
        self.ratio_fn = ratio_fn
        self.rows = {k: [] for k in ("n", "eps", "J", "err1", "err2", "step_w")}
        self.s = [] if ratio_fn is not None else None
        self.iterate_ns: list[int] = []
        self.iterates: list[np.ndarray] = []

    def add(self, n, eps, J, x, step_w, z=None, final=False):
        r = self.rows
        r["n"].append(n)
        r["eps"].append(eps)
        r["J"].append(J)
        if self.x_star is not None:
            diff = x - self.x_star
            r["err1"].append(float(np.abs(diff).sum()))
            r["err2"].append(float(np.linalg.norm(diff)))
        else:
            r["err1"].append(math.nan)
            r["err2"].append(math.nan)
        r["step_w"].append(step_w)
        if self.s is not None:
            self.s.append(self.ratio_fn(x if z is None else z))
        if self.store_every and (final or n % self.store_every == 0):
            self.iterate_ns.append(n)
            self.iterates.append(x.copy())

    def finish(self, status: str) -> IterationTrace:
        arrays = {k: np.asarray(v, dtype=float) for k, v in self.rows.items()}
        arrays["n"] = arrays["n"].astype(int)
        return IterationTrace(
            status=status,
            s=None if self.s is None else np.asarray(self.s, dtype=float),
            iterate_ns=np.asarray(self.iterate_ns, dtype=int) if self.iterates else None,
            iterates=self.iterates or None,
            **arrays,
        )


def _eps_stepper(config: IrlsConfig, K: int, N: int):
    if config.variant == DDFG:
        split = N - K - 1
        return lambda eps, ax: min(eps, float(np.partition(ax, split)[split]) / N)
    scale = config.eta * (1.0 - config.gamma) / N
    if K == N:
        return lambda eps, ax: 0.0
    split = N - K - 1
    return lambda eps, ax: min(eps, scale * float(np.partition(ax, split)[: N - K].sum()))


def run_irls_cs(instance: CsInstance, config: IrlsConfig, x0=None) -> IrlsResult:
    """Run one IRLS solve of ``min ||x||_1 s.t. phi x = y`` (smoothed).

    ``x0`` defaults to the minimum-2-norm feasible point (unit weights);
    an explicit ``x0`` need not be feasible, only the solves are.

    Solve errors propagate.  Note that on exactly-recoverable instances the
    smoothing parameter keeps shrinking after convergence, so a very tight
    ``step_tol`` can let the weight matrix degenerate numerically before the
    step criterion fires, ending the run with a
    :class:`~irlslab.linalg.SingularSystemError`; ``step_tol`` around
    ``1e-8`` times the signal scale avoids this.
    """
    phi, y = instance.phi, instance.y
    N = phi.shape[1]
    K = config.resolve_K(N)
    if x0 is None:
        x = linalg._constrained_ls(phi, y, np.ones(N))
    else:
        x = as_vector(x0, "x0").copy()
        if x.shape[0] != N:
            raise ValueError(f"x0 has length {x.shape[0]}, expected {N}")
    update = _eps_stepper(config, K, N)
    tb = _TraceBuilder(instance.x_star, config.store_every)
    eps = float(config.eps0)
    status = MAX_ITER
    n = 0
    for n in range(config.max_iter):
        # termination precedes the next weight computation, so eps > 0 here
        assert eps > 0.0
        d = np.hypot(x, eps)
        x_next = linalg._constrained_ls(phi, y, d)
        diff = x_next - x
        step2 = float(np.linalg.norm(diff))
        tb.add(n, eps, float(d.sum()), x, float(np.sqrt((diff * diff / d).sum())))
        eps = update(eps, np.abs(x_next))
        x = x_next
        if eps == 0.0:
            status = EPS_ZERO
            break
        if step2 <= config.step_tol:
            status = STEP_TOL
            break
    iterations = n + 1
    tb.add(iterations, eps, linalg.smoothed_objective(x, eps), x, math.nan, final=True)
    return IrlsResult(x=x, trace=tb.finish(status), status=status, iterations=iterations)


def _failure_ratio_fn(instance: RegressionInstance):
    """Ratio tracker for failure-family instances, None otherwise."""
    meta = instance.meta
    if meta.get("family") != FAILURE_FAMILY:
        return None
    k = int(meta["k"])
    alpha = float(meta["alpha"])
    b1 = float(instance.b[0])
    bk = float(instance.b[k * k])

    def ratio(z):
        num = float(z[0]) - bk
        den = b1 - alpha * float(z[0])
        return num / den if den != 0.0 else math.inf

    return ratio


def run_irls_l1r(instance, config: IrlsConfig, z0=None) -> IrlsResult:
    """Run the l1-regression form of the iteration on ``min ||A z - b||_1``.

    The residual ``x = A z - b`` drives the weights, the eps updates, the
    step criterion and the error columns, so a run corresponds
    iterate-for-iterate with :func:`run_irls_cs` on the matched
    compressed-sensing problem.  Accepts a :class:`RegressionInstance` or
    anything with an ``as_regression()`` view (e.g. the failure-family
    instances).
    """
    if not isinstance(instance, RegressionInstance):
        instance = instance.as_regression()
    A, b = instance.A, instance.b
    N = A.shape[0]
    K = config.resolve_K(N)
    if z0 is None:
        z0 = instance.z0
    if z0 is None:
        z = linalg._regression_ls(A, b, np.ones(N))
    else:
        z = as_vector(z0, "z0").copy()
        if z.shape[0] != A.shape[1]:
            raise ValueError(f"z0 has length {z.shape[0]}, expected {A.shape[1]}")
    update = _eps_stepper(config, K, N)
    tb = _TraceBuilder(instance.x_star, config.store_every, _failure_ratio_fn(instance))
    eps = float(config.eps0)
    r = A @ z - b
    status = MAX_ITER
    n = 0
    for n in range(config.max_iter):
        assert eps > 0.0
        d = np.hypot(r, eps)
        z_next = linalg._regression_ls(A, b, 1.0 / d)
        r_next = A @ z_next - b
        diff = r_next - r
        step2 = float(np.linalg.norm(diff))
        tb.add(n, eps, float(d.sum()), r, float(np.sqrt((diff * diff / d).sum())), z=z)
        eps = update(eps, np.abs(r_next))
        z, r = z_next, r_next
        if eps == 0.0:
            status = EPS_ZERO
            break
        if step2 <= config.step_tol:
            status = STEP_TOL
            break
    iterations = n + 1
    tb.add(iterations, eps, linalg.smoothed_objective(r, eps), r, math.nan, z=z, final=True)
    return IrlsResult(
        x=r, trace=tb.finish(status), status=status, iterations=iterations, z=z
    )


def local_rate_constant(gamma: float, eta: float, rho: float) -> float:
    """Contraction constant ``mu = gamma (1 + eta (1 - gamma)) / (1 - rho)``."""
    bound = 1.0 - gamma * (1.0 + eta * (1.0 - gamma))
    if bound <= 0.0:
        raise ValueError(
            f"no admissible rho: gamma(1+eta(1-gamma)) = {1.0 - bound} >= 1"
        )
    if not 0.0 < rho < bound:
        raise ValueError(f"rho={rho} must lie in (0, {bound})")
    return gamma * (1.0 + eta * (1.0 - gamma)) / (1.0 - rho)


@dataclass
class LinearRateReport:
    """Outcome of checking the local linear contraction along a trace."""

    entered: bool
    n0: int | None
    mu: float
    threshold: float
    holds: bool
    violations: list[int] = field(default_factory=list)
    max_ratio: float = 0.0
    floor: float = 1e-12

    @property
    def message(self) -> str:
        if not self.entered:
            return "not entered local regime"
        state = "holds" if self.holds else f"violated at n in {self.violations}"
        return (
            f"local regime entered at n0={self.n0}; contraction mu={self.mu:.6f} "
            f"{state} (max per-step ratio {self.max_ratio:.6f})"
        )


def linear_rate_certificate(
    trace: IterationTrace,
    x_star,
    support,
    gamma: float,
    eta: float,
    rho: float,
    floor: float = 1e-12,
) -> LinearRateReport:
    """Check the local linear-rate contraction on the off-support l1 error.

    Locates the first recorded iterate ``n0`` whose off-support error
    ``||(x^n - x*)_{T^c}||_1`` is at most ``rho * min_{i in T} |x*_i|`` and
    verifies ``e_{n+1} <= mu e_n`` for every later recorded pair, where
    ``mu = gamma (1 + eta (1-gamma)) / (1 - rho)``.  Errors at or below
    ``floor`` are treated as solver precision and never count as violations.
    Requires the trace to carry stored iterates (``store_every=1`` checks
    every consecutive pair; coarser storage checks ``mu**gap``).
    """
    mu = local_rate_constant(gamma, eta, rho)
    xs = as_vector(x_star, "x_star")
    T = np.asarray(support, dtype=int)
    if T.size == 0:
        raise ValueError("support must be nonempty")
    if trace.iterates is None:
        raise ValueError("trace has no stored iterates; rerun with store_every=1")
    off = np.ones(xs.shape[0], dtype=bool)
    off[T] = False
    errs = np.array([np.abs((x - xs)[off]).sum() for x in trace.iterates])
    threshold = rho * float(np.min(np.abs(xs[T])))
    hit = np.nonzero(errs <= threshold)[0]
    if hit.size == 0:
        return LinearRateReport(False, None, mu, threshold, False, floor=floor)
    i0 = int(hit[0])
    ns = trace.iterate_ns
    violations: list[int] = []
    max_ratio = 0.0
    for i in range(i0, len(errs) - 1):
        gap = int(ns[i + 1] - ns[i])
        e_now, e_next = errs[i], errs[i + 1]
        if e_next <= floor:
            continue
        if e_now <= 0.0 or e_next > (mu**gap) * e_now:
            violations.append(int(ns[i + 1]))
            continue
        max_ratio = max(max_ratio, (e_next / e_now) ** (1.0 / gap))
    return LinearRateReport(
        True,
        int(ns[i0]),
        mu,
        threshold,
        not violations,
        violations,
        max_ratio,
        floor,
    )


def describe_defaults() -> dict:
    """Printable defaults of the solver configuration."""
    cfg = IrlsConfig()
    return {
        "variant": cfg.variant,
        "K": "floor(N/2)",
        "gamma": cfg.gamma,
        "eta": cfg.eta,
        "eps0": cfg.eps0,
        "max_iter": cfg.max_iter,
        "step_tol": cfg.step_tol,
        "seed": cfg.seed,
        "store_every": cfg.store_every,
    }


__all__ = [
    "DDFG",
    "MODIFIED",
    "VARIANTS",
    "RUNNING",
    "EPS_ZERO",
    "STEP_TOL",
    "MAX_ITER",
    "IrlsConfig",
    "IterationTrace",
    "IrlsResult",
    "LinearRateReport",
    "weights_from_iterate",
    "eps_update_ddfg",
    "eps_update_modified",
    "run_irls_cs",
    "run_irls_l1r",
    "local_rate_constant",
    "linear_rate_certificate",
    "describe_defaults",
]
