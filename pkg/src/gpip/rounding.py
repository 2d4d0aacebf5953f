"""Scale-and-sample rounding of an LP optimum and the tail bounds behind it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lp import LpSolution
from .model import BinarySolution, GpipInstance, is_feasible, objective

#: the beta used for the union-of-events regime
DEFAULT_BETA = 1.0 - math.sqrt(2.0) / math.sqrt(3.0)


@dataclass(frozen=True)
class RoundingParams:
    """Scaling constants: x is divided by alpha, y by gamma, alpha = p * gamma.

    The analysis needs p > 1 and gamma > 1 (see `in_analysis_regime`); plain
    sampling only needs alpha, gamma >= 1 so that x/alpha is a probability.
    """

    alpha: float
    gamma: float
    p: float
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not (self.alpha >= 1.0 and self.gamma >= 1.0 and self.p >= 1.0):
            raise ValueError(f"need alpha, gamma, p >= 1, got {self.alpha}, {self.gamma}, {self.p}")
        if abs(self.p * self.gamma - self.alpha) > 1e-12 * max(1.0, self.alpha):
            raise ValueError("alpha must equal p * gamma")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")

    @classmethod
    def from_alpha_gamma(cls, alpha: float, gamma: float, beta: float = DEFAULT_BETA) -> "RoundingParams":
        return cls(alpha=float(alpha), gamma=float(gamma), p=float(alpha) / float(gamma), beta=beta)

    @classmethod
    def from_gamma_p(cls, gamma: float, p: float, beta: float = DEFAULT_BETA) -> "RoundingParams":
        return cls(alpha=float(p) * float(gamma), gamma=float(gamma), p=float(p), beta=beta)

    @property
    def in_analysis_regime(self) -> bool:
        return self.p > 1.0 and self.gamma > 1.0 and self.alpha > self.gamma


@dataclass(frozen=True, eq=False)
class ScaledSolution:
    x_prime: np.ndarray
    y_prime: np.ndarray


def scale(lp: LpSolution, params: RoundingParams) -> ScaledSolution:
    if not lp.optimal:
        raise ValueError("cannot scale a non-optimal LP solution")
    return ScaledSolution(np.asarray(lp.x_hat, float) / params.alpha, np.asarray(lp.y_hat, float) / params.gamma)


def sample_round(scaled: ScaledSolution, seed: int) -> BinarySolution:
    """Independent Bernoulli draws; one Philox stream, x in index order then y."""
    m = scaled.x_prime.size
    draws = np.random.Generator(np.random.Philox(seed)).random(m + scaled.y_prime.size)
    return BinarySolution(draws[:m] < scaled.x_prime, draws[m:] < scaled.y_prime)


def sample_many(scaled: ScaledSolution, seed: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """`count` independent draws as boolean matrices (count x m), (count x k)."""
    m, k = scaled.x_prime.size, scaled.y_prime.size
    draws = np.random.Generator(np.random.Philox(seed)).random((count, m + k))
    return draws[:, :m] < scaled.x_prime, draws[:, m:] < scaled.y_prime


def chernoff_G(mu: float, delta: float) -> float:
    """(e^delta / (1+delta)^(1+delta))^mu, evaluated in log space."""
    if delta <= -1.0:
        raise ValueError(f"chernoff_G needs delta > -1, got {delta}")
    if mu == 0.0:
        return 1.0
    return math.exp(mu * (delta - (1.0 + delta) * math.log1p(delta)))


def chebyshev_H(mu: float, delta: float) -> float:
    return math.exp(-mu * delta * delta / 2.0)


@dataclass(frozen=True, eq=False)
class DeviationParams:
    """Means and relative deviations of every constraint row and the objective.

    Rows whose mean is zero have every supporting variable at probability 0;
    their delta is +inf and the row is treated as deterministic downstream.
    """

    mu0: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    mu_obj: float
    delta0: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    delta_obj: float
    b_min: np.ndarray

    @property
    def obj_threshold(self) -> float:
        """mu_obj * (1 - delta_obj): the objective level the rounding must reach."""
        return self.mu_obj * (1.0 - self.delta_obj)


def _ratio_minus_one(top, mean):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(mean > 0, top / np.where(mean > 0, mean, 1.0) - 1.0, np.inf)
    return np.where(np.isinf(top) & (mean > 0), np.inf, out)


def restricted_b_min(B: np.ndarray, yp: np.ndarray) -> np.ndarray:
    """Per row of B, the smallest coefficient among y's with positive probability.

    yp may be (k,) or (G, k); the result is (n,) or (G, n). +inf for empty rows.
    """
    mask = (B > 0) & (np.asarray(yp)[..., None, :] > 0)
    return np.where(mask, B, np.inf).min(axis=-1, initial=np.inf)


def deviation_arrays(instance: GpipInstance, xp, yp, zstar: float, alpha, beta: float) -> dict:
    """Batched deviation parameters; xp is (G, m), yp is (G, k), alpha is (G,)."""
    xp = np.atleast_2d(xp)
    yp = np.atleast_2d(yp)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    mu0 = xp @ instance.A.T
    mu1 = xp @ instance.U.T
    mu2 = yp @ instance.V.T
    mu_obj = xp @ instance.c1 + yp @ instance.c2
    b_min = restricted_b_min(instance.B, yp)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta_obj = np.where(mu_obj > 0, zstar / (alpha * beta * np.where(mu_obj > 0, mu_obj, 1.0)), np.inf)
    return {
        "mu0": mu0,
        "mu1": mu1,
        "mu2": mu2,
        "mu_obj": mu_obj,
        "delta0": _ratio_minus_one(b_min, mu0),
        "delta1": _ratio_minus_one(instance.u[None, :], mu1),
        "delta2": _ratio_minus_one(instance.v[None, :], mu2),
        "delta_obj": delta_obj,
        "b_min": b_min,
    }


def deviation_params(
    instance: GpipInstance, scaled: ScaledSolution, lp: LpSolution, params: RoundingParams
) -> DeviationParams:
    zstar = math.fsum(instance.c1 * lp.x_hat) + math.fsum(instance.c2 * lp.y_hat)
    arrs = deviation_arrays(instance, scaled.x_prime, scaled.y_prime, zstar, [params.alpha], params.beta)
    if not arrs["mu_obj"][0] > 0:
        raise ValueError("objective mean is zero: nothing to round towards")
    return DeviationParams(
        mu0=arrs["mu0"][0],
        mu1=arrs["mu1"][0],
        mu2=arrs["mu2"][0],
        mu_obj=float(arrs["mu_obj"][0]),
        delta0=arrs["delta0"][0],
        delta1=arrs["delta1"][0],
        delta2=arrs["delta2"][0],
        delta_obj=float(arrs["delta_obj"][0]),
        b_min=arrs["b_min"][0],
    )


@dataclass(frozen=True, eq=False)
class EventBounds:
    E: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    obj: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.E, self.Q, self.R, [self.obj]])


def failure_bounds(
    instance: GpipInstance, scaled: ScaledSolution, lp: LpSolution, params: RoundingParams
) -> EventBounds:
    """Single-event probability bounds for the scaled Bernoulli rounding."""
    a, g, b = params.alpha, params.gamma, params.beta
    zstar = math.fsum(instance.c1 * lp.x_hat) + math.fsum(instance.c2 * lp.y_hat)
    Q = np.array([chernoff_G(ui / a, a - 1.0) for ui in instance.u])
    R = np.array([chernoff_G(vi / g, g - 1.0) for vi in instance.v])
    obj = chebyshev_H(zstar / a, 1.0 - 1.0 / b)
    xp, yp = scaled.x_prime, scaled.y_prime
    b_min = restricted_b_min(instance.B, yp)
    E = np.empty(instance.n)
    for i in range(instance.n):
        p_b_zero = float(np.prod(1.0 - yp[instance.B[i] > 0]))
        p_a_pos = 1.0 - float(np.prod(1.0 - xp[instance.A[i] > 0]))
        tail = chernoff_G(b_min[i] / a, a - 1.0) if np.isfinite(b_min[i]) else 0.0
        E[i] = p_b_zero * p_a_pos + (1.0 - p_b_zero) * tail
    return EventBounds(E=E, Q=Q, R=R, obj=obj)


def bad_events(instance: GpipInstance, dev: DeviationParams, X, Y) -> dict[str, np.ndarray]:
    """Indicators of every bad event for samples X (N x m), Y (N x k)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return {
        "E": X @ instance.A.T > Y @ instance.B.T,
        "Q": X @ instance.U.T > instance.u,
        "R": Y @ instance.V.T > instance.v,
        "obj": X @ instance.c1 + Y @ instance.c2 < dev.obj_threshold,
    }


def repair(instance: GpipInstance, sol: BinarySolution) -> BinarySolution:
    """Greedy deletion until feasible.

    Violated V rows are fixed first by dropping the y with the smallest c2;
    then violated coupling or U rows by dropping the x with the smallest c1.
    Ties go to the lowest index. The zero solution is feasible, so this stops.
    """
    views = _kernels.sparse_views(instance)
    x = sol.x.astype(np.int8).copy()
    y = sol.y.astype(np.int8).copy()
    _kernels.backend.greedy_repair(
        x, y,
        views.A_csr, views.A_csc, views.B_csr, views.B_csc,
        views.U_csr, views.U_csc, views.V_csr, views.V_csc,
        np.ascontiguousarray(instance.u), np.ascontiguousarray(instance.v),
        np.ascontiguousarray(instance.c1), np.ascontiguousarray(instance.c2),
        _kernels.REPAIR_TOL,
    )
    return BinarySolution(x, y)


@dataclass(frozen=True)
class TrialStats:
    best: BinarySolution
    best_objective: float
    best_trial: int
    raw_feasible: int
    trials: int


def run_trials(instance: GpipInstance, scaled: ScaledSolution, trials: int, seed: int) -> TrialStats:
    """Sample with seeds seed..seed+trials-1, repair each, keep the best.

    Equal objectives keep the earliest trial. Also counts draws that were
    feasible before repair.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    best, best_val, best_t, raw_ok = None, -math.inf, -1, 0
    for t in range(trials):
        draw = sample_round(scaled, seed + t)
        raw_ok += is_feasible(instance, draw.x, draw.y)
        sol = repair(instance, draw)
        val = objective(instance, sol)
        if val > best_val:
            best, best_val, best_t = sol, val, t
    return TrialStats(best, best_val, best_t, raw_ok, trials)


def best_of_trials(
    instance: GpipInstance, scaled: ScaledSolution, params: RoundingParams | None, trials: int, seed: int
) -> BinarySolution:
    """Best repaired draw among seeds seed, seed+1, ..., seed+trials-1."""
    return run_trials(instance, scaled, trials, seed).best
