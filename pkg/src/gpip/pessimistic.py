"""Pessimistic-estimator rounding: a deterministic replacement for sampling.

The estimator upper-bounds the probability that the scaled Bernoulli rounding
hits any bad event (a violated row, or an objective below its target) given
a prefix of fixed variables. While it stays below 1 some completion avoids
every bad event, so fixing variables one at a time without letting it reach 1
produces a feasible point with a guaranteed objective.

Coupling rows use a decomposition of the event {A_i X > B_i Y}:
P(B_i Y = 0) P(A_i X > 0) + P(B_i Y > 0) E[(1+d)^(A_i X - b_min)].
While y is being rounded, the first factor is replaced by the (larger)
constant max(P(A_i X > 0), E[...]) at the root when `envelope` is on; this
keeps every row term monotone in each y and makes the greedy step provably
safe. Once y is fixed, the literal form is used.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import _pykernels as pk
from .lp import LpSolution, relax, solve_lp
from .model import BinarySolution, GpipInstance, check_feasible, normalize, objective
from .rounding import (
    DEFAULT_BETA,
    DeviationParams,
    RoundingParams,
    ScaledSolution,
    best_of_trials,
    deviation_arrays,
    restricted_b_min,
    scale,
)

EVENT_TOL = pk.EVENT_TOL
FALLBACK_ALPHA = 2.0
FALLBACK_GAMMA = 2.0


class DomainError(ValueError):
    pass


class PreconditionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Prefix:
    """Values of y_1..y_u and x_1..x_j; x may only be fixed once y is complete."""

    fixed_y: tuple = ()
    fixed_x: tuple = ()

    def check(self, m: int, k: int) -> None:
        if len(self.fixed_y) > k or len(self.fixed_x) > m:
            raise ValueError("prefix longer than the variable block")
        if self.fixed_x and len(self.fixed_y) != k:
            raise ValueError("x may only be fixed after every y is fixed")
        for val in (*self.fixed_y, *self.fixed_x):
            if val not in (0, 1):
                raise ValueError("prefix values must be 0 or 1")


@dataclass(frozen=True, eq=False)
class EstimatorBreakdown:
    term_E: np.ndarray
    term_Q: np.ndarray
    term_R: np.ndarray
    term_obj: float
    total: float


# ---------------------------------------------------------------- scalar pieces


def _log_mix(p, z):
    """Elementwise log(1 - p + p e^z)."""
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        return np.logaddexp(np.log1p(-p), np.log(p) + z)


def _factorized_log(coeffs, probs, log_base, threshold, fixed) -> float:
    coeffs = np.asarray(coeffs, dtype=float)
    probs = np.asarray(probs, dtype=float)
    fixed = np.asarray(fixed, dtype=float)
    j = fixed.size
    free_c, free_p = coeffs[j:], probs[j:]
    on = free_c > 0
    return (
        -threshold * log_base
        + log_base * float(coeffs[:j] @ fixed)
        + float(np.sum(_log_mix(free_p[on], free_c[on] * log_base)))
    )


def mgf_upper(coeffs, probs, delta: float, threshold: float, prefix_assignments=()) -> float:
    """E[(1+delta)^(coeffs . Z - threshold)] with the first entries of Z fixed."""
    if delta <= -1.0:
        raise DomainError(f"mgf_upper needs delta > -1, got {delta}")
    return math.exp(_factorized_log(coeffs, probs, math.log1p(delta), threshold, prefix_assignments))


def mgf_lower(coeffs_x, coeffs_y, probs_x, probs_y, delta: float, threshold: float, prefix: Prefix = Prefix()) -> float:
    """E[(1-delta)^(c1 . X + c2 . Y - threshold)] given the prefix."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"mgf_lower needs 0 < delta < 1, got {delta}")
    lb = math.log1p(-delta)
    log_val = (
        _factorized_log(coeffs_x, probs_x, lb, threshold, prefix.fixed_x)
        + _factorized_log(coeffs_y, probs_y, lb, 0.0, prefix.fixed_y)
    )
    return math.exp(log_val)


def zero_prob(coeffs, probs, prefix_assignments=()) -> float:
    """P(coeffs . Z = 0) given the first entries of Z."""
    coeffs = np.asarray(coeffs, dtype=float)
    probs = np.asarray(probs, dtype=float)
    fixed = np.asarray(prefix_assignments, dtype=float)
    j = fixed.size
    if np.any((coeffs[:j] > 0) & (fixed > 0)):
        return 0.0
    return float(np.prod(1.0 - probs[j:][coeffs[j:] > 0]))


# ------------------------------------------------------------ direct estimator


def deviation_from_scaled(instance: GpipInstance, scaled: ScaledSolution, params: RoundingParams) -> DeviationParams:
    """Deviation parameters with z* recovered as alpha c1.x' + gamma c2.y'."""
    zstar = math.fsum(params.alpha * instance.c1 * scaled.x_prime) + math.fsum(
        params.gamma * instance.c2 * scaled.y_prime
    )
    arrs = deviation_arrays(instance, scaled.x_prime, scaled.y_prime, zstar, [params.alpha], params.beta)
    if not arrs["mu_obj"][0] > 0:
        raise DomainError("objective mean is zero")
    return DeviationParams(**{key: (val[0] if key not in ("mu_obj", "delta_obj") else float(val[0])) for key, val in arrs.items()})


def estimator(
    instance: GpipInstance,
    scaled: ScaledSolution,
    params: RoundingParams,
    dev: DeviationParams,
    prefix: Prefix = Prefix(),
    envelope: bool = True,
) -> EstimatorBreakdown:
    """Row-by-row evaluation of the estimator; the reference for the kernels."""
    prefix.check(instance.m, instance.k)
    xp, yp = scaled.x_prime, scaled.y_prime
    fx, fy = np.asarray(prefix.fixed_x, float), np.asarray(prefix.fixed_y, float)
    y_done = fy.size == instance.k
    jx = fx.size

    term_E = np.empty(instance.n)
    for i in range(instance.n):
        a_row, b_row = instance.A[i], instance.B[i]
        if dev.mu0[i] == 0:
            fixed_gap = float(a_row[:jx] @ fx) - (float(b_row @ fy) if y_done else math.inf)
            term_E[i] = 1.0 if fixed_gap > EVENT_TOL else 0.0
            continue
        pa = 1.0 - zero_prob(a_row, xp, fx)
        if not np.isfinite(dev.b_min[i]):
            term_E[i] = min(1.0, pa)
            continue
        if dev.delta0[i] <= 0:
            M = 1.0
        else:
            M = mgf_upper(a_row, xp, dev.delta0[i], dev.b_min[i], fx)
        zb = zero_prob(b_row, yp, fy)
        C = max(pa, M) if (envelope and not y_done) else pa
        term_E[i] = min(1.0, zb * C + (1.0 - zb) * M)

    def packing(M, rhs, probs, mu, delta, fixed):
        out = np.empty(M.shape[0])
        j = fixed.size
        for i in range(M.shape[0]):
            if mu[i] == 0:
                out[i] = 1.0 if float(M[i, :j] @ fixed) > rhs[i] + EVENT_TOL else 0.0
            elif delta[i] <= 0:
                out[i] = 1.0
            else:
                out[i] = min(1.0, mgf_upper(M[i], probs, delta[i], rhs[i], fixed))
        return out

    term_Q = packing(instance.U, instance.u, xp, dev.mu1, dev.delta1, fx)
    term_R = packing(instance.V, instance.v, yp, dev.mu2, dev.delta2, fy)
    term_obj = mgf_lower(instance.c1, instance.c2, xp, yp, dev.delta_obj, dev.obj_threshold, prefix)
    total = 3.0 - float(np.prod(1.0 - term_E)) - float(np.prod(1.0 - term_Q)) - float(np.prod(1.0 - term_R)) + term_obj
    return EstimatorBreakdown(term_E=term_E, term_Q=term_Q, term_R=term_R, term_obj=term_obj, total=total)


# ---------------------------------------------------------- batched root value


def _csr_rows(M):
    indptr, cols, vals = _kernels.compressed(M)
    rows = np.repeat(np.arange(M.shape[0]), np.diff(indptr))
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    return rows, cols, vals, indptr, nonempty


def _row_sums(vals, indptr, nonempty, nrows):
    """Sum the (G, nnz) array within each CSR row."""
    out = np.zeros((vals.shape[0], nrows))
    if nonempty.size:
        out[:, nonempty] = np.add.reduceat(vals, indptr[nonempty], axis=1)
    return out


def _mgf_log_batch(M, probs, L, thr):
    """log E[(e^L)^(M Z - thr)] per point and row; probs (G, c), L (G, r)."""
    rows, cols, vals, indptr, nonempty = _csr_rows(M)
    lm = _log_mix(probs[:, cols], vals[None, :] * L[:, rows])
    return -thr * L + _row_sums(lm, indptr, nonempty, M.shape[0])


def _zero_prob_batch(M, probs):
    rows, cols, vals, indptr, nonempty = _csr_rows(M)
    with np.errstate(divide="ignore"):
        lg = np.log1p(-probs[:, cols])
    return np.exp(_row_sums(lg, indptr, nonempty, M.shape[0]))


def root_values(
    instance: GpipInstance,
    x_hat,
    y_hat,
    alphas,
    gammas,
    beta: float = DEFAULT_BETA,
    envelope: bool = True,
) -> np.ndarray:
    """Estimator at the empty prefix for many (alpha, gamma) at once.

    Points whose objective deviation falls outside (0, 1) get +inf.
    """
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    gammas = np.asarray(gammas, dtype=float).reshape(-1)
    x_hat = np.asarray(x_hat, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    zstar = math.fsum(instance.c1 * x_hat) + math.fsum(instance.c2 * y_hat)
    xp = x_hat[None, :] / alphas[:, None]
    yp = np.minimum(y_hat[None, :] / gammas[:, None], 1.0)
    xp = np.minimum(xp, 1.0)
    dev = deviation_arrays(instance, xp, yp, zstar, alphas, beta)
    out = np.full(alphas.size, np.inf)
    ok = (dev["delta_obj"] > 0) & (dev["delta_obj"] < 1) & (dev["mu_obj"] > 0)
    if not ok.any():
        return out
    xp, yp = xp[ok], yp[ok]
    dev = {key: val[ok] for key, val in dev.items()}

    def packing(M, rhs, probs, mu, delta):
        det = mu == 0
        trivial = ~det & (delta <= 0)
        live = ~det & ~trivial
        L = np.where(live, np.log1p(np.where(live, delta, 0.0)), 0.0)
        h = np.minimum(1.0, np.exp(_mgf_log_batch(M, probs, L, rhs[None, :])))
        h = np.where(trivial, 1.0, h)
        return np.where(det, 0.0, h)

    hq = packing(instance.U, instance.u, xp, dev["mu1"], dev["delta1"])
    hr = packing(instance.V, instance.v, yp, dev["mu2"], dev["delta2"])

    mu0, d0, b_min = dev["mu0"], dev["delta0"], dev["b_min"]
    det = mu0 == 0
    no_b = ~det & ~np.isfinite(b_min)
    trivial = ~det & ~no_b & (d0 <= 0)
    live = ~det & ~no_b & ~trivial
    L = np.where(live, np.log1p(np.where(live, d0, 0.0)), 0.0)
    thr = np.where(live, b_min, 0.0)
    M = np.where(live, np.exp(_mgf_log_batch(instance.A, xp, L, thr)), 1.0)
    pa = 1.0 - _zero_prob_batch(instance.A, xp)
    zb = _zero_prob_batch(instance.B, yp)
    y_done = instance.k == 0
    C = np.maximum(pa, M) if (envelope and not y_done) else pa
    he = np.minimum(1.0, zb * C + (1.0 - zb) * M)
    he = np.where(no_b, np.minimum(1.0, pa), he)
    he = np.where(det, 0.0, he)

    d_obj = dev["delta_obj"]
    lb = np.log1p(-d_obj)
    thr_obj = dev["mu_obj"] * (1.0 - d_obj)
    c = np.concatenate([instance.c1, instance.c2])
    probs = np.concatenate([xp, yp], axis=1)
    on = c > 0
    obj_log = -thr_obj * lb + np.sum(_log_mix(probs[:, on], c[on][None, :] * lb[:, None]), axis=1)
    total = (
        3.0 - np.prod(1.0 - he, axis=1) - np.prod(1.0 - hq, axis=1) - np.prod(1.0 - hr, axis=1) + np.exp(obj_log)
    )
    out[np.flatnonzero(ok)] = total
    return out


# ----------------------------------------------------------------- calibration


@dataclass(frozen=True)
class NoCertificate:
    reason: str = "no parameter point with estimator below 1"
    evaluations: int = 0

    def __bool__(self):
        return False


@dataclass(frozen=True)
class Calibration:
    params: RoundingParams
    root_value: float
    evaluations: int


def grid_upper(instance: GpipInstance) -> float:
    rhs = np.concatenate([instance.u, instance.v])
    rhs = rhs[rhs > 0]
    r_min = float(rhs.min()) if rhs.size else 1.0
    return 10.0 * max(instance.n, instance.d1, instance.d2, 2) ** (1.0 / r_min)


def _axis(lo: float, hi: float, step: float, max_points: int) -> np.ndarray:
    count = int(math.floor(math.log(hi / lo) / math.log(step))) + 1 if hi > lo else 1
    if count <= max_points:
        return lo * step ** np.arange(count)
    return np.geomspace(lo, hi, max_points)


def calibrate(
    instance: GpipInstance,
    lp: LpSolution,
    beta: float = DEFAULT_BETA,
    envelope: bool = True,
    max_points: int = 100,
    refine_steps: int = 40,
    chunk_elems: int = 4_000_000,
) -> Calibration | NoCertificate:
    """Smallest alpha = p * gamma whose root estimator value is below 1.

    Grid over gamma and p from 1.01 in multiplicative steps of 1.05 (at most
    `max_points` per axis), then bisection on gamma at the best p.
    """
    if not lp.optimal:
        raise ValueError("calibrate needs an optimal LP solution")
    x_hat, y_hat = lp.x_hat, lp.y_hat
    zstar = math.fsum(instance.c1 * x_hat) + math.fsum(instance.c2 * y_hat)
    if not zstar > 0:
        return NoCertificate("LP optimum is zero")
    hi = grid_upper(instance)
    gammas = _axis(1.01, hi, 1.05, max_points)
    ps = _axis(1.01, hi, 1.05, max_points)
    # the objective deviation depends on p alone: z* / (beta (c1.x + p c2.y))
    cx = math.fsum(instance.c1 * x_hat)
    cy = math.fsum(instance.c2 * y_hat)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_obj = zstar / (beta * (cx + ps * cy))
    ps = ps[(d_obj > 0) & (d_obj < 1)]
    if ps.size == 0:
        return NoCertificate("objective deviation never lies in (0, 1) on the grid")

    G, P = np.meshgrid(gammas, ps, indexing="ij")
    G, P = G.ravel(), P.ravel()
    A = G * P
    order = np.argsort(A, kind="stable")
    G, P, A = G[order], P[order], A[order]
    per_point = max(1, instance.n * (instance.m + instance.k) + instance.d1 * instance.m + instance.d2 * instance.k)
    chunk = max(1, chunk_elems // per_point)
    evals = 0
    best = None
    # scanning by increasing alpha, the first certified point is the minimum
    for start in range(0, A.size, chunk):
        sl = slice(start, start + chunk)
        vals = root_values(instance, x_hat, y_hat, A[sl], G[sl], beta, envelope)
        evals += vals.size
        hit = np.flatnonzero(vals < 1.0)
        if hit.size:
            j = start + hit[0]
            best = (float(G[j]), float(P[j]), float(vals[hit[0]]))
            break
    if best is None:
        return NoCertificate(evaluations=evals)

    g_hi, p_best, val = best
    below = gammas[gammas < g_hi]
    g_lo = float(below[-1]) if below.size else 1.0
    for _ in range(refine_steps):
        mid = 0.5 * (g_lo + g_hi)
        if mid <= 1.0 or g_hi - g_lo < 1e-9 * g_hi:
            break
        v = root_values(instance, x_hat, y_hat, [mid * p_best], [mid], beta, envelope)[0]
        evals += 1
        if v < 1.0:
            g_hi, val = mid, float(v)
        else:
            g_lo = mid
    params = RoundingParams.from_gamma_p(g_hi, p_best, beta)
    return Calibration(params=params, root_value=val, evaluations=evals)


# -------------------------------------------------------- derandomized rounding


def _packing_state(M, rhs, probs, mu, delta):
    mode = np.where(mu == 0, pk.DET, np.where(delta <= 0, pk.TRIVIAL, pk.CHERNOFF)).astype(np.int64)
    live = mode == pk.CHERNOFF
    L = np.where(live, np.log1p(np.where(live, delta, 0.0)), 0.0)
    log_val = _mgf_log_batch(M, probs[None, :], L[None, :], rhs[None, :])[0]
    state = np.zeros((M.shape[0], 4))
    state[:, pk.PF_LOG] = np.where(live, log_val, 0.0)
    state[:, pk.PF_L] = L
    state[:, pk.PF_RHS] = rhs
    return state, mode


def _sum_log1m(M, probs):
    """Per row: sum of log(1 - p) over support with p < 1, and count of p == 1."""
    rows, cols, vals, indptr, nonempty = _csr_rows(M)
    pc = probs[cols]
    full = pc >= 1.0
    lg = np.where(full, 0.0, np.log1p(-np.where(full, 0.0, pc)))
    logs = _row_sums(lg[None, :], indptr, nonempty, M.shape[0])[0]
    counts = np.bincount(rows[full], minlength=M.shape[0]).astype(np.int64)
    return logs, counts


def _sweep_state(instance: GpipInstance, scaled: ScaledSolution, dev: DeviationParams):
    xp, yp = scaled.x_prime, scaled.y_prime
    n = instance.n
    Ef = np.zeros((n, 7))
    Ei = np.zeros((n, 3), dtype=np.int64)
    det = dev.mu0 == 0
    no_b = ~det & ~np.isfinite(dev.b_min)
    trivial = ~det & ~no_b & (dev.delta0 <= 0)
    live = ~det & ~no_b & ~trivial
    Ei[:, pk.EI_MODE] = np.select([det, no_b, trivial], [pk.DET, pk.NO_B, pk.TRIVIAL], pk.CHERNOFF)
    zb_log, zb_cnt = _sum_log1m(instance.B, yp)
    za_log, za_cnt = _sum_log1m(instance.A, xp)
    Ef[:, pk.EF_ZB], Ei[:, pk.EI_ZB] = zb_log, zb_cnt
    Ef[:, pk.EF_ZA], Ei[:, pk.EI_ZA] = za_log, za_cnt
    la = np.where(live, np.log1p(np.where(live, dev.delta0, 0.0)), 0.0)
    thr = np.where(live, dev.b_min, 0.0)
    ma = _mgf_log_batch(instance.A, xp[None, :], la[None, :], thr[None, :])[0]
    Ef[:, pk.EF_MA] = np.where(live, ma, 0.0)
    Ef[:, pk.EF_LA] = la
    pa = np.where(za_cnt > 0, 1.0, -np.expm1(za_log))
    M = np.where(live, np.exp(Ef[:, pk.EF_MA]), 1.0)
    Ef[:, pk.EF_CENV] = np.where(live | trivial, np.maximum(pa, M), 0.0)

    Qf, Qi = _packing_state(instance.U, instance.u, xp, dev.mu1, dev.delta1)
    Rf, Ri = _packing_state(instance.V, instance.v, yp, dev.mu2, dev.delta2)

    lb = math.log1p(-dev.delta_obj)
    c = np.concatenate([instance.c1, instance.c2])
    probs = np.concatenate([xp, yp])
    on = c > 0
    obj_log = -dev.obj_threshold * lb + float(np.sum(_log_mix(probs[on], c[on] * lb)))
    obj = np.array([obj_log, lb])
    return Ef, Ei, Qf, Qi, Rf, Ri, obj


def derandomized_round(
    instance: GpipInstance,
    scaled: ScaledSolution,
    params: RoundingParams,
    envelope: bool = True,
    return_trace: bool = False,
    backend=None,
):
    """Fix y_1..y_k, then x_1..x_m, each to 1 when the estimator stays below 1.

    Raises PreconditionError when the root value is not below 1. With
    `return_trace`, also returns the estimator value after every fixing.
    """
    if not (params.p > 1.0 and params.gamma > 1.0):
        raise PreconditionError("the estimator needs p > 1 and gamma > 1")
    dev = deviation_from_scaled(instance, scaled, params)
    if not 0.0 < dev.delta_obj < 1.0:
        raise DomainError(f"objective deviation {dev.delta_obj} outside (0, 1)")
    root = estimator(instance, scaled, params, dev, Prefix(), envelope).total
    if not root < 1.0:
        raise PreconditionError(f"root estimator value {root} is not below 1")
    kern = backend if backend is not None else _kernels.backend
    views = _kernels.sparse_views(instance)
    Ef, Ei, Qf, Qi, Rf, Ri, obj = _sweep_state(instance, scaled, dev)
    x = np.zeros(instance.m, dtype=np.int8)
    y = np.zeros(instance.k, dtype=np.int8)
    trace = np.zeros(instance.m + instance.k)
    kern.derandomize_sweep(
        np.ascontiguousarray(scaled.y_prime, dtype=float), np.ascontiguousarray(scaled.x_prime, dtype=float),
        *views.B_csc, *views.V_csc, *views.A_csc, *views.U_csc,
        np.ascontiguousarray(instance.c1), np.ascontiguousarray(instance.c2),
        Ef, Ei, Qf, Qi, Rf, Ri, obj,
        bool(envelope), y, x, trace,
    )
    sol = BinarySolution(x, y)
    final = estimator(
        instance, scaled, params, dev, Prefix(tuple(int(v) for v in y), tuple(int(v) for v in x)), envelope
    ).total
    if not final < 1.0:
        raise PreconditionError(f"rounding ended with estimator {final}, not below 1")
    if return_trace:
        return sol, np.concatenate([[root], trace])
    return sol


# ---------------------------------------------------------------------- solve


@dataclass
class SolveResult:
    solution: BinarySolution
    objective: float
    lp_bound: float
    gap: float
    gap_flag: bool
    method: str
    alpha: float
    gamma: float
    beta: float
    wall_ms: float
    root_value: float | None = None
    normalized_objective: float = 0.0
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "solution": self.solution.to_dict(),
            "objective": self.objective,
            "lp_bound": self.lp_bound,
            "gap": self.gap,
            "gap_flag": self.gap_flag,
            "method": self.method,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "beta": self.beta,
            "wall_ms": self.wall_ms,
            "root_value": self.root_value,
            "timings": self.timings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def relative_gap(value: float, bound: float) -> tuple[float, bool]:
    """1 - value/bound; (0, True) when the bound is zero."""
    if bound <= 0:
        return 0.0, True
    return 1.0 - value / bound, False


class NoCertificateError(RuntimeError):
    pass


def certify(instance: GpipInstance, lp: LpSolution, params: RoundingParams, envelope: bool = True):
    """Calibration for fixed parameters, or NoCertificate."""
    if not params.in_analysis_regime:
        return NoCertificate("parameters outside p > 1, gamma > 1")
    try:
        sc = scale(lp, params)
        root = estimator(instance, sc, params, deviation_from_scaled(instance, sc, params), Prefix(), envelope).total
    except DomainError as exc:
        return NoCertificate(str(exc), 1)
    if not root < 1.0:
        return NoCertificate(f"root estimator value {root:.6g} is not below 1", 1)
    return Calibration(params=params, root_value=root, evaluations=1)


def solve(
    raw: GpipInstance,
    trials: int = 100,
    seed: int = 0,
    envelope: bool = True,
    method: str = "auto",
    params: RoundingParams | None = None,
    fallback: bool = True,
) -> SolveResult:
    """normalize, relax, solve the LP, then round.

    method "auto" derandomizes when a certificate exists (calibrated, or for
    the given `params`) and otherwise falls back to best-of-trials sampling
    with `params`, or alpha = gamma = 2 when none are given. With `fallback`
    off it raises NoCertificateError instead. "randomized" always samples.
    """
    if method not in ("auto", "randomized"):
        raise ValueError(f"unknown method {method!r}")
    t0 = time.perf_counter()
    inst, record = normalize(raw)
    lp = solve_lp(relax(inst))
    t_lp = time.perf_counter()
    if method == "randomized":
        cal = NoCertificate("sampling requested")
    elif params is not None:
        cal = certify(inst, lp, params, envelope)
    else:
        cal = calibrate(inst, lp, envelope=envelope)
    if cal:
        used = cal.params
        sol = derandomized_round(inst, scale(lp, used), used, envelope=envelope)
        tag, root = "derandomized", cal.root_value
    else:
        if method == "auto" and not fallback:
            raise NoCertificateError(cal.reason)
        if params is not None:
            used = params
        else:
            used = RoundingParams.from_alpha_gamma(FALLBACK_ALPHA, FALLBACK_GAMMA)
        sol = best_of_trials(inst, scale(lp, used), used, trials, seed)
        tag, root = "best_of_trials", None
    t_end = time.perf_counter()
    if not check_feasible(inst, sol).feasible:
        raise RuntimeError("rounded solution is infeasible")
    norm_obj = objective(inst, sol)
    raw_sol = record.lift(sol)
    raw_obj = objective(raw, raw_sol)
    bound = record.raw_objective(lp.objective_value)
    gap, flag = relative_gap(raw_obj, bound)
    return SolveResult(
        solution=raw_sol,
        objective=raw_obj,
        lp_bound=bound,
        gap=gap,
        gap_flag=flag,
        method=tag,
        alpha=used.alpha,
        gamma=used.gamma,
        beta=used.beta,
        wall_ms=1000.0 * (t_end - t0),
        root_value=root,
        normalized_objective=norm_obj,
        timings={"lp_ms": 1000.0 * (t_lp - t0), "round_ms": 1000.0 * (t_end - t_lp)},
    )
