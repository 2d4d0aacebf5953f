"""LP relaxation of a GPIP instance and a dense bounded-variable simplex solver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import GpipInstance

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
# consecutive degenerate pivots before switching from Dantzig pricing to Bland's rule
DEGENERATE_SWITCH = 30


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """max objective.z  s.t.  constraint_matrix z <= rhs,  lower <= z <= upper.

    The first `n_x` variables are the GPIP x block, the rest the y block.
    """

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_x: int | None = None
    row_labels: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        h = np.asarray(self.rhs, dtype=float).reshape(-1)
        G = np.asarray(self.constraint_matrix, dtype=float)
        G = G.reshape(h.size, c.size) if G.size == 0 else G.reshape(-1, c.size)
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), c.shape).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), c.shape).copy()
        if G.shape[0] != h.size:
            raise ValueError("constraint_matrix and rhs disagree on the number of rows")
        if np.any(lo > hi):
            raise ValueError("lower bound above upper bound")
        if not np.all(np.isfinite(hi)):
            raise ValueError("all variables must be boxed")
        for name, arr in (("objective", c), ("constraint_matrix", G), ("rhs", h), ("lower", lo), ("upper", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.n_x is None:
            object.__setattr__(self, "n_x", c.size)

    @property
    def variable_bounds(self) -> list[tuple[float, float]]:
        return list(zip(self.lower.tolist(), self.upper.tolist()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.constraint_matrix.shape

    def with_bounds(self, lower, upper) -> "LinearProgram":
        return LinearProgram(
            self.objective, self.constraint_matrix, self.rhs, lower, upper, self.n_x, self.row_labels
        )

    def to_text(self) -> str:
        """Plain-text dump in a loose MPS-like layout, for cross-checking elsewhere."""
        rows, cols = self.shape
        out = [f"NAME gpip_relaxation ROWS {rows} COLS {cols}", "OBJSENSE MAX", "ROWS"]
        for i in range(rows):
            label = self.row_labels[i] if i < len(self.row_labels) else f"R{i}"
            out.append(f" L {label}")
        out.append("COLUMNS")
        for j in range(cols):
            name = f"x{j}" if j < self.n_x else f"y{j - self.n_x}"
            if self.objective[j] != 0:
                out.append(f" {name} OBJ {self.objective[j]!r}")
            for i in np.nonzero(self.constraint_matrix[:, j])[0]:
                label = self.row_labels[i] if i < len(self.row_labels) else f"R{i}"
                out.append(f" {name} {label} {self.constraint_matrix[i, j]!r}")
        out.append("RHS")
        for i in range(rows):
            label = self.row_labels[i] if i < len(self.row_labels) else f"R{i}"
            out.append(f" RHS {label} {self.rhs[i]!r}")
        out.append("BOUNDS")
        for j in range(cols):
            name = f"x{j}" if j < self.n_x else f"y{j - self.n_x}"
            out.append(f" LO BND {name} {self.lower[j]!r}")
            out.append(f" UP BND {name} {self.upper[j]!r}")
        out.append("ENDATA")
        return "\n".join(out) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


@dataclass
class LpSolution:
    x_hat: np.ndarray
    y_hat: np.ndarray
    objective_value: float
    status: str
    iterations: int = 0
    values: np.ndarray = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def relax(instance: GpipInstance) -> LinearProgram:
    """Drop integrality; keep every variable in [0, 1]."""
    n, m, k, d1, d2 = instance.dims
    G = np.zeros((n + d1 + d2, m + k))
    G[:n, :m] = instance.A
    G[:n, m:] = -instance.B
    G[n : n + d1, :m] = instance.U
    G[n + d1 :, m:] = instance.V
    h = np.concatenate([np.zeros(n), instance.u, instance.v])
    labels = tuple([f"AB{i}" for i in range(n)] + [f"U{i}" for i in range(d1)] + [f"V{i}" for i in range(d2)])
    return LinearProgram(
        objective=np.concatenate([instance.c1, instance.c2]),
        constraint_matrix=G,
        rhs=h,
        lower=np.zeros(m + k),
        upper=np.ones(m + k),
        n_x=m,
        row_labels=labels,
    )


def _group_identical_columns(c, G, up):
    """Map each column to a representative of its group of identical columns."""
    key = np.ascontiguousarray(np.vstack([c[None, :], G]).T + 0.0)
    index: dict[bytes, int] = {}
    groups = np.empty(c.size, dtype=np.int64)
    reps = []
    for j in range(c.size):
        g = index.setdefault(key[j].tobytes(), len(reps))
        if g == len(reps):
            reps.append(j)
        groups[j] = g
    reps = np.asarray(reps, dtype=np.int64)
    caps = np.bincount(groups, weights=up, minlength=reps.size)
    return groups, reps, caps


def solve_lp(lp: LinearProgram, pricing: str = "dantzig", aggregate: bool = True, max_iter: int | None = None) -> LpSolution:
    """Solve the LP with a dense tableau simplex.

    pricing: "dantzig" (largest reduced cost, falling back to Bland's rule after a
    run of degenerate pivots) or "bland" (lowest eligible index throughout).
    aggregate: merge identical columns into one bounded column before solving;
    the optimum is split back greedily in column order, which keeps it a vertex.
    """
    if pricing not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {pricing!r}")
    c = lp.objective
    G = lp.constraint_matrix
    lo, up = lp.lower, lp.upper
    h = lp.rhs - G @ lo
    width = up - lo
    n_vars = c.size

    if aggregate and n_vars > 1:
        groups, reps, caps = _group_identical_columns(c, G, width)
        if reps.size < n_vars:
            shifted, status, iters = _simplex(c[reps], G[:, reps], h, caps, pricing, max_iter)
            z = np.zeros(n_vars)
            if shifted is not None:
                remaining = shifted.copy()
                for j in range(n_vars):
                    g = groups[j]
                    take = min(width[j], remaining[g])
                    if take > 1e-12:
                        z[j] = take
                        remaining[g] -= take
            return _finish(lp, z + lo, status, iters, shifted is None)

    shifted, status, iters = _simplex(c, G, h, width, pricing, max_iter)
    z = None if shifted is None else shifted + lo
    return _finish(lp, z, status, iters, shifted is None)


def _finish(lp, z, status, iters, infeasible) -> LpSolution:
    if infeasible:
        nx = lp.n_x
        return LpSolution(
            x_hat=np.full(nx, np.nan),
            y_hat=np.full(lp.objective.size - nx, np.nan),
            objective_value=-math.inf,
            status="infeasible",
            iterations=iters,
        )
    z = np.clip(z, lp.lower, lp.upper)
    # snap round-off residue onto the bounds
    z = np.where(np.abs(z - lp.lower) < 1e-12, lp.lower, z)
    z = np.where(np.abs(z - lp.upper) < 1e-12, lp.upper, z)
    value = math.fsum(lp.objective * z)
    return LpSolution(
        x_hat=z[: lp.n_x].copy(),
        y_hat=z[lp.n_x :].copy(),
        objective_value=value,
        status=status,
        iterations=iters,
        values=z,
    )


def _simplex(c, G, h, ub, pricing, max_iter):
    """max c.x  s.t.  G x <= h, 0 <= x <= ub.  Returns (x, status, iterations).

    x is None when the LP is infeasible.
    """
    rows, nv = G.shape
    neg = h < 0
    n_art = int(neg.sum())
    n_tot = nv + rows + n_art
    T = np.zeros((rows, n_tot))
    T[:, :nv] = G
    T[np.arange(rows), nv + np.arange(rows)] = 1.0
    beta = h.astype(float).copy()
    basis = nv + np.arange(rows)
    if n_art:
        neg_rows = np.nonzero(neg)[0]
        T[neg_rows] *= -1.0
        beta[neg_rows] *= -1.0
        art_cols = nv + rows + np.arange(n_art)
        T[neg_rows, art_cols] = 1.0
        basis[neg_rows] = art_cols
    upper = np.concatenate([ub.astype(float), np.full(rows + n_art, np.inf)])
    at_upper = np.zeros(n_tot, dtype=bool)
    is_basic = np.zeros(n_tot, dtype=bool)
    is_basic[basis] = True
    if max_iter is None:
        max_iter = 50 * (rows + n_tot) + 1000

    total_iters = 0
    if n_art:
        cost1 = np.zeros(n_tot)
        cost1[nv + rows :] = 1.0
        iters = _run(T, beta, basis, is_basic, at_upper, upper, cost1, pricing, max_iter)
        total_iters += iters
        infeas = math.fsum(beta[basis >= nv + rows])
        if infeas > 1e-9 * max(1.0, float(np.abs(h).max(initial=0.0))):
            return None, "infeasible", total_iters
        # artificials are pinned to zero for phase 2
        upper[nv + rows :] = 0.0
        at_upper[nv + rows :] = False

    cost2 = np.zeros(n_tot)
    cost2[:nv] = -c
    iters = _run(T, beta, basis, is_basic, at_upper, upper, cost2, pricing, max_iter - total_iters)
    total_iters += iters

    x = np.where(at_upper, upper, 0.0)
    x[~np.isfinite(x)] = 0.0
    x[basis] = beta
    x = _refine(G, h, ub, x, basis, at_upper, nv, rows)
    return np.clip(x[:nv], 0.0, ub), "optimal", total_iters


def _refine(G, h, ub, x, basis, at_upper, nv, rows):
    """Recompute basic values from the original data to shed accumulated drift."""
    full = np.hstack([G, np.eye(rows)])
    nb = np.ones(nv + rows, dtype=bool)
    b_idx = basis[basis < nv + rows]
    if b_idx.size != rows:
        return x
    nb[b_idx] = False
    xn = x[: nv + rows].copy()
    xn[b_idx] = 0.0
    try:
        xb = np.linalg.solve(full[:, b_idx], h - full[:, nb] @ xn[nb])
    except np.linalg.LinAlgError:
        return x
    if np.max(np.abs(xb - x[b_idx]), initial=0.0) > 1e-6:
        return x
    x = x.copy()
    x[b_idx] = xb
    return x


def _run(T, beta, basis, is_basic, at_upper, upper, cost, pricing, max_iter):
    rows = T.shape[0]
    d = cost - cost[basis] @ T
    degenerate_run = 0
    use_bland = pricing == "bland"
    for it in range(max_iter):
        movable = ~is_basic & (upper > 0)
        eligible = movable & np.where(at_upper, d > COST_TOL, d < -COST_TOL)
        cand = np.flatnonzero(eligible)
        if cand.size == 0:
            return it
        if use_bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        s = -1.0 if at_upper[j] else 1.0
        col = T[:, j]
        a = s * col

        # ratio test: basics decreasing hit 0, increasing hit their upper bound
        ub_b = upper[basis]
        ratios = np.full(rows, np.inf)
        dec = a > PIVOT_TOL
        ratios[dec] = np.maximum(beta[dec], 0.0) / a[dec]
        inc = (a < -PIVOT_TOL) & np.isfinite(ub_b)
        ratios[inc] = np.maximum(ub_b[inc] - beta[inc], 0.0) / (-a[inc])
        theta_row = ratios.min(initial=np.inf)
        theta = min(theta_row, upper[j])
        if not np.isfinite(theta):
            raise RuntimeError("LP is unbounded; all structural variables must be boxed")

        if upper[j] <= theta_row:
            beta -= theta * a
            at_upper[j] = not at_upper[j]
            degenerate_run = 0
            continue

        ties = np.flatnonzero(ratios <= theta_row + 1e-12)
        if use_bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(a[ties]))])

        if theta <= 1e-12:
            degenerate_run += 1
            if pricing == "dantzig" and degenerate_run >= DEGENERATE_SWITCH:
                use_bland = True
        else:
            degenerate_run = 0
            use_bland = pricing == "bland"

        leaving = basis[r]
        leaves_at_upper = a[r] < 0
        beta -= theta * a
        entering_value = theta if s > 0 else upper[j] - theta

        piv = T[r, j]
        prow = T[r] / piv
        nz = np.flatnonzero(col)
        factors = col[nz]
        T[nz] -= np.outer(factors, prow)
        T[r] = prow
        d -= d[j] * prow
        d[j] = 0.0

        basis[r] = j
        is_basic[j] = True
        is_basic[leaving] = False
        at_upper[j] = False
        at_upper[leaving] = bool(leaves_at_upper)
        beta[r] = entering_value
        np.clip(beta, 0.0, None, out=beta)
    raise RuntimeError(f"simplex did not converge in {max_iter} iterations")
