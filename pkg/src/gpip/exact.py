"""Depth-first branch and bound for small GPIP instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import relax, solve_lp
from .model import BinarySolution, GpipInstance, check_feasible, objective

INTEGRAL_TOL = 1e-9
PRUNE_TOL = 1e-9


@dataclass
class ExactResult:
    solution: BinarySolution
    objective: float
    nodes_explored: int
    proven_optimal: bool

    def to_dict(self) -> dict:
        return {
            "solution": self.solution.to_dict(),
            "objective": self.objective,
            "nodes_explored": self.nodes_explored,
            "proven_optimal": self.proven_optimal,
        }


def solve_exact(instance: GpipInstance, node_cap: int = 100_000) -> ExactResult:
    """Optimal binary solution, or the best found when `node_cap` LPs run out.

    Each node solves the relaxation with some variables fixed through their
    bounds. Branching picks the most fractional variable (lowest index on
    ties) and explores the value-1 child first.
    """
    m = instance.m
    base = relax(instance)
    best = BinarySolution.zeros(m, instance.k)
    best_val = 0.0
    nodes = 0
    stack = [(np.zeros(base.shape[1]), np.ones(base.shape[1]))]
    while stack:
        if nodes >= node_cap:
            return ExactResult(best, best_val, nodes, False)
        lo, hi = stack.pop()
        nodes += 1
        lp = solve_lp(base.with_bounds(lo, hi))
        if not lp.optimal or lp.objective_value <= best_val + PRUNE_TOL:
            continue
        z = lp.values
        frac = np.abs(z - np.round(z))
        if frac.max(initial=0.0) <= INTEGRAL_TOL:
            zi = np.round(z).astype(np.int8)
            cand = BinarySolution(zi[:m], zi[m:])
            val = objective(instance, cand)
            if check_feasible(instance, cand).feasible and val > best_val:
                best, best_val = cand, val
            continue
        # closest to 1/2 wins; argmax keeps the lowest index on ties
        j = int(np.argmax(np.where(frac > INTEGRAL_TOL, -np.abs(z - 0.5), -np.inf)))
        lo0, hi0 = lo.copy(), hi.copy()
        hi0[j] = 0.0
        lo1, hi1 = lo.copy(), hi.copy()
        lo1[j] = 1.0
        stack.append((lo0, hi0))
        stack.append((lo1, hi1))
    return ExactResult(best, best_val, nodes, True)
