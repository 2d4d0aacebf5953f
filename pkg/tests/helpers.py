"""Instance generators and the acceptance report shared by the tests."""

from __future__ import annotations

import numpy as np

from gpip.model import GpipInstance

# (criterion number, title, passed, detail), filled by test_acceptance
ACCEPTANCE_LINES: list[tuple[int, str, bool, str]] = []


def record(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((number, title, bool(passed), detail))


def format_line(number: int, title: str, passed: bool, detail: str) -> str:
    return f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"


def tiny1() -> GpipInstance:
    return GpipInstance(
        A=[[0.5, 0.5]],
        B=[[1.0]],
        U=[[1.0, 1.0]],
        V=[[1.0]],
        u=[1.0],
        v=[1.0],
        c1=[1.0, 0.5],
        c2=[1.0],
        name="tiny-1",
    )


def random_instance(rng, n, m, k, d1, d2, x_weight=0.2, a_density=0.5, b_density=0.7) -> GpipInstance:
    """Sparse random raw instance; small `x_weight` makes the y block carry the objective."""
    A = rng.random((n, m)) * (rng.random((n, m)) < a_density)
    B = rng.random((n, k)) * (rng.random((n, k)) < b_density)
    U = rng.random((d1, m)) * (rng.random((d1, m)) < 0.5)
    V = rng.random((d2, k)) * (rng.random((d2, k)) < 0.3)
    u = rng.uniform(1.0, 4.0, d1)
    v = rng.uniform(2.0, 6.0, d2)
    c1 = rng.random(m) * x_weight
    c2 = rng.random(k)
    return GpipInstance(A, B, U, V, u, v, c1, c2)


def small_instance(rng, max_vars=12) -> GpipInstance:
    """Random instance with m + k <= max_vars, at least one variable per block."""
    m = int(rng.integers(1, max_vars // 2))
    k = int(rng.integers(1, max_vars - m + 1))
    return random_instance(rng, int(rng.integers(1, 4)), m, k, int(rng.integers(0, 3)), int(rng.integers(0, 3)))


def general_instance(rng, max_vars=8) -> GpipInstance:
    """Arbitrary shape and objective mix, possibly with empty blocks or rows."""
    m = int(rng.integers(0, max_vars + 1))
    k = int(rng.integers(0, max_vars - m + 1))
    n, d1, d2 = (int(v) for v in rng.integers(0, 4, 3))
    A = rng.random((n, m)) * (rng.random((n, m)) < 0.6)
    B = rng.random((n, k)) * (rng.random((n, k)) < 0.6)
    U = rng.random((d1, m)) * (rng.random((d1, m)) < 0.6)
    V = rng.random((d2, k)) * (rng.random((d2, k)) < 0.6)
    return GpipInstance(
        A, B, U, V, rng.uniform(1.0, 3.0, d1), rng.uniform(1.0, 3.0, d2), rng.random(m), rng.random(k)
    )
