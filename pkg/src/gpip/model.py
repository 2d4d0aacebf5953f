"""GPIP instances: storage, validation, normalization and solution checks.

A generalized packing integer program is

    max  c1.x + c2.y
    s.t. A x <= B y,  U x <= u,  V y <= v,  x, y binary

with every coefficient in [0, 1] and every right-hand side at least 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FEAS_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GpipInstance:
    """Dense GPIP data. Arrays are copied and made read-only on construction.

    The same class holds raw (unnormalized) data; `validate` reports whether
    the domain restrictions hold and `normalize` enforces them.
    """

    A: np.ndarray
    B: np.ndarray
    U: np.ndarray
    V: np.ndarray
    u: np.ndarray
    v: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    name: str | None = None

    def __post_init__(self):
        c1 = np.asarray(self.c1, dtype=float).reshape(-1)
        c2 = np.asarray(self.c2, dtype=float).reshape(-1)
        m, k = c1.size, c2.size
        u = np.asarray(self.u, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        U = np.asarray(self.U, dtype=float)
        V = np.asarray(self.V, dtype=float)
        n = A.shape[0] if A.ndim == 2 else (B.shape[0] if B.ndim == 2 else 0)
        A = A.reshape(n, m) if A.size == 0 else A
        B = B.reshape(n, k) if B.size == 0 else B
        U = U.reshape(u.size, m) if U.size == 0 else U
        V = V.reshape(v.size, k) if V.size == 0 else V
        checks = [
            ("A", A.shape, (n, m)),
            ("B", B.shape, (n, k)),
            ("U", U.shape, (u.size, m)),
            ("V", V.shape, (v.size, k)),
        ]
        for label, got, want in checks:
            if got != want:
                raise ValueError(f"{label} has shape {got}, expected {want}")
        for label, arr in (("A", A), ("B", B), ("U", U), ("V", V), ("u", u), ("v", v), ("c1", c1), ("c2", c2)):
            object.__setattr__(self, label, _frozen(arr))

    @property
    def dims(self) -> tuple[int, int, int, int, int]:
        """(n, m, k, d1, d2)."""
        return (self.A.shape[0], self.c1.size, self.c2.size, self.U.shape[0], self.V.shape[0])

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.c1.size

    @property
    def k(self) -> int:
        return self.c2.size

    @property
    def d1(self) -> int:
        return self.U.shape[0]

    @property
    def d2(self) -> int:
        return self.V.shape[0]

    def identical(self, other: "GpipInstance") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("A", "B", "U", "V", "u", "v", "c1", "c2")
        )

    def to_dict(self) -> dict:
        d = {key: getattr(self, key).tolist() for key in ("A", "B", "U", "V", "u", "v", "c1", "c2")}
        if self.name is not None:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GpipInstance":
        missing = [key for key in ("A", "B", "U", "V", "u", "v", "c1", "c2") if key not in d]
        if missing:
            raise ValueError(f"GPIP JSON is missing keys: {', '.join(missing)}")
        m, k = len(d["c1"]), len(d["c2"])
        n = len(d["A"]) if len(d["A"]) else len(d["B"])
        return cls(
            A=np.asarray(d["A"], dtype=float).reshape(n, m),
            B=np.asarray(d["B"], dtype=float).reshape(n, k),
            U=np.asarray(d["U"], dtype=float).reshape(len(d["u"]), m),
            V=np.asarray(d["V"], dtype=float).reshape(len(d["v"]), k),
            u=d["u"],
            v=d["v"],
            c1=d["c1"],
            c2=d["c2"],
            name=d.get("name"),
        )

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, source: str | Path) -> "GpipInstance":
        path = Path(source)
        text = path.read_text() if path.exists() else str(source)
        return cls.from_dict(json.loads(text))


RawInstance = GpipInstance


@dataclass(frozen=True, eq=False)
class BinarySolution:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x).reshape(-1)
        y = np.asarray(self.y).reshape(-1)
        for label, arr in (("x", x), ("y", y)):
            if arr.size and not np.all((arr == 0) | (arr == 1)):
                raise ValueError(f"{label} must be 0/1")
        object.__setattr__(self, "x", x.astype(np.int8))
        object.__setattr__(self, "y", y.astype(np.int8))

    @classmethod
    def zeros(cls, m: int, k: int) -> "BinarySolution":
        return cls(np.zeros(m, dtype=np.int8), np.zeros(k, dtype=np.int8))

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist()}


@dataclass
class FeasibilityReport:
    feasible: bool
    violated_rows: list[tuple[str, int, float, float]] = field(default_factory=list)


@dataclass
class ValidationReport:
    ok: bool
    issues: list[tuple[str, object, str]] = field(default_factory=list)
    eliminated_variables: list[tuple[str, int]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class NormalizationRecord:
    """Everything needed to map a normalized instance back to its raw form."""

    x_kept: np.ndarray
    y_kept: np.ndarray
    m_raw: int
    k_raw: int
    ab_scale: np.ndarray
    u_rows_kept: np.ndarray
    u_scale: np.ndarray
    v_rows_kept: np.ndarray
    v_scale: np.ndarray
    objective_scale: float
    notes: tuple[str, ...] = ()

    @property
    def x_eliminated(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.m_raw), self.x_kept)

    @property
    def y_eliminated(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.k_raw), self.y_kept)

    def raw_objective(self, normalized_value: float) -> float:
        return normalized_value * self.objective_scale

    def lift(self, sol: BinarySolution) -> BinarySolution:
        """Extend a normalized-space solution with zeros for eliminated columns."""
        x = np.zeros(self.m_raw, dtype=np.int8)
        y = np.zeros(self.k_raw, dtype=np.int8)
        x[self.x_kept] = sol.x
        y[self.y_kept] = sol.y
        return BinarySolution(x, y)

    def restrict(self, sol: BinarySolution) -> BinarySolution:
        return BinarySolution(sol.x[self.x_kept], sol.y[self.y_kept])


def min_positive(row) -> float:
    """Smallest strictly positive entry, +inf when there is none."""
    row = np.asarray(row, dtype=float)
    pos = row[row > 0]
    return float(pos.min()) if pos.size else math.inf


def _range_issues(label: str, arr: np.ndarray, lo: float, hi: float | None, issues: list) -> None:
    bad = ~np.isfinite(arr)
    for idx in zip(*np.nonzero(bad)):
        issues.append((label, _loc(idx), "non-finite entry"))
    below = np.isfinite(arr) & (arr < lo)
    for idx in zip(*np.nonzero(below)):
        issues.append((label, _loc(idx), f"entry below {lo:g}"))
    if hi is not None:
        above = np.isfinite(arr) & (arr > hi)
        for idx in zip(*np.nonzero(above)):
            issues.append((label, _loc(idx), f"entry above {hi:g}"))


def _loc(idx):
    idx = tuple(int(i) for i in idx)
    return idx[0] if len(idx) == 1 else idx


def validate(instance: GpipInstance) -> ValidationReport:
    issues: list = []
    for label in ("A", "B", "U", "V", "c1", "c2"):
        _range_issues(label, getattr(instance, label), 0.0, 1.0, issues)
    _range_issues("u", instance.u, 1.0, None, issues)
    _range_issues("v", instance.v, 1.0, None, issues)

    eliminated = [("x", int(j)) for j in np.nonzero((instance.U > instance.u[:, None]).any(axis=0))[0]]
    eliminated += [("y", int(j)) for j in np.nonzero((instance.V > instance.v[:, None]).any(axis=0))[0]]

    notes = []
    n1 = float(np.max(instance.c1, initial=0.0))
    n2 = float(np.max(instance.c2, initial=0.0))
    top = max(n1, n2)
    if top > 0 and top != 1.0 and not any(i[0] in ("c1", "c2") for i in issues):
        issues.append(("c", None, "objective not normalized: max(|c1|inf, |c2|inf) != 1"))
    if top > 0 and (n1 != 1.0 or n2 != 1.0):
        notes.append("strict norm condition relaxed")
    return ValidationReport(ok=not issues, issues=issues, eliminated_variables=eliminated, notes=notes)


def normalize(raw: GpipInstance) -> tuple[GpipInstance, NormalizationRecord]:
    """Bring raw packing data into the GPIP domain.

    Columns that can never be 1 (a single coefficient above its row's rhs) are
    removed; every packing row is divided by its largest coefficient; each
    coupling row is divided by its largest entry across A and B jointly; the
    objective is divided by one common factor.
    """
    for label in ("A", "B", "U", "V", "c1", "c2"):
        arr = getattr(raw, label)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError(f"{label} has negative or non-finite coefficients")
    for label in ("u", "v"):
        arr = getattr(raw, label)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError(f"{label} has negative or non-finite right-hand sides")

    x_kept = np.nonzero(~(raw.U > raw.u[:, None]).any(axis=0))[0]
    y_kept = np.nonzero(~(raw.V > raw.v[:, None]).any(axis=0))[0]
    A = raw.A[:, x_kept]
    B = raw.B[:, y_kept]
    U = raw.U[:, x_kept]
    V = raw.V[:, y_kept]
    c1 = raw.c1[x_kept]
    c2 = raw.c2[y_kept]

    notes = []

    def scale_packing(M, rhs, label):
        s = M.max(axis=1, initial=0.0)
        keep = (s > 0) | (rhs >= 1)
        if np.any(~keep):
            notes.append(f"dropped {int((~keep).sum())} all-zero {label} rows with rhs < 1")
        s_kept = np.where(s[keep] > 0, s[keep], 1.0)
        return M[keep] / s_kept[:, None], rhs[keep] / s_kept, np.nonzero(keep)[0], s_kept

    U, u, u_rows, u_scale = scale_packing(U, raw.u, "U")
    V, v, v_rows, v_scale = scale_packing(V, raw.v, "V")

    ab = np.maximum(A.max(axis=1, initial=0.0), B.max(axis=1, initial=0.0))
    ab = np.where(ab > 0, ab, 1.0)
    A = A / ab[:, None]
    B = B / ab[:, None]

    obj_scale = max(float(c1.max(initial=0.0)), float(c2.max(initial=0.0)))
    if obj_scale > 0:
        c1 = c1 / obj_scale
        c2 = c2 / obj_scale
    else:
        obj_scale = 1.0
        notes.append("zero objective")
    if c1.max(initial=0.0) != 1.0 or c2.max(initial=0.0) != 1.0:
        notes.append("strict norm condition relaxed")

    inst = GpipInstance(A=A, B=B, U=U, V=V, u=u, v=v, c1=c1, c2=c2, name=raw.name)
    record = NormalizationRecord(
        x_kept=x_kept,
        y_kept=y_kept,
        m_raw=raw.m,
        k_raw=raw.k,
        ab_scale=ab,
        u_rows_kept=u_rows,
        u_scale=u_scale,
        v_rows_kept=v_rows,
        v_scale=v_scale,
        objective_scale=obj_scale,
        notes=tuple(notes),
    )
    return inst, record


def _check_dims(instance: GpipInstance, sol: BinarySolution) -> None:
    if sol.x.size != instance.m or sol.y.size != instance.k:
        raise ValueError(
            f"solution has (m, k) = ({sol.x.size}, {sol.y.size}), instance has ({instance.m}, {instance.k})"
        )


def row_values(instance: GpipInstance, x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(A x, B y, U x, V y) for real-valued x, y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return instance.A @ x, instance.B @ y, instance.U @ x, instance.V @ y


def check_feasible(instance: GpipInstance, sol: BinarySolution, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Verify A x <= B y, U x <= u, V y <= v with an absolute per-row tolerance."""
    _check_dims(instance, sol)
    x = sol.x.astype(float)
    y = sol.y.astype(float)
    violated = []
    for i in range(instance.n):
        lhs = math.fsum(instance.A[i] * x)
        rhs = math.fsum(instance.B[i] * y)
        if lhs > rhs + tol:
            violated.append(("AB", i, lhs, rhs))
    for i in range(instance.d1):
        lhs = math.fsum(instance.U[i] * x)
        if lhs > instance.u[i] + tol:
            violated.append(("U", i, lhs, float(instance.u[i])))
    for i in range(instance.d2):
        lhs = math.fsum(instance.V[i] * y)
        if lhs > instance.v[i] + tol:
            violated.append(("V", i, lhs, float(instance.v[i])))
    return FeasibilityReport(feasible=not violated, violated_rows=violated)


def is_feasible(instance: GpipInstance, x, y, tol: float = FEAS_TOL) -> bool:
    """Vectorized feasibility test for 0/1 (or real) vectors, no report."""
    ax, by, ux, vy = row_values(instance, x, y)
    return bool(np.all(ax <= by + tol) and np.all(ux <= instance.u + tol) and np.all(vy <= instance.v + tol))


def objective(instance: GpipInstance, sol: BinarySolution) -> float:
    _check_dims(instance, sol)
    return math.fsum(np.concatenate([instance.c1[sol.x == 1], instance.c2[sol.y == 1]]))
