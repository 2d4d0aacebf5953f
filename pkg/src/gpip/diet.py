"""Multi-period meal planning with two-period perishability, lowered to GPIP.

Each period n picks integer recipe counts x_n and package purchases y_n.
The pantry is z_n = y_n + y_{n-1} - P x_{n-1} (nothing before period 1), so
food bought in period n can be cooked in periods n and n+1 only. Cooking
needs P x_n <= z_n, which after substituting the pantry dynamics becomes the
coupling row P x_n + P x_{n-1} <= y_n + y_{n-1}. Integer counts are expanded
into unary binary replicas.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import BinarySolution, GpipInstance, NormalizationRecord, normalize

CAP_EPS = 1e-9
PLAN_TOL = 1e-9


class CatalogError(ValueError):
    """Malformed catalog or config; the message names the offending field."""


class UnboundedVariableError(ValueError):
    pass


@dataclass(frozen=True)
class Ingredient:
    name: str
    package_cost: float
    package_size: float


@dataclass(frozen=True)
class Recipe:
    name: str
    prep_minutes: float
    portions_used: dict
    nutrition: dict
    preference_weight: float


@dataclass(frozen=True)
class Catalog:
    ingredients: tuple = ()
    recipes: tuple = ()

    @property
    def K(self) -> int:
        return len(self.ingredients)

    @property
    def R(self) -> int:
        return len(self.recipes)

    def to_dict(self) -> dict:
        return {
            "ingredients": [
                {"name": g.name, "package_cost": g.package_cost, "package_size": g.package_size}
                for g in self.ingredients
            ],
            "recipes": [
                {
                    "name": r.name,
                    "prep_minutes": r.prep_minutes,
                    "portions_used": dict(r.portions_used),
                    "nutrition": dict(r.nutrition),
                    "preference_weight": r.preference_weight,
                }
                for r in self.recipes
            ],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _number(obj, key, where, allow_missing=False, default=None):
    if key not in obj:
        if allow_missing:
            return default
        raise CatalogError(f"{where}.{key}: missing")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise CatalogError(f"{where}.{key}: expected a finite number, got {val!r}")
    if val < 0:
        raise CatalogError(f"{where}.{key}: must be nonnegative, got {val!r}")
    return float(val)


def _amounts(obj, key, where) -> dict:
    raw = obj.get(key, {})
    if not isinstance(raw, dict):
        raise CatalogError(f"{where}.{key}: expected an object")
    return {str(name): _number(raw, name, f"{where}.{key}") for name in raw}


def catalog_from_dict(data: dict) -> Catalog:
    if not isinstance(data, dict):
        raise CatalogError("catalog: expected a JSON object")
    ingredients, seen = [], set()
    for idx, g in enumerate(data.get("ingredients", [])):
        where = f"ingredients[{idx}]"
        if not isinstance(g, dict) or "name" not in g:
            raise CatalogError(f"{where}.name: missing")
        name = str(g["name"])
        if name in seen:
            raise CatalogError(f"{where}.name: duplicate ingredient {name!r}")
        seen.add(name)
        size = _number(g, "package_size", where)
        if size <= 0:
            raise CatalogError(f"{where}.package_size: must be positive")
        ingredients.append(Ingredient(name, _number(g, "package_cost", where), size))
    recipes, seen_r = [], set()
    for idx, r in enumerate(data.get("recipes", [])):
        where = f"recipes[{idx}]"
        if not isinstance(r, dict) or "name" not in r:
            raise CatalogError(f"{where}.name: missing")
        name = str(r["name"])
        if name in seen_r:
            raise CatalogError(f"{where}.name: duplicate recipe {name!r}")
        seen_r.add(name)
        used = _amounts(r, "portions_used", where)
        for ing in used:
            if ing not in seen:
                raise CatalogError(f"{where}.portions_used: unknown ingredient {ing!r}")
        recipes.append(
            Recipe(
                name=name,
                prep_minutes=_number(r, "prep_minutes", where),
                portions_used=used,
                nutrition=_amounts(r, "nutrition", where),
                preference_weight=_number(r, "preference_weight", where, allow_missing=True, default=1.0),
            )
        )
    return Catalog(tuple(ingredients), tuple(recipes))


def _read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_catalog(path: str | Path) -> Catalog:
    return catalog_from_dict(_read_json(path))


@dataclass
class PlanConfig:
    horizon: int
    time_budget: float
    money_budget: float
    nutrient_caps: dict = field(default_factory=dict)
    repetition_caps: dict = field(default_factory=dict)
    recipe_utility: dict | None = None
    ingredient_utility: dict | None = None
    purchase_cap: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "PlanConfig":
        if not isinstance(d, dict):
            raise CatalogError("config: expected a JSON object")
        horizon = d.get("horizon")
        if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
            raise CatalogError(f"config.horizon: expected an integer >= 1, got {horizon!r}")
        cap = d.get("purchase_cap")
        if cap is not None and (isinstance(cap, bool) or not isinstance(cap, int) or cap < 0):
            raise CatalogError(f"config.purchase_cap: expected a nonnegative integer, got {cap!r}")
        reps = d.get("repetition_caps", {})
        for name, val in reps.items():
            if isinstance(val, bool) or not isinstance(val, int) or val < 0:
                raise CatalogError(f"config.repetition_caps.{name}: expected a nonnegative integer")
        return cls(
            horizon=horizon,
            time_budget=_number(d, "time_budget", "config"),
            money_budget=_number(d, "money_budget", "config"),
            nutrient_caps=_amounts(d, "nutrient_caps", "config"),
            repetition_caps=dict(reps),
            recipe_utility=d.get("recipe_utility"),
            ingredient_utility=d.get("ingredient_utility"),
            purchase_cap=cap,
        )

    @classmethod
    def load(cls, path: str | Path) -> "PlanConfig":
        return cls.from_dict(_read_json(path))

    def to_dict(self) -> dict:
        d = {
            "horizon": self.horizon,
            "time_budget": self.time_budget,
            "money_budget": self.money_budget,
            "nutrient_caps": dict(self.nutrient_caps),
            "repetition_caps": dict(self.repetition_caps),
        }
        for key in ("recipe_utility", "ingredient_utility", "purchase_cap"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


@dataclass(frozen=True, eq=False)
class DietModel:
    """Matrices of the integer planning model; all entries nonnegative."""

    N: int
    v: np.ndarray
    w: np.ndarray
    P: np.ndarray
    F: np.ndarray
    h: np.ndarray
    f: np.ndarray
    t: np.ndarray
    T: float
    b: np.ndarray
    Bbudget: float
    recipe_names: tuple = ()
    ingredient_names: tuple = ()
    nutrient_names: tuple = ()
    purchase_cap: np.ndarray | None = None

    @property
    def R(self) -> int:
        return self.v.size

    @property
    def K(self) -> int:
        return self.w.size


def _utility(spec, names, default, label):
    if spec is None:
        return np.asarray(default, dtype=float)
    if isinstance(spec, dict):
        unknown = set(spec) - set(names)
        if unknown:
            raise CatalogError(f"config.{label}: unknown names {sorted(unknown)}")
        out = np.asarray(default, dtype=float).copy()
        for j, name in enumerate(names):
            if name in spec:
                out[j] = float(spec[name])
    else:
        out = np.asarray(spec, dtype=float).reshape(-1)
        if out.size != len(names):
            raise CatalogError(f"config.{label}: expected {len(names)} values, got {out.size}")
    if np.any(out < 0):
        raise CatalogError(
            f"config.{label}: negative utilities are not supported; use 0 and let the budget limit purchases"
        )
    return out


def build_model(catalog: Catalog, config: PlanConfig) -> DietModel:
    R, K = catalog.R, catalog.K
    ing_names = tuple(g.name for g in catalog.ingredients)
    rec_names = tuple(r.name for r in catalog.recipes)
    pos = {name: i for i, name in enumerate(ing_names)}
    P = np.zeros((K, R))
    for r, rec in enumerate(catalog.recipes):
        for name, qty in rec.portions_used.items():
            P[pos[name], r] = qty / catalog.ingredients[pos[name]].package_size
    nut_names = tuple(config.nutrient_caps)
    F = np.array([[rec.nutrition.get(nut, 0.0) for rec in catalog.recipes] for nut in nut_names]).reshape(
        len(nut_names), R
    )
    h = np.array([config.nutrient_caps[nut] for nut in nut_names], dtype=float)
    unknown = set(config.repetition_caps) - set(rec_names)
    if unknown:
        raise CatalogError(f"config.repetition_caps: unknown recipes {sorted(unknown)}")
    f = np.array([config.repetition_caps.get(name, config.horizon) for name in rec_names], dtype=np.int64)
    v = _utility(config.recipe_utility, rec_names, [r.preference_weight for r in catalog.recipes], "recipe_utility")
    w = _utility(config.ingredient_utility, ing_names, np.zeros(K), "ingredient_utility")
    cap = None if config.purchase_cap is None else np.full(K, config.purchase_cap, dtype=np.int64)
    return DietModel(
        N=config.horizon,
        v=v,
        w=w,
        P=P,
        F=F,
        h=h,
        f=f,
        t=np.array([r.prep_minutes for r in catalog.recipes], dtype=float),
        T=float(config.time_budget),
        b=np.array([g.package_cost for g in catalog.ingredients], dtype=float),
        Bbudget=float(config.money_budget),
        recipe_names=rec_names,
        ingredient_names=ing_names,
        nutrient_names=nut_names,
        purchase_cap=cap,
    )


@dataclass(frozen=True, eq=False)
class BinarizedModel:
    """A model plus the per-period integer bound of every recipe and ingredient."""

    model: DietModel
    x_caps: np.ndarray
    y_caps: np.ndarray

    @property
    def replica_count(self) -> int:
        return int(self.model.N * (self.x_caps.sum() + self.y_caps.sum()))


def _floor_ratio(top, coef):
    return math.floor(top / coef + CAP_EPS)


def binarize(model: DietModel) -> tuple[BinarizedModel, dict]:
    """Per-period bounds for unary expansion.

    A recipe is capped by its repetition cap and by how many copies fit in
    the time budget and under each nutrient cap. An ingredient is capped by
    the money budget and, if set, the purchase cap.
    """
    x_caps = np.empty(model.R, dtype=np.int64)
    for r in range(model.R):
        cap = int(model.f[r])
        if model.t[r] > 0:
            cap = min(cap, _floor_ratio(model.T, model.t[r]))
        for j in np.nonzero(model.F[:, r] > 0)[0]:
            cap = min(cap, _floor_ratio(model.h[j], model.F[j, r]))
        x_caps[r] = max(cap, 0)
    y_caps = np.empty(model.K, dtype=np.int64)
    for i in range(model.K):
        cap = math.inf
        if model.b[i] > 0:
            cap = _floor_ratio(model.Bbudget, model.b[i])
        if model.purchase_cap is not None:
            cap = min(cap, int(model.purchase_cap[i]))
        if cap == math.inf:
            raise UnboundedVariableError(
                f"ingredient {model.ingredient_names[i] if model.ingredient_names else i} is free "
                "and has no purchase cap; set purchase_cap"
            )
        y_caps[i] = cap
    return BinarizedModel(model, x_caps, y_caps), {"recipe": x_caps.copy(), "ingredient": y_caps.copy()}


@dataclass(frozen=True, eq=False)
class VariableMap:
    """Raw GPIP column -> (period, catalog index, replica), per block.

    Columns are ordered by period, then catalog index, then replica, so the
    replicas of one integer variable are contiguous. `record` maps the
    normalized instance back to these raw columns.
    """

    N: int
    x_period: np.ndarray
    x_index: np.ndarray
    x_replica: np.ndarray
    y_period: np.ndarray
    y_index: np.ndarray
    y_replica: np.ndarray
    record: NormalizationRecord
    R: int
    K: int

    def column(self, kind: str, j: int) -> tuple[str, int, int, int]:
        if kind == "x":
            return ("recipe", int(self.x_period[j]), int(self.x_index[j]), int(self.x_replica[j]))
        return ("ingredient", int(self.y_period[j]), int(self.y_index[j]), int(self.y_replica[j]))

    def raw_solution(self, sol: BinarySolution) -> BinarySolution:
        if sol.x.size == self.x_period.size and sol.y.size == self.y_period.size:
            return sol
        if sol.x.size == self.record.x_kept.size and sol.y.size == self.record.y_kept.size:
            return self.record.lift(sol)
        raise ValueError(
            f"solution has {sol.x.size} x and {sol.y.size} y entries; expected "
            f"{self.x_period.size}/{self.y_period.size} raw or "
            f"{self.record.x_kept.size}/{self.record.y_kept.size} normalized"
        )

    def counts(self, sol: BinarySolution) -> tuple[np.ndarray, np.ndarray]:
        """Integer recipe counts (N x R) and purchases (N x K)."""
        raw = self.raw_solution(sol)
        X = np.zeros((self.N, self.R), dtype=np.int64)
        Y = np.zeros((self.N, self.K), dtype=np.int64)
        np.add.at(X, (self.x_period - 1, self.x_index), raw.x.astype(np.int64))
        np.add.at(Y, (self.y_period - 1, self.y_index), raw.y.astype(np.int64))
        return X, Y

    def encode(self, X, Y, normalized: bool = True) -> BinarySolution:
        """Binary solution turning on the first X[n, r] (Y[n, i]) replicas."""
        X = np.asarray(X, dtype=np.int64)
        Y = np.asarray(Y, dtype=np.int64)
        x = (self.x_replica < X[self.x_period - 1, self.x_index]).astype(np.int8)
        y = (self.y_replica < Y[self.y_period - 1, self.y_index]).astype(np.int8)
        sol = BinarySolution(x, y)
        return self.record.restrict(sol) if normalized else sol


def _columns(N, caps):
    period, index, replica = [], [], []
    for n in range(1, N + 1):
        for j, q in enumerate(caps):
            period.extend([n] * int(q))
            index.extend([j] * int(q))
            replica.extend(range(int(q)))
    as_int = lambda a: np.asarray(a, dtype=np.int64)  # noqa: E731
    return as_int(period), as_int(index), as_int(replica)


def lower(model: DietModel | BinarizedModel) -> tuple[GpipInstance, VariableMap]:
    """Raw (unnormalized) GPIP data; rows that can never bind are left out."""
    bm = model if isinstance(model, BinarizedModel) else binarize(model)[0]
    dm = bm.model
    N = dm.N
    xp, xr, xq = _columns(N, bm.x_caps)
    yp, yr, yq = _columns(N, bm.y_caps)
    m, k = xp.size, yp.size

    A_rows, B_rows = [], []
    for n in range(1, N + 1):
        x_cols = (xp == n) | (xp == n - 1)
        y_cols = (yp == n) | (yp == n - 1)
        for i in range(dm.K):
            a = np.where(x_cols, dm.P[i, xr], 0.0)
            if not np.any(a > 0):
                continue
            A_rows.append(a)
            B_rows.append(np.where(y_cols & (yr == i), 1.0, 0.0))

    U_rows, u = [], []

    def packing(coef, rhs, rows, rhs_list):
        if coef.sum() > rhs + CAP_EPS * max(1.0, rhs):
            rows.append(coef)
            rhs_list.append(rhs)

    for n in range(1, N + 1):
        here = xp == n
        for j in range(dm.F.shape[0]):
            packing(np.where(here, dm.F[j, xr], 0.0), dm.h[j], U_rows, u)
        packing(np.where(here, dm.t[xr], 0.0), dm.T, U_rows, u)
    for r in range(dm.R):
        packing((xr == r).astype(float), float(dm.f[r]), U_rows, u)
    V_rows, v = [], []
    for n in range(1, N + 1):
        packing(np.where(yp == n, dm.b[yr], 0.0), dm.Bbudget, V_rows, v)

    def stack(rows, width):
        return np.array(rows, dtype=float).reshape(len(rows), width)

    raw = GpipInstance(
        A=stack(A_rows, m),
        B=stack(B_rows, k),
        U=stack(U_rows, m),
        V=stack(V_rows, k),
        u=np.array(u, dtype=float),
        v=np.array(v, dtype=float),
        c1=dm.v[xr],
        c2=dm.w[yr],
        name="diet",
    )
    _, record = normalize(raw)
    vmap = VariableMap(N, xp, xr, xq, yp, yr, yq, record, dm.R, dm.K)
    return raw, vmap


def compile(model: DietModel | BinarizedModel) -> tuple[GpipInstance, VariableMap]:  # noqa: A001
    """Normalized GPIP instance and the map from its columns to the plan."""
    raw, vmap = lower(model)
    inst, _ = normalize(raw)
    return inst, vmap


@dataclass
class MealPlan:
    recipe_counts: np.ndarray
    purchases: np.ndarray
    leftovers: np.ndarray
    prep_minutes: np.ndarray
    money_spent: np.ndarray
    objective: float

    def to_dict(self, model: DietModel | None = None) -> dict:
        periods = []
        for n in range(self.recipe_counts.shape[0]):
            entry = {
                "period": n + 1,
                "recipe_counts": self.recipe_counts[n].tolist(),
                "purchases": self.purchases[n].tolist(),
                "leftovers": self.leftovers[n].tolist(),
                "prep_minutes": float(self.prep_minutes[n]),
                "money_spent": float(self.money_spent[n]),
            }
            if model is not None and model.recipe_names:
                entry["recipes"] = {
                    model.recipe_names[r]: int(c) for r, c in enumerate(self.recipe_counts[n]) if c
                }
                entry["buy"] = {
                    model.ingredient_names[i]: int(c) for i, c in enumerate(self.purchases[n]) if c
                }
            periods.append(entry)
        return {"periods": periods, "objective": self.objective}

    def to_json(self, model: DietModel | None = None) -> str:
        return json.dumps(self.to_dict(model), indent=2)


def pantry(model: DietModel, X, Y) -> np.ndarray:
    """z_n = y_n + y_{n-1} - P x_{n-1}, with nothing before period 1."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Z = Y.copy()
    Z[1:] += Y[:-1] - X[:-1] @ model.P.T
    return Z


def plan_from_counts(model: DietModel, X, Y) -> MealPlan:
    X = np.asarray(X, dtype=np.int64)
    Y = np.asarray(Y, dtype=np.int64)
    obj = math.fsum((X @ model.v).tolist()) + math.fsum((Y @ model.w).tolist())
    return MealPlan(
        recipe_counts=X,
        purchases=Y,
        leftovers=pantry(model, X, Y),
        prep_minutes=X @ model.t,
        money_spent=Y @ model.b,
        objective=obj,
    )


def decode(vmap: VariableMap, sol: BinarySolution, model: DietModel) -> MealPlan:
    X, Y = vmap.counts(sol)
    return plan_from_counts(model, X, Y)


def check_plan(model: DietModel, plan: MealPlan, tol: float = PLAN_TOL) -> list[str]:
    """Every violated constraint of the integer model, as readable strings."""
    X, Y = plan.recipe_counts, plan.purchases
    out = []
    if X.shape != (model.N, model.R) or Y.shape != (model.N, model.K):
        return [f"plan shape {X.shape}/{Y.shape} does not match the model"]
    if np.any(X < 0) or np.any(Y < 0):
        out.append("negative counts")
    Z = pantry(model, X, Y)
    for n in range(model.N):
        need = model.P @ X[n]
        for i in np.nonzero(need > Z[n] + tol)[0]:
            out.append(f"period {n + 1}: ingredient {i} needs {need[i]:g} packages, pantry has {Z[n, i]:g}")
        load = model.F @ X[n]
        for j in np.nonzero(load > model.h + tol)[0]:
            out.append(f"period {n + 1}: nutrient {j} at {load[j]:g} over cap {model.h[j]:g}")
        if X[n] @ model.t > model.T + tol:
            out.append(f"period {n + 1}: prep time {X[n] @ model.t:g} over {model.T:g}")
        if Y[n] @ model.b > model.Bbudget + tol:
            out.append(f"period {n + 1}: spending {Y[n] @ model.b:g} over {model.Bbudget:g}")
        if model.purchase_cap is not None:
            for i in np.nonzero(Y[n] > model.purchase_cap)[0]:
                out.append(f"period {n + 1}: ingredient {i} bought {Y[n, i]} times, cap {model.purchase_cap[i]}")
    reps = X.sum(axis=0)
    for r in np.nonzero(reps > model.f)[0]:
        out.append(f"recipe {r} cooked {reps[r]} times, cap {model.f[r]}")
    return out


def perishability_ok(model: DietModel, plan: MealPlan, tol: float = PLAN_TOL) -> bool:
    """Cooking in period n only draws on purchases from periods n and n-1."""
    X = np.asarray(plan.recipe_counts, dtype=float)
    Y = np.asarray(plan.purchases, dtype=float)
    recent = Y.copy()
    recent[1:] += Y[:-1]
    return bool(np.all(X @ model.P.T <= recent + tol))
