"""Synthetic catalogs and the seeded gap/timing experiment over them."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diet import Catalog, Ingredient, PlanConfig, Recipe, build_model, check_plan, decode, lower
from .lp import relax, solve_lp
from .model import check_feasible, normalize, objective
from .pessimistic import FALLBACK_ALPHA, FALLBACK_GAMMA, relative_gap, solve
from .rounding import RoundingParams, run_trials, scale

log = logging.getLogger(__name__)

SIZES = {"small": (20, 10), "medium": (300, 50), "large": (2000, 130)}
METHODS = ("deterministic", "randomized", "both")
CSV_COLUMNS = ["size", "horizon", "gap_mean", "gap_sd", "time_mean_s", "time_sd_s", "feasible_fraction"]

# per-period (one week) defaults for synthetic plans
WEEK_CAPS = {"calories": 14000.0, "fat": 490.0, "sodium": 16100.0}
WEEK_MINUTES = 600.0
WEEK_BUDGET = 50.0
PURCHASE_CAP = 3


def generate_synthetic(size_class: str, seed: int) -> Catalog:
    """Random catalog with the recipe/ingredient counts of the size class."""
    if size_class not in SIZES:
        raise ValueError(f"size_class must be one of {sorted(SIZES)}")
    R, K = SIZES[size_class]
    rng = np.random.default_rng(seed)
    ingredients = tuple(
        Ingredient(
            name=f"ing{i:03d}",
            package_cost=round(float(rng.uniform(0.5, 10.0)), 2),
            package_size=float(rng.integers(4, 13)),
        )
        for i in range(K)
    )
    recipes = []
    for r in range(R):
        count = int(rng.integers(1, 9))
        chosen = np.sort(rng.choice(K, size=min(count, K), replace=False))
        portions = {ingredients[i].name: float(rng.integers(1, 5)) for i in chosen}
        nutrition = {
            "calories": round(float(rng.uniform(150.0, 900.0)), 1),
            "fat": round(float(rng.uniform(2.0, 50.0)), 1),
            "sodium": round(float(rng.uniform(50.0, 1500.0)), 1),
        }
        recipes.append(
            Recipe(
                name=f"rec{r:04d}",
                prep_minutes=float(rng.integers(10, 121)),
                portions_used=portions,
                nutrition=nutrition,
                preference_weight=round(1.0 - float(rng.random()), 6),
            )
        )
    return Catalog(ingredients, tuple(recipes))


def default_plan_config(horizon: int, **overrides) -> PlanConfig:
    cfg = PlanConfig(
        horizon=horizon,
        time_budget=WEEK_MINUTES,
        money_budget=WEEK_BUDGET,
        nutrient_caps=dict(WEEK_CAPS),
        purchase_cap=PURCHASE_CAP,
    )
    for key, val in overrides.items():
        setattr(cfg, key, val)
    return cfg


@dataclass
class ExperimentConfig:
    size_class: list = field(default_factory=lambda: ["small"])
    horizons: list = field(default_factory=lambda: [1])
    repetitions: int = 1
    seed: int = 0
    method: str = "deterministic"
    trials: int = 100
    timing: bool = True
    plan: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.size_class, str):
            self.size_class = [self.size_class]
        for s in self.size_class:
            if s not in SIZES:
                raise ValueError(f"unknown size class {s!r}")
        if not self.horizons or any(int(h) < 1 for h in self.horizons):
            raise ValueError("horizons must be a nonempty list of integers >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"size_class", "horizons", "repetitions", "seed", "method", "trials", "timing", "plan"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ResultRow:
    size_class: str
    horizon: int
    gap_mean: float
    gap_sd: float
    time_mean: float
    time_sd: float
    feasible_fraction: float
    method: str = "deterministic"
    failures: int = 0

    def as_csv(self) -> list[str]:
        return [
            self.size_class,
            str(self.horizon),
            f"{self.gap_mean:.6f}",
            f"{self.gap_sd:.6f}",
            f"{self.time_mean:.6f}",
            f"{self.time_sd:.6f}",
            f"{self.feasible_fraction:.6f}",
        ]


def _rep_seed(seed: int, size_idx: int, horizon: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, size_idx, horizon, rep]).generate_state(1)[0])


def _mean_sd(vals: list[float]) -> tuple[float, float]:
    if not vals:
        return math.nan, math.nan
    arr = np.asarray(vals, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def _run_deterministic(model, raw, vmap, trials, seed):
    res = solve(raw, trials=trials, seed=seed)
    plan = decode(vmap, res.solution, model)
    return res.gap, res.wall_ms / 1000.0, not check_plan(model, plan)


def _run_randomized(model, raw, vmap, trials, seed):
    t0 = time.perf_counter()
    inst, record = normalize(raw)
    lp = solve_lp(relax(inst))
    params = RoundingParams.from_alpha_gamma(FALLBACK_ALPHA, FALLBACK_GAMMA)
    stats = run_trials(inst, scale(lp, params), trials, seed)
    elapsed = time.perf_counter() - t0
    if not check_feasible(inst, stats.best).feasible:
        raise RuntimeError("repaired solution is infeasible")
    raw_sol = record.lift(stats.best)
    gap, _ = relative_gap(objective(raw, raw_sol), record.raw_objective(lp.objective_value))
    return gap, elapsed, stats.raw_feasible / stats.trials


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """One row per (size, horizon[, method]); preferences redrawn each repetition."""
    methods = ["deterministic", "randomized"] if config.method == "both" else [config.method]
    rows = []
    for size_idx, size in enumerate(config.size_class):
        catalog = generate_synthetic(size, config.seed)
        for horizon in config.horizons:
            horizon = int(horizon)
            cells = {meth: {"gap": [], "time": [], "feas": [], "fail": 0} for meth in methods}
            for rep in range(config.repetitions):
                seed = _rep_seed(config.seed, size_idx, horizon, rep)
                rng = np.random.default_rng(seed)
                v = (1.0 - rng.random(catalog.R)).tolist()
                plan_cfg = default_plan_config(horizon, **config.plan)
                plan_cfg.recipe_utility = v
                plan_cfg.ingredient_utility = None
                model = build_model(catalog, plan_cfg)
                raw, vmap = lower(model)
                for meth in methods:
                    cell = cells[meth]
                    try:
                        if meth == "deterministic":
                            gap, secs, ok = _run_deterministic(model, raw, vmap, config.trials, seed)
                            feas = 1.0 if ok else 0.0
                        else:
                            gap, secs, feas = _run_randomized(model, raw, vmap, config.trials, seed)
                    except Exception as exc:  # keep going; the failure shows up in the row
                        log.warning("%s/N=%d rep %d (%s) failed: %s", size, horizon, rep, meth, exc)
                        cell["fail"] += 1
                        cell["feas"].append(0.0)
                        continue
                    cell["gap"].append(gap)
                    cell["time"].append(secs if config.timing else 0.0)
                    cell["feas"].append(feas)
            for meth in methods:
                cell = cells[meth]
                gm, gs = _mean_sd(cell["gap"])
                tm, ts = _mean_sd(cell["time"])
                rows.append(
                    ResultRow(size, horizon, gm, gs, tm, ts, float(np.mean(cell["feas"])), meth, cell["fail"])
                )
    return rows


def write_csv(rows: list[ResultRow], path: str | Path | None = None, with_method: bool | None = None) -> str:
    """CSV text; writes it to `path` too when given. A method column is added
    only when rows from more than one method are present."""
    if with_method is None:
        with_method = len({r.method for r in rows}) > 1
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + (["method"] if with_method else []))
    for r in rows:
        writer.writerow(r.as_csv() + ([r.method] if with_method else []))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
