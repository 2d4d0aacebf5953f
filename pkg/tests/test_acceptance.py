"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are printed in the pytest terminal summary, or directly when the
module is run as a script (`python tests/test_acceptance.py`).
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import format_line, random_instance, record, small_instance, tiny1  # noqa: E402
from oracles import (  # noqa: E402
    binary_grid,
    binomial_sigma,
    brute_force_optimum,
    completion_failure,
    feasible_mask,
    integer_plan_box,
    lp_vertex_optimum,
    plan_infeasible,
    plan_utility,
)

from gpip.diet import Catalog, Ingredient, PlanConfig, Recipe, binarize, build_model, lower, plan_from_counts  # noqa: E402
from gpip.exact import solve_exact  # noqa: E402
from gpip.harness import ExperimentConfig, run_experiment  # noqa: E402
from gpip.lp import LinearProgram, relax, solve_lp  # noqa: E402
from gpip.model import GpipInstance, normalize, objective  # noqa: E402
from gpip.pessimistic import (  # noqa: E402
    Prefix,
    calibrate,
    derandomized_round,
    deviation_from_scaled,
    estimator,
    mgf_lower,
    mgf_upper,
)
from gpip.rounding import (  # noqa: E402
    DEFAULT_BETA,
    RoundingParams,
    bad_events,
    deviation_params,
    failure_bounds,
    sample_many,
    scale,
)

FEAS = 1e-9


def _verdict(number, title, checks: dict, detail: str):
    passed = all(checks.values())
    failed = [name for name, ok in checks.items() if not ok]
    record(number, title, passed, detail + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert passed, f"criterion {number}: {detail}; failed checks {failed}"


def _feasible(inst, x, y) -> bool:
    return bool(feasible_mask(inst.A, inst.B, inst.U, inst.V, inst.u, inst.v, x[None, :], y[None, :], FEAS)[0])


# ----------------------------------------------------------------- criterion 1


def test_c1_oracle_sandwich():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    certified = feasible = sandwich = oracle_agree = bound_ok = 0
    total = 500
    for _ in range(total):
        inst, _ = normalize(small_instance(rng, 12))
        lp = solve_lp(relax(inst))
        exact = solve_exact(inst)
        brute, _, _ = brute_force_optimum(inst)
        oracle_agree += exact.proven_optimal and abs(exact.objective - brute) <= 1e-9
        bound_ok += exact.objective <= lp.objective_value + 1e-9
        cal = calibrate(inst, lp)
        if not cal:
            continue
        certified += 1
        sol = derandomized_round(inst, scale(lp, cal.params), cal.params)
        ok = _feasible(inst, sol.x.astype(float), sol.y.astype(float))
        feasible += ok
        sandwich += ok and objective(inst, sol) <= exact.objective + 1e-9 <= lp.objective_value + 2e-9
    elapsed = time.perf_counter() - t0
    _verdict(
        1,
        "oracle sandwich",
        {
            "feasibility 100%": feasible == certified,
            "sandwich on every certified instance": sandwich == certified,
            "exact <= LP bound everywhere": bound_ok == total,
            "exact matches enumeration": oracle_agree == total,
            "nonvacuous (>= 150 certified)": certified >= 150,
            "runtime < 60 s": elapsed < 60.0,
        },
        f"{certified}/{total} certified, {feasible} feasible, {sandwich} sandwiched, {elapsed:.1f} s",
    )


# ----------------------------------------------------------------- criterion 2


def _walk_params(inst, lp):
    """Calibrated parameters, else a point with objective deviation 1/2."""
    cal = calibrate(inst, lp)
    if cal:
        return cal.params, True
    cx = float(inst.c1 @ lp.x_hat)
    cy = float(inst.c2 @ lp.y_hat)
    if cy <= 0:
        return None, False
    p = ((cx + cy) / (0.5 * DEFAULT_BETA) - cx) / cy
    return RoundingParams.from_gamma_p(1.5, max(p, 1.01)), False


def _children(prefix: Prefix, k: int):
    if len(prefix.fixed_y) < k:
        return [Prefix(prefix.fixed_y + (v,), ()) for v in (0, 1)]
    return [Prefix(prefix.fixed_y, prefix.fixed_x + (v,)) for v in (0, 1)]


def _conditional_identity_error(inst, sc, dev, parent, kids, prob) -> float:
    """Largest relative miss of h(parent) = (1-p) h(child 0) + p h(child 1)."""
    worst = 0.0

    def check(h, args_parent, args0, args1):
        nonlocal worst
        a, b0, b1 = h(*args_parent), h(*args0), h(*args1)
        worst = max(worst, abs(a - ((1.0 - prob) * b0 + prob * b1)) / max(1.0, abs(a)))

    fams = (
        (inst.U, sc.x_prime, dev.mu1, dev.delta1, inst.u, "x"),
        (inst.V, sc.y_prime, dev.mu2, dev.delta2, inst.v, "y"),
    )
    for M, probs, mu, delta, rhs, block in fams:
        for i in range(M.shape[0]):
            if mu[i] == 0 or delta[i] <= 0:
                continue
            fixed = [getattr(p, "fixed_" + block) for p in (parent, *kids)]
            check(
                lambda f: mgf_upper(M[i], probs, delta[i], rhs[i], f),
                (fixed[0],), (fixed[1],), (fixed[2],),
            )
    check(
        lambda pre: mgf_lower(inst.c1, inst.c2, sc.x_prime, sc.y_prime, dev.delta_obj, dev.obj_threshold, pre),
        (parent,), (kids[0],), (kids[1],),
    )
    return worst


def test_c2_estimator_soundness():
    rng = np.random.default_rng(2002)
    instances = prefixes = certified = 0
    worst_gap = -math.inf
    worst_identity = 0.0
    kernel_agree = True
    while instances < 200:
        inst, _ = normalize(small_instance(rng, 10))
        lp = solve_lp(relax(inst))
        if lp.objective_value <= 0:
            continue
        params, cert = _walk_params(inst, lp)
        if params is None:
            continue
        sc = scale(lp, params)
        dev = deviation_from_scaled(inst, sc, params)
        if not 0 < dev.delta_obj < 1:
            continue
        instances += 1
        certified += cert
        thr = dev.obj_threshold
        prefix = Prefix()
        visited = [prefix]
        for step in range(inst.k + inst.m):
            kids = _children(prefix, inst.k)
            prob = sc.y_prime[step] if step < inst.k else sc.x_prime[step - inst.k]
            worst_identity = max(worst_identity, _conditional_identity_error(inst, sc, dev, prefix, kids, prob))
            take_one = estimator(inst, sc, params, dev, kids[1]).total < 1.0
            visited.append(kids[1])
            prefix = kids[1] if take_one else kids[0]
            if not take_one:
                visited.append(prefix)
        for pre in visited:
            est = estimator(inst, sc, params, dev, pre).total
            exact = completion_failure(inst, sc.x_prime, sc.y_prime, thr, pre.fixed_y, pre.fixed_x)
            worst_gap = max(worst_gap, exact - est)
            prefixes += 1
        if cert:
            sol = derandomized_round(inst, sc, params)
            kernel_agree &= tuple(sol.y) == prefix.fixed_y and tuple(sol.x) == prefix.fixed_x
    _verdict(
        2,
        "estimator soundness",
        {
            "estimator >= exact failure - 1e-9": worst_gap <= 1e-9,
            "conditional expectation identity 1e-12": worst_identity <= 1e-12,
            "kernel sweep follows the direct estimator": kernel_agree,
        },
        f"{instances} instances ({certified} certified), {prefixes} prefixes, "
        f"max(exact - estimator) = {worst_gap:.3g}, identity error {worst_identity:.3g}",
    )


# ----------------------------------------------------------------- criterion 3


def test_c3_certified_quality_bound():
    rng = np.random.default_rng(3003)
    certified = ok = 0
    worst = math.inf
    for _ in range(300):
        inst, _ = normalize(small_instance(rng, 20))
        lp = solve_lp(relax(inst))
        cal = calibrate(inst, lp)
        if not cal:
            continue
        certified += 1
        sc = scale(lp, cal.params)
        dev = deviation_from_scaled(inst, sc, cal.params)
        sol = derandomized_round(inst, sc, cal.params)
        margin = objective(inst, sol) - dev.mu_obj * (1.0 - dev.delta_obj)
        worst = min(worst, margin)
        ok += margin >= 0.0
    _verdict(
        3,
        "certified quality bound",
        {"objective >= mu(1 - delta) on every certified run": ok == certified, "nonvacuous (>= 100)": certified >= 100},
        f"{ok}/{certified} certified runs meet the bound, smallest margin {worst:.4g}",
    )


# ----------------------------------------------------------------- criterion 4


def _c4_points(rng, inst, lp):
    """A box point and, when the objective has y weight, one where the low-objective event can occur."""
    points = [RoundingParams.from_gamma_p(rng.uniform(1.2, 3.0), rng.uniform(1.2, 3.0))]
    cx, cy = float(inst.c1 @ lp.x_hat), float(inst.c2 @ lp.y_hat)
    if cy > 0:
        # p putting the objective deviation at a uniform target in (0.1, 0.9)
        target = rng.uniform(0.1, 0.9)
        p = max(((cx + cy) / (target * DEFAULT_BETA) - cx) / cy, 1.0)
        points.append(RoundingParams.from_gamma_p(rng.uniform(1.2, 3.0), p))
    return points


def test_c4_single_event_bounds():
    rng = np.random.default_rng(4004)
    samples = 100_000
    events = {"E": 0, "Q": 0, "R": 0, "obj": 0}
    above = dict.fromkeys(events, 0)
    worst = -math.inf
    draw = 0
    for it in range(20):
        m, k = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        raw = random_instance(rng, int(rng.integers(1, 4)), m, k, int(rng.integers(0, 3)), int(rng.integers(0, 3)))
        inst, _ = normalize(raw)
        lp = solve_lp(relax(inst))
        for params in _c4_points(rng, inst, lp):
            sc = scale(lp, params)
            dev = deviation_params(inst, sc, lp, params)
            bounds = failure_bounds(inst, sc, lp, params)
            X, Y = sample_many(sc, 10_000 * draw, samples)
            draw += 1
            hits = bad_events(inst, dev, X, Y)
            for key, bound in (("E", bounds.E), ("Q", bounds.Q), ("R", bounds.R), ("obj", np.array([bounds.obj]))):
                freq = np.asarray(hits[key], float).reshape(samples, -1).mean(axis=0)
                for f, b in zip(freq, bound):
                    events[key] += 1
                    excess = f - (b + 3.0 * binomial_sigma(b, samples))
                    worst = max(worst, excess)
                    above[key] += excess > 0
    counts = ", ".join(f"{key} {above[key]}/{events[key]}" for key in events)
    _verdict(
        4,
        "single-event probability bounds",
        {"every frequency within bound + 3 sigma": sum(above.values()) == 0},
        f"{sum(events.values())} events on 20 instances; above bound + 3 sigma: {counts}; worst excess {worst:.3g}",
    )


# ----------------------------------------------------------------- criterion 5


def _large_y_instance(rng) -> GpipInstance:
    """y-dominant instance with coupling coefficients in [0.5, 1] and roomy rows."""
    m, k = int(rng.integers(5, 30)), int(rng.integers(40, 120))
    n, d1, d2 = int(rng.integers(1, 4)), int(rng.integers(0, 3)), int(rng.integers(1, 3))
    A = rng.random((n, m)) * (rng.random((n, m)) < 0.3)
    B = rng.uniform(0.5, 1.0, (n, k)) * (rng.random((n, k)) < 0.5)
    U = rng.random((d1, m)) * (rng.random((d1, m)) < 0.5)
    V = rng.random((d2, k)) * (rng.random((d2, k)) < 0.3)
    return GpipInstance(
        A, B, U, V, rng.uniform(5.0, 20.0, d1), rng.uniform(10.0, 40.0, d2), rng.random(m) * 0.1, rng.random(k)
    )


def test_c5_union_bounds_in_regime():
    rng = np.random.default_rng(5005)
    samples = 100_000
    limits = {"E": 0.2, "Q": 0.2, "R": 0.2, "obj": 0.4}
    qualifying = 0
    worst = {key: 0.0 for key in limits}
    ok = True
    for it in range(40):
        inst, _ = normalize(_large_y_instance(rng))
        lp = solve_lp(relax(inst))
        cal = calibrate(inst, lp)
        if not cal or lp.objective_value / cal.params.alpha <= 5.0:
            continue
        qualifying += 1
        sc = scale(lp, cal.params)
        dev = deviation_params(inst, sc, lp, cal.params)
        X, Y = sample_many(sc, 7_000_000 + it, samples)
        hits = bad_events(inst, dev, X, Y)
        for key, lim in limits.items():
            h = np.asarray(hits[key]).reshape(samples, -1)
            freq = float(h.any(axis=1).mean()) if h.shape[1] else 0.0
            worst[key] = max(worst[key], freq)
            ok &= freq < lim + 3.0 * binomial_sigma(lim, samples)
    detail = ", ".join(f"max P({k}) = {v:.4f}" for k, v in worst.items())
    _verdict(
        5,
        "union bounds in the certified regime",
        {"all union frequencies below limit + 3 sigma": ok, "nonvacuous (>= 10 qualifying)": qualifying >= 10},
        f"{qualifying} qualifying instances; {detail}",
    )


# ----------------------------------------------------------------- criterion 6


def test_c6_desk_scale_experiment():
    cfg = ExperimentConfig(
        size_class=["small", "medium"], horizons=[1, 3, 5], repetitions=20, seed=0, method="deterministic"
    )
    t0 = time.perf_counter()
    rows = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    small1 = next(r for r in rows if r.size_class == "small" and r.horizon == 1)
    cells = "; ".join(f"{r.size_class}/N={r.horizon} gap {r.gap_mean:.3f} t {r.time_mean:.3f}s" for r in rows)
    _verdict(
        6,
        "desk-scale gap and time table",
        {
            "feasible_fraction = 1 in every cell": all(r.feasible_fraction == 1.0 for r in rows),
            "no failed repetitions": all(r.failures == 0 for r in rows),
            "gap_mean <= 0.85 in every cell": all(r.gap_mean <= 0.85 for r in rows),
            "small/N=1 time within 100x of 0.01 s": small1.time_mean <= 1.0,
            "total < 10 min": elapsed < 600.0,
        },
        f"{cells}; total {elapsed:.0f} s",
    )


# ----------------------------------------------------------------- criterion 7


def _random_lp(rng) -> LinearProgram:
    nv = int(rng.integers(1, 7))
    rows = int(rng.integers(0, 6))
    if rng.random() < 0.5:
        # packing-style: nonnegative data, feasible at zero
        G = rng.random((rows, nv)) * (rng.random((rows, nv)) < 0.7)
        h = rng.uniform(0.2, 2.0, rows)
        lo, hi = np.zeros(nv), np.ones(nv)
    else:
        # signed data, shifted bounds; may be infeasible
        G = rng.uniform(-1.0, 1.0, (rows, nv))
        h = rng.uniform(-1.0, 1.5, rows)
        lo = rng.uniform(-1.0, 0.5, nv)
        hi = lo + rng.uniform(0.1, 2.0, nv)
    return LinearProgram(rng.uniform(-1.0, 1.0, nv), G, h, lo, hi)


def test_c7_lp_correctness():
    rng = np.random.default_rng(7007)
    agree = infeasible = 0
    worst = 0.0
    for _ in range(100):
        lp = _random_lp(rng)
        ref = lp_vertex_optimum(lp.objective, lp.constraint_matrix, lp.rhs, lp.lower, lp.upper)
        sol = solve_lp(lp)
        if ref == -math.inf:
            infeasible += 1
            agree += sol.status == "infeasible"
            continue
        err = abs(sol.objective_value - ref) if sol.optimal else math.inf
        worst = max(worst, err)
        agree += err <= 1e-9
    t1 = solve_lp(relax(tiny1()))
    tiny_ok = (
        t1.optimal
        and abs(t1.objective_value - 2.0) <= 1e-12
        and np.allclose(t1.x_hat, [1.0, 0.0])
        and np.allclose(t1.y_hat, [1.0])
    )
    _verdict(
        7,
        "LP correctness",
        {"100 LPs match vertex enumeration": agree == 100, "tiny-1 objective 2": tiny_ok},
        f"{agree}/100 agree ({infeasible} infeasible), worst error {worst:.2g}, tiny-1 value {t1.objective_value!r}",
    )


# ----------------------------------------------------------------- criterion 8


def _tiny_catalog(rng) -> tuple[Catalog, PlanConfig]:
    K, R, N = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
    ingredients = tuple(
        Ingredient(f"i{i}", float(rng.choice([2.0, 3.0, 4.0])), float(rng.choice([1.0, 2.0, 3.0]))) for i in range(K)
    )
    recipes = []
    for r in range(R):
        used = [i for i in range(K) if rng.random() < 0.7] or [int(rng.integers(K))]
        recipes.append(
            Recipe(
                f"r{r}",
                float(rng.integers(10, 61)),
                {f"i{i}": float(rng.choice([1.0, 2.0])) for i in used},
                {"kcal": float(rng.integers(200, 800))},
                round(float(rng.random()), 3),
            )
        )
    config = PlanConfig(
        horizon=N,
        time_budget=float(rng.integers(40, 121)),
        money_budget=float(rng.integers(3, 9)),
        nutrient_caps={"kcal": float(rng.integers(600, 1600))},
        repetition_caps={f"r{r}": int(rng.integers(0, 3)) for r in range(R) if rng.random() < 0.5},
        ingredient_utility=[round(float(rng.random()), 3) * (rng.random() < 0.5) for _ in range(K)],
    )
    return Catalog(ingredients, tuple(recipes)), config


def test_c8_lowering_soundness():
    rng = np.random.default_rng(8008)
    models = plans = points = feasible_plans = 0
    mismatched = 0
    obj_err = 0.0
    perish_ok = True
    while models < 60:
        catalog, config = _tiny_catalog(rng)
        model = build_model(catalog, config)
        bm, _ = binarize(model)
        raw, vmap = lower(bm)
        inst, rec = normalize(raw)
        N, R, K = model.N, model.R, model.K
        # box implied by the repetition caps and the money budget alone
        x_box = np.asarray(model.f, int)
        y_box = np.floor(model.Bbudget / model.b + 1e-9).astype(int)
        box_size = np.prod((x_box + 1.0) ** N) * np.prod((y_box + 1.0) ** N)
        if box_size > 200_000 or inst.m + inst.k > 16 or inst.m != raw.m or inst.k != raw.k:
            continue
        models += 1
        args = (model.P, model.F, model.h, model.f, model.t, model.T, model.b, model.Bbudget)

        # every integer plan in the box
        X, Y = integer_plan_box(N, x_box, y_box)
        ref_bad = plan_infeasible(*args, X, Y)
        fits = np.all(X <= bm.x_caps, axis=(1, 2)) & np.all(Y <= bm.y_caps, axis=(1, 2))
        xb = (vmap.x_replica[None, :] < X[:, vmap.x_period - 1, vmap.x_index]).astype(float)
        yb = (vmap.y_replica[None, :] < Y[:, vmap.y_period - 1, vmap.y_index]).astype(float)
        xb, yb = xb[:, rec.x_kept], yb[:, rec.y_kept]
        gpip_ok = fits & feasible_mask(inst.A, inst.B, inst.U, inst.V, inst.u, inst.v, xb, yb, FEAS)
        mismatched += int(np.sum(gpip_ok != ~ref_bad))
        plans += X.shape[0]
        good = np.flatnonzero(~ref_bad)
        feasible_plans += good.size
        util = plan_utility(model.v, model.w, X[good], Y[good])
        lifted = np.array([rec.raw_objective(val) for val in xb[good] @ inst.c1 + yb[good] @ inst.c2])
        obj_err = max(obj_err, float(np.abs(lifted - util).max(initial=0.0)))

        # every binary point of the compiled instance
        Z = binary_grid(inst.m + inst.k)
        xs, ys = Z[:, : inst.m], Z[:, inst.m :]
        ok = feasible_mask(inst.A, inst.B, inst.U, inst.V, inst.u, inst.v, xs, ys, FEAS)
        Xd = np.zeros((Z.shape[0], N, R))
        Yd = np.zeros((Z.shape[0], N, K))
        np.add.at(Xd, (slice(None), vmap.x_period[rec.x_kept] - 1, vmap.x_index[rec.x_kept]), xs)
        np.add.at(Yd, (slice(None), vmap.y_period[rec.y_kept] - 1, vmap.y_index[rec.y_kept]), ys)
        mismatched += int(np.sum(ok != ~plan_infeasible(*args, Xd, Yd)))
        points += Z.shape[0]
        for j in np.flatnonzero(ok)[:200]:
            plan = plan_from_counts(model, Xd[j], Yd[j])
            used = Xd[j] @ model.P.T
            recent = Yd[j].copy()
            recent[1:] += Yd[j][:-1]
            # cooking draws only on the last two purchases, and the pantry matches the recurrence
            perish_ok &= bool(np.all(used <= recent + 1e-9))
            z = Yd[j].copy()
            z[1:] += Yd[j][:-1] - used[:-1]
            perish_ok &= bool(np.allclose(plan.leftovers, z, atol=0.0, rtol=0.0))
    _verdict(
        8,
        "lowering soundness",
        {
            "feasible sets agree": mismatched == 0,
            "objective preserved to 1e-9": obj_err <= 1e-9,
            "two-period perishability": perish_ok,
        },
        f"{models} models, {plans} integer plans ({feasible_plans} feasible) and {points} binary points, "
        f"{mismatched} disagreements, objective error {obj_err:.2g}",
    )


if __name__ == "__main__":
    tests = [obj for name, obj in sorted(globals().items()) if name.startswith("test_c")]
    failures = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failures += 1
    from helpers import ACCEPTANCE_LINES

    for entry in sorted(ACCEPTANCE_LINES):
        print(format_line(*entry))
    sys.exit(1 if failures else 0)
