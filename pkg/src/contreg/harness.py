"""Experiment harness: configs, Monte Carlo sweeps, CSV output, and rate fits.

A sweep is fully determined by its config: trial (k, i) draws its ordering
from the stream ``(base_seed, k, i)``, rows are emitted sorted by (k, trial),
and floats are serialized with 17 significant digits, so identical configs
produce byte-identical CSV files regardless of thread count.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import schedules as sched_mod
from .adversarial import any_alg_lb_collection, seen_task_lb_collection
from .metrics import average_loss, seen_task_loss, summarize
from .orderings import derived_seed, explicit_ordering, sample_ordering, stream
from .schemes import SCHEME_KINDS, run_continual
from .surrogates import (build_budgeted_surrogate, build_regularized_surrogate,
                         sandwich_check, value_and_grad)
from .tasks import (collection_from_dict, generate_aligned_pairs,
                    generate_realizable, min_norm_solution, new_collection,
                    RealizableSpec)

THREAD_ENV_VAR = "CONTREG_MAX_THREADS"

_SCHEDULE_KINDS = {
    "fixed-coefficient": (),
    "fixed-budget": ("gamma",),
    "increasing-coefficient": (),
    "increasing-budget": ("n_choice",),
    "custom": ("lam", "gamma", "n_steps", "eta"),
    "none": (),
}

_ORDERING_KINDS = ("with-replacement", "without-replacement")


class ConfigError(ValueError):
    """Raised for malformed experiment configs (strict parsing)."""


@dataclass(frozen=True)
class ExperimentConfig:
    collection: dict
    scheme: str
    schedule: dict
    ordering: str
    k_grid: tuple
    trials: int
    base_seed: int
    out: str | None = None


def _require_keys(d, required, optional, where):
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown {where} fields: {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"missing {where} fields: {sorted(missing)}")


def parse_config(data):
    """Validate a raw config mapping; unknown fields are errors."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(data, ["collection", "scheme", "schedule", "ordering",
                         "k_grid", "trials", "base_seed"], ["out"], "config")

    col = data["collection"]
    if not isinstance(col, dict):
        raise ConfigError("collection must be an object")
    if "path" in col:
        _require_keys(col, ["path"], [], "collection")
    else:
        gen = col.get("generator", "gaussian")
        if gen == "gaussian":
            _require_keys(col, ["d", "M", "n", "radius", "seed"], ["generator"],
                          "collection")
        elif gen == "aligned-pairs":
            _require_keys(col, ["d", "pairs", "angle", "radius", "seed"],
                          ["generator"], "collection")
        else:
            raise ConfigError(f"unknown collection generator: {gen!r}")

    if data["scheme"] not in SCHEME_KINDS:
        raise ConfigError(f"unknown scheme kind: {data['scheme']!r}")

    sch = data["schedule"]
    if not isinstance(sch, dict) or "kind" not in sch:
        raise ConfigError("schedule must be an object with a 'kind' field")
    kind = sch["kind"]
    if kind not in _SCHEDULE_KINDS:
        raise ConfigError(f"unknown schedule kind: {kind!r}")
    allowed = set(_SCHEDULE_KINDS[kind]) | {"kind", "unregularized_first"}
    unknown = set(sch) - allowed
    if unknown:
        raise ConfigError(f"unknown schedule fields for {kind!r}: {sorted(unknown)}")
    if kind == "fixed-budget" and "gamma" not in sch:
        raise ConfigError("fixed-budget schedule needs 'gamma'")

    if data["ordering"] not in _ORDERING_KINDS:
        raise ConfigError(f"unknown ordering kind: {data['ordering']!r}")

    k_grid = data["k_grid"]
    if (not isinstance(k_grid, (list, tuple)) or not k_grid
            or any(not isinstance(k, int) or k < 1 for k in k_grid)
            or any(b <= a for a, b in zip(k_grid, k_grid[1:]))):
        raise ConfigError("k_grid must be a nonempty strictly increasing list "
                          "of positive integers")
    if kind == "custom" and len(k_grid) != 1:
        raise ConfigError("custom schedules support a single-k grid only")

    trials = data["trials"]
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials must be an integer >= 1")
    base_seed = data["base_seed"]
    if not isinstance(base_seed, int) or base_seed < 0:
        raise ConfigError("base_seed must be a nonnegative integer (up to 64 bits)")

    return ExperimentConfig(
        collection=dict(col), scheme=data["scheme"], schedule=dict(sch),
        ordering=data["ordering"], k_grid=tuple(k_grid), trials=trials,
        base_seed=base_seed, out=data.get("out"),
    )


def load_config(path):
    with open(path) as fh:
        return parse_config(json.load(fh))


def build_collection(spec):
    if "path" in spec:
        with open(spec["path"]) as fh:
            return collection_from_dict(json.load(fh))
    if spec.get("generator", "gaussian") == "aligned-pairs":
        return generate_aligned_pairs(pairs=spec["pairs"], angle=spec["angle"],
                                      d=spec["d"], target_radius=spec["radius"],
                                      seed=spec["seed"])
    return generate_realizable(RealizableSpec(
        d=spec["d"], M=spec["M"], n=spec["n"], radius=spec["radius"],
        seed=spec["seed"]))


def build_schedule(schedule, R, k):
    """Instantiate a schedule dict for one horizon k (None for kind 'none')."""
    kind = schedule["kind"]
    first = bool(schedule.get("unregularized_first", False))
    if kind == "none":
        return None
    if kind == "fixed-coefficient":
        spec = sched_mod.fixed_coefficient(R, k)
    elif kind == "fixed-budget":
        spec = sched_mod.fixed_budget(R, schedule["gamma"], k)
    elif kind == "increasing-coefficient":
        spec = sched_mod.increasing_coefficient(R, k)
    elif kind == "increasing-budget":
        spec = sched_mod.increasing_budget(R, k, schedule.get("n_choice", 1))
    elif kind == "custom":
        return sched_mod.custom_schedule(
            k, lam=schedule.get("lam"), gamma=schedule.get("gamma"),
            n_steps=schedule.get("n_steps"), eta=schedule.get("eta"),
            unregularized_first=first)
    else:
        raise ConfigError(f"unknown schedule kind: {kind!r}")
    if first:
        spec = sched_mod.ScheduleSpec(
            kind=spec.kind, k=spec.k, eta=spec.eta, nu=spec.nu, lam=spec.lam,
            gamma=spec.gamma, n_steps=spec.n_steps, unregularized_first=True,
            meta=spec.meta)
    return spec


CSV_FIELDS = ("scheme", "schedule", "ordering", "M", "d", "R", "k", "trial",
              "seed", "avg_loss", "seen_loss", "degradation", "dist_to_wstar")


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    schedule: str
    ordering: str
    M: int
    d: int
    R: float
    k: int
    trial: int
    seed: int
    avg_loss: float
    seen_loss: float
    degradation: float
    dist_to_wstar: float

    def __post_init__(self):
        for name in ("avg_loss", "seen_loss", "dist_to_wstar"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if not math.isfinite(self.degradation):
            raise ValueError(f"degradation must be finite, got {self.degradation}")


def resolve_threads(threads=None):
    cap = os.environ.get(THREAD_ENV_VAR)
    cap = int(cap) if cap else None
    if threads is None:
        threads = cap or 1
    if cap is not None:
        threads = min(threads, cap)
    return max(1, threads)


def run_experiment(cfg, threads=None):
    """Run the configured sweep; one row per (k, trial), sorted by (k, trial)."""
    col = build_collection(cfg.collection)
    R = col.radius
    w_star = col.w_star if col.w_star is not None else min_norm_solution(col)
    per_k = {k: build_schedule(cfg.schedule, R, k) for k in cfg.k_grid}

    def one(job):
        k, i = job
        ordering = sample_ordering(cfg.ordering, col.M, k, cfg.base_seed, path=(k, i))
        traj = run_continual(col, ordering, per_k[k], cfg.scheme)
        rec = summarize(traj, col, w_star)
        return ResultRow(
            scheme=cfg.scheme, schedule=cfg.schedule["kind"], ordering=cfg.ordering,
            M=col.M, d=col.d, R=R, k=k, trial=i,
            seed=derived_seed(cfg.base_seed, k, i),
            avg_loss=rec.avg_loss, seen_loss=rec.seen_loss,
            degradation=rec.degradation, dist_to_wstar=rec.dist_to_wstar)

    jobs = [(k, i) for k in cfg.k_grid for i in range(cfg.trials)]
    threads = resolve_threads(threads)
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(job) for job in jobs]
    rows.sort(key=lambda r: (r.k, r.trial))
    return rows


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in rows:
            d = asdict(row)
            writer.writerow([_fmt(d[f]) for f in CSV_FIELDS])


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            rows.append(ResultRow(
                scheme=rec["scheme"], schedule=rec["schedule"],
                ordering=rec["ordering"], M=int(rec["M"]), d=int(rec["d"]),
                R=float(rec["R"]), k=int(rec["k"]), trial=int(rec["trial"]),
                seed=int(rec["seed"]), avg_loss=float(rec["avg_loss"]),
                seen_loss=float(rec["seen_loss"]),
                degradation=float(rec["degradation"]),
                dist_to_wstar=float(rec["dist_to_wstar"])))
    return rows


def aggregate(rows, metric="avg_loss"):
    """Per-k Monte Carlo summaries: (k, mean, standard error, n_trials)."""
    by_k = {}
    for row in rows:
        by_k.setdefault(row.k, []).append(getattr(row, metric))
    out = []
    for k in sorted(by_k):
        vals = np.asarray(by_k[k])
        se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out.append((k, float(vals.mean()), se, len(vals)))
    return out


@dataclass(frozen=True)
class RateFit:
    """OLS fit of ln(loss) on ln(k); slope is the empirical rate exponent."""

    slope: float
    intercept: float
    residual: float
    n_points: int


def fit_rate(points):
    points = list(points)
    if len(points) < 3:
        raise ValueError(f"rate fit needs at least 3 points, got {len(points)}")
    bad = [k for k, loss in points if not loss > 0]
    if bad:
        raise ValueError(f"rate fit needs strictly positive losses; "
                         f"nonpositive at k={bad}")
    logk = np.log([k for k, _ in points])
    logl = np.log([loss for _, loss in points])
    slope, intercept = np.polyfit(logk, logl, 1)
    residual = float(np.sum((slope * logk + intercept - logl) ** 2))
    return RateFit(slope=float(slope), intercept=float(intercept),
                   residual=residual, n_points=len(points))


# ---------------------------------------------------------------------------
# Lower-bound scenario runners


def scheme_runner(scheme, schedule_kind, schedule_params=None, w0=None):
    """Probe that runs a scheme over an explicit task sequence and returns w_k."""
    params = dict(schedule_params or {})
    params["kind"] = schedule_kind

    def probe(tasks):
        col = new_collection(tasks)
        k = len(tasks)
        spec = build_schedule(params, col.radius, k)
        ordering = explicit_ordering(np.arange(1, k + 1), k)
        traj = run_continual(col, ordering, spec, scheme, w0=w0)
        return traj.iterates[-1]

    return probe


def run_seen_task_floor(k, trials, base_seed, d=2, scheme="regularized",
                        schedule_kind="increasing-coefficient",
                        schedule_params=None):
    """Empirical Pr[seen-task loss >= 1/(144 k)] on the hard seen-task collection."""
    scenario = seen_task_lb_collection(k, d)
    col = scenario.collection
    params = dict(schedule_params or {})
    params["kind"] = schedule_kind
    spec = build_schedule(params, col.radius, k)
    threshold = scenario.threshold(k)
    hits = 0
    for i in range(trials):
        ordering = sample_ordering("with-replacement", col.M, k, base_seed, path=(k, i))
        traj = run_continual(col, ordering, spec, scheme, w0=scenario.recommended_w0)
        if seen_task_loss(traj.iterates[-1], col, ordering.indices) >= threshold:
            hits += 1
    prob = hits / trials
    return {"scenario": "seen-task", "scheme": scheme, "schedule": schedule_kind,
            "k": k, "trials": trials, "threshold": threshold,
            "empirical_probability": prob, "floor": scenario.success_prob_floor,
            "passed": bool(prob >= scenario.success_prob_floor)}


def run_any_alg_mean(k, trials, base_seed, d=2, scheme="regularized",
                     schedule_kind="increasing-coefficient",
                     schedule_params=None, probe_trials=1000):
    """Mean excess average loss on the adversarial collection built against the scheme."""
    probe = scheme_runner(scheme, schedule_kind, schedule_params)
    scenario = any_alg_lb_collection(k, d, probe, probe_trials=probe_trials)
    col = scenario.collection
    params = dict(schedule_params or {})
    params["kind"] = schedule_kind
    spec = build_schedule(params, col.radius, k)
    base = average_loss(col.w_star, col)
    total = 0.0
    for i in range(trials):
        ordering = sample_ordering("with-replacement", col.M, k, base_seed, path=(k, i))
        traj = run_continual(col, ordering, spec, scheme)
        total += average_loss(traj.iterates[-1], col) - base
    mean_excess = total / trials
    threshold = scenario.threshold(k)
    return {"scenario": "any-algorithm", "scheme": scheme, "schedule": schedule_kind,
            "k": k, "trials": trials, "threshold": threshold,
            "mean_excess": mean_excess, "adversary_sign": scenario.meta["adversary_sign"],
            "passed": bool(mean_excess >= threshold)}


# ---------------------------------------------------------------------------
# Verification suites


@dataclass(frozen=True)
class CheckResult:
    label: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class SuiteReport:
    name: str
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


SUITE_NAMES = ("reductions", "sandwich", "certificate", "schedules", "adversarial")


def _random_realizable(rng, d_max=10):
    d = int(rng.integers(2, d_max + 1))
    M = int(rng.integers(2, 7))
    n = int(rng.integers(1, d + 1))
    return generate_realizable(RealizableSpec(
        d=d, M=M, n=n, radius=float(rng.uniform(0.5, 3.0)),
        seed=int(rng.integers(0, 2 ** 32))))


def _suite_reductions(seed):
    rng = stream(seed, 101)
    checks = []
    worst_reg = worst_bud = worst_eta = 0.0
    configs = 20
    k = 100
    for _ in range(configs):
        col = _random_realizable(rng)
        tol = 1e-8 * (1.0 + float(np.linalg.norm(col.w_star)))
        order = sample_ordering("with-replacement", col.M, k,
                                int(rng.integers(0, 2 ** 32)))
        lam = rng.uniform(1e-2, 1e2, size=k)
        eta = rng.uniform(1e-2, 1e1, size=k)
        sched_reg = sched_mod.custom_schedule(k, lam=lam, eta=eta)
        a = run_continual(col, order, sched_reg, "regularized")
        b = run_continual(col, order, sched_reg, "igd-of-regularized")
        worst_reg = max(worst_reg, float(np.abs(a.iterates - b.iterates).max()) / tol)

        n_steps = rng.integers(1, 11, size=k)
        gamma = rng.uniform(1e-6, 0.9 / col.radius ** 2, size=k)
        sched_bud = sched_mod.custom_schedule(k, gamma=gamma, n_steps=n_steps, eta=eta)
        a = run_continual(col, order, sched_bud, "budgeted")
        b = run_continual(col, order, sched_bud, "igd-of-budgeted")
        worst_bud = max(worst_bud, float(np.abs(a.iterates - b.iterates).max()) / tol)

        sched1 = sched_mod.custom_schedule(k, lam=lam, eta=np.ones(k))
        sched7 = sched_mod.custom_schedule(k, lam=lam, eta=np.full(k, 7.0))
        a = run_continual(col, order, sched1, "igd-of-regularized")
        b = run_continual(col, order, sched7, "igd-of-regularized")
        worst_eta = max(worst_eta, float(np.abs(a.iterates - b.iterates).max()))
    checks.append(CheckResult(
        "regularized scheme matches its surrogate-step twin",
        worst_reg <= 1.0, f"worst deviation {worst_reg:.3e} of tolerance"))
    checks.append(CheckResult(
        "budgeted scheme matches its surrogate-step twin",
        worst_bud <= 1.0, f"worst deviation {worst_bud:.3e} of tolerance"))
    checks.append(CheckResult(
        "surrogate iterates invariant to bookkeeping step size",
        worst_eta <= 1e-12, f"worst deviation {worst_eta:.3e}"))
    return checks


def _suite_sandwich(seed):
    rng = stream(seed, 102)
    failures = 0
    total = 200
    for _ in range(total):
        col = _random_realizable(rng, d_max=8)
        task = col.tasks[int(rng.integers(0, col.M))]
        w = rng.standard_normal(col.d) * rng.uniform(0.1, 10)
        if rng.random() < 0.5:
            s = build_regularized_surrogate(task, float(rng.uniform(1e-2, 1e2)),
                                            float(rng.uniform(1e-2, 1e1)))
        else:
            r2 = task.spectral_norm ** 2
            s = build_budgeted_surrogate(task, float(rng.uniform(1e-6, 0.9 / max(r2, 1e-12))),
                                         int(rng.integers(1, 11)),
                                         float(rng.uniform(1e-2, 1e1)))
        rep = sandwich_check(s, task, w)
        if not (rep.lower_ok and rep.upper_ok):
            failures += 1
    checks = [CheckResult("two-sided excess-loss bounds hold",
                          failures == 0, f"{failures}/{total} triples failed")]

    worst = 0.0
    for _ in range(50):
        col = _random_realizable(rng, d_max=8)
        task = col.tasks[0]
        r2 = task.spectral_norm ** 2
        eta = float(rng.uniform(1e-2, 1e1))
        s = build_regularized_surrogate(task, 1.0 / eta, eta)
        if s.beta > 0:
            worst = max(worst, (r2 / s.beta) - (1.0 + eta * r2))
        n = int(rng.integers(1, 11))
        if r2 > 0:
            gamma = min(eta / n, 0.9 / r2 / 2)
            s = build_budgeted_surrogate(task, gamma, n, gamma * n)
            if s.beta > 0:
                worst = max(worst, (r2 / s.beta) - (1.0 + gamma * n * r2))
    checks.append(CheckResult(
        "upper constant obeys R^2/beta <= 1 + eta R^2 at the tied settings",
        worst <= 1e-9, f"worst slack {worst:.3e}"))

    worst_fd = 0.0
    for _ in range(20):
        col = _random_realizable(rng, d_max=6)
        task = col.tasks[0]
        s = build_regularized_surrogate(task, 1.0, 1.0)
        w = rng.standard_normal(col.d)
        _, g = value_and_grad(s, w)
        h = 1e-6
        for j in range(col.d):
            e = np.zeros(col.d)
            e[j] = h
            fp, _ = value_and_grad(s, w + e)
            fm, _ = value_and_grad(s, w - e)
            fd = (fp - fm) / (2 * h)
            worst_fd = max(worst_fd, abs(fd - g[j]) / (1.0 + abs(g[j])))
    checks.append(CheckResult("gradients match central finite differences",
                              worst_fd <= 1e-6, f"worst relative error {worst_fd:.3e}"))
    return checks


def _suite_certificate(_seed):
    failures = []
    for beta in (0.5, 1.0, 4.0):
        for k in range(2, 501):
            rep = sched_mod.certificate_check(k, beta, 3.0 / (13.0 * beta))
            if not rep.passed:
                failures.append((k, beta))
    return [CheckResult("weight certificate nonnegative with c_k >= eta/k "
                        "for k in 2..500, beta in {0.5, 1, 4}",
                        not failures, f"failures: {failures[:5]}")]


def _suite_schedules(_seed):
    checks = []
    ok = True
    detail = ""
    for k in (2, 5, 17, 100):
        inc = sched_mod.increasing_coefficient(1.3, k)
        if np.max(np.abs(inc.lam * inc.eta - 1.0)) > 0:
            ok, detail = False, f"lam*eta != 1 at k={k}"
        if not np.all(np.diff(inc.lam) > 0):
            ok, detail = False, f"coefficients not strictly increasing at k={k}"
        bud = sched_mod.increasing_budget(1.3, k, n_choice=3)
        if np.max(np.abs(bud.eta / (bud.gamma * bud.n_steps) - 1.0)) > 0:
            ok, detail = False, f"eta/(gamma*N) != 1 at k={k}"
        if not np.all(np.diff(bud.gamma * bud.n_steps) < 0):
            ok, detail = False, f"budget strength not strictly decreasing at k={k}"
    checks.append(CheckResult("increasing schedules keep their exact identities",
                              ok, detail or "lam*eta = 1 and eta/(gamma*N) = 1"))

    ok = True
    detail = ""
    for k in (3, 10, 1000):
        spec = sched_mod.fixed_coefficient(2.0, k)
        r2 = 4.0
        implied = spec.eta[0] * (r2 / (r2 + spec.lam[0]))
        if abs(implied - 1.0 / np.log(k)) > 1e-12:
            ok, detail = False, f"eta*beta_r != 1/ln k at k={k}"
    checks.append(CheckResult("fixed coefficient lands smoothness on 1/ln k",
                              ok, detail or "within 1e-12"))

    grid = [0.5, 0.1, 0.01, 0.001]
    stars = [sched_mod.fixed_budget(1.0, g, 20).meta["n_star"] for g in grid]
    checks.append(CheckResult("exact budget grows as the inner step shrinks",
                              all(b > a for a, b in zip(stars, stars[1:])),
                              f"n_star over gamma grid: {[f'{s:.2f}' for s in stars]}"))

    steps = sched_mod.linear_decay_steps(3.0 / 13.0, 12, 1.0)
    ok = (abs(steps[0] - 3.0 / 13.0) < 1e-15
          and abs(steps[-1] - 2 * (3.0 / 13.0) / 13.0) < 1e-15)
    checks.append(CheckResult("linear decay endpoints", ok,
                              f"eta_1={steps[0]:.6f}, eta_k={steps[-1]:.6f}"))
    return checks


def _suite_adversarial(seed):
    checks = []
    rep = run_seen_task_floor(16, 400, seed)
    checks.append(CheckResult(
        "seen-task floor at k=16",
        rep["passed"],
        f"Pr[seen >= 1/(144k)] = {rep['empirical_probability']:.3f} "
        f">= {rep['floor']}"))
    for scheme, kind in (("regularized", "increasing-coefficient"),
                         ("unregularized", "none")):
        rep = run_any_alg_mean(16, 400, seed, scheme=scheme, schedule_kind=kind,
                               probe_trials=50)
        checks.append(CheckResult(
            f"any-algorithm mean excess at k=16 ({scheme})",
            rep["passed"],
            f"mean {rep['mean_excess']:.3e} >= threshold {rep['threshold']:.3e}"))
    return checks


def verify_suite(name, seed=20240801):
    """Run one of the named property suites and report per-check results."""
    suites = {
        "reductions": _suite_reductions,
        "sandwich": _suite_sandwich,
        "certificate": _suite_certificate,
        "schedules": _suite_schedules,
        "adversarial": _suite_adversarial,
    }
    if name not in suites:
        raise ValueError(f"unknown suite: {name!r} (choose from {SUITE_NAMES})")
    return SuiteReport(name=name, checks=tuple(suites[name](seed)))
