"""Monte Carlo ensembles confronted with the deterministic predictions.

Every experiment runs R independent replicas per configuration; replica r of
a run with ``n`` vertices uses the simulator seed ``replica_seed(base_seed,
n, r)`` (see :mod:`bflab.rng`), so reports are bit-reproducible from
(rule, base_seed, n, R) alone and sweeps never share streams.  Statistics
are kept per replica and aggregated by pure merging: concatenating two
half-ensembles with disjoint replica ranges reproduces the full ensemble
exactly.

Replicas run independently (optionally on a thread pool; the simulation
kernel releases the GIL) and the replica-to-thread assignment cannot affect
any reported number.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ode
from .errors import InvalidArgumentError
from .process import ProcessRule, new_process, run_until
from .rng import replica_seed

BF = ProcessRule.bohman_frieze()


@dataclass(frozen=True)
class EnsembleConfig:
    rule: ProcessRule
    n_list: tuple
    replicas: int
    base_seed: int
    checkpoints: tuple = ()
    epsilon_list: tuple = ()
    L: int = 100
    i_report: int = 10
    threads: int = 0               # 0 means all available cores

    def __post_init__(self):
        if self.replicas < 2:
            raise InvalidArgumentError("need at least 2 replicas")
        if not self.n_list:
            raise InvalidArgumentError("n_list must be non-empty")
        if list(self.checkpoints) != sorted(self.checkpoints):
            raise InvalidArgumentError("checkpoints must be sorted")


@dataclass
class MetricRow:
    n: int
    t: float
    name: str
    values: list
    mean: float = 0.0
    se: float = 0.0
    target: float = None
    z: float = None

    def finalize(self):
        vals = np.asarray(self.values, dtype=float)
        self.mean = float(vals.mean())
        self.se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        if self.target is not None:
            if self.se > 0:
                self.z = (self.mean - self.target) / self.se
            else:
                self.z = 0.0 if self.mean == self.target else float("inf")
        return self

    def to_json_dict(self):
        return {"n": self.n, "t": self.t, "name": self.name,
                "mean": self.mean, "se": self.se, "target": self.target,
                "z": self.z, "values": [float(v) for v in self.values]}


@dataclass
class EnsembleReport:
    kind: str
    rule: str
    base_seed: int
    replicas: int
    params: dict
    manifest: list
    rows: list
    summary: dict = field(default_factory=dict)

    def row(self, n, t, name):
        for r in self.rows:
            if r.n == n and abs(r.t - t) < 1e-12 and r.name == name:
                return r
        raise KeyError((n, t, name))

    def merge(self, other):
        """Pure merge of two reports over disjoint replica ranges."""
        if (self.kind, self.rule, self.params) != (other.kind, other.rule,
                                                   other.params):
            raise InvalidArgumentError("cannot merge reports of different runs")
        rows = []
        for r in self.rows:
            o = other.row(r.n, r.t, r.name)
            rows.append(MetricRow(n=r.n, t=r.t, name=r.name,
                                  values=list(r.values) + list(o.values),
                                  target=r.target).finalize())
        return EnsembleReport(kind=self.kind, rule=self.rule,
                              base_seed=self.base_seed,
                              replicas=self.replicas + other.replicas,
                              params=self.params,
                              manifest=self.manifest + other.manifest,
                              rows=rows, summary={})

    def to_json_dict(self):
        return {"kind": self.kind, "rule": self.rule,
                "base_seed": self.base_seed, "replicas": self.replicas,
                "params": self.params, "summary": self.summary,
                "rows": [r.to_json_dict() for r in self.rows],
                "manifest": self.manifest}

    CSV_HEADER = ("n", "t", "metric", "mean", "se", "target", "z")

    def csv_rows(self):
        return [[r.n, r.t, r.name, r.mean, r.se,
                 "" if r.target is None else r.target,
                 "" if r.z is None else r.z] for r in self.rows]


def _thread_count(threads):
    if threads and threads > 0:
        return threads
    return os.cpu_count() or 1


def _run_ensemble(rule, n, replicas, base_seed, checkpoints, collect,
                  threads=0, i_track=64, k_max=2, L=100, replica_range=None):
    """Run replicas through sorted checkpoints; collect(state, stats) per stop.

    Returns (manifest, results) with results[replica_slot][checkpoint] a dict.
    """
    lo, hi = replica_range if replica_range is not None else (0, replicas)
    checkpoints = sorted(checkpoints)

    def one(rep):
        seed = replica_seed(base_seed, n, rep)
        state = new_process(n, rule, seed, i_track=i_track)
        out = []
        for t in checkpoints:
            stats = run_until(state, t, k_max=k_max, L=L)
            out.append(collect(state, stats))
        return rep, seed, out

    reps = range(lo, hi)
    workers = min(_thread_count(threads), len(reps)) if len(reps) else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(one, reps))
    else:
        raw = [one(r) for r in reps]
    raw.sort(key=lambda item: item[0])
    manifest = [{"n": n, "replica": rep, "seed": seed} for rep, seed, _ in raw]
    return manifest, [out for _, _, out in raw]


def _rows_from_results(n, checkpoints, results, names, targets):
    rows = []
    for j, t in enumerate(sorted(checkpoints)):
        for name in names:
            rows.append(MetricRow(
                n=n, t=t, name=name,
                values=[res[j][name] for res in results],
                target=targets.get((t, name))).finalize())
    return rows


def _fit_line(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - pred) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return float(slope), float(intercept), r2


def concentration_experiment(config, assert_subcritical=True):
    """Mean X_i/n (i <= i_report) and S_1 at each checkpoint vs the ODE values."""
    rule = config.rule
    checkpoints = tuple(config.checkpoints)
    if not checkpoints:
        raise InvalidArgumentError("no checkpoints configured")
    tc = ode.tc_of(rule)
    if assert_subcritical and max(checkpoints) >= tc - 0.05:
        raise InvalidArgumentError(
            f"checkpoints must stay below t_c - 0.05 = {tc - 0.05:.4f} "
            "(pass assert_subcritical=False to override)")

    i_rep = config.i_report
    prof_cfg = ode.OdeConfig(i_max=max(64, 4 * i_rep), checkpoints=checkpoints)
    profiles = {p.t: p for p in
                ode.integrate_profile(rule, max(checkpoints), prof_cfg)}
    positive = [t for t in checkpoints if t > 0 and t < tc]
    trace = ode.susceptibility_trace(rule, positive) if positive else None
    s1_of = {}
    for t in checkpoints:
        if t == 0.0:
            s1_of[t] = 1.0
        elif trace is not None:
            s1_of[t] = float(1.0 / trace.r[list(trace.t).index(t)])

    targets = {}
    for t in checkpoints:
        prof = profiles[t]
        for i in range(1, i_rep + 1):
            targets[(t, f"x_{i}")] = float(prof.x[i - 1])
        if t in s1_of:
            targets[(t, "s_1")] = s1_of[t]

    names = [f"x_{i}" for i in range(1, i_rep + 1)] + ["s_1", "c1_frac"]

    def collect(state, stats):
        out = {f"x_{i}": float(stats.x_fraction[i - 1]) for i in range(1, i_rep + 1)}
        out["s_1"] = stats.s_k[0]
        out["c1_frac"] = stats.c1 / state.n
        return out

    rows, manifest = [], []
    for n in config.n_list:
        mani, results = _run_ensemble(rule, n, config.replicas,
                                      config.base_seed, checkpoints, collect,
                                      threads=config.threads,
                                      i_track=max(16, i_rep), L=config.L)
        manifest += mani
        rows += _rows_from_results(n, checkpoints, results, names, targets)

    worst = max((abs(r.z) for r in rows if r.z is not None and np.isfinite(r.z)),
                default=0.0)
    return EnsembleReport(kind="concentration", rule=rule.label(),
                          base_seed=config.base_seed, replicas=config.replicas,
                          params={"checkpoints": list(checkpoints),
                                  "i_report": i_rep, "L": config.L},
                          manifest=manifest, rows=rows,
                          summary={"worst_abs_z": worst})


def susceptibility_concentration(config):
    """Ensemble mean S_1 per checkpoint vs the deterministic 1/r(t)."""
    rule = config.rule
    checkpoints = tuple(config.checkpoints)
    if not checkpoints:
        raise InvalidArgumentError("no checkpoints configured")
    tc = ode.tc_of(rule)
    if max(checkpoints) > tc - 0.1:
        raise InvalidArgumentError(
            f"checkpoints must stay at or below t_c - 0.1 = {tc - 0.1:.4f}")

    positive = [t for t in checkpoints if t > 0]
    trace = ode.susceptibility_trace(rule, positive) if positive else None
    targets = {}
    for t in checkpoints:
        if t == 0.0:
            targets[(t, "s_1")] = 1.0
        else:
            targets[(t, "s_1")] = float(1.0 / trace.r[list(trace.t).index(t)])

    def collect(state, stats):
        return {"s_1": stats.s_k[0]}

    rows, manifest = [], []
    for n in config.n_list:
        mani, results = _run_ensemble(rule, n, config.replicas,
                                      config.base_seed, checkpoints, collect,
                                      threads=config.threads, i_track=8,
                                      L=config.L)
        manifest += mani
        rows += _rows_from_results(n, checkpoints, results, ["s_1"], targets)

    worst = max(abs(r.z) for r in rows if np.isfinite(r.z))
    return EnsembleReport(kind="susceptibility", rule=rule.label(),
                          base_seed=config.base_seed, replicas=config.replicas,
                          params={"checkpoints": list(checkpoints), "L": config.L},
                          manifest=manifest, rows=rows,
                          summary={"worst_abs_z": worst})


def cycle_census(eps, n, replicas, rule=BF, base_seed=0, threads=0,
                 replica_range=None):
    """Cycle structure at t_c - eps: unicyclic count vs the mean-cycle-count
    integrals, dispersion, acyclic-run fraction, and complex-component count.

    Two deterministic targets are reported: ``mu`` (the leading-order
    integral, see :func:`bflab.ode.mu_epsilon`) and ``mu_exact_rate`` (the
    within-component pair count taken exactly; this is what the finite-eps
    count concentrates on).

    ``replica_range=(lo, hi)`` runs a slice of the ensemble; slices over
    disjoint ranges merge into exactly the full report.
    """
    tc = ode.tc_of(rule)
    t = tc - eps
    mu = ode.mu_epsilon(eps, rule)
    mu_exact = ode.expected_cycle_count(eps, rule)

    def collect(state, stats):
        c = stats.census
        return {"unicyclic": float(c.unicyclic), "complex": float(c.complex),
                "acyclic": 1.0 if (c.unicyclic == 0 and c.complex == 0) else 0.0}

    manifest, results = _run_ensemble(rule, n, replicas, base_seed, [t],
                                      collect, threads=threads, i_track=8,
                                      replica_range=replica_range)
    rows = _rows_from_results(n, [t], results,
                              ["unicyclic", "complex", "acyclic"],
                              {(t, "unicyclic"): mu_exact,
                               (t, "acyclic"): math.exp(-mu_exact)})
    n_runs = len(results)
    uni = np.array([res[0]["unicyclic"] for res in results])
    acyclic_frac = float(np.mean([res[0]["acyclic"] for res in results]))
    p = math.exp(-mu)
    p_exact = math.exp(-mu_exact)
    binom_se = math.sqrt(p * (1 - p) / n_runs)
    binom_se_exact = math.sqrt(p_exact * (1 - p_exact) / n_runs)
    summary = {
        "eps": eps, "t": t,
        "mu": mu, "mu_exact_rate": mu_exact,
        "unicyclic_mean": float(uni.mean()),
        "unicyclic_var": float(uni.var(ddof=1)),
        "var_over_mean": float(uni.var(ddof=1) / uni.mean()) if uni.mean() > 0
                         else float("nan"),
        "mean_rel_dev_mu": abs(float(uni.mean()) - mu) / mu,
        "mean_rel_dev_mu_exact": abs(float(uni.mean()) - mu_exact) / mu_exact,
        "acyclic_fraction": acyclic_frac,
        "acyclic_target_mu": p, "acyclic_binom_se_mu": binom_se,
        "acyclic_z_mu": (acyclic_frac - p) / binom_se,
        "acyclic_target_mu_exact": p_exact,
        "acyclic_z_mu_exact": (acyclic_frac - p_exact) / binom_se_exact,
        "complex_total": int(sum(res[0]["complex"] for res in results)),
    }
    return EnsembleReport(kind="cycles", rule=rule.label(), base_seed=base_seed,
                          replicas=n_runs, params={"eps": eps, "n": n},
                          manifest=manifest, rows=rows, summary=summary)


def _complex_outside_largest(state):
    roots = np.flatnonzero(state.parent == np.arange(state.n, dtype=np.int64))
    sizes = state.csize[roots]
    edges = state.cedges[roots]
    mask = edges > sizes
    count = int(np.count_nonzero(mask))
    if count and mask[int(np.argmax(sizes))]:
        count -= 1
    return count


def c1_scaling(eps_list, n_grid, replicas, rule=BF, base_seed=0, threads=0):
    """Largest subcritical component vs log n and vs eps^-2.

    One trajectory per (n, replica) is sampled at every t_c - eps, so the
    eps comparisons are paired.
    """
    eps_list = sorted(set(float(e) for e in np.atleast_1d(eps_list)),
                      reverse=True)
    tc = ode.tc_of(rule)
    checkpoints = [tc - e for e in eps_list]

    def collect(state, stats):
        return {"c1": float(stats.c1)}

    rows, manifest = [], []
    for n in n_grid:
        mani, results = _run_ensemble(rule, n, replicas, base_seed,
                                      checkpoints, collect, threads=threads,
                                      i_track=8)
        manifest += mani
        rows += _rows_from_results(n, checkpoints, results, ["c1"], {})

    summary = {"eps_list": eps_list, "n_grid": list(n_grid), "log_n_fits": {}}
    for e in eps_list:
        t = tc - e
        means = [next(r.mean for r in rows if r.n == n and abs(r.t - t) < 1e-12)
                 for n in n_grid]
        if len(n_grid) >= 3:
            slope, intercept, r2 = _fit_line(np.log(list(n_grid)), means)
            summary["log_n_fits"][str(e)] = {
                "slope": slope, "intercept": intercept, "r_squared": r2,
                "means": means}
    ratios = {}
    for e in eps_list:
        if e / 2 in eps_list:
            for n in n_grid:
                big = next(r.mean for r in rows
                           if r.n == n and abs(r.t - (tc - e / 2)) < 1e-12)
                small = next(r.mean for r in rows
                             if r.n == n and abs(r.t - (tc - e)) < 1e-12)
                ratios[f"eps_{e}_to_{e/2}_n_{n}"] = big / small
    summary["halving_ratios"] = ratios
    return EnsembleReport(kind="c1-scaling", rule=rule.label(),
                          base_seed=base_seed, replicas=replicas,
                          params={"eps_list": eps_list, "n_grid": list(n_grid)},
                          manifest=manifest, rows=rows, summary=summary)


def c2_scaling(eps, n_grid, replicas, rule=BF, base_seed=0, threads=0):
    """Second-largest supercritical component vs log n; giant presence and
    simplicity of everything outside the largest component."""
    tc = ode.tc_of(rule)
    t = tc + eps

    def collect(state, stats):
        return {"c2": float(stats.c2), "c1_frac": stats.c1 / state.n,
                "complex_outside": float(_complex_outside_largest(state))}

    rows, manifest = [], []
    for n in n_grid:
        mani, results = _run_ensemble(rule, n, replicas, base_seed, [t],
                                      collect, threads=threads, i_track=8)
        manifest += mani
        rows += _rows_from_results(n, [t], results,
                                   ["c2", "c1_frac", "complex_outside"], {})

    means = [next(r.mean for r in rows if r.n == n and r.name == "c2")
             for n in n_grid]
    summary = {"eps": eps, "t": t, "c2_means": means}
    if len(n_grid) >= 3:
        slope, intercept, r2 = _fit_line(np.log(list(n_grid)), means)
        summary["log_n_fit"] = {"slope": slope, "intercept": intercept,
                                "r_squared": r2}
    summary["min_c1_frac"] = min(min(r.values) for r in rows
                                 if r.name == "c1_frac")
    summary["complex_outside_total"] = int(sum(
        sum(r.values) for r in rows if r.name == "complex_outside"))
    return EnsembleReport(kind="c2-scaling", rule=rule.label(),
                          base_seed=base_seed, replicas=replicas,
                          params={"eps": eps, "n_grid": list(n_grid)},
                          manifest=manifest, rows=rows, summary=summary)


def giant_growth(eps_grid, n, replicas, rule=BF, base_seed=0, threads=0):
    """Giant fraction just past t_c against gamma * eps.

    Reports per-eps growth ratios (c1/n)/eps, the literal least-squares
    through-origin slope, and ``gamma_extrapolated``: the eps -> 0 intercept
    of a line fitted to the ratios, which estimates the initial growth rate
    without the bias of the higher-order correction term (visible as
    curvature in the residuals).  Replicas where c2/c1 > 0.5 have no
    resolved giant; they are excluded from the fits and counted.
    """
    eps_grid = sorted(set(float(e) for e in np.atleast_1d(eps_grid)))
    if not eps_grid or eps_grid[-1] > 0.3:
        raise InvalidArgumentError("eps grid must lie in (0, 0.3]")
    tc = ode.tc_of(rule)
    checkpoints = [tc + e for e in eps_grid]

    def collect(state, stats):
        return {"c1_frac": stats.c1 / state.n,
                "resolved": 1.0 if stats.c2 <= 0.5 * stats.c1 else 0.0}

    manifest, results = _run_ensemble(rule, n, replicas, base_seed,
                                      checkpoints, collect, threads=threads,
                                      i_track=8)
    rows = _rows_from_results(n, checkpoints, results,
                              ["c1_frac", "resolved"], {})

    eps_arr, ratio_mean, unresolved = [], [], 0
    for j, e in enumerate(eps_grid):
        vals = [res[j]["c1_frac"] for res in results if res[j]["resolved"] > 0]
        unresolved += sum(1 for res in results if res[j]["resolved"] == 0)
        if vals:
            eps_arr.append(e)
            ratio_mean.append(float(np.mean(vals)) / e)
    eps_arr = np.asarray(eps_arr)
    y = np.asarray(ratio_mean) * eps_arr

    gamma_lsq = float(eps_arr @ y / (eps_arr @ eps_arr))
    if eps_arr.size >= 2:
        slope, intercept = np.polyfit(eps_arr, np.asarray(ratio_mean), 1)
        gamma_extrap = float(intercept)
    else:
        gamma_extrap = float("nan")
    resid = y - gamma_lsq * eps_arr
    curv = float(resid @ eps_arr ** (4.0 / 3.0) /
                 (eps_arr ** (4.0 / 3.0) @ eps_arr ** (4.0 / 3.0))) \
        if eps_arr.size else float("nan")

    summary = {"eps_grid": eps_grid, "ratios": ratio_mean,
               "gamma_origin_fit": gamma_lsq,
               "gamma_extrapolated": gamma_extrap,
               "curvature_coefficient": curv,
               "unresolved_runs": int(unresolved)}
    return EnsembleReport(kind="giant-growth", rule=rule.label(),
                          base_seed=base_seed, replicas=replicas,
                          params={"eps_grid": eps_grid, "n": n},
                          manifest=manifest, rows=rows, summary=summary)
