"""Monte Carlo harness: the contamination study and empirical coverage of the bounds.

Replication ``r`` of an experiment draws from
``RandomStream.for_key(master_seed, <experiment key>, r)``, so results do not
depend on how replications are split across worker processes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bounds import (
    VarianceProxies,
    mom_radius,
    variance_bound_general,
    variance_bound_split,
    xi_radius,
)
from .distributions import (
    ContaminationScheme,
    GevParams,
    RandomStream,
    contaminate,
    gev_max_variance,
    gev_order_stat_mean,
    gev_pwm_theta,
    gev_quantile,
    order_stat_oracle,
    sample_oracle_dist,
    uniform_open,
    uniform_order_stat_v1,
)
from .bounds import estimate_variance_proxies
from .estimators import (
    KernelSpec,
    MomConfig,
    blocks_for_delta,
    mom_order_stat_batch,
    partition_blocks,
    pwm_weights,
)
from .exceptions import InvalidFit, NonIdentifiable
from .tail_index import gev_from_thetas, max_thetas_batch, xi_from_thetas

TARGETS = ("theta_3_4", "theta_4_4", "xi", "q95")
METHOD_LABELS = ("MM", "LC")
ROW_COLUMNS = ("target", "method", "xi_true", "n_outliers", "rep", "estimate", "status")
SUMMARY_COLUMNS = (
    "target", "method", "xi_true", "n_outliers",
    "median", "q1", "q3", "lo_whisker", "hi_whisker", "n_valid", "n_noniden",
)
PROPOSITIONS = ("p1_subgaussian", "p1_subgamma", "p2_clean_contaminated", "p3_xi", "p4_cna")
ADVERSARIAL_VALUE = 1e9


def default_jobs():
    try:
        return max(1, int(os.environ.get("ROBUST_PWM_JOBS", "1")))
    except ValueError:
        return 1


def _run_parallel(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _chunks(reps, jobs):
    n_chunks = max(1, min(reps, 4 * jobs))
    bounds = np.linspace(0, reps, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


# --------------------------------------------------------------------------
# Contamination study (boxplot data)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentGrid:
    """Settings of the contamination study.

    ``placement`` is ``"appended"`` (outliers follow the inliers, so with
    contiguous blocks they fall in the last block) or ``"shuffled"``.
    """

    xis: tuple = (-0.4, 0.0, 0.4)
    n_outliers: tuple = (0, 5, 15, 20)
    n_total: int = 200
    reps: int = 1000
    delta: float = 0.05
    master_seed: int = 0
    targets: tuple = TARGETS
    placement: str = "appended"
    partition: str = "contiguous"

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if self.n_total <= max(self.n_outliers):
            raise ValueError("n_total must exceed every outlier count")
        if min(self.n_outliers) < 0:
            raise ValueError("outlier counts must be non-negative")
        if not set(self.targets) <= set(TARGETS):
            raise ValueError(f"targets must be drawn from {TARGETS}")
        if self.placement not in ("appended", "shuffled"):
            raise ValueError("placement must be 'appended' or 'shuffled'")
        MomConfig(self.delta).validate(self.n_total, 4)

    @property
    def cells(self):
        return [(xi, n_o) for xi in self.xis for n_o in self.n_outliers]


def figure1_truth(xi):
    p = GevParams(xi)
    return {
        "theta_3_4": gev_order_stat_mean(3, 4, p),
        "theta_4_4": gev_pwm_theta(4, p),
        "xi": float(xi),
        "q95": float(gev_quantile(0.95, p)),
    }


def figure1_samples(grid, xi, n_o):
    scheme = ContaminationScheme(GevParams(xi), grid.n_total - n_o, n_o)
    shuffle = grid.placement == "shuffled"
    return np.stack([
        contaminate(RandomStream.for_key(grid.master_seed, "figure1", float(xi), n_o, r), scheme,
                    shuffle=shuffle).values
        for r in range(grid.reps)
    ])


def _targets_for(X, partition, targets):
    """Estimates and statuses of each target for every row of X."""
    out = {}
    thetas = max_thetas_batch(X, partition)
    if "theta_3_4" in targets:
        pts, _ = mom_order_stat_batch(X, partition, 3, 4)
        out["theta_3_4"] = (pts, ["ok"] * len(pts))
    if "theta_4_4" in targets:
        out["theta_4_4"] = (thetas[:, 2], ["ok"] * len(thetas))
    if "xi" in targets or "q95" in targets:
        xis, qs, xs, qst = [], [], [], []
        for t1, t2, t4 in thetas:
            try:
                x = xi_from_thetas(t1, t2, t4)
            except NonIdentifiable:
                xis.append(math.nan), xs.append("non_identifiable")
                qs.append(math.nan), qst.append("non_identifiable")
                continue
            xis.append(x), xs.append("ok")
            try:
                qs.append(float(gev_quantile(0.95, gev_from_thetas(x, t1, t2)))), qst.append("ok")
            except InvalidFit:
                qs.append(math.nan), qst.append("invalid_fit")
        if "xi" in targets:
            out["xi"] = (np.array(xis), xs)
        if "q95" in targets:
            out["q95"] = (np.array(qs), qst)
    return out


def _figure1_cell(grid, xi, n_o):
    X = figure1_samples(grid, xi, n_o)
    seed = grid.master_seed if grid.partition == "shuffled" else None
    partitions = {
        "MM": partition_blocks(grid.n_total, MomConfig(grid.delta, grid.partition, seed), 4),
        "LC": partition_blocks(grid.n_total, MomConfig.from_blocks(1), 4),
    }
    est = {label: _targets_for(X, part, grid.targets) for label, part in partitions.items()}
    rows = []
    for target in grid.targets:
        for label in METHOD_LABELS:
            values, statuses = est[label][target]
            for r in range(grid.reps):
                rows.append((target, label, float(xi), int(n_o), r, float(values[r]), statuses[r]))
    return rows


def boxplot_stats(values):
    """Median, quartiles and Tukey whiskers (1.5 IQR, clipped to the data)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        return {k: math.nan for k in ("median", "q1", "q3", "lo_whisker", "hi_whisker")}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo = v[v >= q1 - 1.5 * iqr].min()
    hi = v[v <= q3 + 1.5 * iqr].max()
    return {"median": float(med), "q1": float(q1), "q3": float(q3),
            "lo_whisker": float(lo), "hi_whisker": float(hi)}


@dataclass
class Figure1Result:
    grid: ExperimentGrid
    rows: list
    summaries: list = field(default_factory=list)

    def summary_lookup(self):
        return {(s["target"], s["method"], s["xi_true"], s["n_outliers"]): s for s in self.summaries}


def summarize_rows(rows):
    groups = {}
    for target, method, xi, n_o, _rep, value, status in rows:
        groups.setdefault((target, method, xi, n_o), []).append((value, status))
    out = []
    for (target, method, xi, n_o), items in groups.items():
        valid = [v for v, s in items if s == "ok"]
        summary = {"target": target, "method": method, "xi_true": xi, "n_outliers": n_o}
        summary.update(boxplot_stats(valid))
        summary["n_valid"] = len(valid)
        summary["n_noniden"] = len(items) - len(valid)
        out.append(summary)
    return out


def run_figure1(grid, jobs=None):
    """Estimates of every target by both methods for each (xi, n_O, replication)."""
    jobs = default_jobs() if jobs is None else jobs
    cell_rows = _run_parallel(_figure1_cell, [(grid, xi, n_o) for xi, n_o in grid.cells], jobs)
    rows = [row for cell in cell_rows for row in cell]
    return Figure1Result(grid, rows, summarize_rows(rows))


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _csv_text(columns, records):
    lines = [",".join(columns)]
    lines += [",".join(_fmt(v) for v in rec) for rec in records]
    return "\n".join(lines) + "\n"


def figure1_csv(result):
    rows = _csv_text(ROW_COLUMNS, result.rows)
    summary = _csv_text(SUMMARY_COLUMNS, [[s[c] for c in SUMMARY_COLUMNS] for s in result.summaries])
    return rows, summary


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def figure1_json(result):
    import json

    payload = {
        "config": asdict(result.grid),
        "truth": {repr(float(xi)): figure1_truth(xi) for xi in result.grid.xis},
        "rows": [dict(zip(ROW_COLUMNS, r)) for r in result.rows],
        "summaries": result.summaries,
        "software_version": __version__,
        "master_seed": result.grid.master_seed,
    }
    return json.dumps(_json_safe(payload), indent=1, sort_keys=True) + "\n"


def write_figure1(result, out_dir, fmt="csv"):
    """Write the study to ``out_dir``; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        rows, summary = figure1_csv(result)
        paths = [os.path.join(out_dir, "figure1_rows.csv"), os.path.join(out_dir, "figure1_summary.csv")]
        for path, text in zip(paths, (rows, summary)):
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return paths
    if fmt == "json":
        path = os.path.join(out_dir, "figure1.json")
        with open(path, "w") as fh:
            fh.write(figure1_json(result))
        return [path]
    raise ValueError("format must be 'csv' or 'json'")


# --------------------------------------------------------------------------
# Coverage of the concentration bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageResult:
    proposition: str
    empirical_failure_rate: float
    nominal_delta: float
    budget: float
    radius_used: float
    reps: int
    regime: str
    flavor: str
    failures: int
    details: dict = field(default_factory=dict)

    @property
    def allowance(self):
        """Budget plus a 3-sigma binomial allowance."""
        return self.budget + 3 * math.sqrt(self.budget / self.reps)

    @property
    def passed(self):
        return self.empirical_failure_rate <= self.allowance


def srswor_max_moments(population, m):
    """Exact mean, v_1 and v_m of the max of m draws without replacement."""
    x = np.sort(np.asarray(population, dtype=np.float64))
    N = x.size
    w = pwm_weights(N, m, m)
    theta = float(w @ x)
    v_m = float(w @ x**2 - theta**2)
    if m == 1:
        return theta, v_m, v_m
    # given X_1 = x_i the other m-1 draws come from the N-1 remaining values
    w_rest = pwm_weights(N - 1, m - 1, m - 1)
    g = np.empty(N)
    for i in range(N):
        rest = np.delete(x, i)
        g[i] = w_rest @ np.maximum(rest, x[i])
    v_1 = float(np.mean(g**2) - np.mean(g) ** 2)
    return theta, v_1, v_m


def _order_stat_setup(dist, k, m, seed):
    theta, v_m = order_stat_oracle(dist, k, m)
    if dist == "uniform01":
        v_1 = uniform_order_stat_v1(k, m)
    elif m == 1:
        v_1 = v_m
    else:
        kernel = KernelSpec.order_statistic(k, m)
        est = estimate_variance_proxies(
            lambda rng, shape: sample_oracle_dist(dist, rng, shape), kernel, 20000, 50,
            RandomStream.for_key(seed, "proxies", dist, k, m),
        )
        v_1 = est.v[0]
    return theta, VarianceProxies.from_endpoints(m, v_m, v_1)


def _coverage_chunk(spec, start, stop):
    """Absolute errors (and radii, for p3) for replications start..stop."""
    prop, seed, n = spec["proposition"], spec["seed"], spec["n"]
    key = ("coverage", prop, spec["dist"], n, spec["m"], spec["k"], spec["delta"])
    rows = []
    for r in range(start, stop):
        rng = RandomStream.for_key(seed, *key, r).generator()
        if prop == "p4_cna":
            rows.append(rng.choice(spec["population"], size=n, replace=False))
        elif prop == "p3_xi":
            rows.append(gev_quantile(uniform_open(rng, n), GevParams(spec["xi"])))
        else:
            rows.append(sample_oracle_dist(spec["dist"], rng, n))
    X = np.stack(rows)
    part = partition_blocks(n, MomConfig(spec["delta"]), spec["m"])
    for j in range(spec["corrupt_blocks"]):
        X[:, part.blocks[j]] = spec["outlier_value"]
    if prop == "p3_xi":
        thetas = max_thetas_batch(X, part)
        err, rad = np.full(len(X), np.inf), np.full(len(X), np.nan)
        for i, (t1, t2, t4) in enumerate(thetas):
            try:
                xi_hat = xi_from_thetas(t1, t2, t4)
                rad[i], _ = xi_radius(n, spec["delta"], spec["v_max"], xi_hat, t2, t1,
                                      spec["regime"], xi=spec["xi"])
            except NonIdentifiable:
                continue
            err[i] = abs(xi_hat - spec["xi"])
        return err, rad
    pts, _ = mom_order_stat_batch(X, part, spec["k"], spec["m"])
    return np.abs(pts - spec["theta"]), None


def run_coverage(proposition, n, m=3, k=None, q=1, delta=0.1, dist="uniform01", reps=10_000,
                 seed=0, flavor=None, regime=None, xi=0.4, population=None, corrupt_blocks=None,
                 outlier_value=ADVERSARIAL_VALUE, jobs=None):
    """Empirical failure rate of a concentration bound.

    p1_*: i.i.d. ``dist`` samples, order-statistic kernel (k, m).
    p2_clean_contaminated: as p1 with every value in ``floor(K/4)`` blocks
    (or ``corrupt_blocks``) replaced by ``outlier_value``; contaminated radius.
    p3_xi: GEV(xi) samples, tail-index estimate, oracle radius, budget 3 delta.
    p4_cna: draws without replacement from ``population`` (default 1..1000),
    max-of-m kernel, budget 2 delta.
    """
    if proposition not in PROPOSITIONS:
        raise ValueError(f"proposition must be one of {PROPOSITIONS}")
    if q != 1:
        raise ValueError("coverage runs use non-degenerate order-statistic kernels (q = 1)")
    jobs = default_jobs() if jobs is None else jobs
    K = blocks_for_delta(delta)
    spec = {"proposition": proposition, "seed": seed, "n": n, "delta": delta, "dist": dist,
            "corrupt_blocks": 0, "outlier_value": outlier_value}
    if flavor is None:
        flavor = "sub_gamma" if proposition == "p1_subgamma" else "sub_gaussian"
    if proposition == "p1_subgaussian" and flavor != "sub_gaussian" or (
        proposition == "p1_subgamma" and flavor != "sub_gamma"
    ):
        raise ValueError(f"{proposition} fixes flavor; got {flavor}")
    budget_factor = 1

    if proposition == "p3_xi":
        m, k = 4, None
        p = GevParams(xi)
        regime = regime or "clean"
        spec.update(m=4, k=None, xi=float(xi), dist=f"gev({xi})", regime=regime,
                    v_max=max(gev_max_variance(j, p) for j in (1, 2, 4)))
        if regime == "contaminated":
            spec["corrupt_blocks"] = K // 4 if corrupt_blocks is None else corrupt_blocks
        truth, budget_factor = float(xi), 3
    elif proposition == "p4_cna":
        population = np.arange(1, 1001, dtype=np.float64) if population is None else np.asarray(population, float)
        k = m
        theta, v_1, v_m = srswor_max_moments(population, m)
        proxies = VarianceProxies.from_endpoints(m, v_m, v_1, provenance="exact_enumeration")
        regime = regime or "clean"
        spec.update(m=m, k=m, theta=theta, population=population, dist="srswor")
        truth, budget_factor = theta, 2
    else:
        k = (m + 1) // 2 if k is None else k
        theta, proxies = _order_stat_setup(dist, k, m, seed)
        spec.update(m=m, k=k, theta=theta)
        truth = theta
        if proposition == "p2_clean_contaminated":
            regime = regime or "contaminated"
            spec["corrupt_blocks"] = K // 4 if corrupt_blocks is None else corrupt_blocks
        else:
            regime = regime or "clean"

    if spec["corrupt_blocks"] > K / 4:
        raise ValueError(f"at most K/4 = {K / 4} blocks may be corrupted")
    if spec["corrupt_blocks"] and regime != "contaminated":
        raise ValueError("corrupted samples need the contaminated regime")

    parts = _run_parallel(_coverage_chunk, [(spec, a, b) for a, b in _chunks(reps, jobs)], jobs)
    err = np.concatenate([e for e, _ in parts])
    details = {"K": K, "truth": truth, "corrupt_blocks": spec["corrupt_blocks"]}
    if proposition == "p3_xi":
        rad = np.concatenate([r for _, r in parts])
        failures = int(np.sum(~(err < rad)))
        radius = float(np.nanmedian(rad))
        details["noniden"] = int(np.sum(np.isnan(rad)))
        details["v_max"] = spec["v_max"]
    else:
        radius = mom_radius(n, m, q, delta, proxies, regime, flavor)
        failures = int(np.sum(err > radius))
        details["proxies"] = proxies.v
    return CoverageResult(
        proposition=proposition,
        empirical_failure_rate=failures / reps,
        nominal_delta=delta,
        budget=budget_factor * delta,
        radius_used=radius,
        reps=reps,
        regime=regime,
        flavor=flavor,
        failures=failures,
        details=details,
    )


# --------------------------------------------------------------------------
# Variance bounds
# --------------------------------------------------------------------------


def run_variance_check(k, m, n, reps=100_000, seed=0, chunk=5000):
    """Monte Carlo var(U_n) for the uniform (k, m) order-statistic kernel vs both bounds."""
    _, v_m = order_stat_oracle("uniform01", k, m)
    v_1 = uniform_order_stat_v1(k, m)
    w = pwm_weights(n, k, m)
    values = []
    for start in range(0, reps, chunk):
        rng = RandomStream.for_key(seed, "variance", k, m, n, start).generator()
        X = np.sort(rng.random((min(chunk, reps - start), n)), axis=1)
        values.append(X @ w)
    u = np.concatenate(values)
    var = float(np.var(u, ddof=1))
    c = u - u.mean()
    se = math.sqrt(max(float(np.mean(c**4)) - var**2, 0.0) / u.size)
    return {
        "k": k, "m": m, "n": n, "reps": reps,
        "mc_variance": var, "mc_se": se,
        "bound_general": variance_bound_general(n, m, 1, v_m),
        "bound_split": variance_bound_split(n, m, 1, v_1, v_m),
    }
