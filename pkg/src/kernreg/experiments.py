"""Experiment orchestration: rate studies, the check suite, CSV and plots.

Work is organized into (kind, n, seed) cells whose generators derive from
the root seed and the cell key, so results are independent of scheduling;
parallel runs merge in sorted key order and reproduce serial output byte
for byte.  Every emitted row carries the configuration hash, and re-fits
refuse to mix rows from different configurations.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import complexity as cx
from .regfunc import (
    Constants,
    localized_width,
    RegularizerSpec,
    fixed_point,
    localization_sum_ratio,
    peeling_bound_constant,
    peeling_sum,
    process_bound,
    sum_min,
)
from .seeding import seed_u64
from .solver import frontier_for_sample, regularized_erm
from .spectrum import EigenSpec, PowerLawTail, basis_matrix, build_spec
from .synth import (
    check_approx_bound,
    default_g,
    draw_sample,
    make_target,
    population_risk_excess,
    with_noise,
)


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class PlotInputError(ValueError):
    """Malformed or empty rate CSV handed to the plotter (CLI exit code 2)."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class CheckParams:
    """Sizes and levels of the individual checks; defaults match the gate."""

    fixed_point_N: int = 200_001
    fixed_point_log2_n: tuple[int, int] = (10, 20)
    localization_ratio_grid: int = 25
    approx_sigmas: tuple[float, ...] = (0.2, 0.35)
    approx_N: tuple[int, ...] = (1_000_001, 2_000_001)
    approx_g_scale: tuple[float, ...] = (1.0, 7.0)
    approx_r_max_log2: int = 8
    inclusion_samples: int = 10_000
    inclusion_r: float = 2.0
    slepian_draws: int = 1500
    slepian_x: float = 0.01
    dudley_draws: int = 1500
    dudley_x: float = 0.01
    sup_ratio_family: int = 1000
    iso_n: int = 512
    iso_r: float = 2.0
    iso_calib_trials: int = 100
    iso_trials: int = 200
    loc_gauss_draws: int = 600
    loc_gauss_log2_n: tuple[int, int] = (6, 12)


@dataclass(frozen=True)
class ExperimentConfig:
    p: float = 0.5
    N: int = 201
    sigma: float = 0.5
    q: float = 0.5
    g_scale: float = 1.0
    b: float = 0.5
    n_grid: tuple[int, ...] = (64, 128, 256, 512, 1024, 2048, 4096, 8192)
    seeds: int = 50
    kinds: tuple[str, ...] = ("sublinear", "quadratic")
    constants: Constants = field(default_factory=Constants)
    u: float = 3.0
    root_seed: int = 12345
    jobs: int = 1
    drop_smallest_n: bool = True
    calibrate: bool = True
    calib_seeds: int = 6
    calib_grid: tuple[float, float, float] = (-3.0, 0.0, 1.0 / 24.0)  # log10 lo, hi, step
    checks: CheckParams = field(default_factory=CheckParams)

    def __post_init__(self):
        if len(self.n_grid) < 1 or any(
            b <= a for a, b in zip(self.n_grid, self.n_grid[1:])
        ):
            raise ConfigError("n_grid must be strictly increasing")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        for kind in self.kinds:
            if kind not in ("null", "ridge", "quadratic", "improved", "sublinear"):
                raise ConfigError(f"unknown regularizer kind {kind!r}")

    def to_json(self) -> str:
        doc = dataclasses.asdict(self)
        return json.dumps(doc, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return ExperimentConfig.from_dict(doc)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        kw = dict(doc)
        try:
            if "constants" in kw:
                kw["constants"] = Constants(**kw["constants"])
            if "checks" in kw:
                kw["checks"] = CheckParams(
                    **{
                        k: tuple(v) if isinstance(v, list) else v
                        for k, v in kw["checks"].items()
                    }
                )
            for key in ("n_grid", "kinds", "calib_grid"):
                if key in kw and isinstance(kw[key], list):
                    kw[key] = tuple(kw[key])
            return ExperimentConfig(**kw)
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:12]


def build_problem(config: ExperimentConfig):
    spec = build_spec(config.p, config.N)
    task = with_noise(
        make_target(spec, config.sigma, default_g(spec, config.q, config.g_scale)),
        config.b,
    )
    return spec, task


# --- slope fitting ------------------------------------------------------------


def fit_loglog_slope(ns, ys) -> tuple[float, float, float]:
    """Least-squares slope/intercept of ln(y) on ln(n), with fit residual."""
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(ys <= 0.0):
        raise ValueError("log-log fit requires positive values")
    lx, ly = np.log(ns), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), float(intercept), resid


def predicted_exponent(kind: str, sigma: float, p: float) -> float:
    """The predicted excess-risk exponent in n for each regularizer kind.

    Suppressed (nan) in the diagnostic p = 1 mode and for kinds the analysis
    does not cover.
    """
    if p >= 1.0 or kind in ("null", "ridge"):
        return float("nan")
    if sigma >= 0.5:
        return -1.0 / (1.0 + p)
    if kind == "sublinear":
        return -2.0 * sigma / (p + 2.0 * sigma)
    return -2.0 * sigma / (1.0 + p)  # quadratic-era kinds


def predicted_log_factor(kind: str, n: float, u: float, p: float, c_Y: float) -> float:
    """The log factor the bound carries, divided out for the adjusted slopes."""
    if kind == "sublinear":
        return math.log(n) ** (2.0 / (1.0 + p)) * (1.0 + u + c_Y * math.log(n))
    if kind == "improved":
        return math.log(n) ** (2.0 / (1.0 + p))
    return 1.0


# --- rates --------------------------------------------------------------------


@dataclass(frozen=True)
class RateRow:
    kind: str
    n: int
    mean_excess: float
    std_excess: float
    seeds: int


@dataclass(frozen=True)
class RateFit:
    kind: str
    slope: float
    intercept: float
    residual: float
    slope_logadj: float
    predicted: float


@dataclass(frozen=True)
class RateResult:
    rows: tuple[RateRow, ...]
    fits: tuple[RateFit, ...]
    kappa1: float
    config_hash: str
    completion: float
    failures: tuple[str, ...] = ()

    def fit_for(self, kind: str) -> RateFit:
        for f in self.fits:
            if f.kind == kind:
                return f
        raise KeyError(kind)

    def mean_at(self, kind: str, n: int) -> float:
        for r in self.rows:
            if r.kind == kind and r.n == n:
                return r.mean_excess
        raise KeyError((kind, n))


def calibrate_kappa1(config: ExperimentConfig, spec: EigenSpec, task) -> float:
    """Holdout cross-validation of the shared front constant kappa1.

    One kappa1 serves every regularizer kind (the model-selection constant
    is one absolute constant, not one per functional); it is tuned on the
    primary sublinear estimator at half the largest grid size, with ties
    broken toward the stronger penalty.
    """
    kind = "sublinear" if "sublinear" in config.kinds else config.kinds[0]
    n_cal = max(2, max(config.n_grid) // 2)
    lo, hi, step = config.calib_grid
    kappas = 10.0 ** np.arange(lo, hi + step / 2.0, step)
    scores = np.zeros(kappas.size)
    for j in range(config.calib_seeds):
        train = draw_sample(task, n_cal, seed_u64(config.root_seed, "calib", "train", j))
        val = draw_sample(task, n_cal, seed_u64(config.root_seed, "calib", "val", j))
        frontier = frontier_for_sample(spec, train)
        B_val = basis_matrix(spec, val.xs)
        for i, kap in enumerate(kappas):
            regspec = RegularizerSpec(
                kind, config.constants.replace(kappa1=float(kap)), spec, n_cal
            )
            fitted = regularized_erm(frontier, regspec, config.u)
            scores[i] += float(np.mean((B_val @ fitted.c - val.ys) ** 2))
    best = np.where(scores <= scores.min() * (1.0 + 1e-12))[0]
    return float(kappas[best[-1]])


def _rates_group(args) -> list[tuple]:
    """All seeds of one (kind, n) cell group; module level for pickling."""
    (config, kind, n, kappa1) = args
    spec, task = build_problem(config)
    consts = config.constants.replace(kappa1=kappa1)
    regspec = RegularizerSpec(kind, consts, spec, n)
    out = []
    for s in range(config.seeds):
        try:
            sample = draw_sample(
                task, n, seed_u64(config.root_seed, "rates", kind, n, s)
            )
            frontier = frontier_for_sample(spec, sample)
            fitted = regularized_erm(frontier, regspec, config.u)
            excess = population_risk_excess(fitted.c, task)
            out.append((kind, n, s, excess, ""))
        except Exception as exc:  # cell failure is recorded, not fatal
            out.append((kind, n, s, None, f"{type(exc).__name__}: {exc}"))
    return out


def run_rates(config: ExperimentConfig) -> RateResult:
    spec, task = build_problem(config)
    kappa1 = (
        calibrate_kappa1(config, spec, task)
        if config.calibrate
        else config.constants.kappa1
    )
    groups = [(config, kind, n, kappa1) for kind in config.kinds for n in config.n_grid]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_rates_group, groups))
    else:
        chunks = [_rates_group(g) for g in groups]
    cells = sorted(
        (c for chunk in chunks for c in chunk), key=lambda c: (c[0], c[1], c[2])
    )

    rows: list[RateRow] = []
    fits: list[RateFit] = []
    total = len(cells)
    done = sum(1 for c in cells if c[3] is not None)
    for kind in config.kinds:
        ns, means = [], []
        for n in config.n_grid:
            vals = [c[3] for c in cells if c[0] == kind and c[1] == n and c[3] is not None]
            if not vals:
                continue
            arr = np.asarray(vals)
            rows.append(
                RateRow(
                    kind=kind,
                    n=n,
                    mean_excess=float(arr.mean()),
                    std_excess=float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
                    seeds=arr.size,
                )
            )
            ns.append(n)
            means.append(float(arr.mean()))
        kind_cells = config.seeds * len(config.n_grid)
        kind_done = sum(
            1 for c in cells if c[0] == kind and c[3] is not None
        )
        fit_ok = kind_done >= 0.8 * kind_cells and len(ns) >= 2
        if config.drop_smallest_n and len(ns) > 2:
            fit_ns, fit_means = ns[1:], means[1:]
        else:
            fit_ns, fit_means = ns, means
        if fit_ok:
            slope, intercept, resid = fit_loglog_slope(fit_ns, fit_means)
            adj = [
                m / predicted_log_factor(kind, n, config.u, config.p, config.constants.c_Y)
                for n, m in zip(fit_ns, fit_means)
            ]
            slope_adj, _, _ = fit_loglog_slope(fit_ns, adj)
        else:
            slope = intercept = resid = slope_adj = float("nan")
        fits.append(
            RateFit(
                kind=kind,
                slope=slope,
                intercept=intercept,
                residual=resid,
                slope_logadj=slope_adj,
                predicted=predicted_exponent(kind, config.sigma, config.p),
            )
        )
    failures = tuple(
        f"{c[0]},n={c[1]},seed={c[2]}: {c[4]}" for c in cells if c[3] is None
    )
    return RateResult(
        rows=tuple(rows),
        fits=tuple(fits),
        kappa1=kappa1,
        config_hash=config.config_hash(),
        completion=done / total if total else 0.0,
        failures=failures,
    )


def rates_csv(result: RateResult, constants: Constants | None = None) -> str:
    buf = io.StringIO()
    buf.write("kind,n,mean_excess,std_excess,seeds,config_hash\n")
    for r in result.rows:
        buf.write(
            f"{r.kind},{r.n},{_fmt(r.mean_excess)},{_fmt(r.std_excess)},{r.seeds},{result.config_hash}\n"
        )
    if constants is not None:
        block = ";".join(
            f"{k}={_fmt(v)}" for k, v in sorted(dataclasses.asdict(constants).items())
        )
        buf.write(f"# constants,{block}\n")
    buf.write("# fit,kind,slope,intercept,residual,slope_logadj,predicted_exponent\n")
    for f in result.fits:
        buf.write(
            f"# fit,{f.kind},{_fmt(f.slope)},{_fmt(f.intercept)},{_fmt(f.residual)},"
            f"{_fmt(f.slope_logadj)},{_fmt(f.predicted)}\n"
        )
    buf.write(f"# kappa1,{_fmt(result.kappa1)}\n")
    for msg in result.failures:
        buf.write(f"# failed_cell,{msg.replace(',', ';')}\n")
    return buf.getvalue()


def load_rates_csv(text: str):
    """Parse a rates CSV; returns (data rows, fit rows).  Rejects mixed hashes."""
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or lines[0] != "kind,n,mean_excess,std_excess,seeds,config_hash":
        raise PlotInputError("missing or malformed rates CSV header")
    data, fits = [], []
    hashes = set()
    for ln in lines[1:]:
        if ln.startswith("#"):
            parts = [p.strip() for p in ln.lstrip("#").split(",")]
            if parts and parts[0] == "fit" and len(parts) == 7 and parts[1] != "kind":
                fits.append(
                    dict(
                        kind=parts[1],
                        slope=float(parts[2]),
                        predicted=float(parts[6]),
                    )
                )
            continue
        parts = ln.split(",")
        if len(parts) != 6:
            raise PlotInputError(f"malformed data row: {ln!r}")
        data.append(
            dict(
                kind=parts[0],
                n=int(parts[1]),
                mean=float(parts[2]),
                std=float(parts[3]),
                seeds=int(parts[4]),
                config_hash=parts[5],
            )
        )
        hashes.add(parts[5])
    if not data:
        raise PlotInputError("rates CSV has an empty data section")
    if len(hashes) > 1:
        raise PlotInputError(f"rows from {len(hashes)} different configs in one file")
    return data, fits


def emit_plot(csv_path: str, out_path: str) -> str:
    """Log-log excess-vs-n plot with predicted-slope reference lines (SVG)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path, "r", encoding="utf-8") as fh:
        data, fits = load_rates_csv(fh.read())

    kinds = sorted({d["kind"] for d in data})
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    anchors = {}
    for kind in kinds:
        pts = sorted((d["n"], d["mean"]) for d in data if d["kind"] == kind)
        ns = np.array([p[0] for p in pts], dtype=float)
        ms = np.array([p[1] for p in pts], dtype=float)
        ax.loglog(ns, ms, marker="o", label=kind)
        anchors[kind] = (ns, ms)
    for f in fits:
        if not math.isfinite(f["predicted"]) or f["kind"] not in anchors:
            continue
        ns, ms = anchors[f["kind"]]
        ref = ms[0] * (ns / ns[0]) ** f["predicted"]
        ax.loglog(ns, ref, linestyle="--", linewidth=0.9,
                  label=f"{f['kind']} predicted n^{{{f['predicted']:.3g}}}")
    ax.set_xlabel("n")
    ax.set_ylabel("mean excess risk")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


# --- checks -------------------------------------------------------------------


@dataclass(frozen=True)
class CheckRow:
    check: str
    params: str
    statistic: float
    threshold: str
    passed: bool


@dataclass(frozen=True)
class CheckReport:
    rows: tuple[CheckRow, ...]
    config_hash: str

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _check_fixed_point_slope(config: ExperimentConfig) -> CheckRow:
    cp = config.checks
    lo, hi = cp.fixed_point_log2_n
    ns = 2.0 ** np.arange(lo, hi + 1)
    worst = 0.0
    for p in (1.0 / 3.0, 0.5, 2.0 / 3.0):
        lam = np.arange(1, cp.fixed_point_N + 1, dtype=float) ** (-1.0 / p)
        tail = PowerLawTail(coeff=1.0, exponent=1.0 / p, mult=1, start=cp.fixed_point_N + 1)
        zs = [fixed_point(lam, n, config.constants.c_tilde, tail=tail) for n in ns]
        slope, _, _ = fit_loglog_slope(ns, zs)
        worst = max(worst, abs(slope + 1.0 / (1.0 + p)))
    return CheckRow(
        check="fixed_point_slope",
        params=f"p=1/3;1/2;2/3 n=2^{lo}..2^{hi} N={cp.fixed_point_N}",
        statistic=worst,
        threshold="<=0.03",
        passed=worst <= 0.03,
    )


def _check_fixed_point_level(config: ExperimentConfig) -> CheckRow:
    """Level (not slope) of the fixed point against its closed-form rate.

    Sensitive to the front constant c_tilde, unlike the slope check: a
    broken c_tilde leaves the slope intact but shifts this ratio far out of
    band.
    """
    cp = config.checks
    p = 0.5
    lam = np.arange(1, cp.fixed_point_N + 1, dtype=float) ** (-1.0 / p)
    n = 2.0**16
    z = fixed_point(lam, n, config.constants.c_tilde)
    level = z * n ** (1.0 / (1.0 + p))  # weak-lp norm of the test law is 1
    passed = 0.02 <= level <= 50.0
    return CheckRow(
        check="fixed_point_level",
        params=f"p=1/2 n=2^16 N={cp.fixed_point_N}",
        statistic=level,
        threshold="in [0.02, 50]",
        passed=passed,
    )


def _check_localization_sum_ratio(config: ExperimentConfig) -> CheckRow:
    spec, _ = build_problem(config)
    g = config.checks.localization_ratio_grid
    xs = np.logspace(-6.0, 0.0, g)
    rs = np.logspace(0.0, 3.0, g)
    vals = [
        localization_sum_ratio(x, r, spec)
        for x in xs
        for r in rs
        if x <= r * r * spec.eigenvalues[0]
    ]
    stat = max(vals) / min(vals)
    return CheckRow(
        check="localization_sum_ratio",
        params=f"x=1e-6..1 r=1..1e3 grid={g}x{g}",
        statistic=stat,
        threshold="max/min<=10",
        passed=stat <= 10.0,
    )


def _check_approx_bound(config: ExperimentConfig) -> CheckRow:
    cp = config.checks
    rs = [2**k for k in range(cp.approx_r_max_log2 + 1)]
    worst_rel = 0.0
    all_ok = True
    for sigma, N, scale in zip(cp.approx_sigmas, cp.approx_N, cp.approx_g_scale):
        spec = build_spec(0.5, N)
        g = default_g(spec, 0.5, scale)
        task = make_target(spec, sigma, g)
        upper = []
        for r in rs:
            try:
                exact, _ = check_approx_bound(task, float(r))
            except RuntimeError:
                all_ok = False
                continue
            if r >= rs[len(rs) // 2] and exact > 0.0:
                upper.append((r, exact))
        k = 4.0 * sigma / (1.0 - 2.0 * sigma)
        if len(upper) < 2:
            all_ok = False
            continue
        slope, _, _ = fit_loglog_slope([u[0] for u in upper], [u[1] for u in upper])
        worst_rel = max(worst_rel, abs(slope + k) / k)
    return CheckRow(
        check="approx_bound",
        params=f"sigma={cp.approx_sigmas} r=1..2^{cp.approx_r_max_log2} p=1/2",
        statistic=worst_rel,
        threshold="bound holds and |slope rel err|<=0.10",
        passed=all_ok and worst_rel <= 0.10,
    )


def _check_inclusion(config: ExperimentConfig) -> CheckRow:
    spec, task = build_problem(config)
    x = task.l2_norm_sq()  # the zero function qualifies at this level
    stat = cx.low_excess_inclusion(
        task,
        config.checks.inclusion_r,
        x,
        config.checks.inclusion_samples,
        seed=seed_u64(config.root_seed, "check", "inclusion"),
    )
    return CheckRow(
        check="low_excess_inclusion",
        params=f"r={config.checks.inclusion_r} x=|a|^2 samples={config.checks.inclusion_samples}",
        statistic=stat,
        threshold="max ratio<=1",
        passed=stat <= 1.0,
    )


def _check_slepian(config: ExperimentConfig) -> CheckRow:
    spec, _ = build_problem(config)
    cp = config.checks
    c2s = []
    for k in range(4, 13):
        n = 2**k
        rng_seed = seed_u64(config.root_seed, "check", "slepian", n)
        sample = draw_sample(
            make_target(spec, 0.5, default_g(spec)), n, rng_seed
        )
        mean, _, wmax = cx.gaussian_sup_norm(
            spec, sample.xs, cp.slepian_x, 1.0,
            cx.MCConfig(draws=cp.slepian_draws, seed=rng_seed),
        )
        c2s.append(mean / (math.sqrt(math.log(n)) * wmax))
    stat = max(c2s) / min(c2s)
    return CheckRow(
        check="slepian_sup_norm",
        params=f"n=2^4..2^12 x={cp.slepian_x} r=1 draws={cp.slepian_draws}",
        statistic=stat,
        threshold="c2 drift<=2",
        passed=stat <= 2.0,
    )


def _check_dudley(config: ExperimentConfig) -> CheckRow:
    spec, _ = build_problem(config)
    cp = config.checks
    ns = [2**k for k in range(6, 13)]
    over_q, over_qlog = [], []
    for n in ns:
        rng_seed = seed_u64(config.root_seed, "check", "dudley", n)
        sample = draw_sample(make_target(spec, 0.5, default_g(spec)), n, rng_seed)
        bound = cx.dudley_gamma2_bound(
            spec, sample.xs, cp.dudley_x, 1.0,
            cx.MCConfig(draws=cp.dudley_draws, seed=rng_seed),
            c4=config.constants.c4_dudley,
        )
        Q = localized_width(cp.dudley_x, 1.0, spec)
        over_q.append(bound / Q)
        over_qlog.append(bound / (Q * math.log(n)))
    exponent, _, _ = fit_loglog_slope(np.log(np.asarray(ns, dtype=float)), over_q)
    bounded = max(over_qlog) <= 5.0
    return CheckRow(
        check="dudley_ratio",
        params=f"n=2^6..2^12 x={cp.dudley_x} maxratio={max(over_qlog):.4g}",
        statistic=exponent,
        threshold="bound/(Q ln n)<=5 and ln-n exponent in [0,1]",
        passed=bounded and 0.0 <= exponent <= 1.0,
    )


def _check_sup_ratio(config: ExperimentConfig) -> CheckRow:
    spec, _ = build_problem(config)
    spec2 = build_spec(config.p, 2 * config.N - 1)  # doubled frequency content
    m = config.checks.sup_ratio_family
    seed = seed_u64(config.root_seed, "check", "sup_ratio")
    r1 = cx.sup_ratio_floor(spec, m, seed=seed)
    r2 = cx.sup_ratio_floor(spec2, m, seed=seed)
    factor = max(r1, r2) / min(r1, r2) if min(r1, r2) > 0.0 else float("inf")
    return CheckRow(
        check="sup_ratio_floor",
        params=f"m={m} N={config.N}->{2 * config.N - 1} min1={r1:.4g} min2={r2:.4g}",
        statistic=factor,
        threshold="min>0 and doubling drift<=2",
        passed=r1 > 0.0 and r2 > 0.0 and factor <= 2.0,
    )


def _check_peeling(config: ExperimentConfig) -> CheckRow:
    spec, task = build_problem(config)
    const = peeling_bound_constant(spec.p)
    worst = 0.0
    for x in np.logspace(-6.0, 0.0, 7):
        for el in (0.0, x, 1.0):
            base = process_bound(x, 2.0, 1024.0, el, spec, config.constants)
            if base == 0.0:
                continue
            total = peeling_sum(x, 2.0, 1024.0, el, spec, config.constants)
            worst = max(worst, total / (const * base))
    return CheckRow(
        check="peeling_sum",
        params="x=1e-6..1 r=2 n=1024 el in {0,x,1}",
        statistic=worst,
        threshold="sum <= 2^{2-p/2}/(1-2^{-p/2}) * phi",
        passed=worst <= 1.0,
    )


def _check_isomorphism(config: ExperimentConfig) -> CheckRow:
    spec, task = build_problem(config)
    cp = config.checks
    calib = cx.isomorphism_worst_multipliers(
        task,
        cp.iso_r,
        cp.iso_n,
        cp.iso_calib_trials,
        seed=seed_u64(config.root_seed, "check", "iso", "calib"),
        constants=config.constants,
        u=config.constants.u,
    )
    scale = max(1.0, 1.2 * float(calib.max()))
    rate = cx.isomorphism_mc(
        task,
        cp.iso_r,
        cp.iso_n,
        cp.iso_trials,
        seed=seed_u64(config.root_seed, "check", "iso", "test"),
        constants=config.constants,
        u=config.constants.u,
        budget_scale=scale,
    )
    return CheckRow(
        check="isomorphism_mc",
        params=f"n={cp.iso_n} r={cp.iso_r} trials={cp.iso_trials} scale={scale:.4g}",
        statistic=rate,
        threshold="failure rate<=0.05",
        passed=rate <= 0.05,
    )


_CHECKS = (
    _check_fixed_point_slope,
    _check_fixed_point_level,
    _check_localization_sum_ratio,
    _check_approx_bound,
    _check_inclusion,
    _check_slepian,
    _check_dudley,
    _check_sup_ratio,
    _check_peeling,
    _check_isomorphism,
)


def run_checks(config: ExperimentConfig) -> CheckReport:
    rows = []
    for fn in _CHECKS:
        name = fn.__name__.removeprefix("_check_")
        try:
            rows.append(fn(config))
        except Exception as exc:  # a crash is a recorded failure
            rows.append(
                CheckRow(
                    check=name,
                    params=f"crash: {type(exc).__name__}: {exc}",
                    statistic=float("nan"),
                    threshold="-",
                    passed=False,
                )
            )
    return CheckReport(rows=tuple(rows), config_hash=config.config_hash())


def checks_csv(report: CheckReport) -> str:
    buf = io.StringIO()
    buf.write("check,params,statistic,threshold,passed,config_hash\n")
    for r in report.rows:
        params = r.params.replace(",", ";")
        threshold = r.threshold.replace(",", ";")
        buf.write(
            f"{r.check},{params},{_fmt(r.statistic)},{threshold},"
            f"{'pass' if r.passed else 'fail'},{report.config_hash}\n"
        )
    return buf.getvalue()


# --- complexity study ---------------------------------------------------------


def run_complexity(config: ExperimentConfig) -> str:
    """Localized-complexity scaling sweep plus the Slepian/Dudley columns (CSV)."""
    spec, _ = build_problem(config)
    cp = config.checks
    buf = io.StringIO()
    buf.write("study,n,x,r,estimate,stderr,bound,ratio,config_hash\n")
    h = config.config_hash()
    lo, hi = cp.loc_gauss_log2_n
    levels = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    for k in range(lo, hi + 1):
        n = 2**k
        mc = cx.MCConfig(
            draws=cp.loc_gauss_draws,
            seed=seed_u64(config.root_seed, "complexity", "loc", n),
        )
        for x, (est, se) in zip(levels, cx.localized_gaussian_sweep(spec, n, levels, 1.0, mc)):
            bound = math.sqrt(sum_min(x, 1.0, spec.eigenvalues) / n)
            buf.write(
                f"loc_gauss,{n},{_fmt(x)},1,{_fmt(est)},{_fmt(se)},{_fmt(bound)},"
                f"{_fmt(est / bound)},{h}\n"
            )
    for k in range(4, 13):
        n = 2**k
        seed = seed_u64(config.root_seed, "complexity", "slepian", n)
        sample = draw_sample(make_target(spec, 0.5, default_g(spec)), n, seed)
        mc = cx.MCConfig(draws=cp.slepian_draws, seed=seed)
        mean, se, wmax = cx.gaussian_sup_norm(spec, sample.xs, cp.slepian_x, 1.0, mc)
        bound = math.sqrt(math.log(n)) * wmax
        buf.write(
            f"slepian,{n},{_fmt(cp.slepian_x)},1,{_fmt(mean)},{_fmt(se)},"
            f"{_fmt(bound)},{_fmt(mean / bound)},{h}\n"
        )
    for k in range(6, 13):
        n = 2**k
        seed = seed_u64(config.root_seed, "complexity", "dudley", n)
        sample = draw_sample(make_target(spec, 0.5, default_g(spec)), n, seed)
        mc = cx.MCConfig(draws=cp.dudley_draws, seed=seed)
        bound = cx.dudley_gamma2_bound(
            spec, sample.xs, cp.dudley_x, 1.0, mc, c4=config.constants.c4_dudley
        )
        Q = localized_width(cp.dudley_x, 1.0, spec)
        buf.write(
            f"dudley,{n},{_fmt(cp.dudley_x)},1,{_fmt(bound)},0,{_fmt(Q * math.log(n))},"
            f"{_fmt(bound / (Q * math.log(n)))},{h}\n"
        )
    return buf.getvalue()


def write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
