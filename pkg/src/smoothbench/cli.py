"""Experiment runner: config parsing, replicate dispatch, artifact output.

Usage: smoothbench <experiment> --config PATH [--seed U64] [--out DIR]
[--threads N].  Configs are plain key=value lines with '#' comments.  Each
run writes rows.csv (per-replicate rows), summary.json (aggregates and
verdicts), and manifest.json (config echo, seed, tool version).  Identical
config and seed reproduce byte-identical rows.csv at any thread count.

Exit codes: 0 all verdicts pass, 2 a statistical check failed,
3 configuration error, 4 integrity error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adversaries import (
    BoxUniformAdversary,
    LowerBoundAdversary,
    coupling_sample,
    interval_uniform,
    unit_box,
)
from .complexity import (
    covering_thresholds_1d,
    gaussian,
    log_wills,
    log_wills_box_indicators,
    offset_rademacher,
    rademacher,
)
from .core import (
    ConfigurationError,
    IntegrityError,
    NoiseModel,
    mean_and_stderr,
    run_session,
)
from .hypotheses import (
    CoordinateRecordLearner,
    binary_difference_family,
    random_step_family,
)
from .rng import derive_seed, make_rng
from .verifiers import (
    SmallBallParams,
    basic_inequality_check,
    decoupling_gap,
    norm_comparison_gap,
    small_ball_check,
    small_ball_norm_domination,
    verify_self_bounded,
)

# Auxiliary RNG streams live outside the replicate-index namespace.
_AUX_STREAM = 1 << 32

EXPERIMENTS = (
    "err_scaling",
    "iid_baseline",
    "verify_lemma3",
    "decoupling",
    "normcmp",
    "basic_ineq",
    "smallball",
    "complexity_table",
    "coupling_audit",
)

# Allowed config keys per experiment; anything else is rejected.
_KEYS: dict[str, set[str]] = {
    "err_scaling": {"d", "sigma", "T", "eps", "nu", "reps", "mc_reps", "m", "seed"},
    "iid_baseline": {"d", "sigma", "T", "reps", "seed"},
    "verify_lemma3": {"T", "grid", "eps", "seed"},
    "decoupling": {"d", "sigma", "T", "eps", "reps", "seed"},
    "normcmp": {"d", "sigma", "T", "c", "reps", "mc_reps", "m", "seed"},
    "basic_ineq": {"d", "sigma", "T", "nu", "reps", "mc_reps", "m", "seed"},
    "smallball": {"sigma", "c", "c_prime", "delta_tilde", "T", "reps", "m", "seed"},
    "complexity_table": {"m", "reps", "c", "seed"},
    "coupling_audit": {"sigma", "k", "m", "seed"},
}


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 1
    sigma: list[float] = field(default_factory=lambda: [1.0])
    T: list[int] = field(default_factory=lambda: [1024])
    eps: float | str = "auto"
    c: list[float] = field(default_factory=lambda: [0.5])
    c_prime: float = 0.5
    delta_tilde: float = 0.1
    nu: float = 0.0
    reps: int = 100
    mc_reps: int = 0
    m: int = 0
    k: list[int] = field(default_factory=lambda: [10])
    grid: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    eps_list: list[float] = field(default_factory=lambda: [0.5])
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1


class ConfigFileError(ConfigurationError):
    pass


def parse_config_lines(lines) -> list[tuple[int, str, str]]:
    entries = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        entries.append((lineno, key.strip(), value.strip()))
    return entries


def _floats(value: str) -> list[float]:
    return [float(v) for v in value.replace(",", " ").split()]


def _ints(value: str) -> list[int]:
    return [int(v) for v in value.replace(",", " ").split()]


def build_config(experiment: str, entries, seed_override=None, out_dir=None,
                 threads=None) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigFileError(f"unknown experiment {experiment!r}")
    cfg = ExperimentConfig(experiment=experiment)
    allowed = _KEYS[experiment]
    for lineno, key, value in entries:
        if key not in allowed:
            raise ConfigFileError(
                f"line {lineno}: key {key!r} is not valid for {experiment}")
        try:
            if key == "d":
                cfg.d = int(value)
            elif key == "sigma":
                cfg.sigma = _floats(value)
            elif key == "T":
                cfg.T = _ints(value)
            elif key == "eps":
                if experiment == "verify_lemma3":
                    cfg.eps_list = _floats(value)
                else:
                    cfg.eps = value if value == "auto" else float(value)
            elif key == "c":
                cfg.c = _floats(value)
            elif key == "c_prime":
                cfg.c_prime = float(value)
            elif key == "delta_tilde":
                cfg.delta_tilde = float(value)
            elif key == "nu":
                cfg.nu = float(value)
            elif key == "reps":
                cfg.reps = int(value)
            elif key == "mc_reps":
                cfg.mc_reps = int(value)
            elif key == "m":
                cfg.m = int(value)
            elif key == "k":
                cfg.k = _ints(value)
            elif key == "grid":
                cfg.grid = _floats(value)
            elif key == "seed":
                cfg.seed = int(value)
        except ValueError as exc:
            raise ConfigFileError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    _validate_domains(cfg)
    if seed_override is not None:
        cfg.seed = int(seed_override)
    if out_dir is not None:
        cfg.out_dir = str(out_dir)
    if threads is not None:
        cfg.threads = max(1, int(threads))
    return cfg


def _validate_domains(cfg: ExperimentConfig) -> None:
    if cfg.d < 1:
        raise ConfigFileError("d must be >= 1")
    for s in cfg.sigma:
        if not 0 < s <= 1:
            raise ConfigFileError("sigma values must lie in (0, 1]")
    for T in cfg.T:
        if T < 1:
            raise ConfigFileError("T values must be >= 1")
    if cfg.reps < 1:
        raise ConfigFileError("reps must be >= 1")
    if cfg.nu < 0:
        raise ConfigFileError("nu must be >= 0")
    if isinstance(cfg.eps, float) and cfg.eps <= 0:
        raise ConfigFileError("eps must be positive or 'auto'")


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def fit_scaling_exponent(pairs) -> tuple[float, float]:
    """Least-squares slope of log(mean_err) against log(T).

    Rows with non-positive mean error are excluded with a warning; fewer
    than 3 usable rows is an error.
    """
    usable = []
    for T, mean_err in pairs:
        if mean_err <= 0:
            warnings.warn(f"excluding T={T}: non-positive mean error", RuntimeWarning,
                          stacklevel=2)
            continue
        usable.append((math.log(T), math.log(mean_err)))
    if len(usable) < 3:
        raise ConfigurationError("need at least 3 positive (T, mean_err) rows")
    x = np.asarray([u[0] for u in usable])
    y = np.asarray([u[1] for u in usable])
    xc = x - x.mean()
    slope = float((xc @ (y - y.mean())) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = len(usable) - 2
    if dof > 0:
        se = float(math.sqrt((resid @ resid) / dof / (xc @ xc)))
    else:
        se = 0.0
    return slope, se


def reference_error_floor(d: int, sigma: float, T: int) -> float:
    """The forced-error reference 0.5 * sqrt(d*T*(1-sigma^(1/d))/sigma^(1/d))."""
    side = sigma ** (1.0 / d)
    return 0.5 * math.sqrt(d * T * (1.0 - side) / side)


def error_envelope(d: int, sigma: float, T: int, nu: float, log_wills_term: float) -> float:
    """Loose upper envelope 20 log^3(T)/sigma * sqrt(T (1+nu) (1 + logW))."""
    return (20.0 * math.log(T) ** 3 / sigma) * math.sqrt(T * (1.0 + nu) * (1.0 + log_wills_term))


def harmonic_number(n: int) -> float:
    return float(np.sum(1.0 / np.arange(1, n + 1)))


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))


def _session_sweep(cfg: ExperimentConfig, sigma: float):
    """Run the record-learner sessions for every (T, replicate) pair."""
    rows = []
    per_T = []
    for T in cfg.T:
        adversary = LowerBoundAdversary(cfg.d, sigma, cfg.eps)
        eps_resolved = adversary.resolve_eps(T)
        learner = CoordinateRecordLearner(cfg.d)

        def one(rep: int, T=T, adversary=adversary, learner=learner):
            rep_seed = derive_seed(cfg.seed, T, rep)
            tr = run_session(learner, adversary, T, NoiseModel.noiseless(), rep_seed)
            return rep, rep_seed, tr.cum_err

        results = _pool_map(one, range(cfg.reps), cfg.threads)
        errs = [r[2] for r in results]
        mean, se = mean_and_stderr(errs)
        per_T.append({"T": T, "eps": eps_resolved, "mean_cum_err": mean, "stderr": se})
        for rep, rep_seed, cum in results:
            rows.append([rep, T, sigma, cfg.d, eps_resolved, rep_seed, cum])
    return rows, per_T


def _run_err_scaling(cfg: ExperimentConfig):
    sigma = cfg.sigma[0]
    rows, per_T = _session_sweep(cfg, sigma)
    envelope_reps = cfg.mc_reps or 8
    m_cap = cfg.m or 1_000_000
    all_pass = True
    for entry in per_T:
        T = entry["T"]
        bound = reference_error_floor(cfg.d, sigma, T)
        m = min(int(math.ceil(2.0 * T * math.log(T) / sigma)), m_cap)
        lw = log_wills_box_indicators(cfg.d, m, 256.0, envelope_reps,
                                      make_rng(cfg.seed, _AUX_STREAM, T))
        envelope = error_envelope(cfg.d, sigma, T, cfg.nu, lw.point)
        entry["reference_bound"] = bound
        entry["envelope_rhs"] = envelope
        entry["envelope_log_wills"] = lw.point
        entry["envelope_ok"] = entry["mean_cum_err"] <= envelope
        entry["above_reference"] = entry["mean_cum_err"] >= bound - 2.0 * entry["stderr"]
        all_pass = all_pass and entry["envelope_ok"] and entry["above_reference"]
    summary = {
        "experiment": "err_scaling",
        "d": cfg.d,
        "sigma": sigma,
        "reps": cfg.reps,
        "reference_bound_formula": "0.5*sqrt(d*T*(1-sigma^(1/d))/sigma^(1/d))",
        "per_T": per_T,
        "pass": all_pass,
    }
    if len(per_T) >= 3:
        slope, slope_se = fit_scaling_exponent(
            [(e["T"], e["mean_cum_err"]) for e in per_T])
        summary["slope"] = slope
        summary["slope_stderr"] = slope_se
    header = ["rep", "t_final", "sigma", "d", "eps", "seed", "cum_err"]
    return header, rows, summary


def _run_iid_baseline(cfg: ExperimentConfig):
    sigma = cfg.sigma[0]
    rows, per_T = _session_sweep(cfg, sigma)
    for entry in per_T:
        href = harmonic_number(entry["T"])
        entry["harmonic_reference"] = href
        entry["relative_gap"] = abs(entry["mean_cum_err"] - href) / href
        entry["within_10pct"] = entry["relative_gap"] <= 0.10
    summary = {
        "experiment": "iid_baseline",
        "d": cfg.d,
        "sigma": sigma,
        "reps": cfg.reps,
        "per_T": per_T,
        "pass": all(e["within_10pct"] for e in per_T),
    }
    if len(per_T) >= 3:
        slope, slope_se = fit_scaling_exponent(
            [(e["T"], e["mean_cum_err"]) for e in per_T])
        summary["slope"] = slope
        summary["slope_stderr"] = slope_se
    header = ["rep", "t_final", "sigma", "d", "eps", "seed", "cum_err"]
    return header, rows, summary


def _run_verify_lemma3(cfg: ExperimentConfig):
    rows = []
    verdicts = []
    worst_overall = -1
    for T in cfg.T:
        for eps in cfg.eps_list:
            res = verify_self_bounded(T, cfg.grid, eps)
            rows.append([T, eps, res.K, res.worst, res.bound, res.passed])
            verdicts.append(res.passed)
            worst_overall = max(worst_overall, res.worst)
    summary = {
        "experiment": "verify_lemma3",
        "grid": cfg.grid,
        "worst_B": worst_overall,
        "pass": all(verdicts),
    }
    header = ["T", "eps", "K", "worst_B", "bound", "pass"]
    return header, rows, summary


def _check_summary(name: str, cfg: ExperimentConfig, result) -> dict:
    return {
        "experiment": name,
        "lhs": result.lhs,
        "rhs": result.rhs,
        "lhs_stderr": result.lhs_se,
        "rhs_stderr": result.rhs_se,
        "pooled_stderr": result.pooled_se,
        "pass": result.passed,
        "extras": {k: v for k, v in result.extras.items()
                   if not isinstance(v, (list, np.ndarray))},
    }


def _run_decoupling(cfg: ExperimentConfig):
    sigma = cfg.sigma[0]
    adversary = LowerBoundAdversary(cfg.d, sigma, cfg.eps)
    learner = CoordinateRecordLearner(cfg.d)
    result = decoupling_gap(learner, adversary, cfg.T[0], cfg.reps, cfg.seed)
    header = ["rep", "lhs_rep", "inner_rep"]
    rows = [[r, lhs, inner] for r, (lhs, inner) in
            enumerate(zip(result.extras["lhs_values"], result.extras["inner_values"]))]
    return header, rows, _check_summary("decoupling", cfg, result)


def _run_normcmp(cfg: ExperimentConfig):
    sigma = cfg.sigma[0]
    family = random_step_family(make_rng(cfg.seed, _AUX_STREAM, 101), 16)
    adversary = LowerBoundAdversary(cfg.d, sigma, cfg.eps if cfg.eps != "auto" else "auto")
    rows = []
    results = []
    for c in cfg.c:
        res = norm_comparison_gap(family, adversary, cfg.T[0], c, cfg.reps,
                                  cfg.seed, m_cap=cfg.m or 1_000_000,
                                  wills_reps=cfg.mc_reps or None)
        for r, lhs_rep in enumerate(res.extras["lhs_values"]):
            rows.append([c, r, lhs_rep])
        results.append(res)
    summary = {
        "experiment": "normcmp",
        "sigma": sigma,
        "T": cfg.T[0],
        "checks": [_check_summary("normcmp", cfg, r) for r in results],
        "pass": all(r.passed for r in results),
    }
    header = ["c", "rep", "lhs_rep"]
    return header, rows, summary


def _run_basic_ineq(cfg: ExperimentConfig):
    sigma = cfg.sigma[0]
    family = random_step_family(make_rng(cfg.seed, _AUX_STREAM, 103), 8)
    adversary = BoxUniformAdversary(cfg.d, sigma, fstar=family.members[0])
    noise = NoiseModel.gaussian(cfg.nu) if cfg.nu > 0 else NoiseModel.noiseless()
    result = basic_inequality_check(family, adversary, cfg.T[0], noise, cfg.reps,
                                    cfg.seed, m_cap=cfg.m or 1_000_000,
                                    wills_reps=cfg.mc_reps or None)
    header = ["rep", "lhs_rep"]
    rows = [[r, v] for r, v in enumerate(result.extras["lhs_values"])]
    return header, rows, _check_summary("basic_ineq", cfg, result)


def _run_smallball(cfg: ExperimentConfig):
    sigma = cfg.sigma[0]
    params = SmallBallParams(c=cfg.c[0], c_prime=cfg.c_prime, sigma=sigma,
                             delta_tilde=cfg.delta_tilde)
    pairs = [(0.01 * j, 0.85 + 0.015 * j) for j in range(8)]
    family = binary_difference_family(pairs)
    base = unit_box(1)
    n = cfg.m or 100_000
    sb = small_ball_check(family, base, params, n, cfg.seed)
    adversary = LowerBoundAdversary(1, sigma, "auto")
    dom = small_ball_norm_domination(family, base, adversary, params, cfg.T[0],
                                     cfg.reps, cfg.seed)
    summary = {
        "experiment": "smallball",
        "small_ball": {
            "max_violation": sb.max_violation,
            "bound": sb.bound,
            "stderr": sb.stderr,
            "pass": sb.passed,
        },
        "norm_domination": _check_summary("smallball", cfg, dom),
        "pass": sb.passed and dom.passed,
    }
    header = ["member", "violation_probability"]
    rows = [[j, p] for j, p in enumerate(sb.per_member)]
    return header, rows, summary


def _run_complexity_table(cfg: ExperimentConfig):
    family = random_step_family(make_rng(cfg.seed, _AUX_STREAM, 105), 16)
    m = cfg.m or 50
    reps = cfg.reps
    Z = make_rng(cfg.seed, _AUX_STREAM, 106).random(m)
    rows = []
    estimates = {
        "log_wills": log_wills(family, Z, reps, make_rng(cfg.seed, _AUX_STREAM, 107)),
        "rademacher": rademacher(family, Z, reps, make_rng(cfg.seed, _AUX_STREAM, 108)),
        "gaussian": gaussian(family, Z, reps, make_rng(cfg.seed, _AUX_STREAM, 109)),
        "offset_rademacher": offset_rademacher(family, Z, cfg.c[0], reps,
                                               make_rng(cfg.seed, _AUX_STREAM, 110)),
    }
    for kind, est in estimates.items():
        rows.append([kind, est.m, est.reps, est.point, est.stderr])
    summary = {
        "experiment": "complexity_table",
        "m": m,
        "family_size": family.size,
        "log_family_size": math.log(family.size),
        "covering_example": covering_thresholds_1d(0.1),
        "estimates": {k: {"point": e.point, "stderr": e.stderr}
                      for k, e in estimates.items()},
        "pass": True,
    }
    header = ["kind", "m", "reps", "point", "stderr"]
    return header, rows, summary


def _run_coupling_audit(cfg: ExperimentConfig):
    trials = cfg.m or 100_000
    rows = []
    all_pass = True
    for sigma in cfg.sigma:
        for k in cfg.k:
            rng = make_rng(cfg.seed, int(sigma * 1000), k)
            dist = interval_uniform(0.0, sigma, sigma=sigma)
            coupled = np.empty(trials)
            misses = 0
            for i in range(trials):
                x, _, hit = coupling_sample(dist, k, rng)
                coupled[i] = x[0]
                if not hit:
                    misses += 1
            miss_rate = misses / trials
            miss_bound = math.exp(-sigma * k)
            miss_se = math.sqrt(max(miss_rate * (1 - miss_rate), 1e-12) / trials)
            direct = dist.sample_many(make_rng(cfg.seed, int(sigma * 1000), k, 1),
                                      trials)[:, 0]
            ks = ks_two_sample(coupled, direct)
            crit = ks_critical(trials, trials)
            ok = miss_rate <= miss_bound + 3 * miss_se and ks <= crit
            all_pass = all_pass and ok
            rows.append([sigma, k, trials, miss_rate, miss_bound, ks, crit, ok])
    summary = {
        "experiment": "coupling_audit",
        "trials": trials,
        "pass": all_pass,
    }
    header = ["sigma", "k", "trials", "miss_rate", "miss_bound", "ks_stat",
              "ks_critical", "pass"]
    return header, rows, summary


_RUNNERS = {
    "err_scaling": _run_err_scaling,
    "iid_baseline": _run_iid_baseline,
    "verify_lemma3": _run_verify_lemma3,
    "decoupling": _run_decoupling,
    "normcmp": _run_normcmp,
    "basic_ineq": _run_basic_ineq,
    "smallball": _run_smallball,
    "complexity_table": _run_complexity_table,
    "coupling_audit": _run_coupling_audit,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one experiment and write rows.csv, summary.json, manifest.json."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header, rows, summary = _RUNNERS[cfg.experiment](cfg)
    _write_rows(out / "rows.csv", header, rows)
    with (out / "summary.json").open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    manifest = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "tool_version": __version__,
        "config": {
            "d": cfg.d, "sigma": cfg.sigma, "T": cfg.T, "eps": cfg.eps,
            "c": cfg.c, "c_prime": cfg.c_prime, "delta_tilde": cfg.delta_tilde,
            "nu": cfg.nu, "reps": cfg.reps, "mc_reps": cfg.mc_reps, "m": cfg.m,
            "k": cfg.k, "grid": cfg.grid, "threads": cfg.threads,
        },
    }
    with (out / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="smoothbench", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("SMOOTHBENCH_THREADS", "1")))
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            entries = parse_config_lines(fh)
        cfg = build_config(args.experiment, entries, seed_override=args.seed,
                           out_dir=args.out or "out", threads=args.threads)
        summary = run_experiment(cfg)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except IntegrityError as exc:
        print(f"integrity error ({exc.__class__.__module__}): {exc}", file=sys.stderr)
        return 4
    if not summary.get("pass", True):
        print("at least one statistical check failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
