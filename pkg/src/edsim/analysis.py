"""Experiment comparison pipeline: load CSV triplets, gate tests, render reports."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import stats
from .domain import validate_config
from .metrics import SchemaError, read_doctors, read_nurses, read_runs

NORMALITY_ALPHA = 0.05

COMPARISONS_HEADER = (
    "metric,group_a,group_b,mean_a,mean_b,median_a,median_b,sw_p_a,sw_p_b,"
    "test,statistic,p_value,degenerate"
)


class MissingFile(FileNotFoundError):
    pass


class MetricUnknown(KeyError):
    pass


@dataclass
class ExperimentData:
    """One experiment directory, parsed and indexed by run."""

    label: str
    runs: list
    doctors_by_run: dict
    nurses_by_run: dict
    roster: tuple  # (doctors tuple, nurses tuple) from the config echo


def load_experiment(path: str) -> ExperimentData:
    """Read the runs/doctors/nurses triplet (plus config echo) of one experiment."""
    paths = {name: os.path.join(path, f"{name}.csv") for name in ("runs", "doctors", "nurses")}
    for name, p in paths.items():
        if not os.path.isfile(p):
            raise MissingFile(f"{path}: missing {name}.csv")
    runs = sorted(read_runs(paths["runs"]), key=lambda r: r["run_id"])
    doctors_by_run: dict = {}
    for row in read_doctors(paths["doctors"]):
        doctors_by_run.setdefault(row["run_id"], []).append(row)
    nurses_by_run: dict = {}
    for row in read_nurses(paths["nurses"]):
        nurses_by_run.setdefault(row["run_id"], []).append(row)
    for r in runs:
        if r["run_id"] not in doctors_by_run or r["run_id"] not in nurses_by_run:
            raise SchemaError(f"{path}: run {r['run_id']} lacks per-agent rows")

    echo_path = os.path.join(path, "config.echo")
    if os.path.isfile(echo_path):
        raw = {}
        with open(echo_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if line and "=" in line:
                    k, v = line.split("=", 1)
                    raw[k.strip()] = v.strip()
        cfg = validate_config(raw)
        roster = (cfg.doctors, cfg.nurses)
    else:
        # Fall back to the configured part of the observed roster.
        first = runs[0]["run_id"] if runs else None
        doctors = tuple(
            (d["doctor_id"], d["style"]) for d in doctors_by_run.get(first, [])
        )
        nurses = tuple(
            (n["nurse_id"], n["quality"])
            for n in nurses_by_run.get(first, [])
            if n["role"] != "replacement"
        )
        roster = (doctors, nurses)
    return ExperimentData(
        label=os.path.basename(os.path.normpath(path)) or path,
        runs=runs,
        doctors_by_run=doctors_by_run,
        nurses_by_run=nurses_by_run,
        roster=roster,
    )


def check_rosters_match(a: ExperimentData, b: ExperimentData) -> None:
    """Raise SchemaError when the configured rosters differ between experiments."""
    diffs = []
    for kind, idx in (("doctor", 0), ("nurse", 1)):
        left = {i: k for i, k in _roster_tokens(a.roster[idx])}
        right = {i: k for i, k in _roster_tokens(b.roster[idx])}
        for ident in sorted(set(left) | set(right)):
            if left.get(ident) != right.get(ident):
                diffs.append(f"{kind} {ident}: {left.get(ident, '-')} vs {right.get(ident, '-')}")
    if diffs:
        raise SchemaError("experiment rosters differ: " + "; ".join(diffs))


def _roster_tokens(entries) -> list:
    out = []
    for ident, kind in entries:
        out.append((ident, kind.value if hasattr(kind, "value") else str(kind)))
    return out


def _run_values(data: ExperimentData, key: str) -> list[float]:
    return [float(r[key]) for r in data.runs]


def _nurse_values(data: ExperimentData, key: str, quality: str, original_only: bool) -> list[float]:
    values = []
    for r in data.runs:
        rows = [n for n in data.nurses_by_run[r["run_id"]] if n["quality"] == quality]
        if original_only:
            rows = [n for n in rows if n["role"] != "replacement"]
        values.append(float(sum(n[key] for n in rows)))
    return values


def _nurse_metric(key: str, quality: str, original_only: bool) -> Callable[[ExperimentData], list[float]]:
    return lambda data: _nurse_values(data, key, quality, original_only)


METRICS: dict[str, Callable[[ExperimentData], list[float]]] = {
    "patients_served": lambda d: _run_values(d, "patients_served"),
    "total_time_damage_s": lambda d: _run_values(d, "total_time_damage_s"),
    "total_delay_s": lambda d: _run_values(d, "total_delay_s"),
}
for _key in ("tasks_success", "tasks_failed", "utility", "time_damage_s"):
    METRICS[f"low_nurse_{_key}"] = _nurse_metric(_key, "low", original_only=False)
    METRICS[f"high_nurse_{_key}"] = _nurse_metric(_key, "high", original_only=True)

DOCTOR_PREFERENCE_METRIC = "doctor_preference_chi2"
DOCTOR_VARIANCE_METRIC = "patients_per_doctor_variance"
SPECIAL_METRICS = (DOCTOR_PREFERENCE_METRIC, DOCTOR_VARIANCE_METRIC)


def metric_names() -> list[str]:
    return list(METRICS) + list(SPECIAL_METRICS)


@dataclass
class ComparisonRow:
    metric: str
    group_a: str
    group_b: str
    mean_a: float
    mean_b: float
    median_a: float
    median_b: float
    sw_a: Optional[stats.TestResult] = None
    sw_b: Optional[stats.TestResult] = None
    chosen: Optional[stats.TestResult] = None
    degenerate: bool = False
    notes: str = ""
    values_a: list = field(default_factory=list, repr=False)
    values_b: list = field(default_factory=list, repr=False)


def _median(xs: list[float]) -> float:
    s = sorted(xs)
    n = len(s)
    mid = n // 2
    return s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2.0


def _zero_variance(xs: list[float]) -> bool:
    return len(xs) < 2 or min(xs) == max(xs)


def _try_shapiro(xs: list[float], label: str) -> Optional[stats.TestResult]:
    try:
        return stats.shapiro_wilk(xs, label)
    except stats.DegenerateSample:
        return None


def _gated_row(metric: str, a: list[float], b: list[float], label_a: str, label_b: str) -> ComparisonRow:
    row = ComparisonRow(
        metric=metric,
        group_a=label_a,
        group_b=label_b,
        mean_a=sum(a) / len(a),
        mean_b=sum(b) / len(b),
        median_a=_median(a),
        median_b=_median(b),
        values_a=a,
        values_b=b,
    )
    degen_a, degen_b = _zero_variance(a), _zero_variance(b)
    if degen_a and degen_b:
        row.degenerate = True
        row.notes = "no variance in either group; no test meaningful"
        return row
    row.sw_a = _try_shapiro(a, label_a)
    row.sw_b = _try_shapiro(b, label_b)
    normal_a = row.sw_a is not None and row.sw_a.p_value >= NORMALITY_ALPHA
    normal_b = row.sw_b is not None and row.sw_b.p_value >= NORMALITY_ALPHA
    if normal_a and normal_b:
        row.chosen = stats.welch_t_test(a, b)
    else:
        row.chosen = stats.wilcoxon_rank_sum(a, b)
    return row


def _doctor_counts(data: ExperimentData, run_id: str) -> list[int]:
    rows = sorted(data.doctors_by_run[run_id], key=lambda d: d["doctor_id"])
    return [int(d["patients_served"]) for d in rows]


def _preference_pvalues(data: ExperimentData, mc_draws: int, mc_seed: int) -> list[Optional[float]]:
    pvals: list[Optional[float]] = []
    for idx, r in enumerate(data.runs):
        counts = _doctor_counts(data, r["run_id"])
        if sum(counts) == 0 or len(counts) < 2:
            pvals.append(None)
            continue
        # One dedicated generator per run, derived from the analyzer seed.
        seed = (mc_seed * 1_000_003 + idx) % (2**63)
        pvals.append(stats.chi_square_uniform_mc(counts, draws=mc_draws, seed=seed).p_value)
    return pvals


def _preference_row(a: ExperimentData, b: ExperimentData, mc_draws: int, mc_seed: int) -> ComparisonRow:
    p_a = _preference_pvalues(a, mc_draws, mc_seed)
    p_b = _preference_pvalues(b, mc_draws, mc_seed)
    sig_a = sum(1 for p in p_a if p is not None and p < 0.05)
    sig_b = sum(1 for p in p_b if p is not None and p < 0.05)
    usable_a = [p for p in p_a if p is not None]
    usable_b = [p for p in p_b if p is not None]
    return ComparisonRow(
        metric=DOCTOR_PREFERENCE_METRIC,
        group_a=a.label,
        group_b=b.label,
        mean_a=float(sig_a),
        mean_b=float(sig_b),
        median_a=_median(usable_a) if usable_a else 0.0,
        median_b=_median(usable_b) if usable_b else 0.0,
        notes=(
            f"runs with per-run chi-square p<0.05: {sig_a}/{len(p_a)} vs {sig_b}/{len(p_b)}; "
            "means hold counts, medians the per-run p"
        ),
        values_a=usable_a,
        values_b=usable_b,
    )


def _doctor_variance(values: list[int]) -> float:
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / (len(values) - 1)


def _variance_row(a: ExperimentData, b: ExperimentData) -> ComparisonRow:
    var_a = [_doctor_variance(_doctor_counts(a, r["run_id"])) for r in a.runs]
    var_b = [_doctor_variance(_doctor_counts(b, r["run_id"])) for r in b.runs]
    row = ComparisonRow(
        metric=DOCTOR_VARIANCE_METRIC,
        group_a=a.label,
        group_b=b.label,
        mean_a=sum(var_a) / len(var_a),
        mean_b=sum(var_b) / len(var_b),
        median_a=_median(var_a),
        median_b=_median(var_b),
        values_a=var_a,
        values_b=var_b,
    )
    row.sw_a = _try_shapiro(var_a, a.label)
    row.sw_b = _try_shapiro(var_b, b.label)
    if len(var_a) != len(var_b):
        row.degenerate = True
        row.notes = "paired variance test needs equal run counts"
        return row
    try:
        row.chosen = stats.paired_t_test(var_a, var_b)
    except stats.DegenerateSample:
        row.degenerate = True
        row.notes = "identical per-run variances; paired test undefined"
    return row


def compare_experiments(
    dir_a: str,
    dir_b: str,
    metrics: Optional[list[str]] = None,
    mc_draws: int = 10000,
    mc_seed: int = 0,
) -> list[ComparisonRow]:
    """Build the full comparison table between two experiment directories."""
    data_a = load_experiment(dir_a)
    data_b = load_experiment(dir_b)
    check_rosters_match(data_a, data_b)

    wanted = metric_names() if metrics is None else list(metrics)
    rows = []
    for name in wanted:
        if name == DOCTOR_PREFERENCE_METRIC:
            rows.append(_preference_row(data_a, data_b, mc_draws, mc_seed))
        elif name == DOCTOR_VARIANCE_METRIC:
            rows.append(_variance_row(data_a, data_b))
        elif name in METRICS:
            extractor = METRICS[name]
            rows.append(_gated_row(name, extractor(data_a), extractor(data_b), data_a.label, data_b.label))
        else:
            raise MetricUnknown(f"unknown metric {name!r}; known: {', '.join(metric_names())}")
    return rows


def _fmt_p(p: Optional[float]) -> str:
    return "" if p is None else f"{p:.6g}"


def comparisons_csv(rows: list[ComparisonRow]) -> str:
    lines = [COMPARISONS_HEADER]
    for r in rows:
        test_name = r.chosen.test_name if r.chosen else ("chi2_mc_count" if r.metric == DOCTOR_PREFERENCE_METRIC else "")
        lines.append(
            ",".join(
                [
                    r.metric,
                    r.group_a,
                    r.group_b,
                    f"{r.mean_a:.6f}",
                    f"{r.mean_b:.6f}",
                    f"{r.median_a:.6f}",
                    f"{r.median_b:.6f}",
                    _fmt_p(r.sw_a.p_value if r.sw_a else None),
                    _fmt_p(r.sw_b.p_value if r.sw_b else None),
                    test_name,
                    "" if r.chosen is None else f"{r.chosen.statistic:.6f}",
                    _fmt_p(r.chosen.p_value if r.chosen else None),
                    "true" if r.degenerate else "false",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def render_report(rows: list[ComparisonRow]) -> str:
    """Human-readable rendering of the comparison table."""
    if not rows:
        return "no comparisons\n"
    a, b = rows[0].group_a, rows[0].group_b
    out = [f"Comparison: {a} vs {b}", "=" * 60]
    for r in rows:
        out.append("")
        out.append(f"{r.metric}")
        out.append(f"  mean   {a}: {r.mean_a:.4f}   {b}: {r.mean_b:.4f}")
        out.append(f"  median {a}: {r.median_a:.4f}   {b}: {r.median_b:.4f}")
        if r.sw_a or r.sw_b:
            sw_a = f"{r.sw_a.p_value:.4g}" if r.sw_a else "n/a (no variance)"
            sw_b = f"{r.sw_b.p_value:.4g}" if r.sw_b else "n/a (no variance)"
            out.append(f"  Shapiro-Wilk p: {sw_a} / {sw_b}")
        if r.degenerate:
            out.append(f"  degenerate: {r.notes}")
        elif r.chosen is not None:
            out.append(
                f"  {r.chosen.test_name}: statistic={r.chosen.statistic:.4f} "
                f"p={r.chosen.p_value:.6g}"
            )
        if r.notes and not r.degenerate:
            out.append(f"  note: {r.notes}")
    return "\n".join(out) + "\n"
