from __future__ import annotations

import pytest

from edsim.analysis import (
    COMPARISONS_HEADER,
    DOCTOR_PREFERENCE_METRIC,
    DOCTOR_VARIANCE_METRIC,
    MetricUnknown,
    MissingFile,
    compare_experiments,
    comparisons_csv,
    load_experiment,
    metric_names,
    render_report,
)
from edsim.cli import run_experiment
from edsim.metrics import SchemaError


@pytest.fixture(scope="module")
def experiment_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("experiments")
    dirs = {}
    for combo in ("baseline-ca", "baseline-fifo", "replacement-ca"):
        out = root / combo
        run_experiment({}, combo, runs=12, seed_base=400, out_dir=str(out))
        dirs[combo] = str(out)
    return dirs


def test_load_experiment_reads_triplet(experiment_dirs):
    data = load_experiment(experiment_dirs["baseline-ca"])
    assert len(data.runs) == 12
    assert all(r["scenario"] == "baseline" for r in data.runs)
    assert data.label == "baseline-ca"
    doctors, nurses = data.roster
    assert len(doctors) == 3 and len(nurses) == 2


def test_missing_directory_raises(tmp_path):
    with pytest.raises(MissingFile):
        load_experiment(str(tmp_path / "nope"))


def test_full_comparison_row_set(experiment_dirs):
    rows = compare_experiments(experiment_dirs["baseline-ca"], experiment_dirs["baseline-fifo"])
    assert [r.metric for r in rows] == metric_names()
    by_name = {r.metric: r for r in rows}

    served = by_name["patients_served"]
    assert served.mean_b > served.mean_a  # FIFO throughput beats trust gating
    assert served.chosen is not None and served.chosen.p_value < 0.05

    # The low performer never succeeds under either baseline policy, so the
    # row must come out degenerate (all-zero on both sides, no test).
    successes = by_name["low_nurse_tasks_success"]
    assert successes.degenerate
    assert successes.chosen is None
    assert successes.mean_a == successes.mean_b == 0.0

    pref = by_name[DOCTOR_PREFERENCE_METRIC]
    assert 0 <= pref.mean_a <= 12 and 0 <= pref.mean_b <= 12

    variance = by_name[DOCTOR_VARIANCE_METRIC]
    assert variance.chosen is None or variance.chosen.test_name == "paired_t"


def test_gate_prefers_wilcoxon_on_non_normal(experiment_dirs):
    rows = compare_experiments(
        experiment_dirs["baseline-ca"],
        experiment_dirs["baseline-fifo"],
        metrics=["patients_served"],
    )
    row = rows[0]
    gate_says_wilcoxon = (
        row.sw_a is None
        or row.sw_b is None
        or row.sw_a.p_value < 0.05
        or row.sw_b.p_value < 0.05
    )
    expected = "wilcoxon_rank_sum" if gate_says_wilcoxon else "welch_t"
    assert row.chosen.test_name == expected


def test_self_comparison_null(experiment_dirs):
    rows = compare_experiments(experiment_dirs["baseline-ca"], experiment_dirs["baseline-ca"])
    for row in rows:
        if row.metric in (DOCTOR_PREFERENCE_METRIC, DOCTOR_VARIANCE_METRIC):
            continue
        if not row.degenerate:
            assert row.chosen.p_value == pytest.approx(1.0)
        assert row.mean_a == row.mean_b


def test_unknown_metric(experiment_dirs):
    with pytest.raises(MetricUnknown):
        compare_experiments(
            experiment_dirs["baseline-ca"], experiment_dirs["baseline-fifo"], metrics=["nope"]
        )


def test_roster_mismatch_names_agents(experiment_dirs, tmp_path):
    other = tmp_path / "lowlow"
    run_experiment({"nurses": "1:low, 2:low"}, "baseline-ca", runs=3, seed_base=1, out_dir=str(other))
    with pytest.raises(SchemaError) as err:
        compare_experiments(experiment_dirs["baseline-ca"], str(other))
    assert "nurse 2" in str(err.value)


def test_replacement_roster_still_comparable(experiment_dirs):
    # The replacement combo spawns extra nurses at runtime; the configured
    # rosters still match, so the comparison must proceed.
    rows = compare_experiments(experiment_dirs["baseline-ca"], experiment_dirs["replacement-ca"])
    assert rows


def test_comparisons_csv_shape_and_determinism(experiment_dirs):
    rows = compare_experiments(experiment_dirs["baseline-ca"], experiment_dirs["baseline-fifo"])
    text_a = comparisons_csv(rows)
    text_b = comparisons_csv(
        compare_experiments(experiment_dirs["baseline-ca"], experiment_dirs["baseline-fifo"])
    )
    assert text_a == text_b
    lines = text_a.splitlines()
    assert lines[0] == COMPARISONS_HEADER
    assert len(lines) == len(metric_names()) + 1
    assert all(len(line.split(",")) == len(COMPARISONS_HEADER.split(",")) for line in lines)


def test_report_renders_every_metric(experiment_dirs):
    rows = compare_experiments(experiment_dirs["baseline-ca"], experiment_dirs["baseline-fifo"])
    report = render_report(rows)
    for name in metric_names():
        assert name in report
