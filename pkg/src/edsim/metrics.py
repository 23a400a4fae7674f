"""Per-shift metric accumulation and the CSV export/import layer."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional


class SchemaError(ValueError):
    """A CSV file or run record does not match the expected schema."""


RUNS_HEADER = "run_id,seed,scenario,policy,shift_length_s,patients_served,total_time_damage_s,total_delay_s"
DOCTORS_HEADER = "run_id,doctor_id,style,patients_served,time_damage_s,delay_s,eval_accuracy"
NURSES_HEADER = (
    "run_id,nurse_id,quality,role,tasks_success,tasks_failed,utility,"
    "time_damage_s,observed_tasks,classified_low_at_s"
)


@dataclass
class ShiftMetrics:
    """Running totals plus per-agent breakdowns for one shift."""

    patients_served: int = 0
    time_damage: float = 0.0
    delay: float = 0.0
    served_by_doctor: dict = field(default_factory=dict)
    damage_by_doctor: dict = field(default_factory=dict)
    delay_by_doctor: dict = field(default_factory=dict)
    eval_hits_by_doctor: dict = field(default_factory=dict)
    eval_counts_by_doctor: dict = field(default_factory=dict)
    damage_by_nurse: dict = field(default_factory=dict)
    success_by_nurse: dict = field(default_factory=dict)
    failed_by_nurse: dict = field(default_factory=dict)
    utility_by_nurse: dict = field(default_factory=dict)
    observed_by_nurse: dict = field(default_factory=dict)
    classified_low_at_by_nurse: dict = field(default_factory=dict)

    def register_doctor(self, doctor_id: int) -> None:
        self.served_by_doctor.setdefault(doctor_id, 0)
        self.damage_by_doctor.setdefault(doctor_id, 0.0)
        self.delay_by_doctor.setdefault(doctor_id, 0.0)
        self.eval_hits_by_doctor.setdefault(doctor_id, 0)
        self.eval_counts_by_doctor.setdefault(doctor_id, 0)

    def register_nurse(self, nurse_id: int) -> None:
        self.damage_by_nurse.setdefault(nurse_id, 0.0)
        self.success_by_nurse.setdefault(nurse_id, 0)
        self.failed_by_nurse.setdefault(nurse_id, 0)
        self.utility_by_nurse.setdefault(nurse_id, 0)
        self.observed_by_nurse.setdefault(nurse_id, 0)
        self.classified_low_at_by_nurse.setdefault(nurse_id, None)

    def mark_served(self, doctor_id: int) -> None:
        self.patients_served += 1
        self.served_by_doctor[doctor_id] += 1

    def eval_accuracy(self, doctor_id: int) -> Optional[float]:
        count = self.eval_counts_by_doctor[doctor_id]
        if count == 0:
            return None
        return self.eval_hits_by_doctor[doctor_id] / count


def accrue_delay(metrics: ShiftMetrics, request, shift_length: float) -> float:
    """Add one request's waiting time to the doctor and shift totals.

    A request waits from issue until its execution starts; requests that never
    start (still pending or claimed at shift end) wait until the horizon.
    """
    if request.execution_start_at is not None:
        waited = request.execution_start_at - request.issued_at
    else:
        waited = shift_length - request.issued_at
    metrics.delay += waited
    metrics.delay_by_doctor[request.doctor] += waited
    return waited


def record_task_completion(metrics: ShiftMetrics, request) -> None:
    """Fold one completed request's outcome into the shift metrics."""
    outcome = request.outcome
    nurse = request.executed_by
    doctor = request.doctor
    metrics.time_damage += outcome.time_damage
    metrics.damage_by_nurse[nurse] += outcome.time_damage
    metrics.damage_by_doctor[doctor] += outcome.time_damage
    if outcome.success:
        metrics.success_by_nurse[nurse] += 1
    else:
        metrics.failed_by_nurse[nurse] += 1
    metrics.utility_by_nurse[nurse] += outcome.utility_delta
    metrics.eval_counts_by_doctor[doctor] += 1
    if request.requested_level == request.true_level:
        metrics.eval_hits_by_doctor[doctor] += 1


@dataclass
class RunRecord:
    """One run's identity, configuration echo fields, and metrics."""

    run_id: str
    seed: int
    scenario: str
    policy: str
    shift_length: float
    metrics: ShiftMetrics
    doctor_styles: dict  # doctor id -> style token
    nurse_info: dict  # nurse id -> (quality token, role token)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _runs_row(rec: RunRecord) -> str:
    m = rec.metrics
    return ",".join(
        [
            rec.run_id,
            str(rec.seed),
            rec.scenario,
            rec.policy,
            _fmt(rec.shift_length),
            str(m.patients_served),
            _fmt(m.time_damage),
            _fmt(m.delay),
        ]
    )


def _doctor_rows(rec: RunRecord) -> list[str]:
    m = rec.metrics
    rows = []
    for doctor_id in sorted(rec.doctor_styles):
        if doctor_id not in m.served_by_doctor:
            raise SchemaError(f"run {rec.run_id}: no metrics for doctor {doctor_id}")
        acc = m.eval_accuracy(doctor_id)
        rows.append(
            ",".join(
                [
                    rec.run_id,
                    str(doctor_id),
                    rec.doctor_styles[doctor_id],
                    str(m.served_by_doctor[doctor_id]),
                    _fmt(m.damage_by_doctor[doctor_id]),
                    _fmt(m.delay_by_doctor[doctor_id]),
                    "" if acc is None else _fmt(acc),
                ]
            )
        )
    return rows


def _nurse_rows(rec: RunRecord) -> list[str]:
    m = rec.metrics
    rows = []
    for nurse_id in sorted(rec.nurse_info):
        if nurse_id not in m.success_by_nurse:
            raise SchemaError(f"run {rec.run_id}: no metrics for nurse {nurse_id}")
        quality, role = rec.nurse_info[nurse_id]
        classified = m.classified_low_at_by_nurse[nurse_id]
        rows.append(
            ",".join(
                [
                    rec.run_id,
                    str(nurse_id),
                    quality,
                    role,
                    str(m.success_by_nurse[nurse_id]),
                    str(m.failed_by_nurse[nurse_id]),
                    str(m.utility_by_nurse[nurse_id]),
                    _fmt(m.damage_by_nurse[nurse_id]),
                    str(m.observed_by_nurse[nurse_id]),
                    "" if classified is None else _fmt(classified),
                ]
            )
        )
    return rows


def write_csvs(records: list[RunRecord], out_dir: str) -> dict[str, str]:
    """Write runs/doctors/nurses CSVs for the given records; returns the paths.

    Output is byte-deterministic: rows sorted by (run_id, agent id), reals with
    six decimals, and a plain \\n after every line.
    """
    os.makedirs(out_dir, exist_ok=True)
    ordered = sorted(records, key=lambda r: r.run_id)
    files = {
        "runs": (RUNS_HEADER, [_runs_row(r) for r in ordered]),
        "doctors": (DOCTORS_HEADER, [row for r in ordered for row in _doctor_rows(r)]),
        "nurses": (NURSES_HEADER, [row for r in ordered for row in _nurse_rows(r)]),
    }
    paths = {}
    for name, (header, rows) in files.items():
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(row + "\n")
        paths[name] = path
    return paths


def _split_csv(path: str, header: str) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != header:
        raise SchemaError(f"{path}: expected header {header!r}")
    n_cols = len(header.split(","))
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != n_cols:
            raise SchemaError(f"{path}: row has {len(cells)} fields, expected {n_cols}")
        rows.append(cells)
    return rows


def read_runs(path: str) -> list[dict]:
    rows = []
    for c in _split_csv(path, RUNS_HEADER):
        rows.append(
            {
                "run_id": c[0],
                "seed": int(c[1]),
                "scenario": c[2],
                "policy": c[3],
                "shift_length_s": float(c[4]),
                "patients_served": int(c[5]),
                "total_time_damage_s": float(c[6]),
                "total_delay_s": float(c[7]),
            }
        )
    return rows


def read_doctors(path: str) -> list[dict]:
    rows = []
    for c in _split_csv(path, DOCTORS_HEADER):
        rows.append(
            {
                "run_id": c[0],
                "doctor_id": int(c[1]),
                "style": c[2],
                "patients_served": int(c[3]),
                "time_damage_s": float(c[4]),
                "delay_s": float(c[5]),
                "eval_accuracy": None if c[6] == "" else float(c[6]),
            }
        )
    return rows


def read_nurses(path: str) -> list[dict]:
    rows = []
    for c in _split_csv(path, NURSES_HEADER):
        rows.append(
            {
                "run_id": c[0],
                "nurse_id": int(c[1]),
                "quality": c[2],
                "role": c[3],
                "tasks_success": int(c[4]),
                "tasks_failed": int(c[5]),
                "utility": int(c[6]),
                "time_damage_s": float(c[7]),
                "observed_tasks": int(c[8]),
                "classified_low_at_s": None if c[9] == "" else float(c[9]),
            }
        )
    return rows
