"""Deterministic discrete-event core: spawn/exam/decide/execute cycle and scenarios.

One run is strictly single-threaded.  All randomness flows through one seeded
generator with a fixed draw order: one draw when a patient spawns (true
difficulty) and the duration draws when a task execution starts.  Event
processing is ordered by (time, insertion sequence), so identical configs and
seeds replay identically.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .behavior import (
    base_duration_for_level,
    evaluate_performance_level,
    get_task_duration,
    judge_outcome,
)
from .domain import NurseQuality, Policy, Rng, Scenario, SimConfig, sample_true_level
from .metrics import RunRecord, ShiftMetrics, accrue_delay, record_task_completion
from .policy import (
    Reason,
    ScenarioSignal,
    SelectionDecision,
    TrustState,
    select_request_ca,
    select_request_fifo,
    trainer_should_exit,
    update_trust,
)

PATIENT_SPAWN = "patient_spawn"
EXAM_COMPLETE = "exam_complete"
NURSE_DECIDE = "nurse_decide"
EXECUTION_START = "execution_start"
TASK_COMPLETE = "task_complete"
TRAINER_EXIT = "trainer_exit"
SHIFT_END = "shift_end"

ROLE_REGULAR = "regular"
ROLE_REPLACEMENT = "replacement"
ROLE_TRAINEE = "trainee"


class RequestStatus(Enum):
    PENDING = "pending"
    CLAIMED = "claimed"
    EXECUTING = "executing"
    DONE = "done"


@dataclass
class TaskRequest:
    id: int
    patient: int
    doctor: int
    true_level: int
    requested_level: int
    requested_duration: float
    issued_at: float
    status: RequestStatus = RequestStatus.PENDING
    executed_by: Optional[int] = None
    execution_start_at: Optional[float] = None
    actual_duration: Optional[float] = None
    outcome: Optional[object] = None


@dataclass
class Patient:
    id: int
    bed: int
    true_level: int
    spawned_at: float
    exam_done_at: Optional[float] = None
    served_at: Optional[float] = None
    requests: list = field(default_factory=list)


@dataclass
class DoctorRuntime:
    id: int
    style: object
    beds: tuple
    current_patient: Optional[int] = None


@dataclass
class NurseRuntime:
    id: int
    quality: NurseQuality
    role: str
    trust: TrustState
    observed_tasks: int = 0
    busy: bool = False
    trainer_attached: bool = False
    current_request: Optional[int] = None


@dataclass
class ShiftResult:
    """Everything one run produced; fully determined by (config, seed)."""

    config: SimConfig
    metrics: ShiftMetrics
    trace: list
    audit: dict
    doctor_styles: dict
    nurse_info: dict


def render_trace(result: ShiftResult) -> str:
    """Serialize the event log as `time,seq,kind,actor,object` lines."""
    lines = [f"{t:.6f},{seq},{kind},{actor},{obj}" for t, seq, kind, actor, obj in result.trace]
    return "\n".join(lines) + ("\n" if lines else "")


def make_run_record(result: ShiftResult, run_id: str) -> RunRecord:
    cfg = result.config
    return RunRecord(
        run_id=run_id,
        seed=cfg.seed,
        scenario=cfg.scenario.value,
        policy=cfg.policy.value,
        shift_length=cfg.shift_length,
        metrics=result.metrics,
        doctor_styles=dict(result.doctor_styles),
        nurse_info=dict(result.nurse_info),
    )


class _ShiftSim:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.rng = Rng(cfg.seed)
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.trace: list = []

        self.metrics = ShiftMetrics()
        self.doctors: dict[int, DoctorRuntime] = {}
        doctor_ids = [i for i, _ in cfg.doctors]
        for idx, (doctor_id, style) in enumerate(cfg.doctors):
            beds = tuple(range(idx * cfg.beds_per_doctor + 1, (idx + 1) * cfg.beds_per_doctor + 1))
            self.doctors[doctor_id] = DoctorRuntime(id=doctor_id, style=style, beds=beds)
            self.metrics.register_doctor(doctor_id)
        self._doctor_of_bed = {
            bed: doctor_id for doctor_id in doctor_ids for bed in self.doctors[doctor_id].beds
        }

        self.nurses: dict[int, NurseRuntime] = {}
        for nurse_id, quality in cfg.nurses:
            self.nurses[nurse_id] = NurseRuntime(
                id=nurse_id, quality=quality, role=ROLE_REGULAR, trust=TrustState.fresh(cfg)
            )
            self.metrics.register_nurse(nurse_id)

        self.beds: dict[int, Optional[int]] = {bed: None for bed in self._doctor_of_bed}
        self.patients: dict[int, Patient] = {}
        self.requests: dict[int, TaskRequest] = {}
        self._next_patient_id = 1
        self._next_request_id = 1

    # -- scheduling ---------------------------------------------------------

    def _schedule(self, time: float, kind: str, args: tuple = ()) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, args))
        self._seq += 1

    # -- event handlers -----------------------------------------------------

    def _spawn_patient(self, bed: int) -> tuple[str, str]:
        level = sample_true_level(self.rng, self.cfg.true_level_distribution)
        patient = Patient(id=self._next_patient_id, bed=bed, true_level=level, spawned_at=self.now)
        self._next_patient_id += 1
        self.patients[patient.id] = patient
        assert self.beds[bed] is None, f"bed {bed} double-occupied"
        self.beds[bed] = patient.id
        doctor = self.doctors[self._doctor_of_bed[bed]]
        if doctor.current_patient is None:
            self._begin_exam(doctor, patient)
        return str(patient.id), str(bed)

    def _begin_exam(self, doctor: DoctorRuntime, patient: Patient) -> None:
        doctor.current_patient = patient.id
        self._schedule(self.now + self.cfg.exam_duration, EXAM_COMPLETE, (doctor.id, patient.id))

    def _next_unexamined(self, doctor: DoctorRuntime) -> Optional[Patient]:
        waiting = [
            self.patients[pid]
            for bed in doctor.beds
            if (pid := self.beds[bed]) is not None and self.patients[pid].exam_done_at is None
        ]
        if not waiting:
            return None
        return min(waiting, key=lambda p: (p.spawned_at, p.id))

    def _handle_exam_complete(self, doctor_id: int, patient_id: int) -> tuple[str, str]:
        doctor = self.doctors[doctor_id]
        patient = self.patients[patient_id]
        patient.exam_done_at = self.now
        for _ in range(self.cfg.tasks_per_patient):
            requested = evaluate_performance_level(patient.true_level, doctor.style)
            request = TaskRequest(
                id=self._next_request_id,
                patient=patient.id,
                doctor=doctor.id,
                true_level=patient.true_level,
                requested_level=requested,
                requested_duration=base_duration_for_level(requested),
                issued_at=self.now,
            )
            self._next_request_id += 1
            self.requests[request.id] = request
            patient.requests.append(request.id)
        self._broadcast()
        doctor.current_patient = None
        nxt = self._next_unexamined(doctor)
        if nxt is not None:
            self._begin_exam(doctor, nxt)
        return str(doctor_id), str(patient_id)

    def _broadcast(self) -> None:
        for nurse_id in sorted(self.nurses):
            if not self.nurses[nurse_id].busy:
                self._schedule(self.now, NURSE_DECIDE, (nurse_id, 0))

    def _pending_requests(self) -> list[TaskRequest]:
        return [r for r in self.requests.values() if r.status is RequestStatus.PENDING]

    def _select(self, nurse: NurseRuntime) -> SelectionDecision:
        pending = self._pending_requests()
        if self.cfg.policy is Policy.FIFO:
            return select_request_fifo(pending)
        restricted = nurse.trust.classified_low_at is not None and not nurse.trainer_attached
        return select_request_ca(nurse.trust, restricted, nurse.trainer_attached, pending, self.cfg)

    def _handle_nurse_decide(self, nurse_id: int, make_idle: int = 0) -> tuple[str, str]:
        nurse = self.nurses[nurse_id]
        if make_idle:
            # Post-prep decide: the nurse returns to the waiting room first.
            nurse.busy = False
        if nurse.busy:
            return str(nurse_id), ""
        decision = self._select(nurse)
        if decision.reason is not Reason.ACCEPTED:
            return str(nurse_id), ""
        request = decision.chosen
        assert request.status is RequestStatus.PENDING
        request.status = RequestStatus.CLAIMED
        request.executed_by = nurse.id
        nurse.busy = True
        nurse.current_request = request.id
        self._schedule(self.now + self.cfg.travel_time, EXECUTION_START, (nurse.id, request.id))
        return str(nurse_id), str(request.id)

    def _training_mode(self, nurse: NurseRuntime) -> bool:
        # Mirrors the duration algorithm's dispatch: the training-time bonus
        # branch belongs to the low performer whenever the training scenario
        # runs under the trust policy; with zero observations it is inert, and
        # the accumulated bonus persists after the trainer leaves.
        return (
            nurse.quality is NurseQuality.LOW
            and self.cfg.scenario is Scenario.TRAINING
            and self.cfg.policy is Policy.CA_TRUST
        )

    def _handle_execution_start(self, nurse_id: int, request_id: int) -> tuple[str, str]:
        nurse = self.nurses[nurse_id]
        request = self.requests[request_id]
        request.status = RequestStatus.EXECUTING
        request.execution_start_at = self.now
        accrue_delay(self.metrics, request, self.cfg.shift_length)
        sample = get_task_duration(
            nurse.quality,
            self._training_mode(nurse),
            nurse.observed_tasks,
            request.true_level,
            self.cfg,
            self.rng,
        )
        request.actual_duration = sample.seconds
        # Observation credit requires the trainer to witness the execution from
        # its start; attach events later in time do not count this task.
        request_observed = nurse.trainer_attached
        self._schedule(self.now + sample.seconds, TASK_COMPLETE, (nurse.id, request.id, int(request_observed)))
        return str(nurse_id), str(request_id)

    def _spawn_replacement(self) -> None:
        new_id = max(self.nurses) + 1
        self.nurses[new_id] = NurseRuntime(
            id=new_id,
            quality=NurseQuality.HIGH,
            role=ROLE_REPLACEMENT,
            trust=TrustState.fresh(self.cfg),
        )
        self.metrics.register_nurse(new_id)
        self._schedule(self.now, NURSE_DECIDE, (new_id, 0))

    def _handle_task_complete(self, nurse_id: int, request_id: int, observed: int) -> tuple[str, str]:
        nurse = self.nurses[nurse_id]
        request = self.requests[request_id]
        request.status = RequestStatus.DONE
        request.outcome = judge_outcome(request.actual_duration, request.requested_level, self.cfg)
        record_task_completion(self.metrics, request)

        if self.cfg.policy is Policy.CA_TRUST:
            nurse.trust, signal = update_trust(
                nurse.trust, request.requested_level, request.outcome.success, self.cfg, self.now
            )
            self.metrics.classified_low_at_by_nurse[nurse.id] = nurse.trust.classified_low_at
            if signal is ScenarioSignal.SPAWN_REPLACEMENT:
                self._spawn_replacement()
            elif signal is ScenarioSignal.ATTACH_TRAINER:
                nurse.trainer_attached = True
                nurse.role = ROLE_TRAINEE

        if observed:
            nurse.observed_tasks += 1
            self.metrics.observed_by_nurse[nurse.id] = nurse.observed_tasks
            if nurse.trainer_attached and trainer_should_exit(nurse.observed_tasks, self.cfg):
                self._schedule(self.now, TRAINER_EXIT, (nurse.id,))

        patient = self.patients[request.patient]
        if all(self.requests[rid].status is RequestStatus.DONE for rid in patient.requests):
            patient.served_at = self.now
            self.metrics.mark_served(request.doctor)
            self.beds[patient.bed] = None
            self._schedule(self.now, PATIENT_SPAWN, (patient.bed,))

        nurse.current_request = None
        self._schedule(self.now + self.cfg.prep_time, NURSE_DECIDE, (nurse.id, 1))
        return str(nurse_id), str(request_id)

    def _handle_trainer_exit(self, nurse_id: int) -> tuple[str, str]:
        self.nurses[nurse_id].trainer_attached = False
        return str(nurse_id), ""

    # -- main loop ----------------------------------------------------------

    def run(self) -> ShiftResult:
        cfg = self.cfg
        self._schedule(cfg.shift_length, SHIFT_END, ())
        order = [
            doctor.beds[slot]
            for slot in range(cfg.beds_per_doctor)
            for doctor in (self.doctors[i] for i in sorted(self.doctors))
        ]
        for i, bed in enumerate(order):
            self._schedule(i * cfg.initial_spawn_interval, PATIENT_SPAWN, (bed,))

        while self._heap:
            time, seq, kind, args = heapq.heappop(self._heap)
            self.now = time
            if kind == SHIFT_END:
                self.trace.append((time, seq, kind, "", ""))
                break
            if kind == PATIENT_SPAWN:
                actor, obj = self._spawn_patient(*args)
            elif kind == EXAM_COMPLETE:
                actor, obj = self._handle_exam_complete(*args)
            elif kind == NURSE_DECIDE:
                actor, obj = self._handle_nurse_decide(*args)
            elif kind == EXECUTION_START:
                actor, obj = self._handle_execution_start(*args)
            elif kind == TASK_COMPLETE:
                actor, obj = self._handle_task_complete(*args)
            elif kind == TRAINER_EXIT:
                actor, obj = self._handle_trainer_exit(*args)
            else:  # pragma: no cover - defensive
                raise RuntimeError(f"unknown event kind {kind!r}")
            self.trace.append((time, seq, kind, actor, obj))

        return self._finalize()

    def _finalize(self) -> ShiftResult:
        for request in self.requests.values():
            if request.execution_start_at is None:
                accrue_delay(self.metrics, request, self.cfg.shift_length)

        status_census = {status.value: 0 for status in RequestStatus}
        for request in self.requests.values():
            status_census[request.status.value] += 1
        audit = {
            "patients_spawned": len(self.patients),
            "patients_served": self.metrics.patients_served,
            "patients_in_system": sum(1 for p in self.patients.values() if p.served_at is None),
            "beds_occupied": sum(1 for pid in self.beds.values() if pid is not None),
            "requests": status_census,
            "executors": {
                r.id: r.executed_by for r in self.requests.values() if r.executed_by is not None
            },
            "rng_draws": self.rng.draw_count,
        }
        doctor_styles = {d.id: d.style.value for d in self.doctors.values()}
        nurse_info = {n.id: (n.quality.value, n.role) for n in self.nurses.values()}
        return ShiftResult(
            config=self.cfg,
            metrics=self.metrics,
            trace=self.trace,
            audit=audit,
            doctor_styles=doctor_styles,
            nurse_info=nurse_info,
        )


def run_shift(cfg: SimConfig) -> ShiftResult:
    """Execute one complete shift for a validated config."""
    return _ShiftSim(cfg).run()
