"""Doctor difficulty estimation, nurse task-duration sampling, and outcome judging."""
from __future__ import annotations

from dataclasses import dataclass

from .domain import EvaluationStyle, NurseQuality, Rng, SimConfig

# Expected execution time, in seconds, that a doctor attaches to each requested
# difficulty level.  Harder tasks are shorter: they map to urgent interventions.
BASE_DURATIONS = {1: 60.0, 2: 50.0, 3: 40.0, 4: 30.0, 5: 20.0}

# Delay ranges for a task that misses its expected duration.  Half-open so a
# draw equals the base duration only with vanishing probability.
ABOVE_BASE_RANGES = {
    1: (60.0, 70.0),
    2: (50.0, 70.0),
    3: (40.0, 50.0),
    4: (30.0, 40.0),
    5: (20.0, 30.0),
}


@dataclass(frozen=True)
class DurationSample:
    """One sampled execution time plus bookkeeping about how it was drawn."""

    seconds: float
    drew_bonus: bool
    draws: int


@dataclass(frozen=True)
class TaskOutcome:
    success: bool
    time_damage: float
    utility_delta: int


def evaluate_performance_level(true_level: int, style: EvaluationStyle) -> int:
    """Map a task's true difficulty to the level a doctor requests.

    Overestimating doctors push everything to 3 or 5, underestimating doctors
    to 3 or 1; accurate doctors return the true level unchanged.
    """
    if style is EvaluationStyle.OVERESTIMATES:
        return 3 if true_level <= 2 else 5
    if style is EvaluationStyle.UNDERESTIMATES:
        return 3 if true_level >= 4 else 1
    return true_level


def base_duration_for_level(level: int) -> float:
    return BASE_DURATIONS[level]


def random_duration_above_base(level: int, rng: Rng) -> float:
    """Sample a delayed execution time for `level`; consumes one draw."""
    lo, hi = ABOVE_BASE_RANGES[level]
    return rng.uniform_range(lo, hi)


def training_bonus_chance(observed_tasks: int, cfg: SimConfig) -> float:
    """Chance a trainee hits the base duration after `observed_tasks` observations."""
    return min(max(observed_tasks * cfg.trainer_bonus_per_task, 0.0), 1.0)


def get_task_duration(
    quality: NurseQuality,
    training_active: bool,
    observed_tasks: int,
    true_level: int,
    cfg: SimConfig,
    rng: Rng,
) -> DurationSample:
    """Sample how long a nurse takes on a task of the given true difficulty.

    High performers hit the base duration with probability
    `highPerformerGoodChance`.  Low performers always overrun, unless they are
    the trainee of the training scenario, where accumulated observations grant
    a growing chance of hitting the base duration.  `training_active` may only
    be set for a low-performing nurse.
    """
    if quality is NurseQuality.LOW:
        if training_active:
            bonus = training_bonus_chance(observed_tasks, cfg)
            roll = rng.uniform_unit()
            if roll <= bonus:
                return DurationSample(base_duration_for_level(true_level), drew_bonus=True, draws=1)
            return DurationSample(random_duration_above_base(true_level, rng), drew_bonus=False, draws=2)
        return DurationSample(random_duration_above_base(true_level, rng), drew_bonus=False, draws=1)

    roll = rng.uniform_unit()
    if roll <= cfg.high_performer_good_chance:
        return DurationSample(base_duration_for_level(true_level), drew_bonus=False, draws=1)
    return DurationSample(random_duration_above_base(true_level, rng), drew_bonus=False, draws=2)


def judge_outcome(actual: float, requested_level: int, cfg: SimConfig) -> TaskOutcome:
    """Judge a completed task against the duration the doctor requested.

    Success means finishing within the requested duration; any overrun is time
    damage.  Utility moves by the requested level, downward on failure when the
    failure penalty is enabled.
    """
    requested_duration = base_duration_for_level(requested_level)
    success = actual <= requested_duration
    damage = max(0.0, actual - requested_duration)
    if success:
        delta = requested_level
    else:
        delta = -requested_level if cfg.utility_failure_penalty else 0
    return TaskOutcome(success=success, time_damage=damage, utility_delta=delta)
