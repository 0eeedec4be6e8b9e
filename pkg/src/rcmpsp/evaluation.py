"""Serial schedule generation and objective evaluation.

A genotype pairs a mode vector with an activity sequence. The sequence need
not respect precedence: the decoder always places the earliest-listed
activity whose predecessors are already placed, at the earliest start where
its renewable demands fit for its whole duration.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .instance import Instance

DEFAULT_ALPHA = 100_000


@dataclass(frozen=True)
class Genotype:
    modes: tuple[int, ...]
    sequence: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "sequence", tuple(self.sequence))


@dataclass(frozen=True)
class Schedule:
    modes: tuple[int, ...]
    start: tuple[int, ...]
    finish: tuple[int, ...]
    # usage[r][t] for every renewable resource r, up to the instance horizon
    usage: tuple[tuple[int, ...], ...]


@dataclass(frozen=True, order=False)
class Evaluation:
    tpd: int
    tms: int
    f: int


@dataclass(frozen=True)
class EvaluationConfig:
    alpha: int = DEFAULT_ALPHA

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")

    def combine(self, tpd: int, tms: int) -> Evaluation:
        return Evaluation(tpd, tms, self.alpha * tpd + tms)


def check_genotype(instance: Instance, genotype: Genotype) -> None:
    """Raise ValueError unless the genotype is structurally valid for ``instance``."""
    n = instance.n
    if len(genotype.modes) != n or len(genotype.sequence) != n:
        raise ValueError(f"genotype length mismatch: expected {n}")
    if sorted(genotype.sequence) != list(range(n)):
        raise ValueError("sequence is not a permutation of the activities")
    for i, m in enumerate(genotype.modes):
        if not 0 <= m < instance.num_modes[i]:
            raise ValueError(f"activity {i}: invalid mode {m}")


def _earliest_fit(usage, caps, demand, t: int, d: int) -> int:
    while True:
        for r, q in demand:
            limit = caps[r] - q
            row = usage[r]
            for tau in range(t + d - 1, t - 1, -1):
                if row[tau] > limit:
                    t = tau + 1
                    break
            else:
                continue
            break
        else:
            return t


def place(instance: Instance, genotype: Genotype) -> tuple[list[int], list[int], list[list[int]]]:
    """Start times, finish times and usage rows of the decoded schedule (mutable lists)."""
    n = instance.n
    modes = genotype.modes
    priority = [0] * n
    for p, a in enumerate(genotype.sequence):
        priority[a] = p

    preds = instance.predecessors
    succs = instance.successors
    waiting = [len(p) for p in preds]
    eligible = [(priority[i], i) for i in range(n) if waiting[i] == 0]
    heapq.heapify(eligible)

    caps = instance.renewable_caps
    horizon = instance.horizon
    usage = [[0] * horizon for _ in caps]
    start = [0] * n
    finish = [0] * n
    release = instance.release_of
    durations = instance.durations
    renewable_use = instance.renewable_use

    while eligible:
        _, i = heapq.heappop(eligible)
        m = modes[i]
        d = durations[i][m]
        t = release[i]
        for j in preds[i]:
            if finish[j] > t:
                t = finish[j]
        demand = renewable_use[i][m]
        if d > 0 and demand:
            t = _earliest_fit(usage, caps, demand, t, d)
            for r, q in demand:
                row = usage[r]
                for tau in range(t, t + d):
                    row[tau] += q
        start[i] = t
        finish[i] = t + d
        for s in succs[i]:
            waiting[s] -= 1
            if waiting[s] == 0:
                heapq.heappush(eligible, (priority[s], s))
    return start, finish, usage


def decode(instance: Instance, genotype: Genotype) -> Schedule:
    """Serial schedule generation scheme; always returns a feasible active schedule.

    Non-renewable resources are ignored here.
    """
    start, finish, usage = place(instance, genotype)
    return Schedule(genotype.modes, tuple(start), tuple(finish), tuple(tuple(u) for u in usage))


def project_finish(instance: Instance, finish) -> list[int]:
    return [max((finish[i] for i in members), default=instance.projects[p].release_date)
            for p, members in enumerate(instance.project_activities)]


def evaluate(instance: Instance, schedule: Schedule, config: EvaluationConfig = EvaluationConfig()) -> Evaluation:
    """TPD, TMS and the combined value ``alpha * TPD + TMS``."""
    return _objective(instance, schedule.finish, config)


def _objective(instance: Instance, finish, config: EvaluationConfig) -> Evaluation:
    tms = max(finish, default=0)
    tpd = 0
    for p, fin in enumerate(project_finish(instance, finish)):
        tpd += fin - instance.projects[p].release_date - instance.project_cpd[p]
    return config.combine(tpd, tms)


def lex_compare(a: Evaluation, b: Evaluation) -> int:
    """-1 if ``a`` is better, 1 if worse, 0 if tied (TPD first, then TMS)."""
    ka, kb = (a.tpd, a.tms), (b.tpd, b.tms)
    return (ka > kb) - (ka < kb)


def score(instance: Instance, genotype: Genotype, config: EvaluationConfig = EvaluationConfig()) -> Evaluation:
    """Objective of ``genotype`` without materializing the schedule."""
    return _objective(instance, place(instance, genotype)[1], config)
