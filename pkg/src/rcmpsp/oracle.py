"""Brute-force references for tiny instances (test support).

``enumerate_genotypes`` tries every feasible mode vector with every ordering
of the real activities. ``enumerate_schedules`` ignores the decoder entirely
and walks all integer start vectors that satisfy precedence, release and
renewable capacity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .evaluation import DEFAULT_ALPHA, Evaluation, EvaluationConfig, Genotype, Schedule, decode, evaluate
from .instance import Instance
from .modes import is_mode_feasible


class OracleLimitExceeded(RuntimeError):
    pass


class NoFeasibleGenotype(RuntimeError):
    pass


class HorizonExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_activities: int = 7
    max_total_genotypes: int = 5_000_000


@dataclass(frozen=True)
class OracleResult:
    evaluation: Evaluation
    genotype: Genotype | None = None
    start: tuple[int, ...] | None = None


def _real(instance: Instance) -> list[int]:
    return list(instance.real_activities)


def feasible_mode_vectors(instance: Instance) -> list[tuple[int, ...]]:
    """All mode vectors (dummies at mode 0) with zero non-renewable excess."""
    real = _real(instance)
    out = []
    for combo in itertools.product(*(range(instance.num_modes[i]) for i in real)):
        modes = (0, *combo, 0)
        if is_mode_feasible(instance, modes):
            out.append(modes)
    return out


def _check_size(instance: Instance, limits: OracleLimits, sequences: int, vectors: int) -> None:
    k = instance.n - 2
    if k > limits.max_activities:
        raise OracleLimitExceeded(f"{k} real activities > limit {limits.max_activities}")
    if sequences * vectors > limits.max_total_genotypes:
        raise OracleLimitExceeded(f"{sequences * vectors} genotypes > limit {limits.max_total_genotypes}")


def best_over_sequences(instance: Instance, modes: Sequence[int],
                        config: EvaluationConfig = EvaluationConfig(DEFAULT_ALPHA)) -> OracleResult:
    """Minimum f over every permutation of the real activities for fixed modes."""
    real = _real(instance)
    best = None
    for perm in itertools.permutations(real):
        g = Genotype(modes, (0, *perm, instance.n - 1))
        ev = evaluate(instance, decode(instance, g), config)
        if best is None or ev.f < best.evaluation.f:
            best = OracleResult(ev, g)
    return best


def enumerate_genotypes(instance: Instance, limits: OracleLimits = OracleLimits(),
                        config: EvaluationConfig = EvaluationConfig(DEFAULT_ALPHA)) -> OracleResult:
    """Optimal f over all mode-feasible genotypes."""
    k = instance.n - 2
    if k > limits.max_activities:
        raise OracleLimitExceeded(f"{k} real activities > limit {limits.max_activities}")
    vectors = feasible_mode_vectors(instance)
    _check_size(instance, limits, _factorial(k), len(vectors))
    if not vectors:
        raise NoFeasibleGenotype("no feasible genotype")
    best = None
    for modes in vectors:
        res = best_over_sequences(instance, modes, config)
        if best is None or res.evaluation.f < best.evaluation.f:
            best = res
    return best


def _factorial(k: int) -> int:
    out = 1
    for v in range(2, k + 1):
        out *= v
    return out


def default_horizon(instance: Instance) -> int:
    """Sum of maximum mode durations plus the latest release date."""
    return (sum(max(d) for d in instance.durations)
            + max((p.release_date for p in instance.projects), default=0))


def _objective(instance: Instance, finish: Sequence[int], config: EvaluationConfig) -> Evaluation:
    tms = max(finish, default=0)
    tpd = 0
    for p, members in enumerate(instance.project_activities):
        release = instance.projects[p].release_date
        fin = max((finish[i] for i in members), default=release)
        tpd += fin - release - instance.project_cpd[p]
    return Evaluation(tpd, tms, config.alpha * tpd + tms)


def enumerate_schedules(instance: Instance, modes: Sequence[int], horizon: int | None = None,
                        limits: OracleLimits = OracleLimits(),
                        config: EvaluationConfig = EvaluationConfig(DEFAULT_ALPHA)) -> OracleResult:
    """Minimum f over all feasible integer start vectors with every finish <= ``horizon``."""
    k = instance.n - 2
    if k > limits.max_activities:
        raise OracleLimitExceeded(f"{k} real activities > limit {limits.max_activities}")
    if horizon is None:
        horizon = default_horizon(instance)

    order = [i for i in instance.topological_order if not instance.is_dummy(i)]
    dur = [instance.durations[i][modes[i]] for i in range(instance.n)]
    demand = [instance.renewable_use[i][modes[i]] for i in range(instance.n)]
    caps = instance.renewable_caps
    usage = [[0] * (horizon + 1) for _ in caps]
    start = [0] * instance.n
    finish = [0] * instance.n
    best: list[OracleResult | None] = [None]
    visited = [0]

    def fits(i: int, t: int) -> bool:
        for r, q in demand[i]:
            row = usage[r]
            cap = caps[r] - q
            for tau in range(t, t + dur[i]):
                if row[tau] > cap:
                    return False
        return True

    def place(i: int, t: int, sign: int) -> None:
        for r, q in demand[i]:
            row = usage[r]
            for tau in range(t, t + dur[i]):
                row[tau] += sign * q

    def walk(depth: int) -> None:
        if depth == len(order):
            visited[0] += 1
            if visited[0] > limits.max_total_genotypes:
                raise OracleLimitExceeded("schedule enumeration limit exceeded")
            ev = _objective(instance, finish, config)
            if best[0] is None or ev.f < best[0].evaluation.f:
                best[0] = OracleResult(ev, None, tuple(start))
            return
        i = order[depth]
        lo = instance.release_of[i]
        for j in instance.predecessors[i]:
            lo = max(lo, finish[j])
        for t in range(lo, horizon - dur[i] + 1):
            if not fits(i, t):
                continue
            place(i, t, 1)
            start[i], finish[i] = t, t + dur[i]
            walk(depth + 1)
            place(i, t, -1)

    walk(0)
    if best[0] is None:
        raise HorizonExhausted(f"no feasible schedule within horizon {horizon}")
    res = best[0]
    # dummies: source at 0, sink at the latest finish
    st = list(res.start)
    st[instance.n - 1] = max(res.start[i] + dur[i] for i in range(instance.n - 1)) if instance.n > 2 else 0
    return OracleResult(res.evaluation, None, tuple(st))


def left_shiftable(instance: Instance, schedule: Schedule) -> list[int]:
    """Activities that could start one unit earlier with every other activity fixed."""
    modes = schedule.modes
    caps = instance.renewable_caps
    out = []
    for i in range(instance.n):
        s = schedule.start[i] - 1
        if s < 0 or s < instance.release_of[i]:
            continue
        if any(schedule.finish[j] > s for j in instance.predecessors[i]):
            continue
        d = instance.durations[i][modes[i]]
        # only time unit s becomes newly occupied
        ok = True
        if d > 0:
            for r, q in instance.renewable_use[i][modes[i]]:
                others = sum(dict(instance.renewable_use[j][modes[j]]).get(r, 0)
                             for j in range(instance.n)
                             if j != i and schedule.start[j] <= s < schedule.finish[j])
                if others + q > caps[r]:
                    ok = False
                    break
        if ok:
            out.append(i)
    return out


def accepting_neighbors(instance: Instance, genotype: Genotype, evaluation: Evaluation,
                        config: EvaluationConfig = EvaluationConfig(DEFAULT_ALPHA),
                        strict_only: bool = False) -> list[tuple[str, Genotype]]:
    """Every neighbor of ``genotype`` some operator would accept."""
    from .search import OPERATORS, accept, neighbors

    found = []
    for op in OPERATORS:
        for cand in neighbors(instance, op, genotype):
            feasible = is_mode_feasible(instance, cand.modes)
            ev = evaluate(instance, decode(instance, cand), config)
            if accept(op, evaluation, ev, feasible) and (not strict_only or ev.f < evaluation.f):
                found.append((op, cand))
    return found
