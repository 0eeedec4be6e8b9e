"""Iterated variable neighborhood search over (mode vector, activity sequence) genotypes.

Four operators are cycled in the order EX, INV, SMC, TMC. Small instances
search each neighborhood until it stops improving before moving on; large
instances make a single sweep per neighborhood. When a whole cycle brings no
strict improvement the best known solution is perturbed by a random mode
change plus mode repair, and the search continues from there.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import logging
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .evaluation import DEFAULT_ALPHA, Evaluation, EvaluationConfig, Genotype, Schedule, decode, score
from .instance import Instance
from .modes import DEFAULT_MAX_RESTARTS, is_mode_feasible, multi_mode_activities, random_modes, repair_modes

log = logging.getLogger(__name__)

EX, INV, SMC, TMC = "EX", "INV", "SMC", "TMC"
OPERATORS = (EX, INV, SMC, TMC)

EXHAUST = "exhaust"
SINGLE_PASS = "single-pass"

SMALL_INSTANCE_THRESHOLD = 307


def make_rng(seed: int, worker: int = 0) -> random.Random:
    """Independent, reproducible stream for ``worker`` of a run seeded with ``seed``."""
    return random.Random(f"rcmpsp:{seed}:{worker}")


@dataclass(frozen=True)
class SearchConfig:
    alpha: int = DEFAULT_ALPHA
    small_instance_threshold: int = SMALL_INSTANCE_THRESHOLD
    repair_max_attempts: int | None = None  # None: 50 * n
    repair_max_restarts: int = DEFAULT_MAX_RESTARTS
    time_budget: float = 300.0
    seed: int = 0
    # candidate-count budget (per worker); makes runs reproducible
    max_candidates: int | None = None
    # stop as soon as the best known f reaches this value
    target_f: int | None = None
    # force a strategy instead of choosing by instance size
    strategy: str | None = None
    # cycles of sideways-only TMC moves tolerated before declaring a local optimum
    plateau_cycles: int = 3
    perturb_retries: int = 10

    def __post_init__(self):
        if self.small_instance_threshold < 1:
            raise ValueError("small_instance_threshold must be >= 1")
        if not self.time_budget > 0:
            raise ValueError("time_budget must be > 0")
        if self.strategy not in (None, EXHAUST, SINGLE_PASS):
            raise ValueError(f"unknown strategy {self.strategy!r}")

    @property
    def evaluation(self) -> EvaluationConfig:
        return EvaluationConfig(self.alpha)

    def strategy_for(self, instance: Instance) -> str:
        if self.strategy is not None:
            return self.strategy
        return EXHAUST if instance.n < self.small_instance_threshold else SINGLE_PASS


class Budget:
    """Wall-clock deadline and/or candidate-count cap; thread safe.

    ``charge()`` is called once per candidate and reports exhaustion.
    """

    def __init__(self, seconds: float | None = None, max_candidates: int | None = None,
                 stop_event: threading.Event | None = None, clock: Callable[[], float] = time.monotonic):
        self.clock = clock
        self.started = clock()
        self.deadline = None if seconds is None else self.started + seconds
        self.max_candidates = max_candidates
        self.used = 0
        self.stop_event = stop_event or threading.Event()
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, config: SearchConfig, stop_event: threading.Event | None = None,
                    deadline: float | None = None) -> "Budget":
        budget = cls(config.time_budget, config.max_candidates, stop_event)
        if deadline is not None:
            budget.deadline = deadline
        return budget

    def elapsed(self) -> float:
        return self.clock() - self.started

    def halt(self) -> None:
        self.stop_event.set()

    @property
    def exhausted(self) -> bool:
        if self.stop_event.is_set():
            return True
        if self.max_candidates is not None and self.used >= self.max_candidates:
            return True
        return self.deadline is not None and self.clock() >= self.deadline

    def charge(self) -> bool:
        """Account for one candidate; True if the budget is exhausted (candidate not allowed)."""
        if self.exhausted:
            return True
        with self._lock:
            self.used += 1
        return False


class Trace:
    """CSV trace of accepted moves and perturbations."""

    FIELDS = ("elapsed", "worker", "event", "operator", "f", "tpd", "tms")

    def __init__(self, stream):
        self._writer = csv.writer(stream)
        self._writer.writerow(self.FIELDS)
        self._lock = threading.Lock()
        self._t0 = time.monotonic()

    def record(self, event: str, operator: str, evaluation: Evaluation, worker: int = 0) -> None:
        with self._lock:
            self._writer.writerow((f"{time.monotonic() - self._t0:.3f}", worker, event, operator,
                                   evaluation.f, evaluation.tpd, evaluation.tms))


@dataclass(frozen=True)
class Solution:
    genotype: Genotype
    evaluation: Evaluation


@dataclass
class SearchState:
    incumbent: Solution
    best_known: Solution
    rng: random.Random
    budget: Budget
    operator_cursor: int = 0
    worker: int = 0
    accepted_moves: int = 0
    local_optima: int = 0
    perturbations: int = 0
    # True when the last cycle before a local optimum made no move at all
    clean_local_optimum: bool = False
    history: list[int] = field(default_factory=list)


Monitor = Callable[[str, SearchState], None]


class SearchContext:
    """Per-run services shared by the search routines: scoring, trace, monitor."""

    def __init__(self, instance: Instance, config: SearchConfig, trace: Trace | None = None,
                 monitor: Monitor | None = None):
        self.instance = instance
        self.config = config
        self.eval_config = config.evaluation
        self.trace = trace
        self.monitor = monitor

    def score(self, genotype: Genotype) -> Evaluation:
        return score(self.instance, genotype, self.eval_config)

    def emit(self, event: str, operator: str, state: SearchState, evaluation: Evaluation) -> None:
        if self.trace is not None and event in ("move", "perturb"):
            self.trace.record(event, operator, evaluation, state.worker)
        if self.monitor is not None:
            self.monitor(event, state)


# --------------------------------------------------------------------------- construction


def earliest_starts(instance: Instance) -> list[int]:
    """Forward pass with minimum durations and release dates, no resources."""
    est = [0] * instance.n
    for i in instance.topological_order:
        t = instance.release_of[i]
        for j in instance.predecessors[i]:
            t = max(t, est[j] + min(instance.durations[j]))
        est[i] = t
    return est


def initial_sequence(instance: Instance) -> tuple[int, ...]:
    """Activities by nondecreasing earliest start (ties: lower index), precedence consistent."""
    est = earliest_starts(instance)
    waiting = [len(p) for p in instance.predecessors]
    heap = [(est[i], i) for i in range(instance.n) if waiting[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, i = heapq.heappop(heap)
        order.append(i)
        for s in instance.successors[i]:
            waiting[s] -= 1
            if waiting[s] == 0:
                heapq.heappush(heap, (est[s], s))
    return tuple(order)


def construct(instance: Instance, rng: random.Random, config: SearchConfig) -> Genotype:
    modes = repair_modes(instance, random_modes(instance, rng), rng,
                         config.repair_max_attempts, config.repair_max_restarts)
    return Genotype(modes, initial_sequence(instance))


# --------------------------------------------------------------------------- neighborhoods


class Neighborhood:
    """Deterministically ordered move space of one operator around a genotype.

    Moves are addressed by an index in ``range(size)``. For the mode operators
    the space covers every mode, and moves that would keep the current mode
    yield nothing, so a space built once stays valid while the incumbent
    changes during a sweep.
    """

    def __init__(self, instance: Instance, operator: str, genotype: Genotype):
        self.operator = operator
        if operator in (EX, INV):
            self.slots = [p for p, a in enumerate(genotype.sequence) if not instance.is_dummy(a)]
            k = len(self.slots)
            self.size = k * (k - 1) // 2
        elif operator == SMC:
            self.moves = [(i, m) for i in multi_mode_activities(instance)
                          for m in range(instance.num_modes[i])]
            self.size = len(self.moves)
        elif operator == TMC:
            self.multi = multi_mode_activities(instance)
            self.num_modes = instance.num_modes
            self.size = sum(self.num_modes[i] * self.num_modes[j]
                            for i, j in itertools.combinations(self.multi, 2))
        else:
            raise ValueError(f"unknown operator {operator!r}")

    def _descriptors(self, start: int, stop: int) -> Iterator:
        if self.operator in (EX, INV):
            pairs = itertools.combinations(range(len(self.slots)), 2)
            return itertools.islice(pairs, start, stop)
        if self.operator == SMC:
            return iter(self.moves[start:stop])
        moves = ((i, j, a, b) for i, j in itertools.combinations(self.multi, 2)
                 for a in range(self.num_modes[i]) for b in range(self.num_modes[j]))
        return itertools.islice(moves, start, stop)

    def apply(self, descriptor, genotype: Genotype) -> Genotype | None:
        op = self.operator
        if op == EX:
            x, y = descriptor
            seq = list(genotype.sequence)
            px, py = self.slots[x], self.slots[y]
            seq[px], seq[py] = seq[py], seq[px]
            return Genotype(genotype.modes, seq)
        if op == INV:
            x, y = descriptor
            seq = list(genotype.sequence)
            positions = self.slots[x:y + 1]
            values = [seq[p] for p in positions]
            for p, v in zip(positions, reversed(values)):
                seq[p] = v
            return Genotype(genotype.modes, seq)
        modes = list(genotype.modes)
        if op == SMC:
            i, m = descriptor
            if modes[i] == m:
                return None
            modes[i] = m
        else:
            i, j, a, b = descriptor
            if modes[i] == a or modes[j] == b:
                return None
            modes[i], modes[j] = a, b
        return Genotype(modes, genotype.sequence)

    def candidates(self, current: Callable[[], Genotype], start: int = 0,
                   stop: int | None = None) -> Iterator[Genotype]:
        """Yield candidates in order, each built from ``current()`` at yield time."""
        stop = self.size if stop is None else min(stop, self.size)
        for descriptor in self._descriptors(start, stop):
            cand = self.apply(descriptor, current())
            if cand is not None:
                yield cand


def neighbors(instance: Instance, operator: str, genotype: Genotype) -> Iterator[Genotype]:
    space = Neighborhood(instance, operator, genotype)
    return space.candidates(lambda: genotype)


def neighbors_EX(instance: Instance, genotype: Genotype) -> Iterator[Genotype]:
    return neighbors(instance, EX, genotype)


def neighbors_INV(instance: Instance, genotype: Genotype) -> Iterator[Genotype]:
    return neighbors(instance, INV, genotype)


def neighbors_SMC(instance: Instance, genotype: Genotype) -> Iterator[Genotype]:
    return neighbors(instance, SMC, genotype)


def neighbors_TMC(instance: Instance, genotype: Genotype) -> Iterator[Genotype]:
    return neighbors(instance, TMC, genotype)


def accept(operator: str, current: Evaluation, candidate: Evaluation, modes_feasible: bool) -> bool:
    if operator in (EX, INV):
        return candidate.f < current.f
    if operator == SMC:
        return modes_feasible and candidate.f < current.f
    if operator == TMC:
        return modes_feasible and candidate.f <= current.f
    raise ValueError(f"unknown operator {operator!r}")


def sweep(ctx: SearchContext, state: SearchState, operator: str, space: Neighborhood,
          start: int = 0, stop: int | None = None, restart_on_improvement: bool = False) -> tuple[bool, bool]:
    """One first-accept pass over ``space[start:stop]``.

    Returns ``(improved, interrupted)``; interrupted means the pass stopped
    early, either on budget exhaustion or (if requested) right after a strict
    improvement.
    """
    instance = ctx.instance
    check_modes = operator in (SMC, TMC)
    improved = False
    for cand in space.candidates(lambda: state.incumbent.genotype, start, stop):
        if state.budget.charge():
            return improved, True
        feasible = is_mode_feasible(instance, cand.modes) if check_modes else True
        if not feasible:
            continue
        ev = ctx.score(cand)
        current = state.incumbent.evaluation
        if accept(operator, current, ev, feasible):
            strict = ev.f < current.f
            state.incumbent = Solution(cand, ev)
            state.accepted_moves += 1
            ctx.emit("move", operator, state, ev)
            if ctx.config.target_f is not None and ev.f <= ctx.config.target_f:
                state.budget.halt()
            if strict:
                improved = True
                if restart_on_improvement:
                    return improved, True
    return improved, False


def explore_neighborhood(ctx: SearchContext, state: SearchState, operator: str, strategy: str) -> bool:
    """Search one neighborhood; True if the incumbent strictly improved.

    ``exhaust`` re-enumerates from scratch after every strict improvement
    until a full pass brings none; ``single-pass`` sweeps once. Equal-quality
    TMC moves are applied but do not restart the enumeration.
    """
    improved = False
    while True:
        space = Neighborhood(ctx.instance, operator, state.incumbent.genotype)
        gained, interrupted = sweep(ctx, state, operator, space,
                                    restart_on_improvement=(strategy == EXHAUST))
        improved |= gained
        if strategy == SINGLE_PASS or not gained or state.budget.exhausted:
            return improved


# --------------------------------------------------------------------------- perturbation


def perturb(instance: Instance, genotype: Genotype, rng: random.Random,
            max_attempts: int | None = None, max_restarts: int = DEFAULT_MAX_RESTARTS,
            retries: int = 10) -> Genotype:
    """Switch one random activity to another mode, then repair the mode vector.

    The draw is repeated (up to ``retries`` times) while repair lands back on
    the original vector. Instances without any multi-mode activity get a
    random swap of two sequence entries instead.
    """
    candidates = multi_mode_activities(instance)
    if not candidates:
        slots = [p for p, a in enumerate(genotype.sequence) if not instance.is_dummy(a)]
        if len(slots) < 2:
            return genotype
        log.debug("no multi-mode activity; perturbing by a random swap")
        x, y = rng.sample(slots, 2)
        seq = list(genotype.sequence)
        seq[x], seq[y] = seq[y], seq[x]
        return Genotype(genotype.modes, seq)

    original = list(genotype.modes)
    modes = original
    for _ in range(max(1, retries)):
        modes = list(original)
        i = rng.choice(candidates)
        new = rng.randrange(instance.num_modes[i] - 1)
        modes[i] = new + 1 if new >= modes[i] else new
        modes = repair_modes(instance, modes, rng, max_attempts, max_restarts)
        if modes != original:
            break
    return Genotype(modes, genotype.sequence)


# --------------------------------------------------------------------------- main loop


Explorer = Callable[[SearchContext, SearchState, str, str], bool]
LocalOptimumHook = Callable[[SearchState], Solution]


def new_state(ctx: SearchContext, rng: random.Random, budget: Budget, worker: int = 0) -> SearchState:
    genotype = construct(ctx.instance, rng, ctx.config)
    sol = Solution(genotype, ctx.score(genotype))
    state = SearchState(incumbent=sol, best_known=sol, rng=rng, budget=budget, worker=worker)
    state.history.append(sol.evaluation.f)
    ctx.emit("construct", "", state, sol.evaluation)
    if ctx.config.target_f is not None and sol.evaluation.f <= ctx.config.target_f:
        budget.halt()
    return state


def _update_best(ctx: SearchContext, state: SearchState) -> None:
    if state.incumbent.evaluation.f < state.best_known.evaluation.f:
        state.best_known = state.incumbent
        state.history.append(state.best_known.evaluation.f)
        ctx.emit("improve", "", state, state.best_known.evaluation)


def iterate(ctx: SearchContext, state: SearchState, strategy: str,
            explore: Explorer = explore_neighborhood,
            on_local_optimum: LocalOptimumHook | None = None) -> SearchState:
    """Cycle the operators until the budget runs out, perturbing at local optima."""
    config = ctx.config
    plateau = 0
    while not state.budget.exhausted:
        improved = moved = False
        for cursor, op in enumerate(OPERATORS):
            state.operator_cursor = cursor
            before = state.incumbent
            improved |= explore(ctx, state, op, strategy)
            moved |= state.incumbent is not before
            _update_best(ctx, state)
            if state.budget.exhausted:
                return state
        if improved:
            plateau = 0
            continue
        if moved and plateau < config.plateau_cycles:
            plateau += 1
            continue
        plateau = 0

        state.local_optima += 1
        state.clean_local_optimum = not moved
        ctx.emit("local_optimum", "", state, state.incumbent.evaluation)
        base = on_local_optimum(state) if on_local_optimum is not None else state.best_known
        genotype = perturb(ctx.instance, base.genotype, state.rng, config.repair_max_attempts,
                           config.repair_max_restarts, config.perturb_retries)
        state.incumbent = Solution(genotype, ctx.score(genotype))
        state.perturbations += 1
        ctx.emit("perturb", "", state, state.incumbent.evaluation)
        _update_best(ctx, state)
    return state


@dataclass(frozen=True)
class SearchResult:
    genotype: Genotype
    evaluation: Evaluation
    schedule: Schedule
    state: SearchState | None = None


def finish(ctx: SearchContext, best: Solution, state: SearchState | None = None) -> SearchResult:
    schedule = decode(ctx.instance, best.genotype)
    return SearchResult(best.genotype, best.evaluation, schedule, state)


def run_vns(instance: Instance, config: SearchConfig, trace: Trace | None = None,
            monitor: Monitor | None = None, budget: Budget | None = None) -> SearchResult:
    """Single-threaded iterated VNS from a random feasible start."""
    ctx = SearchContext(instance, config, trace, monitor)
    budget = budget or Budget.from_config(config)
    state = new_state(ctx, make_rng(config.seed, 0), budget)
    iterate(ctx, state, config.strategy_for(instance))
    _update_best(ctx, state)
    return finish(ctx, state.best_known, state)


def neighborhood_sizes(instance: Instance, genotype: Genotype) -> dict[str, int]:
    return {op: sum(1 for _ in neighbors(instance, op, genotype)) for op in OPERATORS}


def partition(size: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(size)`` into ``parts`` contiguous ranges differing in length by at most one."""
    base, extra = divmod(size, parts)
    ranges, lo = [], 0
    for k in range(parts):
        hi = lo + base + (1 if k < extra else 0)
        ranges.append((lo, hi))
        lo = hi
    return ranges

