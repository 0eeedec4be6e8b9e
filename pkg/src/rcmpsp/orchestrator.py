"""Parallel search regimes.

Small instances run independent searches in worker threads that meet at a
shared best solution whenever one of them hits a local optimum. Large
instances run one search whose neighborhood sweeps are split into contiguous
ranges handled by the workers; the best of the per-range results is
committed after each sweep.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor

from .instance import Instance
from .search import (
    SINGLE_PASS,
    Budget,
    Neighborhood,
    SearchConfig,
    SearchContext,
    SearchResult,
    SearchState,
    Solution,
    Trace,
    Monitor,
    _update_best,
    finish,
    iterate,
    make_rng,
    new_state,
    partition,
    sweep,
)

DEFAULT_WORKERS = 4


class SharedBest:
    """Best solution seen by any worker. Replaced only on strictly smaller f."""

    def __init__(self, initial: Solution | None = None):
        self._lock = threading.Lock()
        self._best = initial
        self.updates = 0
        # every (worker, f) offered, for diagnostics
        self.published: list[tuple[int, int]] = []

    def publish(self, solution: Solution, worker: int = 0) -> bool:
        with self._lock:
            self.published.append((worker, solution.evaluation.f))
            if self._best is None or solution.evaluation.f < self._best.evaluation.f:
                self._best = solution
                self.updates += 1
                return True
            return False

    def snapshot(self) -> Solution | None:
        with self._lock:
            return self._best


def _run_workers(worker_count: int, target, stop: threading.Event) -> list:
    """Run ``target(k)`` for every worker; on failure stop the others and re-raise."""

    def guarded(k):
        try:
            return target(k)
        except BaseException:
            stop.set()
            raise

    if worker_count == 1:
        return [guarded(0)]
    with ThreadPoolExecutor(max_workers=worker_count, thread_name_prefix="rcmpsp") as pool:
        futures = [pool.submit(guarded, k) for k in range(worker_count)]
        errors = []
        results = []
        for fut in futures:
            try:
                results.append(fut.result())
            except BaseException as exc:  # noqa: BLE001 - re-raised below
                errors.append(exc)
        if errors:
            raise errors[0]
        return results


def run_parallel_small(instance: Instance, config: SearchConfig, worker_count: int = DEFAULT_WORKERS,
                       trace: Trace | None = None, monitor: Monitor | None = None,
                       shared: SharedBest | None = None) -> SearchResult:
    """Independent ILS workers that restart from the shared best at every local optimum."""
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    ctx = SearchContext(instance, config, trace, monitor)
    shared = shared if shared is not None else SharedBest()
    stop = threading.Event()
    clock = Budget(config.time_budget)
    strategy = config.strategy_for(instance)
    states: list[SearchState | None] = [None] * worker_count

    def worker(k: int) -> None:
        budget = Budget.from_config(config, stop_event=stop, deadline=clock.deadline)
        state = new_state(ctx, make_rng(config.seed, k), budget, worker=k)
        states[k] = state

        def at_local_optimum(st: SearchState) -> Solution:
            shared.publish(st.best_known, k)
            best = shared.snapshot()
            if best.evaluation.f < st.best_known.evaluation.f:
                st.best_known = best
            return best

        iterate(ctx, state, strategy, on_local_optimum=at_local_optimum)
        _update_best(ctx, state)
        shared.publish(state.best_known, k)

    _run_workers(worker_count, worker, stop)
    return finish(ctx, shared.snapshot(), states[0] if worker_count == 1 else None)


def select_committed(results: list[Solution | None]) -> int | None:
    """Index of the result with the smallest f (ties: lowest index); None if all are None."""
    chosen = None
    for k, sol in enumerate(results):
        if sol is not None and (chosen is None or sol.evaluation.f < results[chosen].evaluation.f):
            chosen = k
    return chosen


def run_parallel_large(instance: Instance, config: SearchConfig, worker_count: int = DEFAULT_WORKERS,
                       trace: Trace | None = None, monitor: Monitor | None = None) -> SearchResult:
    """One search; every sweep is divided into ``worker_count`` contiguous ranges.

    Each range is swept first-accept from the common incumbent. Of the ranges
    that accepted something, the one ending at the smallest f (ties: lowest
    range) supplies the next incumbent.
    """
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    ctx = SearchContext(instance, config, trace, monitor)
    quiet = SearchContext(instance, config)
    budget = Budget.from_config(config)
    state = new_state(ctx, make_rng(config.seed, 0), budget)
    pool = ThreadPoolExecutor(max_workers=worker_count, thread_name_prefix="rcmpsp") if worker_count > 1 else None

    def explore(ctx_: SearchContext, st: SearchState, operator: str, strategy: str) -> bool:
        start = st.incumbent
        space = Neighborhood(instance, operator, start.genotype)

        def part(k_range):
            k, (lo, hi) = k_range
            local = SearchState(incumbent=start, best_known=start, rng=st.rng, budget=st.budget, worker=k)
            sweep(quiet, local, operator, space, lo, hi)
            return local

        ranges = list(enumerate(partition(space.size, worker_count)))
        parts = list(pool.map(part, ranges)) if pool is not None else [part(r) for r in ranges]
        pick = select_committed([None if local.incumbent is start else local.incumbent for local in parts])
        if pick is None:
            return False
        chosen = parts[pick]
        st.incumbent = chosen.incumbent
        st.accepted_moves += chosen.accepted_moves
        ctx_.emit("move", operator, st, st.incumbent.evaluation)
        return st.incumbent.evaluation.f < start.evaluation.f

    try:
        iterate(ctx, state, SINGLE_PASS, explore=explore)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    _update_best(ctx, state)
    return finish(ctx, state.best_known, state)


def solve(instance: Instance, config: SearchConfig, worker_count: int = DEFAULT_WORKERS,
          trace: Trace | None = None) -> SearchResult:
    """Pick the regime by instance size and run it."""
    if instance.n < config.small_instance_threshold:
        return run_parallel_small(instance, config, worker_count, trace)
    return run_parallel_large(instance, config, worker_count, trace)
