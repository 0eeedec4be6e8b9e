"""Mode vectors: random construction, non-renewable excess and randomized repair."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .instance import Instance

DEFAULT_MAX_RESTARTS = 1000


class RepairExhausted(RuntimeError):
    """No feasible mode vector found within the restart cap."""


@dataclass(frozen=True)
class ExcessReport:
    total_excess: int
    per_resource: tuple[int, ...]

    @property
    def feasible(self) -> bool:
        return self.total_excess == 0


def multi_mode_activities(instance: Instance) -> list[int]:
    return [i for i in instance.real_activities if instance.num_modes[i] > 1]


def random_modes(instance: Instance, rng: random.Random) -> list[int]:
    """Uniform mode per activity; single-mode activities and dummies get mode 0."""
    modes = [0] * instance.n
    for i in instance.real_activities:
        k = instance.num_modes[i]
        if k > 1:
            modes[i] = rng.randrange(k)
    return modes


def nonrenewable_usage(instance: Instance, modes: Sequence[int]) -> list[int]:
    usage = [0] * len(instance.nonrenewable_caps)
    for i, m in enumerate(modes):
        for r, q in instance.nonrenewable_use[i][m]:
            usage[r] += q
    return usage


def excess(instance: Instance, modes: Sequence[int]) -> ExcessReport:
    per = tuple(max(0, u - c) for u, c in zip(nonrenewable_usage(instance, modes),
                                              instance.nonrenewable_caps))
    return ExcessReport(sum(per), per)


def is_mode_feasible(instance: Instance, modes: Sequence[int]) -> bool:
    caps = instance.nonrenewable_caps
    return all(u <= c for u, c in zip(nonrenewable_usage(instance, modes), caps))


def provably_infeasible(instance: Instance) -> bool:
    """True if some resource is over capacity even with every activity at its cheapest mode."""
    floor = [0] * len(instance.nonrenewable_caps)
    for i in instance.real_activities:
        uses = instance.nonrenewable_use[i]
        for r in {r for mode in uses for r, _ in mode}:
            floor[r] += min(dict(mode).get(r, 0) for mode in uses)
    return any(f > c for f, c in zip(floor, instance.nonrenewable_caps))


def repair_modes(instance: Instance, modes: Sequence[int], rng: random.Random,
                 max_attempts: int | None = None,
                 max_restarts: int = DEFAULT_MAX_RESTARTS,
                 observer: Callable[[int, bool], None] | None = None) -> list[int]:
    """Randomized descent on total non-renewable excess.

    One activity is switched to a random other mode per attempt; the switch is
    kept unless it increases the excess. An attempt is unsuccessful unless the
    excess strictly drops. After ``max_attempts`` consecutive unsuccessful
    attempts the vector is rebuilt with :func:`random_modes`.

    ``observer(total_excess, restarted)`` is called after every attempt.
    """
    if max_attempts is None:
        max_attempts = 50 * instance.n
    modes = list(modes)
    caps = instance.nonrenewable_caps
    use = instance.nonrenewable_use
    usage = nonrenewable_usage(instance, modes)
    total = sum(max(0, u - c) for u, c in zip(usage, caps))
    if total == 0:
        return modes

    candidates = multi_mode_activities(instance)
    if not candidates or provably_infeasible(instance):
        raise RepairExhausted("no feasible mode assignment exists for this instance")

    restarts = 0
    unsuccessful = 0
    while total > 0:
        if unsuccessful >= max_attempts:
            restarts += 1
            if restarts > max_restarts:
                raise RepairExhausted(f"mode repair gave up after {max_restarts} restarts")
            modes = random_modes(instance, rng)
            usage = nonrenewable_usage(instance, modes)
            total = sum(max(0, u - c) for u, c in zip(usage, caps))
            unsuccessful = 0
            if observer is not None:
                observer(total, True)
            continue

        i = rng.choice(candidates)
        old = modes[i]
        new = rng.randrange(instance.num_modes[i] - 1)
        if new >= old:
            new += 1
        touched = {r for r, _ in use[i][old]} | {r for r, _ in use[i][new]}
        delta = 0
        changed = {}
        for r in touched:
            u = usage[r] - dict(use[i][old]).get(r, 0) + dict(use[i][new]).get(r, 0)
            changed[r] = u
            delta += max(0, u - caps[r]) - max(0, usage[r] - caps[r])
        if delta <= 0:
            modes[i] = new
            for r, u in changed.items():
                usage[r] = u
            total += delta
        if delta < 0:
            unsuccessful = 0
        else:
            unsuccessful += 1
        if observer is not None:
            observer(total, False)
    return modes
