"""Small helpers for writing instances inline in tests."""

from __future__ import annotations

from rcmpsp.instance import ActivitySpec, ModeSpec, ProjectSpec, flatten


def mode(duration, gr=(), lr=(), nr=()):
    return ModeSpec(duration, tuple(gr), tuple(lr), tuple(nr))


def project(pid, activities, release=0, lr_caps=(), nr_caps=()):
    """``activities`` is a list of (modes, successors) with 0-based local successors."""
    acts = tuple(ActivitySpec(a, tuple(ms), tuple(succ)) for a, (ms, succ) in enumerate(activities))
    return ProjectSpec(pid, release, acts, tuple(lr_caps), tuple(nr_caps))


def single_project(activities, global_caps=(), **kw):
    return flatten([project(0, activities, **kw)], tuple(global_caps))
