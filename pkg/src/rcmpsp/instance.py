"""Multi-project instance model, canonical text format and super-project flattening.

The canonical format is line oriented; ``#`` starts a comment and tokens are
whitespace separated::

    global_renewable <G> <cap_1> ... <cap_G>
    projects <P>
    project <p> release <r> renewable_local <L> <caps...> nonrenewable_local <N> <caps...> activities <A>
    activity <a> modes <K> successors <cnt> <s_1> ... <s_cnt>
    mode <duration> gr <G demands> lr <L demands> nr <N demands>

Projects, activities and modes are numbered from 1 in files and from 0 in
memory. Flattening assigns global indices as follows: 0 is the dummy source,
the real activities of project 0, 1, ... follow in file order, and ``n - 1``
is the dummy sink.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

DUMMY_PROJECT = -1

_TOKEN = re.compile(r"\S+")


class InstanceFormatError(ValueError):
    """Syntax error in an instance file, with 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class InstanceValidationError(ValueError):
    """Semantically invalid instance (cycle, dangling successor, bad lengths...)."""


@dataclass(frozen=True)
class ModeSpec:
    duration: int
    global_renewable_demand: tuple[int, ...]
    local_renewable_demand: tuple[int, ...]
    nonrenewable_demand: tuple[int, ...]


@dataclass(frozen=True)
class ActivitySpec:
    local_id: int
    modes: tuple[ModeSpec, ...]
    successors: tuple[int, ...]


@dataclass(frozen=True)
class ProjectSpec:
    id: int
    release_date: int
    activities: tuple[ActivitySpec, ...]
    local_renewable_caps: tuple[int, ...]
    local_nonrenewable_caps: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Instance:
    """Flattened super-project. Immutable; safe to share between threads.

    Renewable resources are numbered globally: the ``G`` global ones first,
    then the local renewables of each project in project order. Non-renewable
    resources are likewise concatenated over projects.
    """

    projects: tuple[ProjectSpec, ...]
    global_renewable_caps: tuple[int, ...]
    n: int
    num_modes: tuple[int, ...]
    durations: tuple[tuple[int, ...], ...]
    # per activity, per mode: ((resource, demand), ...) with demand > 0
    renewable_use: tuple[tuple[tuple[tuple[int, int], ...], ...], ...]
    # per activity, per mode: ((resource, demand), ...) with demand > 0
    nonrenewable_use: tuple[tuple[tuple[tuple[int, int], ...], ...], ...]
    renewable_caps: tuple[int, ...]
    nonrenewable_caps: tuple[int, ...]
    renewable_owner: tuple[int, ...]
    nonrenewable_owner: tuple[int, ...]
    predecessors: tuple[tuple[int, ...], ...]
    successors: tuple[tuple[int, ...], ...]
    project_of: tuple[int, ...]
    release_of: tuple[int, ...]
    local_id_of: tuple[int, ...]
    project_activities: tuple[tuple[int, ...], ...]
    project_cpd: tuple[int, ...]
    topological_order: tuple[int, ...]
    horizon: int
    _fingerprint: str = field(default="", repr=False)

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.n - 1

    @property
    def real_activities(self) -> range:
        return range(1, self.n - 1)

    @property
    def num_projects(self) -> int:
        return len(self.projects)

    def is_dummy(self, i: int) -> bool:
        return i == 0 or i == self.n - 1

    def serialize(self) -> str:
        """Canonical text of the instance; equal for equal instances."""
        return self._fingerprint

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self._fingerprint == other._fingerprint

    def __hash__(self) -> int:
        return hash(self._fingerprint)


# --------------------------------------------------------------------------- parsing


class _Tokens:
    """Cursor over the tokens of one line."""

    def __init__(self, line_no: int, text: str):
        self.line_no = line_no
        self.items = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(text)]
        self.pos = 0

    def _column(self) -> int:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        if self.items:
            tok, col = self.items[-1]
            return col + len(tok)
        return 1

    def error(self, message: str) -> InstanceFormatError:
        return InstanceFormatError(message, self.line_no, self._column())

    def keyword(self, word: str) -> None:
        if self.pos >= len(self.items):
            raise self.error(f"expected '{word}', got end of line")
        tok = self.items[self.pos][0]
        if tok != word:
            raise self.error(f"expected '{word}', got '{tok}'")
        self.pos += 1

    def integer(self, what: str) -> int:
        if self.pos >= len(self.items):
            raise self.error(f"expected {what}, got end of line")
        tok = self.items[self.pos][0]
        try:
            value = int(tok)
        except ValueError:
            raise self.error(f"expected integer {what}, got '{tok}'") from None
        if value < 0:
            raise self.error(f"negative number {value} for {what}")
        self.pos += 1
        return value

    def integers(self, count: int, what: str) -> tuple[int, ...]:
        return tuple(self.integer(what) for _ in range(count))

    def end(self) -> None:
        if self.pos < len(self.items):
            raise self.error(f"unexpected token '{self.items[self.pos][0]}'")


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if body.strip():
            yield _Tokens(no, body)


def parse_instance(text: str) -> tuple[list[ProjectSpec], tuple[int, ...]]:
    """Parse canonical instance text into project specs and global renewable caps.

    Raises InstanceFormatError on syntax errors and InstanceValidationError on
    semantic errors.
    """
    lines = _lines(text)
    last_line = [0]

    def next_line(expect: str) -> _Tokens:
        try:
            toks = next(lines)
        except StopIteration:
            raise InstanceFormatError(f"unexpected end of file, expected '{expect}'",
                                      last_line[0] + 1, 1) from None
        last_line[0] = toks.line_no
        return toks

    toks = next_line("global_renewable")
    toks.keyword("global_renewable")
    n_global = toks.integer("global resource count")
    global_caps = toks.integers(n_global, "global capacity")
    toks.end()

    toks = next_line("projects")
    toks.keyword("projects")
    n_projects = toks.integer("project count")
    toks.end()

    projects = []
    for p in range(n_projects):
        toks = next_line("project")
        toks.keyword("project")
        number = toks.integer("project number")
        if number != p + 1:
            raise InstanceFormatError(f"expected project {p + 1}, got {number}",
                                      toks.line_no, toks.items[1][1])
        toks.keyword("release")
        release = toks.integer("release date")
        toks.keyword("renewable_local")
        local_caps = toks.integers(toks.integer("local renewable count"), "local renewable capacity")
        toks.keyword("nonrenewable_local")
        nr_caps = toks.integers(toks.integer("non-renewable count"), "non-renewable capacity")
        toks.keyword("activities")
        n_acts = toks.integer("activity count")
        toks.end()

        activities = []
        for a in range(n_acts):
            toks = next_line("activity")
            toks.keyword("activity")
            number = toks.integer("activity number")
            if number != a + 1:
                raise InstanceFormatError(f"expected activity {a + 1}, got {number}",
                                          toks.line_no, toks.items[1][1])
            toks.keyword("modes")
            n_modes = toks.integer("mode count")
            toks.keyword("successors")
            succ = toks.integers(toks.integer("successor count"), "successor")
            toks.end()
            if n_modes == 0:
                raise InstanceValidationError(f"project {p + 1} activity {a + 1}: no modes")
            modes = []
            for _ in range(n_modes):
                toks = next_line("mode")
                toks.keyword("mode")
                duration = toks.integer("duration")
                toks.keyword("gr")
                gr = toks.integers(n_global, "global renewable demand")
                toks.keyword("lr")
                lr = toks.integers(len(local_caps), "local renewable demand")
                toks.keyword("nr")
                nr = toks.integers(len(nr_caps), "non-renewable demand")
                toks.end()
                modes.append(ModeSpec(duration, gr, lr, nr))
            activities.append(ActivitySpec(a, tuple(modes), tuple(s - 1 for s in succ)))
        projects.append(ProjectSpec(p, release, tuple(activities), local_caps, nr_caps))

    for toks in lines:
        raise toks.error("trailing content after last project")

    for project in projects:
        validate_project(project, global_caps)
    return projects, global_caps


def validate_project(project: ProjectSpec, global_caps: Sequence[int]) -> None:
    """Check the ProjectSpec invariants; raise InstanceValidationError otherwise."""
    tag = f"project {project.id + 1}"
    if project.release_date < 0:
        raise InstanceValidationError(f"{tag}: negative release date")
    for caps in (project.local_renewable_caps, project.local_nonrenewable_caps, global_caps):
        if any(c < 0 for c in caps):
            raise InstanceValidationError(f"{tag}: negative capacity")
    n_acts = len(project.activities)
    for act in project.activities:
        where = f"{tag} activity {act.local_id + 1}"
        if not act.modes:
            raise InstanceValidationError(f"{where}: no modes")
        seen = set()
        for s in act.successors:
            if s == act.local_id:
                raise InstanceValidationError(f"{where}: self-reference in successors")
            if not 0 <= s < n_acts:
                raise InstanceValidationError(f"{where}: dangling successor {s + 1}")
            if s in seen:
                raise InstanceValidationError(f"{where}: duplicate successor {s + 1}")
            seen.add(s)
        for k, mode in enumerate(act.modes, start=1):
            mwhere = f"{where} mode {k}"
            if mode.duration < 0:
                raise InstanceValidationError(f"{mwhere}: negative duration")
            checks = (
                (mode.global_renewable_demand, global_caps, "global renewable"),
                (mode.local_renewable_demand, project.local_renewable_caps, "local renewable"),
                (mode.nonrenewable_demand, project.local_nonrenewable_caps, "non-renewable"),
            )
            for demand, caps, kind in checks:
                if len(demand) != len(caps):
                    raise InstanceValidationError(
                        f"{mwhere}: {kind} demand length {len(demand)} != capacity length {len(caps)}")
                if any(q < 0 for q in demand):
                    raise InstanceValidationError(f"{mwhere}: negative {kind} demand")
            for kind, demand, caps in (
                ("global renewable", mode.global_renewable_demand, global_caps),
                ("local renewable", mode.local_renewable_demand, project.local_renewable_caps),
            ):
                for r, (q, cap) in enumerate(zip(demand, caps), start=1):
                    if q > cap:
                        raise InstanceValidationError(
                            f"{mwhere}: {kind} resource {r} demand {q} exceeds capacity {cap}")
    order = _topological([a.successors for a in project.activities])
    if order is None:
        raise InstanceValidationError(f"{tag}: precedence cycle detected")


def _topological(successors: Sequence[Sequence[int]]) -> list[int] | None:
    """Kahn's algorithm; None if the graph has a cycle."""
    indeg = [0] * len(successors)
    for succ in successors:
        for s in succ:
            indeg[s] += 1
    queue = deque(i for i, d in enumerate(indeg) if d == 0)
    order = []
    while queue:
        i = queue.popleft()
        order.append(i)
        for s in successors[i]:
            indeg[s] -= 1
            if indeg[s] == 0:
                queue.append(s)
    return order if len(order) == len(successors) else None


# --------------------------------------------------------------------------- writing


def format_instance(projects: Sequence[ProjectSpec], global_caps: Sequence[int]) -> str:
    """Inverse of :func:`parse_instance` (canonical spacing, no comments)."""

    def ints(values):
        return " ".join(str(v) for v in values)

    def counted(values):
        return " ".join([str(len(values)), *map(str, values)])

    out = [f"global_renewable {counted(global_caps)}", f"projects {len(projects)}"]
    for p in projects:
        out.append(
            f"project {p.id + 1} release {p.release_date} "
            f"renewable_local {counted(p.local_renewable_caps)} "
            f"nonrenewable_local {counted(p.local_nonrenewable_caps)} "
            f"activities {len(p.activities)}")
        for a in p.activities:
            out.append(f"activity {a.local_id + 1} modes {len(a.modes)} "
                       f"successors {counted([s + 1 for s in a.successors])}")
            for m in a.modes:
                out.append(f"mode {m.duration} gr {ints(m.global_renewable_demand)} "
                           f"lr {ints(m.local_renewable_demand)} nr {ints(m.nonrenewable_demand)}")
    return "\n".join(line.replace("  ", " ").rstrip() for line in out) + "\n"


# --------------------------------------------------------------------------- flattening


def flatten(projects: Sequence[ProjectSpec], global_caps: Sequence[int]) -> Instance:
    """Merge all projects into one super-project with dummy source and sink."""
    projects = tuple(projects)
    global_caps = tuple(global_caps)
    for p in projects:
        validate_project(p, global_caps)

    n_real = sum(len(p.activities) for p in projects)
    n = n_real + 2
    sink = n - 1

    renewable_caps = list(global_caps)
    renewable_owner = [DUMMY_PROJECT] * len(global_caps)
    nonrenewable_caps: list[int] = []
    nonrenewable_owner: list[int] = []
    lr_offset, nr_offset, first_index = [], [], []
    idx = 1
    for p in projects:
        lr_offset.append(len(renewable_caps))
        renewable_caps.extend(p.local_renewable_caps)
        renewable_owner.extend([p.id] * len(p.local_renewable_caps))
        nr_offset.append(len(nonrenewable_caps))
        nonrenewable_caps.extend(p.local_nonrenewable_caps)
        nonrenewable_owner.extend([p.id] * len(p.local_nonrenewable_caps))
        first_index.append(idx)
        idx += len(p.activities)

    num_modes = [1] * n
    durations: list[tuple[int, ...]] = [(0,)] * n
    renewable_use: list[tuple] = [((),)] * n
    nonrenewable_use: list[tuple] = [((),)] * n
    successors: list[list[int]] = [[] for _ in range(n)]
    project_of = [DUMMY_PROJECT] * n
    release_of = [0] * n
    local_id_of = [-1] * n
    project_activities = []

    for pi, p in enumerate(projects):
        base = first_index[pi]
        members = []
        has_pred = [False] * len(p.activities)
        for a in p.activities:
            for s in a.successors:
                has_pred[s] = True
        for a in p.activities:
            g = base + a.local_id
            members.append(g)
            project_of[g] = pi
            release_of[g] = p.release_date
            local_id_of[g] = a.local_id
            num_modes[g] = len(a.modes)
            durations[g] = tuple(m.duration for m in a.modes)
            renewable_use[g] = tuple(
                tuple((r, q) for r, q in enumerate(m.global_renewable_demand) if q > 0)
                + tuple((lr_offset[pi] + r, q) for r, q in enumerate(m.local_renewable_demand) if q > 0)
                for m in a.modes)
            nonrenewable_use[g] = tuple(
                tuple((nr_offset[pi] + r, q) for r, q in enumerate(m.nonrenewable_demand) if q > 0)
                for m in a.modes)
            successors[g] = [base + s for s in a.successors] or [sink]
            if not has_pred[a.local_id]:
                successors[0].append(g)
        project_activities.append(tuple(members))
    if n_real == 0:
        successors[0].append(sink)

    successors_t = tuple(tuple(sorted(s)) for s in successors)
    predecessors: list[list[int]] = [[] for _ in range(n)]
    for i, succ in enumerate(successors_t):
        for s in succ:
            predecessors[s].append(i)
    order = _topological(successors_t)
    if order is None:  # pragma: no cover - projects are validated acyclic
        raise InstanceValidationError("precedence cycle detected")

    min_dur = [min(d) for d in durations]
    cpd = []
    for members in project_activities:
        cpd.append(_longest_path(set(members), order, successors_t, min_dur))

    horizon = (max((p.release_date for p in projects), default=0)
               + sum(max(d) for d in durations) + 1)

    return Instance(
        projects=projects,
        global_renewable_caps=global_caps,
        n=n,
        num_modes=tuple(num_modes),
        durations=tuple(durations),
        renewable_use=tuple(renewable_use),
        nonrenewable_use=tuple(nonrenewable_use),
        renewable_caps=tuple(renewable_caps),
        nonrenewable_caps=tuple(nonrenewable_caps),
        renewable_owner=tuple(renewable_owner),
        nonrenewable_owner=tuple(nonrenewable_owner),
        predecessors=tuple(tuple(p) for p in predecessors),
        successors=successors_t,
        project_of=tuple(project_of),
        release_of=tuple(release_of),
        local_id_of=tuple(local_id_of),
        project_activities=tuple(project_activities),
        project_cpd=tuple(cpd),
        topological_order=tuple(order),
        horizon=horizon,
        _fingerprint=format_instance(projects, global_caps),
    )


def _longest_path(members, order, successors, weight) -> int:
    # longest weighted path restricted to `members`, weights on nodes
    finish = {}
    best = 0
    for i in order:
        if i not in members:
            continue
        f = finish.get(i, 0) + weight[i]
        best = max(best, f)
        for s in successors[i]:
            if s in members and finish.get(s, 0) < f:
                finish[s] = f
    return best


def critical_path_bound(instance: Instance, project: int) -> int:
    """Resource-free longest path through ``project`` using minimum mode durations."""
    return instance.project_cpd[project]


def load_instance(path: str | Path) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    return flatten(*parse_instance(text))


def loads_instance(text: str) -> Instance:
    return flatten(*parse_instance(text))
