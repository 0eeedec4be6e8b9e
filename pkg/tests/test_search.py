import csv
import io
import itertools
import random

import pytest

from builders import mode, project, single_project
from rcmpsp.evaluation import Evaluation, Genotype, score
from rcmpsp.instance import flatten
from rcmpsp.modes import excess, is_mode_feasible
from rcmpsp.oracle import accepting_neighbors, enumerate_genotypes
from rcmpsp.search import (
    EX,
    EXHAUST,
    INV,
    OPERATORS,
    SINGLE_PASS,
    SMC,
    TMC,
    Budget,
    Neighborhood,
    SearchConfig,
    SearchContext,
    SearchState,
    Solution,
    Trace,
    accept,
    earliest_starts,
    explore_neighborhood,
    initial_sequence,
    make_rng,
    new_state,
    neighborhood_sizes,
    neighbors,
    partition,
    perturb,
    run_vns,
)
from tiny import tiny_instance


def chain(k, durations=None):
    durations = durations or [1] * k
    return single_project([([mode(d)], [a + 1] if a + 1 < k else []) for a, d in enumerate(durations)])


def independent(k, modes_per=1):
    return single_project([([mode(1 + m, gr=(1,)) for m in range(modes_per)], []) for _ in range(k)],
                          global_caps=(1,))


def state_for(inst, genotype, config=SearchConfig(), budget=None):
    sol = Solution(genotype, score(inst, genotype, config.evaluation))
    return SearchState(sol, sol, random.Random(0), budget or Budget(max_candidates=10**9))


# --------------------------------------------------------------------------- construction


def test_initial_sequence_chain():
    assert initial_sequence(chain(5)) == tuple(range(7))


def test_initial_sequence_t1(t1):
    assert initial_sequence(t1) == (0, 1, 2, 3, 4)


def test_initial_sequence_releases():
    acts = [([mode(2)], [1]), ([mode(3)], [])]
    inst = flatten([project(0, acts, release=0), project(1, acts, release=10)], ())
    # independent forward pass: project 0 at 0 and 2, project 1 at 10 and 12
    assert earliest_starts(inst)[1:5] == [0, 2, 10, 12]
    assert initial_sequence(inst) == (0, 1, 2, 3, 4, 5)


def test_initial_sequence_interleaves_by_earliest_start():
    acts = [([mode(5)], [1]), ([mode(1)], [])]
    inst = flatten([project(0, acts, release=0), project(1, acts, release=2)], ())
    # earliest starts: 1->0, 2->5, 3->2, 4->7
    assert initial_sequence(inst) == (0, 1, 3, 2, 4, 5)


def test_initial_sequence_precedence_consistent_with_zero_durations():
    # activity 1 (local 0) must follow local 1 although both start at 0
    inst = single_project([([mode(1)], []), ([mode(0)], [0])])
    seq = initial_sequence(inst)
    assert seq.index(2) < seq.index(1)


# --------------------------------------------------------------------------- neighborhoods


def test_ex_count():
    inst = independent(4)
    g = Genotype((0,) * 6, initial_sequence(inst))
    assert len(list(neighbors(inst, EX, g))) == 6


@pytest.mark.parametrize("k", [2, 5, 20])
def test_sequence_neighborhood_sizes(k):
    inst = independent(k)
    g = Genotype((0,) * (k + 2), initial_sequence(inst))
    sizes = neighborhood_sizes(inst, g)
    assert sizes[EX] == sizes[INV] == k * (k - 1) // 2


def test_mode_neighborhood_sizes_t1(t1):
    g = Genotype((0,) * 5, initial_sequence(t1))
    sizes = neighborhood_sizes(t1, g)
    assert sizes[SMC] == 3
    assert sizes[TMC] == 3


def test_mode_neighborhood_sizes_general():
    inst = single_project([([mode(1), mode(2), mode(3)], []), ([mode(1)], []), ([mode(1), mode(2)], [])])
    g = Genotype((0, 1, 0, 0, 0), initial_sequence(inst))
    sizes = neighborhood_sizes(inst, g)
    assert sizes[SMC] == (3 - 1) + (2 - 1)
    assert sizes[TMC] == (3 - 1) * (2 - 1)


def test_neighborhoods_skip_dummies_and_keep_them_in_place(t1):
    g = Genotype((0,) * 5, (0, 1, 2, 3, 4))
    for op in OPERATORS:
        for cand in neighbors(t1, op, g):
            assert cand.sequence[0] == 0 and cand.sequence[-1] == 4
            assert cand.modes[0] == cand.modes[-1] == 0


def test_enumeration_order_is_lexicographic():
    inst = independent(3)
    g = Genotype((0,) * 5, (0, 1, 2, 3, 4))
    ex = [c.sequence for c in neighbors(inst, EX, g)]
    assert ex == [(0, 2, 1, 3, 4), (0, 3, 2, 1, 4), (0, 1, 3, 2, 4)]
    inv = [c.sequence for c in neighbors(inst, INV, g)]
    assert inv == [(0, 2, 1, 3, 4), (0, 3, 2, 1, 4), (0, 1, 3, 2, 4)]
    inst4 = independent(4)
    inv4 = [c.sequence[1:5] for c in neighbors(inst4, INV, Genotype((0,) * 6, tuple(range(6))))]
    assert inv4[:3] == [(2, 1, 3, 4), (3, 2, 1, 4), (4, 3, 2, 1)]


def test_tmc_enumerates_all_alternative_pairs():
    inst = independent(3, modes_per=3)
    g = Genotype((0, 0, 1, 2, 0), (0, 1, 2, 3, 4))
    got = [c.modes[1:4] for c in neighbors(inst, TMC, g)]
    expected = []
    for i, j in itertools.combinations(range(3), 2):
        for a in range(3):
            for b in range(3):
                cur = (0, 1, 2)
                if a != cur[i] and b != cur[j]:
                    m = list(cur)
                    m[i], m[j] = a, b
                    expected.append(tuple(m))
    assert got == expected
    assert len(got) == 3 * 2 * 2


def test_neighborhood_index_space():
    inst = independent(4, modes_per=2)
    g = Genotype((0,) * 6, tuple(range(6)))
    assert Neighborhood(inst, SMC, g).size == 8
    assert Neighborhood(inst, TMC, g).size == 6 * 4


def test_partition():
    assert partition(100, 4) == [(0, 25), (25, 50), (50, 75), (75, 100)]
    assert [hi - lo for lo, hi in partition(10, 3)] == [4, 3, 3]
    assert partition(2, 4) == [(0, 1), (1, 2), (2, 2), (2, 2)]


# --------------------------------------------------------------------------- acceptance


def ev(f):
    return Evaluation(0, f, f)


def test_accept_examples():
    assert accept(TMC, ev(10), ev(10), True)
    assert not accept(SMC, ev(10), ev(9), False)
    assert not accept(EX, ev(10), ev(10), True)
    assert accept(INV, ev(10), ev(9), False)  # sequence moves never change modes


def test_accept_truth_table_fuzz():
    rng = random.Random(2024)
    for _ in range(10_000):
        op = rng.choice(OPERATORS)
        cur, cand = rng.randint(0, 20), rng.randint(0, 20)
        feasible = rng.random() < 0.5
        expected = {
            EX: cand < cur,
            INV: cand < cur,
            SMC: cand < cur and feasible,
            TMC: cand <= cur and feasible,
        }[op]
        assert accept(op, ev(cur), ev(cand), feasible) is expected


def test_accept_unknown_operator():
    with pytest.raises(ValueError):
        accept("XX", ev(1), ev(0), True)


# --------------------------------------------------------------------------- exploration


def two_project_swap():
    # a (dur 1) and b (dur 5) in different projects, both need the whole resource
    p0 = project(0, [([mode(1, gr=(1,))], [])])
    p1 = project(1, [([mode(5, gr=(1,))], [])])
    return flatten([p0, p1], (1,))


def test_explore_single_improving_swap():
    inst = two_project_swap()
    bad = Genotype((0,) * 4, (0, 2, 1, 3))
    good = Genotype((0,) * 4, (0, 1, 2, 3))
    # oracle: b first delays project 0 by 5, a first delays project 1 by 1
    assert score(inst, bad) == Evaluation(5, 6, 500_006)
    assert score(inst, good) == Evaluation(1, 6, 100_006)
    state = state_for(inst, bad)
    ctx = SearchContext(inst, SearchConfig())
    assert explore_neighborhood(ctx, state, EX, EXHAUST)
    assert state.accepted_moves == 1
    assert state.incumbent.genotype == good
    assert not explore_neighborhood(ctx, state, EX, EXHAUST)
    assert state.accepted_moves == 1


def test_explore_without_improvement_leaves_state():
    inst = two_project_swap()
    good = Genotype((0,) * 4, (0, 1, 2, 3))
    state = state_for(inst, good)
    before = state.incumbent
    ctx = SearchContext(inst, SearchConfig())
    for op in OPERATORS:
        for strategy in (EXHAUST, SINGLE_PASS):
            assert not explore_neighborhood(ctx, state, op, strategy)
    assert state.incumbent is before


def test_explore_with_expired_deadline():
    inst = two_project_swap()
    state = state_for(inst, Genotype((0,) * 4, (0, 2, 1, 3)), budget=Budget(seconds=1e-9))
    ctx = SearchContext(inst, SearchConfig())
    assert not explore_neighborhood(ctx, state, EX, EXHAUST)
    assert state.accepted_moves == 0


def test_explore_respects_candidate_budget():
    inst = independent(5)
    g = Genotype((0,) * 7, (0, 5, 4, 3, 2, 1, 6))
    state = state_for(inst, g, budget=Budget(max_candidates=3))
    explore_neighborhood(SearchContext(inst, SearchConfig()), state, EX, EXHAUST)
    assert state.budget.used == 3


def test_single_pass_vs_exhaust():
    # reversed sequence of 5 unit jobs on a single-capacity resource in 5 projects
    projects = [project(p, [([mode(p + 1, gr=(1,))], [])]) for p in range(5)]
    inst = flatten(projects, (1,))
    worst = Genotype((0,) * 7, (0, 5, 4, 3, 2, 1, 6))
    ctx = SearchContext(inst, SearchConfig())
    single = state_for(inst, worst)
    explore_neighborhood(ctx, single, EX, SINGLE_PASS)
    exhaust = state_for(inst, worst)
    explore_neighborhood(ctx, exhaust, EX, EXHAUST)
    # exhausting EX on this instance reaches shortest-processing-time order
    assert exhaust.incumbent.genotype.sequence == (0, 1, 2, 3, 4, 5, 6)
    assert exhaust.incumbent.evaluation.f <= single.incumbent.evaluation.f < score(inst, worst).f
    assert single.budget.used == 10


def test_mode_moves_respect_feasibility():
    # the fast mode of either activity blows the non-renewable budget
    inst = single_project([([mode(5, nr=(1,)), mode(1, nr=(3,))], [1]), ([mode(5, nr=(1,)), mode(1, nr=(3,))], [])],
                          nr_caps=(4,))
    g = Genotype((0, 0, 0, 0), (0, 1, 2, 3))
    state = state_for(inst, g)
    ctx = SearchContext(inst, SearchConfig())
    assert explore_neighborhood(ctx, state, SMC, EXHAUST)
    assert is_mode_feasible(inst, state.incumbent.genotype.modes)
    assert sorted(state.incumbent.genotype.modes[1:3]) == [0, 1]
    before = state.incumbent
    assert not explore_neighborhood(ctx, state, TMC, EXHAUST)
    assert state.incumbent.evaluation == before.evaluation


def test_tmc_accepts_sideways_moves_without_looping():
    # two identical activities, two equivalent modes each: every TMC move is sideways
    inst = single_project([([mode(1), mode(1)], []), ([mode(1), mode(1)], [])])
    state = state_for(inst, Genotype((0,) * 4, (0, 1, 2, 3)))
    ctx = SearchContext(inst, SearchConfig())
    assert not explore_neighborhood(ctx, state, TMC, EXHAUST)
    assert state.accepted_moves == 1
    assert state.incumbent.genotype.modes == (0, 1, 1, 0)


# --------------------------------------------------------------------------- perturbation


def test_perturb_single_mode_instance_swaps_sequence():
    inst = independent(3)
    g = Genotype((0,) * 5, (0, 1, 2, 3, 4))
    out = perturb(inst, g, random.Random(1))
    assert out.modes == g.modes
    assert sorted(out.sequence) == list(range(5))
    assert sum(a != b for a, b in zip(out.sequence, g.sequence)) == 2


def test_perturb_single_activity_unchanged():
    inst = single_project([([mode(3)], [])])
    g = Genotype((0, 0, 0), (0, 1, 2))
    assert perturb(inst, g, random.Random(0)) == g


def test_perturb_t1(t1):
    g = Genotype((0, 0, 0, 0, 0), (0, 1, 2, 3, 4))
    a = perturb(t1, g, random.Random(9))
    b = perturb(t1, g, random.Random(9))
    assert a == b
    assert a.sequence == g.sequence
    assert excess(t1, a.modes).total_excess == 0
    for seed in range(100):
        out = perturb(t1, g, random.Random(seed))
        assert out.modes != g.modes
        assert excess(t1, out.modes).total_excess == 0


# --------------------------------------------------------------------------- main loop


def test_run_vns_t1_optimal(t1):
    opt = enumerate_genotypes(t1).evaluation
    res = run_vns(t1, SearchConfig(time_budget=1.0, seed=3))
    assert res.evaluation == opt
    assert res.schedule.finish[t1.sink] == opt.tms


def test_run_vns_single_activity():
    inst = single_project([([mode(4), mode(2)], [])])
    res = run_vns(inst, SearchConfig(time_budget=0.2, seed=0))
    assert res.evaluation.tpd == 0
    assert res.evaluation.tms == 2


def test_run_vns_deterministic_under_candidate_budget():
    inst = tiny_instance(1)
    cfg = SearchConfig(time_budget=60, seed=5, max_candidates=2000)
    runs = [run_vns(inst, cfg) for _ in range(3)]
    assert len({r.genotype for r in runs}) == 1
    assert all(r.state.budget.used == 2000 for r in runs)


def test_seeds_change_initial_modes():
    inst = independent(3, modes_per=3)
    ctx = SearchContext(inst, SearchConfig())
    starts = {new_state(ctx, make_rng(seed, 0), Budget(max_candidates=1)).incumbent.genotype.modes
              for seed in range(10)}
    assert len(starts) > 1


def test_run_vns_invariants_via_monitor():
    inst = tiny_instance(0)
    seen = []

    def monitor(event, state):
        assert state.best_known.evaluation.f <= state.incumbent.evaluation.f or event in ("move", "perturb")
        assert excess(inst, state.incumbent.genotype.modes).total_excess == 0
        assert excess(inst, state.best_known.genotype.modes).total_excess == 0
        seen.append(state.best_known.evaluation.f)

    res = run_vns(inst, SearchConfig(seed=4, max_candidates=20_000), monitor=monitor)
    assert seen == sorted(seen, reverse=True)
    assert res.state.perturbations > 0


def test_best_known_bounds_incumbent_at_operator_boundaries():
    inst = tiny_instance(11)
    res = run_vns(inst, SearchConfig(seed=2, max_candidates=5000))
    st = res.state
    assert st.best_known.evaluation.f <= st.incumbent.evaluation.f
    assert res.evaluation.f == min(st.history)


def test_local_optimum_certificate():
    checked = 0
    for seed in range(6):
        inst = tiny_instance(seed, max_activities=5)
        cfg = SearchConfig(seed=seed, max_candidates=5000)

        def monitor(event, state, inst=inst, cfg=cfg):
            nonlocal checked
            if event == "local_optimum" and state.clean_local_optimum and checked < 40:
                inc = state.incumbent
                assert accepting_neighbors(inst, inc.genotype, inc.evaluation, cfg.evaluation) == []
                checked += 1

        run_vns(inst, cfg, monitor=monitor)
    assert checked > 0


def test_trace_records_moves_and_perturbations(t1):
    buf = io.StringIO()
    run_vns(tiny_instance(0), SearchConfig(seed=1, max_candidates=3000), trace=Trace(buf))
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert rows
    assert set(r["event"] for r in rows) <= {"move", "perturb"}
    assert {"elapsed", "operator", "f", "tpd", "tms"} <= set(rows[0])
    for r in rows:
        assert int(r["f"]) == 100_000 * int(r["tpd"]) + int(r["tms"])


def test_target_stops_early(t1):
    res = run_vns(t1, SearchConfig(time_budget=30, seed=0, target_f=6))
    assert res.evaluation.f == 6
    assert res.state.budget.elapsed() < 5


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(time_budget=0)
    with pytest.raises(ValueError):
        SearchConfig(small_instance_threshold=0)
    with pytest.raises(ValueError):
        SearchConfig(strategy="greedy")


def test_strategy_selection(t1):
    assert SearchConfig().strategy_for(t1) == EXHAUST
    assert SearchConfig(small_instance_threshold=5).strategy_for(t1) == SINGLE_PASS
    assert SearchConfig(small_instance_threshold=6).strategy_for(t1) == EXHAUST
