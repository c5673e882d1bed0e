from __future__ import annotations

import itertools
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from projpart.dspan import (
    BadQueryDim,
    DecisionTrace,
    DspanError,
    InconsistentTrace,
    Instance,
    OracleAnswer,
    TooLarge,
    bench,
    bench_csv,
    consistent_instances,
    induced_part,
    leaf_partition,
    oracle,
    query_bound,
    solve,
    solve_instance,
    structured_lower_bound,
)
from projpart.projgeom import get_space


def ceiling(q: int, n: int) -> int:
    return n * (n + 1) * (q + 1) + n


def test_oracle_examples():
    S = get_space(2, 2)
    x = S.flats(1)[0]
    inside = list(x.points())
    assert oracle(Instance(S, (inside[0], inside[1])), x).yes
    out = next(p for p in range(S.size) if p not in inside)
    assert oracle(Instance(S, (out, inside[0])), x) == OracleAnswer(1)
    assert oracle(Instance(S, (out, out)), x).index == 1
    assert oracle(Instance(S, (inside[0], out)), x).index == 2
    with pytest.raises(BadQueryDim):
        oracle(Instance(S, (0, 1)), S.whole)


def test_oracle_line_through_two_points():
    S = get_space(2, 2)
    for a, b in itertools.combinations(range(S.size), 2):
        L = S.span([a, b])
        assert oracle(Instance(S, (a, b)), L).yes


def test_answer_json():
    assert OracleAnswer().to_json() == "YES"
    assert OracleAnswer(2).to_json() == {"NO": 2}
    for a in (OracleAnswer(), OracleAnswer(3)):
        assert OracleAnswer.from_json(json.loads(json.dumps(a.to_json()))) == a


@pytest.mark.parametrize("q,n", [(2, 2), (2, 3), (3, 2)])
def test_solver_exhaustive(q, n):
    S = get_space(q, n)
    worst = 0
    for pts in itertools.product(range(S.size), repeat=n):
        out, tr = solve_instance(Instance(S, pts))
        assert out.dim == n - 1
        assert all(out.mask >> p & 1 for p in pts)
        assert tr.queries[-1][1].yes and tr.queries[-1][0] is out
        worst = max(worst, len(tr.queries))
    assert worst <= query_bound(q, n) <= ceiling(q, n)


@pytest.mark.parametrize("q,n", [(3, 3), (4, 3), (5, 3), (3, 4), (7, 2)])
def test_solver_random(q, n):
    S = get_space(q, n)
    rng = random.Random(q * 100 + n)
    for _ in range(2000):
        pts = tuple(rng.randrange(S.size) for _ in range(n))
        out, tr = solve_instance(Instance(S, pts))
        assert all(out.mask >> p & 1 for p in pts)
        assert len(tr.queries) <= query_bound(q, n)


def test_all_equal_points():
    S = get_space(3, 3)
    for p in range(S.size):
        out, tr = solve_instance(Instance(S, (p, p, p)))
        assert out.mask >> p & 1 and tr.queries[-1][1].yes


def test_too_many_points():
    S = get_space(2, 2)
    with pytest.raises(DspanError):
        solve(S, lambda x: OracleAnswer(), npoints=3)


def test_lying_oracle_detected():
    S = get_space(2, 2)
    with pytest.raises(InconsistentTrace):
        solve(S, lambda x: OracleAnswer(1))


def test_induced_part_rules():
    S = get_space(2, 2)
    empty = DecisionTrace(S)
    assert all(f.mask == S.full_mask for f in induced_part(empty))
    x = S.flats(1)[2]
    yes = DecisionTrace(S, [(x, OracleAnswer())])
    assert all(f.mask == x.mask for f in induced_part(yes))
    no2 = DecisionTrace(S, [(x, OracleAnswer(2))])
    f1, f2 = induced_part(no2)
    assert f1.mask == x.mask and f2.mask == S.full_mask & ~x.mask
    contra = DecisionTrace(S, [(x, OracleAnswer()), (x, OracleAnswer(1))])
    with pytest.raises(InconsistentTrace):
        induced_part(contra)


def test_induced_part_matches_brute_force_at_every_leaf():
    S = get_space(2, 2)
    seen = {}
    for pts in itertools.product(range(S.size), repeat=2):
        _, tr = solve_instance(Instance(S, pts))
        seen.setdefault(tr.key(), tr)
    for tr in seen.values():
        factors = induced_part(tr)
        want = consistent_instances(tr)
        got = set(itertools.product(*(f.points() for f in factors)))
        assert got == want


def test_trace_json_roundtrip():
    S = get_space(3, 2)
    _, tr = solve_instance(Instance(S, (4, 9)))
    data = json.loads(json.dumps(tr.to_dict()))
    assert set(data) == {"queries", "output"}
    back = DecisionTrace.from_dict(S, data)
    assert back.key() == tr.key() and back.output is tr.output


@pytest.mark.parametrize("q,n,parts,maxq", [(2, 2, 28, 6), (2, 3, 540, 11)])
def test_leaf_partition(q, n, parts, maxq):
    rep = leaf_partition(q, n)
    assert rep.instances == get_space(q, n).size ** n
    assert rep.partition.size == parts == len(rep.traces)
    assert rep.max_queries == maxq <= query_bound(q, n)
    assert rep.valid and rep.max_holes_ok
    for part, tr in zip(rep.partition.parts, rep.traces):
        assert part.witness is tr.output
        for f in part.factors:
            assert len(f.holes) <= len(tr.queries)


def test_leaf_partition_limit():
    with pytest.raises(TooLarge):
        leaf_partition(3, 4)


def test_structured_lower_bound():
    assert structured_lower_bound(2, 2) is None
    assert structured_lower_bound(5, 3) == 5**6 * (1 - Fraction(1, 5) * Fraction(6, 3) ** 3) == -9375
    assert structured_lower_bound(64, 2) == 64**3 * (1 - Fraction(1, 64) * Fraction(65, 62) ** 2)
    assert structured_lower_bound(64, 2) > 0


def test_bench_scaling():
    rows = bench([(2, 3), (3, 3), (5, 3), (3, 4)], samples=300, seed=1)
    ratios = [r.mean_queries / (r.q * r.n * r.n) for r in rows]
    assert max(ratios) / min(ratios) <= 2
    assert all(r.max_queries <= r.bound for r in rows)
    csv = bench_csv(rows).splitlines()
    assert csv[0] == "q,n,mean_queries,max_queries,bound"
    assert len(csv) == 5
    assert bench([(3, 3)], samples=50, seed=9)[0].mean_queries == bench([(3, 3)], samples=50, seed=9)[0].mean_queries


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([(2, 2), (3, 3), (4, 2), (2, 4)]), st.data())
def test_oracle_determinism_and_soundness(qn, data):
    q, n = qn
    S = get_space(q, n)
    pts = tuple(data.draw(st.integers(0, S.size - 1)) for _ in range(n))
    inst = Instance(S, pts)
    out1, tr1 = solve_instance(inst)
    out2, tr2 = solve_instance(inst)
    assert out1 is out2 and tr1.key() == tr2.key()
    x = data.draw(st.sampled_from(S.flats(n - 1)))
    assert oracle(inst, x) == oracle(inst, x)
