from __future__ import annotations

import itertools
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from projpart.claims import random_almost_flat, random_nondominated_part
from projpart.partition import (
    AlreadyDominated,
    BadDims,
    EmptyFactor,
    Factor,
    NotAlmostFlat,
    Partition,
    ProductPart,
    TooLarge,
    WrongArity,
    canonicalize,
    construct_plane_partition,
    construct_power_partition,
    dimension_pattern,
    is_canonical,
    is_dominated,
    minimal_patterns,
    partition_around,
    pattern_leq,
    phi_profile,
    power_partition_size,
    product_minus_products_split,
    refine_to_minimal,
    singleton_partition,
    split_factor,
    square_parts,
    verify,
    volume_lower_bound,
)
from projpart.projgeom import bits, get_space


def tuples_of(part: ProductPart) -> set:
    return set(itertools.product(*(f.points() for f in part.factors)))


@pytest.mark.parametrize("q,size", [(2, 21), (3, 52), (4, 105), (5, 186)])
def test_plane_construction(q, size):
    P = construct_plane_partition(q)
    assert P.size == size == (q * q + q + 1) * (q + 1)
    rep = verify(P)
    assert rep.passed and rep.mode == "exhaustive"


@pytest.mark.parametrize("q,n,k,size", [(2, 2, 2, 21), (3, 2, 2, 52), (2, 3, 3, 315), (2, 3, 2, 105), (3, 3, 2, 520), (2, 4, 3, 3255)])
def test_power_construction(q, n, k, size):
    P = construct_power_partition(q, n, k)
    assert P.size == size == power_partition_size(q, n, k)
    assert verify(P).passed


def test_power_size_formula():
    assert power_partition_size(3, 3, 3) == 2080
    assert power_partition_size(8, 3, 3) == 384345
    assert 384345 <= 8**6 * (1 + 6 / 8) == 458752
    with pytest.raises(BadDims):
        construct_power_partition(2, 2, 3)
    with pytest.raises(TooLarge):
        construct_power_partition(13, 4, 4)


def test_partition_around():
    S = get_space(3, 3)
    for F in S.flats(1)[:5]:
        pieces = partition_around(F, 2)
        assert len(pieces) == 4  # planes through a line of P^3: the points of the quotient line
        union = 0
        for f in pieces:
            assert f.mask & union == 0
            union |= f.mask
        assert union == S.full_mask
        assert sum(1 for f in pieces if not f.holes) == 1
    with pytest.raises(BadDims):
        partition_around(S.flats(1)[0], 3)


def test_singleton_partition_verifies():
    P = singleton_partition(2, 2, 2)
    assert P.size == 49 and verify(P).passed


def test_verify_detects_overlap_gap_and_witness():
    P = construct_plane_partition(2)
    dup = Partition(2, 2, 2, P.parts + [P.parts[0]])
    rep = verify(dup)
    assert not rep.disjoint and not rep.covering
    gap = Partition(2, 2, 2, P.parts[1:])
    rep = verify(gap)
    assert rep.disjoint and not rep.covering and not rep.passed
    S = P.space
    bad = P.parts[:]
    p0 = bad[0]
    other = next(L for L in S.flats(1) if L.mask != p0.witness.mask)
    bad[0] = ProductPart(p0.factors, other)
    rep = verify(Partition(2, 2, 2, bad))
    assert not rep.witnessed and rep.disjoint and rep.covering


def test_verify_overlap_late_pair():
    # overlap between two parts that are far apart in the list
    P = construct_plane_partition(3)
    parts = P.parts[:-1] + [P.parts[5]]
    rep = verify(Partition(3, 2, 2, parts))
    assert not rep.disjoint
    assert "overlap" in " ".join(rep.violations)


def test_partition_json_roundtrip():
    P = construct_power_partition(2, 3, 2)
    data = json.loads(json.dumps(P.to_dict()))
    assert set(data) == {"q", "n", "k", "parts"}
    assert set(data["parts"][0]) == {"factors", "witness"}
    assert set(data["parts"][0]["factors"][0]) == {"base", "holes"}
    Q = Partition.from_dict(data)
    assert [p.masks for p in Q.parts] == [p.masks for p in P.parts]
    assert verify(Q).passed


def test_summary_csv():
    lines = construct_plane_partition(2).summary_csv().splitlines()
    assert lines[0] == "part,pattern,size"
    assert len(lines) == 22
    assert lines[1].split(",")[1] in ("0 0", "0 1")


def test_factor_basics():
    S = get_space(2, 2)
    L = S.flats(1)[0]
    p = next(bits(L.mask))
    f = Factor(L, (S.point_flat(p),))
    assert f.size == 2 and f.dim == 1 and not f.is_flat and f.is_almost_flat
    with pytest.raises(EmptyFactor):
        Factor(S.point_flat(p), (S.point_flat(p),))
    g = Factor.from_mask(S, f.mask)
    assert g == f
    # three points in general position: span is the plane, missing a 4-set that is no flat
    h = Factor.from_mask(S, 0b0001011)
    assert h.mask == 0b0001011 and not h.is_almost_flat


def test_factor_serialization():
    S = get_space(3, 2)
    f = Factor(S.whole, (S.flats(1)[4],))
    assert Factor.from_dict(S, f.to_dict()) == f


def test_patterns():
    assert dimension_pattern([Factor(get_space(2, 2).whole), Factor(get_space(2, 2).point_flat(0))]) == (0, 2)
    assert pattern_leq((0, 1), (0, 1)) and not pattern_leq((0, 2), (0, 1))
    assert is_dominated((0, 1, 2)) and is_dominated((0, 0, 1))
    assert not is_dominated((1, 1, 1)) and not is_dominated((0, 2, 2))
    assert minimal_patterns(3) == [(1, 1, 1), (0, 2, 2)]
    assert minimal_patterns(4) == [(1, 1, 1, 1), (0, 2, 2, 2), (0, 0, 3, 3)]


def test_volume_lower_bound():
    assert volume_lower_bound(2, 2, 2) == 6  # ceil(49 / 9)
    assert volume_lower_bound(3, 3, 3) == 30  # ceil(64000 / 2197)


@pytest.mark.parametrize("q,canon,phi", [(2, 28, 21), (3, 65, 52), (4, 126, 105)])
def test_canonicalize_and_phi(q, canon, phi):
    C = canonicalize(construct_plane_partition(q))
    assert C.size == canon
    assert all(is_canonical(p) for p in C.parts)
    assert verify(C).passed
    prof = phi_profile(square_parts(C), q)
    assert prof.total == phi and prof.bound == q * (q * q + q + 1)
    assert prof.holds


def test_canonicalize_needs_k2():
    with pytest.raises(WrongArity):
        canonicalize(construct_power_partition(2, 3, 3))


def _check_split(f: Factor, pieces: list[Factor], target: int):
    union = 0
    for g in pieces:
        assert g.mask & union == 0
        union |= g.mask
        assert g.is_almost_flat
        assert g.dim == target
    assert union == f.mask


@settings(max_examples=80, deadline=None)
@given(st.sampled_from([(2, 3), (3, 3), (3, 2), (4, 2)]), st.integers(0, 10**6), st.data())
def test_split_factor_partitions(qn, seed, data):
    q, n = qn
    S = get_space(q, n)
    rng = random.Random(seed)
    d = rng.randint(1, n)
    f = random_almost_flat(S, d, rng)
    target = data.draw(st.integers(1, f.dim)) if f.dim >= 1 else None
    if target is None:
        return
    _check_split(f, split_factor(f, target), target)


def test_split_factor_errors():
    S = get_space(2, 2)
    with pytest.raises(BadDims):
        split_factor(Factor(S.whole), 3)
    with pytest.raises(NotAlmostFlat):
        split_factor(Factor.from_mask(S, 0b0001011), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_refine_to_minimal(seed):
    S = get_space(3, 2)
    part = random_nondominated_part(S, random.Random(seed))
    pieces = refine_to_minimal(part)
    minimal = set(minimal_patterns(3))
    seen = set()
    for p in pieces:
        assert tuple(sorted(p.pattern)) in minimal
        t = tuples_of(p)
        assert not t & seen
        seen |= t
    assert seen == tuples_of(part)


def test_refine_rejects_dominated():
    S = get_space(3, 2)
    part = ProductPart((Factor(S.point_flat(0)), Factor(S.flats(1)[0]), Factor(S.whole)))
    with pytest.raises(AlreadyDominated):
        refine_to_minimal(part)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 3))
def test_product_minus_products(seed, h):
    rng = random.Random(seed)
    S = get_space(2, 2)
    n = 3
    base = ProductPart(tuple(Factor(S.whole) for _ in range(n)))
    removed = []
    for _ in range(h):
        removed.append(ProductPart(tuple(Factor.from_mask(S, rng.randrange(1, 1 << S.size)) for _ in range(n))))
    pieces = product_minus_products_split(base, removed)
    assert len(pieces) <= n**h
    want = tuples_of(base)
    for r in removed:
        want -= tuples_of(r)
    got = set()
    for p in pieces:
        t = tuples_of(p)
        assert not t & got
        got |= t
    assert got == want
