from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from projpart.claims import random_almost_flat, random_surgery_part
from projpart.dependence import (
    AlreadyDominated,
    DependenceError,
    LineFamily,
    NotGeneralPosition,
    QTooSmall,
    TooLarge,
    TooLargeForExact,
    _edge_rank,
    almost_lines,
    almostflat_bound,
    almostflat_fraction_check,
    biclique_search,
    count_dependent,
    count_dependent_naive,
    fraction_bounds,
    is_general_position,
    is_union_of_classes,
    lines_bound,
    lines_bound_sweep,
    min_biclique_partition,
    surgery_reduce,
    sylvester_line,
    sylvester_sweep,
    verify_lines_bound,
)
from projpart.partition import Factor, ProductPart
from projpart.projgeom import bits, get_space


def test_pairs_in_plane():
    S = get_space(2, 2)
    c = count_dependent(S, [S.whole, S.whole])
    assert (c.dependent, c.total) == (7, 49)
    assert c.fraction == Fraction(1, 7) == fraction_bounds(2, 2)[0]
    assert c.to_dict() == {"count": 7, "total": 49, "mode": "exhaustive", "samples": 0, "seed": None}


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_identical_full_lines(q):
    S = get_space(q, 1)
    assert count_dependent(S, [S.whole, S.whole]).dependent == q + 1


@pytest.mark.parametrize("q,n,frac", [(2, 2, Fraction(1, 7)), (3, 2, Fraction(1, 13)), (2, 3, Fraction(19, 75)), (3, 3, Fraction(49, 400))])
def test_full_space_fractions(q, n, frac):
    S = get_space(q, n)
    c = count_dependent(S, [S.whole] * n)
    lo, hi = fraction_bounds(q, n)
    assert c.fraction == frac
    assert lo <= c.fraction <= hi


def test_naive_agrees_on_full_space():
    S = get_space(2, 3)
    assert count_dependent_naive(S, [S.whole] * 3) == (855, 3375)


def test_sharded_count_matches_serial():
    S = get_space(3, 3)
    masks = [S.whole.mask] * 3
    assert count_dependent(S, masks, workers=3).dependent == count_dependent(S, masks, workers=1).dependent == 7840


def test_sampling_and_limit():
    S = get_space(3, 3)
    with pytest.raises(TooLargeForExact):
        count_dependent(S, [S.whole] * 3, exact_limit=100)
    c = count_dependent(S, [S.whole] * 3, exact_limit=100, sample_size=2000, seed=7)
    assert c.mode == "sampled" and c.total == 2000 and c.seed == 7
    again = count_dependent(S, [S.whole] * 3, exact_limit=100, sample_size=2000, seed=7)
    assert again.dependent == c.dependent
    assert abs(float(c.fraction) - 49 / 400) < 0.05


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([(2, 2), (3, 2), (2, 3), (4, 1)]), st.integers(1, 4), st.data())
def test_against_naive(qn, k, data):
    q, n = qn
    S = get_space(q, n)
    masks = [data.draw(st.integers(1, S.full_mask)) for _ in range(k)]
    total = 1
    for m in masks:
        total *= bin(m).count("1")
    if total > 10**5:
        return
    c = count_dependent(S, masks)
    assert (c.dependent, c.total) == count_dependent_naive(S, masks)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2**13 - 1), st.integers(1, 2**13 - 1), st.integers(0, 12))
def test_monotone_under_adding_points(a, b, p):
    S = get_space(3, 2)
    base = count_dependent(S, [a, b]).dependent
    assert count_dependent(S, [a | 1 << p, b]).dependent >= base
    assert count_dependent(S, [a, b | 1 << p]).dependent >= base


# general position and the Sylvester-type lemma


def test_general_position_examples():
    S2 = get_space(2, 2)
    L = S2.flats(1)
    assert not is_general_position([L[0], L[0]])
    assert all(is_general_position(list(c)) for c in itertools.combinations(L, 3))
    S3 = get_space(2, 3)
    plane = S3.flats(2)[0]
    inside = [M for M in S3.flats(1) if M.issubset(plane)][:3]
    assert len(inside) == 3 and not is_general_position(inside)


def test_sylvester_examples():
    S = get_space(2, 2)
    L = S.flats(1)
    r = sylvester_line([L[0]])
    assert r.line is L[0] and not r.points
    r = sylvester_line(L[:3])
    assert len(r.points) <= 2
    with pytest.raises(NotGeneralPosition):
        sylvester_line([L[0], L[0]])


def test_sylvester_chain_invariant():
    S = get_space(2, 3)
    rng = random.Random(3)
    lines = S.flats(1)
    checked = 0
    while checked < 200:
        fam = rng.sample(lines, 4)
        if not is_general_position(fam):
            continue
        checked += 1
        res = sylvester_line(fam)
        assert len(res.points) <= 2
        for chain in res.chains:
            for i in range(1, len(chain) + 1):
                # the ambient dimension caps the span once the chain has n+1 lines
                assert S.span([fam[j] for j in chain[:i]]).dim == min(i, S.n)


def test_sylvester_sweep_plane():
    r = sylvester_sweep(2, 2)
    assert r.families == 63  # 7 + 21 + 35 sets of distinct lines
    assert r.holds and r.max_points == 2


# almost-lines


def test_almost_line_catalog():
    assert len(almost_lines(get_space(3, 1))) == 5
    assert len(almost_lines(get_space(3, 2))) == 13 * 5


def test_lines_bound_examples():
    S = get_space(3, 1)
    rep = verify_lines_bound(LineFamily((Factor(S.whole), Factor(S.whole))))
    assert rep.count == 4 and rep.bound == 2 and rep.holds
    S4 = get_space(4, 1)
    fam = LineFamily((Factor(S4.whole, (S4.point_flat(0),)), Factor(S4.whole, (S4.point_flat(1),))))
    rep = verify_lines_bound(fam)
    assert rep.count == 3 == lines_bound(4, 1)


def test_lines_bound_errors():
    S = get_space(2, 1)
    with pytest.raises(QTooSmall):
        verify_lines_bound(LineFamily((Factor(S.whole), Factor(S.whole))))
    S3 = get_space(3, 2)
    with pytest.raises(DependenceError):
        LineFamily((Factor(S3.whole),))
    with pytest.raises(DependenceError):
        verify_lines_bound(LineFamily((Factor(S3.flats(1)[0]),)))


def test_lines_sweep_n1_tight():
    r = lines_bound_sweep(3, 1)
    assert r.families == 25
    assert r.min_count == r.bound == 2


# surgery


def test_surgery_k0_unchanged():
    S = get_space(3, 2)
    part = ProductPart(tuple(Factor(S.flats(1)[i]) for i in range(3)))
    r = surgery_reduce(part)
    assert r.part is part and r.after == r.before and r.S.dim == -1


def test_surgery_flat_case():
    S = get_space(3, 2)
    p = 0
    planes = [Factor(S.whole), Factor(S.whole)]
    part = ProductPart((Factor(S.point_flat(p)), *planes))
    r = surgery_reduce(part)
    assert r.choices == ["flat", "flat"]
    for f in r.part.factors[1:]:
        assert f.mask == S.whole.mask & ~(1 << p)
    assert r.after <= r.before


def test_surgery_dependent_prefix():
    S = get_space(3, 3)
    part = ProductPart((Factor(S.point_flat(0)), Factor(S.point_flat(0)), Factor(S.whole), Factor(S.whole)))
    r = surgery_reduce(part)
    assert r.dependent_prefix and r.after == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_surgery_never_increases_and_gives_classes(seed):
    S = get_space(3, 3)
    part = random_surgery_part(S, random.Random(seed))
    r = surgery_reduce(part)
    assert r.after <= r.before
    if not r.dependent_prefix:
        for f_old, f_new in zip(part.factors, r.part.factors):
            if f_old.size > 1:
                G = S.flat_from_mask(f_old.mask)
                assert is_union_of_classes(S, r.S, G, f_new.mask)


# almost-flat fraction


def test_almostflat_two_almost_lines():
    S = get_space(3, 1)
    part = ProductPart((Factor(S.whole), Factor(S.whole, (S.point_flat(0),))))
    rep = almostflat_fraction_check(part)
    assert rep.bound == Fraction(1, 16) == almostflat_bound(3, 2)
    assert rep.direct == Fraction(1, 4) and rep.holds


def test_almostflat_dependent_prefix_is_one():
    S = get_space(3, 3)
    part = ProductPart((Factor(S.point_flat(0)), Factor(S.point_flat(0)), Factor(S.whole), Factor(S.whole)))
    rep = almostflat_fraction_check(part)
    assert rep.direct == 1 and rep.pipeline == 1


def test_almostflat_errors():
    S = get_space(3, 2)
    with pytest.raises(AlreadyDominated):
        almostflat_fraction_check(ProductPart((Factor(S.point_flat(0)), Factor(S.flats(1)[0]), Factor(S.whole))))
    S2 = get_space(2, 2)
    with pytest.raises(QTooSmall):
        almostflat_fraction_check(ProductPart((Factor(S2.whole),) * 3))


def test_random_almost_flat_shapes():
    S = get_space(3, 3)
    rng = random.Random(0)
    for _ in range(100):
        d = rng.randint(0, 3)
        f = random_almost_flat(S, d, rng)
        assert f.is_almost_flat and f.dim == d


# Graham-Pollak


@pytest.mark.parametrize("n", [2, 3, 4])
def test_gp_without_rank_bound(n):
    assert min_biclique_partition(n, use_rank_bound=False) == n


def test_gp_cover_is_partition():
    m, cover = biclique_search(4)
    assert m == 4 and len(cover) == 4
    union = 0
    for c in cover:
        assert c & union == 0
        union |= c
    assert bin(union).count("1") == 4 * 3
    assert _edge_rank(union, 4) == 4


def test_gp_limit():
    with pytest.raises(TooLarge):
        min_biclique_partition(6)
