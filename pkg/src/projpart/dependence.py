"""Counting dependent tuples in products of point sets, and the finite checks
built on top of it: general position, the Sylvester-Gallai type line chain,
the almost-line count bound, the quotient surgery, the almost-flat fraction
pipeline, and the biclique partition minimum.
"""

from __future__ import annotations

import itertools
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .partition import (
    AlreadyDominated,
    BadDims,
    Factor,
    ProductPart,
    is_dominated,
    refine_to_minimal,
    split_factor,
)
from .projgeom import Flat, Space, bits, get_space, popcount


class DependenceError(ValueError):
    pass


class TooLargeForExact(DependenceError):
    pass


class NotGeneralPosition(DependenceError):
    pass


class QTooSmall(DependenceError):
    pass


class TooLarge(DependenceError):
    pass


EXACT_LIMIT = 10**9


@dataclass
class DependentCount:
    dependent: int
    total: int
    mode: str = "exhaustive"
    samples: int = 0
    seed: int | None = None

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.dependent, self.total) if self.total else Fraction(0)

    def to_dict(self) -> dict:
        return {"count": self.dependent, "total": self.total, "mode": self.mode, "samples": self.samples, "seed": self.seed}


def _as_masks(factors) -> list[int]:
    return [f.mask if isinstance(f, (Factor, Flat)) else int(f) for f in factors]


def _count_exact(space: Space, masks: Sequence[int]) -> int:
    k = len(masks)
    rest = [1] * (k + 1)
    for i in range(k - 1, -1, -1):
        rest[i] = rest[i + 1] * popcount(masks[i])
    memo: dict[tuple[int, int], int] = {}

    # prefix of length i is independent with span S; points of the next factor
    # are grouped by their class modulo S since the new span depends only on it
    def walk(i: int, S: Flat) -> int:
        key = (i, S.mask)
        if key in memo:
            return memo[key]
        A = masks[i]
        dep = popcount(A & S.mask) * rest[i + 1]
        if i < k - 1:
            outside = A & ~S.mask
            while outside:
                p = (outside & -outside).bit_length() - 1
                G = space.extend(S, p)
                cls = G.mask & ~S.mask
                dep += popcount(outside & cls) * walk(i + 1, G)
                outside &= ~cls
        memo[key] = dep
        return dep

    return walk(0, space.empty) if k else 0


def _count_shard(q: int, n: int, masks: tuple[int, ...], first: int) -> int:
    return _count_exact(get_space(q, n), (first,) + tuple(masks[1:]))


def count_dependent(
    space: Space,
    factors: Sequence,
    *,
    sample_size: int | None = None,
    seed: int = 0,
    workers: int | None = None,
    exact_limit: int = EXACT_LIMIT,
) -> DependentCount:
    """Number of dependent tuples in the product of the given point sets.

    Exact above ``exact_limit`` tuples only if ``sample_size`` is given, in
    which case uniformly sampled tuples are counted instead.  ``workers`` > 1
    shards the exact count by the points of the first factor.
    """
    masks = _as_masks(factors)
    total = math.prod(popcount(m) for m in masks)
    if total > exact_limit:
        if sample_size is None:
            raise TooLargeForExact(f"{total} tuples exceeds the exact limit {exact_limit}")
        rng = random.Random(seed)
        pts = [list(bits(m)) for m in masks]
        hits = sum(space.is_dependent([rng.choice(p) for p in pts]) for _ in range(sample_size))
        return DependentCount(hits, sample_size, "sampled", sample_size, seed)
    workers = workers or int(os.environ.get("PROJPART_WORKERS", "1"))
    if workers > 1 and masks and popcount(masks[0]) > 1:
        firsts = [1 << p for p in bits(masks[0])]
        shards = [0] * workers
        for i, f in enumerate(firsts):
            shards[i % workers] |= f
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_count_shard, space.q, space.n, tuple(masks), s) for s in shards if s]
            dep = sum(f.result() for f in futs)
    else:
        dep = _count_exact(space, masks)
    return DependentCount(dep, total)


def count_dependent_naive(space: Space, factors: Sequence) -> tuple[int, int]:
    """Reference counter: a tuple is dependent iff some nonzero coefficient
    vector combines its coordinate vectors to zero."""
    masks = _as_masks(factors)
    F = space.field
    q, width = space.q, space.n + 1
    k = len(masks)
    coefs = [c for c in itertools.product(range(q), repeat=k) if any(c)]
    dep = total = 0
    for tup in itertools.product(*(list(bits(m)) for m in masks)):
        total += 1
        vecs = [space.points[p] for p in tup]
        for c in coefs:
            acc = [0] * width
            for ci, v in zip(c, vecs):
                if ci:
                    acc = [F.add[a][F.mul[ci][b]] for a, b in zip(acc, v)]
            if not any(acc):
                dep += 1
                break
    return dep, total


def fraction_bounds(q: int, n: int) -> tuple[Fraction, Fraction]:
    """Lower and upper bounds on the dependent fraction of (F_q P^n)^n."""
    return Fraction(q ** (n - 1) - 1, q ** (n + 1) - 1), Fraction(1, q * (q - 1))


# lines in general position


def is_general_position(lines: Sequence[Flat]) -> bool:
    """No k+1 of the lines lie in a k-flat, for every 1 <= k <= n-1."""
    if not lines:
        return True
    space = lines[0].space
    if any(L.dim != 1 or L.space is not space for L in lines):
        raise DependenceError("general position is defined for lines of one space")
    for k in range(1, space.n):
        for sub in itertools.combinations(lines, k + 1):
            if space.span(sub).dim <= k:
                return False
    return True


@dataclass
class SylvesterResult:
    line: Flat
    points: frozenset[int]
    chains: list[list[int]] = field(default_factory=list)


def sylvester_line(lines: Sequence[Flat]) -> SylvesterResult:
    """A line of a general-position family meeting the others in <= 2 points.

    Builds the chain l1, l2, ... where each new line is the least-index line
    meeting one already chosen.  If the chain stalls before using every line
    the search recurses into the chain; otherwise the last line is returned.
    """
    lines = list(lines)
    if not lines:
        raise DependenceError("empty family")
    if not is_general_position(lines):
        raise NotGeneralPosition("family is not in general position")
    chains: list[list[int]] = []
    idx = list(range(len(lines)))
    while True:
        chain = [idx[0]]
        used = chain[0]
        rest = idx[1:]
        while rest:
            nxt = next((j for j in rest if any(lines[j].mask & lines[c].mask for c in chain)), None)
            if nxt is None:
                break
            chain.append(nxt)
            rest.remove(nxt)
        chains.append(chain)
        if not rest:
            used = chain[-1]
            break
        idx = chain
    line = lines[used]
    pts = set()
    for j, L in enumerate(lines):
        if j != used:
            pts.update(bits(L.mask & line.mask))
    return SylvesterResult(line, frozenset(pts), chains)


@dataclass
class SylvesterSweep:
    families: int
    max_points: int
    violations: list

    @property
    def holds(self) -> bool:
        return not self.violations


def sylvester_sweep(q: int, n: int) -> SylvesterSweep:
    """Run sylvester_line on every general-position set of at most n+1
    distinct lines of F_q P^n (lines taken in index order)."""
    space = get_space(q, n)
    lines = space.flats(1)
    seen, worst, bad = 0, 0, []
    for r in range(1, n + 2):
        for fam in itertools.combinations(lines, r):
            if not is_general_position(fam):
                continue
            seen += 1
            res = sylvester_line(fam)
            worst = max(worst, len(res.points))
            if len(res.points) > 2 and len(bad) < 10:
                bad.append([sorted(bits(L.mask)) for L in fam])
    return SylvesterSweep(seen, worst, bad)


# almost-lines


@dataclass
class LineFamily:
    lines: tuple[Factor, ...]

    def __post_init__(self):
        for f in self.lines:
            if f.base.dim != 1 or f.size < f.space.q:
                raise DependenceError(f"{f!r} is not an almost-line")

    @property
    def space(self) -> Space:
        return self.lines[0].space


def almost_lines(space: Space) -> list[int]:
    """Masks of every line and every line minus one point."""
    out = []
    for L in space.flats(1):
        out.append(L.mask)
        out.extend(L.mask & ~(1 << p) for p in bits(L.mask))
    return out


def lines_bound(q: int, n: int) -> int:
    return (q - 2) ** (n - 1) * (q - 1)


@dataclass
class LinesBoundReport:
    count: int
    total: int
    bound: int

    @property
    def holds(self) -> bool:
        return self.count >= self.bound


def verify_lines_bound(fam: LineFamily) -> LinesBoundReport:
    space = fam.space
    if space.q < 3:
        raise QTooSmall("the almost-line bound needs q >= 3")
    if len(fam.lines) != space.n + 1:
        raise DependenceError(f"need {space.n + 1} almost-lines in F_q P^{space.n}")
    c = count_dependent(space, fam.lines)
    return LinesBoundReport(c.dependent, c.total, lines_bound(space.q, space.n))


@dataclass
class LinesSweep:
    families: int
    min_count: int
    argmin: tuple[int, ...]
    bound: int

    @property
    def holds(self) -> bool:
        return self.min_count >= self.bound


def lines_bound_sweep(q: int, n: int) -> LinesSweep:
    """Exhaustive minimum of the dependent count over all ordered families of
    n+1 almost-lines in F_q P^n."""
    if q < 3:
        raise QTooSmall("the almost-line bound needs q >= 3")
    space = get_space(q, n)
    al = almost_lines(space)
    best, arg, seen = None, (), 0
    for fam in itertools.product(al, repeat=n + 1):
        seen += 1
        c = _count_exact(space, fam)
        if best is None or c < best:
            best, arg = c, fam
    return LinesSweep(seen, best, arg, lines_bound(q, n))


# quotient surgery


@dataclass
class SurgeryResult:
    part: ProductPart
    S: Flat
    before: Fraction
    after: Fraction
    dependent_prefix: bool = False
    choices: list[str] = field(default_factory=list)


def _fraction(space: Space, masks: Sequence[int]) -> Fraction:
    return count_dependent(space, masks).fraction


def _split_slots(part: ProductPart) -> tuple[list[int], list[int]]:
    pts = [i for i, f in enumerate(part.factors) if f.size == 1]
    rs = [i for i, f in enumerate(part.factors) if f.size > 1]
    return pts, rs


def surgery_reduce(part: ProductPart) -> SurgeryResult:
    """Replace each almost-flat R_i of p_1 x .. x p_k x R_{k+1} x .. x R_n by a
    union of classes modulo S = span(p_1..p_k) without raising the dependent
    fraction.

    Flats lose S.  For R_i = F_i - F'_i the candidates are F_i - S
    ("complete") and F_i - S minus the classes meeting F'_i ("remove"); the one
    with the smaller current fraction wins.  Ties go to "remove"; an empty
    "remove" falls back to "complete".
    """
    space = part.space
    pts, rs = _split_slots(part)
    k = len(pts)
    masks = list(part.masks)
    before = _fraction(space, masks)
    S = space.span_points([part.factors[i].points()[0] for i in pts])
    if S.dim < k - 1:
        return SurgeryResult(part, S, before, Fraction(1), True, [])
    for i in rs:
        if part.factors[i].dim != k + 1:
            raise BadDims(f"factor {i} has dimension {part.factors[i].dim}, expected {k + 1}")
    if k == 0:
        return SurgeryResult(part, S, before, before, False, ["unchanged"] * len(rs))
    quot = space.quotient(S)
    choices = []
    for i in rs:
        af = part.factors[i].almost_flat()
        if af is None:
            raise DependenceError(f"factor {i} is not an almost-flat")
        G, H = af
        complete = G.mask & ~S.mask
        if H is None:
            masks[i] = complete
            choices.append("flat")
            continue
        remove = complete & ~quot.restrict(H, G)
        if not remove:
            masks[i] = complete
            choices.append("complete")
            continue
        f_remove = _fraction(space, masks[:i] + [remove] + masks[i + 1 :])
        f_complete = _fraction(space, masks[:i] + [complete] + masks[i + 1 :])
        if f_remove <= f_complete:
            masks[i] = remove
            choices.append("remove")
        else:
            masks[i] = complete
            choices.append("complete")
    out = ProductPart(tuple(Factor.from_mask(space, m) for m in masks), part.witness)
    return SurgeryResult(out, S, before, _fraction(space, masks), False, choices)


def is_union_of_classes(space: Space, S: Flat, container: Flat, mask: int) -> bool:
    """Every class of container/S meeting ``mask`` lies inside it."""
    for p in bits(mask):
        cls = space.extend(S, p).mask & container.mask & ~S.mask
        if cls & ~mask:
            return False
    return True


# almost-flat fraction pipeline


def almostflat_bound(q: int, n: int) -> Fraction:
    return Fraction(1, q + 1) * Fraction(q - 2, q + 1) ** (n - 1)


@dataclass
class AlmostFlatReport:
    direct: Fraction
    pipeline: Fraction
    bound: Fraction
    pieces: int
    quotient_matches: bool

    @property
    def holds(self) -> bool:
        return self.direct >= self.bound and self.pipeline >= self.bound


def almostflat_fraction_check(part: ProductPart) -> AlmostFlatReport:
    """Direct and reduction-pipeline lower estimates of the dependent fraction
    of a non-dominated product of n almost-flats in F_q P^{n-1}.

    The pipeline refines to minimal patterns, applies the surgery, passes to
    the quotient by the span of the point prefix, splits every quotient
    factor into almost-lines and takes the least fraction over all pieces.
    """
    space = part.space
    q, n = space.q, len(part.factors)
    if q < 3:
        raise QTooSmall("the almost-flat bound needs q >= 3")
    if space.n != n - 1:
        raise DependenceError(f"{n} factors must live in F_q P^{n - 1}")
    if is_dominated(part.pattern):
        raise AlreadyDominated(f"pattern {part.pattern} is dominated")
    direct = _fraction(space, part.masks)
    pieces = refine_to_minimal(part)
    best = Fraction(1)
    matches = True
    for piece in pieces:
        sr = surgery_reduce(piece)
        if sr.dependent_prefix:
            continue
        best = min(best, sr.after)
        _, rs = _split_slots(sr.part)
        quot = space.quotient(sr.S)
        T = quot.target
        images = [Factor.from_mask(T, quot.image_mask(sr.part.factors[i].mask)) for i in rs]
        if _fraction(T, [f.mask for f in images]) != sr.after:
            matches = False
        line_pieces = [split_factor(f, 1) for f in images]
        for combo in itertools.product(*line_pieces):
            best = min(best, _fraction(T, [f.mask for f in combo]))
    return AlmostFlatReport(direct, best, almostflat_bound(q, n), len(pieces), matches)


# Graham-Pollak


@dataclass(frozen=True)
class BicliqueInstance:
    n: int

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(self.n) if i != j]

    def matrix(self) -> np.ndarray:
        return np.ones((self.n, self.n)) - np.eye(self.n)


GP_LIMIT = 5


def _bicliques(n: int) -> list[int]:
    out = []
    for labels in itertools.product((0, 1, 2), repeat=n):
        A = [i for i, x in enumerate(labels) if x == 1]
        B = [j for j, x in enumerate(labels) if x == 2]
        if A and B:
            out.append(sum(1 << (i * n + j) for i in A for j in B))
    return sorted(out, key=lambda m: (-popcount(m), m))


def _edge_rank(mask: int, n: int) -> int:
    M = np.zeros((n, n))
    for e in bits(mask):
        M[divmod(e, n)] = 1
    return int(np.linalg.matrix_rank(M))


def biclique_search(inst: BicliqueInstance | int, use_rank_bound: bool = True) -> tuple[int, list[int]]:
    """Minimum partition of the edges of K_{n,n} minus a perfect matching into
    complete bipartite subgraphs, by branch and bound over exact covers."""
    n = inst.n if isinstance(inst, BicliqueInstance) else int(inst)
    if n > GP_LIMIT:
        raise TooLarge(f"n={n} exceeds the exhaustive limit {GP_LIMIT}")
    if n < 1:
        raise DependenceError("n must be positive")
    target = sum(1 << (i * n + j) for i in range(n) for j in range(n) if i != j)
    if not target:
        return 0, []
    cands = _bicliques(n)
    by_edge = {e: [c for c in cands if c >> e & 1] for e in bits(target)}
    biggest = (n // 2) * (n - n // 2)
    best: list = [math.inf, []]

    def lower(remaining: int) -> int:
        if use_rank_bound:
            return _edge_rank(remaining, n)
        return -(-popcount(remaining) // biggest)

    def dfs(covered: int, chosen: list[int]):
        remaining = target & ~covered
        if not remaining:
            if len(chosen) < best[0]:
                best[0], best[1] = len(chosen), list(chosen)
            return
        if len(chosen) + lower(remaining) >= best[0]:
            return
        e = (remaining & -remaining).bit_length() - 1
        for c in by_edge[e]:
            if c & covered:
                continue
            chosen.append(c)
            dfs(covered | c, chosen)
            chosen.pop()

    dfs(0, [])
    return best[0], best[1]


def min_biclique_partition(inst: BicliqueInstance | int, use_rank_bound: bool = True) -> int:
    return biclique_search(inst, use_rank_bound)[0]
