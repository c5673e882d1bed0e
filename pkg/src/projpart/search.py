"""Bounded branch-and-bound for small DPP instances with k = n = 2.

The result is always an interval: a counting lower bound and the best
partition found within the node budget.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .partition import Factor, Partition, ProductPart, construct_plane_partition, volume_lower_bound
from .projgeom import bits, get_space, popcount


@dataclass
class SearchResult:
    q: int
    lower: int
    lower_sources: dict[str, int]
    best: int
    best_parts: list[tuple[int, int, int]]  # (line mask, first factor mask, second factor mask)
    nodes: int
    exhausted: bool

    def partition(self) -> Partition:
        space = get_space(self.q, 2)
        parts = [
            ProductPart((Factor.from_mask(space, a), Factor.from_mask(space, b)), space.flat_from_mask(L))
            for L, a, b in self.best_parts
        ]
        return Partition(self.q, 2, 2, parts)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "interval": [self.lower, self.best],
            "lower_sources": self.lower_sources,
            "best": self.best,
            "nodes": self.nodes,
            "exhausted": self.exhausted,
        }


def _subsets(mask: int) -> list[int]:
    pts = list(bits(mask))
    out = []
    for r in range(1, len(pts) + 1):
        for c in itertools.combinations(pts, r):
            out.append(sum(1 << p for p in c))
    return out


def search_min_partition(q: int = 2, node_limit: int = 200_000) -> SearchResult:
    space = get_space(q, 2)
    N = space.size

    def cell_mask(a: int, b: int) -> int:
        m = 0
        for x in bits(a):
            for y in bits(b):
                m |= 1 << (x * N + y)
        return m

    cands: dict[int, tuple[int, int, int]] = {}
    for L in space.flats(1):
        subs = _subsets(L.mask)
        for a in subs:
            for b in subs:
                cands.setdefault(cell_mask(a, b), (L.mask, a, b))
    order = sorted(cands, key=lambda m: (-popcount(m), m))
    by_cell = {c: [m for m in order if m >> c & 1] for c in range(N * N)}
    biggest = popcount(order[0])
    target = (1 << (N * N)) - 1

    seed = construct_plane_partition(q)
    best = [seed.size, [(p.witness.mask, p.masks[0], p.masks[1]) for p in seed.parts]]
    nodes = 0
    stopped = False

    def dfs(covered: int, chosen: list[int]):
        nonlocal nodes, stopped
        if stopped:
            return
        nodes += 1
        if nodes > node_limit:
            stopped = True
            return
        remaining = target & ~covered
        if not remaining:
            if len(chosen) < best[0]:
                best[0], best[1] = len(chosen), [cands[m] for m in chosen]
            return
        if len(chosen) + -(-popcount(remaining) // biggest) >= best[0]:
            return
        c = (remaining & -remaining).bit_length() - 1
        for m in by_cell[c]:
            if not m & covered:
                chosen.append(m)
                dfs(covered | m, chosen)
                chosen.pop()

    dfs(0, [])
    sources = {
        "volume": volume_lower_bound(q, 2, 2),
        # canonical pieces need q(q^2+q+1) non-square parts; a part yields at most 3
        "canonical_line_sum": -(-q * (q * q + q + 1) // 3),
    }
    return SearchResult(q, max(sources.values()), sources, best[0], best[1], nodes, not stopped)
