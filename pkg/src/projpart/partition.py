"""Product-set partitions of (F_q P^n)^k whose parts lie in L^k for a (k-1)-flat L.

Factors are stored as a base flat minus a list of hole flats, with the point
set cached as a bitmask.  Wherever a construction leaves a choice open (which
flat to keep whole, which subflat or point to fix) the lexicographically
least candidate in point-index order is used, so constructions are
reproducible.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .projgeom import Flat, Space, bits, get_space, point_count, popcount


class PartitionError(ValueError):
    pass


class EmptyFactor(PartitionError):
    pass


class TooLarge(PartitionError):
    pass


class WrongArity(PartitionError):
    pass


class NotAPartition(PartitionError):
    pass


class BadDims(PartitionError):
    pass


class AlreadyDominated(PartitionError):
    pass


class NotAlmostFlat(PartitionError):
    pass


@dataclass(frozen=True, eq=False)
class Factor:
    """The point set ``base`` minus the union of ``holes``; never empty."""

    base: Flat
    holes: tuple[Flat, ...] = ()
    mask: int = field(init=False, repr=False)

    def __post_init__(self):
        m = self.base.mask
        for h in self.holes:
            if h.space is not self.base.space:
                raise PartitionError("hole from a different space")
            m &= ~h.mask
        if not m:
            raise EmptyFactor("factor has no points")
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_mask(cls, space: Space, mask: int) -> "Factor":
        """Represent an arbitrary nonempty point set as its span minus flats.

        The missing points are covered greedily by flats lying inside the
        missing set, least point first.
        """
        if not mask:
            raise EmptyFactor("factor has no points")
        base = space.flat_from_mask(mask)
        missing = base.mask & ~mask
        holes = []
        if missing and space.is_flat(missing):
            holes.append(space.flat_from_mask(missing))
            missing = 0
        while missing:
            H = space.empty
            for p in bits(missing):
                G = space.extend(H, p)
                if G.mask & ~missing == 0:
                    H = G
            holes.append(H)
            missing &= ~H.mask
        return cls(base, tuple(holes))

    @property
    def space(self) -> Space:
        return self.base.space

    @property
    def size(self) -> int:
        return popcount(self.mask)

    @property
    def dim(self) -> int:
        """Dimension of the smallest flat containing the factor."""
        return self.space.flat_from_mask(self.mask).dim

    def points(self) -> list[int]:
        return list(bits(self.mask))

    def __contains__(self, p: int) -> bool:
        return bool(self.mask >> p & 1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Factor):
            return NotImplemented
        return self.space is other.space and self.mask == other.mask

    def __hash__(self) -> int:
        return hash(self.mask)

    def __repr__(self) -> str:
        return f"Factor(base_dim={self.base.dim}, holes={[h.dim for h in self.holes]}, points={self.points()})"

    @property
    def is_flat(self) -> bool:
        return self.space.is_flat(self.mask)

    def almost_flat(self) -> tuple[Flat, Flat | None] | None:
        """``(G, H)`` if the point set equals G, or G minus a proper subflat H; else None."""
        G = self.space.flat_from_mask(self.mask)
        missing = G.mask & ~self.mask
        if not missing:
            return G, None
        H = self.space.flat_from_mask(missing)
        if H.mask != missing:
            return None
        return G, H

    @property
    def is_almost_flat(self) -> bool:
        return self.almost_flat() is not None

    def intersect_flat(self, x: Flat) -> "Factor | None":
        base = self.space.meet(self.base, x)
        if not base.mask & self.mask:
            return None
        holes = _dedup(self.space.meet(h, base) for h in self.holes)
        return Factor(base, holes)

    def subtract_flat(self, x: Flat) -> "Factor | None":
        if not self.mask & ~x.mask:
            return None
        hole = self.space.meet(x, self.base)
        if not hole.mask:
            return self
        return Factor(self.base, _dedup(self.holes + (hole,)))

    def to_dict(self) -> dict:
        return {"base": [list(r) for r in self.base.basis], "holes": [[list(r) for r in h.basis] for h in self.holes]}

    @classmethod
    def from_dict(cls, space: Space, data: dict) -> "Factor":
        return cls(space.flat(data["base"]), tuple(space.flat(h) for h in data.get("holes", [])))


def _dedup(flats: Iterable[Flat]) -> tuple[Flat, ...]:
    out: dict[int, Flat] = {}
    for h in flats:
        if h.mask and h.mask not in out:
            out[h.mask] = h
    return tuple(out.values())


def dimension_pattern(factors: Sequence[Factor]) -> tuple[int, ...]:
    return tuple(sorted(f.dim for f in factors))


def pattern_leq(s: Sequence[int], t: Sequence[int]) -> bool:
    return len(s) == len(t) and all(a <= b for a, b in zip(s, t))


def is_dominated(pattern: Sequence[int]) -> bool:
    """pattern <= (0, 1, ..., n-1) componentwise."""
    return pattern_leq(pattern, tuple(range(len(pattern))))


def minimal_patterns(n: int) -> list[tuple[int, ...]]:
    """The n-1 minimal non-dominated patterns (0,..,0,j,..,j), j zeros-1 leading."""
    return [tuple(0 if i < j else j for i in range(1, n + 1)) for j in range(1, n)]


@dataclass(frozen=True, eq=False)
class ProductPart:
    factors: tuple[Factor, ...]
    witness: Flat | None = None

    def __post_init__(self):
        spaces = {id(f.space) for f in self.factors}
        if len(spaces) > 1:
            raise PartitionError("factors live in different spaces")

    @property
    def space(self) -> Space:
        return self.factors[0].space

    @property
    def size(self) -> int:
        return math.prod(f.size for f in self.factors)

    @property
    def pattern(self) -> tuple[int, ...]:
        return dimension_pattern(self.factors)

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(f.mask for f in self.factors)

    def __contains__(self, tup: Sequence[int]) -> bool:
        return all(f.mask >> p & 1 for f, p in zip(self.factors, tup))

    def to_dict(self) -> dict:
        return {
            "factors": [f.to_dict() for f in self.factors],
            "witness": None if self.witness is None else [list(r) for r in self.witness.basis],
        }


@dataclass
class Partition:
    q: int
    n: int
    k: int
    parts: list[ProductPart]
    complete: bool = True

    @property
    def space(self) -> Space:
        return get_space(self.q, self.n)

    @property
    def size(self) -> int:
        return len(self.parts)

    def to_dict(self) -> dict:
        return {"q": self.q, "n": self.n, "k": self.k, "parts": [p.to_dict() for p in self.parts]}

    @classmethod
    def from_dict(cls, data: dict) -> "Partition":
        space = get_space(data["q"], data["n"])
        parts = []
        for pd in data["parts"]:
            factors = tuple(Factor.from_dict(space, f) for f in pd["factors"])
            w = pd.get("witness")
            parts.append(ProductPart(factors, None if w is None else space.flat(w)))
        return cls(data["q"], data["n"], data["k"], parts)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["part", "pattern", "size"])
        for i, p in enumerate(self.parts):
            w.writerow([i, " ".join(map(str, p.pattern)), p.size])
        return buf.getvalue()


# constructions


def partition_around(F: Flat, r: int) -> list[Factor]:
    """Partition F_q P^n into the r-flats through the (r-1)-flat F.

    The flat containing the least point outside F is kept whole; every other
    r-flat through F contributes itself minus F.
    """
    space = F.space
    if not 0 <= r - 1 < space.n or F.dim != r - 1:
        raise BadDims(f"need an (r-1)-flat with 1 <= r <= n, got dim {F.dim} and r={r}")
    out = []
    todo = space.full_mask & ~F.mask
    while todo:
        p = (todo & -todo).bit_length() - 1
        G = space.extend(F, p)
        out.append(Factor(G) if not out else Factor(G, (F,)))
        todo &= ~G.mask
    return out


def construct_plane_partition(q: int) -> Partition:
    """Parts {p} x L over points p and the lines L through p, one line whole."""
    space = get_space(q, 2)
    parts = []
    for p in range(space.size):
        P = space.point_flat(p)
        for f in partition_around(P, 1):
            parts.append(ProductPart((Factor(P), f), witness=f.base))
    return Partition(q, 2, 2, parts)


def power_partition_size(q: int, n: int, k: int) -> int:
    return math.prod((q ** (n + 1) - q ** (i - 1)) // (q**i - q ** (i - 1)) for i in range(1, k + 1))


POWER_LIMIT = 10**7


def construct_power_partition(q: int, n: int, k: int) -> Partition:
    """Factor j+1 of each part ranges over a partition around the span of factor j."""
    if not 1 <= k <= n:
        raise BadDims(f"need 1 <= k <= n, got k={k}, n={n}")
    size = power_partition_size(q, n, k)
    if size > POWER_LIMIT:
        raise TooLarge(f"predicted {size} parts exceeds {POWER_LIMIT}")
    space = get_space(q, n)
    around: dict[int, list[Factor]] = {}

    def children(f: Factor, r: int) -> list[Factor]:
        F = f.base
        if F.mask not in around:
            around[F.mask] = partition_around(F, r)
        return around[F.mask]

    parts = []

    def grow(prefix: list[Factor]):
        if len(prefix) == k:
            parts.append(ProductPart(tuple(prefix), witness=prefix[-1].base))
            return
        for f in children(prefix[-1], len(prefix)):
            prefix.append(f)
            grow(prefix)
            prefix.pop()

    for p in range(space.size):
        grow([Factor(space.point_flat(p))])
    assert len(parts) == size
    return Partition(q, n, k, parts)


def singleton_partition(q: int, n: int, k: int) -> Partition:
    space = get_space(q, n)
    pts = [Factor(space.point_flat(p)) for p in range(space.size)]
    parts = []
    for tup in itertools.product(range(space.size), repeat=k):
        W = _complete_to_dim(space, space.span_points(tup), k - 1)
        parts.append(ProductPart(tuple(pts[p] for p in tup), W))
    return Partition(q, n, k, parts)


def _complete_to_dim(space: Space, F: Flat, dim: int) -> Flat:
    for p in range(space.size):
        if F.dim >= dim:
            break
        F = space.extend(F, p)
    return F


# verification


@dataclass
class VerifyReport:
    disjoint: bool
    covering: bool
    witnessed: bool
    violations: list[str]
    mode: str
    total: int
    covered: int
    samples: int = 0
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return self.disjoint and self.covering and self.witnessed

    def to_dict(self) -> dict:
        return {
            "disjoint": self.disjoint,
            "covering": self.covering,
            "witnessed": self.witnessed,
            "passed": self.passed,
            "violations": self.violations,
            "mode": self.mode,
            "total": self.total,
            "covered": self.covered,
            "samples": self.samples,
            "seed": self.seed,
        }


EXHAUSTIVE_LIMIT = 10**9


def _membership(masks: list[int], size: int) -> np.ndarray:
    M = np.zeros((len(masks), size), dtype=np.float32)
    for i, m in enumerate(masks):
        for p in bits(m):
            M[i, p] = 1.0
    return M


def _first_overlap(parts: list[ProductPart], size: int, k: int, block: int = 2048) -> tuple[int, int] | None:
    # parts intersect iff every coordinate pair of factors intersects
    mats = [_membership([p.factors[j].mask for p in parts], size) for j in range(k)]
    N = len(parts)
    for lo in range(0, N, block):
        hi = min(N, lo + block)
        hit = np.ones((hi - lo, N), dtype=bool)
        for M in mats:
            hit &= (M[lo:hi] @ M.T) > 0
        hit &= np.arange(N)[None, :] > np.arange(lo, hi)[:, None]
        idx = np.argwhere(hit)
        if len(idx):
            i, j = idx[0]
            return int(lo + i), int(j)
    return None


def verify(P: Partition, samples: int = 10000, seed: int = 0) -> VerifyReport:
    """Check pairwise disjointness, exact coverage, and witness flats.

    Coverage is the cardinality sum, which together with disjointness proves
    the parts tile (F_q P^n)^k.  Above ``EXHAUSTIVE_LIMIT`` tuples the
    disjointness test is replaced by sampled tuples each required to lie in
    exactly one part.
    """
    space = P.space
    total = space.size**P.k
    violations: list[str] = []
    witnessed = True
    for i, part in enumerate(P.parts):
        if len(part.factors) != P.k:
            witnessed = False
            violations.append(f"part {i} has {len(part.factors)} factors, expected {P.k}")
            continue
        W = part.witness
        union = 0
        for f in part.factors:
            union |= f.mask
        if W is None:
            if space.flat_from_mask(union).dim > P.k - 1:
                witnessed = False
                violations.append(f"part {i} spans more than a {P.k - 1}-flat")
        elif W.dim != P.k - 1 or union & ~W.mask:
            witnessed = False
            violations.append(f"part {i} is not contained in its witness {P.k - 1}-flat")
    covered = sum(p.size for p in P.parts)
    mode = "exhaustive" if total <= EXHAUSTIVE_LIMIT else "sampled"
    good = [p for p in P.parts if len(p.factors) == P.k]
    disjoint = True
    if mode == "exhaustive":
        hit = _first_overlap(good, space.size, P.k) if good else None
        if hit is not None:
            disjoint = False
            violations.append(f"parts {hit[0]} and {hit[1]} overlap")
        n_samples = 0
    else:
        rng = random.Random(seed)
        n_samples = samples
        for _ in range(samples):
            t = tuple(rng.randrange(space.size) for _ in range(P.k))
            c = sum(t in p for p in good)
            if c != 1:
                disjoint = disjoint and c <= 1
                violations.append(f"tuple {t} lies in {c} parts")
                break
    covering = covered == total if P.complete else covered <= total
    if covered < total and P.complete:
        violations.append(f"cardinality deficit {total - covered} (parts cover {covered} of {total})")
    elif covered > total:
        violations.append(f"cardinality excess {covered - total} (parts cover {covered} of {total})")
    return VerifyReport(disjoint, covering, witnessed, violations, mode, total, covered, n_samples, None if mode == "exhaustive" else seed)


# canonical parts for k = 2


def canonicalize(P: Partition) -> Partition:
    """Split each part A x B into the nonempty pieces among
    (A&B)x(A&B), (A-B)x(A&B), (A&B)x(B-A), (A-B)x(B-A)."""
    if P.k != 2:
        raise WrongArity(f"canonicalization needs k = 2, got k = {P.k}")
    space = P.space
    out = []
    for part in P.parts:
        a, b = part.masks
        inter, a_only, b_only = a & b, a & ~b, b & ~a
        for x, y in ((inter, inter), (a_only, inter), (inter, b_only), (a_only, b_only)):
            if x and y:
                if (x, y) == (a, b):
                    out.append(part)
                else:
                    out.append(ProductPart((Factor.from_mask(space, x), Factor.from_mask(space, y)), part.witness))
    return Partition(P.q, P.n, 2, out, P.complete)


def is_canonical(part: ProductPart) -> bool:
    a, b = part.masks
    return a == b or not a & b


@dataclass
class PhiProfile:
    phi: dict[int, int]  # line mask -> number of pieces
    total: int
    bound: int
    q: int

    @property
    def holds(self) -> bool:
        return self.total >= self.bound


def square_parts(P: Partition) -> list[int]:
    return [p.masks[0] for p in P.parts if p.masks[0] == p.masks[1]]


def phi_profile(square: Sequence[int], q: int) -> PhiProfile:
    """phi(L) = number of square-part factor sets meeting the line L."""
    space = get_space(q, 2)
    seen = 0
    for s in square:
        if s & seen:
            raise NotAPartition("square parts overlap")
        if space.flat_from_mask(s).dim > 1:
            raise NotAPartition("square part not inside a line")
        seen |= s
    if seen != space.full_mask:
        raise NotAPartition("square parts do not cover the plane")
    phi = {}
    for L in space.flats(1):
        phi[L.mask] = sum(1 for s in square if s & L.mask)
    return PhiProfile(phi, sum(phi.values()), q * (q * q + q + 1), q)


# splitting almost-flats


def _greedy_flat(space: Space, start: Flat, allowed: int, dim: int) -> Flat:
    F = start
    for p in bits(allowed):
        if F.dim >= dim:
            break
        F = space.extend(F, p)
    if F.dim != dim:
        raise BadDims(f"cannot find a {dim}-flat in the allowed region")
    return F


def split_points(f: Factor) -> list[Factor]:
    return [Factor(f.space.point_flat(p)) for p in f.points()]


def split_factor(f: Factor, target: int) -> list[Factor]:
    """Partition an almost-flat of dimension d into almost-flats of dimension ``target``.

    Three shapes are handled: a flat; G minus H with dim H >= target; and
    G minus H with dim H < target.  ``target == d`` returns ``[f]``.
    """
    af = f.almost_flat()
    if af is None:
        raise NotAlmostFlat(f"{f!r} is not an almost-flat")
    G, H = af
    d = G.dim
    space = f.space
    if not 0 < target <= d:
        raise BadDims(f"target dimension {target} not in (0, {d}]")
    if target == d:
        return [f]
    out: list[Factor] = []
    if H is None:
        core = _greedy_flat(space, space.empty, G.mask, target - 1)
        star = (G.mask & ~core.mask & -(G.mask & ~core.mask)).bit_length() - 1
        first = space.extend(core, star)
        out.append(Factor(first))
        todo = G.mask & ~first.mask
        while todo:
            p = (todo & -todo).bit_length() - 1
            Fp = space.extend(core, p)
            out.append(Factor(Fp, (core,)))
            todo &= ~Fp.mask
    elif H.dim >= target:
        core = _greedy_flat(space, space.empty, H.mask, target - 1)
        todo = G.mask & ~H.mask
        while todo:
            p = (todo & -todo).bit_length() - 1
            Fp = space.extend(core, p)
            out.append(Factor(Fp, (core,)))
            todo &= ~Fp.mask
    else:
        core = _greedy_flat(space, H, G.mask, target - 1)
        rest = G.mask & ~core.mask
        star = (rest & -rest).bit_length() - 1
        first = space.extend(core, star)
        out.append(Factor(first, (H,)))
        todo = G.mask & ~first.mask
        while todo:
            p = (todo & -todo).bit_length() - 1
            Fp = space.extend(core, p)
            out.append(Factor(Fp, (core,)))
            todo &= ~Fp.mask
    return out


def refine_to_minimal(part: ProductPart) -> list[ProductPart]:
    """Partition a non-dominated product of almost-flats into parts with
    minimal non-dominated patterns.

    With k+1 the least (1-based) position where the sorted pattern reaches
    its index, the k lowest-dimensional factors are split into points and the
    rest into almost-flats of dimension k+1.  Factor positions are preserved.
    """
    dims = [f.dim for f in part.factors]
    for f in part.factors:
        if not f.is_almost_flat:
            raise NotAlmostFlat(f"{f!r} is not an almost-flat")
    pattern = sorted(dims)
    if is_dominated(pattern):
        raise AlreadyDominated(f"pattern {tuple(pattern)} is dominated")
    k = next(i for i, s in enumerate(pattern, start=1) if s >= i) - 1
    order = sorted(range(len(dims)), key=lambda i: (dims[i], i))
    point_slots = set(order[:k])
    pieces = [split_points(f) if i in point_slots else split_factor(f, k + 1) for i, f in enumerate(part.factors)]
    return [ProductPart(combo, part.witness) for combo in itertools.product(*pieces)]


def product_minus_products_split(base: ProductPart, removed: Sequence[ProductPart]) -> list[ProductPart]:
    """Partition base minus the union of ``removed`` into at most n^h products.

    Each removal splits a piece by the first coordinate at which a tuple
    leaves the removed product.
    """
    space = base.space
    pieces = [base.masks]
    for R in removed:
        rm = R.masks
        nxt = []
        for B in pieces:
            for j in range(len(B)):
                head = tuple(b & r for b, r in zip(B[:j], rm[:j]))
                mid = B[j] & ~rm[j]
                if mid and all(head):
                    nxt.append(head + (mid,) + B[j + 1 :])
        pieces = nxt
    return [ProductPart(tuple(Factor.from_mask(space, m) for m in B), base.witness) for B in pieces]


def volume_lower_bound(q: int, n: int, k: int) -> int:
    """ceil(|(F_q P^n)^k| / max part size)."""
    total = point_count(n, q) ** k
    biggest = point_count(k - 1, q) ** k
    return -(-total // biggest)
