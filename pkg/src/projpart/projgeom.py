"""Finite projective spaces F_q P^n.

A point is identified by its index in the lexicographic enumeration of
normalized coordinate vectors (first nonzero coordinate equal to 1).  Point
sets are Python ints used as bitsets over those indices, so a flat is fully
described by its ``mask``; the RREF ``basis`` is kept alongside for linear
algebra.  Flats are interned per space, which makes repeated span
computations in the enumeration kernels cheap dictionary lookups.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .gfq import FieldSpec, field_make


class GeometryError(ValueError):
    pass


class AmbientMismatch(GeometryError):
    pass


class DimOutOfRange(GeometryError):
    pass


class PointInFlat(GeometryError):
    pass


def bits(mask: int) -> Iterator[int]:
    """Yield the set bit positions of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: int) -> int:
    return mask.bit_count()


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def rref(rows: Iterable[Sequence[int]], F: FieldSpec) -> tuple[tuple[int, ...], ...]:
    """Reduced row echelon form over GF(q); zero rows are dropped."""
    mat = [list(r) for r in rows]
    if not mat:
        return ()
    add, mul, neg, inv = F.add, F.mul, F.neg, F.inv
    ncols = len(mat[0])
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(mat)) if mat[i][c]), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        s = inv[mat[r][c]]
        if s != 1:
            mat[r] = [mul[s][x] for x in mat[r]]
        prow = mat[r]
        for i in range(len(mat)):
            if i != r and mat[i][c]:
                f = neg[mat[i][c]]
                mat[i] = [add[x][mul[f][y]] for x, y in zip(mat[i], prow)]
        r += 1
        if r == len(mat):
            break
    return tuple(tuple(row) for row in mat[:r])


def pivot_columns(basis: Sequence[Sequence[int]]) -> list[int]:
    return [next(c for c, x in enumerate(row) if x) for row in basis]


def nullspace(rows: Sequence[Sequence[int]], ncols: int, F: FieldSpec) -> list[tuple[int, ...]]:
    """Basis of {x : row . x = 0 for every row}."""
    R = rref(rows, F)
    pivots = pivot_columns(R)
    free = [c for c in range(ncols) if c not in pivots]
    out = []
    for fc in free:
        v = [0] * ncols
        v[fc] = 1
        for row, pc in zip(R, pivots):
            v[pc] = F.neg[row[fc]]
        out.append(tuple(v))
    return out


def gaussian_binomial(n: int, k: int, q: int) -> int:
    """Number of k-dimensional subspaces of F_q^n."""
    if k < 0 or k > n:
        return 0
    num = den = 1
    for i in range(k):
        num *= q**n - q**i
        den *= q**k - q**i
    return num // den


def count_flats(n: int, k: int, q: int) -> int:
    """Number of k-flats in F_q P^n."""
    if not -1 <= k <= n:
        raise DimOutOfRange(f"flat dimension {k} outside [-1, {n}]")
    return gaussian_binomial(n + 1, k + 1, q)


def point_count(n: int, q: int) -> int:
    return (q ** (n + 1) - 1) // (q - 1)


@dataclass(frozen=True)
class Point:
    index: int
    coords: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Flat:
    space: "Space"
    basis: tuple[tuple[int, ...], ...]
    mask: int

    @property
    def dim(self) -> int:
        return len(self.basis) - 1

    @property
    def size(self) -> int:
        return popcount(self.mask)

    def __contains__(self, point: int) -> bool:
        return bool(self.mask >> point & 1)

    def points(self) -> list[int]:
        return list(bits(self.mask))

    def issubset(self, other: "Flat") -> bool:
        return self.mask & ~other.mask == 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Flat):
            return NotImplemented
        return self.space is other.space and self.mask == other.mask

    def __hash__(self) -> int:
        return hash((self.space.q, self.space.n, self.mask))

    def __repr__(self) -> str:
        return f"Flat(dim={self.dim}, points={self.points()})"

    def to_dict(self) -> dict:
        return {"q": self.space.q, "n": self.space.n, "rows": [list(r) for r in self.basis]}


class Space:
    """The projective space F_q P^n with interned flats.

    Use :func:`get_space` rather than the constructor so that flats from the
    same ``(q, n)`` compare by identity of their space.
    """

    def __init__(self, q: int, n: int):
        if n < -1:
            raise DimOutOfRange("ambient dimension must be >= -1")
        self.field = field_make(q)
        self.q = q
        self.n = n
        self.points: list[tuple[int, ...]] = [
            v for v in itertools.product(range(q), repeat=n + 1) if any(v) and next(x for x in v if x) == 1
        ]
        self._index = {v: i for i, v in enumerate(self.points)}
        self.size = len(self.points)
        self.full_mask = (1 << self.size) - 1
        self._by_basis: dict[tuple, Flat] = {}
        self._by_mask: dict[int, Flat] = {}
        self._extend: dict[tuple[int, int], Flat] = {}
        self._flats_of_dim: dict[int, list[Flat]] = {}
        self.empty = self._intern(())
        self.whole = self._intern(tuple(tuple(int(i == j) for j in range(n + 1)) for i in range(n + 1)))

    def __repr__(self) -> str:
        return f"Space(q={self.q}, n={self.n})"

    def __reduce__(self):
        return get_space, (self.q, self.n)

    # points

    def normalize(self, vec: Sequence[int]) -> tuple[int, ...] | None:
        lead = next((x for x in vec if x), 0)
        if lead == 0:
            return None
        if lead == 1:
            return tuple(vec)
        s = self.field.inv[lead]
        mul = self.field.mul
        return tuple(mul[s][x] for x in vec)

    def index_of(self, vec: Sequence[int]) -> int:
        if len(vec) != self.n + 1:
            raise AmbientMismatch(f"expected {self.n + 1} coordinates, got {len(vec)}")
        v = self.normalize(vec)
        if v is None:
            raise GeometryError("the zero vector is not a projective point")
        return self._index[v]

    def as_point(self, x) -> int:
        """Accept a point index, a Point, or a coordinate vector."""
        if isinstance(x, Point):
            return x.index
        if isinstance(x, int):
            if not 0 <= x < self.size:
                raise GeometryError(f"point index {x} out of range")
            return x
        return self.index_of(x)

    def point(self, i: int) -> Point:
        return Point(i, self.points[i])

    # flats

    def _intern(self, basis: tuple[tuple[int, ...], ...]) -> Flat:
        f = self._by_basis.get(basis)
        if f is not None:
            return f
        mask = 0
        if basis:
            add, mul = self.field.add, self.field.mul
            r = len(basis)
            width = self.n + 1
            for coefs in itertools.product(range(self.q), repeat=r):
                lead = next((c for c in coefs if c), 0)
                if lead != 1:
                    continue
                v = [0] * width
                for c, row in zip(coefs, basis):
                    if c:
                        v = [add[a][mul[c][b]] for a, b in zip(v, row)]
                mask |= 1 << self._index[tuple(v)]
        f = Flat(self, basis, mask)
        self._by_basis[basis] = f
        self._by_mask.setdefault(mask, f)
        return f

    def flat(self, vectors: Iterable[Sequence[int]]) -> Flat:
        """Flat spanned by the given coordinate vectors."""
        vecs = [tuple(v) for v in vectors]
        for v in vecs:
            if len(v) != self.n + 1:
                raise AmbientMismatch(f"expected {self.n + 1} coordinates, got {len(v)}")
        return self._intern(rref(vecs, self.field))

    def point_flat(self, p: int) -> Flat:
        return self.extend(self.empty, p)

    def extend(self, F: Flat, p: int) -> Flat:
        """span(F + {p})."""
        if F.mask >> p & 1:
            return F
        key = (F.mask, p)
        g = self._extend.get(key)
        if g is None:
            g = self._intern(rref(F.basis + (self.points[p],), self.field))
            self._extend[key] = g
        return g

    def span_points(self, points: Iterable[int]) -> Flat:
        F = self.empty
        for p in points:
            F = self.extend(F, p)
        return F

    def flat_from_mask(self, mask: int) -> Flat:
        """span of the point set ``mask``."""
        f = self._by_mask.get(mask)
        if f is not None:
            return f
        F = self.empty
        rest = mask
        while rest:
            low = rest & -rest
            F = self.extend(F, low.bit_length() - 1)
            rest &= ~F.mask
        return F

    def is_flat(self, mask: int) -> bool:
        return self.flat_from_mask(mask).mask == mask

    def span(self, items: Iterable) -> Flat:
        """Smallest flat containing the given points and flats."""
        F = self.empty
        for it in items:
            if isinstance(it, Flat):
                if it.space is not self:
                    raise AmbientMismatch("flat from a different space")
                if it.mask & ~F.mask:
                    F = self._intern(rref(F.basis + it.basis, self.field))
            else:
                F = self.extend(F, self.as_point(it))
        return F

    def meet(self, A: Flat, B: Flat) -> Flat:
        return self.flat_from_mask(A.mask & B.mask)

    def hyperplane(self, normal: Sequence[int]) -> Flat:
        """The (n-1)-flat {x : normal . x = 0}."""
        if not any(normal):
            raise GeometryError("zero functional")
        return self._intern(rref(nullspace([normal], self.n + 1, self.field), self.field))

    def annihilator(self, F: Flat) -> list[tuple[int, ...]]:
        """Basis of linear functionals vanishing on F."""
        if not F.basis:
            return [tuple(int(i == j) for j in range(self.n + 1)) for i in range(self.n + 1)]
        return nullspace(F.basis, self.n + 1, self.field)

    def flats(self, dim: int) -> list[Flat]:
        """All flats of the given dimension, sorted by point mask."""
        if not -1 <= dim <= self.n:
            raise DimOutOfRange(f"flat dimension {dim} outside [-1, {self.n}]")
        if dim not in self._flats_of_dim:
            if dim == -1:
                out = [self.empty]
            else:
                seen = {}
                for F in self.flats(dim - 1):
                    for p in bits(self.full_mask & ~F.mask):
                        G = self.extend(F, p)
                        seen[G.mask] = G
                out = [seen[m] for m in sorted(seen)]
            self._flats_of_dim[dim] = out
        return self._flats_of_dim[dim]

    def flat_from_dict(self, data: dict) -> Flat:
        if data.get("q", self.q) != self.q or data.get("n", self.n) != self.n:
            raise AmbientMismatch("serialized flat belongs to another space")
        return self.flat(data["rows"])

    # dependence

    def is_dependent(self, points: Sequence[int]) -> bool:
        return self.span_points(points).dim < len(points) - 1

    def quotient(self, S: Flat) -> "QuotientMap":
        return QuotientMap(self, S)


@lru_cache(maxsize=None)
def get_space(q: int, n: int) -> Space:
    return Space(q, n)


def span(points_or_flats: Sequence, space: Space | None = None) -> Flat:
    """Module-level span; the space is inferred from the first flat if not given."""
    if space is None:
        space = next((x.space for x in points_or_flats if isinstance(x, Flat)), None)
        if space is None:
            raise GeometryError("cannot infer the ambient space; pass space=")
    return space.span(points_or_flats)


def is_dependent(space: Space, points: Sequence[int]) -> bool:
    return space.is_dependent(points)


class QuotientMap:
    """Quotient of F_q P^n by a flat S.

    The class of p outside S is span(S + {p}) minus S.  Classes are labelled by
    points of a concrete target space of dimension n - dim(S) - 1: reduce a
    vector against the RREF basis of S and keep the non-pivot coordinates.
    """

    def __init__(self, space: Space, S: Flat):
        if S.space is not space:
            raise AmbientMismatch("flat from a different space")
        self.space = space
        self.by = S
        self.quotient_dim = space.n - S.dim - 1
        self.target = get_space(space.q, self.quotient_dim)
        self._pivots = pivot_columns(S.basis)
        self._keep = [c for c in range(space.n + 1) if c not in self._pivots]
        F = space.field
        table = []
        for p, v in enumerate(space.points):
            if S.mask >> p & 1:
                table.append(-1)
                continue
            w = list(v)
            for row, pc in zip(S.basis, self._pivots):
                c = w[pc]
                if c:
                    f = F.neg[c]
                    w = [F.add[a][F.mul[f][b]] for a, b in zip(w, row)]
            table.append(self.target.index_of([w[c] for c in self._keep]))
        self.class_of = table
        classes: dict[int, int] = {}
        for p, c in enumerate(table):
            if c >= 0:
                classes[c] = classes.get(c, 0) | 1 << p
        self.classes = classes

    @property
    def class_size(self) -> int:
        return self.space.q ** (self.by.dim + 1)

    def image(self, p: int) -> int:
        c = self.class_of[p]
        if c < 0:
            raise PointInFlat(f"point {p} lies in the quotient flat")
        return c

    def class_mask(self, p: int) -> int:
        return self.classes[self.image(p)]

    def class_rep(self, p: int) -> int:
        """Least point index of span(S + {p}) minus S."""
        m = self.class_mask(p)
        return (m & -m).bit_length() - 1

    def image_mask(self, mask: int) -> int:
        """Set of classes (as a target-space mask) meeting ``mask`` outside S."""
        out = 0
        for p in bits(mask & ~self.by.mask):
            out |= 1 << self.class_of[p]
        return out

    def preimage(self, target_mask: int) -> int:
        out = 0
        for c in bits(target_mask):
            out |= self.classes[c]
        return out

    def restrict(self, F_sub: Flat, F: Flat) -> int:
        """Points x of F minus S whose class meets F_sub."""
        return self.preimage(self.image_mask(F_sub.mask)) & F.mask
