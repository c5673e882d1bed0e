"""Exhaustive and randomized checks of the quotient facts used by the lower
bound arguments, plus seeded generators of random almost-flat parts.

Each check returns a :class:`ClaimReport`; ``violations`` holds the first few
counterexamples verbatim so a failing run can be reproduced.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .partition import Factor, ProductPart, is_dominated
from .projgeom import Flat, Space, bits


@dataclass
class ClaimReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def fail(self, example) -> None:
        if len(self.violations) < 10:
            self.violations.append(example)

    def to_dict(self) -> dict:
        return {"claim": self.name, "checked": self.checked, "holds": self.holds, "violations": self.violations}


def all_flats(space: Space, include_empty: bool = True) -> list[Flat]:
    lo = -1 if include_empty else 0
    return [F for d in range(lo, space.n + 1) for F in space.flats(d)]


def check_invariance_dependence(space: Space, max_len: int | None = None) -> ClaimReport:
    """t is dependent iff its tail is dependent in the quotient by its first point."""
    rep = ClaimReport("invariance-dependence")
    max_len = space.n + 1 if max_len is None else max_len
    quots = [space.quotient(space.point_flat(p)) for p in range(space.size)]
    for k in range(2, max_len + 1):
        for t in itertools.product(range(space.size), repeat=k):
            if t[0] in t[1:]:
                continue
            Q = quots[t[0]]
            img = [Q.class_of[p] for p in t[1:]]
            rep.checked += 1
            if space.is_dependent(t) != Q.target.is_dependent(img):
                rep.fail(list(t))
    return rep


def check_intersection_size(space: Space) -> ClaimReport:
    """Classes of F/S meeting a subflat F' of F all meet it in the same number of points."""
    rep = ClaimReport("intersection-size")
    flats = all_flats(space)
    for S in flats:
        quot = space.quotient(S)
        classes = list(quot.classes.values())
        for F in flats:
            if not F.mask & ~S.mask:
                continue
            in_F = [c & F.mask for c in classes if c & F.mask]
            for Fp in flats:
                if Fp.mask & ~F.mask or not Fp.mask:
                    continue
                sizes = {(c & Fp.mask).bit_count() for c in in_F if c & Fp.mask}
                rep.checked += 1
                if len(sizes) > 1:
                    rep.fail({"S": S.points(), "F": F.points(), "F'": Fp.points(), "sizes": sorted(sizes)})
    return rep


def check_dependence_prop_eq(space: Space, max_len: int | None = None) -> ClaimReport:
    """Swapping q_j for a point of its class modulo span(p_1..p_k) keeps dependence."""
    rep = ClaimReport("dependence-prop-eq")
    max_len = space.n + 1 if max_len is None else max_len
    for m in range(2, max_len + 1):
        for t in itertools.product(range(space.size), repeat=m):
            dep = space.is_dependent(t)
            S = space.empty
            for k in range(1, m):
                S = space.extend(S, t[k - 1])
                for j in range(k, m):
                    if S.mask >> t[j] & 1:
                        continue
                    cls = space.extend(S, t[j]).mask & ~S.mask
                    for alt in bits(cls & ~(1 << t[j])):
                        t2 = t[:j] + (alt,) + t[j + 1 :]
                        rep.checked += 1
                        if space.is_dependent(t2) != dep:
                            rep.fail({"t": list(t), "k": k, "j": j, "replacement": alt})
    return rep


def check_dependence_prop_eq_random(space: Space, trials: int, seed: int) -> ClaimReport:
    rep = ClaimReport("dependence-prop-eq")
    rng = random.Random(seed)
    for _ in range(trials):
        m = rng.randint(2, space.n + 1)
        k = rng.randint(1, m - 1)
        t = tuple(rng.randrange(space.size) for _ in range(m))
        S = space.span_points(t[:k])
        j = rng.randrange(k, m)
        if S.mask >> t[j] & 1:
            continue
        cls = list(bits(space.extend(S, t[j]).mask & ~S.mask))
        t2 = t[:j] + (rng.choice(cls),) + t[j + 1 :]
        rep.checked += 1
        if space.is_dependent(t2) != space.is_dependent(t):
            rep.fail({"t": list(t), "k": k, "j": j, "replacement": t2[j]})
    return rep


# random almost-flats


def random_flat(space: Space, dim: int, rng: random.Random, inside: Flat | None = None) -> Flat:
    region = list(bits((inside or space.whole).mask))
    F = space.empty
    while F.dim < dim:
        F = space.extend(F, rng.choice(region))
    return F


def random_almost_flat(space: Space, dim: int, rng: random.Random) -> Factor:
    G = random_flat(space, dim, rng)
    if dim == 0:
        return Factor(G)
    hole_dim = rng.randint(-1, dim - 1)
    if hole_dim < 0:
        return Factor(G)
    return Factor(G, (random_flat(space, hole_dim, rng, inside=G),))


def random_surgery_part(space: Space, rng: random.Random, min_prefix: int = 1) -> ProductPart:
    """p_1 x .. x p_k x R_{k+1} x .. x R_n with n = ambient dim + 1 and each
    R_i an almost-flat of dimension k+1; k is drawn from [min_prefix, n-2]."""
    n = space.n + 1
    k = rng.randint(min(min_prefix, n - 2), n - 2)
    pts = [Factor(space.point_flat(rng.randrange(space.size))) for _ in range(k)]
    rs = [random_almost_flat(space, k + 1, rng) for _ in range(n - k)]
    return ProductPart(tuple(pts + rs))


def random_nondominated_part(space: Space, rng: random.Random) -> ProductPart:
    n = space.n + 1
    while True:
        dims = [rng.randint(0, space.n) for _ in range(n)]
        if not is_dominated(sorted(dims)):
            return ProductPart(tuple(random_almost_flat(space, d, rng) for d in dims))
