"""The DSPAN oracle game: n hidden points of F_q P^n, hyperplane queries
answered YES or with the least index of a point outside the hyperplane.

Indices in answers are 1-based, as in the problem statement.
"""

from __future__ import annotations

import csv
import io
import itertools
import random
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .partition import Factor, Partition, ProductPart, verify
from .projgeom import Flat, Space, get_space


class DspanError(ValueError):
    pass


class BadQueryDim(DspanError):
    pass


class InconsistentTrace(DspanError):
    pass


class TooLarge(DspanError):
    pass


YES = "YES"


@dataclass(frozen=True)
class OracleAnswer:
    """``index`` is None for YES, else the 1-based index of the first point outside."""

    index: int | None = None

    @property
    def yes(self) -> bool:
        return self.index is None

    def to_json(self):
        return YES if self.index is None else {"NO": self.index}

    @classmethod
    def from_json(cls, data) -> "OracleAnswer":
        if data == YES:
            return cls(None)
        return cls(int(data["NO"]))


@dataclass(frozen=True)
class Instance:
    space: Space
    points: tuple[int, ...]


def oracle(inst: Instance, x: Flat) -> OracleAnswer:
    if x.dim != inst.space.n - 1:
        raise BadQueryDim(f"queries are {inst.space.n - 1}-flats, got dim {x.dim}")
    for i, v in enumerate(inst.points, start=1):
        if not x.mask >> v & 1:
            return OracleAnswer(i)
    return OracleAnswer(None)


@dataclass
class DecisionTrace:
    space: Space
    queries: list[tuple[Flat, OracleAnswer]] = field(default_factory=list)
    output: Flat | None = None

    def key(self) -> tuple:
        return tuple((x.mask, a.index) for x, a in self.queries)

    def to_dict(self) -> dict:
        return {
            "queries": [{"flat": [list(r) for r in x.basis], "answer": a.to_json()} for x, a in self.queries],
            "output": None if self.output is None else [list(r) for r in self.output.basis],
        }

    @classmethod
    def from_dict(cls, space: Space, data: dict) -> "DecisionTrace":
        qs = [(space.flat(d["flat"]), OracleAnswer.from_json(d["answer"])) for d in data["queries"]]
        out = data.get("output")
        return cls(space, qs, None if out is None else space.flat(out))


def solve(space: Space, ask: Callable[[Flat], OracleAnswer], npoints: int | None = None) -> tuple[Flat, DecisionTrace]:
    """Find an (n-1)-flat containing every hidden point using only ``ask``.

    Keeps a basis of the functionals vanishing on the span of the points found
    so far.  Point i's class modulo that span is read off coordinate by
    coordinate with queries of hyperplanes containing the span, so any NO
    answer names index i or later and YES or NO(j > i) means v_i lies in the
    queried hyperplane.  A final query confirms the output.
    """
    n = space.n
    npoints = n if npoints is None else npoints
    if npoints > n:
        raise DspanError(f"at most {n} hidden points fit the query model")
    F = space.field
    trace = DecisionTrace(space)

    def query(h) -> OracleAnswer:
        x = space.hyperplane(h)
        a = ask(x)
        trace.queries.append((x, a))
        return a

    def combine(a, c, b):
        # a + c*b
        return tuple(F.add[x][F.mul[c][y]] for x, y in zip(a, b))

    ann = [tuple(int(i == j) for j in range(n + 1)) for i in range(n + 1)]
    for i in range(1, npoints + 1):

        def inside(h) -> bool:
            a = query(h)
            return a.yes or a.index > i

        t = next((j for j, h in enumerate(ann) if not inside(h)), None)
        if t is None:
            continue
        # w_j / w_t for the coordinates after t; earlier ones are zero
        ratio = {}
        for j in range(t + 1, len(ann)):
            found = None
            for lam in range(F.q - 1):
                if inside(combine(ann[j], F.neg[lam], ann[t])):
                    found = lam
                    break
            ratio[j] = F.q - 1 if found is None else found
        new = [ann[j] for j in range(t)]
        new += [combine(ann[j], F.neg[ratio[j]], ann[t]) for j in range(t + 1, len(ann))]
        ann = new
    out = space.hyperplane(ann[0])
    final = query(ann[0])
    if not final.yes:
        raise InconsistentTrace("final confirmation query answered NO")
    trace.output = out
    return out, trace


def solve_instance(inst: Instance) -> tuple[Flat, DecisionTrace]:
    return solve(inst.space, lambda x: oracle(inst, x), len(inst.points))


def query_bound(q: int, n: int) -> int:
    return n * n * (q + 1) + 1


def induced_part(trace: DecisionTrace, npoints: int | None = None) -> list[Factor]:
    """The product of point sets consistent with the trace.

    YES intersects every factor with the query; NO(i) intersects factors
    before i with it and removes it from factor i.
    """
    space = trace.space
    k = space.n if npoints is None else npoints
    factors: list[Factor | None] = [Factor(space.whole)] * k
    for x, a in trace.queries:
        upto = k if a.yes else a.index - 1
        if not a.yes and not 1 <= a.index <= k:
            raise InconsistentTrace(f"answer index {a.index} out of range")
        for j in range(upto):
            factors[j] = factors[j].intersect_flat(x) if factors[j] is not None else None
        if not a.yes:
            j = a.index - 1
            factors[j] = factors[j].subtract_flat(x) if factors[j] is not None else None
        if any(f is None for f in factors):
            raise InconsistentTrace("no instance is consistent with the trace")
    return factors


def consistent_instances(trace: DecisionTrace, npoints: int | None = None) -> set[tuple[int, ...]]:
    """Brute-force filter of all instances through the trace."""
    space = trace.space
    k = space.n if npoints is None else npoints
    out = set()
    for pts in itertools.product(range(space.size), repeat=k):
        inst = Instance(space, pts)
        if all(oracle(inst, x) == a for x, a in trace.queries):
            out.add(pts)
    return out


@dataclass
class LeafReport:
    partition: Partition
    traces: list[DecisionTrace]
    instances: int
    max_queries: int
    mean_queries: float
    valid: bool
    max_holes_ok: bool
    all_almost_flat: bool
    not_almost_flat: list[tuple[int, int]]
    structured_bound: Fraction | None

    @property
    def bound_holds(self) -> bool | None:
        if not self.all_almost_flat or self.structured_bound is None:
            return None
        return self.partition.size >= self.structured_bound

    def to_dict(self) -> dict:
        return {
            "parts": self.partition.size,
            "instances": self.instances,
            "max_queries": self.max_queries,
            "mean_queries": self.mean_queries,
            "valid": self.valid,
            "holes_within_depth": self.max_holes_ok,
            "all_almost_flat": self.all_almost_flat,
            "not_almost_flat": [list(x) for x in self.not_almost_flat],
            "structured_bound": self.structured_bound,
            "bound_holds": self.bound_holds,
        }


LEAF_LIMIT = 10**6


def structured_lower_bound(q: int, n: int) -> Fraction | None:
    """Partition-size lower bound for parts whose factors are all almost-flats."""
    if q < 3:
        return None
    return Fraction(q) ** (n * (n + 1) // 2) * (1 - Fraction(1, q) * Fraction(q + 1, q - 2) ** n)


def leaf_partition(q: int, n: int) -> LeafReport:
    space = get_space(q, n)
    total = space.size**n
    if total > LEAF_LIMIT:
        raise TooLarge(f"{total} instances exceeds {LEAF_LIMIT}")
    leaves: dict[tuple, DecisionTrace] = {}
    counts: dict[tuple, int] = {}
    qcounts = []
    for pts in itertools.product(range(space.size), repeat=n):
        _, tr = solve_instance(Instance(space, pts))
        key = tr.key()
        leaves.setdefault(key, tr)
        counts[key] = counts.get(key, 0) + 1
        qcounts.append(len(tr.queries))
    parts = []
    holes_ok = True
    bad_af = []
    for li, (key, tr) in enumerate(leaves.items()):
        factors = induced_part(tr, n)
        h = len(tr.queries)
        for j, f in enumerate(factors):
            nos = sum(1 for _, a in tr.queries if a.index == j + 1)
            if len(f.holes) > min(nos, h):
                holes_ok = False
            if not f.is_almost_flat:
                bad_af.append((li, j))
        part = ProductPart(tuple(factors), tr.output)
        if part.size != counts[key]:
            raise InconsistentTrace("induced part disagrees with the instances reaching the leaf")
        parts.append(part)
    P = Partition(q, n, n, parts)
    rep = verify(P)
    return LeafReport(
        P,
        list(leaves.values()),
        total,
        max(qcounts),
        statistics.fmean(qcounts),
        rep.passed,
        holes_ok,
        not bad_af,
        bad_af,
        structured_lower_bound(q, n),
    )


@dataclass
class BenchRow:
    q: int
    n: int
    mean_queries: float
    max_queries: int
    bound: int
    samples: int


def bench(configs: Sequence[tuple[int, int]], samples: int = 1000, seed: int = 0) -> list[BenchRow]:
    rng = random.Random(seed)
    rows = []
    for q, n in configs:
        space = get_space(q, n)
        counts = []
        for _ in range(samples):
            inst = Instance(space, tuple(rng.randrange(space.size) for _ in range(n)))
            out, tr = solve_instance(inst)
            if any(not out.mask >> v & 1 for v in inst.points):
                raise DspanError("solver output misses a point")
            counts.append(len(tr.queries))
        rows.append(BenchRow(q, n, statistics.fmean(counts), max(counts), query_bound(q, n), samples))
    return rows


def bench_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "n", "mean_queries", "max_queries", "bound"])
    for r in rows:
        w.writerow([r.q, r.n, f"{r.mean_queries:.4f}", r.max_queries, r.bound])
    return buf.getvalue()
