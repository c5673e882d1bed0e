"""Command-line entry point: ``projpart <command> [options]``.

Every command prints (or writes to ``--out``) one JSON report, or a CSV table
with ``--format csv`` where a table makes sense.  Failures exit nonzero with a
JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from fractions import Fraction

from . import claims, dependence, dspan, partition, search
from .gfq import field_make
from .projgeom import bits, count_flats, get_space, point_count
from .reports import dumps, envelope, error_record, to_jsonable


class CliError(ValueError):
    pass


# bounds


def bound_table(q: int, n: int, k: int) -> dict:
    field_make(q)
    row = {
        "q": q,
        "n": n,
        "k": k,
        "points": point_count(n, q),
        "trivial_upper": point_count(n, q) ** k,
        "trivial_lower": count_flats(n, k - 1, q),
        "volume_lower": partition.volume_lower_bound(q, n, k),
        "power_size": partition.power_partition_size(q, n, k),
    }
    if k == n:
        row["structured_lower"] = dspan.structured_lower_bound(q, n)
        if q >= 2 * n:
            row["power_formula_upper"] = Fraction(q ** (n * (n + 1) // 2)) * (1 + Fraction(2 * n, q))
    return row


def _table_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([to_jsonable(r.get(c, "")) for c in cols])
    return buf.getvalue()


def _scalars_csv(result: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in sorted(result.items()):
        v = to_jsonable(v)
        if not isinstance(v, (dict, list)):
            w.writerow([k, v])
    return buf.getvalue()


# commands; each returns (report dict, csv text or None)


def cmd_construct(a) -> tuple[dict, str | None]:
    k = a.k or a.n
    kind = a.kind or ("plane" if a.n == 2 and k == 2 else "power")
    if kind == "plane":
        if a.n != 2 or k != 2:
            raise CliError("the plane construction is for n = k = 2")
        P = partition.construct_plane_partition(a.q)
    else:
        P = partition.construct_power_partition(a.q, a.n, k)
    rep = partition.verify(P, samples=a.samples, seed=a.seed)
    result = {
        "kind": kind,
        "size": P.size,
        "expected_size": partition.power_partition_size(a.q, a.n, k),
        "verify": rep.to_dict(),
        "partition": P.to_dict(),
    }
    cfg = {"q": a.q, "n": a.n, "k": k, "kind": kind}
    return envelope("construct", cfg, result, rep.mode, rep.seed), P.summary_csv()


def _load_partition(path: str) -> partition.Partition:
    with open(path) as fh:
        data = json.load(fh)
    if "result" in data and isinstance(data["result"], dict):
        data = data["result"].get("partition", data["result"])
    if "parts" not in data:
        raise CliError(f"{path} holds no partition")
    return partition.Partition.from_dict(data)


def cmd_verify(a) -> tuple[dict, str | None]:
    P = _load_partition(a.file)
    rep = partition.verify(P, samples=a.samples, seed=a.seed)
    result = {"size": P.size, "verify": rep.to_dict()}
    cfg = {"file": os.path.basename(a.file), "q": P.q, "n": P.n, "k": P.k}
    return envelope("verify", cfg, result, rep.mode, rep.seed), _scalars_csv({"size": P.size, **rep.to_dict()})


def cmd_bounds(a) -> tuple[dict, str | None]:
    rows = [bound_table(q, n, a.k or n) for q in a.q for n in a.n]
    cfg = {"q": a.q, "n": a.n, "k": a.k}
    return envelope("bounds", cfg, {"rows": rows}), _table_csv(rows)


def cmd_dependent(a) -> tuple[dict, str | None]:
    k = a.k or a.n
    space = get_space(a.q, a.n)
    factors = [space.whole.mask] * k
    c = dependence.count_dependent(
        space,
        factors,
        sample_size=a.samples,
        seed=a.seed,
        workers=a.workers,
        exact_limit=0 if a.sampled else dependence.EXACT_LIMIT,
    )
    result = {**c.to_dict(), "fraction": c.fraction}
    if k == a.n:
        lo, hi = dependence.fraction_bounds(a.q, a.n)
        result.update(lower=lo, upper=hi)
        if c.mode == "exhaustive":
            result["holds"] = lo <= c.fraction <= hi
    cfg = {"q": a.q, "n": a.n, "k": k}
    seed = c.seed if c.mode == "sampled" else None
    return envelope("dependent", cfg, result, c.mode, seed), _scalars_csv(result)


def cmd_lemma(a) -> tuple[dict, str | None]:
    which = a.lemma
    mode, seed = "exhaustive", None
    if which == "sylvester":
        r = dependence.sylvester_sweep(a.q, a.n)
        result = {"families": r.families, "max_points": r.max_points, "holds": r.holds, "violations": r.violations}
        cfg = {"q": a.q, "n": a.n}
    elif which == "lines":
        r = dependence.lines_bound_sweep(a.q, a.n)
        result = {
            "families": r.families,
            "min_count": r.min_count,
            "bound": r.bound,
            "holds": r.holds,
            "argmin": [sorted(bits(m)) for m in r.argmin],
        }
        cfg = {"q": a.q, "n": a.n}
    elif which == "gp":
        m, cover = dependence.biclique_search(a.n)
        result = {"minimum": m, "expected": a.n, "holds": m == a.n, "cover_size": len(cover)}
        cfg = {"n": a.n}
    elif which in ("surgery", "almostflat"):
        if a.n < 2:
            raise CliError("need at least two factors")
        space = get_space(a.q, a.n - 1)
        rng = random.Random(a.seed)
        mode, seed = "sampled", a.seed
        worst = None
        bad = 0
        for _ in range(a.trials):
            if which == "surgery":
                sr = dependence.surgery_reduce(claims.random_surgery_part(space, rng))
                if sr.after > sr.before:
                    bad += 1
                gap = sr.before - sr.after
            else:
                rep = dependence.almostflat_fraction_check(claims.random_nondominated_part(space, rng))
                if not rep.holds or not rep.quotient_matches:
                    bad += 1
                gap = min(rep.direct, rep.pipeline) - rep.bound
            worst = gap if worst is None else min(worst, gap)
        result = {"trials": a.trials, "violations": bad, "holds": bad == 0, "min_margin": worst}
        if which == "almostflat":
            result["bound"] = dependence.almostflat_bound(a.q, a.n)
        cfg = {"q": a.q, "n": a.n, "trials": a.trials}
    elif which == "quotient-claims":
        space = get_space(a.q, a.n)
        reps = [claims.check_invariance_dependence(space), claims.check_intersection_size(space)]
        if a.trials:
            mode, seed = "sampled", a.seed
            reps.append(claims.check_dependence_prop_eq_random(space, a.trials, a.seed))
        else:
            reps.append(claims.check_dependence_prop_eq(space))
        result = {"claims": [r.to_dict() for r in reps], "holds": all(r.holds for r in reps)}
        cfg = {"q": a.q, "n": a.n, "trials": a.trials}
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown lemma {which}")
    return envelope(f"lemma {which}", cfg, result, mode, seed), _scalars_csv(result)


def cmd_dspan(a) -> tuple[dict, str | None]:
    if a.action == "solve":
        space = get_space(a.q, a.n)
        pts = tuple(a.points) if a.points else tuple(random.Random(a.seed).randrange(space.size) for _ in range(a.n))
        if any(not 0 <= p < space.size for p in pts):
            raise CliError(f"point indices must lie in [0, {space.size})")
        out, tr = dspan.solve_instance(dspan.Instance(space, pts))
        result = {
            "points": list(pts),
            "output": out,
            "queries": len(tr.queries),
            "bound": dspan.query_bound(a.q, a.n),
            "trace": tr.to_dict(),
        }
        return envelope("dspan solve", {"q": a.q, "n": a.n}, result), _scalars_csv(result)
    if a.action == "sweep":
        rep = dspan.leaf_partition(a.q, a.n)
        result = {**rep.to_dict(), "bound": dspan.query_bound(a.q, a.n)}
        return envelope("dspan sweep", {"q": a.q, "n": a.n}, result), rep.partition.summary_csv()
    configs = [tuple(int(x) for x in c.split(",")) for c in a.config]
    rows = dspan.bench(configs, samples=a.samples or 1000, seed=a.seed)
    result = {"rows": [dict(vars(r), ratio=r.mean_queries / (r.q * r.n * r.n)) for r in rows]}
    cfg = {"configs": a.config, "samples": a.samples or 1000}
    return envelope("dspan bench", cfg, result, "sampled", a.seed), dspan.bench_csv(rows)


def cmd_search(a) -> tuple[dict, str | None]:
    r = search.search_min_partition(a.q, a.node_limit)
    P = r.partition()
    rep = partition.verify(P)
    result = {**r.to_dict(), "verify": rep.to_dict(), "partition": P.to_dict()}
    return envelope("search", {"q": a.q, "node_limit": a.node_limit}, result), P.summary_csv()


# parser


GLOBAL_DEFAULTS = {"workers": None, "out": None, "format": "json", "seed": 0}


def _common() -> argparse.ArgumentParser:
    # defaults are suppressed so flags given before the subcommand survive
    c = argparse.ArgumentParser(add_help=False)
    g = c.add_argument_group("global options")
    g.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker processes (env PROJPART_WORKERS)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="write the report here instead of stdout")
    g.add_argument("--format", choices=["json", "csv"], default=argparse.SUPPRESS)
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = argparse.ArgumentParser(prog="projpart", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("construct", parents=[common], help="build and verify a partition")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--k", type=int)
    s.add_argument("--kind", choices=["plane", "power"])
    s.add_argument("--samples", type=int, default=10000, help="sample size when verification cannot be exhaustive")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("verify", parents=[common], help="verify a partition JSON file")
    s.add_argument("file")
    s.add_argument("--samples", type=int, default=10000)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("bounds", parents=[common], help="table of partition-size bounds")
    s.add_argument("--q", type=int, nargs="+", required=True)
    s.add_argument("--n", type=int, nargs="+", default=[2])
    s.add_argument("--k", type=int)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("dependent", parents=[common], help="count dependent k-tuples of F_q P^n")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--samples", type=int, help="sample size used if the product is too large (or with --sampled)")
    s.add_argument("--sampled", action="store_true", help="force sampling")
    s.set_defaults(func=cmd_dependent)

    s = sub.add_parser("lemma", parents=[common], help="finite checks of the structural lemmas")
    s.add_argument("lemma", choices=["sylvester", "lines", "gp", "surgery", "almostflat", "quotient-claims"])
    s.add_argument("--q", type=int, default=3)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--trials", type=int, default=0, help="random trials (surgery, almostflat, sampled claims)")
    s.set_defaults(func=cmd_lemma)

    s = sub.add_parser("dspan", parents=[common], help="the hyperplane-oracle game")
    s.add_argument("action", choices=["solve", "sweep", "bench"])
    s.add_argument("--q", type=int, default=2)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--points", type=int, nargs="+", help="hidden point indices for solve")
    s.add_argument("--config", nargs="+", default=["2,3", "3,3", "5,3", "3,4"], help="q,n pairs for bench")
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_dspan)

    s = sub.add_parser("search", parents=[common], help="bounded search for small plane partitions")
    s.add_argument("--q", type=int, default=2)
    s.add_argument("--node-limit", type=int, default=200_000)
    s.set_defaults(func=cmd_search)
    return p


def _check(a) -> None:
    for name in ("trials", "samples", "node_limit"):
        v = getattr(a, name, None)
        if v is not None and v < 0:
            raise CliError(f"--{name.replace('_', '-')} must be non-negative")
    if getattr(a, "lemma", None) in ("surgery", "almostflat") and not a.trials:
        a.trials = 100


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    for name, default in GLOBAL_DEFAULTS.items():
        if not hasattr(a, name):
            setattr(a, name, default)
    if a.workers is None:
        a.workers = int(os.environ.get("PROJPART_WORKERS", "1"))
    try:
        _check(a)
        report, table = a.func(a)
    except (ValueError, ArithmeticError, OSError, KeyError) as exc:
        sys.stderr.write(json.dumps(error_record(exc, a.command), sort_keys=True) + "\n")
        return 1
    text = table if a.format == "csv" and table is not None else dumps(report)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
