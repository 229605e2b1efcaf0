"""``ppx`` command line: run a recipe from a manifest and write CSV outputs.

Every run writes its CSVs, the resolved ``manifest.json`` (all defaults
filled in, overrides applied) and ``run.json`` (seed, versions, wall time)
into the output directory. CSVs depend only on the manifest, never on the
thread count.

Exit codes: 0 success, 1 invalid input, 2 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import pydantic
import scipy

from . import cognet, netsim, ops, ordering
from . import manifest as mf
from . import pointproc as pp
from .errors import CapExceededError, NumericalGuardError, SpecError
from .rng import generator, resolve_threads


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return "%.12g" % v


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _db(values) -> np.ndarray:
    return 10.0 ** (np.asarray(values, dtype=float) / 10.0)


# ---------------------------------------------------------------------------
# recipe runners; each returns the list of files it wrote


def run_generate(m: mf.ExperimentManifest, out: Path, threads: int) -> list[Path]:
    r = m.recipe
    pattern = _sample(r.spec, r.window, m.seed, r.max_points)
    cols = ["x", "y", "z"][: r.window.dim]
    path = out / "pattern.csv"
    write_csv(path, cols, pattern)
    side = out / "pattern.spec.json"
    side.write_text(
        json.dumps(
            {
                "spec": r.spec.model_dump(mode="json", by_alias=True),
                "window": r.window.model_dump(mode="json"),
                "seed": m.seed,
                "spec_id": pp.spec_id(r.spec),
                "points": len(pattern),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
        newline="\n",
    )
    return [path, side]


def _sample(spec, window, seed, max_points) -> np.ndarray:
    if isinstance(spec, (ops.Marked, ops.Thinned, ops.Translated, ops.Superposed)):
        # lifted processes: same stream as pointproc.sample, cap checked on the result
        pts = spec.draw(window, generator(seed))
        if len(pts) > max_points:
            raise CapExceededError(f"{len(pts)} points exceed the cap of {max_points}")
        return pts
    return pp.sample(spec, window, seed, max_points).points


def run_lf(m: mf.ExperimentManifest, out: Path, threads: int) -> list[Path]:
    r = m.recipe
    names = [u.describe() for u in r.family]
    est = {
        p.label: ordering.lf_mc_family(p.spec, list(r.family), r.window, m.reps, m.seed, threads)
        for p in r.processes
    }
    lf_path = out / "lf.csv"
    write_csv(
        lf_path,
        ["process", "function", "mean", "se"],
        ((label, name, e.mean, e.std_error) for label, es in est.items() for name, e in zip(names, es)),
    )
    rows = []
    for i, j in r.pairs:
        a, b = r.processes[i].label, r.processes[j].label
        rep = ordering.OrderReport(
            names,
            [e.mean for e in est[a]],
            [e.std_error for e in est[a]],
            [e.mean for e in est[b]],
            [e.std_error for e in est[b]],
            z=r.z,
            lhs_label=a,
            rhs_label=b,
        )
        for g, v, d in zip(rep.grid, rep.verdicts, rep.diff):
            rows.append((a, b, g, d, v, rep.overall))
    order_path = out / "order.csv"
    write_csv(order_path, ["lhs", "rhs", "function", "diff", "verdict", "overall"], rows)
    return [lf_path, order_path]


def run_ltorder(m: mf.ExperimentManifest, out: Path, threads: int) -> list[Path]:
    r = m.recipe
    t = list(r.t_grid)
    table = out / "pgf.csv"
    write_csv(
        table,
        ["t"] + [d.label for d in r.distributions],
        ([tv] + [float(d.dist.pgf(tv)) for d in r.distributions] for tv in t),
    )
    rows = []
    for a, b in zip(r.distributions, r.distributions[1:]):
        rep = ordering.lt_order_check(a.dist, b.dist, t, labels=(a.label, b.label))
        for g, v, d in zip(rep.grid, rep.verdicts, rep.diff):
            rows.append((a.label, b.label, g, d, v, rep.overall))
    order = out / "order.csv"
    write_csv(order, ["lhs", "rhs", "argument", "diff", "verdict", "overall"], rows)
    return [table, order]


def run_coverage(m: mf.ExperimentManifest, out: Path, threads: int) -> list[Path]:
    r = m.recipe
    T = _db(r.thresholds_db)
    rows = []
    for u in r.users:
        cfg = netsim.NetworkConfig(
            bs_spec=r.bs_spec, ms_spec=u.spec, window=r.window,
            pathloss=r.pathloss, fading=r.fading, noise=r.noise,
        )
        curve = netsim.total_cell_coverage(cfg, T, m.reps, m.seed, threads, label=u.label)
        for (t, kind, mean, se), db in zip(curve.rows(), np.repeat(r.thresholds_db, 2)):
            rows.append((u.label, db, t, kind, mean, se))
    path = out / "coverage.csv"
    write_csv(path, ["users", "T_db", "T", "estimator", "mean", "se"], rows)
    return [path]


def run_spatial(m: mf.ExperimentManifest, out: Path, threads: int) -> list[Path]:
    r = m.recipe
    rows = []
    for b in r.bs:
        res = netsim.spatial_coverage(
            b.spec, r.radius, r.window, m.reps, m.seed, probes=r.probes, t_grid=r.t_grid,
            threads=threads, label=b.label,
        )
        for quantity, t, mean, se in res.rows():
            rows.append((b.label, quantity, "" if np.isnan(t) else t, mean, se))
    path = out / "spatial.csv"
    write_csv(path, ["bs", "quantity", "t", "mean", "se"], rows)
    return [path]


def run_cognitive(m: mf.ExperimentManifest, out: Path, threads: int) -> list[Path]:
    r = m.recipe
    study = cognet.pu_sir_study(
        r.schemes, r.config, m.reps, m.seed, sir_grid=_db(r.sir_db), s_grid=r.s_grid, threads=threads
    )
    ccdf = out / "ccdf.csv"
    write_csv(
        ccdf,
        ["scheme", "sir_db", "sir", "ccdf", "se"],
        (
            (res.scheme.label, db, s, e.mean, e.std_error)
            for res in study.results
            for db, s, e in zip(r.sir_db, study.sir_grid, res.ccdf)
        ),
    )
    summary = out / "summary.csv"
    write_csv(
        summary,
        ["scheme", "mean_interference", "se_interference", "analytic_interference",
         "mean_sum_rate", "se_sum_rate", "truncation_probability"],
        (
            (res.scheme.label, res.interference.mean, res.interference.std_error,
             study.analytic_interference[res.scheme.label], res.rate.mean, res.rate.std_error,
             res.truncation)
            for res in study.results
        ),
    )
    laplace = out / "laplace.csv"
    write_csv(
        laplace,
        ["scheme", "s", "mean", "se"],
        (
            (res.scheme.label, s, e.mean, e.std_error)
            for res in study.results
            for s, e in zip(study.s_grid, res.laplace)
        ),
    )
    rows = []
    for (a, b), rep in study.reports.items():
        for g, v, d in zip(rep.grid, rep.verdicts, rep.diff):
            rows.append((a, b, g, d, v, rep.overall))
    order = out / "order.csv"
    write_csv(order, ["lhs", "rhs", "argument", "diff", "verdict", "overall"], rows)
    return [ccdf, summary, laplace, order]


RUNNERS = {
    "generate": run_generate,
    "lf": run_lf,
    "ltorder": run_ltorder,
    "coverage": run_coverage,
    "spatial": run_spatial,
    "cognitive": run_cognitive,
}


# ---------------------------------------------------------------------------
# entry point


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "ppx": own,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def resolve(args) -> mf.ExperimentManifest:
    if args.manifest:
        m = mf.load(args.manifest)
        if m.recipe.kind != args.command:
            raise SpecError(f"manifest recipe is {m.recipe.kind!r}, not {args.command!r}")
    else:
        m = mf.ExperimentManifest.default(args.command)
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.reps is not None:
        update["reps"] = args.reps
    if args.out is not None:
        update["out"] = args.out
    if update:
        # re-validate so overrides obey the same bounds as the file
        m = mf.ExperimentManifest.model_validate({**m.model_dump(), **update})
    return m


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "sample one pattern and dump it",
        "lf": "Laplace functional estimates and order reports",
        "ltorder": "exact PGF order tables",
        "coverage": "total-cell coverage curves",
        "spatial": "spatial coverage and its PGF",
        "cognitive": "SU selection study: PU SIR, interference, sum rate",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--manifest", help="experiment manifest (JSON); defaults to the canned recipe")
        p.add_argument("--seed", type=int, help="override the manifest seed")
        p.add_argument("--reps", type=int, help="override the replication count")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--threads", type=int, help="worker threads (default: $PPX_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        m = resolve(args)
        threads = resolve_threads(args.threads)
        out = Path(m.out)
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        files = RUNNERS[args.command](m, out, threads)
        wall = time.perf_counter() - start
    except json.JSONDecodeError as exc:
        print(f"error: {args.manifest}: line {exc.lineno} column {exc.colno}: {exc.msg}", file=sys.stderr)
        return 1
    except pydantic.ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or str(args.manifest)
            print(f"error: {loc}: {err['msg']}", file=sys.stderr)
        return 1
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 2
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    mf.save(m, out / "manifest.json")
    (out / "run.json").write_text(
        json.dumps(
            {
                "command": args.command,
                "name": m.name,
                "seed": m.seed,
                "reps": m.reps,
                "threads": threads,
                "wall_seconds": wall,
                "versions": _versions(),
                "outputs": [p.name for p in files],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
        newline="\n",
    )
    for p in files:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
