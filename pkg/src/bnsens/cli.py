"""Command line interface.

Subcommands: ``prep``, ``learn``, ``sweep``, ``decompose``, ``select`` and
``rerun``.  Every run writes ``manifest.json`` into its output directory;
``rerun MANIFEST`` repeats the run from it.  Exit codes: 0 success, 1
runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import (CSV_HEADER, AlphaGrid, candidate_set_from_sweep, compare_selections,
                       summarize, sweep)
from .data import ColumnOverride, PreprocessSpec, load_csv, encode, load_dataset, write_encoded
from .equivalence import equivalence_key
from .errors import BnsensError
from .io import fmt_float, write_csv, write_json
from .scoring import arc_delta, count_sufficient_stats, local_log_bdeu
from .search import MAX_VARS, SubsetCounts, compute_local_score_table, learn_map

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _grid(text: str) -> AlphaGrid:
    try:
        return AlphaGrid.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError("alpha must be positive and finite")
    return v


def _arity(text: str) -> tuple[str, int]:
    name, sep, value = text.rpartition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=ARITY, got {text!r}")
    try:
        return name, int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"arity must be an integer: {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnsens",
        description="Exact BDeu structure learning and equivalent sample size sensitivity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", required=True, help="CSV file (raw, or encoded with a .json sidecar)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--bins", type=int, default=3, help="equal-width bins for numeric columns")
    common.add_argument("--seed", type=int, default=None, help="imputation seed")
    common.add_argument("--categorical", type=_names, default=[], metavar="NAMES",
                        help="comma separated columns forced categorical")
    common.add_argument("--numeric", type=_names, default=[], metavar="NAMES",
                        help="comma separated columns forced numeric")
    common.add_argument("--arity", type=_arity, action="append", default=[], metavar="NAME=R",
                        help="force the arity of a column (repeatable)")
    common.add_argument("--formats", type=_names, default=["json", "csv", "dot"],
                        help="output formats to write (json,csv,dot)")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--max-parents", type=int, default=None)
    search.add_argument("--max-vars", type=int, default=MAX_VARS,
                        help="refuse exact search above this many variables")
    search.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    sub.add_parser("prep", parents=[common], help="discretize, impute and encode a CSV")

    p = sub.add_parser("learn", parents=[common, search], help="learn the MAP network for one alpha")
    p.add_argument("--alpha", type=_positive_float, required=True)
    p.add_argument("--dump-scores", action="store_true", help="also write scores.csv")

    p = sub.add_parser("sweep", parents=[common, search], help="MAP networks over an alpha grid")
    p.add_argument("--alphas", type=_grid, required=True,
                   help="log:a:b:n, lin:a:b:n, int:a:b or list:x,y,...")

    p = sub.add_parser("decompose", parents=[common],
                       help="penalty/gain decomposition of adding one arc")
    p.add_argument("--child", required=True)
    p.add_argument("--parents", type=_names, default=[])
    p.add_argument("--new-parent", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha", type=_positive_float)
    g.add_argument("--alpha-grid", type=_grid)

    p = sub.add_parser("select", parents=[common, search],
                       help="choose alpha by integrating it out or by maximization")
    p.add_argument("--method", choices=["integrate", "maximize", "both"], default="both")
    p.add_argument("--alphas", type=_grid, default=AlphaGrid.integers(1, 100))

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output directory (default: the manifest's)")
    return parser


class Run:
    """Output directory bookkeeping for one subcommand invocation."""

    def __init__(self, args, argv):
        self.args = args
        self.out = Path(args.out)
        self.formats = set(getattr(args, "formats", ["json", "csv", "dot"]))
        self.outputs: list[str] = []
        self.argv = _strip_out(argv)

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats

    def json(self, name: str, obj, force: bool = False):
        if force or self.wants("json"):
            write_json(self.out / name, obj)
            self.outputs.append(name)

    def csv(self, name: str, header, rows):
        if self.wants("csv"):
            write_csv(self.out / name, header, rows)
            self.outputs.append(name)

    def dag(self, stem: str, dag, names):
        if self.wants("json"):
            self.json(stem + ".json", dag.to_dict(names))
        if self.wants("dot"):
            from .io import atomic_write_text
            atomic_write_text(self.out / (stem + ".dot"), dag.to_dot(names))
            self.outputs.append(stem + ".dot")

    def manifest(self, results: dict):
        config = {k: _jsonable(v) for k, v in sorted(vars(self.args).items())
                  if k not in ("out", "threads")}
        doc = {"schema_version": SCHEMA_VERSION, "tool": "bnsens", "version": __version__,
               "command": self.args.command, "argv": self.argv, "config": config,
               "results": results, "outputs": sorted(self.outputs)}
        write_json(self.out / "manifest.json", doc)


def _strip_out(argv):
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        out.append(tok)
    return out


def _jsonable(v):
    if isinstance(v, AlphaGrid):
        return v.descriptor
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _spec(args) -> PreprocessSpec:
    overrides: dict[str, dict] = {}
    for name in args.categorical:
        overrides.setdefault(name, {})["kind"] = "categorical"
    for name in args.numeric:
        if overrides.get(name, {}).get("kind"):
            raise UsageError(f"column {name!r} forced both numeric and categorical")
        overrides.setdefault(name, {})["kind"] = "numeric"
    for name, r in args.arity:
        overrides.setdefault(name, {})["arity"] = r
    try:
        return PreprocessSpec(args.bins, args.seed,
                              {k: ColumnOverride(**v) for k, v in overrides.items()})
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_prep(run: Run):
    spec = _spec(run.args)
    dataset = encode(load_csv(run.args.data), spec)
    write_encoded(dataset, run.out / "encoded.csv", spec)
    run.outputs += ["encoded.csv", "encoded.json"]
    run.manifest({"n_rows": dataset.n_rows, "n_vars": dataset.n_vars,
                  "arities": list(dataset.arities)})


def cmd_learn(run: Run):
    args = run.args
    data = load_dataset(args.data, _spec(args))
    counts = SubsetCounts(data, None if args.max_parents is None else args.max_parents + 1,
                          max_vars=args.max_vars)
    dag, score = learn_map(data, args.alpha, args.max_parents, counts=counts)
    run.dag("dag", dag, data.column_names)
    if args.dump_scores:
        table = compute_local_score_table(data, args.alpha, args.max_parents, counts=counts)
        run.csv("scores.csv", ["variable", "parent_mask", "log_score"],
                ([i, m, fmt_float(s)] for i, m, s in table.entries()))
    run.manifest({"alpha": args.alpha, "log_score": score, "arc_count": dag.arc_count()})


def cmd_sweep(run: Run):
    args = run.args
    data = load_dataset(args.data, _spec(args))
    result = sweep(data, args.alphas, args.max_parents, threads=args.threads,
                   max_vars=args.max_vars)
    run.csv("sweep.csv", CSV_HEADER, result.csv_rows())
    summary = summarize(result)
    run.json("summary.json", {"schema_version": SCHEMA_VERSION, "grid": args.alphas.descriptor,
                              **summary.to_dict()}, force=True)
    for m, dag in enumerate(candidate_set_from_sweep(result)):
        run.json(f"models/model_{m:03d}.json", dag.to_dict(data.column_names), force=True)
    run.manifest(summary.to_dict())


def cmd_decompose(run: Run):
    args = run.args
    data = load_dataset(args.data, _spec(args))
    try:
        child = data.index_of(args.child)
        parents = sorted({data.index_of(p) for p in args.parents})
        new_parent = data.index_of(args.new_parent)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    if child in parents:
        raise UsageError("--child is listed among --parents")
    if new_parent == child or new_parent in parents:
        raise UsageError("--new-parent must differ from the child and the current parents")
    alphas = [args.alpha] if args.alpha is not None else list(args.alpha_grid.values)

    before = count_sufficient_stats(data, child, parents)
    after = count_sufficient_stats(data, child, parents + [new_parent])
    r, q, K = data.arities[child], before.q, data.arities[new_parent]
    decomps, pen_rows, gain_rows = [], [], []
    for a in alphas:
        d = arc_delta(data, child, parents, new_parent, a)
        doc = d.to_dict()
        doc["local_score_difference"] = local_log_bdeu(after, a) - local_log_bdeu(before, a)
        decomps.append(doc)
        pen_rows.append([fmt_float(a), fmt_float(a / (q * r)),
                         fmt_float(d.penalty_per_config), fmt_float(d.total_penalty)])
        gain_rows.append([fmt_float(a), fmt_float(a / q)] + [fmt_float(g) for g in d.gains]
                         + [fmt_float(d.net)])
    names = data.column_names
    run.json("decomposition.json", {
        "schema_version": SCHEMA_VERSION, "child": names[child],
        "parents": [names[p] for p in parents], "new_parent": names[new_parent],
        "r": r, "q": q, "K": K, "decompositions": decomps}, force=True)
    run.csv("penalty_curve.csv",
            ["alpha", "alpha_per_cell", "penalty_per_config", "total_penalty"], pen_rows)
    run.csv("gain_curve.csv",
            ["alpha", "alpha_per_config"] + [f"gain_{j}" for j in range(q)] + ["net"], gain_rows)
    run.manifest({"r": r, "q": q, "K": K,
                  "net": decomps[0]["net"] if len(decomps) == 1 else None})


def cmd_select(run: Run):
    args = run.args
    data = load_dataset(args.data, _spec(args))
    result = sweep(data, args.alphas, args.max_parents, threads=args.threads,
                   max_vars=args.max_vars)
    report = compare_selections(data, result)
    post = report.posterior
    names = data.column_names
    refs = []
    for m, dag in enumerate(post.candidates):
        ref = f"models/model_{m:03d}.json"
        run.json(ref, dag.to_dict(names), force=True)
        refs.append(ref)
    results = {"agree": report.agree}
    if args.method in ("integrate", "both"):
        run.json("posterior.json", {
            "schema_version": SCHEMA_VERSION, "grid": args.alphas.descriptor,
            "candidates": refs, "posterior": post.posterior.tolist(),
            "log_evidence": post.log_evidence.tolist(), "winner": refs[post.best],
            "alpha_integrated": report.alpha_integrated,
            "agrees_with_maximization": report.agree}, force=True)
        run.dag("posterior_winner", post.winner, names)
        results["winner"] = refs[post.best]
        results["alpha_integrated"] = report.alpha_integrated
    if args.method in ("maximize", "both"):
        star_ref = refs[post.keys.index(equivalence_key(report.star_dag))]
        run.json("selection.json", {
            "schema_version": SCHEMA_VERSION, "grid": args.alphas.descriptor,
            "alpha_star": report.alpha_star, "log_score": report.star_score,
            "dag": star_ref, "alpha_integrated": report.alpha_integrated,
            "agrees_with_integration": report.agree}, force=True)
        run.dag("selected", report.star_dag, names)
        results["alpha_star"] = report.alpha_star
        results["log_score"] = report.star_score
    run.manifest(results)


COMMANDS = {"prep": cmd_prep, "learn": cmd_learn, "sweep": cmd_sweep,
            "decompose": cmd_decompose, "select": cmd_select}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "rerun":
        try:
            manifest_path = Path(args.manifest)
            doc = json.loads(manifest_path.read_text())
            old_argv = list(doc["argv"])
        except (OSError, ValueError, KeyError) as exc:
            print(f"error [io]: cannot read manifest: {exc}", file=sys.stderr)
            return 1
        out = args.out or str(manifest_path.parent)
        return main(old_argv + ["--out", out])

    run = Run(args, argv)
    try:
        COMMANDS[args.command](run)
    except UsageError as exc:
        parser.error(str(exc))
    except BnsensError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
