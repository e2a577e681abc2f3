"""Command-line front end: ``csicalc identify | verify | bench``."""

from __future__ import annotations

import argparse
import json
import sys
from importlib.resources import files
from pathlib import Path

from . import formula as F
from .bench import BenchConfig, rows_to_csv, run_bench, summarize
from .ldag import LDAGError, parse_ldag
from .oracle import verify_formula
from .search import Limits, QueryError, default_timeout, identify
from .terms import TermError

EXIT_IDENTIFIED, EXIT_NA, EXIT_LIMIT, EXIT_USAGE = 0, 1, 2, 3
STATUS_EXIT = {"identified": EXIT_IDENTIFIED, "na": EXIT_NA, "limit": EXIT_LIMIT}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def builtin_graphs() -> list[str]:
    return sorted(p.name[:-5] for p in files("csicalc.graphs").iterdir() if p.name.endswith(".ldag"))


def load_graph(spec: str):
    """Read an LDAG file; bare names of the bundled fixtures also work."""
    path = Path(spec)
    if path.exists():
        text = path.read_text()
    elif spec in builtin_graphs():
        text = files("csicalc.graphs").joinpath(spec + ".ldag").read_text()
    else:
        raise UsageError(f"graph file {spec!r} not found")
    return parse_ldag(text)


def _common(p):
    p.add_argument("--graph", required=True, help="LDAG file or bundled fixture name")
    p.add_argument("--query", required=True, help='e.g. "P(Y | do(X))"')
    p.add_argument("--input", action="append", dest="inputs", metavar="TERM",
                   help="input distribution such as 'P(X,Y,A)'; repeatable (default: all observed)")
    p.add_argument("--timeout", type=float, default=None,
                   help="seconds (default: $CSICALC_TIMEOUT or 1800)")
    p.add_argument("--max-expansions", type=int, default=None)
    p.add_argument("--strip-labels", action="store_true", help="drop all labels (plain do-calculus)")
    p.add_argument("--mode", choices=("combined", "fullcs"), default="combined")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csicalc", description="Causal effect identification on labeled DAGs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("identify", help="search for an identifying formula")
    _common(p)
    p.add_argument("--latex", action="store_true", help="print the formula as LaTeX")
    p.add_argument("--json", action="store_true", help="print the formula AST as JSON")
    p.add_argument("--trace", metavar="FILE", help="write the derivation as a DOT digraph")
    p.add_argument("--records", metavar="FILE",
                   help="write the derivation as 'term | rule | parents | csi' lines")
    p.add_argument("--stats", action="store_true", help="print search counters to stderr")

    p = sub.add_parser("verify", help="check a formula against random models")
    _common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--formula", metavar="FILE",
                   help="verify this plain-text formula instead of searching for one")

    p = sub.add_parser("bench", help="run the random-LDAG benchmark")
    p.add_argument("--bench", default="", metavar="SETTINGS",
                   help="comma-separated overrides, e.g. n=7,instances=100,seed=1")
    p.add_argument("--csv", metavar="FILE", help="write rows here instead of stdout")
    return parser


def _identify(args, g):
    limits = Limits(timeout=args.timeout if args.timeout is not None else default_timeout(),
                    max_expansions=args.max_expansions)
    return identify(g, args.query, args.inputs, limits=limits, mode=args.mode,
                    strip=args.strip_labels)


def cmd_identify(args) -> int:
    g = load_graph(args.graph)
    res = _identify(args, g)
    if args.stats:
        print(json.dumps({"status": res.status, **res.stats.as_dict()}, sort_keys=True),
              file=sys.stderr)
    if not res.identified:
        print("NA" if res.status == "na" else "unknown (limit)")
        return STATUS_EXIT[res.status]
    if args.json:
        print(F.dumps(res.formula, res.graph))
    else:
        print(res.render("latex" if args.latex else "plain"))
    if args.trace:
        Path(args.trace).write_text(res.to_dot())
    if args.records:
        Path(args.records).write_text("\n".join(res.trace_lines()) + "\n")
    return EXIT_IDENTIFIED


def cmd_verify(args) -> int:
    g = load_graph(args.graph)
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    if args.formula:
        from .search import parse_query
        query = parse_query(args.query, g)
        f = F.parse_formula(Path(args.formula).read_text(), g)
        inputs = None
    else:
        res = _identify(args, g)
        if not res.identified:
            print("NA" if res.status == "na" else "unknown (limit)")
            return STATUS_EXIT[res.status]
        print(res.render())
        f, query, inputs = res.formula, res.query, list(res.inputs)
    rep = verify_formula(g, f, query, inputs=inputs, trials=args.trials, tol=args.tol,
                         seed=args.seed)
    for line in rep.lines():
        print(line)
    return EXIT_IDENTIFIED if rep.passed else EXIT_NA


def cmd_bench(args) -> int:
    cfg = BenchConfig.parse(args.bench)
    rows = run_bench(cfg)
    text = rows_to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    print(json.dumps(summarize(rows), sort_keys=True), file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"identify": cmd_identify, "verify": cmd_verify, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except (UsageError, QueryError, TermError, LDAGError, F.FormulaSyntaxError, ValueError,
            OSError) as exc:
        print(f"csicalc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
