"""Command-line front end: classify, transform, reduce, verify, oracle."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .corpus import COMMANDS, ProblemError, corpus_dir, load_corpus, load_problem, run_entry
from .expr import ParseError, set_default_seed

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_UNDECIDED = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="condsym", description=__doc__)
    ap.add_argument("command", choices=COMMANDS + ("oracle", "all"))
    ap.add_argument("files", nargs="*", help="problem files (default: the bundled corpus)")
    ap.add_argument("--sigma-max", type=int, default=5)
    ap.add_argument("--seed", type=int, default=None, help="seed of the probabilistic zero test")
    ap.add_argument("--format", choices=("text", "json"), default="text")
    ap.add_argument("--entry", action="append", default=[], help="run only this corpus id (repeatable)")
    ap.add_argument("--prolong-order", type=int, default=None, help="order of the invariant-surface consequences")
    ap.add_argument("--jobs", type=int, default=1, help="entries run concurrently")
    ap.add_argument("--version", action="version", version=f"condsym {__version__}")
    return ap


def _init(seed):
    if seed is not None:
        set_default_seed(seed)


def _run(args_tuple):
    prob, commands, sigma_max, prolong_order, seed = args_tuple
    _init(seed)
    return run_entry(prob, commands, sigma_max, prolong_order)


def _oracle(files, args) -> tuple[list[dict], int]:
    from .oracle import parse_oracle_problem, verify_factorization

    if not files:
        files = sorted((corpus_dir() / "oracle").glob("*.ode"))
    out, code = [], EXIT_OK
    for f in files:
        name = Path(f).stem
        if args.entry and name not in args.entry:
            continue
        p = parse_oracle_problem(Path(f).read_text(encoding="utf-8"))
        rep = verify_factorization(p).as_dict()
        want = p.expect or "pass"
        rep["id"] = name
        rep["status"] = "pass" if rep["passed"] == (want == "pass") else "fail"
        rep["expected"] = want
        if rep["status"] == "fail":
            code = EXIT_MISMATCH
        out.append(rep)
    return out, code


def _text_oracle(reports) -> str:
    lines = []
    for r in reports:
        lines.append(
            f"[{r['status'].upper()}] {r['id']}: kappa {r['kappa_residual']:.3e}, y=R*kappa {r['R_residual']:.3e}, "
            f"S*R-I {r['SR_residual']:.3e} (threshold {r['threshold']:.0e}, expected {r['expected']})"
        )
        lines += [f"    note: {n}" for n in r["notes"]]
    return "\n".join(lines)


def _text(reports) -> str:
    lines = []
    for r in reports:
        lines.append(f"== {r.id} [{r.status}] ({r.command}, {r.timing:.2f}s)")
        if r.error:
            lines.append(f"   error: {r.error}")
        for key in ("verdict", "chart", "transformed", "factor", "reduced", "lifted"):
            if key in r.results:
                val = r.results[key]
                if isinstance(val, list):
                    val = "\n      ".join(val)
                elif isinstance(val, str) and "\n" in val:
                    val = val.replace("\n", "\n      ")
                lines.append(f"   {key}: {val}")
        for c in r.checks:
            lines.append(f"   [{c.status.upper()}] {c.name}")
            if c.status != "pass" and c.detail:
                lines.append("      " + c.detail.replace("\n", "\n      "))
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    _init(args.seed)
    try:
        if args.command == "oracle":
            reports, code = _oracle(args.files, args)
            print(json.dumps({"version": __version__, "oracle": reports}, indent=2) if args.format == "json" else _text_oracle(reports))
            return code
        probs = [load_problem(f) for f in args.files] if args.files else load_corpus()
    except (ProblemError, ParseError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.entry:
        known = {p.id for p in probs}
        missing = [e for e in args.entry if e not in known]
        if missing:
            print(f"input error: unknown entry {', '.join(missing)}", file=sys.stderr)
            return EXIT_INPUT
        probs = [p for p in probs if p.id in args.entry]
    commands = COMMANDS if args.command == "all" else (args.command,)
    jobs = [(p, commands, args.sigma_max, args.prolong_order, args.seed) for p in probs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, os.cpu_count() or 1)) as ex:
            reports = list(ex.map(_run, jobs))
    else:
        reports = [_run(j) for j in jobs]
    if args.format == "json":
        print(json.dumps({"version": __version__, "seed": args.seed, "entries": [r.as_dict() for r in reports]}, indent=2, default=str))
    else:
        print(_text(reports))
    status = {r.status for r in reports}
    if "error" in status:
        return EXIT_INPUT
    if "fail" in status:
        return EXIT_MISMATCH
    if "undecided" in status:
        return EXIT_UNDECIDED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
