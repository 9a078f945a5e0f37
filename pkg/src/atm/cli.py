"""``atm`` command line: validate, footprint, analyze, whatif, kb.

Exit codes: 0 success, 1 semantic or input error, 2 I/O error. Diagnostics
go to standard error; documents go to ``--out`` or standard output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from atm import __version__
from atm.footprint import AdversaryFootprint, PropagationError, compute_footprint, footprint_from_dict
from atm.kb import SEED_KB_DIR, KnowledgeBase, lint_kb, load_kb_paths
from atm.matcher import DEFAULT_VECTOR_CAP, chain_analyze, map_threats
from atm.mitigation import what_if, what_if_delta
from atm.model import ModelError, SystemModel, model_to_dict, parse_model, stage_presence_lint, validate_model
from atm.report import FORMATS, render_graph, render_machine, render_markdown, to_dict

EXIT_OK, EXIT_SEMANTIC, EXIT_IO = 0, 1, 2
KB_ENV = "ATM_KB_PATH"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_SEMANTIC) -> None:
        self.code = code
        super().__init__(message)


def _err(text: str) -> None:
    print(text, file=sys.stderr)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None


def _load_model(path: str, lint: bool = False) -> SystemModel:
    m = parse_model(_read(path))
    diags = validate_model(m) + (stage_presence_lint(m) if lint else [])
    for d in diags:
        _err(str(d))
    if any(d.is_error for d in diags):
        raise CliError(f"{path}: model has errors")
    return m


def kb_paths(cli_paths: Optional[Sequence[str]]) -> list[str]:
    """``--kb`` wins, then ``ATM_KB_PATH``, then the shipped seed KB."""
    if cli_paths:
        return list(cli_paths)
    env = os.environ.get(KB_ENV, "")
    parts = [p for p in env.split(os.pathsep) if p]
    return parts or [str(SEED_KB_DIR)]


def _load_kb(cli_paths: Optional[Sequence[str]]) -> KnowledgeBase:
    try:
        return load_kb_paths(kb_paths(cli_paths))
    except OSError as exc:
        raise CliError(f"cannot read KB: {exc}", EXIT_IO) from None


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror or exc}", EXIT_IO) from None


def model_digest(m: SystemModel) -> str:
    canonical = json.dumps(model_to_dict(m), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()


def _cached_footprint(m: SystemModel, adversary: str, out: str) -> AdversaryFootprint:
    """Footprint from ``<out>.footprint.json`` when its key matches, else recomputed and stored."""
    path = Path(out + ".footprint.json")
    key = {"model-digest": model_digest(m), "adversary": adversary}
    if path.exists():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("cache-key") == key:
                return footprint_from_dict(doc)
            _err(f"note: ignoring stale footprint cache {path}")
        except (OSError, ValueError, KeyError, TypeError):
            _err(f"note: ignoring unreadable footprint cache {path}")
    af = compute_footprint(m, adversary)
    doc = {**to_dict(af), "cache-key": key}
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", str(path))
    return af


def _render(fmt: str, obj, m: SystemModel, af=None, report=None) -> str:
    if fmt == "machine":
        return render_machine(obj)
    if fmt == "markdown":
        return render_markdown(obj)
    return render_graph(m, af, report)


# -- commands ----------------------------------------------------------------


def cmd_validate(args) -> int:
    _load_model(args.model, lint=True)
    return EXIT_OK


def cmd_footprint(args) -> int:
    m = _load_model(args.model)
    af = compute_footprint(m, args.adversary)
    _emit(_render(args.format, af, m, af), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.cache_footprint and not args.out:
        raise CliError("--cache-footprint needs --out (the cache is written beside the output)")
    m = _load_model(args.model)
    kb = _load_kb(args.kb)
    if args.cache_footprint:
        af = _cached_footprint(m, args.adversary, args.out)
    else:
        af = compute_footprint(m, args.adversary)
    if args.chain:
        report, final = chain_analyze(m, af, kb, args.max_rounds, vector_cap=args.vector_cap)
    else:
        report, final = map_threats(af, kb, vector_cap=args.vector_cap), af
    _emit(_render(args.format, report, m, final, report), args.out)
    return EXIT_OK


def cmd_whatif(args) -> int:
    m = _load_model(args.model)
    kb = _load_kb(args.kb)
    removed = args.remove or []
    delta = what_if_delta(m, kb, removed, args.adversary)
    if args.format == "graph":
        reduced = m.without_sources(removed)
        af = compute_footprint(reduced, args.adversary)
        text = render_graph(reduced, af, what_if(m, kb, removed, args.adversary, vector_cap=args.vector_cap))
    else:
        text = _render(args.format, delta, m)
    _emit(text, args.out)
    return EXIT_OK


def cmd_kb(args) -> int:
    kb = _load_kb(args.kb)
    if args.action == "lint":
        namespaces = None
        if args.model:
            m = parse_model(_read(args.model))
            namespaces = {a.kind.namespace for a in m.assets if a.kind.is_custom}
        diags = lint_kb(kb, namespaces)
        _emit("".join(f"{d}\n" for d in diags), args.out)
        return EXIT_SEMANTIC if any(d.is_error for d in diags) else EXIT_OK
    rows = []
    for e in kb.entries:
        reqs = "; ".join(f"{r.selector}: {r.min_capability}" for r in e.requirements)
        rows.append((e.id, e.family or "-", reqs))
    width = max([len(r[0]) for r in rows] + [2])
    fam = max([len(r[1]) for r in rows] + [6])
    lines = [f"{'id':<{width}}  {'family':<{fam}}  requirements"]
    lines += [f"{i:<{width}}  {f:<{fam}}  {q}" for i, f, q in rows]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atm", description="Asset-centric threat analysis for AI pipelines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, kb=True, fmt=True):
        p.add_argument("--adversary", default="all", help="adversary profile id, or 'all' (default)")
        if kb:
            p.add_argument("--kb", action="append", metavar="PATH",
                           help=f"KB file or directory, repeatable ('@seed' is the shipped KB; default: ${KB_ENV} or seed)")
        if fmt:
            p.add_argument("--format", choices=FORMATS, default="machine")
        p.add_argument("--out", metavar="PATH", help="output file (default: standard output)")

    p = sub.add_parser("validate", help="parse, validate and lint a model")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("footprint", help="compute the adversary footprint")
    p.add_argument("--model", required=True)
    common(p, kb=False)
    p.set_defaults(func=cmd_footprint)

    p = sub.add_parser("analyze", help="map the footprint against the knowledge base")
    p.add_argument("--model", required=True)
    common(p)
    p.add_argument("--chain", action="store_true", help="feed impacts of in-scope attacks back into the footprint")
    p.add_argument("--max-rounds", type=_positive, default=None, help="chain rounds (default: KB size + 1)")
    p.add_argument("--vector-cap", type=_positive, default=DEFAULT_VECTOR_CAP)
    p.add_argument("--cache-footprint", action="store_true", help="reuse <out>.footprint.json when still valid")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("whatif", help="compare classification with sources removed")
    p.add_argument("--model", required=True)
    common(p)
    p.add_argument("--remove", action="append", metavar="ID", help="vulnerability or assumption id, repeatable")
    p.add_argument("--vector-cap", type=_positive, default=DEFAULT_VECTOR_CAP)
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("kb", help="lint or list knowledge-base entries")
    p.add_argument("action", choices=("lint", "list"))
    p.add_argument("--kb", action="append", metavar="PATH")
    p.add_argument("--model", help="model whose custom kind namespaces count as in use (lint only)")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_kb)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SEMANTIC if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        _err(f"error: {exc}")
        return exc.code
    except (ModelError, PropagationError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_SEMANTIC
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
