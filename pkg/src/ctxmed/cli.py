"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 descriptor/KB parse error,
3 ontology or consistency error, 4 unresolved semantic conflict,
5 scenario failure.
"""
from __future__ import annotations

import argparse
import difflib
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import tomli

from .community import adopt_context
from .composition import execute, insert_mediators
from .descriptor import AnnotatedDescriptor, MessagePart, load_descriptor, serialize_descriptor
from .errors import (
    CommunityError,
    ConceptMismatch,
    ConsistencyError,
    CtxMedError,
    MissingRate,
    NotFound,
    OntologyError,
    ParseError,
    ScenarioError,
)
from .mediation import convert, render_value
from .ontology import KnowledgeBase, full_context, load_knowledge_base_file, parse_knowledge_base
from .scenario import data_dir, load_scenario
from .semantic_object import build_semantic_object

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_ONTOLOGY = 3
EXIT_INCONSISTENT = 4
EXIT_SCENARIO = 5

log = logging.getLogger("ctxmed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ScenarioError, CommunityError)):
        return EXIT_SCENARIO
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, (OntologyError, ConsistencyError, MissingRate, ConceptMismatch)):
        return EXIT_ONTOLOGY
    if isinstance(exc, (UsageError, NotFound, OSError)):
        return EXIT_USAGE
    if isinstance(exc, (CtxMedError, ValueError)):
        return EXIT_PARSE
    raise exc


def _kb(path: Optional[str]) -> KnowledgeBase:
    return load_knowledge_base_file(path or data_dir() / "kb.toml")


def _find_part(d: AnnotatedDescriptor, ref: str) -> MessagePart:
    op_name, sep, part_name = ref.rpartition(".")
    if sep:
        return d.operation(op_name).part(part_name)
    matches = [p for _, p in d.iter_parts() if p.name == ref]
    if len(matches) != 1:
        raise NotFound(f"{d.service_name}: part {ref!r} " + ("not found" if not matches else "is ambiguous"))
    return matches[0]


def _part_ref(ref: str) -> tuple[AnnotatedDescriptor, MessagePart]:
    path, sep, part = ref.rpartition("#")
    if not sep or not path or not part:
        raise UsageError(f"expected DESCRIPTOR#[OPERATION.]PART, got {ref!r}")
    d = load_descriptor(path)
    return d, _find_part(d, part)


def _validate_file(path: Path, kb: Optional[KnowledgeBase]) -> Optional[KnowledgeBase]:
    if path.suffix == ".toml":
        doc = tomli.loads(path.read_text(encoding="utf-8"))
        if "concepts" in doc:
            return parse_knowledge_base(doc)
        load_scenario(path)
        return None
    d = load_descriptor(path)
    if kb is not None:
        for op, part in d.iter_parts():
            try:
                full_context(kb, part.annotation)
            except OntologyError as exc:
                raise type(exc)(f"part {op.name}.{part.name}: {exc}") from None
    return None


def cmd_validate(args) -> int:
    worst = EXIT_OK
    kb = None
    paths = [Path(p) for p in args.paths]
    if args.kb:
        paths.insert(0, Path(args.kb))
    # knowledge bases first so descriptors can be resolved against them
    paths.sort(key=lambda p: 0 if p.suffix == ".toml" else 1)
    for path in paths:
        try:
            loaded = _validate_file(path, kb)
        except (CtxMedError, ValueError, OSError, tomli.TOMLDecodeError) as exc:
            code = EXIT_PARSE if isinstance(exc, tomli.TOMLDecodeError) else exit_code_for(exc)
            print(f"{path}: error: {exc}", file=sys.stderr)
            worst = max(worst, code)
            continue
        if loaded is not None:
            kb = loaded
        if not args.quiet:
            print(f"{path}: ok", file=sys.stderr)
    return worst


def cmd_convert(args) -> int:
    kb = _kb(args.kb)
    _, src_part = _part_ref(args.source)
    _, tgt_part = _part_ref(args.target)
    obj = build_semantic_object(kb, src_part, args.value)
    target = full_context(kb, tgt_part.annotation)
    out, report = convert(kb, obj, target)
    print(render_value(out))
    if args.explain:
        for line in report.lines():
            print(line)
    return EXIT_OK


def cmd_adopt(args) -> int:
    kb = _kb(args.kb)
    master = load_descriptor(args.master)
    failed = load_descriptor(args.failed)
    adopted = adopt_context(kb, master, failed)
    before, after = serialize_descriptor(master), serialize_descriptor(adopted)
    Path(args.out).write_text(after, encoding="utf-8")
    if not args.quiet:
        sys.stdout.writelines(
            difflib.unified_diff(
                before.splitlines(keepends=True),
                after.splitlines(keepends=True),
                fromfile=f"{master.service_name} (before adoption)",
                tofile=f"{master.service_name} (after adoption)",
                n=0,
            )
        )
    return EXIT_OK


def cmd_run(args) -> int:
    kb, scenario = load_scenario(args.scenario, kb_path=args.kb, seed=args.seed, adopt=not args.no_adopt)
    graph = insert_mediators(kb, scenario.graph())
    result = execute(kb, graph, scenario)
    if args.trace:
        Path(args.trace).write_text(result.render(), encoding="utf-8")
    if not args.quiet:
        for key, value in result.final_values().items():
            print(f"{key} = {value}")
    if result.consistent:
        print("CONSISTENT")
        return EXIT_OK
    print("INCONSISTENT")
    for edge in result.conflicts:
        print(f"conflict {edge} ({edge.concept})")
    return EXIT_INCONSISTENT


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kb", help="knowledge base (TOML); defaults to the bundled travel KB")
    common.add_argument("--quiet", action="store_true", help="print results only")
    common.add_argument("-v", "--verbose", action="store_true", help="log to standard error")

    parser = _Parser(prog="ctxmed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="parse descriptors, knowledge bases and scenarios")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", parents=[common], help="convert one value between two annotated parts")
    p.add_argument("value")
    p.add_argument("--from", dest="source", required=True, metavar="DESCRIPTOR#[OP.]PART")
    p.add_argument("--to", dest="target", required=True, metavar="DESCRIPTOR#[OP.]PART")
    p.add_argument("--explain", action="store_true", help="print one line per converted modifier")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("adopt", parents=[common], help="make a master descriptor adopt a failed service's context")
    p.add_argument("master")
    p.add_argument("failed")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_adopt)

    p = sub.add_parser("run", parents=[common], help="execute a scenario and check consistency")
    p.add_argument("scenario")
    p.add_argument("--no-adopt", action="store_true", help="skip context adoption (diagnostic mode)")
    p.add_argument("--trace", help="write the event trace to this file")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("ctxmed: error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (CtxMedError, ValueError, OSError, UsageError) as exc:
        print(f"ctxmed: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
