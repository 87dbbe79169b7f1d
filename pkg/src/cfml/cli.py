"""Command-line interface.

Commands: show, analyze, enumerate, count, derivations, transform,
transduce, equiv, and the test-facing oracle-count.  Exit codes: 0 for
success (and "multiset-equal" from equiv), 1 for a failed equivalence,
2 for usage errors, 3 for unreadable or invalid input, 4 for operations
invoked outside their preconditions.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from .counts import count_to_str
from .errors import CfmlError, ContractViolation, GrammarError
from .grammar import Grammar, SymString, parse_grammar_text, render_grammar_text
from .multiset import Multiset
from .semantics import (analyze_circularity, count_derivations, count_parses,
                        enumerate_language, left_recursive_set,
                        oracle_count_parses)
from .transduction import (fst_family, parse_transducer_text,
                           prefix_family, reflection_family,
                           transduce_grammar)
from .transforms import apply_pipeline, reduce_grammar

EXIT_OK = 0
EXIT_NOT_EQUAL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CONTRACT = 4


@dataclass(frozen=True)
class EquivalenceVerdict:
    """How two enumerated multilanguages compare, strongest level first.

    ``multiset-equal`` implies ``strongly-equivalent`` (counts agree in the
    classes 0, 1, many) which implies ``similar`` (supports agree).
    """

    level: str
    first_divergence: tuple[str, str, str] | None = None


def compare_languages(m1: Multiset, m2: Multiset) -> EquivalenceVerdict:
    if m1 == m2:
        return EquivalenceVerdict("multiset-equal")
    divergence = None
    for s, c1, c2 in _divergences(m1, m2):
        shown = s.render(compact=True) if isinstance(s, SymString) else str(s)
        divergence = (shown, count_to_str(c1), count_to_str(c2))
        break

    def classes(ms):
        return {s: (0 if c == 0 else 1 if c == 1 else 2) for s, c in ms.items()}

    if classes(m1) == classes(m2):
        return EquivalenceVerdict("strongly-equivalent", divergence)
    if m1.similar(m2):
        return EquivalenceVerdict("similar", divergence)
    return EquivalenceVerdict("different", divergence)


def _divergences(m1: Multiset, m2: Multiset):
    from .multiset import canonical_key
    keys = sorted(set(m1) | set(m2), key=canonical_key)
    for s in keys:
        c1, c2 = m1.count(s), m2.count(s)
        if c1 != c2:
            yield s, c1, c2


def _read_grammar(path: str) -> Grammar:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_grammar_text(fh.read())


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _multiset_lines(ms: Multiset) -> list[str]:
    return [f"{count_to_str(c)} * {s.render(compact=True)}"
            for s, c in ms.items_sorted()]


def cmd_show(args) -> int:
    g = _read_grammar(args.file)
    _emit(render_grammar_text(g), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    g = _read_grammar(args.file)
    report = analyze_circularity(g)
    reduced = reduce_grammar(g).grammar
    useless = sorted(s.name for s in g.nonterminals - reduced.nonterminals)
    recursive = sorted(s.name for s in left_recursive_set(g))
    circular = sorted(s.name for s in report.circular)
    classes = [sorted(s.name for s in cls) for cls in report.cocircular_classes]
    nullable = [(s.name, count_to_str(c)) for s, c in sorted(
        report.nullable_counts.items(), key=lambda kv: (len(kv[0].name), kv[0].name))]
    if args.format == "json":
        payload = {
            "useless": useless,
            "circular": circular,
            "cocircular_classes": classes,
            "left_recursive": recursive,
            "nullable_counts": dict(nullable),
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("useless:", " ".join(useless) or "(none)")
        print("circular:", " ".join(circular) or "(none)")
        print("cocircular-classes:",
              " ".join("{" + " ".join(cls) + "}" for cls in classes) or "(none)")
        print("left-recursive:", " ".join(recursive) or "(none)")
        print("nullable-counts:")
        for name, c in nullable:
            print(f"  {name} {c}")
    if args.plot:
        from .plotting import save_nullable_counts
        save_nullable_counts(report.nullable_counts, args.plot)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    g = _read_grammar(args.file)
    ms = enumerate_language(g, args.max_len)
    if args.format == "json":
        payload = [{"count": count_to_str(c), "string": s.render(compact=True)}
                   for s, c in ms.items_sorted()]
        print(json.dumps(payload, indent=2))
    else:
        for line in _multiset_lines(ms):
            print(line)
    if args.plot:
        from .plotting import save_length_spectrum
        save_length_spectrum(ms, args.max_len, args.plot)
    return EXIT_OK


def cmd_count(args) -> int:
    g = _read_grammar(args.file)
    source = g.sym_string(args.sigma)
    target = g.sym_string(args.tau)
    print(count_to_str(count_parses(g, source, target)))
    return EXIT_OK


def cmd_derivations(args) -> int:
    g = _read_grammar(args.file)
    source = g.sym_string(args.sigma)
    target = g.sym_string(args.tau)
    print(count_derivations(g, source, target, args.bound))
    return EXIT_OK


def cmd_oracle_count(args) -> int:
    g = _read_grammar(args.file)
    source = g.sym_string(args.sigma)
    target = g.sym_string(args.tau)
    print(oracle_count_parses(g, source, target, args.bound))
    return EXIT_OK


def cmd_transform(args) -> int:
    g = _read_grammar(args.file)
    result = apply_pipeline(g, args.pipeline)
    _emit(render_grammar_text(result.grammar), args.out)
    if args.notes:
        for note in result.notes:
            print(f"# {note}", file=sys.stderr)
    return EXIT_OK


def cmd_transduce(args) -> int:
    g = _read_grammar(args.file)
    if args.family == "reflection":
        fam, default_index = reflection_family(), "R"
    elif args.family == "prefix":
        fam, default_index = prefix_family(), "P"
    else:
        with open(args.family, "r", encoding="utf-8") as fh:
            machine = parse_transducer_text(fh.read())
        fam = fst_family(machine)
        start = args.index or machine.start
        if start is None:
            raise ContractViolation("the transducer has no start state; use --index")
        result = transduce_grammar(g, fam, ("run", start))
        _emit(render_grammar_text(result), args.out)
        return EXIT_OK
    index = args.index or default_index
    result = transduce_grammar(g, fam, index)
    _emit(render_grammar_text(result), args.out)
    return EXIT_OK


def cmd_equiv(args) -> int:
    g1 = _read_grammar(args.file1)
    g2 = _read_grammar(args.file2)
    m1 = enumerate_language(g1, args.max_len)
    m2 = enumerate_language(g2, args.max_len)
    verdict = compare_languages(m1, m2)
    if args.format == "json":
        payload = {"level": verdict.level}
        if verdict.first_divergence:
            s, c1, c2 = verdict.first_divergence
            payload["first_divergence"] = {"string": s, "count1": c1, "count2": c2}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(verdict.level)
        if verdict.first_divergence:
            s, c1, c2 = verdict.first_divergence
            print(f"first divergence: {s!r} counts {c1} vs {c2}")
    return EXIT_OK if verdict.level == "multiset-equal" else EXIT_NOT_EQUAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfml",
        description="Context-free multilanguages: exact parse-count semantics.")
    public = "{show,analyze,enumerate,count,derivations,transform,transduce,equiv}"
    sub = parser.add_subparsers(dest="command", required=True, metavar=public)

    def add(name, fn, help_text=None, hidden=False):
        if hidden:
            p = sub.add_parser(name)
        else:
            p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        return p

    p = add("show", cmd_show, "parse a grammar file and print it canonically")
    p.add_argument("file")
    p.add_argument("--out")

    p = add("analyze", cmd_analyze, "report useless/circular/left-recursive sets and counts")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--plot", metavar="FILE", help="also render the counts as a figure")

    p = add("enumerate", cmd_enumerate, "list the multilanguage up to a length bound")
    p.add_argument("file")
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--plot", metavar="FILE", help="also render the length spectrum as a figure")

    p = add("count", cmd_count, "number of parses of TAU as --sigma")
    p.add_argument("file")
    p.add_argument("--sigma", required=True, help="source string, e.g. 'A B'")
    p.add_argument("tau", help="target terminal string, e.g. 'a b' or '_'")

    p = add("derivations", cmd_derivations, "number of bounded derivation sequences")
    p.add_argument("file")
    p.add_argument("--sigma", required=True)
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("tau")

    p = add("transform", cmd_transform, "apply a transformation pipeline")
    p.add_argument("file")
    p.add_argument("--pipeline", required=True,
                   help="e.g. reduce,cnf:strict,nolr:X,gnf")
    p.add_argument("--out")
    p.add_argument("--notes", action="store_true", help="print applied steps to stderr")

    p = add("transduce", cmd_transduce, "apply a transduction to a near-normal-form grammar")
    p.add_argument("file")
    p.add_argument("--family", required=True,
                   help="'reflection', 'prefix', or a transducer file")
    p.add_argument("--index", help="family index (default: the family's main mapping)")
    p.add_argument("--out")

    p = add("equiv", cmd_equiv, "compare two grammars' enumerations")
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = add("oracle-count", cmd_oracle_count, hidden=True)
    p.add_argument("file")
    p.add_argument("--sigma", required=True)
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("tau")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (GrammarError, CfmlError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
