"""Grammars with a starting multiset and identity-tagged productions.

A grammar is a quadruple: terminal alphabet, nonterminal alphabet, a finite
multiset of starting strings, and a finite multiset of productions.  The
production multiset is stored as a sequence tagged with unique integer ids
(pids) so that repeated copies of the same rule stay distinguishable; parse
forests label internal nodes with pids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .counts import INF, count_to_str
from .errors import GrammarError, GrammarTextError, ParseForestError
from .multiset import Multiset

_RESERVED_NAMES = {"_", "->", "|", "*"}


@dataclass(frozen=True)
class Symbol:
    """A terminal or nonterminal, identified by name and kind."""

    name: str
    terminal: bool

    def __post_init__(self):
        if not self.name:
            raise GrammarError("symbol name must be nonempty")
        if self.name in _RESERVED_NAMES or any(ch.isspace() for ch in self.name):
            raise GrammarError(f"illegal symbol name {self.name!r}")

    def __repr__(self):
        marker = "t" if self.terminal else "n"
        return f"{self.name}:{marker}"


def term(name: str) -> Symbol:
    return Symbol(name, True)


def nonterm(name: str) -> Symbol:
    return Symbol(name, False)


class SymString(Sequence):
    """A finite sequence of symbols; the empty sequence plays epsilon."""

    __slots__ = ("symbols",)

    def __init__(self, symbols: Iterable[Symbol] = ()):
        object.__setattr__(self, "symbols", tuple(symbols))

    def __setattr__(self, name, value):
        raise AttributeError("SymString is immutable")

    def __len__(self):
        return len(self.symbols)

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self.symbols)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return SymString(self.symbols[index])
        return self.symbols[index]

    def __add__(self, other: "SymString") -> "SymString":
        if isinstance(other, SymString):
            return SymString(self.symbols + other.symbols)
        return NotImplemented

    def __mul__(self, n: int) -> "SymString":
        return SymString(self.symbols * n)

    def __eq__(self, other):
        return isinstance(other, SymString) and self.symbols == other.symbols

    def __hash__(self):
        return hash(self.symbols)

    def __repr__(self):
        return f"<{self.render()}>"

    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.symbols)

    def render(self, compact: bool = False) -> str:
        if not self.symbols:
            return "_"
        joiner = "" if compact and all(len(s.name) == 1 for s in self.symbols) else " "
        return joiner.join(s.name for s in self.symbols)

    def replace_symbol(self, mapping: dict) -> "SymString":
        return SymString(mapping.get(s, s) for s in self.symbols)


EPSILON = SymString()


@dataclass(frozen=True)
class Production:
    """One identity-tagged production; pid is unique within a grammar."""

    pid: int
    lhs: Symbol
    rhs: SymString

    def __repr__(self):
        return f"[{self.pid}] {self.lhs.name} -> {self.rhs.render()}"


class Grammar:
    """Immutable grammar over disjoint terminal and nonterminal alphabets."""

    __slots__ = ("terminals", "nonterminals", "start", "productions",
                 "_by_name", "_by_lhs")

    def __init__(self, terminals: Iterable[Symbol], nonterminals: Iterable[Symbol],
                 start: Multiset, productions: Sequence[Production]):
        self._init_fields(frozenset(terminals), frozenset(nonterminals),
                          start, tuple(productions))
        self._validate()

    def _init_fields(self, terminals, nonterminals, start, productions):
        for attr, value in (
            ("terminals", terminals),
            ("nonterminals", nonterminals),
            ("start", start),
            ("productions", productions),
        ):
            object.__setattr__(self, attr, value)
        by_name = {}
        for s in list(terminals) + list(nonterminals):
            by_name[s.name] = s
        object.__setattr__(self, "_by_name", by_name)
        by_lhs = {}
        for p in productions:
            by_lhs.setdefault(p.lhs, []).append(p)
        object.__setattr__(self, "_by_lhs", {k: tuple(v) for k, v in by_lhs.items()})

    def _validate(self):
        for s in self.terminals:
            if not s.terminal:
                raise GrammarError(f"{s.name!r} listed as terminal but tagged nonterminal")
        for s in self.nonterminals:
            if s.terminal:
                raise GrammarError(f"{s.name!r} listed as nonterminal but tagged terminal")
        names_t = {s.name for s in self.terminals}
        names_n = {s.name for s in self.nonterminals}
        clash = names_t & names_n
        if clash:
            raise GrammarError(f"symbols declared both terminal and nonterminal: {sorted(clash)}")
        if len(names_t) != len(self.terminals) or len(names_n) != len(self.nonterminals):
            raise GrammarError("duplicate symbol names within an alphabet")
        vocab = self.terminals | self.nonterminals
        for s, c in self.start.items():
            if not isinstance(s, SymString):
                raise GrammarError("starting strings must be SymString values")
            if c is INF:
                raise GrammarError("starting multiset must be finite")
            for sym in s:
                if sym not in vocab:
                    raise GrammarError(f"starting string uses undeclared symbol {sym.name!r}")
        pids = set()
        for p in self.productions:
            if p.pid in pids:
                raise GrammarError(f"duplicate pid {p.pid}")
            pids.add(p.pid)
            if p.lhs not in self.nonterminals:
                raise GrammarError(f"production left side {p.lhs.name!r} is not a declared nonterminal")
            for sym in p.rhs:
                if sym not in vocab:
                    raise GrammarError(f"production uses undeclared symbol {sym.name!r}")

    # -- access ------------------------------------------------------------

    @property
    def vocabulary(self) -> frozenset:
        return self.terminals | self.nonterminals

    def symbol(self, name: str) -> Symbol:
        try:
            return self._by_name[name]
        except KeyError:
            raise GrammarError(f"unknown symbol {name!r}") from None

    def sym_string(self, text: str) -> SymString:
        """Parse a whitespace-separated symbol string; ``_`` is epsilon."""
        text = text.strip()
        if text in ("", "_"):
            return EPSILON
        return SymString(self.symbol(tok) for tok in text.split())

    def productions_for(self, nt: Symbol) -> tuple[Production, ...]:
        if nt not in self.nonterminals:
            raise GrammarError(f"unknown nonterminal {nt.name!r}")
        return self._by_lhs.get(nt, ())

    def productions_of(self, nt: Symbol) -> Multiset:
        """The multiset of right-hand sides of productions with this left side."""
        return Multiset(p.rhs for p in self.productions_for(nt))

    def basic_strings(self) -> Multiset:
        """Starting strings plus all production right-hand sides, as a multiset."""
        return self.start.msum(Multiset(p.rhs for p in self.productions))

    def step(self, source: SymString) -> Multiset:
        """All one-step successors of a string, one entry per (occurrence, production)."""
        out = []
        for i, sym in enumerate(source):
            if sym.terminal:
                continue
            for p in self._by_lhs.get(sym, ()):
                out.append(source[:i] + p.rhs + source[i + 1:])
        return Multiset(out)

    def fresh_pid(self) -> int:
        return 1 + max((p.pid for p in self.productions), default=-1)

    # -- comparison ---------------------------------------------------------

    def rule_multiset(self) -> Multiset:
        """Productions as a multiset of (lhs, rhs) pairs, forgetting pids."""
        return Multiset((p.lhs, p.rhs) for p in self.productions)

    def __eq__(self, other):
        """Structural equality up to pid renumbering."""
        if not isinstance(other, Grammar):
            return NotImplemented
        return (self.terminals == other.terminals
                and self.nonterminals == other.nonterminals
                and self.start == other.start
                and self.rule_multiset() == other.rule_multiset())

    def __repr__(self):
        return (f"Grammar(|T|={len(self.terminals)}, |N|={len(self.nonterminals)}, "
                f"|S|={self.start.support_size()}, |P|={len(self.productions)})")


def make_grammar(terminals, nonterminals, start, rules) -> Grammar:
    """Convenience constructor from names.

    ``terminals``/``nonterminals`` are iterables of names (or one
    space-separated string); ``start`` is a list of symbol-string texts or
    ``(count, text)`` pairs; ``rules`` is a list of ``"A -> B c"`` texts or
    ``(count, text)`` pairs.  ``_`` denotes the empty string.
    """
    if isinstance(terminals, str):
        terminals = terminals.split()
    if isinstance(nonterminals, str):
        nonterminals = nonterminals.split()
    tsyms = [term(n) for n in terminals]
    nsyms = [nonterm(n) for n in nonterminals]
    by_name = {s.name: s for s in tsyms + nsyms}

    def parse_string(text: str) -> SymString:
        text = text.strip()
        if text in ("", "_"):
            return EPSILON
        try:
            return SymString(by_name[tok] for tok in text.split())
        except KeyError as exc:
            raise GrammarError(f"undeclared symbol {exc.args[0]!r}") from None

    start_counts = []
    for entry in start:
        c, text = entry if isinstance(entry, tuple) else (1, entry)
        start_counts.append((parse_string(text), c))
    prods = []
    pid = 0
    for entry in rules:
        c, text = entry if isinstance(entry, tuple) else (1, entry)
        lhs_text, arrow, rhs_text = text.partition("->")
        if not arrow:
            raise GrammarError(f"rule {text!r} lacks '->'")
        lhs_name = lhs_text.strip()
        lhs = by_name.get(lhs_name)
        if lhs is None or lhs.terminal:
            raise GrammarError(f"rule left side {lhs_name!r} is not a declared nonterminal")
        rhs = parse_string(rhs_text)
        for _ in range(c):
            prods.append(Production(pid, lhs, rhs))
            pid += 1
    return Grammar(tsyms, nsyms, Multiset.from_counts(start_counts), prods)


# -- parse forests ----------------------------------------------------------


@dataclass(frozen=True)
class ParseNode:
    """A node labeled with a symbol; internal nodes carry a production pid."""

    symbol: Symbol
    production: int | None = None
    children: tuple["ParseNode", ...] = ()

    def __post_init__(self):
        if self.production is None and self.children:
            raise ParseForestError("leaf nodes cannot have children")


@dataclass(frozen=True)
class ParseForest:
    """An ordered forest; roots spell the parsed-from string."""

    roots: tuple[ParseNode, ...] = ()


def verify_parse(g: Grammar, forest: ParseForest):
    """Check a forest against the grammar and report (roots, leaves, steps).

    Returns the root string, the leaf string, and the number of internal
    nodes; a valid forest witnesses roots ->^steps leaves.
    """
    by_pid = {p.pid: p for p in g.productions}
    leaves: list[Symbol] = []
    steps = 0

    def walk(node: ParseNode):
        nonlocal steps
        if node.symbol not in g.vocabulary:
            raise ParseForestError(f"node symbol {node.symbol.name!r} is not in the grammar")
        if node.production is None:
            leaves.append(node.symbol)
            return
        steps += 1
        prod = by_pid.get(node.production)
        if prod is None:
            raise ParseForestError(f"node references unknown production pid {node.production}")
        if prod.lhs != node.symbol:
            raise ParseForestError(
                f"node labeled {node.symbol.name!r} carries production of {prod.lhs.name!r}")
        if len(node.children) != len(prod.rhs):
            raise ParseForestError(
                f"production {prod!r} needs {len(prod.rhs)} children, node has {len(node.children)}")
        for child, sym in zip(node.children, prod.rhs):
            if child.symbol != sym:
                raise ParseForestError(
                    f"child labeled {child.symbol.name!r} where production expects {sym.name!r}")
            walk(child)

    for root in forest.roots:
        walk(root)
    source = SymString(r.symbol for r in forest.roots)
    return source, SymString(leaves), steps


# -- text format -------------------------------------------------------------


def parse_grammar_text(text: str) -> Grammar:
    """Read a grammar from its text form.

    Format: ``# comment`` lines are ignored; ``terminals:`` and
    ``nonterminals:`` list names; ``start:`` lists ``|``-separated strings;
    remaining lines are productions ``A -> SYM SYM`` (``_`` for the empty
    string), optionally prefixed ``k * ``.
    """
    terminal_names: list[str] = []
    nonterminal_names: list[str] = []
    start_entries: list[tuple[int, list[str], int]] = []
    rule_entries: list[tuple[int, str, list[str], int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("terminals:"):
            terminal_names.extend(_read_names(line[len("terminals:"):], lineno))
            continue
        if line.startswith("nonterminals:"):
            nonterminal_names.extend(_read_names(line[len("nonterminals:"):], lineno))
            continue
        if line.startswith("start:"):
            body = line[len("start:"):].strip()
            if body:
                for chunk in body.split("|"):
                    count, toks = _read_counted_string(chunk, lineno)
                    start_entries.append((count, toks, lineno))
            continue
        count, rest = _split_count_prefix(line, lineno)
        lhs_text, arrow, rhs_text = rest.partition("->")
        if not arrow:
            raise GrammarTextError("expected a production 'A -> ...'", lineno)
        lhs_name = lhs_text.strip()
        if not lhs_name or len(lhs_name.split()) != 1:
            raise GrammarTextError("production needs exactly one left-side symbol", lineno)
        rhs_toks = rhs_text.split()
        if not rhs_toks:
            raise GrammarTextError("empty right side (write '_' for the empty string)", lineno)
        rule_entries.append((count, lhs_name, rhs_toks, lineno))

    tset = set(terminal_names)
    nset = set(nonterminal_names)
    both = tset & nset
    if both:
        raise GrammarTextError(
            f"symbols declared both terminal and nonterminal: {sorted(both)}", 1)
    by_name = {n: term(n) for n in tset}
    by_name.update({n: nonterm(n) for n in nset})

    def to_string(toks: list[str], lineno: int) -> SymString:
        if toks == ["_"]:
            return EPSILON
        syms = []
        for tok in toks:
            if tok == "_":
                raise GrammarTextError("'_' cannot appear inside a longer string", lineno)
            sym = by_name.get(tok)
            if sym is None:
                raise GrammarTextError(f"undeclared symbol {tok!r}", lineno)
            syms.append(sym)
        return SymString(syms)

    start_counts: list[tuple[SymString, int]] = []
    for count, toks, lineno in start_entries:
        start_counts.append((to_string(toks, lineno), count))
    prods = []
    pid = 0
    for count, lhs_name, rhs_toks, lineno in rule_entries:
        lhs = by_name.get(lhs_name)
        if lhs is None:
            raise GrammarTextError(f"undeclared symbol {lhs_name!r}", lineno)
        if lhs.terminal:
            raise GrammarTextError(f"left side {lhs_name!r} is a terminal", lineno)
        rhs = to_string(rhs_toks, lineno)
        for _ in range(count):
            prods.append(Production(pid, lhs, rhs))
            pid += 1
    return Grammar(
        [by_name[n] for n in tset],
        [by_name[n] for n in nset],
        Multiset.from_counts(start_counts),
        prods,
    )


def _read_names(body: str, lineno: int) -> list[str]:
    names = body.split()
    for n in names:
        if n in _RESERVED_NAMES or n.startswith("#"):
            raise GrammarTextError(f"illegal symbol name {n!r}", lineno)
    return names


def _split_count_prefix(text: str, lineno: int) -> tuple[int, str]:
    head, star_, rest = text.partition("*")
    if star_ and head.strip().isdigit() and "->" not in head:
        count = int(head.strip())
        return count, rest.strip()
    return 1, text


def _read_counted_string(chunk: str, lineno: int) -> tuple[int, list[str]]:
    count, rest = _split_count_prefix(chunk.strip(), lineno)
    toks = rest.split()
    if not toks:
        raise GrammarTextError("empty starting string (write '_' for the empty string)", lineno)
    return count, toks


def _name_key(sym: Symbol):
    return (len(sym.name), sym.name)


def render_grammar_text(g: Grammar) -> str:
    """Write a grammar in the text format, in canonical order."""
    lines = []
    tnames = " ".join(s.name for s in sorted(g.terminals, key=_name_key))
    nnames = " ".join(s.name for s in sorted(g.nonterminals, key=_name_key))
    lines.append(f"terminals: {tnames}".rstrip())
    lines.append(f"nonterminals: {nnames}".rstrip())
    entries = []
    for s, c in g.start.items_sorted():
        entry = s.render()
        entries.append(entry if c == 1 else f"{count_to_str(c)} * {entry}")
    lines.append(("start: " + " | ".join(entries)).rstrip())
    grouped: dict[tuple, int] = {}
    for p in g.productions:
        grouped[(p.lhs, p.rhs)] = grouped.get((p.lhs, p.rhs), 0) + 1
    def rule_key(item):
        (lhs, rhs), _ = item
        return (_name_key(lhs), len(rhs), rhs.names())
    for (lhs, rhs), c in sorted(grouped.items(), key=rule_key):
        prefix = "" if c == 1 else f"{c} * "
        lines.append(f"{prefix}{lhs.name} -> {rhs.render()}")
    return "\n".join(lines) + "\n"
