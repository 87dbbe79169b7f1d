"""Juxtamorphism transductions of context-free multilanguages.

A family of string-to-multilanguage mappings is a juxtamorphism when the
image of a concatenation decomposes into a finite multiset union of
bilinear terms; the decomposition is data, so user-defined families work
alongside the built-in reflection, composition, prefix, and finite-state
families.  Families evaluate directly on strings (with a length bound) and
lift to a grammar construction multiplying counts through exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .counts import INF, count_from_str
from .errors import ContractViolation, GrammarError, GrammarTextError
from .grammar import (EPSILON, Grammar, Production, SymString, Symbol,
                      nonterm, term)
from .multiset import Multiset
from .semantics import enumerate_language

Label = object  # family index labels: strings or tuples


@dataclass(frozen=True)
class BilinearTerm:
    """One summand of a decomposition of (alpha beta)^{F_j}.

    ``swapped`` False means alpha^{first} beta^{second}; True means
    beta^{first} alpha^{second}.
    """

    first: Label
    second: Label
    swapped: bool = False


class JuxtamorphismFamily:
    """Mappings F_1..F_r with bilinear concatenation behavior.

    ``decomp`` maps each index to its terms.  ``terminal_base`` and
    ``epsilon_base`` give the base multilanguages for single symbols and
    the empty string; each base is a finite :class:`Multiset` of output
    strings (tuples of terminal names or SymStrings) or a :class:`Grammar`.
    Both may be mappings or callables.
    """

    def __init__(self, indexes: Iterable[Label], decomp: Mapping,
                 terminal_base, epsilon_base, name: str = "family"):
        self.indexes = tuple(indexes)
        self.name = name
        index_set = set(self.indexes)
        self.decomp = {j: tuple(decomp[j]) for j in self.indexes}
        for j, terms in self.decomp.items():
            for t in terms:
                if t.first not in index_set or t.second not in index_set:
                    raise ContractViolation(
                        f"decomposition of {j!r} references unknown index")
        self._terminal_base = terminal_base
        self._epsilon_base = epsilon_base

    @property
    def size(self) -> int:
        """Number of mappings in the family."""
        return len(self.indexes)

    def check_index(self, j: Label):
        if j not in self.decomp:
            raise ContractViolation(f"unknown family index {j!r}")

    def terminal_base(self, terminal_name: str, j: Label):
        if callable(self._terminal_base):
            return self._terminal_base(terminal_name, j)
        return self._terminal_base[(terminal_name, j)]

    def epsilon_base(self, j: Label):
        if callable(self._epsilon_base):
            return self._epsilon_base(j)
        return self._epsilon_base[j]


def _label_text(j: Label) -> str:
    if isinstance(j, tuple):
        return ".".join(str(x) for x in j)
    return str(j)


# -- base multilanguage normalization ----------------------------------------


def _finite_entries(base: Multiset) -> dict:
    entries: dict[tuple, object] = {}
    for elem, c in base.items():
        if isinstance(elem, SymString):
            key = elem.names()
        elif isinstance(elem, tuple):
            key = tuple(str(x) for x in elem)
        elif isinstance(elem, str):
            key = (elem,) if elem else ()
        else:
            raise ContractViolation(f"base multiset element {elem!r} is not a string")
        entries[key] = entries.get(key, 0) + c
    return entries


def _base_counts(base, maxlen: int) -> dict[tuple, object]:
    """A base multilanguage as a dict of name tuples, truncated by length."""
    if isinstance(base, Grammar):
        ms = enumerate_language(base, maxlen)
        return {s.names(): c for s, c in ms.items()}
    if isinstance(base, Multiset):
        return {k: c for k, c in _finite_entries(base).items() if len(k) <= maxlen}
    raise ContractViolation(f"base multilanguage must be Multiset or Grammar, got {type(base).__name__}")


def _base_grammar(base, tag: str) -> Grammar:
    """A base multilanguage as a grammar with tag-prefixed nonterminals."""
    if isinstance(base, Multiset):
        entries = _finite_entries(base)
        terms = {}
        for key, c in entries.items():
            if c is INF:
                raise ContractViolation(
                    "an infinite-multiplicity base needs a grammar representation")
            for name in key:
                terms.setdefault(name, term(name))
        start = Multiset.from_counts(
            {SymString(terms[n] for n in key): c for key, c in entries.items()})
        return Grammar(terms.values(), (), start, ())
    if not isinstance(base, Grammar):
        raise ContractViolation(f"base multilanguage must be Multiset or Grammar, got {type(base).__name__}")
    mapping = {nt: nonterm(f"{tag}{nt.name}") for nt in base.nonterminals}
    prods = [Production(p.pid, mapping[p.lhs], p.rhs.replace_symbol(mapping))
             for p in base.productions]
    start = Multiset.from_counts(
        {s.replace_symbol(mapping): c for s, c in base.start.items()})
    return Grammar(base.terminals, mapping.values(), start, prods)


# -- string-level evaluation ---------------------------------------------------


def eval_family(fam: JuxtamorphismFamily, j: Label, source, maxlen: int) -> Multiset:
    """Evaluate one family mapping on a string, up to output length maxlen.

    ``source`` is a SymString or an iterable of terminal names.  This is
    the reference semantics: single symbols and the empty string use the
    base cases, longer strings split at the first symbol and recurse
    through the bilinear decomposition.
    """
    fam.check_index(j)
    if maxlen < 0:
        raise ValueError("maxlen must be >= 0")
    if isinstance(source, SymString):
        names = source.names()
    elif isinstance(source, str):
        names = tuple(source)
    else:
        names = tuple(str(x) for x in source)

    tbase: dict[tuple, dict] = {}
    ebase: dict[Label, dict] = {}

    def terminal_counts(name: str, label: Label) -> dict:
        key = (name, label)
        if key not in tbase:
            tbase[key] = _base_counts(fam.terminal_base(name, label), maxlen)
        return tbase[key]

    def epsilon_counts(label: Label) -> dict:
        if label not in ebase:
            ebase[label] = _base_counts(fam.epsilon_base(label), maxlen)
        return ebase[label]

    def product(d1: dict, d2: dict) -> dict:
        out: dict = {}
        for k1, c1 in d1.items():
            room = maxlen - len(k1)
            for k2, c2 in d2.items():
                if len(k2) > room:
                    continue
                c = c1 * c2
                if c != 0:
                    key = k1 + k2
                    out[key] = out.get(key, 0) + c
        return out

    memo: dict[tuple, dict] = {}

    def ev(label: Label, i: int) -> dict:
        key = (label, i)
        got = memo.get(key)
        if got is not None:
            return got
        if i == len(names):
            result = dict(epsilon_counts(label))
        elif i == len(names) - 1:
            result = dict(terminal_counts(names[i], label))
        else:
            result = {}
            head = names[i]
            for t in fam.decomp[label]:
                if t.swapped:
                    part = product(ev(t.first, i + 1), terminal_counts(head, t.second))
                else:
                    part = product(terminal_counts(head, t.first), ev(t.second, i + 1))
                for k, c in part.items():
                    result[k] = result.get(k, 0) + c
        memo[key] = result
        return result

    out = ev(j, 0)
    syms: dict[str, Symbol] = {}
    converted = {}
    for k, c in out.items():
        for n in k:
            syms.setdefault(n, term(n))
        converted[SymString(syms[n] for n in k)] = c
    return Multiset.from_counts(converted)


# -- built-in families --------------------------------------------------------


def _finite(*entries) -> Multiset:
    return Multiset.from_counts({k: c for k, c in entries})


def reflection_family() -> JuxtamorphismFamily:
    """alpha -> {reverse(alpha)}: (alpha beta)^R = beta^R alpha^R."""
    return JuxtamorphismFamily(
        indexes=("R",),
        decomp={"R": [BilinearTerm("R", "R", swapped=True)]},
        terminal_base=lambda a, j: _finite(((a,), 1)),
        epsilon_base=lambda j: _finite(((), 1)),
        name="reflection",
    )


def composition_family(mapping: Mapping, name: str = "composition") -> JuxtamorphismFamily:
    """Substitute a multilanguage for every letter: (alpha beta)^L = alpha^L beta^L.

    ``mapping`` sends each terminal name to a Multiset or Grammar.
    """

    def tb(a: str, j: Label):
        try:
            return mapping[a]
        except KeyError:
            raise ContractViolation(f"composition map is not defined on {a!r}") from None

    return JuxtamorphismFamily(
        indexes=("L",),
        decomp={"L": [BilinearTerm("L", "L")]},
        terminal_base=tb,
        epsilon_base=lambda j: _finite(((), 1)),
        name=name,
    )


def prefix_family() -> JuxtamorphismFamily:
    """alpha -> all prefixes of alpha, each once.

    Four mappings: P (all prefixes), p (proper prefixes), I (identity),
    E (erase to the empty string).  The published three-mapping shape
    P = P E + I P double-counts alpha itself and is not split-invariant;
    routing the first term through the proper-prefix mapping restores an
    exact multiset of prefixes.
    """
    decomp = {
        "P": [BilinearTerm("p", "E"), BilinearTerm("I", "P")],
        "p": [BilinearTerm("p", "E"), BilinearTerm("I", "p")],
        "I": [BilinearTerm("I", "I")],
        "E": [BilinearTerm("E", "E")],
    }

    def tb(a: str, j: Label):
        if j == "P":
            return _finite(((), 1), ((a,), 1))
        if j == "p":
            return _finite(((), 1))
        if j == "I":
            return _finite(((a,), 1))
        return _finite(((), 1))

    def eb(j: Label):
        if j == "p":
            return Multiset()
        return _finite(((), 1))

    return JuxtamorphismFamily(
        indexes=("P", "p", "I", "E"),
        decomp=decomp,
        terminal_base=tb,
        epsilon_base=eb,
        name="prefix",
    )


# -- finite-state transduction -------------------------------------------------


@dataclass
class FiniteStateTransducer:
    """Nondeterministic finite-state transducer with multilanguage outputs.

    ``transitions[(q, a)]`` is the set of next states (missing means none);
    ``outputs[(q, a)]`` is the multilanguage emitted when reading ``a`` in
    state ``q`` (missing means identity, i.e. {a}); ``outputs[(q, None)]``
    is emitted on acceptance (missing means the empty multilanguage, i.e.
    ``q`` does not accept).  ``start`` is a default start state; operations
    take an explicit start state parameter that overrides it.
    """

    states: tuple[str, ...]
    transitions: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    start: str | None = None

    def __post_init__(self):
        self.states = tuple(self.states)
        if len(set(self.states)) != len(self.states):
            raise ContractViolation("duplicate transducer states")
        for (q, a), targets in self.transitions.items():
            if q not in self.states:
                raise ContractViolation(f"transition from unknown state {q!r}")
            for t in targets:
                if t not in self.states:
                    raise ContractViolation(f"transition into unknown state {t!r}")
        if self.start is not None and self.start not in self.states:
            raise ContractViolation(f"unknown start state {self.start!r}")

    def next_states(self, q: str, a: str) -> frozenset:
        return frozenset(self.transitions.get((q, a), ()))

    def output(self, q: str, a: str | None):
        got = self.outputs.get((q, a))
        if got is not None:
            return got
        if a is None:
            return Multiset()
        return _finite(((a,), 1))

    def accepting_paths(self, names: tuple) -> int:
        """Number of state sequences reading the string into acceptance."""
        current = {self.start: 1} if self.start is not None else {}
        for a in names:
            nxt: dict[str, int] = {}
            for q, c in current.items():
                for q2 in self.next_states(q, a):
                    nxt[q2] = nxt.get(q2, 0) + c
            current = nxt
        total = 0
        for q, c in current.items():
            if self._accepts(q):
                total += c
        return total

    def _accepts(self, q: str) -> bool:
        base = self.outputs.get((q, None))
        if base is None:
            return False
        if isinstance(base, Multiset):
            return bool(base)
        return True


def fst_family(m: FiniteStateTransducer) -> JuxtamorphismFamily:
    """The juxtamorphism of a finite-state transducer.

    Index ("seg", q, q') maps alpha to the outputs of paths from q to q';
    index ("run", q) additionally appends the acceptance output of the
    final state.  Segments of a concatenation sum over the midpoint state.
    """
    pairs = [("seg", q1, q2) for q1 in m.states for q2 in m.states]
    ones = [("run", q) for q in m.states]
    decomp: dict[Label, list[BilinearTerm]] = {}
    for (_, q1, q2) in pairs:
        decomp[("seg", q1, q2)] = [
            BilinearTerm(("seg", q1, mid), ("seg", mid, q2)) for mid in m.states]
    for (_, q) in ones:
        decomp[("run", q)] = [
            BilinearTerm(("seg", q, mid), ("run", mid)) for mid in m.states]

    def tb(a: str, j: Label):
        kind = j[0]
        if kind == "seg":
            _, q1, q2 = j
            if q2 in m.next_states(q1, a):
                return m.output(q1, a)
            return Multiset()
        _, q = j
        out = Multiset()
        step = m.output(q, a)
        for q2 in sorted(m.next_states(q, a)):
            tail = m.output(q2, None)
            piece = _product_base(step, tail)
            out = _msum_base(out, piece)
        return out

    def eb(j: Label):
        kind = j[0]
        if kind == "seg":
            _, q1, q2 = j
            return _finite(((), 1)) if q1 == q2 else Multiset()
        _, q = j
        return m.output(q, None)

    return JuxtamorphismFamily(
        indexes=tuple(pairs + ones),
        decomp=decomp,
        terminal_base=tb,
        epsilon_base=eb,
        name="fst",
    )


def _merge_grammars(g1: Grammar, g2: Grammar, start: Multiset) -> Grammar:
    prods = []
    pid = 0
    for p in list(g1.productions) + list(g2.productions):
        prods.append(Production(pid, p.lhs, p.rhs))
        pid += 1
    return Grammar(
        set(g1.terminals) | set(g2.terminals),
        set(g1.nonterminals) | set(g2.nonterminals),
        start, prods)


def _msum_base(b1, b2):
    if isinstance(b1, Multiset) and isinstance(b2, Multiset):
        return b1.msum(b2)
    g1 = _base_grammar(b1, "u1~")
    g2 = _base_grammar(b2, "u2~")
    return _merge_grammars(g1, g2, g1.start.msum(g2.start))


def _product_base(b1, b2):
    if isinstance(b1, Multiset) and isinstance(b2, Multiset):
        e1 = _finite_entries(b1)
        e2 = _finite_entries(b2)
        out: dict[tuple, object] = {}
        for k1, c1 in e1.items():
            for k2, c2 in e2.items():
                c = c1 * c2
                if c != 0:
                    key = k1 + k2
                    out[key] = out.get(key, 0) + c
        return Multiset.from_counts(out)
    g1 = _base_grammar(b1, "p1~")
    g2 = _base_grammar(b2, "p2~")
    start: dict[SymString, object] = {}
    for s1, c1 in g1.start.items():
        for s2, c2 in g2.start.items():
            key = s1 + s2
            start[key] = start.get(key, 0) + c1 * c2
    return _merge_grammars(g1, g2, Multiset.from_counts(start))


# -- the grammar construction ---------------------------------------------------


def _check_near_cnf(g: Grammar):
    exempt = None
    for nt in g.nonterminals:
        rules = g.productions_for(nt)
        if rules and all(p.rhs == SymString([nt]) or p.rhs == EPSILON for p in rules) \
                and any(p.rhs == SymString([nt]) for p in rules):
            exempt = nt
            break
    for p in g.productions:
        if exempt is not None and p.lhs == exempt:
            continue
        if len(p.rhs) == 1 and p.rhs[0].terminal:
            continue
        if len(p.rhs) == 2 and not p.rhs[0].terminal and not p.rhs[1].terminal:
            continue
        raise ContractViolation(
            f"transduction needs (near-)Chomsky normal form; "
            f"offending production {p.lhs.name} -> {p.rhs.render()}")


def transduce_grammar(g: Grammar, fam: JuxtamorphismFamily, j: Label) -> Grammar:
    """A grammar for the image of the grammar's multilanguage under F_j.

    For every output string, its count in the result equals the sum over
    input strings of (input count) times (count in the string's image).
    """
    fam.check_index(j)
    _check_near_cnf(g)

    lifted: dict[tuple, Symbol] = {}
    for nt in g.nonterminals:
        for label in fam.indexes:
            lifted[(nt.name, label)] = nonterm(f"{nt.name}@{_label_text(label)}")

    base_cache: dict[tuple, Grammar] = {}

    def base_as_grammar(kind_key: tuple, base) -> Grammar:
        got = base_cache.get(kind_key)
        if got is None:
            a, label = kind_key
            tag = f"{a if a is not None else '_'}@{_label_text(label)}~"
            got = _base_grammar(base, tag)
            base_cache[kind_key] = got
        return base_cache[kind_key]

    lift_memo: dict[tuple, dict] = {}

    def lift(symbols: tuple, label: Label) -> dict:
        key = (symbols, label)
        got = lift_memo.get(key)
        if got is not None:
            return got
        if len(symbols) == 0:
            bg = base_as_grammar((None, label), fam.epsilon_base(label))
            result = {s: c for s, c in bg.start.items()}
        elif len(symbols) == 1:
            sym = symbols[0]
            if sym.terminal:
                bg = base_as_grammar((sym.name, label), fam.terminal_base(sym.name, label))
                result = {s: c for s, c in bg.start.items()}
            else:
                result = {SymString([lifted[(sym.name, label)]]): 1}
        else:
            head, rest = symbols[:1], symbols[1:]
            result = {}
            for t in fam.decomp[label]:
                if t.swapped:
                    left = lift(rest, t.first)
                    right = lift(head, t.second)
                else:
                    left = lift(head, t.first)
                    right = lift(rest, t.second)
                for s1, c1 in left.items():
                    for s2, c2 in right.items():
                        c = c1 * c2
                        if c != 0:
                            s = s1 + s2
                            result[s] = result.get(s, 0) + c
        lift_memo[key] = result
        return result

    rules: list[tuple[Symbol, SymString, int]] = []
    for p in g.productions:
        for label in fam.indexes:
            lhs = lifted[(p.lhs.name, label)]
            for s, c in lift(p.rhs.symbols, label).items():
                rules.append((lhs, s, c))
    start: dict[SymString, int] = {}
    for s, w in g.start.items():
        for rs, c in lift(s.symbols, j).items():
            start[rs] = start.get(rs, 0) + w * c

    terminals: dict[str, Symbol] = {}
    nonterminals: dict[str, Symbol] = {s.name: s for s in lifted.values()}
    if len(nonterminals) != len(lifted):
        raise GrammarError("lifted nonterminal names collide")
    prods: list[Production] = []
    pid = 0
    for bg in base_cache.values():
        for t in bg.terminals:
            terminals.setdefault(t.name, t)
        for nt in bg.nonterminals:
            if nt.name in nonterminals:
                raise GrammarError(f"base nonterminal {nt.name!r} collides")
            nonterminals[nt.name] = nt
        for p in bg.productions:
            prods.append(Production(pid, p.lhs, p.rhs))
            pid += 1
    for lhs, rhs, c in rules:
        for _ in range(c):
            prods.append(Production(pid, lhs, rhs))
            pid += 1
    return Grammar(terminals.values(), nonterminals.values(),
                   Multiset.from_counts(start), prods)


def regular_mdot(g: Grammar, m: FiniteStateTransducer, start: str | None = None) -> Grammar:
    """A grammar whose counts multiply the input counts by acceptance paths.

    The transducer must copy its input: every defined symbol output is the
    identity and every acceptance output is {empty} or absent.
    """
    for (q, a), base in m.outputs.items():
        entries = _base_counts(base, 10 ** 9) if not isinstance(base, Grammar) else None
        if a is None:
            if entries is None or entries not in ({}, {(): 1}):
                raise ContractViolation(
                    "path-counting intersection needs acceptance outputs {_} or nothing")
        else:
            if entries is None or entries != {(a,): 1}:
                raise ContractViolation(
                    "path-counting intersection needs identity symbol outputs")
    q0 = start if start is not None else m.start
    if q0 is None:
        raise ContractViolation("no start state given")
    return transduce_grammar(g, fst_family(m), ("run", q0))


# -- transducer text format -----------------------------------------------------


def parse_multiset_literal(text: str) -> Multiset:
    """Parse ``K * SYM SYM | K * _ | ...`` into a multiset of name tuples."""
    entries: dict[tuple, object] = {}
    text = text.strip()
    if not text:
        return Multiset()
    for chunk in text.split("|"):
        chunk = chunk.strip()
        if not chunk:
            continue
        head, starsep, rest = chunk.partition("*")
        if starsep and (head.strip().isdigit() or head.strip() == "inf"):
            count = count_from_str(head)
            body = rest.strip()
        else:
            count = 1
            body = chunk
        toks = body.split()
        key = () if toks == ["_"] else tuple(toks)
        if "_" in key:
            raise ValueError("'_' cannot appear inside a longer string")
        entries[key] = entries.get(key, 0) + count
    return Multiset.from_counts(entries)


def parse_transducer_text(text: str) -> FiniteStateTransducer:
    """Read a transducer file.

    Format: ``states:`` and ``start:`` headers; transition lines
    ``q a -> q'``; output lines ``q a => MULTISET`` and acceptance lines
    ``q _ => MULTISET`` (multisets as ``K * SYMS`` joined with ``|``).
    """
    states: list[str] = []
    start: str | None = None
    transitions: dict = {}
    outputs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("states:"):
            states.extend(line[len("states:"):].split())
            continue
        if line.startswith("start:"):
            toks = line[len("start:"):].split()
            if len(toks) != 1:
                raise GrammarTextError("start: needs exactly one state", lineno)
            start = toks[0]
            continue
        if "=>" in line:
            head, _, body = line.partition("=>")
            toks = head.split()
            if len(toks) != 2:
                raise GrammarTextError("output line needs 'STATE SYMBOL => MULTISET'", lineno)
            q, a = toks
            key = (q, None if a == "_" else a)
            try:
                ms = parse_multiset_literal(body)
            except ValueError as exc:
                raise GrammarTextError(str(exc), lineno) from None
            prior = outputs.get(key)
            outputs[key] = ms if prior is None else prior.msum(ms)
            continue
        if "->" in line:
            head, _, body = line.partition("->")
            toks = head.split()
            targets = body.split()
            if len(toks) != 2 or len(targets) != 1:
                raise GrammarTextError("transition line needs 'STATE SYMBOL -> STATE'", lineno)
            q, a = toks
            if a == "_":
                raise GrammarTextError("transitions read one symbol; '_' not allowed", lineno)
            key = (q, a)
            transitions.setdefault(key, set()).add(targets[0])
            continue
        raise GrammarTextError("unrecognized transducer line", lineno)
    if not states:
        raise GrammarTextError("transducer needs a 'states:' line", 1)
    try:
        return FiniteStateTransducer(
            states=tuple(states),
            transitions={k: frozenset(v) for k, v in transitions.items()},
            outputs=outputs,
            start=start,
        )
    except ContractViolation as exc:
        raise GrammarTextError(str(exc), 1) from None
