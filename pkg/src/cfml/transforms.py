"""Language-preserving grammar transformations.

Every transformation returns a :class:`TransformResult` carrying the new
grammar, a provenance map from old production ids to the multiset of new
production ids descending from them, the set of freshly created ids, and
human-readable notes about applied steps.

All transformations preserve the multilanguage exactly (counts included)
except where a mode says otherwise (``chomsky_normal_form('similar')``
preserves it up to support).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .counts import INF
from .errors import ContractViolation, GrammarError, InternalError
from .grammar import EPSILON, Grammar, Production, Symbol, SymString, nonterm
from .multiset import Multiset
from .semantics import (circular_nonterminals, cocircular_classes,
                        left_recursive_set, nullable_counts, nullable_set)


@dataclass(frozen=True)
class TransformResult:
    grammar: Grammar
    provenance: dict[int, Multiset] = field(default_factory=dict)
    created: frozenset[int] = frozenset()
    notes: tuple[str, ...] = ()


def _name_key(sym: Symbol) -> str:
    return sym.name


# ---------------------------------------------------------------------------
# the mutable workspace transforms operate on
# ---------------------------------------------------------------------------


@dataclass
class _Entry:
    lhs: Symbol
    rhs: SymString
    count: int
    origin: int | None  # pid in the input grammar, None for created rules


class _Workspace:
    def __init__(self, g: Grammar):
        self.terminals = set(g.terminals)
        self.nonterminals = set(g.nonterminals)
        self.start: dict[SymString, int] = dict(g.start.items())
        self.rules: list[_Entry] = [
            _Entry(p.lhs, p.rhs, 1, p.pid) for p in g.productions]
        self.notes: list[str] = []

    def used_names(self) -> set[str]:
        return {s.name for s in self.terminals | self.nonterminals}

    def fresh_nonterminal(self, base: str) -> Symbol:
        used = self.used_names()
        name = base
        while name in used:
            name += "'"
        sym = nonterm(name)
        self.nonterminals.add(sym)
        return sym

    def add_rule(self, lhs: Symbol, rhs: SymString, count: int = 1,
                 origin: int | None = None):
        if count > 0:
            self.rules.append(_Entry(lhs, rhs, count, origin))

    def add_start(self, s: SymString, count: int = 1):
        if count > 0:
            self.start[s] = self.start.get(s, 0) + count

    def remove_start(self, s: SymString, count: int = 1):
        have = self.start.get(s, 0)
        if have < count:
            raise InternalError("removing more starting strings than present")
        if have == count:
            del self.start[s]
        else:
            self.start[s] = have - count

    def rules_of(self, lhs: Symbol) -> list[_Entry]:
        return [r for r in self.rules if r.lhs == lhs]

    def substitute(self, mapping: dict[Symbol, Symbol]):
        self.rules = [
            _Entry(mapping.get(r.lhs, r.lhs), r.rhs.replace_symbol(mapping),
                   r.count, r.origin)
            for r in self.rules]
        new_start: dict[SymString, int] = {}
        for s, c in self.start.items():
            ns = s.replace_symbol(mapping)
            new_start[ns] = new_start.get(ns, 0) + c
        self.start = new_start

    def rewrite_strings(self, fn):
        """Apply fn to every basic string (rule right sides and starts)."""
        for r in self.rules:
            r.rhs = fn(r.rhs)
        new_start: dict[SymString, int] = {}
        for s, c in self.start.items():
            ns = fn(s)
            new_start[ns] = new_start.get(ns, 0) + c
        self.start = new_start

    def split_substitute(self, target: Symbol, replacement: SymString):
        """The compensation step of elimination.

        Every basic string with n occurrences of ``target`` is replaced by
        the 2^n strings obtained by independently keeping each occurrence or
        substituting ``replacement``.
        """
        new_rules: list[_Entry] = []
        touched = False
        for r in self.rules:
            if target not in r.rhs:
                new_rules.append(r)
                continue
            touched = True
            for rhs, k in _split_variants(r.rhs, target, replacement).items():
                new_rules.append(_Entry(r.lhs, rhs, r.count * k, r.origin))
        self.rules = _coalesce(new_rules) if touched else new_rules
        if any(target in s for s in self.start):
            new_start: dict[SymString, int] = {}
            for s, c in self.start.items():
                for ns, k in _split_variants(s, target, replacement).items():
                    new_start[ns] = new_start.get(ns, 0) + c * k
            self.start = new_start

    def snapshot(self) -> Grammar:
        prods = []
        pid = 0
        for r in self.rules:
            for _ in range(r.count):
                prods.append(Production(pid, r.lhs, r.rhs))
                pid += 1
        return Grammar(self.terminals, self.nonterminals,
                       Multiset.from_counts(self.start), prods)

    def to_result(self, source: Grammar) -> TransformResult:
        prods = []
        prov: dict[int, list[int]] = {p.pid: [] for p in source.productions}
        created: list[int] = []
        pid = 0
        for r in self.rules:
            for _ in range(r.count):
                prods.append(Production(pid, r.lhs, r.rhs))
                if r.origin is None:
                    created.append(pid)
                else:
                    prov[r.origin].append(pid)
                pid += 1
        grammar = Grammar(self.terminals, self.nonterminals,
                          Multiset.from_counts(self.start), prods)
        return TransformResult(
            grammar=grammar,
            provenance={old: Multiset(new) for old, new in prov.items()},
            created=frozenset(created),
            notes=tuple(self.notes),
        )


def _coalesce(rules: list[_Entry]) -> list[_Entry]:
    merged: dict[tuple, _Entry] = {}
    out: list[_Entry] = []
    for r in rules:
        key = (r.lhs, r.rhs.symbols, r.origin)
        prior = merged.get(key)
        if prior is None:
            entry = _Entry(r.lhs, r.rhs, r.count, r.origin)
            merged[key] = entry
            out.append(entry)
        else:
            prior.count += r.count
    return out


def _split_variants(s: SymString, target: Symbol,
                    replacement: SymString) -> dict[SymString, int]:
    positions = [i for i, sym in enumerate(s) if sym == target]
    if not positions:
        return {s: 1}
    variants: dict[SymString, int] = {}
    for mask in range(1 << len(positions)):
        parts: list[Symbol] = []
        prev = 0
        for bit, pos in enumerate(positions):
            parts.extend(s.symbols[prev:pos])
            if mask & (1 << bit):
                parts.extend(replacement.symbols)
            else:
                parts.append(target)
            prev = pos + 1
        parts.extend(s.symbols[prev:])
        ns = SymString(parts)
        variants[ns] = variants.get(ns, 0) + 1
    return variants


def _compose(first: TransformResult, second: TransformResult) -> TransformResult:
    prov: dict[int, Multiset] = {}
    for old, mids in first.provenance.items():
        image = Multiset()
        for mid, c in mids.items():
            image = image.msum(second.provenance.get(mid, Multiset()).scale(c))
        prov[old] = image
    created: set[int] = set(second.created)
    for mid in first.created:
        created.update(second.provenance.get(mid, Multiset()))
    return TransformResult(
        grammar=second.grammar,
        provenance=prov,
        created=frozenset(created),
        notes=first.notes + second.notes,
    )


# ---------------------------------------------------------------------------
# reduce
# ---------------------------------------------------------------------------


def reduce_grammar(g: Grammar) -> TransformResult:
    """Remove productions and starting strings involving useless nonterminals.

    A nonterminal is useless when it derives no terminal string or is not
    reachable from any starting string.  Removal is iterated until every
    remaining nonterminal is useful.
    """
    ws = _Workspace(g)
    rounds = 0
    while True:
        productive: set[Symbol] = set()
        changed = True
        while changed:
            changed = False
            for r in ws.rules:
                if r.lhs in productive:
                    continue
                if all(v.terminal or v in productive for v in r.rhs):
                    productive.add(r.lhs)
                    changed = True
        reachable: set[Symbol] = set()
        frontier: list[Symbol] = []
        for s in ws.start:
            for sym in s:
                if not sym.terminal and sym not in reachable:
                    reachable.add(sym)
                    frontier.append(sym)
        while frontier:
            nt = frontier.pop()
            for r in ws.rules:
                if r.lhs == nt:
                    for sym in r.rhs:
                        if not sym.terminal and sym not in reachable:
                            reachable.add(sym)
                            frontier.append(sym)
        useless = ws.nonterminals - (productive & reachable)
        if not useless:
            break
        rounds += 1
        ws.notes.append(
            "removed useless nonterminals: "
            + " ".join(sorted(s.name for s in useless)))
        ws.rules = [r for r in ws.rules
                    if r.lhs not in useless and not any(v in useless for v in r.rhs)]
        ws.start = {s: c for s, c in ws.start.items()
                    if not any(v in useless for v in s)}
        ws.nonterminals -= useless
    if rounds == 0:
        ws.notes.append("grammar already reduced")
    return ws.to_result(g)


def is_reduced(g: Grammar) -> bool:
    res = reduce_grammar(g)
    return res.grammar == g


# ---------------------------------------------------------------------------
# abbreviation and folding
# ---------------------------------------------------------------------------


def abbreviate(g: Grammar, body: SymString, name: str) -> TransformResult:
    """Add ``name -> body`` and fold occurrences of ``body`` everywhere else.

    Occurrences are replaced left to right, skipping overlaps.  The new
    symbol's own defining rule is exempt.
    """
    if len(body) < 1:
        raise ContractViolation("abbreviation body must be nonempty")
    if name in {s.name for s in g.vocabulary}:
        raise ContractViolation(f"abbreviation symbol {name!r} already in use")
    for sym in body:
        if sym not in g.vocabulary:
            raise GrammarError(f"abbreviation body uses unknown symbol {sym.name!r}")
    ws = _Workspace(g)
    x = nonterm(name)
    ws.nonterminals.add(x)

    def fold(s: SymString) -> SymString:
        return _fold_occurrences(s, body, x)

    ws.rewrite_strings(fold)
    ws.add_rule(x, body, 1, None)
    ws.notes.append(f"abbreviated {body.render()!r} as {name}")
    return ws.to_result(g)


def _fold_occurrences(s: SymString, body: SymString, x: Symbol) -> SymString:
    out: list[Symbol] = []
    i = 0
    blen = len(body)
    while i < len(s):
        if s.symbols[i:i + blen] == body.symbols:
            out.append(x)
            i += blen
        else:
            out.append(s.symbols[i])
            i += 1
    return SymString(out)


def _fold_pass(ws: _Workspace, series: str = "X"):
    """Right-fold every basic string to length <= 2 with shared suffix names."""
    suffix_map: dict[tuple, Symbol] = {}

    def fold(s: SymString) -> SymString:
        while len(s) > 2:
            pair = s[-2:]
            x = suffix_map.get(pair.symbols)
            if x is None:
                x = ws.fresh_nonterminal(series)
                suffix_map[pair.symbols] = x
                ws.add_rule(x, pair, 1, None)
            s = s[:-2] + SymString([x])
        return s

    original = list(ws.rules)
    for r in original:
        r.rhs = fold(r.rhs)
    new_start: dict[SymString, int] = {}
    for s, c in ws.start.items():
        ns = fold(s)
        new_start[ns] = new_start.get(ns, 0) + c
    ws.start = new_start
    if suffix_map:
        ws.notes.append(
            "folded long strings via "
            + " ".join(sorted(x.name for x in suffix_map.values())))


def binarize(g: Grammar) -> TransformResult:
    """Abbreviate until every basic string has length at most two.

    Repeated suffixes share one abbreviation, so the total basic-string
    length grows by strictly less than a factor of two.
    """
    ws = _Workspace(g)
    _fold_pass(ws)
    return ws.to_result(g)


def _lift_pass(ws: _Workspace, series: str = "Y"):
    """Replace terminals inside length-2 rule right sides by fresh nonterminals."""
    lift_map: dict[Symbol, Symbol] = {}

    def lifted(t: Symbol) -> Symbol:
        y = lift_map.get(t)
        if y is None:
            y = ws.fresh_nonterminal(series)
            lift_map[t] = y
            ws.add_rule(y, SymString([t]), 1, None)
        return y

    for r in list(ws.rules):
        if len(r.rhs) == 2 and any(v.terminal for v in r.rhs):
            r.rhs = SymString(lifted(v) if v.terminal else v for v in r.rhs)
    if lift_map:
        ws.notes.append(
            "lifted terminals via "
            + " ".join(sorted(y.name for y in lift_map.values())))


# ---------------------------------------------------------------------------
# expansion and elimination
# ---------------------------------------------------------------------------


def expand_rule(g: Grammar, pid: int, index: int) -> TransformResult:
    """Unfold one nonterminal occurrence inside a production right side."""
    target = next((p for p in g.productions if p.pid == pid), None)
    if target is None:
        raise ContractViolation(f"no production with pid {pid}")
    if not (0 <= index < len(target.rhs)):
        raise ContractViolation("occurrence index out of range")
    x = target.rhs[index]
    if x.terminal:
        raise ContractViolation("only nonterminal occurrences can be expanded")
    ws = _Workspace(g)
    ws.rules = [r for r in ws.rules if r.origin != pid]
    for p in g.productions_for(x):
        new_rhs = target.rhs[:index] + p.rhs + target.rhs[index + 1:]
        ws.add_rule(target.lhs, new_rhs, 1, pid)
    ws.notes.append(f"expanded occurrence of {x.name} in pid {pid}")
    return ws.to_result(g)


def expand_start(g: Grammar, s: SymString, index: int) -> TransformResult:
    """Unfold one nonterminal occurrence inside one copy of a starting string."""
    if g.start.count(s) == 0:
        raise ContractViolation(f"starting string {s.render()!r} not present")
    if not (0 <= index < len(s)):
        raise ContractViolation("occurrence index out of range")
    x = s[index]
    if x.terminal:
        raise ContractViolation("only nonterminal occurrences can be expanded")
    ws = _Workspace(g)
    ws.remove_start(s)
    for p in g.productions_for(x):
        ws.add_start(s[:index] + p.rhs + s[index + 1:])
    ws.notes.append(f"expanded occurrence of {x.name} in starting string")
    return ws.to_result(g)


def eliminate(g: Grammar, pid: int) -> TransformResult:
    """Delete one production and compensate every remaining basic string.

    The left-side symbol must not occur in the deleted right side; splicing
    a self-referential rule back into itself cannot be compensated by the
    finite substitution scheme.
    """
    target = next((p for p in g.productions if p.pid == pid), None)
    if target is None:
        raise ContractViolation(f"no production with pid {pid}")
    if target.lhs in target.rhs:
        raise ContractViolation(
            "cannot eliminate a production whose right side contains its left side")
    ws = _Workspace(g)
    ws.rules = [r for r in ws.rules if r.origin != pid]
    ws.split_substitute(target.lhs, target.rhs)
    ws.notes.append(f"eliminated pid {pid}: {target.lhs.name} -> {target.rhs.render()}")
    return ws.to_result(g)


def eliminate_epsilons(g: Grammar) -> TransformResult:
    """Remove every empty production, one copy at a time.

    Requires all empty-string parse counts to be finite; a grammar with a
    nullable cycle would need infinite compensation.
    """
    counts = nullable_counts(g)
    divergent = sorted(s.name for s, c in counts.items() if c is INF)
    if divergent:
        raise ContractViolation(
            f"empty-string counts diverge for: {' '.join(divergent)}")
    ws = _Workspace(g)
    steps = 0
    while True:
        entry = None
        for r in ws.rules:
            if len(r.rhs) == 0 and (entry is None or _name_key(r.lhs) < _name_key(entry.lhs)):
                entry = r
        if entry is None:
            break
        steps += 1
        if steps > 10 ** 7:
            raise InternalError("empty-production removal failed to terminate")
        entry.count -= 1
        if entry.count == 0:
            ws.rules.remove(entry)
        ws.split_substitute(entry.lhs, EPSILON)
    ws.notes.append(f"removed empty productions in {steps} elimination steps")
    return ws.to_result(g)


# ---------------------------------------------------------------------------
# circularity: merge and localization
# ---------------------------------------------------------------------------


def merge_cocircular(g: Grammar) -> TransformResult:
    """Collapse each class of mutually derivable circular nonterminals.

    The alphabetically least member absorbs the others; every affected
    string has infinitely many parses both before and after.
    """
    classes = cocircular_classes(g)
    mapping: dict[Symbol, Symbol] = {}
    merged_names = []
    for cls in classes:
        rep = min(cls, key=_name_key)
        for other in cls:
            if other != rep:
                mapping[other] = rep
                merged_names.append(f"{other.name}->{rep.name}")
    ws = _Workspace(g)
    if mapping:
        ws.substitute(mapping)
        ws.nonterminals -= set(mapping)
        ws.notes.append("merged co-circular nonterminals: " + " ".join(sorted(merged_names)))
    else:
        ws.notes.append("no co-circularity present")
    return ws.to_result(g)


def localize_circularity(g: Grammar) -> TransformResult:
    """Split every derivation by whether it touches a circular nonterminal.

    Each non-circular nonterminal A gains companions A' (derivations that
    do reach a circular nonterminal, all of infinite multiplicity) and A''
    (derivations that do not, all finite).  A fresh pumping nonterminal Z
    with rules Z -> Z and Z -> _ prefixes the infinite-side starting
    strings, after which Z is the only circularity needed to keep counts.
    """
    if not is_reduced(g):
        raise ContractViolation("localization requires a reduced grammar")
    circular = circular_nonterminals(g)
    plain = sorted((nt for nt in g.nonterminals if nt not in circular), key=_name_key)
    used = {s.name for s in g.vocabulary}
    for nt in plain:
        for suffix in ("'", "''"):
            if nt.name + suffix in used:
                raise ContractViolation(
                    f"fresh name {nt.name + suffix!r} collides with an existing symbol")
    if "Z" in used:
        raise ContractViolation("fresh name 'Z' collides with an existing symbol")
    prime = {nt: nonterm(nt.name + "'") for nt in plain}
    dprime = {nt: nonterm(nt.name + "''") for nt in plain}

    def split(s: SymString) -> tuple[list[SymString], list[SymString]]:
        if any(sym in circular for sym in s):
            return [s], []
        idxs = [i for i, sym in enumerate(s) if not sym.terminal]
        if not idxs:
            return [], [s]
        inf_side = []
        for k in range(len(idxs)):
            syms = list(s.symbols)
            for pos in idxs[:k]:
                syms[pos] = dprime[s[pos]]
            syms[idxs[k]] = prime[s[idxs[k]]]
            inf_side.append(SymString(syms))
        fin = SymString(dprime[sym] if not sym.terminal else sym for sym in s)
        return inf_side, [fin]

    ws = _Workspace(g)
    ws.nonterminals.update(prime.values())
    ws.nonterminals.update(dprime.values())
    z = nonterm("Z")
    ws.nonterminals.add(z)

    for p in g.productions:
        if p.lhs in circular:
            continue
        inf_side, fin_side = split(p.rhs)
        for v in inf_side:
            ws.add_rule(prime[p.lhs], v, 1, p.pid)
        for v in fin_side:
            ws.add_rule(dprime[p.lhs], v, 1, p.pid)
    ws.add_rule(z, SymString([z]), 1, None)
    ws.add_rule(z, EPSILON, 1, None)

    new_start: dict[SymString, int] = {}
    for s, c in g.start.items():
        inf_side, fin_side = split(s)
        for v in inf_side:
            zv = SymString([z]) + v
            new_start[zv] = new_start.get(zv, 0) + c
        for v in fin_side:
            new_start[v] = new_start.get(v, 0) + c
    ws.start = new_start
    ws.notes.append(
        "localized circularity around: "
        + (" ".join(sorted(s.name for s in circular)) or "(none)"))
    return ws.to_result(g)


# ---------------------------------------------------------------------------
# Chomsky normal form
# ---------------------------------------------------------------------------


def _topological_order(g: Grammar, z: Symbol | None) -> list[Symbol]:
    """Order nonterminals so single-symbol derivability only points forward."""
    nullable = nullable_set(g)
    nodes = [nt for nt in g.nonterminals if nt != z]
    edges: dict[Symbol, set[Symbol]] = {nt: set() for nt in nodes}
    indeg: dict[Symbol, int] = {nt: 0 for nt in nodes}
    for p in g.productions:
        if p.lhs == z:
            continue
        for i, sym in enumerate(p.rhs):
            if sym.terminal or sym == p.lhs or sym == z:
                continue
            others = [v for k, v in enumerate(p.rhs) if k != i]
            if all((not v.terminal) and v in nullable for v in others):
                if sym not in edges[p.lhs]:
                    edges[p.lhs].add(sym)
                    indeg[sym] += 1
    order: list[Symbol] = []
    ready = sorted((nt for nt in nodes if indeg[nt] == 0), key=_name_key)
    while ready:
        nt = ready.pop(0)
        order.append(nt)
        changed = False
        for nxt in edges[nt]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
                changed = True
        if changed:
            ready.sort(key=_name_key)
    if len(order) != len(nodes):
        raise InternalError("co-circularity survived merging; no topological order")
    return ([z] if z is not None else []) + order


def _is_unit(r: _Entry) -> bool:
    return len(r.rhs) == 1 and not r.rhs[0].terminal


def _cnf_process(ws: _Workspace, order: list[Symbol], z: Symbol | None):
    """Make every non-Z production binary or terminal, in reverse order."""
    idx = {sym: i for i, sym in enumerate(order)}

    def expand_unit(entry: _Entry):
        target = entry.rhs[0]
        ws.rules.remove(entry)
        for t in ws.rules_of(target):
            ws.add_rule(entry.lhs, t.rhs, entry.count * t.count, entry.origin)

    def repair_above(k: int):
        # Higher-indexed (already processed) lhs may have been dirtied by a
        # substitution; their new units always point even higher.
        changed = True
        while changed:
            changed = False
            for entry in list(ws.rules):
                if entry.lhs == z or idx.get(entry.lhs, -1) <= k:
                    continue
                j = idx[entry.lhs]
                if _is_unit(entry):
                    l = idx.get(entry.rhs[0])
                    if l is None or l < j:
                        raise InternalError("unit production points backward")
                    if l == j:
                        ws.rules.remove(entry)
                        ws.notes.append(f"dropped self-unit at {entry.lhs.name}")
                    else:
                        expand_unit(entry)
                    changed = True
                elif len(entry.rhs) == 0:
                    raise InternalError("empty production appeared above the current index")

    for k in range(len(order) - 1, 0 if z is not None else -1, -1):
        current = order[k]
        while True:
            unit = next((r for r in ws.rules_of(current) if _is_unit(r)), None)
            if unit is not None:
                l = idx.get(unit.rhs[0])
                if l is None or l < k:
                    raise InternalError("unit production points backward")
                if l == k:
                    ws.rules.remove(unit)
                    ws.notes.append(f"dropped self-unit at {current.name}")
                else:
                    expand_unit(unit)
                continue
            eps = next((r for r in ws.rules_of(current) if len(r.rhs) == 0), None)
            if eps is None:
                break
            eps.count -= 1
            if eps.count == 0:
                ws.rules.remove(eps)
            # Compensating split; variants of the current symbol's own rules
            # that collapse to empty are recreations whose strings already
            # carry infinite multiplicity, so they are dropped rather than
            # re-eliminated (pre-existing empty copies are left alone).
            new_rules: list[_Entry] = []
            dropped = 0
            for r in ws.rules:
                for rhs, mult in _split_variants(r.rhs, current, EPSILON).items():
                    if r.lhs == current and len(rhs) == 0 and len(r.rhs) != 0:
                        dropped += r.count * mult
                        continue
                    new_rules.append(_Entry(r.lhs, rhs, r.count * mult, r.origin))
            ws.rules = new_rules
            if dropped:
                ws.notes.append(
                    f"dropped {dropped} recreated empty production(s) at {current.name}")
            new_start: dict[SymString, int] = {}
            for s, c in ws.start.items():
                for ns, mult in _split_variants(s, current, EPSILON).items():
                    new_start[ns] = new_start.get(ns, 0) + c * mult
            ws.start = new_start
            repair_above(k)


def _shape_ok(r: _Entry) -> bool:
    if len(r.rhs) == 1 and r.rhs[0].terminal:
        return True
    return len(r.rhs) == 2 and not r.rhs[0].terminal and not r.rhs[1].terminal


def chomsky_normal_form(g: Grammar, mode: str = "keep-z") -> TransformResult:
    """Convert to Chomsky normal form without losing parse counts.

    ``keep-z``: every production is A -> BC or A -> a except the pumping
    pair Z -> Z, Z -> _ (only present when the input is circular); the
    multilanguage is unchanged.  ``similar`` additionally drops Z -> Z,
    preserving the language up to support.  ``strict`` then also removes
    Z -> _ and reduces, producing plain Chomsky normal form with the same
    language as ``similar``.
    """
    if mode not in ("keep-z", "similar", "strict"):
        raise ValueError(f"unknown mode {mode!r}")
    chain = reduce_grammar(g)
    has_z = False
    if circular_nonterminals(chain.grammar):
        chain = _compose(chain, localize_circularity(chain.grammar))
        chain = _compose(chain, merge_cocircular(chain.grammar))
        has_z = True
    base = chain.grammar
    ws = _Workspace(base)
    _fold_pass(ws)
    _lift_pass(ws)
    chain = _compose(chain, ws.to_result(base))
    # Folding can make a fresh abbreviation mutually derivable with an
    # existing nonterminal (both its neighbors erasable); merge again until
    # single-symbol derivability is cycle-free.
    while any(len(cls) > 1 for cls in cocircular_classes(chain.grammar)):
        chain = _compose(chain, merge_cocircular(chain.grammar))
    base = chain.grammar
    z = base.symbol("Z") if has_z else None
    ws = _Workspace(base)
    order = _topological_order(base, z)
    _cnf_process(ws, order, z)
    for r in ws.rules:
        if z is not None and r.lhs == z:
            continue
        if not _shape_ok(r):
            raise InternalError(f"non-normal production survived: {r.lhs.name} -> {r.rhs.render()}")
    chain = _compose(chain, ws.to_result(base))

    if mode == "keep-z" or z is None:
        return chain
    # similar: drop the pumping rule Z -> Z
    current = chain.grammar
    ws2 = _Workspace(current)
    zz = next((r for r in ws2.rules if r.lhs == z and r.rhs == SymString([z])), None)
    if zz is not None:
        ws2.rules.remove(zz)
        ws2.notes.append("dropped Z -> Z (language preserved up to support)")
    if mode == "strict":
        ze = next((r for r in ws2.rules if r.lhs == z and len(r.rhs) == 0), None)
        if ze is not None:
            ze.count -= 1
            if ze.count == 0:
                ws2.rules.remove(ze)
            ws2.split_substitute(z, EPSILON)
            ws2.notes.append("eliminated Z -> _")
    chain = _compose(chain, ws2.to_result(current))
    if mode == "strict":
        chain = _compose(chain, reduce_grammar(chain.grammar))
    return chain


# ---------------------------------------------------------------------------
# left recursion removal and Greibach normal form
# ---------------------------------------------------------------------------


def _find_z(g: Grammar) -> Symbol | None:
    """The pumping nonterminal of a keep-z grammar, if present."""
    for nt in g.nonterminals:
        rules = g.productions_for(nt)
        if rules and all(
                p.rhs == SymString([nt]) or p.rhs == EPSILON for p in rules) and any(
                p.rhs == SymString([nt]) for p in rules):
            return nt
    return None


def _check_near_normal(g: Grammar, z: Symbol | None, allow_eps_primes: bool):
    leading = {p.rhs[0] for p in g.productions
               if len(p.rhs) >= 2 and not p.rhs[0].terminal}
    for p in g.productions:
        if z is not None and p.lhs == z:
            continue
        if len(p.rhs) == 2 and not p.rhs[0].terminal and not p.rhs[1].terminal:
            continue
        if len(p.rhs) >= 1 and p.rhs[0].terminal:
            continue
        if len(p.rhs) == 0 and allow_eps_primes and p.lhs not in leading:
            continue
        raise ContractViolation(
            f"production {p.lhs.name} -> {p.rhs.render()} is outside normal form")


def remove_left_recursion(g: Grammar, name: str) -> TransformResult:
    """Turn all left recursion through one nonterminal into right recursion.

    Expects a grammar whose productions are binary nonterminal pairs or
    terminal-leading strings (Chomsky normal form, with or without the
    pumping pair, or partially Greibach-shaped from earlier rounds).  Left
    paths ending in the target nonterminal are reversed via fresh primed
    companions, in one-to-one correspondence with the original parses.
    """
    x = g.symbol(name)
    if x.terminal or x not in g.nonterminals:
        raise ContractViolation(f"{name!r} is not a nonterminal of the grammar")
    z = _find_z(g)
    if x == z:
        raise ContractViolation("the pumping nonterminal cannot be processed")
    _check_near_normal(g, z, allow_eps_primes=True)
    for p in g.productions_for(x):
        if len(p.rhs) == 0:
            raise ContractViolation("the target nonterminal has an empty production")

    ws = _Workspace(g)
    used = set(ws.used_names())
    prime: dict[Symbol, Symbol] = {}
    for nt in sorted(g.nonterminals, key=_name_key):
        if nt == z:
            continue
        fresh = nt.name + "'"
        while fresh in used:
            fresh += "'"
        used.add(fresh)
        prime[nt] = nonterm(fresh)
    ws.nonterminals.update(prime.values())

    ws.rules = [r for r in ws.rules if r.lhs != x]
    for p in g.productions:
        if z is not None and p.lhs == z:
            continue
        if len(p.rhs) == 2 and not p.rhs[0].terminal and not p.rhs[1].terminal:
            b, c = p.rhs[0], p.rhs[1]
            ws.add_rule(prime[b], SymString([c, prime[p.lhs]]), 1, p.pid)
        elif len(p.rhs) >= 1 and p.rhs[0].terminal:
            ws.add_rule(x, p.rhs + SymString([prime[p.lhs]]), 1, p.pid)
    ws.add_rule(prime[x], EPSILON, 1, None)
    ws.notes.append(f"removed left recursion through {name}")
    return ws.to_result(g)


def greibach_normal_form(g: Grammar) -> TransformResult:
    """Rewrite a strict-normal-form grammar so every production starts with
    a terminal.

    Left recursion is removed one nonterminal at a time; the remaining
    left-corner order is expanded from the back; the introduced primed
    empty productions are eliminated last.  Unreachable leftovers are kept
    (reduce separately to discard them).
    """
    if _find_z(g) is not None:
        raise ContractViolation("Greibach conversion needs the strict normal form (no pumping pair)")
    _check_near_normal(g, None, allow_eps_primes=True)
    chain = TransformResult(
        grammar=g,
        provenance={p.pid: Multiset([p.pid]) for p in g.productions},
        created=frozenset(),
        notes=(),
    )
    while True:
        recursive = left_recursive_set(chain.grammar)
        if not recursive:
            break
        x = min(recursive, key=_name_key)
        step = remove_left_recursion(chain.grammar, x.name)
        if x in left_recursive_set(step.grammar) or not (
                left_recursive_set(step.grammar) <= recursive - {x}):
            raise InternalError("left recursion removal introduced new left recursion")
        chain = _compose(chain, step)

    current = chain.grammar
    ws = _Workspace(current)

    # Remove the companion empty productions first: once no nonterminal is
    # left-recursive the erasing structure is acyclic, so this terminates,
    # and the left-corner expansion below never meets an erasable head.
    # (The resulting unit productions join the ordered expansion.)
    steps = 0
    while True:
        eps = None
        for r in ws.rules:
            if len(r.rhs) == 0 and (eps is None or _name_key(r.lhs) < _name_key(eps.lhs)):
                eps = r
        if eps is None:
            break
        steps += 1
        if steps > 10 ** 6:
            raise InternalError("empty-production cleanup failed to terminate")
        eps.count -= 1
        if eps.count == 0:
            ws.rules.remove(eps)
        ws.split_substitute(eps.lhs, EPSILON)

    # Order nonterminals so nonterminal-leading rules only point forward.
    nodes = sorted(ws.nonterminals, key=_name_key)
    edges: dict[Symbol, set[Symbol]] = {nt: set() for nt in nodes}
    indeg = {nt: 0 for nt in nodes}
    for r in ws.rules:
        if len(r.rhs) >= 1 and not r.rhs[0].terminal:
            if r.rhs[0] == r.lhs:
                raise InternalError("self left corner after recursion removal")
            if r.rhs[0] not in edges[r.lhs]:
                edges[r.lhs].add(r.rhs[0])
                indeg[r.rhs[0]] += 1
    order: list[Symbol] = []
    ready = sorted((nt for nt in nodes if indeg[nt] == 0), key=_name_key)
    while ready:
        nt = ready.pop(0)
        order.append(nt)
        resort = False
        for nxt in edges[nt]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
                resort = True
        if resort:
            ready.sort(key=_name_key)
    if len(order) != len(nodes):
        raise InternalError("left-corner order does not exist after recursion removal")

    for nt in reversed(order):
        changed = True
        while changed:
            changed = False
            for entry in ws.rules_of(nt):
                if len(entry.rhs) >= 1 and not entry.rhs[0].terminal:
                    head = entry.rhs[0]
                    ws.rules.remove(entry)
                    for t in ws.rules_of(head):
                        if len(t.rhs) == 0 or not t.rhs[0].terminal:
                            raise InternalError(
                                "expansion target is not terminal-leading")
                        ws.add_rule(entry.lhs, t.rhs + entry.rhs[1:],
                                    entry.count * t.count, entry.origin)
                    changed = True
                    break
    ws.notes.append("removed companion empty productions and expanded left corners")
    chain = _compose(chain, ws.to_result(current))
    for p in chain.grammar.productions:
        if len(p.rhs) == 0 or not p.rhs[0].terminal:
            raise InternalError("a production escaped Greibach normal form")
    return chain


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def parse_pipeline(spec: str) -> list[tuple[str, str | None]]:
    steps = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, _, arg = chunk.partition(":")
        steps.append((name.strip(), arg.strip() or None))
    if not steps:
        raise ValueError("empty pipeline")
    return steps


def apply_pipeline(g: Grammar, spec: str) -> TransformResult:
    """Run a comma-separated pipeline like ``reduce,cnf:strict,nolr:X,gnf``."""
    chain = None
    for name, arg in parse_pipeline(spec):
        current = g if chain is None else chain.grammar
        if name == "reduce":
            step = reduce_grammar(current)
        elif name == "binarize":
            step = binarize(current)
        elif name == "merge":
            step = merge_cocircular(current)
        elif name == "localize":
            step = localize_circularity(current)
        elif name == "epsfree":
            step = eliminate_epsilons(current)
        elif name == "cnf":
            step = chomsky_normal_form(current, arg or "keep-z")
        elif name == "nolr":
            if not arg:
                raise ValueError("nolr needs a nonterminal argument, e.g. nolr:X")
            step = remove_left_recursion(current, arg)
        elif name == "gnf":
            step = greibach_normal_form(current)
        elif name == "eliminate":
            if arg is None or not arg.isdigit():
                raise ValueError("eliminate needs a pid argument, e.g. eliminate:3")
            step = eliminate(current, int(arg))
        elif name == "expand":
            if arg is None or "." not in arg:
                raise ValueError("expand needs pid.index, e.g. expand:3.0")
            pid_text, _, idx_text = arg.partition(".")
            step = expand_rule(current, int(pid_text), int(idx_text))
        elif name == "abbreviate":
            if arg is None or "=" not in arg:
                raise ValueError("abbreviate needs NAME=SYM.SYM..., e.g. abbreviate:W=A.a")
            new_name, _, body_text = arg.partition("=")
            body = SymString(current.symbol(tok) for tok in body_text.split("."))
            step = abbreviate(current, body, new_name)
        else:
            raise ValueError(f"unknown pipeline step {name!r}")
        chain = step if chain is None else _compose(chain, step)
    return chain
