"""Exact multilanguage semantics: parse counting with infinity detection.

The multilanguage of a grammar assigns every terminal string a count equal
to its number of parses, a value in N ∪ {INF}.  Counting works on any
grammar (no normal form needed) in three layers:

1. empty-string parse counts per nonterminal, with INF exactly for the
   nonterminals that reach a cycle of nullable productions;
2. a "unit context" matrix U, where U[A][B] sums, over productions
   A -> alpha B beta, the number of ways alpha and beta erase; its closure
   U* (computed with Lehmann's algorithm over the counting semiring)
   accounts for arbitrarily long chains of such steps, yielding INF when a
   chain can repeat;
3. per length (or per substring span) a linear system m = U m + b whose
   least solution U* b adds the contributions of productions that split
   their material across two or more children.

An independent oracle counts parse forests by explicit bounded tree
enumeration and never touches the machinery above.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

from .counts import INF, Count, star
from .errors import CfmlError, GrammarError, InternalError
from .grammar import Grammar, Symbol, SymString
from .multiset import Multiset


class OracleCapExceeded(CfmlError):
    """Raised when bounded tree enumeration exceeds its safety cap."""


# ---------------------------------------------------------------------------
# nullability and circularity
# ---------------------------------------------------------------------------


def nullable_set(g: Grammar) -> frozenset[Symbol]:
    """Nonterminals that derive the empty string."""
    nullable: set[Symbol] = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs in nullable:
                continue
            if all((not v.terminal) and v in nullable for v in p.rhs):
                nullable.add(p.lhs)
                changed = True
    return frozenset(nullable)


def _erasing_productions(g: Grammar, nullable) -> list:
    """Productions whose whole right side can erase."""
    return [p for p in g.productions
            if all((not v.terminal) and v in nullable for v in p.rhs)]


def _reach(graph: dict, starts: Iterable) -> set:
    seen = set(starts)
    frontier = list(seen)
    while frontier:
        node = frontier.pop()
        for nxt in graph.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def _unit_context_graph(g: Grammar, nullable) -> dict:
    """Edges A -> B present when A => alpha B beta with erasable context."""
    graph: dict[Symbol, set[Symbol]] = {nt: set() for nt in g.nonterminals}
    for p in g.productions:
        for i, sym in enumerate(p.rhs):
            if sym.terminal:
                continue
            others = [v for k, v in enumerate(p.rhs) if k != i]
            if all((not v.terminal) and v in nullable for v in others):
                graph[p.lhs].add(sym)
    return graph


def circular_nonterminals(g: Grammar) -> frozenset[Symbol]:
    """Nonterminals A with a derivation A ->+ A."""
    graph = _unit_context_graph(g, nullable_set(g))
    return frozenset(
        nt for nt in g.nonterminals if nt in _reach(graph, graph[nt]))


def cocircular_classes(g: Grammar) -> tuple[frozenset[Symbol], ...]:
    """Partition of the circular nonterminals by mutual derivability."""
    graph = _unit_context_graph(g, nullable_set(g))
    circular = [nt for nt in g.nonterminals if nt in _reach(graph, graph[nt])]
    reach = {nt: _reach(graph, graph[nt]) for nt in circular}
    classes: list[set[Symbol]] = []
    for nt in circular:
        for cls in classes:
            member = next(iter(cls))
            if member in reach[nt] and nt in reach[member]:
                cls.add(nt)
                break
        else:
            classes.append({nt})
    classes.sort(key=lambda cls: min((len(s.name), s.name) for s in cls))
    return tuple(frozenset(cls) for cls in classes)


def left_recursive_set(g: Grammar) -> frozenset[Symbol]:
    """Nonterminals X with X ->+ X omega for some omega."""
    nullable = nullable_set(g)
    graph: dict[Symbol, set[Symbol]] = {nt: set() for nt in g.nonterminals}
    for p in g.productions:
        for i, sym in enumerate(p.rhs):
            if sym.terminal:
                break
            graph[p.lhs].add(sym)
            if sym not in nullable:
                break
    return frozenset(
        nt for nt in g.nonterminals if nt in _reach(graph, graph[nt]))


def nullable_counts(g: Grammar) -> dict[Symbol, Count]:
    """Exact number of empty-string parses for every nonterminal.

    A nonterminal gets INF exactly when it reaches, through erasable
    context, a cycle of erasing productions; such a cycle can be spliced
    into an erasing parse arbitrarily often.
    """
    nullable = nullable_set(g)
    eps_prods = _erasing_productions(g, nullable)
    graph: dict[Symbol, set[Symbol]] = {nt: set() for nt in g.nonterminals}
    for p in eps_prods:
        graph[p.lhs].update(p.rhs)
    cyclic = {nt for nt in g.nonterminals if nt in _reach(graph, graph[nt])}
    infinite = {nt for nt in g.nonterminals
                if _reach(graph, graph[nt]) & cyclic or nt in cyclic}

    counts: dict[Symbol, Count] = {nt: 0 for nt in g.nonterminals}
    for nt in infinite:
        counts[nt] = INF
    by_lhs: dict[Symbol, list] = {}
    for p in eps_prods:
        by_lhs.setdefault(p.lhs, []).append(p)
    remaining = [nt for nt in nullable if nt not in infinite]
    # The erasing-production graph is acyclic on these; evaluate bottom-up.
    done: set[Symbol] = set(infinite)

    def value(nt: Symbol, stack: set) -> Count:
        if nt in done:
            return counts[nt]
        if nt in stack:
            raise InternalError("cycle escaped the infinite-count analysis")
        stack.add(nt)
        total: Count = 0
        for p in by_lhs.get(nt, ()):
            prod: Count = 1
            for v in p.rhs:
                prod = prod * value(v, stack)
                if prod == 0:
                    break
            total = total + prod
        stack.discard(nt)
        counts[nt] = total
        done.add(nt)
        return total

    for nt in remaining:
        value(nt, set())
    return counts


@dataclass(frozen=True)
class CircularityReport:
    """Circular nonterminals, their mutual-derivability classes, and
    empty-string parse counts."""

    circular: frozenset[Symbol]
    cocircular_classes: tuple[frozenset[Symbol], ...]
    nullable_counts: dict[Symbol, Count]


def analyze_circularity(g: Grammar) -> CircularityReport:
    return CircularityReport(
        circular=circular_nonterminals(g),
        cocircular_classes=cocircular_classes(g),
        nullable_counts=nullable_counts(g),
    )


# ---------------------------------------------------------------------------
# the counting engine
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _compositions(total: int, parts: int) -> tuple[tuple[int, ...], ...]:
    if parts == 0:
        return ((),) if total == 0 else ()
    if parts == 1:
        return ((total,),)
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return tuple(out)


def _eps_of(e: dict, sym: Symbol) -> Count:
    return 0 if sym.terminal else e[sym]


def _grouped_rules(g: Grammar) -> dict:
    grouped: dict[tuple, int] = {}
    for p in g.productions:
        key = (p.lhs, p.rhs)
        grouped[key] = grouped.get(key, 0) + 1
    return grouped


def _unit_matrix(g: Grammar, e: dict) -> dict:
    nts = list(g.nonterminals)
    U: dict[Symbol, dict[Symbol, Count]] = {a: {b: 0 for b in nts} for a in nts}
    for (lhs, rhs), w in _grouped_rules(g).items():
        for i, sym in enumerate(rhs):
            if sym.terminal:
                continue
            coeff: Count = w
            for k, v in enumerate(rhs):
                if k == i:
                    continue
                coeff = coeff * _eps_of(e, v)
                if coeff == 0:
                    break
            if coeff != 0:
                U[lhs][sym] = U[lhs][sym] + coeff
    return U


def _star_matrix(U: dict, order: list) -> dict:
    """Lehmann's closure: sum over all chains, INF when chains repeat."""
    n = len(order)
    M = [[U[order[i]][order[j]] for j in range(n)] for i in range(n)]
    for k in range(n):
        skk = star(M[k][k])
        N = [row[:] for row in M]
        for i in range(n):
            ik = M[i][k]
            if ik == 0:
                continue
            factor = ik * skk
            for j in range(n):
                kj = M[k][j]
                if kj != 0:
                    N[i][j] = N[i][j] + factor * kj
        M = N
    out = {a: {} for a in order}
    for i, a in enumerate(order):
        for j, b in enumerate(order):
            value = M[i][j]
            if i == j:
                value = value + 1
            out[a][b] = value
    return out


def _apply_closure(Ustar: dict, b: dict, nts: list) -> dict:
    result = {}
    for a in nts:
        row = Ustar[a]
        acc: dict = {}
        for bsym in nts:
            coeff = row[bsym]
            if coeff == 0:
                continue
            for key, c in b[bsym].items():
                add = coeff * c
                if add != 0:
                    acc[key] = acc.get(key, 0) + add
        result[a] = acc
    return result


def _concat_dicts(d1: dict, d2: dict) -> dict:
    out: dict = {}
    for k1, c1 in d1.items():
        for k2, c2 in d2.items():
            c = c1 * c2
            if c != 0:
                key = k1 + k2
                out[key] = out.get(key, 0) + c
    return out


def _language_strata(g: Grammar, max_len: int):
    """Per symbol and length, the multiset of derivable length-n strings.

    Returns (e, strata) with strata[sym][n] a dict from name tuples to
    counts, exact including INF entries, for 1 <= n <= max_len.
    """
    e = nullable_counts(g)
    nts = sorted(g.nonterminals, key=lambda s: (len(s.name), s.name))
    Ustar = _star_matrix(_unit_matrix(g, e), nts)
    grouped = _grouped_rules(g)

    strata: dict[Symbol, list] = {}
    for sym in g.vocabulary:
        strata[sym] = [dict() for _ in range(max_len + 1)]
    for t in g.terminals:
        if max_len >= 1:
            strata[t][1][(t.name,)] = 1

    for n in range(1, max_len + 1):
        b: dict[Symbol, dict] = {a: {} for a in nts}
        for (lhs, rhs), w in grouped.items():
            arity = len(rhs)
            if arity == 0:
                continue
            for comp in _compositions(n, arity):
                positive = [i for i, ni in enumerate(comp) if ni > 0]
                if len(positive) == 1 and not rhs[positive[0]].terminal:
                    continue  # the linear U part covers full-width unit steps
                scalar: Count = w
                parts: list[dict] = []
                dead = False
                for i, ni in enumerate(comp):
                    v = rhs[i]
                    if ni == 0:
                        scalar = scalar * _eps_of(e, v)
                        if scalar == 0:
                            dead = True
                            break
                    else:
                        d = strata[v][ni]
                        if not d:
                            dead = True
                            break
                        parts.append(d)
                if dead:
                    continue
                acc = {(): scalar}
                for d in parts:
                    acc = _concat_dicts(acc, d)
                target = b[lhs]
                for key, c in acc.items():
                    target[key] = target.get(key, 0) + c
        solved = _apply_closure(Ustar, b, nts)
        for a in nts:
            strata[a][n] = solved[a]
    return e, strata


def _compose_string(g: Grammar, e: dict, strata, source: SymString,
                    max_len: int, seed: Count) -> dict:
    acc: dict = {(): seed}
    for sym in source:
        new: dict = {}
        eps = _eps_of(e, sym)
        per_len = strata[sym]
        for key, c in acc.items():
            room = max_len - len(key)
            if eps != 0:
                c0 = c * eps
                if c0 != 0:
                    new[key] = new.get(key, 0) + c0
            for n in range(1, room + 1):
                for tail, cn in per_len[n].items():
                    add = c * cn
                    if add != 0:
                        nk = key + tail
                        new[nk] = new.get(nk, 0) + add
        acc = new
        if not acc:
            break
    return acc


def enumerate_language(g: Grammar, max_len: int) -> Multiset:
    """The grammar's multilanguage restricted to strings of length <= max_len.

    Counts are exact, including INF entries.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    e, strata = _language_strata(g, max_len)
    total: dict = {}
    for source, weight in g.start.items():
        for key, c in _compose_string(g, e, strata, source, max_len, weight).items():
            total[key] = total.get(key, 0) + c
    by_name = {t.name: t for t in g.terminals}
    return Multiset.from_counts(
        {SymString(by_name[n] for n in key): c for key, c in total.items()})


def _check_terminal_string(g: Grammar, target: SymString):
    for sym in target:
        if not sym.terminal or sym not in g.terminals:
            raise GrammarError(f"target string must be over the terminal alphabet; got {sym.name!r}")


def count_parses(g: Grammar, source: SymString, target: SymString) -> Count:
    """Exact number of parses of ``target`` as ``source`` (INF possible)."""
    _check_terminal_string(g, target)
    for sym in source:
        if sym not in g.vocabulary:
            raise GrammarError(f"source string uses unknown symbol {sym.name!r}")
    n = len(target)
    names = target.names()
    e = nullable_counts(g)
    nts = sorted(g.nonterminals, key=lambda s: (len(s.name), s.name))
    Ustar = _star_matrix(_unit_matrix(g, e), nts)
    grouped = _grouped_rules(g)

    cells: dict[tuple, Count] = {}

    def cell_value(sym: Symbol, i: int, j: int) -> Count:
        if i == j:
            return _eps_of(e, sym)
        if sym.terminal:
            return 1 if (j == i + 1 and names[i] == sym.name) else 0
        return cells.get((sym, i, j), 0)

    for span in range(1, n + 1):
        for i in range(0, n - span + 1):
            j = i + span
            b: dict[Symbol, Count] = {a: 0 for a in nts}
            for (lhs, rhs), w in grouped.items():
                arity = len(rhs)
                if arity == 0:
                    continue
                total: Count = 0
                for comp in _compositions(span, arity):
                    positive = [k for k, nk in enumerate(comp) if nk > 0]
                    if len(positive) == 1 and not rhs[positive[0]].terminal:
                        continue
                    prod: Count = w
                    pos = i
                    for k, nk in enumerate(comp):
                        prod = prod * cell_value(rhs[k], pos, pos + nk)
                        if prod == 0:
                            break
                        pos += nk
                    total = total + prod
                if total != 0:
                    b[lhs] = b[lhs] + total
            for a in nts:
                value: Count = 0
                for bsym in nts:
                    coeff = Ustar[a][bsym]
                    if coeff != 0 and b[bsym] != 0:
                        value = value + coeff * b[bsym]
                if value != 0:
                    cells[(a, i, j)] = value

    vec: list[Count] = [0] * (n + 1)
    vec[0] = 1
    for sym in source:
        nxt: list[Count] = [0] * (n + 1)
        for i in range(n + 1):
            if vec[i] == 0:
                continue
            for j in range(i, n + 1):
                c = cell_value(sym, i, j)
                if c != 0:
                    nxt[j] = nxt[j] + vec[i] * c
        vec = nxt
    return vec[n]


def count_derivations(g: Grammar, source: SymString, target: SymString,
                      step_bound: int) -> int:
    """Number of derivation sequences from source to target in <= step_bound steps."""
    if step_bound < 0:
        raise ValueError("step_bound must be >= 0")
    _check_terminal_string(g, target)
    memo: dict[tuple, int] = {}

    def walk(s: SymString, budget: int) -> int:
        key = (s, budget)
        got = memo.get(key)
        if got is not None:
            return got
        total = 1 if s == target else 0
        if budget > 0:
            for succ, c in g.step(s).items():
                total += c * walk(succ, budget - 1)
        memo[key] = total
        return total

    return walk(source, step_bound)


# ---------------------------------------------------------------------------
# the brute-force oracle (independent of the engine above)
# ---------------------------------------------------------------------------


def _oracle_min_eps(g: Grammar, nullable) -> dict:
    """Minimal internal-node count of an erasing parse, per nullable symbol."""
    best: dict[Symbol, int] = {}
    eps_prods = _erasing_productions(g, nullable)
    changed = True
    while changed:
        changed = False
        for p in eps_prods:
            total = 1
            ok = True
            for v in p.rhs:
                sub = best.get(v)
                if sub is None:
                    ok = False
                    break
                total += sub
            if ok and (p.lhs not in best or total < best[p.lhs]):
                best[p.lhs] = total
                changed = True
    return best


def _oracle_min_tree(g: Grammar, names: tuple, nullable, min_eps) -> dict:
    """Minimal internal-node count per (symbol, i, j) cell, if parseable."""
    n = len(names)
    best: dict[tuple, int] = {}
    for t in g.terminals:
        for i in range(n):
            if names[i] == t.name:
                best[(t, i, i + 1)] = 0
    for nt in g.nonterminals:
        if nt in min_eps:
            for i in range(n + 1):
                best[(nt, i, i)] = min_eps[nt]

    changed = True
    while changed:
        changed = False
        for p in g.productions:
            arity = len(p.rhs)
            for i in range(n + 1):
                for j in range(i, n + 1):
                    total_best = None
                    for comp in _compositions(j - i, arity):
                        total = 1
                        ok = True
                        pos = i
                        for k, nk in enumerate(comp):
                            sub = best.get((p.rhs[k], pos, pos + nk))
                            if sub is None:
                                ok = False
                                break
                            total += sub
                            pos += nk
                        if ok and (total_best is None or total < total_best):
                            total_best = total
                    if total_best is not None:
                        key = (p.lhs, i, j)
                        if key not in best or total_best < best[key]:
                            best[key] = total_best
                            changed = True
    return best


def _min_forest_table(names_len: int, syms: tuple, i: int, j: int,
                      min_tree: dict, memo: dict):
    key = (syms, i, j)
    got = memo.get(key, "missing")
    if got != "missing":
        return got
    if not syms:
        result = 0 if i == j else None
    else:
        first, rest = syms[0], syms[1:]
        result = None
        for k in range(i, j + 1):
            head = min_tree.get((first, i, k))
            if head is None:
                continue
            tail = _min_forest_table(names_len, rest, k, j, min_tree, memo)
            if tail is None:
                continue
            cand = head + tail
            if result is None or cand < result:
                result = cand
    memo[key] = result
    return result


def oracle_count_parses(g: Grammar, source: SymString, target: SymString,
                        node_bound: int, *, cap: int | None = None) -> int:
    """Count parse forests of target as source with <= node_bound internal nodes.

    Works by exhaustive enumeration of trees (with minimal-size pruning), so
    it is monotone in ``node_bound`` and terminates for every grammar.  With
    ``cap`` set, raises :class:`OracleCapExceeded` after visiting that many
    forests.
    """
    if node_bound < 0:
        raise ValueError("node_bound must be >= 0")
    _check_terminal_string(g, target)
    names = target.names()
    nullable = nullable_set(g)
    min_eps = _oracle_min_eps(g, nullable)
    min_tree = _oracle_min_tree(g, names, nullable, min_eps)
    forest_memo: dict = {}
    n = len(names)

    def min_forest(syms: tuple, i: int, j: int):
        return _min_forest_table(n, syms, i, j, min_tree, forest_memo)

    def tree_sizes(sym: Symbol, i: int, j: int, budget: int):
        low = min_tree.get((sym, i, j))
        if low is None or low > budget:
            return
        if sym.terminal:
            yield 0
            return
        for p in g.productions_for(sym):
            rest_budget = budget - 1
            if rest_budget < 0:
                continue
            yield from (1 + s for s in forest_sizes(tuple(p.rhs), i, j, rest_budget))

    def forest_sizes(syms: tuple, i: int, j: int, budget: int):
        low = min_forest(syms, i, j)
        if low is None or low > budget:
            return
        if not syms:
            yield 0
            return
        first, rest = syms[0], syms[1:]
        for k in range(i, j + 1):
            head_low = min_tree.get((first, i, k))
            if head_low is None:
                continue
            tail_low = min_forest(rest, k, j)
            if tail_low is None or head_low + tail_low > budget:
                continue
            for s1 in tree_sizes(first, i, k, budget - tail_low):
                for s2 in forest_sizes(rest, k, j, budget - s1):
                    yield s1 + s2

    count = 0
    for _ in forest_sizes(tuple(source), 0, n, node_bound):
        count += 1
        if cap is not None and count > cap:
            raise OracleCapExceeded(
                f"more than {cap} forests within node bound {node_bound}")
    return count


def _oracle_min_circular(g: Grammar, names: tuple, nullable, min_eps,
                         min_tree: dict, circular) -> dict:
    """Minimal size of a parse containing a circular-labeled node, per cell."""
    # Erasing side first.
    best_eps: dict[Symbol, int] = {v: min_eps[v] for v in min_eps if v in circular}
    eps_prods = _erasing_productions(g, nullable)
    changed = True
    while changed:
        changed = False
        for p in eps_prods:
            if all(v in min_eps for v in p.rhs):
                for pick in range(len(p.rhs)):
                    if p.rhs[pick] not in best_eps:
                        continue
                    total = 1 + sum(
                        best_eps[v] if k == pick else min_eps[v]
                        for k, v in enumerate(p.rhs))
                    if p.lhs not in best_eps or total < best_eps[p.lhs]:
                        best_eps[p.lhs] = total
                        changed = True
    n = len(names)
    best: dict[tuple, int] = {}
    for nt in g.nonterminals:
        for i in range(n + 1):
            for j in range(i, n + 1):
                base = min_tree.get((nt, i, j))
                if base is not None and nt in circular:
                    best[(nt, i, j)] = base
        if nt in best_eps:
            for i in range(n + 1):
                key = (nt, i, i)
                if key not in best or best_eps[nt] < best[key]:
                    best[key] = best_eps[nt]

    def sub_plain(sym, i, j):
        return min_tree.get((sym, i, j))

    def sub_circ(sym, i, j):
        if i == j and not sym.terminal:
            plain = best_eps.get(sym)
            cell = best.get((sym, i, j))
            if plain is None:
                return cell
            if cell is None:
                return plain
            return min(plain, cell)
        return best.get((sym, i, j))

    changed = True
    while changed:
        changed = False
        for p in g.productions:
            arity = len(p.rhs)
            for i in range(n + 1):
                for j in range(i, n + 1):
                    for comp in _compositions(j - i, arity):
                        spans = []
                        pos = i
                        ok = True
                        for k, nk in enumerate(comp):
                            spans.append((p.rhs[k], pos, pos + nk))
                            if sub_plain(*spans[-1]) is None:
                                ok = False
                                break
                            pos += nk
                        if not ok:
                            continue
                        plain_total = 1 + sum(sub_plain(*s) for s in spans)
                        for pick in range(arity):
                            c = sub_circ(*spans[pick])
                            if c is None:
                                continue
                            total = plain_total - sub_plain(*spans[pick]) + c
                            key = (p.lhs, i, j)
                            if key not in best or total < best[key]:
                                best[key] = total
                                changed = True
    return best


def _oracle_max_tree(g: Grammar, names: tuple, min_eps, min_tree: dict,
                     min_circ: dict) -> dict:
    """Exact maximal parse size per parseable cell; requires no circular parse."""
    nullable_sizes: dict[Symbol, int] = {}
    n = len(names)

    def max_eps(sym: Symbol, stack: frozenset) -> int:
        if sym in nullable_sizes:
            return nullable_sizes[sym]
        if sym in stack:
            raise InternalError("erasing cycle inside a finite cell")
        best = None
        for p in g.productions_for(sym):
            if not all((not v.terminal) and v in min_eps for v in p.rhs):
                continue
            total = 1 + sum(max_eps(v, stack | {sym}) for v in p.rhs)
            if best is None or total > best:
                best = total
        if best is None:
            raise InternalError("max_eps called on a non-erasable symbol")
        nullable_sizes[sym] = best
        return best

    memo: dict[tuple, int] = {}

    def max_tree(sym: Symbol, i: int, j: int, stack: frozenset) -> int:
        if sym.terminal:
            return 0
        if i == j:
            return max_eps(sym, frozenset())
        key = (sym, i, j)
        if key in memo:
            return memo[key]
        if key in stack:
            raise InternalError("span cycle inside a finite cell")
        best = None
        for p in g.productions_for(sym):
            for comp in _compositions(j - i, len(p.rhs)):
                pos = i
                parts = []
                ok = True
                for k, nk in enumerate(comp):
                    part = (p.rhs[k], pos, pos + nk)
                    if nk == 0:
                        if p.rhs[k].terminal or p.rhs[k] not in min_eps:
                            ok = False
                            break
                    elif min_tree.get(part) is None:
                        ok = False
                        break
                    parts.append(part)
                    pos += nk
                if not ok:
                    continue
                total = 1
                for part in parts:
                    total += max_tree(part[0], part[1], part[2], stack | {key})
                if best is None or total > best:
                    best = total
        if best is None:
            raise InternalError("max_tree called on an unparseable cell")
        memo[key] = best
        return best

    out: dict[tuple, int] = {}
    for (sym, i, j) in min_tree:
        if (sym, i, j) not in min_circ:
            out[(sym, i, j)] = max_tree(sym, i, j, frozenset())
    return out


def _pump_increment(g: Grammar, nullable, min_eps, circular) -> int:
    """Upper bound on the smallest parse-size increase a circular node allows."""
    graph_weights: dict[Symbol, list] = {nt: [] for nt in g.nonterminals}
    for p in g.productions:
        for i, sym in enumerate(p.rhs):
            if sym.terminal:
                continue
            others = [v for k, v in enumerate(p.rhs) if k != i]
            if all((not v.terminal) and v in nullable for v in others):
                weight = 1 + sum(min_eps[v] for v in others)
                graph_weights[p.lhs].append((sym, weight))
    worst = 1
    for start in circular:
        # Shortest closed walk back to start.
        dist: dict[Symbol, int] = {}
        frontier = [(start, 0)]
        best_cycle = None
        while frontier:
            node, d = frontier.pop()
            for nxt, w in graph_weights[node]:
                nd = d + w
                if nxt == start:
                    if best_cycle is None or nd < best_cycle:
                        best_cycle = nd
                    continue
                if nxt not in dist or nd < dist[nxt]:
                    dist[nxt] = nd
                    frontier.append((nxt, nd))
        if best_cycle is not None and best_cycle > worst:
            worst = best_cycle
    return worst


@dataclass(frozen=True)
class OracleBounds:
    """Size analysis of the parses of one (source, target) cell."""

    parseable: bool
    infinite: bool
    min_size: int | None
    max_size: int | None      # None when infinite
    min_circular: int | None  # smallest parse containing a circular node
    pump: int | None          # probe spacing for infinite cells


def oracle_bounds(g: Grammar, source: SymString, target: SymString) -> OracleBounds:
    """Size bounds driving oracle comparisons, from span analysis only."""
    _check_terminal_string(g, target)
    names = target.names()
    n = len(names)
    nullable = nullable_set(g)
    min_eps = _oracle_min_eps(g, nullable)
    min_tree = _oracle_min_tree(g, names, nullable, min_eps)
    circular = circular_nonterminals(g)
    min_circ = _oracle_min_circular(g, names, nullable, min_eps, min_tree, circular)

    forest_memo: dict = {}
    low = _min_forest_table(n, tuple(source), 0, n, min_tree, forest_memo)
    if low is None:
        return OracleBounds(False, False, None, 0, None, None)

    # Smallest forest containing a circular node, if any.
    def circ_forest(syms: tuple, i: int, j: int):
        if not syms:
            return None
        first, rest = syms[0], syms[1:]
        best = None
        for k in range(i, j + 1):
            head = min_tree.get((first, i, k))
            if head is None:
                continue
            tail_plain = _min_forest_table(n, rest, k, j, min_tree, forest_memo)
            if tail_plain is None:
                continue
            head_circ = min_circ.get((first, i, k))
            if head_circ is not None:
                cand = head_circ + tail_plain
                if best is None or cand < best:
                    best = cand
            tail_circ = circ_forest(rest, k, j)
            if tail_circ is not None:
                cand = head + tail_circ
                if best is None or cand < best:
                    best = cand
        return best

    circ_low = circ_forest(tuple(source), 0, n)
    if circ_low is not None:
        pump = _pump_increment(g, nullable, min_eps, circular)
        return OracleBounds(True, True, low, None, circ_low, pump)

    maxes = _oracle_max_tree(g, names, min_eps, min_tree, min_circ)

    def max_forest(syms: tuple, i: int, j: int):
        if not syms:
            return 0 if i == j else None
        first, rest = syms[0], syms[1:]
        best = None
        for k in range(i, j + 1):
            head = maxes.get((first, i, k))
            if head is None:
                continue
            tail = max_forest(rest, k, j)
            if tail is None:
                continue
            cand = head + tail
            if best is None or cand > best:
                best = cand
        return best

    high = max_forest(tuple(source), 0, n)
    if high is None:
        raise InternalError("parseable cell lost its maximal size")
    return OracleBounds(True, False, low, high, None, None)


def oracle_stability_bound(g: Grammar, source: SymString, target: SymString) -> int:
    """A node bound at which the oracle count has provably stabilized.

    Only meaningful for cells with finitely many parses; raises
    :class:`ContractViolation`-like errors via :class:`InternalError` when
    called on an infinite cell.
    """
    bounds = oracle_bounds(g, source, target)
    if not bounds.parseable:
        return 0
    if bounds.infinite:
        raise InternalError("stability bound requested for an infinite cell")
    return bounds.max_size
