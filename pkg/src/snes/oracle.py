"""Naive centralized evaluator for the supported SPARQL subset.

This is the trust anchor of the test suite: nested loops over the whole
dataset, no indexes beyond grouping triples by predicate, no plan.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Optional

from .rdf import Term, TermKind, Triple, numeric_from_text, to_float32
from .sparql import (
    AggregateExpr,
    Comparison,
    ParsedQuery,
    UnsupportedConstruct,
    Variable,
)

Solution = dict[Variable, Term]
Value = Optional[Term]


@dataclass
class BindingSet:
    """Result rows over a fixed variable list; ``ordered`` says whether row order is significant."""

    variables: tuple[str, ...]
    rows: list[tuple[Value, ...]] = field(default_factory=list)
    ordered: bool = False

    def __len__(self) -> int:
        return len(self.rows)

    def as_dicts(self) -> list[dict[str, Term]]:
        return [{v: t for v, t in zip(self.variables, row) if t is not None} for row in self.rows]

    def multiset(self) -> Counter:
        return Counter(self.rows)

    def column(self, name: str) -> list[Value]:
        i = self.variables.index(name)
        return [row[i] for row in self.rows]


# -- term semantics ------------------------------------------------------------------------


def _num(t: Term) -> float:
    return float(t.value)


def _coerce(a: Term, b: Term) -> tuple[Term, Term]:
    """Quoted numeric text compared against a number is read as a number."""
    if a.is_numeric and b.kind is TermKind.STRING_LITERAL:
        nb = numeric_from_text(b.value)
        if nb is not None:
            return a, nb
    if b.is_numeric and a.kind is TermKind.STRING_LITERAL:
        na = numeric_from_text(a.value)
        if na is not None:
            return na, b
    return a, b


def compare_values(a: Value, op: str, b: Value) -> bool:
    if a is None or b is None:
        return False
    a, b = _coerce(a, b)
    if a.is_numeric and b.is_numeric:
        x, y = _num(a), _num(b)
        return {"<": x < y, "<=": x <= y, "=": x == y, "!=": x != y, ">=": x >= y, ">": x > y}[op]
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if a.kind is TermKind.STRING_LITERAL and b.kind is TermKind.STRING_LITERAL:
        x, y = a.value, b.value
        return {"<": x < y, "<=": x <= y, ">=": x >= y, ">": x > y}[op]
    return False


def sort_key(t: Value) -> tuple:
    """Total order: unbound, IRIs, numbers by value, strings."""
    if t is None:
        return (0,)
    if t.kind is TermKind.IRI:
        return (1, t.value)
    if t.is_numeric:
        v = _num(t)
        if math.isnan(v):
            return (2, math.inf, 1, 0)
        return (2, v, 0 if t.kind is TermKind.INTEGER_LITERAL else 1, 0)
    return (3, t.value)


def row_key(row: Sequence[Value]) -> tuple:
    return tuple(sort_key(t) for t in row)


# -- aggregates ----------------------------------------------------------------------------


def aggregate_value(func: str, values: list[Term]) -> Value:
    """SPARQL-style aggregate over the bound values of one group; non-numbers are skipped."""
    if func == "COUNT":
        return Term.integer(len(values))
    nums = [v for v in values if v.is_numeric]
    if func in ("MIN", "MAX"):
        if not nums:
            return None
        pick = min if func == "MIN" else max
        return pick(nums, key=lambda t: (_num(t), t.kind is TermKind.FLOAT_LITERAL) if func == "MIN"
                    else (_num(t), t.kind is TermKind.INTEGER_LITERAL))
    if not nums:
        return Term.integer(0)
    if all(v.kind is TermKind.INTEGER_LITERAL for v in nums):
        total = sum(v.value for v in nums)
        if func == "SUM":
            return Term.integer(total)
        return Term.float(total / len(nums))
    total_f = math.fsum(_num(v) for v in nums)
    if func == "SUM":
        return Term.float(total_f)
    return Term.float(total_f / len(nums))


# -- evaluation ----------------------------------------------------------------------------


def _match(pattern, triple: Triple, sol: Solution) -> Optional[Solution]:
    out = dict(sol)
    for pt, t in zip(pattern, triple):
        if isinstance(pt, Variable):
            bound = out.get(pt)
            if bound is None:
                out[pt] = t
            elif bound != t:
                return None
        elif pt != t:
            return None
    return out


def _operand(x, sol: dict) -> Value:
    if isinstance(x, Variable):
        return sol.get(x)
    if isinstance(x, AggregateExpr):
        return sol.get(x)
    return x


def eval_bgp(dataset: Iterable[Triple], pq: ParsedQuery) -> list[Solution]:
    by_pred: dict[Term, list[Triple]] = defaultdict(list)
    everything: list[Triple] = []
    for t in dict.fromkeys(dataset):
        by_pred[t.predicate].append(t)
        everything.append(t)
    solutions: list[Solution] = [{}]
    for pattern in pq.patterns:
        candidates = everything if isinstance(pattern.predicate, Variable) else by_pred.get(pattern.predicate, [])
        solutions = [m for sol in solutions for t in candidates if (m := _match(pattern, t, sol)) is not None]
    return [s for s in solutions if all(compare_values(_operand(c.lhs, s), c.op, _operand(c.rhs, s)) for c in pq.filters)]


def _aggregate_rows(pq: ParsedQuery, solutions: list[Solution]) -> list[dict]:
    groups: dict[tuple, list[Solution]] = {}
    if pq.group_by:
        for s in solutions:
            groups.setdefault(tuple(s[v] for v in pq.group_by), []).append(s)
    else:
        groups[()] = solutions
    needed: list[AggregateExpr] = [item.aggregate for item in pq.aggregates]
    for c in pq.having:
        for x in (c.lhs, c.rhs):
            if isinstance(x, AggregateExpr) and x not in needed:
                needed.append(x)
    out = []
    for key, members in groups.items():
        row: dict = dict(zip(pq.group_by, key))
        for agg in needed:
            values = [m[agg.arg] for m in members] if agg.arg is not None else [Term.integer(0)] * len(members)
            row[agg] = aggregate_value(agg.func, values)
        for item in pq.aggregates:
            row[item.var] = row[item.aggregate]
        if all(compare_values(_operand(c.lhs, row), c.op, _operand(c.rhs, row)) for c in pq.having):
            out.append(row)
    return out


def finalize(pq: ParsedQuery, rows: list[dict]) -> BindingSet:
    """ORDER BY, projection, DISTINCT, OFFSET and LIMIT over solution dicts."""
    proj = pq.projection
    projected = [(tuple(r.get(v) for v in proj), r) for r in rows]
    if pq.order_by:
        def key(item):
            values, r = item
            ks = []
            for ok in pq.order_by:
                k = sort_key(r.get(ok.var))
                ks.append(_Desc(k) if ok.descending else k)
            return (tuple(ks), row_key(values))
        projected.sort(key=key)
    elif pq.limit is not None or pq.offset is not None:
        projected.sort(key=lambda item: row_key(item[0]))
    result = [values for values, _ in projected]
    if pq.distinct:
        result = list(dict.fromkeys(result))
    start = pq.offset or 0
    stop = None if pq.limit is None else start + pq.limit
    result = result[start:stop]
    ordered = bool(pq.order_by)
    return BindingSet(tuple(v.name for v in proj), result, ordered)


class _Desc:
    __slots__ = ("k",)

    def __init__(self, k):
        self.k = k

    def __lt__(self, other: "_Desc") -> bool:
        return other.k < self.k

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _Desc) and self.k == other.k


def eval_reference(dataset: Iterable[Triple], pq: ParsedQuery) -> BindingSet:
    for c in (*pq.filters, *pq.having):
        if c.op not in ("<", "<=", "=", "!=", ">=", ">"):
            raise UnsupportedConstruct(f"operator {c.op}")
    solutions = eval_bgp(dataset, pq)
    rows = _aggregate_rows(pq, solutions) if pq.is_aggregate else solutions
    return finalize(pq, rows)


# -- comparison of results -----------------------------------------------------------------


def values_close(a: Value, b: Value, rel_tol: float = 0.0) -> bool:
    if a == b:
        return True
    if a is None or b is None or not rel_tol:
        return False
    if a.kind is not TermKind.FLOAT_LITERAL or b.kind is not TermKind.FLOAT_LITERAL:
        return False
    return math.isclose(a.value, b.value, rel_tol=rel_tol, abs_tol=0.0)


def rows_close(a: Sequence[Value], b: Sequence[Value], rel_tol: float = 0.0) -> bool:
    return len(a) == len(b) and all(values_close(x, y, rel_tol) for x, y in zip(a, b))


def equivalent(expected: BindingSet, actual: BindingSet, rel_tol: float = 0.0) -> bool:
    """Multiset equality (ordered when ``expected.ordered``), floats within ``rel_tol``."""
    if expected.variables != actual.variables or len(expected.rows) != len(actual.rows):
        return False
    if expected.ordered:
        return all(rows_close(x, y, rel_tol) for x, y in zip(expected.rows, actual.rows))
    if expected.multiset() == actual.multiset():
        return True
    if not rel_tol:
        return False
    left = sorted(expected.rows, key=row_key)
    right = sorted(actual.rows, key=row_key)
    if all(rows_close(x, y, rel_tol) for x, y in zip(left, right)):
        return True
    pool = list(actual.rows)
    for row in expected.rows:
        for i, cand in enumerate(pool):
            if rows_close(row, cand, rel_tol):
                del pool[i]
                break
        else:
            return False
    return True
