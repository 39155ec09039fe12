"""Query splitting: data-model matching, classification and device query compilation."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from . import operators as ops
from .hashing import DEFAULT_ALGORITHM, HashAlgorithm
from .operators import (
    MAX_COLUMNS,
    MAX_OPERATORS,
    AggFunc,
    DeviceQuery,
    OperatorDescriptor,
    OpType,
    ProjectionMask,
    RowTooWide,
    SlotType,
)
from .rdf import Term, TermKind, numeric_from_text
from .sparql import (
    AggregateExpr,
    Comparison,
    ParsedQuery,
    SelectItem,
    TriplePattern,
    Variable,
)
from .wire import DEFAULT_MTU, QUERY_HEADER_SIZE, ROW_HEADER_SIZE, TooManyOperators, agg_state_size

DEFAULT_LIFETIME_S = 60
DATATYPES = {"integer": SlotType.INTEGER, "float": SlotType.FLOAT}


class PlanningError(Exception):
    pass


class Unanswerable(PlanningError):
    pass


# -- data model graph ---------------------------------------------------------------------


@dataclass(frozen=True)
class ModelEdge:
    source: str
    predicate: str
    target: str
    datatype: Optional[SlotType] = None


@dataclass
class DataModelGraph:
    """Unlabelled nodes, predicate-labelled directed edges; a multigraph."""

    edges: list[ModelEdge] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._index()

    def _index(self) -> None:
        self.nodes = sorted({e.source for e in self.edges} | {e.target for e in self.edges})
        self.labels = {e.predicate for e in self.edges}
        self._by_label: dict[str, set[tuple[str, str]]] = {}
        for e in self.edges:
            self._by_label.setdefault(e.predicate, set()).add((e.source, e.target))

    def add(self, source: str, predicate: str, target: str, datatype: Optional[SlotType] = None) -> None:
        self.edges.append(ModelEdge(source, predicate, target, datatype))
        self._index()

    def pairs(self, label: str) -> set[tuple[str, str]]:
        return self._by_label.get(label, set())

    def datatype_of(self, label: str) -> Optional[SlotType]:
        """Object type shared by every edge with this label, if all declare the same one."""
        types = {e.datatype for e in self.edges if e.predicate == label}
        if len(types) == 1:
            return next(iter(types))
        return None

    @classmethod
    def parse(cls, text: str) -> "DataModelGraph":
        edges = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (3, 4):
                raise ValueError(f"line {lineno}: expected 'node_id predicate_iri node_id [integer|float]'")
            pred = parts[1][1:-1] if parts[1].startswith("<") and parts[1].endswith(">") else parts[1]
            dtype = None
            if len(parts) == 4:
                if parts[3] not in DATATYPES:
                    raise ValueError(f"line {lineno}: unknown datatype {parts[3]!r}")
                dtype = DATATYPES[parts[3]]
            edges.append(ModelEdge(parts[0], pred, parts[2], dtype))
        return cls(edges)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DataModelGraph":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        lines = []
        for e in self.edges:
            tail = "" if e.datatype is None else " " + e.datatype.name.lower()
            lines.append(f"{e.source} <{e.predicate}> {e.target}{tail}")
        return "\n".join(lines) + "\n"


def load_endpoints(path: Union[str, Path]) -> dict[str, str]:
    """``namespace_prefix endpoint_url`` lines.

    A relative ``mock:<file>`` URL names an N-Triples file next to the mapping file.
    """
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'namespace_prefix endpoint_url'")
        url = parts[1]
        if url.startswith("mock:") and not Path(url[5:]).is_absolute():
            candidate = Path(path).parent / url[5:]
            if candidate.exists():
                url = "mock:" + str(candidate.resolve())
        out[parts[0].strip("<>")] = url
    return out


# -- local matching ------------------------------------------------------------------------

_Node = tuple


def _shape(patterns: Sequence[TriplePattern], indices: Iterable[int]) -> list[tuple[_Node, str, _Node]]:
    """Labelled edges of a pattern subset; constants are separate nodes per occurrence."""
    edges = []
    for i in indices:
        p = patterns[i]
        ends = []
        for pos, t in ((0, p.subject), (2, p.object)):
            ends.append(("v", t.name) if isinstance(t, Variable) else ("c", i, pos))
        edges.append((ends[0], p.predicate.value, ends[1]))
    return edges


def embeds(model: DataModelGraph, edges: Sequence[tuple[_Node, str, _Node]]) -> bool:
    """Is there an injective node map sending every labelled edge onto a model edge?"""
    if not edges:
        return True
    if any(not model.pairs(label) for _, label, _ in edges):
        return False
    order: list[_Node] = []
    seen = set()
    frontier = [edges[0][0]]
    while len(order) < len({n for e in edges for n in (e[0], e[2])}):
        if not frontier:
            frontier = [next(n for e in edges for n in (e[0], e[2]) if n not in seen)]
        n = frontier.pop(0)
        if n in seen:
            continue
        seen.add(n)
        order.append(n)
        for s, _, o in edges:
            if s == n and o not in seen:
                frontier.append(o)
            if o == n and s not in seen:
                frontier.append(s)
    position = {n: k for k, n in enumerate(order)}
    # constraints checked when the later endpoint of an edge is placed
    checks: dict[_Node, list[tuple[_Node, str, bool]]] = {n: [] for n in order}
    for s, label, o in edges:
        later, earlier, outgoing = (o, s, False) if position[o] >= position[s] else (s, o, True)
        checks[later].append((earlier, label, outgoing))
    assign: dict[_Node, str] = {}
    used: set[str] = set()

    def candidates(n: _Node) -> list[str]:
        cands: Optional[set[str]] = None
        for s, label, o in edges:
            if s == n:
                here = {a for a, _ in model.pairs(label)}
            elif o == n:
                here = {b for _, b in model.pairs(label)}
            else:
                continue
            cands = here if cands is None else cands & here
        return sorted(cands or ())

    def place(k: int) -> bool:
        if k == len(order):
            return True
        n = order[k]
        for m in candidates(n):
            if m in used:
                continue
            ok = True
            for other, label, outgoing in checks[n]:
                if other == n:
                    pair = (m, m)
                else:
                    pair = (m, assign[other]) if outgoing else (assign[other], m)
                if pair not in model.pairs(label):
                    ok = False
                    break
            if not ok:
                continue
            assign[n] = m
            used.add(m)
            if place(k + 1):
                return True
            del assign[n]
            used.discard(m)
        return False

    return place(0)


def _variables(p: TriplePattern) -> set[str]:
    return {t.name for t in p if isinstance(t, Variable)}


def _components(patterns: Sequence[TriplePattern], indices: Iterable[int]) -> list[list[int]]:
    """Split pattern indices into groups connected through shared variables."""
    out: list[list[int]] = []
    for i in sorted(indices):
        vs = _variables(patterns[i])
        joined = [c for c in out if any(vs & _variables(patterns[j]) for j in c)]
        merged = sorted({i, *[j for c in joined for j in c]})
        out = [c for c in out if c not in joined] + [merged]
    return sorted(out)


def _patterns_of(q) -> tuple[TriplePattern, ...]:
    if isinstance(q, ParsedQuery):
        return q.patterns
    if hasattr(q, "edges") and hasattr(q, "nodes"):
        return tuple(TriplePattern(q.nodes[e.source], e.label, q.nodes[e.target]) for e in q.edges)
    return tuple(q)


def is_local_pattern(model: DataModelGraph, p: TriplePattern) -> bool:
    return not isinstance(p.predicate, Variable) and p.predicate.kind is TermKind.IRI and p.predicate.value in model.labels


def match_local(
    model: DataModelGraph,
    q,
    candidates: Optional[Iterable[int]] = None,
    budget: int = 200_000,
) -> list[frozenset[int]]:
    """Maximal variable-connected pattern subsets whose shape embeds in the model.

    ``q`` is a ParsedQuery, a PatternGraph or a pattern sequence; results are
    sets of pattern indices.
    """
    patterns = _patterns_of(q)
    pool = [i for i in (range(len(patterns)) if candidates is None else candidates) if is_local_pattern(model, patterns[i])]
    result: list[frozenset[int]] = []
    for comp in _components(patterns, pool):
        if embeds(model, _shape(patterns, comp)):
            result.append(frozenset(comp))
            continue
        result.extend(_maximal_subsets(model, patterns, comp, budget))
    return sorted(result, key=lambda s: (-len(s), sorted(s)))


def _maximal_subsets(model, patterns, comp: list[int], budget: int) -> list[frozenset[int]]:
    def local(s: frozenset[int]) -> bool:
        return len(s) == 1 or embeds(model, _shape(patterns, sorted(s)))

    adjacency = {i: {j for j in comp if j != i and _variables(patterns[i]) & _variables(patterns[j])} for i in comp}
    seen: set[frozenset[int]] = set()
    maximal: list[frozenset[int]] = []
    stack = [frozenset([i]) for i in comp]
    steps = 0
    while stack and steps < budget:
        s = stack.pop()
        if s in seen:
            continue
        seen.add(s)
        steps += 1
        grown = False
        for j in sorted(set().union(*(adjacency[i] for i in s)) - s):
            t = s | {j}
            if t in seen:
                grown = True
                continue
            if local(t):
                grown = True
                stack.append(t)
        if not grown:
            maximal.append(s)
    out = [s for s in maximal if not any(s < t for t in maximal)]
    return sorted(set(out), key=lambda s: (-len(s), sorted(s)))


# -- plan ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviceComponent:
    patterns: tuple[int, ...]
    root_id: int
    columns: tuple[str, ...]
    types: tuple[SlotType, ...]


@dataclass(frozen=True)
class WebPart:
    endpoint: str
    patterns: tuple[int, ...]
    query: ParsedQuery
    variables: tuple[str, ...]

    @property
    def text(self) -> str:
        from .sparql import to_text

        return to_text(self.query)


@dataclass(frozen=True)
class PushedAggregate:
    root_id: int
    aliases: tuple[str, ...]  # aggregate select items, in column order


@dataclass
class QueryPlan:
    query: ParsedQuery
    device_query: Optional[DeviceQuery] = None
    components: tuple[DeviceComponent, ...] = ()
    web_parts: tuple[WebPart, ...] = ()
    pushed_filters: tuple[Comparison, ...] = ()
    base_filters: tuple[Comparison, ...] = ()
    aggregate: Optional[PushedAggregate] = None
    split_points: tuple[str, ...] = ()
    op_columns: dict[int, tuple[str, ...]] = field(default_factory=dict)
    op_inputs: dict[int, tuple[Optional[str], ...]] = field(default_factory=dict)
    base_needed: frozenset[str] = frozenset()

    @property
    def device_part(self) -> Optional[DeviceQuery]:
        return self.device_query

    @property
    def web_part(self) -> Optional[WebPart]:
        return self.web_parts[0] if self.web_parts else None

    @property
    def local_patterns(self) -> tuple[int, ...]:
        return tuple(sorted(i for c in self.components for i in c.patterns))

    @property
    def web_patterns(self) -> tuple[int, ...]:
        return tuple(sorted(i for w in self.web_parts for i in w.patterns))

    def parts(self) -> list[tuple[str, set[str]]]:
        out = [(f"device:{c.root_id}", _vars_of(self.query, c.patterns)) for c in self.components]
        out += [(f"web:{w.endpoint}", set(w.variables)) for w in self.web_parts]
        return out


def _vars_of(pq: ParsedQuery, indices: Iterable[int]) -> set[str]:
    return {v for i in indices for v in _variables(pq.patterns[i])}


# -- compilation ---------------------------------------------------------------------------


@dataclass
class _Op:
    kind: OpType
    children: list["_Op"] = field(default_factory=list)
    pattern_vars: tuple = ()  # GPS: var name or None per slot
    constants: tuple = ()  # GPS: Term or None per slot
    comparisons: list = field(default_factory=list)  # SELECTION: (lhs, op, rhs) with str vars or Terms
    join_var: str = ""
    aggregates: tuple = ()  # AGGREGATE: (AggFunc, var or None)
    op_id: int = -1
    needed: set = field(default_factory=set)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def vars(self) -> set[str]:
        if self.kind is OpType.GPS:
            return {v for v in self.pattern_vars if v is not None}
        return set().union(*(c.vars() for c in self.children)) if self.children else set()


@dataclass(frozen=True)
class _Filter:
    lhs: object  # str var or Term
    op: str
    rhs: object
    identity: bool = False  # alias equality introduced by the compiler

    def vars(self) -> set[str]:
        return {x for x in (self.lhs, self.rhs) if isinstance(x, str)}


def variable_types(model: DataModelGraph, patterns: Sequence[TriplePattern]) -> dict[str, SlotType]:
    """Numeric column type for variables only ever seen as objects of one declared numeric type."""
    seen: dict[str, set] = {}
    for p in patterns:
        for pos, t in enumerate(p):
            if not isinstance(t, Variable):
                continue
            if pos == 2 and not isinstance(p.predicate, Variable):
                seen.setdefault(t.name, set()).add(model.datatype_of(p.predicate.value))
            else:
                seen.setdefault(t.name, set()).add(None)
    return {v: (next(iter(ts)) if len(ts) == 1 and None not in ts else SlotType.STRING_HASH) for v, ts in seen.items()}


def pushable(c: Comparison, types: Mapping[str, SlotType]) -> Optional[_Filter]:
    """Translate a filter the devices can evaluate exactly, or None to keep it at the base."""

    def side(x):
        return x.name if isinstance(x, Variable) else x

    lhs, rhs = side(c.lhs), side(c.rhs)
    kinds = [types.get(x) if isinstance(x, str) else None for x in (lhs, rhs)]
    if not any(isinstance(x, str) for x in (lhs, rhs)):
        return None
    if isinstance(lhs, str) and isinstance(rhs, str):
        if kinds[0] in ops.NUMERIC and kinds[1] in ops.NUMERIC:
            return _Filter(lhs, c.op, rhs)
        return None
    var, const = (lhs, rhs) if isinstance(lhs, str) else (rhs, lhs)
    vtype = types.get(var)
    if vtype in ops.NUMERIC:
        if const.is_numeric:
            num = const
        elif const.kind is TermKind.STRING_LITERAL:
            num = numeric_from_text(const.value)
            if num is None:
                return None
        else:
            return None
        return _Filter(lhs if isinstance(lhs, str) else num, c.op, rhs if isinstance(rhs, str) else num)
    if vtype is SlotType.STRING_HASH and c.op in ("=", "!="):
        if const.kind is TermKind.IRI:
            return _Filter(lhs, c.op, rhs)
        if const.kind is TermKind.STRING_LITERAL and numeric_from_text(const.value) is None:
            return _Filter(lhs, c.op, rhs)
    return None


class _Compiler:
    def __init__(self, pq: ParsedQuery, types: dict[str, SlotType], alg: HashAlgorithm, mtu: int):
        self.pq = pq
        self.types = dict(types)
        self.alg = alg
        self.max_cmp = max(1, (mtu - QUERY_HEADER_SIZE - 9) // 7)
        self.alias_count = 0

    def alias(self, var: str) -> str:
        self.alias_count += 1
        name = f"{var}#{self.alias_count}"
        self.types[name] = self.types[var]
        return name

    def gps(self, p: TriplePattern, bound: set[str], filters: list[_Filter]) -> tuple[_Op, Optional[str]]:
        names: list[Optional[str]] = []
        consts: list[Optional[Term]] = []
        join_var = None
        local_seen: set[str] = set()
        for t in p:
            if not isinstance(t, Variable):
                names.append(None)
                consts.append(t)
                continue
            consts.append(None)
            v = t.name
            if v in bound and join_var is None:
                join_var = v
                names.append(v)
            elif v in bound or v in local_seen:
                a = self.alias(v)
                filters.append(_Filter(v, "=", a, identity=True))
                names.append(a)
            else:
                names.append(v)
            local_seen.add(v)
        return _Op(OpType.GPS, pattern_vars=tuple(names), constants=tuple(consts)), join_var

    def selections(self, child: _Op, filters: list[_Filter], available: set[str]) -> _Op:
        ready = [f for f in filters if f.vars() <= available]
        for f in ready:
            filters.remove(f)
        for k in range(0, len(ready), self.max_cmp):
            child = _Op(OpType.SELECTION, [child], comparisons=ready[k:k + self.max_cmp])
        return child

    def component(self, indices: Sequence[int], filters: list[_Filter]) -> _Op:
        pending = list(indices)
        first = pending.pop(0)
        acc, _ = self.gps(self.pq.patterns[first], set(), filters)
        bound = acc.vars()
        acc = self.selections(acc, filters, bound)
        while pending:
            nxt = next(i for i in pending if _variables(self.pq.patterns[i]) & bound)
            pending.remove(nxt)
            g, join_var = self.gps(self.pq.patterns[nxt], bound, filters)
            g = self.selections(g, filters, g.vars())
            acc = _Op(OpType.SLJ, [acc, g], join_var=join_var)
            bound = acc.vars()
            acc = self.selections(acc, filters, bound)
        if filters:
            raise PlanningError(f"filters left unplaced: {filters}")
        return acc


def _walk(op: _Op):
    for c in op.children:
        yield from _walk(c)
    yield op


def _gps_walk(op: _Op):
    return [o for o in _walk(op) if o.kind is OpType.GPS]


def _assign_ids(roots: Sequence[_Op]) -> int:
    n = 0
    for r in roots:
        for g in _gps_walk(r):
            g.op_id = n
            n += 1
    for r in roots:
        for o in _walk(r):
            if o.kind is not OpType.GPS:
                o.op_id = n
                n += 1
    return n


def _ordered_children(op: _Op) -> list[_Op]:
    return sorted(op.children, key=lambda c: c.op_id)


def _needs(op: _Op, needed: set[str]) -> None:
    op.needed = set(needed)
    if op.kind is OpType.SELECTION:
        below = needed | set().union(*(f.vars() for f in op.comparisons))
        _needs(op.children[0], below)
    elif op.kind is OpType.SLJ:
        for c in op.children:
            _needs(c, (needed & c.vars()) | {op.join_var})
    elif op.kind in (OpType.COLLECT,):
        _needs(op.children[0], needed)
    elif op.kind is OpType.AGGREGATE:
        _needs(op.children[0], {v for _, v in op.aggregates if v is not None})


def _columns(op: _Op) -> None:
    for c in op.children:
        _columns(c)
    if op.kind is OpType.GPS:
        op.inputs = list(op.pattern_vars)
    elif op.kind is OpType.SLJ:
        left, right = _ordered_children(op)
        op.inputs = left.outputs + right.outputs
        if len(op.inputs) > MAX_COLUMNS:
            raise RowTooWide(f"join concatenates {len(op.inputs)} columns (limit {MAX_COLUMNS})")
    else:
        op.inputs = list(op.children[0].outputs)
    if op.kind is OpType.COLLECT:
        op.outputs = list(op.inputs)
    elif op.kind is OpType.AGGREGATE:
        op.outputs = [f"agg{k}" for k in range(len(op.aggregates))]
    else:
        kept, seen = [], set()
        for v in op.inputs:
            if v is not None and v in op.needed and v not in seen:
                kept.append(v)
                seen.add(v)
        op.outputs = kept
    if len(op.outputs) > MAX_COLUMNS:
        raise RowTooWide(f"operator output of {len(op.outputs)} columns (limit {MAX_COLUMNS})")


def _mask(op: _Op, types: Mapping[str, SlotType]) -> ProjectionMask:
    if op.kind is OpType.AGGREGATE:
        codes = [SlotType.INTEGER if f is AggFunc.COUNT else types[v] for f, v in op.aggregates]
        return ProjectionMask.from_types(codes)
    codes = []
    taken = set()
    for v in op.inputs:
        if v is not None and v in op.outputs and v not in taken:
            codes.append(types[v])
            taken.add(v)
        else:
            codes.append(SlotType.DROP)
    return ProjectionMask.from_types(codes)


def _constant(x, alg: HashAlgorithm) -> ops.Constant:
    return ops.Constant.of_term(x, alg)


def _descriptor(op: _Op, parent: Optional[_Op], types, alg) -> OperatorDescriptor:
    pid = None if parent is None else parent.op_id
    mask = _mask(op, types)
    if op.kind is OpType.GPS:
        params = ops.GpsParams(tuple(None if t is None else _constant(t, alg) for t in op.constants))
    elif op.kind is OpType.SELECTION:
        comps = []
        cols = op.inputs
        for f in op.comparisons:
            side = [cols.index(x) if isinstance(x, str) else _constant(x, alg) for x in (f.lhs, f.rhs)]
            comps.append(ops.Comparison(side[0], ops.Cmp.from_symbol(f.op), side[1]))
        params = ops.SelectionParams(tuple(comps))
    elif op.kind is OpType.SLJ:
        left, right = _ordered_children(op)
        params = ops.SljParams(left.outputs.index(op.join_var), right.outputs.index(op.join_var))
    elif op.kind is OpType.AGGREGATE:
        cols = op.inputs
        params = ops.AggregateParams(
            tuple(ops.AggColumn(f, None if f is AggFunc.COUNT else cols.index(v)) for f, v in op.aggregates)
        )
    else:
        params = ops.CollectParams()
    return OperatorDescriptor(op.op_id, op.kind, pid, mask, params)


def compile_device_query(
    pq: ParsedQuery,
    components: Sequence[Sequence[int]],
    filters: Sequence[_Filter] = (),
    needed: Iterable[str] = (),
    aggregates: Optional[Sequence[tuple[AggFunc, Optional[str]]]] = None,
    types: Optional[Mapping[str, SlotType]] = None,
    query_id: int = 1,
    lifetime_s: int = DEFAULT_LIFETIME_S,
    alg: HashAlgorithm = DEFAULT_ALGORITHM,
    mtu: int = DEFAULT_MTU,
) -> tuple[DeviceQuery, list[DeviceComponent], dict[int, tuple[str, ...]], dict[int, tuple]]:
    """Compile local components into one operator forest.

    Each component gets a left-deep SLJ chain in pattern order and a COLLECT
    root, or, when ``aggregates`` is given, the single component gets an
    AGGREGATE root.
    """
    if types is None:
        types = {v: SlotType.STRING_HASH for i in range(len(pq.patterns)) for v in _variables(pq.patterns[i])}
    n_ops = sum(2 * len(c) for c in components)  # GPS and joins, plus one root per component
    if n_ops > MAX_OPERATORS:
        raise TooManyOperators(f"plan needs at least {n_ops} operators (limit {MAX_OPERATORS})")
    comp_ = _Compiler(pq, dict(types), alg, mtu)
    remaining = list(filters)
    roots: list[_Op] = []
    for comp in components:
        comp_vars = _vars_of(pq, comp)
        mine = [f for f in remaining if f.vars() <= comp_vars]
        remaining = [f for f in remaining if f not in mine]
        top = comp_.component(list(comp), mine)
        if aggregates is not None:
            roots.append(_Op(OpType.AGGREGATE, [top], aggregates=tuple(aggregates)))
        else:
            roots.append(_Op(OpType.COLLECT, [top]))
    if remaining:
        raise PlanningError(f"filters reference variables outside the local components: {remaining}")
    total = sum(len(list(_walk(r))) for r in roots)
    if total > MAX_OPERATORS:
        raise TooManyOperators(f"plan has {total} operators (limit {MAX_OPERATORS})")
    _assign_ids(roots)
    needed = set(needed)
    for r in roots:
        _needs(r, needed & r.vars())
        _columns(r)
    descs = []
    op_columns, op_inputs = {}, {}
    for r in roots:
        parents = {id(c): o for o in _walk(r) for c in o.children}
        for o in _walk(r):
            descs.append(_descriptor(o, parents.get(id(o)), comp_.types, alg))
            op_columns[o.op_id] = tuple(o.outputs)
            op_inputs[o.op_id] = tuple(o.inputs)
    descs.sort(key=lambda d: d.op_id)
    by_id = {d.op_id: d for d in descs}
    out_components = [
        DeviceComponent(tuple(comp), r.op_id, tuple(r.outputs), by_id[r.op_id].projection.kept_types)
        for comp, r in zip(components, roots)
    ]
    return DeviceQuery(query_id, lifetime_s, tuple(descs)), out_components, op_columns, op_inputs


# -- classification ------------------------------------------------------------------------

_AGG_FUNCS = {"SUM": AggFunc.SUM, "COUNT": AggFunc.COUNT, "AVG": AggFunc.AVG, "MIN": AggFunc.MIN, "MAX": AggFunc.MAX}


def _web_endpoint(p: TriplePattern, endpoints: Mapping[str, str]) -> Optional[str]:
    if isinstance(p.predicate, Variable):
        return None
    iri = p.predicate.value
    best = None
    for prefix, url in endpoints.items():
        if iri.startswith(prefix) and (best is None or len(prefix) > len(best[0])):
            best = (prefix, url)
    return None if best is None else best[1]


def base_needed_variables(pq: ParsedQuery, base_filters: Iterable[Comparison]) -> set[str]:
    need: set[str] = set()
    if pq.is_aggregate:
        need |= {v.name for v in pq.group_by}
        need |= {i.aggregate.arg.name for i in pq.aggregates if i.aggregate.arg is not None}
        for c in pq.having:
            for x in (c.lhs, c.rhs):
                arg = getattr(x, "arg", None)
                if arg is not None:
                    need.add(arg.name)
    else:
        need |= {v.name for v in pq.projection}
        pattern_vars = {v.name for v in pq.pattern_variables}
        need |= {k.var.name for k in pq.order_by if k.var.name in pattern_vars}
    for c in base_filters:
        need |= {v.name for v in c.variables}
    return need


def classify(
    pq: ParsedQuery,
    model: DataModelGraph,
    endpoints: Union[Mapping[str, str], Iterable[str]] = (),
    query_id: int = 1,
    lifetime_s: int = DEFAULT_LIFETIME_S,
    alg: HashAlgorithm = DEFAULT_ALGORITHM,
    mtu: int = DEFAULT_MTU,
) -> QueryPlan:
    """Split ``pq`` into device-local components, web parts and the base-station residue."""
    if not isinstance(endpoints, Mapping):
        endpoints = {prefix: prefix for prefix in endpoints}
    patterns = pq.patterns
    local_pool, web_of = [], {}
    for i, p in enumerate(patterns):
        if is_local_pattern(model, p):
            local_pool.append(i)
            continue
        url = _web_endpoint(p, endpoints)
        if url is None:
            label = p.predicate if isinstance(p.predicate, Variable) else f"<{p.predicate.value}>"
            raise Unanswerable(f"pattern {i} (predicate {label}) is neither in the data model nor external")
        web_of[i] = url

    # greedy disjoint cover of the local patterns by maximal embeddable subsets
    components: list[list[int]] = []
    remaining = set(local_pool)
    while remaining:
        best = match_local(model, patterns, remaining)[0]
        components.append(sorted(best))
        remaining -= best
    components.sort()

    # web parts: one subquery per endpoint and connected group
    web_parts = []
    by_endpoint: dict[str, list[int]] = {}
    for i, url in web_of.items():
        by_endpoint.setdefault(url, []).append(i)
    for url in sorted(by_endpoint):
        for group in _components(patterns, by_endpoint[url]):
            vs = []
            for i in group:
                for v in patterns[i].variables:
                    if v not in vs:
                        vs.append(v)
            sub = ParsedQuery(
                select=tuple(SelectItem(v) for v in vs),
                select_all=not vs,
                patterns=tuple(patterns[i] for i in group),
            )
            web_parts.append(WebPart(url, tuple(group), sub, tuple(v.name for v in vs)))

    part_vars = [_vars_of(pq, c) for c in components] + [set(w.variables) for w in web_parts]
    counts: dict[str, int] = {}
    for vs in part_vars:
        for v in vs:
            counts[v] = counts.get(v, 0) + 1
    split_points = tuple(sorted(v for v, n in counts.items() if n >= 2))

    types = variable_types(model, [patterns[i] for i in local_pool])
    pushed, base_filters = [], []
    translated = []
    for c in pq.filters:
        vs = {v.name for v in c.variables}
        owner = [k for k, comp_vars in enumerate(part_vars[:len(components)]) if vs and vs <= comp_vars]
        f = pushable(c, types) if owner else None
        if f is None:
            base_filters.append(c)
        else:
            pushed.append(c)
            translated.append(f)

    aggregates = None
    if (
        pq.aggregates
        and not pq.group_by
        and len(components) == 1
        and not web_parts
        and not base_filters
        and all(
            x in {i.aggregate for i in pq.aggregates}
            for c in pq.having
            for x in (c.lhs, c.rhs)
            if isinstance(x, AggregateExpr)
        )
    ):
        spec = []
        for item in pq.aggregates:
            func = _AGG_FUNCS[item.aggregate.func]
            arg = item.aggregate.arg
            if func is AggFunc.COUNT:
                spec.append((func, None))
            elif arg is not None and types.get(arg.name) in ops.NUMERIC:
                spec.append((func, arg.name))
            else:
                spec = None
                break
        if spec and len(spec) <= MAX_COLUMNS:
            state_spec = [(f, SlotType.INTEGER if v is None else types[v]) for f, v in spec]
            if ROW_HEADER_SIZE + agg_state_size(state_spec) <= mtu:
                aggregates = spec

    needed = base_needed_variables(pq, base_filters) | set(split_points)
    plan = QueryPlan(
        query=pq,
        web_parts=tuple(web_parts),
        pushed_filters=tuple(pushed),
        base_filters=tuple(base_filters),
        split_points=split_points,
        base_needed=frozenset(needed),
    )
    if components:
        dq, comps, op_columns, op_inputs = compile_device_query(
            pq, components, translated, needed, aggregates, types, query_id, lifetime_s, alg, mtu
        )
        plan.device_query = dq
        plan.components = tuple(comps)
        plan.op_columns = op_columns
        plan.op_inputs = op_inputs
        if aggregates is not None:
            plan.aggregate = PushedAggregate(comps[0].root_id, tuple(i.var.name for i in pq.aggregates))
    return plan


def check_projection(plan: QueryPlan) -> list[str]:
    """Statically verify that no operator drops a column used above it or at the base."""
    problems = []
    dq = plan.device_query
    if dq is None:
        return problems
    by_id = {d.op_id: d for d in dq.descriptors}
    for d in dq.descriptors:
        inputs = plan.op_inputs[d.op_id]
        outputs = plan.op_columns[d.op_id]
        if d.op_type is not OpType.AGGREGATE and d.projection.arity != len(outputs):
            problems.append(f"op {d.op_id}: mask keeps {d.projection.arity} columns, expected {len(outputs)}")
        kept = [inputs[i] for i in d.projection.kept] if d.op_type is not OpType.AGGREGATE else None
        if kept is not None and tuple(kept) != outputs:
            problems.append(f"op {d.op_id}: mask keeps {kept}, expected {list(outputs)}")
        refs = _referenced(d, dq, plan)
        if d.op_type is not OpType.GPS:
            missing = refs - {v for v in inputs if v is not None}
            if missing:
                problems.append(f"op {d.op_id}: references {sorted(missing)} missing from its input")
        if d.parent_id is not None:
            parent = by_id[d.parent_id]
            above = _referenced(parent, dq, plan)
            if parent.op_type is not OpType.AGGREGATE:
                above |= set(plan.op_columns[parent.op_id])
            mine = {v for v in inputs if v is not None}
            missing = (above & mine) - set(outputs)
            if missing:
                problems.append(f"op {d.op_id}: drops {sorted(missing)} needed by op {parent.op_id}")
    if plan.aggregate is None:
        for comp in plan.components:
            comp_vars = _vars_of(plan.query, comp.patterns)
            missing = ((set(plan.split_points) | set(plan.base_needed)) & comp_vars) - set(comp.columns)
            if missing:
                problems.append(f"component rooted at {comp.root_id}: drops {sorted(missing)}")
    return problems


def _referenced(d: OperatorDescriptor, dq: DeviceQuery, plan: QueryPlan) -> set[str]:
    """Variables an operator reads from its input row."""
    inputs = plan.op_inputs[d.op_id]
    p = d.params
    if d.op_type is OpType.SELECTION:
        return {inputs[x] for c in p.comparisons for x in (c.lhs, c.rhs) if isinstance(x, int) and x < len(inputs)}
    if d.op_type is OpType.AGGREGATE:
        return {inputs[c.column] for c in p.columns if c.column is not None and c.column < len(inputs)}
    if d.op_type is OpType.SLJ:
        kids = sorted((c.op_id for c in dq.descriptors if c.parent_id == d.op_id))
        lcols, rcols = plan.op_columns[kids[0]], plan.op_columns[kids[1]]
        out = set()
        if p.left_attr < len(lcols):
            out.add(lcols[p.left_attr])
        if p.right_attr < len(rcols):
            out.add(rcols[p.right_attr])
        return out
    return set()
