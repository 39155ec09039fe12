"""Push-based device-local operators: GPS, selection, simple local join, collect, aggregate.

Every operator carries a 4-byte projection mask: 16 two-bit codes, slot 0 in the
most significant bits. A code is DROP or the type the kept column has on output.
"""

from __future__ import annotations

import enum
import operator as _op
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .hashing import DEFAULT_ALGORITHM, HashAlgorithm, hash_string
from .rdf import Term, TermKind, TupleStore, float32_bits, to_float32

MAX_COLUMNS = 16
MAX_OPERATORS = 256
DEFAULT_JOIN_BUFFER = 1024


class OperatorError(Exception):
    pass


class TypeMismatch(OperatorError):
    pass


class RowTooWide(OperatorError):
    pass


class MalformedTree(OperatorError):
    pass


class SpecMismatch(OperatorError):
    pass


class BufferOverflow(OperatorError):
    pass


class SlotType(enum.IntEnum):
    DROP = 0
    INTEGER = 1
    FLOAT = 2
    STRING_HASH = 3


NUMERIC = (SlotType.INTEGER, SlotType.FLOAT)


@dataclass(frozen=True)
class ProjectionMask:
    value: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.value <= 0xFFFFFFFF:
            raise ValueError("projection mask is 32 bits")

    @classmethod
    def from_types(cls, types: Sequence[SlotType]) -> "ProjectionMask":
        if len(types) > MAX_COLUMNS:
            raise RowTooWide(f"{len(types)} input columns exceed {MAX_COLUMNS}")
        v = 0
        for i, t in enumerate(types):
            v |= int(t) << (30 - 2 * i)
        return cls(v)

    def code(self, i: int) -> SlotType:
        return SlotType((self.value >> (30 - 2 * i)) & 0b11)

    @property
    def codes(self) -> tuple[SlotType, ...]:
        return tuple(self.code(i) for i in range(MAX_COLUMNS))

    @property
    def kept(self) -> tuple[int, ...]:
        return tuple(i for i in range(MAX_COLUMNS) if self.code(i) is not SlotType.DROP)

    @property
    def kept_types(self) -> tuple[SlotType, ...]:
        return tuple(c for c in self.codes if c is not SlotType.DROP)

    @property
    def arity(self) -> int:
        return len(self.kept)

    def __repr__(self) -> str:
        return f"ProjectionMask(0x{self.value:08x})"


@dataclass(frozen=True, slots=True)
class Row:
    values: tuple = ()
    types: tuple = ()
    end: bool = False

    def __post_init__(self) -> None:
        if len(self.values) > MAX_COLUMNS:
            raise RowTooWide(f"row of {len(self.values)} columns")
        if self.end and self.values:
            raise ValueError("end marker rows carry no columns")

    @property
    def arity(self) -> int:
        return len(self.values)


END = Row(end=True)


def term_slot(term: Term, want: SlotType, alg: HashAlgorithm = DEFAULT_ALGORITHM):
    """32-bit slot value for ``term`` in a column of type ``want`` (None if it does not fit)."""
    if want is SlotType.STRING_HASH:
        return hash_string(term.token(), alg)
    if want is SlotType.INTEGER:
        return term.value if term.kind is TermKind.INTEGER_LITERAL else None
    if want is SlotType.FLOAT:
        return term.value if term.kind is TermKind.FLOAT_LITERAL else None
    raise ValueError(want)


# -- descriptors -------------------------------------------------------------------


class OpType(enum.IntEnum):
    GPS = 1
    SELECTION = 2
    SLJ = 3
    COLLECT = 4
    AGGREGATE = 5


class Cmp(enum.IntEnum):
    LT = 0
    LE = 1
    EQ = 2
    NE = 3
    GE = 4
    GT = 5

    @property
    def symbol(self) -> str:
        return ("<", "<=", "=", "!=", ">=", ">")[self]

    @classmethod
    def from_symbol(cls, s: str) -> "Cmp":
        return {"<": cls.LT, "<=": cls.LE, "=": cls.EQ, "!=": cls.NE, ">=": cls.GE, ">": cls.GT}[s]


_CMP_FUNCS: dict[Cmp, Callable] = {
    Cmp.LT: _op.lt, Cmp.LE: _op.le, Cmp.EQ: _op.eq, Cmp.NE: _op.ne, Cmp.GE: _op.ge, Cmp.GT: _op.gt,
}


class AggFunc(enum.IntEnum):
    SUM = 0
    COUNT = 1
    AVG = 2
    MIN = 3
    MAX = 4


@dataclass(frozen=True)
class Constant:
    type: SlotType
    value: Union[int, float]

    @classmethod
    def of_term(cls, term: Term, alg: HashAlgorithm = DEFAULT_ALGORITHM) -> "Constant":
        if term.kind is TermKind.INTEGER_LITERAL:
            return cls(SlotType.INTEGER, term.value)
        if term.kind is TermKind.FLOAT_LITERAL:
            return cls(SlotType.FLOAT, term.value)
        return cls(SlotType.STRING_HASH, hash_string(term.token(), alg))


Operand = Union[int, Constant]  # int = column index


@dataclass(frozen=True)
class Comparison:
    lhs: Operand
    cmp: Cmp
    rhs: Operand


@dataclass(frozen=True)
class GpsParams:
    constants: tuple[Optional[Constant], Optional[Constant], Optional[Constant]] = (None, None, None)


@dataclass(frozen=True)
class SelectionParams:
    comparisons: tuple[Comparison, ...] = ()


@dataclass(frozen=True)
class SljParams:
    left_attr: int
    right_attr: int


@dataclass(frozen=True)
class AggColumn:
    func: AggFunc
    column: Optional[int] = None  # None = COUNT(*)


@dataclass(frozen=True)
class AggregateParams:
    columns: tuple[AggColumn, ...] = ()


@dataclass(frozen=True)
class CollectParams:
    pass


Params = Union[GpsParams, SelectionParams, SljParams, AggregateParams, CollectParams]

_PARAMS_FOR = {
    OpType.GPS: GpsParams,
    OpType.SELECTION: SelectionParams,
    OpType.SLJ: SljParams,
    OpType.COLLECT: CollectParams,
    OpType.AGGREGATE: AggregateParams,
}


@dataclass(frozen=True)
class OperatorDescriptor:
    """One operator of an in-network query.

    For AGGREGATE the projection mask lists the input value type of each
    aggregate column (INTEGER for COUNT), so its kept count is the output arity.
    """

    op_id: int
    op_type: OpType
    parent_id: Optional[int]
    projection: ProjectionMask
    params: Params

    def __post_init__(self) -> None:
        if not 0 <= self.op_id <= 255:
            raise ValueError("op_id is one byte")
        if self.parent_id is not None and not 0 <= self.parent_id <= 255:
            raise ValueError("parent_id is one byte")
        if not isinstance(self.params, _PARAMS_FOR[self.op_type]):
            raise ValueError(f"{self.op_type.name} needs {_PARAMS_FOR[self.op_type].__name__}")


@dataclass(frozen=True)
class DeviceQuery:
    query_id: int
    lifetime_s: int
    descriptors: tuple[OperatorDescriptor, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.query_id <= 255:
            raise ValueError("query_id is one byte")
        if not 0 <= self.lifetime_s <= 0xFFFF:
            raise ValueError("lifetime is a 16-bit count of seconds")

    def descriptor(self, op_id: int) -> OperatorDescriptor:
        for d in self.descriptors:
            if d.op_id == op_id:
                return d
        raise KeyError(op_id)


# -- aggregate state -----------------------------------------------------------------


@dataclass
class AggColumnState:
    func: AggFunc
    vtype: SlotType
    count: int = 0
    total: Union[int, float] = 0
    lo: Optional[Union[int, float]] = None
    hi: Optional[Union[int, float]] = None

    def copy(self) -> "AggColumnState":
        return AggColumnState(self.func, self.vtype, self.count, self.total, self.lo, self.hi)


class AggregateState:
    """Accumulators for SUM/COUNT/AVG/MIN/MAX; AVG is kept as (sum, count)."""

    def __init__(self, spec: Sequence[tuple[AggFunc, SlotType]]):
        self.columns = [AggColumnState(f, t, total=0.0 if t is SlotType.FLOAT else 0) for f, t in spec]
        self.dirty = False

    @property
    def spec(self) -> tuple[tuple[AggFunc, SlotType], ...]:
        return tuple((c.func, c.vtype) for c in self.columns)

    def update(self, values: Sequence[Optional[Union[int, float]]]) -> None:
        """Feed one input row; ``values[i]`` is the input of column i (ignored for COUNT)."""
        for col, v in zip(self.columns, values):
            col.count += 1
            f = col.func
            if f is AggFunc.SUM or f is AggFunc.AVG:
                col.total += v
            elif f is AggFunc.MIN:
                if col.lo is None or v < col.lo:
                    col.lo = v
            elif f is AggFunc.MAX:
                if col.hi is None or v > col.hi:
                    col.hi = v
        self.dirty = True

    def merge(self, other: "AggregateState") -> "AggregateState":
        if self.spec != other.spec:
            raise SpecMismatch(f"{self.spec} vs {other.spec}")
        out = self.copy()
        for mine, theirs in zip(out.columns, other.columns):
            mine.count += theirs.count
            mine.total += theirs.total
            if theirs.lo is not None and (mine.lo is None or theirs.lo < mine.lo):
                mine.lo = theirs.lo
            if theirs.hi is not None and (mine.hi is None or theirs.hi > mine.hi):
                mine.hi = theirs.hi
        out.dirty = self.dirty or other.dirty
        return out

    def copy(self) -> "AggregateState":
        out = AggregateState.__new__(AggregateState)
        out.columns = [c.copy() for c in self.columns]
        out.dirty = self.dirty
        return out

    def emit(self) -> list[Optional[Term]]:
        """Final values as terms; MIN/MAX of nothing are unbound (None)."""
        out: list[Optional[Term]] = []
        for c in self.columns:
            if c.func is AggFunc.COUNT:
                out.append(Term.integer(c.count))
            elif c.func is AggFunc.SUM:
                if c.count == 0:
                    out.append(Term.integer(0))
                elif c.vtype is SlotType.FLOAT:
                    out.append(Term.float(c.total))
                else:
                    out.append(Term.integer(c.total))
            elif c.func is AggFunc.AVG:
                if c.count == 0:
                    out.append(Term.integer(0))
                else:
                    out.append(Term.float(c.total / c.count))
            else:
                v = c.lo if c.func is AggFunc.MIN else c.hi
                if v is None:
                    out.append(None)
                elif c.vtype is SlotType.FLOAT:
                    out.append(Term.float(v))
                else:
                    out.append(Term.integer(v))
        return out

    def state_key(self) -> tuple:
        return tuple((c.func, c.vtype, c.count, c.total, c.lo, c.hi) for c in self.columns)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AggregateState) and self.state_key() == other.state_key()

    def __repr__(self) -> str:
        return f"AggregateState({self.state_key()})"


# -- runtime -------------------------------------------------------------------------


class HashedStore:
    """A tuple store seen through 32-bit hashes, with per-key memoisation."""

    def __init__(self, store: TupleStore, alg: HashAlgorithm = DEFAULT_ALGORITHM):
        self.store = store
        self.alg = alg
        self._hash: dict[int, int] = {}
        self._index: Optional[dict[int, list[int]]] = None
        self._index_size = -1

    def hash_of(self, key: int) -> int:
        h = self._hash.get(key)
        if h is None:
            h = self._hash[key] = hash_string(self.store.dictionary.lookup(key), self.alg)
        return h

    def keys_for_constant(self, c: Constant) -> list[int]:
        if c.type is SlotType.STRING_HASH:
            d = self.store.dictionary
            if self._index is None or self._index_size != len(d):
                index: dict[int, list[int]] = {}
                for key, _ in d.items():
                    index.setdefault(self.hash_of(key), []).append(key)
                self._index, self._index_size = index, len(d)
            return self._index.get(c.value, [])
        term = Term.integer(c.value) if c.type is SlotType.INTEGER else Term.float(c.value)
        key = self.store.key_of(term)
        return [] if key is None else [key]

    def slot(self, key: int, kind: TermKind, want: SlotType):
        if want is SlotType.STRING_HASH:
            return self.hash_of(key)
        if want is SlotType.INTEGER:
            return self.store.term(key).value if kind is TermKind.INTEGER_LITERAL else None
        return self.store.term(key).value if kind is TermKind.FLOAT_LITERAL else None


class Operator:
    def __init__(self, desc: OperatorDescriptor):
        self.desc = desc
        self.op_id = desc.op_id
        self.mask = desc.projection
        self.kept = desc.projection.kept
        self.out_types = desc.projection.kept_types
        self.parent: Optional[Operator] = None
        self.children: list[Operator] = []

    @property
    def out_arity(self) -> int:
        return len(self.kept)

    def project(self, values: Sequence) -> Row:
        return Row(tuple(values[i] for i in self.kept), self.out_types)

    def emit(self, row: Row) -> None:
        self.parent.push(row, self.op_id)

    def push(self, row: Row, child_id: int) -> None:  # pragma: no cover - abstract
        raise NotImplementedError


class GraphPatternSelection(Operator):
    """Leaf: selects stored triples by constant hashes and emits projected rows."""

    def execute(self, data: HashedStore) -> None:
        store = data.store
        constants = self.desc.params.constants
        candidates: list[Optional[set[int]]] = []
        for c in constants:
            if c is None:
                candidates.append(None)
                continue
            keys = data.keys_for_constant(c)
            if not keys:
                self.emit(END)
                return
            candidates.append(set(keys))
        scan_mask = tuple(next(iter(s)) if s is not None and len(s) == 1 else None for s in candidates)
        wanted = [(i, self.mask.code(i)) for i in self.kept]
        for keys in store.scan(scan_mask):
            if any(s is not None and k not in s for s, k in zip(candidates, keys)):
                continue
            kinds = store.kinds(keys)
            values = []
            for i, t in wanted:
                v = data.slot(keys[i], kinds[i], t)
                if v is None:
                    break
                values.append(v)
            else:
                self.emit(Row(tuple(values), self.out_types))
        self.emit(END)

    def push(self, row: Row, child_id: int) -> None:
        raise MalformedTree("GPS has no children")


def _operand(row: Row, x: Operand) -> tuple[SlotType, Union[int, float]]:
    if isinstance(x, Constant):
        return x.type, x.value
    return row.types[x], row.values[x]


def compare(cmp: Cmp, a: tuple[SlotType, Union[int, float]], b: tuple[SlotType, Union[int, float]]) -> bool:
    (ta, va), (tb, vb) = a, b
    if ta is SlotType.STRING_HASH or tb is SlotType.STRING_HASH:
        if ta is not tb:
            raise TypeMismatch("hash compared with a number")
        if cmp is Cmp.EQ:
            return va == vb
        if cmp is Cmp.NE:
            return va != vb
        raise TypeMismatch(f"ordering comparison {cmp.symbol} on STRING_HASH")
    return _CMP_FUNCS[cmp](float(va), float(vb))


class Selection(Operator):
    def push(self, row: Row, child_id: int) -> None:
        if row.end:
            self.emit(END)
            return
        for c in self.desc.params.comparisons:
            if not compare(c.cmp, _operand(row, c.lhs), _operand(row, c.rhs)):
                return
        self.emit(self.project(row.values))


def _join_key(t: SlotType, v: Union[int, float]) -> tuple:
    # term identity: INTEGER 5 and FLOAT 5.0 never join, FLOAT compares by bits
    return (t, float32_bits(v)) if t is SlotType.FLOAT else (t, v)


class SimpleLocalJoin(Operator):
    """Equality join of two child streams; the lower-id child is the left side.

    Each side buffers only the columns its projection keeps, and stops
    buffering once the other side has finished.
    """

    def __init__(self, desc: OperatorDescriptor, buffer_limit: int = DEFAULT_JOIN_BUFFER):
        super().__init__(desc)
        self.buffer_limit = buffer_limit
        self.left_id = self.right_id = -1
        self.left_arity = self.right_arity = 0
        self.buffers: dict[int, dict[tuple, list[tuple]]] = {}
        self.buffered = {}
        self.ended: set[int] = set()

    def bind_children(self) -> None:
        if len(self.children) != 2:
            raise MalformedTree(f"SLJ {self.op_id} needs 2 children")
        left, right = sorted(self.children, key=lambda op: op.op_id)
        self.left_id, self.right_id = left.op_id, right.op_id
        self.left_arity, self.right_arity = left.out_arity, right.out_arity
        if self.left_arity + self.right_arity > MAX_COLUMNS:
            raise RowTooWide(f"SLJ {self.op_id} concatenates {self.left_arity + self.right_arity} columns")
        p = self.desc.params
        if not (0 <= p.left_attr < self.left_arity and 0 <= p.right_attr < self.right_arity):
            raise MalformedTree(f"SLJ {self.op_id} join attribute out of range")
        self.left_keep = [i for i in self.kept if i < self.left_arity]
        self.right_keep = [i - self.left_arity for i in self.kept if i >= self.left_arity]
        self.buffers = {self.left_id: {}, self.right_id: {}}
        self.buffered = {self.left_id: 0, self.right_id: 0}

    def push(self, row: Row, child_id: int) -> None:
        if row.end:
            self.ended.add(child_id)
            if len(self.ended) == 2:
                self.buffers = {self.left_id: {}, self.right_id: {}}
                self.emit(END)
            return
        is_left = child_id == self.left_id
        p = self.desc.params
        attr = p.left_attr if is_left else p.right_attr
        key = _join_key(row.types[attr], row.values[attr])
        keep = self.left_keep if is_left else self.right_keep
        part = tuple(row.values[i] for i in keep)
        other_id = self.right_id if is_left else self.left_id
        for other in self.buffers[other_id].get(key, ()):
            values = part + other if is_left else other + part
            self.emit(Row(values, self.out_types))
        if other_id not in self.ended:
            if self.buffered[child_id] >= self.buffer_limit:
                raise BufferOverflow(f"SLJ {self.op_id} buffer exceeds {self.buffer_limit} rows")
            self.buffers[child_id].setdefault(key, []).append(part)
            self.buffered[child_id] += 1


class Collect(Operator):
    """Root that ships every received row, end marker included, to the network."""

    def __init__(self, desc: OperatorDescriptor, sink: Callable[[int, Row], None]):
        super().__init__(desc)
        self.sink = sink

    def push(self, row: Row, child_id: int) -> None:
        self.sink(self.op_id, END if row.end else self.project(row.values))


class Aggregate(Operator):
    """Root keeping a running aggregate of local rows and child-device states."""

    def __init__(self, desc: OperatorDescriptor):
        super().__init__(desc)
        cols = desc.params.columns
        types = desc.projection.kept_types
        if len(types) != len(cols):
            raise MalformedTree(f"AGGREGATE {self.op_id}: mask lists {len(types)} types for {len(cols)} columns")
        self.spec = tuple(zip((c.func for c in cols), types))
        self.inputs = tuple(c.column for c in cols)
        self.local = AggregateState(self.spec)
        self.children_states: dict[object, AggregateState] = {}
        self.finished = False

    @property
    def out_arity(self) -> int:
        return len(self.spec)

    def push(self, row: Row, child_id: int) -> None:
        if row.end:
            self.finished = True
            return
        self.local.update([None if c is None else row.values[c] for c in self.inputs])

    def receive(self, source: object, state: AggregateState) -> None:
        """Replace the latest subtree state reported by a child device."""
        if state.spec != self.spec:
            raise SpecMismatch(f"AGGREGATE {self.op_id}: {state.spec} vs {self.spec}")
        self.children_states[source] = state
        self.local.dirty = True

    @property
    def dirty(self) -> bool:
        return self.local.dirty

    def clear_dirty(self) -> None:
        self.local.dirty = False

    def subtree_state(self) -> AggregateState:
        total = self.local.copy()
        for key in sorted(self.children_states, key=str):
            total = total.merge(self.children_states[key])
        total.dirty = False
        return total


def validate_tree(descriptors: Sequence[OperatorDescriptor]) -> dict[int, OperatorDescriptor]:
    by_id: dict[int, OperatorDescriptor] = {}
    for d in descriptors:
        if d.op_id in by_id:
            raise MalformedTree(f"duplicate op_id {d.op_id}")
        by_id[d.op_id] = d
    if len(by_id) > MAX_OPERATORS:
        raise MalformedTree(f"{len(by_id)} operators exceed {MAX_OPERATORS}")
    children: dict[int, list[int]] = {i: [] for i in by_id}
    for d in descriptors:
        is_root_type = d.op_type in (OpType.COLLECT, OpType.AGGREGATE)
        if d.parent_id is None:
            if not is_root_type:
                raise MalformedTree(f"op {d.op_id} ({d.op_type.name}) has no parent but is not COLLECT/AGGREGATE")
            continue
        if is_root_type:
            raise MalformedTree(f"{d.op_type.name} {d.op_id} must be a root")
        parent = by_id.get(d.parent_id)
        if parent is None:
            raise MalformedTree(f"op {d.op_id} references missing parent {d.parent_id}")
        if parent.op_type is OpType.GPS:
            raise MalformedTree(f"GPS {parent.op_id} cannot have children")
        children[d.parent_id].append(d.op_id)
    for d in descriptors:
        seen = set()
        cur: Optional[int] = d.op_id
        while cur is not None:
            if cur in seen:
                raise MalformedTree(f"cycle through op {cur}")
            seen.add(cur)
            cur = by_id[cur].parent_id
        n = len(children[d.op_id])
        want = {OpType.GPS: 0, OpType.SLJ: 2}.get(d.op_type, 1)
        if n != want:
            raise MalformedTree(f"{d.op_type.name} {d.op_id} has {n} children, needs {want}")
    return by_id


class OperatorTree:
    """Instantiated operator forest of one query on one device."""

    def __init__(
        self,
        descriptors: Sequence[OperatorDescriptor],
        store: TupleStore,
        alg: HashAlgorithm = DEFAULT_ALGORITHM,
        buffer_limit: int = DEFAULT_JOIN_BUFFER,
        sink: Optional[Callable[[int, Row], None]] = None,
        data: Optional[HashedStore] = None,
    ):
        by_id = validate_tree(descriptors)
        self.output: list[tuple[int, Row]] = []
        self._sink = sink if sink is not None else (lambda op_id, row: self.output.append((op_id, row)))
        self.data = data if data is not None else HashedStore(store, alg)
        self.ops: dict[int, Operator] = {}
        for d in descriptors:
            if d.op_type is OpType.GPS:
                op: Operator = GraphPatternSelection(d)
            elif d.op_type is OpType.SELECTION:
                op = Selection(d)
            elif d.op_type is OpType.SLJ:
                op = SimpleLocalJoin(d, buffer_limit)
            elif d.op_type is OpType.COLLECT:
                op = Collect(d, self._sink)
            else:
                op = Aggregate(d)
            self.ops[d.op_id] = op
        for d in descriptors:
            if d.parent_id is not None:
                self.ops[d.op_id].parent = self.ops[d.parent_id]
                self.ops[d.parent_id].children.append(self.ops[d.op_id])
        # bottom-up, so every SLJ sees its children's arities
        for op_id in sorted(self.ops, key=lambda i: _depth(by_id, i), reverse=True):
            op = self.ops[op_id]
            if isinstance(op, SimpleLocalJoin):
                op.bind_children()
            elif isinstance(op, Aggregate):
                self._check_aggregate(op)
        self.aggregates = {i: op for i, op in self.ops.items() if isinstance(op, Aggregate)}
        self.execution_order: list[int] = []

    @staticmethod
    def _check_aggregate(op: Aggregate) -> None:
        child = op.children[0]
        for (func, vtype), col in zip(op.spec, op.inputs):
            if col is None:
                if func is not AggFunc.COUNT:
                    raise MalformedTree(f"{func.name} needs an input column")
                continue
            if col >= child.out_arity:
                raise MalformedTree(f"AGGREGATE {op.op_id} reads column {col} of a {child.out_arity}-column input")
            if func is not AggFunc.COUNT and (
                vtype not in NUMERIC or child.out_types[col] is not vtype
            ):
                raise TypeMismatch(f"{func.name} over a {child.out_types[col].name} column")

    def run(self) -> list[tuple[int, Row]]:
        """Execute every GPS in ascending id order; returns rows leaving COLLECT roots."""
        for op_id in sorted(self.ops):
            op = self.ops[op_id]
            if isinstance(op, GraphPatternSelection):
                self.execution_order.append(op_id)
                op.execute(self.data)
        return self.output


def _depth(by_id: dict[int, OperatorDescriptor], op_id: int) -> int:
    n = 0
    cur = by_id[op_id].parent_id
    while cur is not None:
        n += 1
        cur = by_id[cur].parent_id
    return n


def tree_run(
    descriptors: Sequence[OperatorDescriptor], ts: TupleStore, alg: HashAlgorithm = DEFAULT_ALGORITHM
) -> list[tuple[int, Row]]:
    return OperatorTree(descriptors, ts, alg).run()
