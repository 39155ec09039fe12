"""Binary encoding of queries, result rows, aggregate states and string messages.

All multi-byte fields are big-endian. Every message starts with
``msg_type(1) query_id(1)``.
"""

from __future__ import annotations

import enum
import struct
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional, Union

from .operators import (
    MAX_OPERATORS,
    AggColumn,
    AggFunc,
    AggregateParams,
    AggregateState,
    Cmp,
    CollectParams,
    Comparison,
    Constant,
    DeviceQuery,
    GpsParams,
    OperatorDescriptor,
    OpType,
    ProjectionMask,
    Row,
    SelectionParams,
    SljParams,
    SlotType,
)
from .rdf import float32_bits, float32_from_bits

DEFAULT_MTU = 96
HEADER_SIZE = 2
QUERY_HEADER_SIZE = 6
ROW_HEADER_SIZE = 4
NONE_PARENT = 0xFF
COUNT_STAR = 0xFF
FLAG_END = 0x01


class WireError(Exception):
    pass


class Truncated(WireError):
    pass


class UnknownType(WireError):
    pass


class BadArity(WireError):
    pass


class ParamsTooLong(WireError):
    pass


class OperatorExceedsMtu(WireError):
    pass


class TooManyOperators(WireError):
    pass


class MessageTooLarge(WireError):
    pass


class MsgType(enum.IntEnum):
    QUERY = 1
    RESULT_ROW = 2
    AGG_ROW = 3
    STRING_REQ = 4
    STRING_RESP = 5


# -- 32-bit slot values ----------------------------------------------------------------


def value_to_word(t: SlotType, v: Union[int, float]) -> int:
    if t is SlotType.FLOAT:
        return float32_bits(v)
    if t is SlotType.INTEGER:
        return v & 0xFFFFFFFF
    return v


def word_to_value(t: SlotType, w: int) -> Union[int, float]:
    if t is SlotType.FLOAT:
        return float32_from_bits(w)
    if t is SlotType.INTEGER:
        return w - (1 << 32) if w & 0x80000000 else w
    return w


# -- operator descriptors ------------------------------------------------------------------


def _operand_byte(x) -> tuple[int, Optional[Constant]]:
    if isinstance(x, Constant):
        return int(x.type) << 6, x
    if not 0 <= x < 16:
        raise ValueError(f"column index {x} out of range")
    return x, None


def _encode_params(d: OperatorDescriptor) -> bytes:
    p = d.params
    if d.op_type is OpType.GPS:
        flags = 0
        words = []
        for i, c in enumerate(p.constants):
            if c is not None:
                flags |= int(c.type) << (6 - 2 * i)
                words.append(value_to_word(c.type, c.value))
        return bytes([flags]) + b"".join(struct.pack(">I", w) for w in words)
    if d.op_type is OpType.SELECTION:
        out = bytearray([len(p.comparisons)])
        for c in p.comparisons:
            lb, lc = _operand_byte(c.lhs)
            rb, rc = _operand_byte(c.rhs)
            if lc is not None and rc is not None:
                raise ValueError("a comparison holds at most one constant")
            const = lc or rc
            word = value_to_word(const.type, const.value) if const is not None else 0
            out += bytes([lb, int(c.cmp), rb]) + struct.pack(">I", word)
        return bytes(out)
    if d.op_type is OpType.SLJ:
        return bytes([p.left_attr, p.right_attr])
    if d.op_type is OpType.AGGREGATE:
        out = bytearray([len(p.columns)])
        for c in p.columns:
            out += bytes([int(c.func), COUNT_STAR if c.column is None else c.column])
        return bytes(out)
    return b""


def encode_descriptor(d: OperatorDescriptor) -> bytes:
    is_root_type = d.op_type in (OpType.COLLECT, OpType.AGGREGATE)
    if is_root_type != (d.parent_id is None):
        raise ValueError(f"{d.op_type.name} {d.op_id}: only COLLECT/AGGREGATE roots go without a parent")
    params = _encode_params(d)
    if len(params) > 255:
        raise ParamsTooLong(f"op {d.op_id}: {len(params)} parameter bytes")
    parent = NONE_PARENT if d.parent_id is None else d.parent_id
    return struct.pack(">BBBIB", d.op_id, int(d.op_type), parent, d.projection.value, len(params)) + params


def _need(data: bytes, off: int, n: int) -> None:
    if off + n > len(data):
        raise Truncated(f"need {n} bytes at offset {off}, have {len(data) - off}")


def _decode_params(op_type: OpType, raw: bytes):
    try:
        if op_type is OpType.GPS:
            _need(raw, 0, 1)
            flags = raw[0]
            consts: list[Optional[Constant]] = []
            off = 1
            for i in range(3):
                code = (flags >> (6 - 2 * i)) & 0b11
                if code == 0:
                    consts.append(None)
                    continue
                _need(raw, off, 4)
                t = SlotType(code)
                consts.append(Constant(t, word_to_value(t, struct.unpack_from(">I", raw, off)[0])))
                off += 4
            if flags & 0b11 or off != len(raw):
                raise Truncated("GPS parameter length mismatch")
            return GpsParams(tuple(consts))
        if op_type is OpType.SELECTION:
            _need(raw, 0, 1)
            n = raw[0]
            if len(raw) != 1 + 7 * n:
                raise Truncated("selection parameter length mismatch")
            comps = []
            for k in range(n):
                lb, cmp, rb, word = struct.unpack_from(">BBBI", raw, 1 + 7 * k)
                sides = []
                for b in (lb, rb):
                    kind = b >> 6
                    if kind == 0:
                        sides.append(b & 0x0F)
                    else:
                        t = SlotType(kind)
                        sides.append(Constant(t, word_to_value(t, word)))
                comps.append(Comparison(sides[0], Cmp(cmp), sides[1]))
            return SelectionParams(tuple(comps))
        if op_type is OpType.SLJ:
            if len(raw) != 2:
                raise Truncated("SLJ takes 2 parameter bytes")
            return SljParams(raw[0], raw[1])
        if op_type is OpType.AGGREGATE:
            _need(raw, 0, 1)
            n = raw[0]
            if len(raw) != 1 + 2 * n:
                raise Truncated("aggregate parameter length mismatch")
            cols = []
            for k in range(n):
                f, c = raw[1 + 2 * k], raw[2 + 2 * k]
                cols.append(AggColumn(AggFunc(f), None if c == COUNT_STAR else c))
            return AggregateParams(tuple(cols))
        if raw:
            raise Truncated("COLLECT takes no parameters")
        return CollectParams()
    except ValueError as exc:
        if isinstance(exc, WireError):
            raise
        raise UnknownType(str(exc)) from None


def decode_descriptor(data: bytes, off: int = 0) -> tuple[OperatorDescriptor, int]:
    """Decode one descriptor at ``off``; returns it and the offset just past it."""
    _need(data, off, 8)
    op_id, op_type, parent, mask, plen = struct.unpack_from(">BBBIB", data, off)
    try:
        op_type = OpType(op_type)
    except ValueError:
        raise UnknownType(f"operator type {op_type}") from None
    _need(data, off + 8, plen)
    params = _decode_params(op_type, bytes(data[off + 8:off + 8 + plen]))
    if op_type in (OpType.COLLECT, OpType.AGGREGATE):
        if parent != NONE_PARENT:
            raise WireError(f"{op_type.name} {op_id} must not name a parent")
        parent_id = None
    else:
        parent_id = parent
    return OperatorDescriptor(op_id, op_type, parent_id, ProjectionMask(mask), params), off + 8 + plen


# -- messages ----------------------------------------------------------------------------


@dataclass(frozen=True)
class QueryMessage:
    query_id: int
    lifetime_s: int
    total_ops: int
    op_index_offset: int
    descriptors: tuple[OperatorDescriptor, ...]

    msg_type = MsgType.QUERY


@dataclass(frozen=True)
class ResultRowMessage:
    query_id: int
    op_id: int
    flags: int
    words: tuple[int, ...]

    msg_type = MsgType.RESULT_ROW

    @property
    def end(self) -> bool:
        return bool(self.flags & FLAG_END)


@dataclass(frozen=True)
class AggRowMessage:
    query_id: int
    op_id: int
    flags: int
    state: bytes

    msg_type = MsgType.AGG_ROW


@dataclass(frozen=True)
class StringRequest:
    query_id: int
    hash: int

    msg_type = MsgType.STRING_REQ


@dataclass(frozen=True)
class StringResponse:
    query_id: int
    hash: int
    origin: int
    total_len: int
    offset: int
    chunk: bytes

    msg_type = MsgType.STRING_RESP


Message = Union[QueryMessage, ResultRowMessage, AggRowMessage, StringRequest, StringResponse]


def encode_message(msg: Message, mtu: Optional[int] = None) -> bytes:
    head = bytes([int(msg.msg_type), msg.query_id])
    if isinstance(msg, QueryMessage):
        total = msg.total_ops % 256  # 0 stands for 256
        body = struct.pack(">HBB", msg.lifetime_s, total, msg.op_index_offset)
        body += b"".join(encode_descriptor(d) for d in msg.descriptors)
    elif isinstance(msg, ResultRowMessage):
        if msg.flags & FLAG_END and msg.words:
            raise BadArity("end marker rows carry no values")
        body = bytes([msg.op_id, msg.flags]) + b"".join(struct.pack(">I", w) for w in msg.words)
    elif isinstance(msg, AggRowMessage):
        body = bytes([msg.op_id, msg.flags]) + msg.state
    elif isinstance(msg, StringRequest):
        body = struct.pack(">I", msg.hash)
    elif isinstance(msg, StringResponse):
        body = struct.pack(">IHHH", msg.hash, msg.origin, msg.total_len, msg.offset) + msg.chunk
    else:
        raise TypeError(msg)
    out = head + body
    if mtu is not None and len(out) > mtu:
        raise MessageTooLarge(f"{len(out)}-byte message exceeds MTU {mtu}")
    return out


def decode_message(data: bytes, arity: Optional[int] = None) -> Message:
    """Decode one message. ``arity`` (when the receiver knows the operator) checks row width."""
    data = bytes(data)
    _need(data, 0, HEADER_SIZE)
    try:
        mtype = MsgType(data[0])
    except ValueError:
        raise UnknownType(f"message type {data[0]}") from None
    qid = data[1]
    if mtype is MsgType.QUERY:
        _need(data, 2, 4)
        lifetime, total, offset = struct.unpack_from(">HBB", data, 2)
        descs = []
        off = QUERY_HEADER_SIZE
        while off < len(data):
            d, off = decode_descriptor(data, off)
            descs.append(d)
        return QueryMessage(qid, lifetime, total or 256, offset, tuple(descs))
    if mtype is MsgType.RESULT_ROW:
        _need(data, 2, 2)
        op_id, flags = data[2], data[3]
        rest = data[ROW_HEADER_SIZE:]
        if flags & FLAG_END and rest:
            raise BadArity("end marker with value bytes")
        if len(rest) % 4:
            raise BadArity(f"{len(rest)} value bytes is not a whole number of slots")
        words = struct.unpack(f">{len(rest) // 4}I", rest)
        if arity is not None and not flags & FLAG_END and len(words) != arity:
            raise BadArity(f"row of {len(words)} slots, operator declares {arity}")
        return ResultRowMessage(qid, op_id, flags, tuple(words))
    if mtype is MsgType.AGG_ROW:
        _need(data, 2, 2)
        return AggRowMessage(qid, data[2], data[3], data[ROW_HEADER_SIZE:])
    if mtype is MsgType.STRING_REQ:
        _need(data, 2, 4)
        if len(data) != 6:
            raise Truncated("string request is 6 bytes")
        return StringRequest(qid, struct.unpack_from(">I", data, 2)[0])
    _need(data, 2, 10)
    h, origin, total_len, offset = struct.unpack_from(">IHHH", data, 2)
    return StringResponse(qid, h, origin, total_len, offset, data[12:])


# -- rows and aggregate states ---------------------------------------------------------------


def row_message(query_id: int, op_id: int, row: Row) -> ResultRowMessage:
    if row.end:
        return ResultRowMessage(query_id, op_id, FLAG_END, ())
    words = tuple(value_to_word(t, v) for t, v in zip(row.types, row.values))
    return ResultRowMessage(query_id, op_id, 0, words)


def message_row(msg: ResultRowMessage, types: Sequence[SlotType]) -> Row:
    if msg.end:
        return Row(end=True)
    if len(msg.words) != len(types):
        raise BadArity(f"row of {len(msg.words)} slots, expected {len(types)}")
    return Row(tuple(word_to_value(t, w) for t, w in zip(types, msg.words)), tuple(types))


def encode_agg_state(state: AggregateState) -> bytes:
    out = bytearray()
    for c in state.columns:
        out += struct.pack(">Q", c.count)
        if c.func in (AggFunc.SUM, AggFunc.AVG):
            out += struct.pack(">d" if c.vtype is SlotType.FLOAT else ">q", c.total)
        elif c.func in (AggFunc.MIN, AggFunc.MAX):
            v = c.lo if c.func is AggFunc.MIN else c.hi
            out += struct.pack(">I", 0 if v is None else value_to_word(c.vtype, v))
    return bytes(out)


def agg_state_size(spec: Sequence[tuple[AggFunc, SlotType]]) -> int:
    size = 0
    for func, _ in spec:
        size += 8 + {AggFunc.COUNT: 0, AggFunc.SUM: 8, AggFunc.AVG: 8}.get(func, 4)
    return size


def decode_agg_state(raw: bytes, spec: Sequence[tuple[AggFunc, SlotType]]) -> AggregateState:
    if len(raw) != agg_state_size(spec):
        raise BadArity(f"aggregate state of {len(raw)} bytes, expected {agg_state_size(spec)}")
    state = AggregateState(spec)
    off = 0
    for c in state.columns:
        c.count = struct.unpack_from(">Q", raw, off)[0]
        off += 8
        if c.func in (AggFunc.SUM, AggFunc.AVG):
            c.total = struct.unpack_from(">d" if c.vtype is SlotType.FLOAT else ">q", raw, off)[0]
            off += 8
        elif c.func in (AggFunc.MIN, AggFunc.MAX):
            w = struct.unpack_from(">I", raw, off)[0]
            off += 4
            if c.count:
                if c.func is AggFunc.MIN:
                    c.lo = word_to_value(c.vtype, w)
                else:
                    c.hi = word_to_value(c.vtype, w)
    return state


# -- query splitting -----------------------------------------------------------------------


def split_query(q: DeviceQuery, mtu: int = DEFAULT_MTU) -> list[QueryMessage]:
    """Greedily pack whole descriptors into messages of at most ``mtu`` bytes."""
    n = len(q.descriptors)
    if n > MAX_OPERATORS:
        raise TooManyOperators(f"{n} operators exceed {MAX_OPERATORS}")
    if n == 0:
        raise ValueError("a query needs at least one operator")
    budget = mtu - QUERY_HEADER_SIZE
    groups: list[tuple[int, list[OperatorDescriptor]]] = []
    used = budget + 1
    for i, d in enumerate(q.descriptors):
        size = len(encode_descriptor(d))
        if size > budget:
            raise OperatorExceedsMtu(f"op {d.op_id} encodes to {size} bytes, MTU {mtu} leaves {budget}")
        if used + size > budget:
            groups.append((i, []))
            used = 0
        groups[-1][1].append(d)
        used += size
    return [QueryMessage(q.query_id, q.lifetime_s, n, off, tuple(ds)) for off, ds in groups]


def encode_query(q: DeviceQuery, mtu: int = DEFAULT_MTU) -> list[bytes]:
    return [encode_message(m, mtu) for m in split_query(q, mtu)]


def join_query(messages: Sequence[QueryMessage]) -> DeviceQuery:
    """Reassemble a query from its messages, in any order."""
    if not messages:
        raise ValueError("no messages")
    first = messages[0]
    by_id: dict[int, OperatorDescriptor] = {}
    for m in messages:
        if (m.query_id, m.lifetime_s, m.total_ops) != (first.query_id, first.lifetime_s, first.total_ops):
            raise WireError("messages belong to different queries")
        for d in m.descriptors:
            by_id[d.op_id] = d
    if len(by_id) != first.total_ops:
        raise Truncated(f"{len(by_id)} of {first.total_ops} operators present")
    return DeviceQuery(first.query_id, first.lifetime_s, tuple(by_id[i] for i in sorted(by_id)))
