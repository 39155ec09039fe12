"""Deterministic discrete-event simulation of a device routing tree.

Devices are positive integers; the base station is device 0 (written ``-`` in
topology files and traces). Every message is the exact byte string produced by
the wire module, so byte accounting reflects the real encoding.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from .hashing import DEFAULT_ALGORITHM, HashAlgorithm, HashCache, resolve_hash
from .operators import (
    DEFAULT_JOIN_BUFFER,
    AggregateState,
    DeviceQuery,
    HashedStore,
    OperatorTree,
    OpType,
    Row,
    SlotType,
)
from .rdf import TupleStore
from .wire import (
    DEFAULT_MTU,
    AggRowMessage,
    MsgType,
    QueryMessage,
    ResultRowMessage,
    StringRequest,
    StringResponse,
    WireError,
    decode_agg_state,
    decode_message,
    encode_agg_state,
    encode_message,
    join_query,
    message_row,
    row_message,
    split_query,
)

BASE = 0
RESPONSE_HEADER_SIZE = 12


class TopologyError(ValueError):
    pass


def node_name(n: int) -> str:
    return "-" if n == BASE else str(n)


@dataclass
class Topology:
    """Routing tree: ``parent[d]`` is the next hop towards the base station."""

    parent: dict[int, int] = field(default_factory=dict)
    latency_ms: dict[int, float] = field(default_factory=dict)  # of the link d -> parent[d]

    def __post_init__(self) -> None:
        for d, p in self.parent.items():
            if d == BASE or d <= 0 or d > 0xFFFF:
                raise TopologyError(f"device ids must be in 1..65535, got {d}")
            if p != BASE and p not in self.parent:
                raise TopologyError(f"device {d} has unknown parent {p}")
            self.latency_ms.setdefault(d, 1.0)
            if self.latency_ms[d] < 0:
                raise TopologyError(f"negative latency on link {d}")
        for d in self.parent:
            seen = set()
            cur = d
            while cur != BASE:
                if cur in seen:
                    raise TopologyError(f"cycle through device {cur}")
                seen.add(cur)
                cur = self.parent[cur]

    @property
    def devices(self) -> list[int]:
        return sorted(self.parent)

    def children(self, node: int) -> list[int]:
        return sorted(d for d, p in self.parent.items() if p == node)

    def depth(self, d: int) -> int:
        n = 0
        while d != BASE:
            d = self.parent[d]
            n += 1
        return n

    @property
    def max_depth(self) -> int:
        return max((self.depth(d) for d in self.parent), default=0)

    @classmethod
    def chain(cls, n: int, latency_ms: float = 10.0) -> "Topology":
        return cls({i: i - 1 for i in range(1, n + 1)}, {i: latency_ms for i in range(1, n + 1)})

    @classmethod
    def star(cls, n: int, latency_ms: float = 10.0) -> "Topology":
        return cls({i: BASE for i in range(1, n + 1)}, {i: latency_ms for i in range(1, n + 1)})

    @classmethod
    def parse(cls, text: str) -> "Topology":
        parent, latency = {}, {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise TopologyError(f"line {lineno}: expected 'device_id parent_id latency_ms'")
            try:
                d = int(parts[0])
                p = BASE if parts[1] == "-" else int(parts[1])
                lat = float(parts[2])
            except ValueError:
                raise TopologyError(f"line {lineno}: bad number") from None
            if d in parent:
                raise TopologyError(f"line {lineno}: device {d} listed twice")
            parent[d], latency[d] = p, lat
        return cls(parent, latency)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Topology":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        return "".join(f"{d} {node_name(self.parent[d])} {self.latency_ms[d]:g}\n" for d in self.devices)


@dataclass
class SimConfig:
    mtu: int = DEFAULT_MTU
    aggregate_interval_ms: float = 1000.0
    processing_delay_ms: float = 1.0
    jitter_ms: float = 0.0
    drop_probability: float = 0.0
    seed: int = 0
    cache_capacity: int = 256
    join_buffer: int = DEFAULT_JOIN_BUFFER
    algorithm: HashAlgorithm = DEFAULT_ALGORITHM


@dataclass(frozen=True)
class TraceRecord:
    time_ms: float
    src: int
    dst: int
    msg_type: MsgType
    size: int

    def line(self) -> str:
        return f"{self.time_ms:.3f} {node_name(self.src)} {node_name(self.dst)} {self.msg_type.name} {self.size}"


@dataclass
class ActiveQuery:
    query: DeviceQuery
    tree: OperatorTree
    expiry_ms: float


class Device:
    def __init__(self, device_id: int, store: TupleStore, config: SimConfig):
        self.id = device_id
        self.store = store
        self.cache = HashCache(config.cache_capacity)
        self.data = HashedStore(store, config.algorithm)
        self.queries: dict[int, ActiveQuery] = {}
        self.assembling: dict[int, list[QueryMessage]] = {}
        self.received: Counter[MsgType] = Counter()


@dataclass
class BaseQuery:
    query: DeviceQuery
    rows: list[tuple[int, Row]] = field(default_factory=list)
    ends: Counter = field(default_factory=Counter)
    child_states: dict[tuple[int, int], AggregateState] = field(default_factory=dict)
    submitted_ms: float = 0.0
    first_result_ms: Optional[float] = None

    def root_types(self, op_id: int) -> tuple[SlotType, ...]:
        return self.query.descriptor(op_id).projection.kept_types


class Simulator:
    """Event-driven network of devices below a base station."""

    def __init__(
        self,
        topology: Topology,
        stores: Optional[dict[int, TupleStore]] = None,
        config: Optional[SimConfig] = None,
    ):
        self.topology = topology
        self.config = config or SimConfig()
        stores = stores or {}
        unknown = set(stores) - set(topology.parent)
        if unknown:
            raise TopologyError(f"data for devices not in the topology: {sorted(unknown)}")
        self.devices = {d: Device(d, stores.get(d, TupleStore()), self.config) for d in topology.devices}
        self._children = {n: topology.children(n) for n in [BASE, *topology.devices]}
        self.rng = random.Random(self.config.seed)
        self.now = 0.0
        self._queue: list = []
        self._seq = 0
        self.trace: list[TraceRecord] = []
        self.link_bytes: Counter[tuple[int, int]] = Counter()
        self.dropped_messages = 0
        self.diagnostics: list[str] = []
        self.base_queries: dict[int, BaseQuery] = {}
        self.resolved: dict[int, Optional[str]] = {}
        self._chunks: dict[int, dict[int, bytes]] = {}
        self.string_requests_sent = 0

    # -- event machinery
    def schedule(self, delay_ms: float, fn: Callable, *args) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (self.now + delay_ms, self._seq, fn, args))

    def run(self, until_ms: Optional[float] = None) -> None:
        """Process events in (time, sequence) order until the queue drains."""
        while self._queue:
            t, _, fn, args = self._queue[0]
            if until_ms is not None and t > until_ms:
                self.now = until_ms
                return
            heapq.heappop(self._queue)
            self.now = t
            fn(*args)

    @property
    def idle(self) -> bool:
        return not self._queue

    def send(self, src: int, dst: int, data: bytes) -> None:
        if len(data) > self.config.mtu:
            raise WireError(f"{len(data)}-byte message exceeds MTU {self.config.mtu}")
        link = src if self.topology.parent.get(src) == dst else dst
        self.trace.append(TraceRecord(self.now, src, dst, MsgType(data[0]), len(data)))
        self.link_bytes[(src, dst)] += len(data)
        if self.config.drop_probability and self.rng.random() < self.config.drop_probability:
            self.dropped_messages += 1
            return
        delay = self.topology.latency_ms[link]
        if self.config.jitter_ms:
            delay += self.rng.uniform(0.0, self.config.jitter_ms)
        self.schedule(delay, self._deliver, src, dst, data)

    def _deliver(self, src: int, dst: int, data: bytes) -> None:
        if dst == BASE:
            self._base_receive(src, data)
        else:
            self._device_receive(self.devices[dst], src, data)

    # -- accounting
    def bytes_into(self, node: int) -> int:
        return sum(n for (_, dst), n in self.link_bytes.items() if dst == node)

    def bytes_on_link(self, device: int) -> int:
        """Bytes in both directions over the link from ``device`` to its parent."""
        p = self.topology.parent[device]
        return self.link_bytes[(device, p)] + self.link_bytes[(p, device)]

    def messages(self, msg_type: Optional[MsgType] = None, dst: Optional[int] = None) -> list[TraceRecord]:
        return [r for r in self.trace if (msg_type is None or r.msg_type is msg_type) and (dst is None or r.dst == dst)]

    def trace_lines(self) -> list[str]:
        return [r.line() for r in self.trace]

    # -- base station
    def free_query_id(self) -> int:
        for qid in range(1, 256):
            if qid not in self.base_queries:
                return qid
        raise RuntimeError("all 255 query ids are in use")

    def release(self, query_id: int) -> None:
        self.base_queries.pop(query_id, None)

    def submit(self, query: DeviceQuery) -> None:
        """Distribute ``query`` from the base station to every device."""
        if query.query_id in self.base_queries:
            raise ValueError(f"query id {query.query_id} is still in use at the base station")
        self.base_queries[query.query_id] = BaseQuery(query, submitted_ms=self.now)
        for msg in split_query(query, self.config.mtu):
            data = encode_message(msg, self.config.mtu)
            for child in self._children[BASE]:
                self.send(BASE, child, data)

    def _base_receive(self, src: int, data: bytes) -> None:
        try:
            msg = decode_message(data)
        except WireError as exc:
            self.diagnostics.append(f"base: undecodable message from {src}: {exc}")
            return
        if isinstance(msg, StringResponse):
            self._base_string_response(msg)
            return
        bq = self.base_queries.get(msg.query_id)
        if bq is None:
            self.diagnostics.append(f"base: {msg.msg_type.name} for unknown query {msg.query_id} dropped")
            return
        try:
            desc = bq.query.descriptor(msg.op_id)
        except KeyError:
            self.diagnostics.append(f"base: row for unknown operator {msg.op_id} dropped")
            return
        if isinstance(msg, ResultRowMessage):
            row = message_row(msg, bq.root_types(msg.op_id))
            if row.end:
                bq.ends[msg.op_id] += 1
            else:
                bq.rows.append((msg.op_id, row))
                if bq.first_result_ms is None:
                    bq.first_result_ms = self.now
        elif isinstance(msg, AggRowMessage):
            spec = _aggregate_spec(desc)
            bq.child_states[(src, msg.op_id)] = decode_agg_state(msg.state, spec)
            if bq.first_result_ms is None:
                bq.first_result_ms = self.now

    def collected(self, query_id: int) -> list[tuple[int, Row]]:
        return list(self.base_queries[query_id].rows)

    def complete(self, query_id: int) -> bool:
        """True once every COLLECT root has an end marker from every device."""
        bq = self.base_queries[query_id]
        roots = [d.op_id for d in bq.query.descriptors if d.op_type is OpType.COLLECT]
        n = len(self.devices)
        return all(bq.ends[r] >= n for r in roots)

    def aggregate_state(self, query_id: int, op_id: int) -> AggregateState:
        bq = self.base_queries[query_id]
        spec = _aggregate_spec(bq.query.descriptor(op_id))
        total = AggregateState(spec)
        for (child, oid) in sorted(bq.child_states):
            if oid == op_id:
                total = total.merge(bq.child_states[(child, oid)])
        total.dirty = False
        return total

    def first_result_latency(self, query_id: int) -> Optional[float]:
        bq = self.base_queries[query_id]
        return None if bq.first_result_ms is None else bq.first_result_ms - bq.submitted_ms

    # -- string resolution
    def request_string(self, h: int, query_id: int = 0) -> None:
        """Ask the network for the string behind ``h``; the answer lands in ``resolved``."""
        self.string_requests_sent += 1
        data = encode_message(StringRequest(query_id, h), self.config.mtu)
        for child in self._children[BASE]:
            self.send(BASE, child, data)

    def resolve_strings(self, hashes, query_id: int = 0) -> dict[int, Optional[str]]:
        wanted = [h for h in dict.fromkeys(hashes) if h not in self.resolved]
        for h in wanted:
            self.request_string(h, query_id)
        self.run()
        return {h: self.resolved.get(h) for h in dict.fromkeys(hashes)}

    def _base_string_response(self, msg: StringResponse) -> None:
        parts = self._chunks.setdefault((msg.hash, msg.origin), {})
        parts[msg.offset] = msg.chunk
        if sum(len(c) for c in parts.values()) < msg.total_len:
            return
        raw = b"".join(parts[o] for o in sorted(parts))
        del self._chunks[(msg.hash, msg.origin)]
        s = raw.decode("utf-8")
        prior = self.resolved.get(msg.hash)
        if prior is None:
            self.resolved[msg.hash] = s
        elif prior != s:
            self.diagnostics.append(f"base: hash {msg.hash:08x} collides ({prior!r} kept, {s!r} ignored)")

    # -- devices
    def _device_receive(self, dev: Device, src: int, data: bytes) -> None:
        try:
            msg = decode_message(data)
        except WireError as exc:
            self.diagnostics.append(f"device {dev.id}: undecodable message: {exc}")
            return
        dev.received[msg.msg_type] += 1
        parent = self.topology.parent[dev.id]
        if isinstance(msg, QueryMessage):
            for child in self._children[dev.id]:
                self.send(dev.id, child, data)
            self._assemble(dev, msg)
        elif isinstance(msg, StringRequest):
            s = resolve_hash(dev.cache, dev.store, msg.hash, self.config.algorithm)
            if s is None:
                for child in self._children[dev.id]:
                    self.send(dev.id, child, data)
            else:
                self._send_string(dev.id, msg.query_id, msg.hash, s)
        elif isinstance(msg, StringResponse):
            self.send(dev.id, parent, data)
        else:
            active = dev.queries.get(msg.query_id)
            if active is None or active.expiry_ms <= self.now:
                self.diagnostics.append(
                    f"device {dev.id}: {msg.msg_type.name} for unknown or expired query {msg.query_id} dropped"
                )
                return
            if isinstance(msg, ResultRowMessage):
                self.send(dev.id, parent, data)
            else:
                agg = active.tree.aggregates.get(msg.op_id)
                if agg is None:
                    self.diagnostics.append(f"device {dev.id}: AGG_ROW for non-aggregate op {msg.op_id} dropped")
                    return
                agg.receive(src, decode_agg_state(msg.state, agg.spec))

    def _send_string(self, origin: int, query_id: int, h: int, s: str) -> None:
        raw = s.encode("utf-8")
        if len(raw) > 0xFFFF:
            self.diagnostics.append(f"device {origin}: string for {h:08x} too long to send")
            return
        step = self.config.mtu - RESPONSE_HEADER_SIZE
        parent = self.topology.parent[origin]
        for off in range(0, max(len(raw), 1), step):
            msg = StringResponse(query_id, h, origin, len(raw), off, raw[off:off + step])
            self.send(origin, parent, encode_message(msg, self.config.mtu))

    def _assemble(self, dev: Device, msg: QueryMessage) -> None:
        if msg.query_id in dev.queries:
            # a fresh query reusing the id replaces the old one
            self.diagnostics.append(f"device {dev.id}: query {msg.query_id} replaced")
            del dev.queries[msg.query_id]
        parts = dev.assembling.setdefault(msg.query_id, [])
        parts.append(msg)
        have = sum(len(m.descriptors) for m in parts)
        if have < msg.total_ops:
            return
        del dev.assembling[msg.query_id]
        try:
            query = join_query(parts)
        except WireError as exc:
            self.diagnostics.append(f"device {dev.id}: query {msg.query_id} rejected: {exc}")
            return
        self.schedule(self.config.processing_delay_ms, self._start, dev, query)

    def _start(self, dev: Device, query: DeviceQuery) -> None:
        parent = self.topology.parent[dev.id]
        qid = query.query_id

        def sink(op_id: int, row: Row) -> None:
            self.send(dev.id, parent, encode_message(row_message(qid, op_id, row), self.config.mtu))

        tree = OperatorTree(
            query.descriptors, dev.store, self.config.algorithm, self.config.join_buffer, sink=sink, data=dev.data
        )
        active = ActiveQuery(query, tree, self.now + query.lifetime_s * 1000.0)
        dev.queries[qid] = active
        self.schedule(query.lifetime_s * 1000.0, self._expire, dev, active)
        tree.run()
        if tree.aggregates:
            self.schedule(self.config.aggregate_interval_ms, self._tick, dev, active)

    def _tick(self, dev: Device, active: ActiveQuery) -> None:
        if dev.queries.get(active.query.query_id) is not active or self.now >= active.expiry_ms:
            return
        parent = self.topology.parent[dev.id]
        for op_id, agg in sorted(active.tree.aggregates.items()):
            if agg.dirty:
                state = agg.subtree_state()
                agg.clear_dirty()
                msg = AggRowMessage(active.query.query_id, op_id, 0, encode_agg_state(state))
                self.send(dev.id, parent, encode_message(msg, self.config.mtu))
        if self.now + self.config.aggregate_interval_ms < active.expiry_ms:
            self.schedule(self.config.aggregate_interval_ms, self._tick, dev, active)

    def _expire(self, dev: Device, active: ActiveQuery) -> None:
        if dev.queries.get(active.query.query_id) is active:
            del dev.queries[active.query.query_id]


def _aggregate_spec(desc) -> tuple:
    return tuple(zip((c.func for c in desc.params.columns), desc.projection.kept_types))


def load_stores(directory: Union[str, Path], topology: Topology) -> dict[int, TupleStore]:
    """Read ``<device_id>.nt`` files from ``directory`` for each device that has one."""
    from .rdf import read_triples

    directory = Path(directory)
    stores = {}
    for d in topology.devices:
        path = directory / f"{d}.nt"
        if path.exists():
            ts = TupleStore()
            ts.extend(read_triples(path))
            stores[d] = ts
    return stores
