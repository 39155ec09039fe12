"""The base-station service: planning, dispatch, hash resolution, assembly, SPARQL over HTTP."""

from __future__ import annotations

import enum
import json
import logging
import math
import socket
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Union

from .hashing import hash_string
from .netsim import BASE, SimConfig, Simulator, Topology, TraceRecord
from .operators import AggregateState, OperatorError, SlotType
from .planner import DataModelGraph, PlanningError, QueryPlan, Unanswerable, classify
from .rdf import Term, TermKind, Triple, TupleStore, float32_text, numeric_from_text, parse_token, read_triples
from .sparql import (
    XSD,
    AggregateExpr,
    Comparison,
    ParsedQuery,
    SparqlSyntaxError,
    UnsupportedConstruct,
    Variable,
    parse,
)
from .oracle import BindingSet
from .wire import MsgType, TooManyOperators, WireError

log = logging.getLogger(__name__)

UNRESOLVED_PREFIX = "urn:unresolved-hash:"
DEFAULT_TIMEOUT_S = 5.0


class EndpointError(Exception):
    status = 500


class UpstreamTimeout(EndpointError):
    status = 504


class SchemaMismatch(EndpointError):
    status = 500


class Origin(enum.Enum):
    DEVICE_NETWORK = "device"
    WEB = "web"
    LOCAL_STORE = "local"


Value = Optional[Term]


@dataclass
class PartialResult:
    origin: Origin
    variables: tuple[str, ...]
    rows: list[tuple[Value, ...]] = field(default_factory=list)


# result container shared with the reference evaluator (data only, no semantics)
ResultSet = BindingSet


# -- SPARQL JSON results ---------------------------------------------------------------------


def term_to_json(t: Term) -> dict:
    if t.kind is TermKind.IRI:
        return {"type": "uri", "value": t.value}
    if t.kind is TermKind.STRING_LITERAL:
        return {"type": "literal", "value": t.value}
    if t.kind is TermKind.INTEGER_LITERAL:
        return {"type": "literal", "value": str(t.value), "datatype": XSD + "integer"}
    return {"type": "literal", "value": float32_text(t.value), "datatype": XSD + "float"}


_INT_TYPES = {XSD + x for x in ("integer", "int", "long", "short", "byte", "nonNegativeInteger")}
_FLOAT_TYPES = {XSD + x for x in ("float", "double", "decimal")}


def term_from_json(b: Mapping) -> Term:
    kind = b.get("type")
    value = b.get("value", "")
    if kind == "uri":
        return Term.iri(value)
    if kind == "bnode":
        return Term.iri("_:" + value)
    dtype = b.get("datatype")
    if dtype in _INT_TYPES:
        try:
            return Term.integer(int(value))
        except ValueError:
            pass
    if dtype in _FLOAT_TYPES:
        try:
            return Term.float(float(value.replace("INF", "inf")))
        except ValueError:
            pass
    return Term.string(value)


def to_sparql_json(result: ResultSet) -> dict:
    bindings = [
        {v: term_to_json(t) for v, t in zip(result.variables, row) if t is not None} for row in result.rows
    ]
    return {"head": {"vars": list(result.variables)}, "results": {"bindings": bindings}}


def from_sparql_json(doc: Mapping) -> ResultSet:
    variables = tuple(doc["head"]["vars"])
    rows = []
    for b in doc["results"]["bindings"]:
        rows.append(tuple(term_from_json(b[v]) if v in b else None for v in variables))
    return ResultSet(variables, rows)


# -- web side -----------------------------------------------------------------------------------


class MockEndpoint:
    """In-process SPARQL endpoint answering basic graph patterns over a tuple store."""

    registry: dict[str, "MockEndpoint"] = {}

    def __init__(self, triples: Iterable[Triple] = (), latency_s: float = 0.0):
        self.store = TupleStore()
        self.store.extend(triples)
        self.latency_s = latency_s
        self.received: list[str] = []
        self._lock = threading.Lock()

    @classmethod
    def register(cls, name: str, endpoint: "MockEndpoint") -> str:
        cls.registry[name] = endpoint
        return f"mock:{name}"

    @classmethod
    def resolve(cls, url: str) -> "MockEndpoint":
        name = url[len("mock:"):]
        ep = cls.registry.get(name)
        if ep is None:
            path = Path(name)
            if not path.exists():
                raise EndpointError(f"no mock endpoint named {name!r}")
            ep = cls.registry[name] = MockEndpoint(read_triples(path))
        return ep

    def triples(self) -> list[Triple]:
        return list(self.store.triples())

    def query(self, text: str) -> dict:
        with self._lock:
            self.received.append(text)
        if self.latency_s:
            time.sleep(self.latency_s)
        pq = parse(text)
        if pq.filters or pq.is_aggregate or pq.order_by or pq.distinct or pq.limit is not None:
            raise UnsupportedConstruct("the mock endpoint answers plain basic graph patterns only")
        variables = tuple(v.name for v in pq.projection)
        rows = [tuple(sol.get(v) for v in variables) for sol in self._match(pq)]
        return to_sparql_json(ResultSet(variables, rows))

    def _match(self, pq: ParsedQuery) -> list[dict[str, Term]]:
        ts = self.store
        solutions: list[dict[str, Term]] = [{}]
        for pattern in pq.patterns:
            nxt = []
            for sol in solutions:
                mask = []
                for t in pattern:
                    if isinstance(t, Variable):
                        t = sol.get(t.name)
                    if t is None:
                        mask.append(None)
                        continue
                    key = ts.key_of(t)
                    if key is None:
                        break
                    mask.append(key)
                else:
                    for keys in ts.scan(tuple(mask)):
                        ext = dict(sol)
                        ok = True
                        for t, k in zip(pattern, keys):
                            if isinstance(t, Variable):
                                term = ts.term(k)
                                if ext.setdefault(t.name, term) != term:
                                    ok = False
                                    break
                        if ok:
                            nxt.append(ext)
            solutions = nxt
        return solutions


class FederationClient:
    """SPARQL protocol client: query as a form parameter, JSON results back."""

    def __init__(self, url: str, timeout_s: float = DEFAULT_TIMEOUT_S, retries: int = 1):
        self.url = url
        self.timeout_s = timeout_s
        self.retries = retries

    def select(self, text: str) -> ResultSet:
        if self.url.startswith("mock:"):
            return from_sparql_json(MockEndpoint.resolve(self.url).query(text))
        data = urllib.parse.urlencode({"query": text}).encode()
        last: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(
                self.url,
                data=data,
                headers={
                    "Accept": "application/sparql-results+json",
                    "Content-Type": "application/x-www-form-urlencoded",
                },
            )
            try:
                with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                    return from_sparql_json(json.loads(resp.read().decode("utf-8")))
            except (socket.timeout, TimeoutError) as exc:
                last = exc
            except urllib.error.URLError as exc:
                if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                    last = exc
                else:
                    raise EndpointError(f"{self.url}: {exc.reason}") from None
            log.info("retrying %s after timeout (attempt %d)", self.url, attempt + 1)
        raise UpstreamTimeout(f"{self.url} did not answer within {self.timeout_s}s") from last


# -- base-station relational engine ---------------------------------------------------------
#
# Filter, grouping and ordering semantics for the supported subset:
#   = and != between numbers compare values, otherwise term identity;
#   quoted numeric text next to a number is read as that number;
#   < <= >= > compare numbers by value and strings lexically, and are false otherwise;
#   aggregates skip non-numeric input; ordering puts IRIs before numbers before strings.


def _numeric_pair(a: Term, b: Term) -> Optional[tuple[float, float]]:
    if a.kind is TermKind.STRING_LITERAL and b.is_numeric:
        a = numeric_from_text(a.value) or a
    elif b.kind is TermKind.STRING_LITERAL and a.is_numeric:
        b = numeric_from_text(b.value) or b
    if a.is_numeric and b.is_numeric:
        return float(a.value), float(b.value)
    return None


def _holds(a: Value, op: str, b: Value) -> bool:
    if a is None or b is None:
        return False
    nums = _numeric_pair(a, b)
    if nums is not None:
        x, y = nums
    elif op in ("=", "!="):
        return (a == b) == (op == "=")
    elif a.kind is TermKind.STRING_LITERAL and b.kind is TermKind.STRING_LITERAL:
        x, y = a.value, b.value
    else:
        return False
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == "=":
        return x == y
    if op == "!=":
        return x != y
    if op == ">=":
        return x >= y
    return x > y


def _order_key(t: Value) -> tuple:
    if t is None:
        return (0,)
    if t.kind is TermKind.IRI:
        return (1, t.value)
    if t.is_numeric:
        v = float(t.value)
        return (2, math.inf, 1, 0) if v != v else (2, v, int(t.kind is TermKind.FLOAT_LITERAL), 0)
    return (3, t.value)


class _Reverse:
    __slots__ = ("key",)

    def __init__(self, key):
        self.key = key

    def __lt__(self, other):
        return other.key < self.key

    def __eq__(self, other):
        return self.key == other.key


def _aggregate(func: str, values: list[Term]) -> Value:
    if func == "COUNT":
        return Term.integer(len(values))
    nums = [v for v in values if v.is_numeric]
    if func == "MIN" or func == "MAX":
        best = None
        for v in nums:
            if best is None:
                best = v
                continue
            x, y = float(v.value), float(best.value)
            better = x < y if func == "MIN" else x > y
            # equal values: the integer form wins
            if better or (x == y and v.kind is TermKind.INTEGER_LITERAL and best.kind is TermKind.FLOAT_LITERAL):
                best = v
        return best
    if not nums:
        return Term.integer(0)
    if all(v.kind is TermKind.INTEGER_LITERAL for v in nums):
        total: Union[int, float] = sum(v.value for v in nums)
        return Term.integer(total) if func == "SUM" else Term.float(total / len(nums))
    total = math.fsum(float(v.value) for v in nums)
    return Term.float(total if func == "SUM" else total / len(nums))


def hash_join(left: PartialResult, right: PartialResult) -> PartialResult:
    shared = [v for v in left.variables if v in right.variables]
    variables = left.variables + tuple(v for v in right.variables if v not in shared)
    li = [left.variables.index(v) for v in shared]
    ri = [right.variables.index(v) for v in shared]
    rest = [k for k, v in enumerate(right.variables) if v not in shared]
    index: dict[tuple, list[tuple]] = {}
    for row in right.rows:
        index.setdefault(tuple(row[k] for k in ri), []).append(row)
    rows = []
    for row in left.rows:
        for match in index.get(tuple(row[k] for k in li), ()):
            rows.append(row + tuple(match[k] for k in rest))
    return PartialResult(Origin.LOCAL_STORE, variables, rows)


def assemble(partials: Sequence[PartialResult], plan: QueryPlan) -> ResultSet:
    """Join the partial results at the split points and apply the final operations."""
    pq = plan.query
    for v in plan.split_points:
        holders = [p for p in partials if v in p.variables]
        if len(holders) < 2 and len(partials) > 1:
            raise SchemaMismatch(f"split variable ?{v} is missing from a partial result")
    if plan.aggregate is not None:
        if len(partials) != 1:
            raise SchemaMismatch("a pushed aggregate yields exactly one partial result")
        p = partials[0]
        rows = [dict(zip(p.variables, r)) for r in p.rows]
        for r in rows:
            for item in pq.aggregates:
                r[str(item.aggregate)] = r[item.var.name]
        return _finalize(pq, _having(pq, rows))
    pending = list(partials)
    acc = pending.pop(0) if pending else PartialResult(Origin.LOCAL_STORE, (), [()])
    while pending:
        # prefer a partner sharing a variable, to avoid needless cross products
        k = next((i for i, p in enumerate(pending) if set(p.variables) & set(acc.variables)), 0)
        acc = hash_join(acc, pending.pop(k))
    solutions = [dict(zip(acc.variables, r)) for r in acc.rows]
    for c in plan.base_filters:
        solutions = [s for s in solutions if _holds(_value(c.lhs, s), c.op, _value(c.rhs, s))]
    if pq.is_aggregate:
        solutions = _having(pq, _group(pq, solutions))
    return _finalize(pq, solutions)


def _value(x, row: Mapping[str, Value]) -> Value:
    if isinstance(x, Variable):
        return row.get(x.name)
    if isinstance(x, AggregateExpr):
        return row.get(str(x))
    return x


def _group(pq: ParsedQuery, solutions: list[dict]) -> list[dict]:
    keys = [v.name for v in pq.group_by]
    groups: dict[tuple, list[dict]] = {}
    if not keys:
        groups[()] = solutions
    for s in solutions if keys else ():
        groups.setdefault(tuple(s[k] for k in keys), []).append(s)
    exprs = [i.aggregate for i in pq.aggregates]
    exprs += [x for c in pq.having for x in (c.lhs, c.rhs) if isinstance(x, AggregateExpr)]
    out = []
    for key, members in groups.items():
        row = dict(zip(keys, key))
        for e in exprs:
            vals = [m[e.arg.name] for m in members] if e.arg is not None else [Term.integer(1)] * len(members)
            row[str(e)] = _aggregate(e.func, [v for v in vals if v is not None])
        for item in pq.aggregates:
            row[item.var.name] = row[str(item.aggregate)]
        out.append(row)
    return out


def _having(pq: ParsedQuery, rows: list[dict]) -> list[dict]:
    for c in pq.having:
        rows = [r for r in rows if _holds(_value(c.lhs, r), c.op, _value(c.rhs, r))]
    return rows


def _finalize(pq: ParsedQuery, rows: list[dict]) -> ResultSet:
    names = tuple(v.name for v in pq.projection)
    table = [(tuple(r.get(n) for n in names), r) for r in rows]
    canon = lambda values: tuple(_order_key(t) for t in values)  # noqa: E731
    if pq.order_by:
        def key(item):
            values, r = item
            parts = []
            for k in pq.order_by:
                ok = _order_key(r.get(k.var.name))
                parts.append(_Reverse(ok) if k.descending else ok)
            return tuple(parts), canon(values)
        table.sort(key=key)
    elif pq.limit is not None or pq.offset is not None:
        table.sort(key=lambda item: canon(item[0]))
    out = [values for values, _ in table]
    if pq.distinct:
        seen, unique = set(), []
        for values in out:
            if values not in seen:
                seen.add(values)
                unique.append(values)
        out = unique
    lo = pq.offset or 0
    hi = None if pq.limit is None else lo + pq.limit
    return ResultSet(names, out[lo:hi], ordered=bool(pq.order_by))


# -- hash resolution ---------------------------------------------------------------------------


def unresolved_marker(h: int) -> Term:
    return Term.iri(f"{UNRESOLVED_PREFIX}{h:08x}")


def resolve_result_hashes(
    hashes: Iterable[int], sim: Simulator, cache: dict[int, str], query_id: int = 0
) -> tuple[dict[int, Term], int]:
    """Map hashes to terms, asking the network once per distinct uncached hash.

    Returns the mapping and the number of string requests issued.
    """
    distinct = list(dict.fromkeys(hashes))
    missing = [h for h in distinct if h not in cache]
    if missing:
        for h, s in sim.resolve_strings(missing, query_id).items():
            if s is not None:
                cache[h] = s
    out = {}
    for h in distinct:
        s = cache.get(h)
        out[h] = unresolved_marker(h) if s is None else parse_token(s)
    return out, len(missing)


# -- service ------------------------------------------------------------------------------------


@dataclass
class ServiceConfig:
    mtu: int = 96
    seed: int = 0
    lifetime_s: int = 60
    timeout_s: float = DEFAULT_TIMEOUT_S
    retries: int = 1
    sim: Optional[SimConfig] = None


@dataclass
class QueryStats:
    query_id: Optional[int] = None
    plan: Optional[QueryPlan] = None
    trace: list[TraceRecord] = field(default_factory=list)
    string_requests: int = 0
    distinct_hashes: int = 0  # STRING_HASH values in the device rows that reached the base
    first_result_ms: Optional[float] = None
    web_requests: list[tuple[str, str]] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def messages(self) -> int:
        return len(self.trace)

    @property
    def bytes_total(self) -> int:
        return sum(r.size for r in self.trace)

    @property
    def bytes_to_base(self) -> int:
        return sum(r.size for r in self.trace if r.dst == BASE)

    def count(self, msg_type: MsgType) -> int:
        return sum(1 for r in self.trace if r.msg_type is msg_type)


@dataclass
class QueryResult:
    result: ResultSet
    stats: QueryStats

    def json(self) -> dict:
        return to_sparql_json(self.result)


class Service:
    """One base station: a simulated device network plus configured external endpoints."""

    def __init__(
        self,
        topology: Topology,
        stores: Mapping[int, TupleStore],
        model: DataModelGraph,
        endpoints: Optional[Mapping[str, str]] = None,
        config: Optional[ServiceConfig] = None,
    ):
        self.config = config or ServiceConfig()
        sim_config = self.config.sim or SimConfig(mtu=self.config.mtu, seed=self.config.seed)
        self.sim = Simulator(topology, dict(stores), sim_config)
        self.model = model
        self.endpoints = dict(endpoints or {})
        self.cache: dict[int, str] = {}
        self._sim_lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=4, thread_name_prefix="web")

    @property
    def algorithm(self):
        return self.sim.config.algorithm

    def device_triples(self) -> list[Triple]:
        out = []
        for dev in self.sim.devices.values():
            out.extend(dev.store.triples())
        return out

    def web_triples(self) -> list[Triple]:
        out = []
        for url in dict.fromkeys(self.endpoints.values()):
            if url.startswith("mock:"):
                out.extend(MockEndpoint.resolve(url).triples())
        return out

    def plan(self, text_or_query: Union[str, ParsedQuery], query_id: int = 1) -> QueryPlan:
        pq = parse(text_or_query) if isinstance(text_or_query, str) else text_or_query
        return classify(pq, self.model, self.endpoints, query_id, self.config.lifetime_s, self.algorithm, self.sim.config.mtu)

    def handle_query(self, text: Union[str, ParsedQuery]) -> QueryResult:
        pq = parse(text) if isinstance(text, str) else text
        stats = QueryStats()
        with self._sim_lock:
            qid = self.sim.free_query_id()
            plan = self.plan(pq, qid)
            stats.plan = plan
            futures = []
            for part in plan.web_parts:
                client = FederationClient(part.endpoint, self.config.timeout_s, self.config.retries)
                stats.web_requests.append((part.endpoint, part.text))
                futures.append((part, self._pool.submit(client.select, part.text)))
            for t in _constants(pq):
                self.cache.setdefault(hash_string(t.token(), self.algorithm), t.token())
            partials: list[PartialResult] = []
            start = len(self.sim.trace)
            diag_start = len(self.sim.diagnostics)
            if plan.device_query is not None:
                stats.query_id = qid
                self.sim.submit(plan.device_query)
                try:
                    self.sim.run()
                    if plan.aggregate is None and not self.sim.complete(qid):
                        raise UpstreamTimeout("the device network did not deliver every end marker")
                    stats.first_result_ms = self.sim.first_result_latency(qid)
                    raw = self._device_rows(plan, qid)
                finally:
                    self.sim.release(qid)
            web_results = []
            for part, fut in futures:
                try:
                    res = fut.result(timeout=self.config.timeout_s * (self.config.retries + 1) + 1)
                except FutureTimeout:  # distinct from the builtin before Python 3.11
                    raise UpstreamTimeout(f"{part.endpoint} timed out") from None
                if res.variables != part.variables:
                    res = _reorder(res, part.variables)
                for row in res.rows:
                    for t in row:
                        if t is not None:
                            self.cache.setdefault(hash_string(t.token(), self.algorithm), t.token())
                web_results.append(PartialResult(Origin.WEB, part.variables, res.rows))
            if plan.device_query is not None:
                hashes = [v for _, types, rows in raw for row in rows for t, v in zip(types or (), row) if t is SlotType.STRING_HASH]
                stats.distinct_hashes = len(set(hashes))
                terms, stats.string_requests = resolve_result_hashes(hashes, self.sim, self.cache, qid)
                for variables, types, rows in raw:
                    decoded = [tuple(_decode(t, v, terms) for t, v in zip(types or [None] * len(row), row)) for row in rows]
                    partials.append(PartialResult(Origin.DEVICE_NETWORK, variables, decoded))
            partials.extend(web_results)
            stats.trace = self.sim.trace[start:]
            stats.diagnostics = self.sim.diagnostics[diag_start:]
        result = assemble(partials, plan)
        return QueryResult(result, stats)

    def _device_rows(self, plan: QueryPlan, qid: int):
        """Raw (variables, column types, value rows) per device component."""
        if plan.aggregate is not None:
            state: AggregateState = self.sim.aggregate_state(qid, plan.aggregate.root_id)
            values = state.emit()
            row = tuple(values)
            return [(plan.aggregate.aliases, None, [row])]
        collected = self.sim.collected(qid)
        out = []
        for comp in plan.components:
            rows = [r.values for op_id, r in collected if op_id == comp.root_id]
            out.append((comp.columns, comp.types, rows))
        return out

    def close(self) -> None:
        self._pool.shutdown(wait=False)


def _decode(t: Optional[SlotType], v, terms: Mapping[int, Term]) -> Value:
    if t is None:
        return v  # already a term (aggregate emission)
    if t is SlotType.INTEGER:
        return Term.integer(v)
    if t is SlotType.FLOAT:
        return Term.float(v)
    return terms[v]


def _reorder(res: ResultSet, variables: Sequence[str]) -> ResultSet:
    idx = [res.variables.index(v) if v in res.variables else None for v in variables]
    rows = [tuple(None if i is None else row[i] for i in idx) for row in res.rows]
    return ResultSet(tuple(variables), rows)


def _constants(pq: ParsedQuery) -> list[Term]:
    out = []
    for p in pq.patterns:
        out.extend(t for t in p if isinstance(t, Term))
    for c in (*pq.filters, *pq.having):
        out.extend(x for x in (c.lhs, c.rhs) if isinstance(x, Term))
    return out


# -- HTTP ---------------------------------------------------------------------------------------


def error_status(exc: Exception) -> int:
    if isinstance(exc, UnsupportedConstruct):
        return 501
    if isinstance(exc, SparqlSyntaxError):
        return 400
    if isinstance(exc, (Unanswerable, PlanningError, TooManyOperators, OperatorError)):
        return 422
    if isinstance(exc, UpstreamTimeout):
        return 504
    return 500


def error_document(exc: Exception) -> dict:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SparqlSyntaxError) and exc.line:
        doc["line"], doc["column"] = exc.line, exc.column
    return doc


def make_handler(service: Service):
    class Handler(BaseHTTPRequestHandler):
        server_version = "sparql-base/0.1"

        def log_message(self, fmt, *args):  # route through logging
            log.info("%s - %s", self.address_string(), fmt % args)

        def _reply(self, status: int, doc: dict, content_type: str) -> None:
            body = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _answer(self, text: Optional[str]) -> None:
            if not text:
                self._reply(400, {"error": "MissingQuery", "message": "no query parameter"}, "application/json")
                return
            try:
                result = service.handle_query(text)
            except Exception as exc:  # every failure becomes a protocol error response
                status = error_status(exc)
                if status == 500:
                    log.exception("query failed")
                self._reply(status, error_document(exc), "application/json")
                return
            self._reply(200, result.json(), "application/sparql-results+json")

        def do_GET(self) -> None:
            qs = urllib.parse.parse_qs(urllib.parse.urlparse(self.path).query)
            self._answer(qs.get("query", [None])[0])

        def do_POST(self) -> None:
            n = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(n).decode("utf-8")
            ctype = (self.headers.get("Content-Type") or "").split(";")[0].strip()
            if ctype == "application/sparql-query":
                self._answer(body)
            else:
                self._answer(urllib.parse.parse_qs(body).get("query", [None])[0])

    return Handler


def make_server(service: Service, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_handler(service))
    server.daemon_threads = True
    return server
