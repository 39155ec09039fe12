"""Random end-to-end scenarios: topology, model graph, device data, web data and one query.

Data is generated so that answering a query part inside one device is sound:

* every device holds disjoint copies of the model graph whose node values are
  unique to the copy;
* a value may repeat across copies or devices only at a sink node whose single
  incoming label occurs on exactly one model edge, so any join through such a
  value needs two query edges the model cannot embed and is rejoined at the base;
* web data uses web-namespace predicates only.
"""

from __future__ import annotations

import random
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .endpoint import MockEndpoint, Service, ServiceConfig
from .netsim import BASE, SimConfig, Topology
from .operators import SlotType
from .oracle import BindingSet, equivalent, eval_reference
from .planner import DataModelGraph, ModelEdge
from .rdf import Term, TermKind, Triple, TupleStore, write_triples
from .sparql import parse, term_text

MODEL_NS = "http://model.example/p#"
DATA_NS = "http://devices.example/"
WEB_NS = "http://web.example/vocab#"

QUERY_KINDS = ("single", "join", "filter", "aggregate", "group", "modifiers", "web")


@dataclass
class ScenarioConfig:
    max_devices: int = 5
    max_triples: int = 100
    max_depth: int = 5
    mtu: int = 96
    edge_drop: float = 0.15
    web_subjects: float = 0.6


@dataclass
class Scenario:
    seed: int
    kind: str
    topology: Topology
    model: DataModelGraph
    device_triples: dict[int, list[Triple]]
    web_triples: list[Triple]
    query: str
    config: ScenarioConfig = field(default_factory=ScenarioConfig)

    @property
    def endpoint_url(self) -> str:
        return f"mock:scenario-{self.seed}"

    def dataset(self) -> list[Triple]:
        out = [t for ts in self.device_triples.values() for t in ts]
        return out + list(self.web_triples)

    def stores(self) -> dict[int, TupleStore]:
        out = {}
        for dev, triples in self.device_triples.items():
            ts = TupleStore()
            ts.extend(triples)
            out[dev] = ts
        return out

    def service(self, sim: Optional[SimConfig] = None) -> Service:
        MockEndpoint.register(self.endpoint_url[len("mock:"):], MockEndpoint(self.web_triples))
        cfg = ServiceConfig(mtu=self.config.mtu, seed=self.seed, sim=sim)
        return Service(self.topology, self.stores(), self.model, {WEB_NS: self.endpoint_url}, cfg)

    def expected(self) -> BindingSet:
        return eval_reference(self.dataset(), parse(self.query))

    def write(self, directory: Union[str, Path]) -> Path:
        """Lay the scenario out in the file formats the CLI reads."""
        root = Path(directory)
        (root / "devices").mkdir(parents=True, exist_ok=True)
        (root / "topology.txt").write_text(self.topology.dumps(), encoding="utf-8")
        (root / "model.txt").write_text(self.model.dumps(), encoding="utf-8")
        for dev, triples in self.device_triples.items():
            write_triples(root / "devices" / f"{dev}.nt", triples)
        write_triples(root / "web.nt", self.web_triples)
        (root / "endpoints.txt").write_text(f"{WEB_NS} mock:web.nt\n", encoding="utf-8")
        (root / "query.rq").write_text(self.query, encoding="utf-8")
        return root


@dataclass
class Outcome:
    scenario: Scenario
    expected: BindingSet
    actual: Optional[BindingSet]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        if self.actual is None:
            return False
        if equivalent(self.expected, self.actual):
            return True
        # only averages may differ, and only in the last bits
        return "AVG(" in self.scenario.query and equivalent(self.expected, self.actual, rel_tol=1e-6)


def run_scenario(sc: Scenario) -> Outcome:
    expected = sc.expected()
    svc = sc.service()
    try:
        actual = svc.handle_query(sc.query).result
    except Exception as exc:  # reported, never swallowed: the outcome is a failure
        return Outcome(sc, expected, None, f"{type(exc).__name__}: {exc}")
    finally:
        svc.close()
    return Outcome(sc, expected, actual)


# -- generation ---------------------------------------------------------------------------------


def random_topology(rng: random.Random, n: int, max_depth: int = 5) -> Topology:
    parent: dict[int, int] = {}
    depth = {BASE: 0}
    latency = {}
    for d in range(1, n + 1):
        options = [p for p in [BASE, *parent] if depth[p] < max_depth]
        p = rng.choice(options)
        parent[d] = p
        depth[d] = depth[p] + 1
        latency[d] = float(rng.randint(1, 20))
    return Topology(parent, latency)


@dataclass
class _Sink:
    datatype: Optional[SlotType]
    repeatable: bool


def random_model(rng: random.Random) -> tuple[DataModelGraph, dict[str, _Sink]]:
    k = rng.randint(2, 6)
    nodes = [f"n{i}" for i in range(k)]
    labels = [f"{MODEL_NS}p{i}" for i in range(rng.randint(max(2, k - 1), k + 3))]
    pairs = [(nodes[rng.randrange(i)], nodes[i]) for i in range(1, k)]
    for _ in range(rng.randint(0, 2)):
        a, b = rng.sample(range(k), 2)
        pairs.append((nodes[min(a, b)], nodes[max(a, b)]))
    raw = [(s, rng.choice(labels), t) for s, t in pairs]
    sources = {s for s, _, _ in raw}
    label_uses: dict[str, int] = {}
    for _, p, _ in raw:
        label_uses[p] = label_uses.get(p, 0) + 1
    incoming: dict[str, list[str]] = {}
    for _, p, t in raw:
        incoming.setdefault(t, []).append(p)
    sinks: dict[str, _Sink] = {}
    for n in nodes:
        if n in sources or n not in incoming:
            continue
        ins = incoming[n]
        isolated = len(ins) == 1 and label_uses[ins[0]] == 1
        dtype = rng.choice([SlotType.INTEGER, SlotType.FLOAT, None]) if isolated else None
        sinks[n] = _Sink(dtype, isolated and rng.random() < 0.8)
    edges = [ModelEdge(s, p, t, sinks[t].datatype if t in sinks else None) for s, p, t in raw]
    return DataModelGraph(edges), sinks


def _sink_value(rng: random.Random, sink: _Sink, unique: str) -> Term:
    if sink.datatype is SlotType.INTEGER:
        return Term.integer(rng.randint(-5, 40))
    if sink.datatype is SlotType.FLOAT:
        # quarter steps keep every sum exact in float32 and double
        return Term.float(rng.randint(-32, 96) / 4)
    if not sink.repeatable:
        return rng.choice([Term.iri(DATA_NS + unique), Term.string(unique)])
    k = rng.randint(0, 7)
    return rng.choice(
        [Term.iri(f"{DATA_NS}shared/v{k}"), Term.string(f"s{k}"), Term.string(str(k * 3)), Term.integer(k)]
    )


def random_device_data(
    rng: random.Random, model: DataModelGraph, sinks: dict[str, _Sink], devices: Sequence[int], cfg: ScenarioConfig
) -> dict[int, list[Triple]]:
    out = {}
    per_copy = len(model.edges)
    for dev in devices:
        copies = rng.randint(0, max(1, cfg.max_triples // per_copy))
        triples: list[Triple] = []
        for c in range(copies):
            values: dict[str, Term] = {}
            for n in model.nodes:
                tag = f"d{dev}/c{c}/{n}"
                values[n] = _sink_value(rng, sinks[n], tag) if n in sinks else Term.iri(DATA_NS + tag)
            for e in model.edges:
                if rng.random() < cfg.edge_drop:
                    continue
                triples.append(Triple(values[e.source], Term.iri(e.predicate), values[e.target]))
        out[dev] = list(dict.fromkeys(triples))[: cfg.max_triples]
    return out


def random_web_data(rng: random.Random, device_triples: dict[int, list[Triple]], cfg: ScenarioConfig) -> list[Triple]:
    iris = sorted({t.subject for ts in device_triples.values() for t in ts}, key=lambda t: t.value)
    iris += sorted(
        {t.object for ts in device_triples.values() for t in ts if t.object.kind is TermKind.IRI}, key=lambda t: t.value
    )
    iris = list(dict.fromkeys(iris)) + [Term.iri(f"{DATA_NS}web-only/{i}") for i in range(3)]
    out = []
    for s in iris:
        if rng.random() > cfg.web_subjects:
            continue
        for w in range(2):
            if rng.random() < 0.6:
                obj = rng.choice([Term.string(f"label {rng.randint(0, 9)}"), Term.integer(rng.randint(0, 20))])
                out.append(Triple(s, Term.iri(f"{WEB_NS}w{w}"), obj))
    return out


# -- queries ------------------------------------------------------------------------------------


class _QueryBuilder:
    def __init__(self, rng: random.Random, model: DataModelGraph, sinks: dict[str, _Sink], data: list[Triple]):
        self.rng = rng
        self.model = model
        self.sinks = sinks
        self.data = data
        self.by_pred: dict[str, list[Triple]] = {}
        for t in data:
            self.by_pred.setdefault(t.predicate.value, []).append(t)

    def _values(self, edge: ModelEdge, position: int) -> list[Term]:
        return [t.subject if position == 0 else t.object for t in self.by_pred.get(edge.predicate, [])]

    def patterns(
        self, size: int, prefer_numeric: bool = False
    ) -> tuple[list[tuple[str, str, str]], dict[str, Optional[SlotType]]]:
        """A connected walk over model edges with fresh variables per model node."""
        rng = self.rng
        edges = self.model.edges
        numeric = [e for e in edges if e.datatype is not None]
        chosen = [rng.choice(numeric if numeric and prefer_numeric and rng.random() < 0.8 else edges)]
        while len(chosen) < size:
            touched = {e.source for e in chosen} | {e.target for e in chosen}
            options = [e for e in edges if (e.source in touched or e.target in touched)]
            if rng.random() < 0.15:
                options = edges  # occasionally a shape the model cannot embed
            chosen.append(rng.choice(options))
        if size >= 2 and rng.random() < 0.15:
            # duplicate an edge into a shared sink: joins across copies and devices
            shared = [e for e in chosen if e.target in self.sinks and self.sinks[e.target].repeatable]
            if shared:
                e = rng.choice(shared)
                chosen[-1] = ModelEdge(e.source + "x", e.predicate, e.target, e.datatype)
        types: dict[str, Optional[SlotType]] = {}
        pats = []
        for e in chosen:
            for n in (e.source, e.target):
                types.setdefault(n, None)
            if e.target in self.sinks:
                types[e.target] = self.sinks[e.target].datatype
            subj, obj = f"?{e.source}", f"?{e.target}"
            if rng.random() < 0.2:
                vals = self._values(e, 2)
                if vals:
                    obj = term_text(rng.choice(vals))
            elif rng.random() < 0.1:
                vals = self._values(e, 0)
                if vals:
                    subj = term_text(rng.choice(vals))
            pats.append((subj, f"<{e.predicate}>", obj))
        used = {x[1:] for p in pats for x in (p[0], p[2]) if x.startswith("?")}
        return pats, {v: t for v, t in types.items() if v in used}

    def where(self, pats) -> str:
        return "\n".join(f"  {s} {p} {o} ." for s, p, o in pats)

    def constant_for(self, var: str, pats) -> Optional[Term]:
        vals = []
        for s, p, o in pats:
            iri = p[1:-1]
            for t in self.by_pred.get(iri, []):
                if s == f"?{var}":
                    vals.append(t.subject)
                if o == f"?{var}":
                    vals.append(t.object)
        return self.rng.choice(vals) if vals else None

    def filter(self, pats, types) -> Optional[str]:
        rng = self.rng
        if not types:
            return None
        var = rng.choice(sorted(types))
        op = rng.choice(["<", "<=", "=", "!=", ">=", ">"])
        if rng.random() < 0.2 and len(types) > 1:
            other = rng.choice([v for v in sorted(types) if v != var])
            return f"FILTER (?{var} {op} ?{other})"
        c = self.constant_for(var, pats)
        if c is None:
            c = Term.integer(rng.randint(0, 20))
        if c.is_numeric and rng.random() < 0.15:
            c = Term.string(c.lexical)  # quoted number, compared by value
        elif rng.random() < 0.1:
            c = Term.float(rng.randint(-8, 40) / 2)
        lhs, rhs = f"?{var}", term_text(c)
        if rng.random() < 0.3:
            lhs, rhs = rhs, lhs
        return f"FILTER ({lhs} {op} {rhs})"

    def numeric_var(self, types) -> Optional[str]:
        nums = sorted(v for v, t in types.items() if t in (SlotType.INTEGER, SlotType.FLOAT))
        if nums and self.rng.random() < 0.95:
            return self.rng.choice(nums)
        return self.rng.choice(sorted(types)) if types else None

    def aggregates(self, types, n: int) -> list[str]:
        out = []
        for i in range(n):
            func = self.rng.choice(["COUNT", "SUM", "MIN", "MAX", "AVG"])
            var = self.numeric_var(types)
            if func == "COUNT" and (var is None or self.rng.random() < 0.5):
                out.append(f"(COUNT(*) AS ?a{i})")
            elif var is not None:
                out.append(f"({func}(?{var}) AS ?a{i})")
            else:
                out.append(f"(COUNT(*) AS ?a{i})")
        return out


def random_query(rng: random.Random, kind: str, b: _QueryBuilder, web_data: list[Triple]) -> str:
    size = 1 if kind == "single" else rng.randint(2, 4) if kind == "join" else rng.randint(1, 3)
    pats, types = b.patterns(size, prefer_numeric=kind in ("aggregate", "group"))
    variables = sorted(types)
    head, tail = "", ""
    filters = []
    if kind == "filter" or (kind in ("aggregate", "group", "modifiers") and rng.random() < 0.3):
        f = b.filter(pats, types)
        if f:
            filters.append(f)
    if kind == "web":
        candidates = [v for v in variables if types[v] is None]
        if candidates:
            v = rng.choice(candidates)
            pats.append((f"?{v}", f"<{WEB_NS}w{rng.randint(0, 1)}>", "?web"))
            variables.append("web")
        else:
            pats = [("?thing", f"<{WEB_NS}w0>", "?web")]
            variables = ["thing", "web"]
    if kind == "aggregate":
        head = " ".join(b.aggregates(types, rng.randint(1, 3)))
    elif kind == "group":
        g = rng.choice(variables)
        head = f"?{g} " + " ".join(b.aggregates(types, rng.randint(1, 2)))
        tail = f"GROUP BY ?{g}"
        if rng.random() < 0.3:
            tail += "\nHAVING (COUNT(*) > 1)"
        if rng.random() < 0.5:
            tail += f"\nORDER BY DESC(?a0) ?{g}"
    elif kind == "modifiers":
        proj = rng.sample(variables, rng.randint(1, len(variables)))
        distinct = "DISTINCT " if rng.random() < 0.5 else ""
        head = distinct + " ".join(f"?{v}" for v in proj)
        if rng.random() < 0.7:
            keys = rng.sample(variables, rng.randint(1, min(2, len(variables))))
            tail = "ORDER BY " + " ".join(f"DESC(?{k})" if rng.random() < 0.4 else f"?{k}" for k in keys)
        if rng.random() < 0.7:
            tail += f"\nLIMIT {rng.randint(1, 10)}"
            if rng.random() < 0.4:
                tail += f"\nOFFSET {rng.randint(0, 5)}"
    else:
        proj = variables if rng.random() < 0.6 else rng.sample(variables, rng.randint(1, len(variables)))
        head = " ".join(f"?{v}" for v in proj)
    body = b.where(pats) + "".join(f"\n  {f}" for f in filters)
    return f"SELECT {head} WHERE {{\n{body}\n}}\n{tail}".rstrip() + "\n"


def generate(seed: int, kind: Optional[str] = None, cfg: Optional[ScenarioConfig] = None) -> Scenario:
    cfg = cfg or ScenarioConfig()
    rng = random.Random(seed)
    kind = kind or QUERY_KINDS[seed % len(QUERY_KINDS)]
    n = rng.randint(1, cfg.max_devices)
    topology = random_topology(rng, n, cfg.max_depth)
    model, sinks = random_model(rng)
    device_triples = random_device_data(rng, model, sinks, topology.devices, cfg)
    web = random_web_data(rng, device_triples, cfg)
    builder = _QueryBuilder(rng, model, sinks, [t for ts in device_triples.values() for t in ts])
    query = random_query(rng, kind, builder, web)
    return Scenario(seed, kind, topology, model, device_triples, web, query, cfg)
