"""Measurement harnesses shared by the acceptance suite and scripts/."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
import numpy as np

from .endpoint import Service, ServiceConfig
from .hashing import HashAlgorithm, birthday_expectation, collision_report, synthetic_corpus
from .netsim import BASE, SimConfig, Simulator, Topology
from .operators import SlotType
from .oracle import BindingSet, equivalent, eval_reference
from .planner import DataModelGraph, compile_device_query
from .rdf import Term, Triple, TupleStore
from .scenarios import generate, run_scenario
from .sparql import ParsedQuery, TriplePattern, Variable, parse
from .wire import MsgType

NS = "http://example.org/econ#"


# -- scenario sweep ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    total: int
    failures: list[tuple[int, str]] = field(default_factory=list)
    seconds: float = 0.0
    kinds: dict[str, int] = field(default_factory=dict)


def scenario_sweep(n: int = 500, start: int = 0) -> SweepResult:
    res = SweepResult(n)
    t0 = time.perf_counter()
    for seed in range(start, start + n):
        out = run_scenario(generate(seed))
        res.kinds[out.scenario.kind] = res.kinds.get(out.scenario.kind, 0) + 1
        if not out.ok:
            res.failures.append((seed, out.error or "result differs from the reference"))
    res.seconds = time.perf_counter() - t0
    return res


# -- hash study -------------------------------------------------------------------------------


def hash_study(n: int = 100_000, seed: int = 0):
    corpus = synthetic_corpus(n, seed)
    return {alg: collision_report(alg, corpus) for alg in HashAlgorithm}, birthday_expectation(len(corpus))


# -- communication economy --------------------------------------------------------------------

ECON_TOPOLOGY = {1: BASE, 2: 1, 3: 1, 4: 2, 5: 3}


def economy_model() -> DataModelGraph:
    m = DataModelGraph()
    m.add("cond", NS + "hasSeverity", "sev")
    m.add("cond", NS + "hasReading", "value", SlotType.INTEGER)
    m.add("cond", NS + "hasLabel", "label")
    return m


def economy_stores(matching: int, total: int = 500, devices: int = 5, seed: int = 0) -> dict[int, TupleStore]:
    """``total`` triples spread evenly; exactly ``matching`` are ``?c hasSeverity Critical``."""
    rng = random.Random(seed)
    triples = []
    for i in range(matching):
        triples.append(Triple(Term.iri(f"{NS}cond{i}"), Term.iri(NS + "hasSeverity"), Term.iri(NS + "Critical")))
    i = matching
    while len(triples) < total:
        c = Term.iri(f"{NS}cond{i}")
        pick = len(triples) % 3
        if pick == 0:
            triples.append(Triple(c, Term.iri(NS + "hasSeverity"), Term.iri(NS + "Normal")))
        elif pick == 1:
            triples.append(Triple(c, Term.iri(NS + "hasReading"), Term.integer(rng.randint(0, 500))))
        else:
            triples.append(Triple(c, Term.iri(NS + "hasLabel"), Term.string(f"reading {i}")))
        i += 1
    rng.shuffle(triples)
    stores = {d: TupleStore() for d in range(1, devices + 1)}
    for k, t in enumerate(triples):
        stores[k % devices + 1].insert(t)
    return stores


SELECTIVE = f"SELECT ?c WHERE {{ ?c <{NS}hasSeverity> <{NS}Critical> }}"
COUNT = f"SELECT (COUNT(*) AS ?n) WHERE {{ ?c <{NS}hasSeverity> <{NS}Critical> }}"


@dataclass
class Traffic:
    row_bytes: int
    string_bytes: int

    @property
    def total(self) -> int:
        return self.row_bytes + self.string_bytes


def _into_base(trace) -> Traffic:
    rows = sum(r.size for r in trace if r.dst == BASE and r.msg_type is not MsgType.STRING_RESP)
    strings = sum(r.size for r in trace if r.dst == BASE and r.msg_type is MsgType.STRING_RESP)
    return Traffic(rows, strings)


def ship_all_baseline(stores: dict[int, TupleStore], mtu: int = 96) -> Traffic:
    """Degenerate plan: one unconstrained GPS plus COLLECT, then resolve every hash received."""
    pq = ParsedQuery(select_all=True, patterns=(TriplePattern(Variable("s"), Variable("p"), Variable("o")),))
    dq, comps, _, _ = compile_device_query(pq, [[0]], needed={"s", "p", "o"}, mtu=mtu)
    sim = Simulator(Topology(dict(ECON_TOPOLOGY), {}), stores, SimConfig(mtu=mtu))
    sim.submit(dq)
    sim.run()
    hashes = {v for _, row in sim.collected(dq.query_id) for v in row.values}
    sim.resolve_strings(sorted(hashes))
    return _into_base(sim.trace)


def selective_traffic(stores: dict[int, TupleStore], query: str = SELECTIVE, mtu: int = 96):
    svc = Service(Topology(dict(ECON_TOPOLOGY), {}), stores, economy_model(), config=ServiceConfig(mtu=mtu))
    try:
        out = svc.handle_query(query)
        return _into_base(out.stats.trace), out
    finally:
        svc.close()


def count_link_bytes(matching: int, mtu: int = 96):
    """Bytes both ways over the single BASE link for the pushed COUNT, plus the query outcome."""
    stores = economy_stores(matching)
    svc = Service(Topology(dict(ECON_TOPOLOGY), {}), stores, economy_model(), config=ServiceConfig(mtu=mtu))
    try:
        out = svc.handle_query(COUNT)
    finally:
        svc.close()
    link = [r for r in out.stats.trace if BASE in (r.src, r.dst)]
    agg = [r for r in link if r.msg_type is MsgType.AGG_ROW]
    return sum(r.size for r in link), agg, out


# -- latency vs depth -------------------------------------------------------------------------


def latency_by_depth(depths=range(1, 6), latency_ms: float = 10.0, rows: int = 3) -> list[tuple[int, float]]:
    """First-result latency on a chain whose data sits on the deepest device only."""
    model = DataModelGraph()
    model.add("a", NS + "hasReading", "v", SlotType.INTEGER)
    out = []
    for d in depths:
        ts = TupleStore()
        ts.extend(Triple(Term.iri(f"{NS}c{i}"), Term.iri(NS + "hasReading"), Term.integer(i)) for i in range(rows))
        svc = Service(Topology.chain(d, latency_ms), {d: ts}, model)
        try:
            res = svc.handle_query(f"SELECT ?v WHERE {{ ?c <{NS}hasReading> ?v }}")
        finally:
            svc.close()
        out.append((d, res.stats.first_result_ms))
    return out


def r_squared(xs, ys) -> float:
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 if ss_tot == 0 else 1.0 - float((resid ** 2).sum()) / ss_tot


# -- aggregation convergence ------------------------------------------------------------------

AGG_SELECT = "(COUNT(*) AS ?n) (SUM(?v) AS ?s) (MIN(?v) AS ?lo) (MAX(?v) AS ?hi) (AVG(?v) AS ?avg)"


def deep_topology(rng: random.Random, depth: int, extra: int) -> Topology:
    """A spine of ``depth`` devices plus ``extra`` devices hung anywhere above the maximum depth."""
    parent = {i: i - 1 for i in range(1, depth + 1)}
    level = {BASE: 0, **{i: i for i in range(1, depth + 1)}}
    for d in range(depth + 1, depth + extra + 1):
        p = rng.choice([n for n in level if level[n] < depth])
        parent[d] = p
        level[d] = level[p] + 1
    return Topology(parent, {d: float(rng.randint(1, 20)) for d in parent})


def convergence_case(depth: int, vtype: SlotType, seed: int = 0):
    rng = random.Random(1000 * depth + seed)
    topo = deep_topology(rng, depth, rng.randint(0, 4))
    model = DataModelGraph()
    model.add("a", NS + "value", "v", vtype)
    stores = {}
    for d in topo.devices:
        ts = TupleStore()
        for i in range(rng.randint(0, 20)):
            if vtype is SlotType.INTEGER:
                v = Term.integer(rng.randint(-1000, 1000))
            else:
                v = Term.float(rng.randint(-400, 400) / 4)  # quarter steps keep float sums exact
            ts.insert(Triple(Term.iri(f"{NS}d{d}r{i}"), Term.iri(NS + "value"), v))
        stores[d] = ts
    # the deepest device always contributes, so every level of the tree carries state
    deep = Term.integer(1) if vtype is SlotType.INTEGER else Term.float(0.25)
    stores[depth].insert(Triple(Term.iri(f"{NS}deep"), Term.iri(NS + "value"), deep))
    query = f"SELECT {AGG_SELECT} WHERE {{ ?c <{NS}value> ?v }}"
    return topo, model, stores, query


def converge(depth: int, vtype: SlotType, seeds: int = 100, jitter_ms: float = 40.0):
    """Final BASE answers of ``seeds`` jittered runs, the reference answer, whether the
    aggregate was pushed in every run, and how many distinct message orders occurred."""
    topo, model, stores, query = convergence_case(depth, vtype)
    finals = []
    orders = set()
    pushed = True
    for s in range(seeds):
        svc = Service(topo, stores, model, config=ServiceConfig(sim=SimConfig(jitter_ms=jitter_ms, seed=s)))
        try:
            out = svc.handle_query(query)
        finally:
            svc.close()
        pushed = pushed and out.stats.plan.aggregate is not None
        orders.add(tuple((r.src, r.dst, r.msg_type) for r in out.stats.trace))
        finals.append(out.result)
    dataset = [t for ts in stores.values() for t in ts.triples()]
    return finals, eval_reference(dataset, parse(query)), pushed, len(orders)


def same_results(results: list[BindingSet]) -> bool:
    first = results[0]
    return all(r.variables == first.variables and r.rows == first.rows for r in results[1:])


def matches_reference(expected: BindingSet, actual: BindingSet, rel_tol: float = 1e-6) -> bool:
    return equivalent(expected, actual) or equivalent(expected, actual, rel_tol=rel_tol)

