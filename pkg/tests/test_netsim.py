import pytest

from snes.hashing import hash_string
from snes.netsim import BASE, SimConfig, Simulator, Topology, TopologyError, load_stores
from snes.operators import AggFunc, AggregateState, Row
from snes.planner import compile_device_query
from snes.rdf import Term, TupleStore
from snes.sparql import parse
from snes.wire import MsgType, WireError, encode_message, row_message, split_query

from conftest import EX, iri, triple

SCAN = parse(f"SELECT ?s ?o WHERE {{ ?s <{EX}p> ?o }}")
JOIN3 = parse(f"SELECT ?a ?d WHERE {{ ?a <{EX}p> ?b . ?b <{EX}q> ?c . ?c <{EX}r> ?d }}")


def scan_query(qid=1, lifetime_s=60, mtu=96):
    dq, comps, _, _ = compile_device_query(SCAN, [[0]], needed={"s", "o"}, query_id=qid, lifetime_s=lifetime_s, mtu=mtu)
    return dq, comps[0].root_id


def count_query(qid=1):
    dq, comps, _, _ = compile_device_query(SCAN, [[0]], aggregates=[(AggFunc.COUNT, None)], query_id=qid)
    return dq, comps[0].root_id


def store(*triples):
    ts = TupleStore()
    ts.extend(triples)
    return ts


def matches(device, n):
    return store(*(triple(f"d{device}_s{i}", "p", f"d{device}_o{i}") for i in range(n)))


# -- topology -----------------------------------------------------------------------------


def test_topology_file_round_trip():
    text = "1 - 10\n2 1 5.5\n3 - 2\n# comment\n"
    topo = Topology.parse(text)
    assert topo.parent == {1: BASE, 2: 1, 3: BASE}
    assert topo.latency_ms[2] == 5.5
    assert topo.depth(2) == 2 and topo.max_depth == 2
    assert Topology.parse(topo.dumps()) == topo


@pytest.mark.parametrize(
    "text", ["1 2 1\n2 1 1\n", "1 9 1\n", "1 - 1\n1 - 2\n", "1 -\n", "0 - 1\n", "1 - x\n", "1 - -3\n"]
)
def test_topology_rejects_bad_files(text):
    with pytest.raises(TopologyError):
        Topology.parse(text)


def test_data_for_unknown_device_rejected():
    with pytest.raises(TopologyError):
        Simulator(Topology.chain(2), {7: TupleStore()})


def test_load_stores_reads_per_device_files(household):
    topo = Topology.load(household / "topology.txt")
    stores = load_stores(household / "devices", topo)
    assert set(stores) == set(topo.devices)
    assert all(len(ts) > 0 for ts in stores.values())


# -- distribution -------------------------------------------------------------------------


def test_chain_delivers_every_query_message_once():
    dq, _ = compile_device_query(JOIN3, [[0, 1, 2]], needed={"a", "d"}, mtu=48)[:2]
    per_query = len(split_query(dq, 48))
    assert per_query > 1
    sim = Simulator(Topology.chain(5), {}, SimConfig(mtu=48))
    sim.submit(dq)
    sim.run()
    assert len(sim.messages(MsgType.QUERY)) == 5 * per_query
    for dev in sim.devices.values():
        assert dev.received[MsgType.QUERY] == per_query
    assert sim.complete(dq.query_id)


def test_tree_delivery_in_a_bushy_tree():
    topo = Topology({1: 0, 2: 0, 3: 1, 4: 1, 5: 4, 6: 2}, {})
    dq, _ = scan_query()
    sim = Simulator(topo)
    sim.submit(dq)
    sim.run()
    assert all(d.received[MsgType.QUERY] == 1 for d in sim.devices.values())
    assert len(sim.messages(MsgType.QUERY)) == 6


def test_single_device_rows_reach_base():
    dq, root = scan_query()
    sim = Simulator(Topology.star(1), {1: matches(1, 3)})
    sim.submit(dq)
    sim.run()
    rows = sim.collected(dq.query_id)
    assert len(rows) == 3 and all(op == root for op, _ in rows)
    assert sim.complete(dq.query_id)
    assert sim.first_result_latency(dq.query_id) is not None


def test_empty_store_sends_only_end_markers():
    dq, _ = scan_query()
    sim = Simulator(Topology.star(2))
    sim.submit(dq)
    sim.run()
    assert sim.collected(dq.query_id) == []
    assert len(sim.messages(MsgType.RESULT_ROW, dst=BASE)) == 2
    assert sim.complete(dq.query_id)
    assert sim.first_result_latency(dq.query_id) is None


def test_submit_rejects_id_in_use():
    dq, _ = scan_query()
    sim = Simulator(Topology.star(1))
    sim.submit(dq)
    with pytest.raises(ValueError):
        sim.submit(dq)
    sim.release(dq.query_id)
    assert sim.free_query_id() == 1


# -- forwarding ---------------------------------------------------------------------------


def test_collect_row_hops_unchanged_to_base():
    dq, _ = scan_query()
    sim = Simulator(Topology.chain(3), {3: matches(3, 1)})
    sent = []
    orig = sim.send

    def spy(src, dst, data):
        sent.append((src, dst, data))
        orig(src, dst, data)

    sim.send = spy
    sim.submit(dq)
    sim.run()
    (op, row), = sim.collected(dq.query_id)
    payload = encode_message(row_message(dq.query_id, op, row), 96)
    hops = [(s, d) for s, d, data in sent if data == payload]
    assert hops == [(3, 2), (2, 1), (1, BASE)]


def test_aggregate_count_over_chain_converges():
    dq, root = count_query()
    sim = Simulator(Topology.chain(3), {d: matches(d, 2) for d in (1, 2, 3)})
    sim.submit(dq)
    sim.run()
    assert sim.aggregate_state(dq.query_id, root).emit() == [Term.integer(6)]


def test_aggregate_bytes_independent_of_match_count():
    totals = []
    for n in (2, 40):
        dq, _ = count_query()
        sim = Simulator(Topology.chain(3), {3: matches(3, n)})
        sim.submit(dq)
        sim.run()
        totals.append([sim.bytes_on_link(d) for d in (1, 2, 3)])
    assert totals[0] == totals[1]


def test_row_for_expired_query_dropped_with_diagnostic():
    dq, root = scan_query(lifetime_s=1)
    sim = Simulator(Topology.chain(2))
    sim.submit(dq)
    sim.run()
    assert dq.query_id not in sim.devices[1].queries
    late = encode_message(row_message(dq.query_id, root, Row(end=True)), 96)
    sim.send(2, 1, late)
    sim.run()
    assert any("expired query" in msg for msg in sim.diagnostics)
    assert sim.messages(MsgType.RESULT_ROW, dst=BASE)[-1].time_ms < 1000


def test_unknown_query_id_at_base_dropped():
    sim = Simulator(Topology.star(1))
    sim.send(1, BASE, encode_message(row_message(9, 0, Row(end=True)), 96))
    sim.run()
    assert any("unknown query 9" in msg for msg in sim.diagnostics)


# -- aggregate ticks ----------------------------------------------------------------------


def test_no_new_input_means_no_aggregate_message():
    dq, _ = count_query()
    sim = Simulator(Topology.star(1), {1: matches(1, 2)})
    sim.submit(dq)
    sim.run()
    # one state after the local scan, then silence for the remaining lifetime
    assert len(sim.messages(MsgType.AGG_ROW)) == 1


def test_empty_device_never_reports_state():
    dq, _ = count_query()
    sim = Simulator(Topology.star(1))
    sim.submit(dq)
    sim.run()
    assert sim.messages(MsgType.AGG_ROW) == []


def test_one_update_per_interval_gives_one_message_each():
    dq, root = count_query()
    sim = Simulator(Topology.star(1), {1: matches(1, 1)})
    sim.submit(dq)
    sim.run(until_ms=1500)
    agg = sim.devices[1].queries[dq.query_id].tree.aggregates[root]

    def update(k):
        s = AggregateState(agg.spec)
        s.update([None])
        agg.receive(("fake", k), s)

    for k, t in enumerate((2200, 3200, 4200), start=1):
        sim.schedule(t - sim.now, update, k)
    sim.run()
    assert len(sim.messages(MsgType.AGG_ROW)) == 4
    assert sim.aggregate_state(dq.query_id, root).emit() == [Term.integer(4)]


def test_ticks_stop_at_expiry():
    dq, _ = count_query()
    sim = Simulator(Topology.star(1), {1: matches(1, 1)})
    sim.submit(dq)
    sim.run()
    assert sim.idle
    # expiry counts from query start, one processing delay and one hop after submission
    assert sim.now <= dq.lifetime_s * 1000 + 20


# -- string requests ----------------------------------------------------------------------


def _h(s):
    return hash_string(s)


def test_string_on_leaf_resolved_along_path():
    topo = Topology({1: 0, 2: 1, 3: 2, 4: 0}, {})
    sim = Simulator(topo, {3: store(triple("leaf", "p", "x"))})
    s = iri("leaf").token()
    assert sim.resolve_strings([_h(s)]) == {_h(s): s}
    for d in (1, 2, 3):
        assert sim.devices[d].received[MsgType.STRING_REQ] == 1
    assert len(sim.messages(MsgType.STRING_RESP, dst=BASE)) == 1


def test_string_request_pruned_below_resolving_device():
    topo = Topology({1: 0, 2: 1, 3: 0}, {})
    sim = Simulator(topo, {1: store(triple("near", "p", "x")), 2: store(triple("near", "p", "y"))})
    s = iri("near").token()
    assert sim.resolve_strings([_h(s)])[_h(s)] == s
    assert sim.devices[2].received[MsgType.STRING_REQ] == 0
    assert sim.devices[3].received[MsgType.STRING_REQ] == 1


def test_unknown_string_visits_everyone_and_yields_none():
    topo = Topology({1: 0, 2: 1, 3: 0}, {})
    sim = Simulator(topo, {2: store(triple("a", "p", "b"))})
    h = _h("never stored")
    assert sim.resolve_strings([h]) == {h: None}
    assert all(d.received[MsgType.STRING_REQ] == 1 for d in sim.devices.values())


def test_long_string_split_across_responses():
    long = "x" * 300
    sim = Simulator(Topology.chain(2), {2: store(triple("a", "p", Term.string(long)))})
    s = Term.string(long).token()
    assert sim.resolve_strings([_h(s)])[_h(s)] == s
    assert len(sim.messages(MsgType.STRING_RESP, dst=BASE)) > 1


def test_resolve_skips_already_resolved():
    sim = Simulator(Topology.star(1), {1: store(triple("a", "p", "b"))})
    s = iri("a").token()
    sim.resolve_strings([_h(s), _h(s)])
    sim.resolve_strings([_h(s)])
    assert sim.string_requests_sent == 1


# -- determinism --------------------------------------------------------------------------


def _traced_run(seed):
    dq, root = count_query()
    topo = Topology({1: 0, 2: 1, 3: 1, 4: 2, 5: 0}, {d: 3.0 for d in range(1, 6)})
    sim = Simulator(topo, {d: matches(d, d) for d in range(1, 6)}, SimConfig(jitter_ms=7.0, seed=seed))
    sim.submit(dq)
    sim.run()
    return sim.trace_lines(), sim.aggregate_state(dq.query_id, root).emit()


def test_identical_inputs_give_identical_traces():
    a, b = _traced_run(4), _traced_run(4)
    assert a == b
    assert a[1] == [Term.integer(15)]


def test_jitter_changes_timing_not_result():
    (t1, r1), (t2, r2) = _traced_run(1), _traced_run(2)
    assert t1 != t2
    assert r1 == r2


def test_trace_line_format():
    dq, _ = scan_query()
    sim = Simulator(Topology.star(1), {1: matches(1, 1)})
    sim.submit(dq)
    sim.run()
    first = sim.trace_lines()[0].split()
    assert first[1:4] == ["-", "1", "QUERY"]
    assert float(first[0]) == 0.0 and int(first[4]) > 0


def test_oversized_message_refused():
    sim = Simulator(Topology.star(1), config=SimConfig(mtu=32))
    with pytest.raises(WireError):
        sim.send(BASE, 1, bytes(33))
