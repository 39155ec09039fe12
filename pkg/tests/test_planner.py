from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snes.endpoint import Service
from snes.netsim import Topology
from snes.operators import AggFunc, OpType, SlotType
from snes.oracle import equivalent, eval_reference
from snes.planner import (
    DataModelGraph,
    PlanningError,
    Unanswerable,
    check_projection,
    classify,
    compile_device_query,
    load_endpoints,
    match_local,
)
from snes.rdf import Term, Triple, TupleStore
from snes.sparql import ParsedQuery, SelectItem, TriplePattern, Variable, parse, to_pattern_graph
from snes.wire import TooManyOperators

EX = "http://example.org/"
HOME = "http://example.org/home#"
WEB = "http://example.org/products#"


def model(*edges):
    g = DataModelGraph()
    for s, p, o, *dt in edges:
        g.add(s, EX + p, o, *dt)
    return g


def pat(s, p, o):
    def term(x):
        return Variable(x[1:]) if x.startswith("?") else Term.iri(EX + x)

    return TriplePattern(term(s), Term.iri(EX + p), term(o))


def ops_of(plan):
    return Counter(d.op_type for d in plan.device_query.descriptors)


@pytest.fixture
def home_model(household):
    return DataModelGraph.load(household / "model.txt")


# -- model file ---------------------------------------------------------------------------


def test_model_file_round_trip(home_model):
    again = DataModelGraph.parse(home_model.dumps())
    assert again.edges == home_model.edges
    assert home_model.datatype_of(HOME + "hasTimeStamp") is SlotType.INTEGER
    assert home_model.datatype_of(HOME + "observed") is None


@pytest.mark.parametrize("text", ["a p", "a p b c d", "a p b decimal"])
def test_model_file_errors(text):
    with pytest.raises(ValueError):
        DataModelGraph.parse(text)


def test_endpoint_file(tmp_path):
    (tmp_path / "web.nt").write_text("")
    f = tmp_path / "endpoints.txt"
    f.write_text(f"# comment\n{WEB} mock:web.nt\n<http://other/> http://remote/sparql\n")
    eps = load_endpoints(f)
    assert eps["http://other/"] == "http://remote/sparql"
    assert eps[WEB] == "mock:" + str((tmp_path / "web.nt").resolve())
    f.write_text("only-one-token\n")
    with pytest.raises(ValueError):
        load_endpoints(f)


# -- match_local --------------------------------------------------------------------------


def test_directed_path_is_local():
    m = model(("u", "a", "v"), ("v", "b", "w"))
    assert match_local(m, [pat("?x", "a", "?y"), pat("?y", "b", "?z")]) == [frozenset({0, 1})]


def test_unknown_label_not_local():
    m = model(("u", "a", "v"), ("v", "b", "w"))
    assert match_local(m, [pat("?x", "a", "?y"), pat("?z", "c", "?y")]) == [frozenset({0})]


def test_empty_model_matches_nothing():
    assert match_local(DataModelGraph(), [pat("?x", "a", "?y")]) == []


def test_direction_matters():
    m = model(("u", "a", "v"), ("v", "b", "w"))
    # ?y is the object of both edges, but a and b do not share a target in the model
    got = match_local(m, [pat("?x", "a", "?y"), pat("?z", "b", "?y")])
    assert sorted(got, key=sorted) == [frozenset({0}), frozenset({1})]


def test_accepts_pattern_graph():
    m = model(("u", "a", "v"))
    pq = parse(f"SELECT * WHERE {{ ?x <{EX}a> ?y }}")
    assert match_local(m, to_pattern_graph(pq)) == match_local(m, pq) == [frozenset({0})]


def test_shared_constant_does_not_connect_patterns():
    # no variable in common means no join, so the two patterns stay separate
    m = model(("u", "a", "v"), ("w", "b", "v"))
    got = match_local(m, [pat("?x", "a", "k"), pat("?y", "b", "k")])
    assert sorted(got, key=sorted) == [frozenset({0}), frozenset({1})]


# -- classify -----------------------------------------------------------------------------


def test_critical_query_single_device_part(home_model, household):
    pq = parse((household / "queries" / "critical.rq").read_text())
    plan = classify(pq, home_model)
    assert plan.web_parts == () and len(plan.components) == 1
    assert ops_of(plan) == Counter({OpType.GPS: 4, OpType.SLJ: 3, OpType.COLLECT: 1})
    assert check_projection(plan) == []


def test_ungrouped_count_pushed(home_model):
    plan = classify(parse(f"SELECT (COUNT(*) AS ?n) WHERE {{ ?a <{HOME}observed> ?c }}"), home_model)
    assert ops_of(plan) == Counter({OpType.GPS: 1, OpType.AGGREGATE: 1})
    root = plan.device_query.descriptor(plan.aggregate.root_id)
    assert [c.func for c in root.params.columns] == [AggFunc.COUNT]


def test_grouped_aggregate_stays_at_base():
    m = model(("s", "attached_to", "y"), ("s", "located_in", "b"), ("s", "measures", "t", SlotType.INTEGER))
    pq = parse(
        f"""PREFIX ex: <{EX}>
        SELECT ?system (COUNT(*) AS ?count) WHERE {{
          ?sensor ex:attached_to ?system . ?sensor ex:located_in ex:Building_A .
          ?sensor ex:measures ?temp . FILTER (?temp > '20') }} GROUP BY ?system"""
    )
    plan = classify(pq, m)
    assert plan.aggregate is None
    assert ops_of(plan)[OpType.COLLECT] == 1 and ops_of(plan)[OpType.SELECTION] == 1
    assert plan.pushed_filters == pq.filters and plan.base_filters == ()


def test_sum_over_string_column_not_pushed(home_model):
    plan = classify(parse(f"SELECT (MAX(?d) AS ?m) WHERE {{ ?c <{HOME}hasDescription> ?d }}"), home_model)
    assert plan.aggregate is None and ops_of(plan)[OpType.COLLECT] == 1


def test_having_on_unselected_aggregate_not_pushed(home_model):
    pq = parse(f"SELECT (COUNT(*) AS ?n) WHERE {{ ?c <{HOME}hasTimeStamp> ?t }} HAVING (MAX(?t) > 3)")
    assert classify(pq, home_model).aggregate is None


def test_web_and_device_parts_split(home_model):
    pq = parse(
        f"SELECT ?c ?maker WHERE {{ ?a <{HOME}observed> ?c . ?a <{HOME}model> ?p . ?p <{WEB}manufacturer> ?maker }}"
    )
    plan = classify(pq, home_model, {WEB: "mock:x"})
    assert plan.local_patterns == (0, 1) and plan.web_patterns == (2,)
    assert plan.split_points == ("p",)
    assert plan.web_part.variables == ("p", "maker")
    assert parse(plan.web_part.text).patterns == (pq.patterns[2],)


def test_every_pattern_lands_in_one_part(home_model):
    pq = parse(
        f"SELECT * WHERE {{ ?a <{HOME}observed> ?c . ?c <{HOME}hasSeverity> ?s . "
        f"?a <{HOME}model> ?p . ?p <{WEB}ratedPower> ?w . ?q <{HOME}observed> ?c2 }}"
    )
    plan = classify(pq, home_model, [WEB])
    assert sorted(plan.local_patterns + plan.web_patterns) == list(range(5))
    assert len(set(plan.local_patterns) & set(plan.web_patterns)) == 0


def test_unknown_predicate_unanswerable(home_model):
    with pytest.raises(Unanswerable):
        classify(parse(f"SELECT * WHERE {{ ?a <{EX}nowhere> ?b }}"), home_model)
    with pytest.raises(Unanswerable):
        classify(parse("SELECT * WHERE { ?a ?p ?b }"), home_model)


def test_filter_across_components_stays_at_base(home_model):
    pq = parse(
        f"SELECT * WHERE {{ ?a <{HOME}hasTimeStamp> ?t . ?b <{HOME}hasTimeStamp> ?u . FILTER (?t < ?u) }}"
    )
    plan = classify(pq, home_model)
    assert len(plan.components) == 2
    assert plan.base_filters == pq.filters


# -- compile_device_query -----------------------------------------------------------------


def test_single_pattern_two_operators():
    pq = parse(f"SELECT * WHERE {{ ?s <{EX}p> ?o }}")
    dq, *_ = compile_device_query(pq, [[0]], needed={"s", "o"})
    assert [d.op_type for d in dq.descriptors] == [OpType.GPS, OpType.COLLECT]


def test_star_of_four():
    pq = parse(f"SELECT * WHERE {{ ?s <{EX}a> ?a . ?s <{EX}b> ?b . ?s <{EX}c> ?c . ?s <{EX}d> ?d }}")
    dq, *_ = compile_device_query(pq, [[0, 1, 2, 3]], needed={"s"})
    assert len(dq.descriptors) == 8
    # GPS operators come first and in ascending id order
    assert [d.op_type for d in dq.descriptors[:4]] == [OpType.GPS] * 4


def test_130_patterns_too_many_operators():
    body = " . ".join(f"?v{i} <{EX}p{i}> ?v{i + 1}" for i in range(130))
    pq = parse(f"SELECT ?v0 WHERE {{ {body} }}")
    with pytest.raises(TooManyOperators):
        compile_device_query(pq, [list(range(130))], needed={"v0"})


def test_too_many_operators_from_classify():
    m = model(*((f"n{i}", f"p{i}", f"n{i + 1}") for i in range(130)))
    body = " . ".join(f"?v{i} <{EX}p{i}> ?v{i + 1}" for i in range(130))
    with pytest.raises(TooManyOperators):
        classify(parse(f"SELECT ?v0 WHERE {{ {body} }}"), m)


def test_leftover_filter_is_a_planning_error():
    from snes.planner import _Filter

    pq = parse(f"SELECT * WHERE {{ ?s <{EX}p> ?o }}")
    with pytest.raises(PlanningError):
        compile_device_query(pq, [[0]], [_Filter("zzz", "=", Term.integer(1))], needed={"s"})


def test_projection_keeps_only_needed_columns(home_model, household):
    plan = classify(parse((household / "queries" / "critical.rq").read_text()), home_model)
    (comp,) = plan.components
    assert set(comp.columns) == {"time", "description"}
    assert comp.types == (SlotType.INTEGER, SlotType.STRING_HASH) or comp.types == (
        SlotType.STRING_HASH,
        SlotType.INTEGER,
    )


# -- properties ---------------------------------------------------------------------------

LABELS = ["a", "b", "c", "d"]


@st.composite
def worlds(draw):
    n_nodes = draw(st.integers(2, 4))
    nodes = [f"n{i}" for i in range(n_nodes)]
    edges = draw(
        st.lists(st.tuples(st.sampled_from(nodes), st.sampled_from(LABELS), st.sampled_from(nodes)), min_size=1, max_size=5)
    )
    edges = list(dict.fromkeys(edges))
    n_devices = draw(st.integers(1, 5))
    stores = {}
    for d in range(1, n_devices + 1):
        ts = TupleStore()
        for copy in range(draw(st.integers(0, 2))):
            for s, p, o in edges:
                ts.insert(Triple(Term.iri(f"{EX}d{d}c{copy}{s}"), Term.iri(EX + p), Term.iri(f"{EX}d{d}c{copy}{o}")))
        stores[d] = ts
    vars_ = [f"?v{i}" for i in range(4)]
    labels = sorted({p for _, p, _ in edges})
    pats = draw(
        st.lists(st.tuples(st.sampled_from(vars_), st.sampled_from(labels), st.sampled_from(vars_)), min_size=1, max_size=4)
    )
    return model(*edges), stores, [pat(*p) for p in pats]


@settings(max_examples=60)
@given(worlds())
def test_locality_soundness(world):
    """Unioned per-device answers equal the centralized answer when devices hold disjoint instances."""
    m, stores, patterns = world
    pq = ParsedQuery(select_all=True, patterns=tuple(patterns))
    plan = classify(pq, m)
    assert check_projection(plan) == []
    service = Service(Topology.star(len(stores)), stores, m)
    try:
        got = service.handle_query(pq).result
    finally:
        service.close()
    expected = eval_reference([t for ts in stores.values() for t in ts.triples()], pq)
    assert equivalent(expected, got)


@settings(max_examples=60)
@given(worlds(), st.data())
def test_compiled_plans_never_drop_needed_columns(world, data):
    m, _, patterns = world
    vs = sorted({v for p in patterns for v in p.variables}, key=str)
    proj = data.draw(st.lists(st.sampled_from(vs), min_size=1, unique=True))
    pq = ParsedQuery(select=tuple(SelectItem(v) for v in proj), patterns=tuple(patterns))
    assert check_projection(classify(pq, m)) == []
