import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from snes.rdf import Term
from snes.sparql import (
    AggregateExpr,
    Comparison,
    InvalidQuery,
    OrderKey,
    ParsedQuery,
    SelectItem,
    SparqlSyntaxError,
    TriplePattern,
    UnsupportedConstruct,
    Variable,
    _validate,
    parse,
    to_pattern_graph,
    to_text,
)

EX = "http://example.org/"
HOME = "http://example.org/home#"

BUILDING_A = """PREFIX ex: <http://example.org/>
SELECT ?sensor
FROM <http://example.org/>
WHERE {
  ?sensor ex:attached_to ?system .
  ?sensor ex:located_in ex:Building_A .
}"""

TEMPERATURE = """PREFIX ex: <http://example.org/>
SELECT ?system COUNT(*) AS ?count
FROM <http://example.org/>
WHERE {
  ?sensor ex:attached_to ?system .
  ?sensor ex:located_in ex:Building_A .
  ?sensor ex:measures ?temp .
  FILTER (?temp > '20') .
}
GROUP BY ?system"""

CRITICAL = """SELECT ?time ?description WHERE {
  ?node :observed ?condition .
  ?condition :hasSeverity :Critical .
  ?condition :hasTimeStamp ?time .
  ?condition :hasDescription ?description .
}"""


def v(name):
    return Variable(name)


def test_building_a_query():
    pq = parse(BUILDING_A)
    assert len(pq.patterns) == 2
    assert pq.projection == (v("sensor"),)
    assert pq.from_iri == EX
    assert pq.patterns[1] == TriplePattern(v("sensor"), Term.iri(EX + "located_in"), Term.iri(EX + "Building_A"))


def test_temperature_group_by_query():
    pq = parse(TEMPERATURE)
    assert len(pq.patterns) == 3
    assert pq.filters == (Comparison(v("temp"), ">", Term.string("20")),)
    assert pq.group_by == (v("system"),)
    assert pq.aggregates == (SelectItem(v("count"), AggregateExpr("COUNT")),)


def test_critical_query_needs_its_prefix():
    with pytest.raises(SparqlSyntaxError):
        parse(CRITICAL)
    pq = parse(CRITICAL, prefixes={"": HOME})
    assert len(pq.patterns) == 4
    assert pq.projection == (v("time"), v("description"))
    assert pq.prefixes == ()


def test_household_file_matches_inline_text(household):
    from_file = parse((household / "queries" / "critical.rq").read_text())
    assert from_file.patterns == parse(CRITICAL, prefixes={"": HOME}).patterns


# -- pattern graph ------------------------------------------------------------------------


def test_pattern_graph_shared_variable():
    g = to_pattern_graph(parse(BUILDING_A))
    assert len(g.nodes) == 3 and len(g.edges) == 2
    assert len(g.out_edges(g.node_index(v("sensor")))) == 2


def test_pattern_graph_single_pattern():
    g = to_pattern_graph(parse(f"SELECT * WHERE {{ ?s <{EX}p> ?o }}"))
    assert len(g.nodes) == 2 and len(g.edges) == 1


def test_pattern_graph_critical_star():
    g = to_pattern_graph(parse(CRITICAL, prefixes={"": HOME}))
    cond = g.node_index(v("condition"))
    assert len(g.out_edges(cond)) == 3
    (into,) = [e for e in g.edges if e.target == cond]
    assert g.nodes[into.source] == v("node")
    assert into.label == Term.iri(HOME + "observed")


# -- syntax details -----------------------------------------------------------------------


def test_literals_and_modifiers():
    pq = parse(
        f"""PREFIX e: <{EX}>
        SELECT DISTINCT ?s WHERE {{
          ?s e:n ?n ; e:label "a \\"q\\"" , 'b' .
          ?s e:w 2.5 . ?s e:i -3 . ?s e:t "7"^^<http://www.w3.org/2001/XMLSchema#int> .
          FILTER (?n >= 1 && ?n != ?s)
        }} ORDER BY DESC(?n) ?s LIMIT 3 OFFSET 1"""
    )
    objs = [p.object for p in pq.patterns]
    assert Term.string('a "q"') in objs and Term.string("b") in objs
    assert Term.float(2.5) in objs and Term.integer(-3) in objs and Term.integer(7) in objs
    assert len(pq.filters) == 2
    assert pq.order_by == (OrderKey(v("n"), True), OrderKey(v("s")))
    assert (pq.distinct, pq.limit, pq.offset) == (True, 3, 1)


def test_having_and_aliases():
    pq = parse(
        f"SELECT ?g (SUM(?x) AS ?t) WHERE {{ ?g <{EX}p> ?x }} GROUP BY ?g HAVING (COUNT(*) > 1) ORDER BY ?t"
    )
    assert pq.having == (Comparison(AggregateExpr("COUNT"), ">", Term.integer(1)),)


def test_syntax_error_carries_position():
    with pytest.raises(SparqlSyntaxError) as info:
        parse("SELECT ?s WHERE {\n  ?s <p> }")
    assert info.value.line == 2 and info.value.column > 0


@pytest.mark.parametrize(
    "text",
    [
        f"SELECT ?s WHERE {{ ?s <{EX}p> ?o OPTIONAL {{ ?s <{EX}q> ?z }} }}",
        f"SELECT ?s WHERE {{ {{ ?s <{EX}p> ?o }} UNION {{ ?s <{EX}q> ?o }} }}",
        f"SELECT ?s WHERE {{ ?s <{EX}p>/<{EX}q> ?o }}",
        f"ASK {{ ?s <{EX}p> ?o }}",
        f"SELECT ?s WHERE {{ ?s <{EX}p> ?o FILTER (?o = 1 || ?o = 2) }}",
        f"SELECT ?s WHERE {{ ?s <{EX}p> _:b }}",
        f"SELECT ?s WHERE {{ ?s <{EX}p> ?o FILTER regex(?o, \"x\") }}",
    ],
)
def test_out_of_subset_constructs(text):
    with pytest.raises(UnsupportedConstruct):
        parse(text)


@pytest.mark.parametrize(
    "text",
    [
        f"SELECT ?z WHERE {{ ?s <{EX}p> ?o }}",
        f"SELECT ?s WHERE {{ ?s <{EX}p> ?o FILTER (?z > 1) }}",
        f"SELECT ?s (COUNT(*) AS ?c) WHERE {{ ?s <{EX}p> ?o }}",
        f"SELECT ?o (COUNT(*) AS ?c) WHERE {{ ?s <{EX}p> ?o }} GROUP BY ?s",
        f"SELECT (COUNT(*) AS ?o) WHERE {{ ?s <{EX}p> ?o }}",
        f"SELECT ?s WHERE {{ ?s <{EX}p> ?o }} HAVING (?s > 1)",
        f"SELECT * WHERE {{ ?s <{EX}p> ?o }} GROUP BY ?s",
        f"SELECT ?s WHERE {{ ?s <{EX}p> ?o }} ORDER BY ?q",
    ],
)
def test_scoping_violations_rejected(text):
    with pytest.raises(InvalidQuery):
        parse(text)


# -- printer round trip -------------------------------------------------------------------

names = st.sampled_from(["a", "b", "c", "d"]).map(Variable)
iris = st.sampled_from(["p", "q", "r", "k"]).map(lambda s: Term.iri(EX + s))
constants = st.one_of(
    iris,
    st.text(st.characters(blacklist_categories=("Cs",)), max_size=6).map(Term.string),
    st.integers(-(2**31), 2**31 - 1).map(Term.integer),
    st.floats(width=32, allow_nan=False, allow_infinity=False).map(Term.float),
)
patterns = st.builds(TriplePattern, st.one_of(names, iris), st.one_of(iris, names), st.one_of(names, constants))
ops = st.sampled_from(["<", "<=", "=", "!=", ">=", ">"])


@st.composite
def queries(draw):
    pats = tuple(draw(st.lists(patterns, min_size=1, max_size=4)))
    bound = list(dict.fromkeys(x for p in pats for x in p.variables))
    assume(bound)
    var = st.sampled_from(bound)
    filters = tuple(draw(st.lists(st.builds(Comparison, var, ops, st.one_of(var, constants)), max_size=2)))
    if draw(st.booleans()):
        group = tuple(dict.fromkeys(draw(st.lists(var, min_size=0, max_size=2))))
        funcs = st.sampled_from(["COUNT", "SUM", "AVG", "MIN", "MAX"])
        agg = st.builds(AggregateExpr, funcs, st.one_of(st.none(), var)).filter(lambda a: a.func == "COUNT" or a.arg)
        n = draw(st.integers(1, 2))
        select = tuple(SelectItem(g) for g in group) + tuple(
            SelectItem(Variable(f"x{i}"), draw(agg)) for i in range(n)
        )
        having = tuple(draw(st.lists(st.builds(Comparison, agg, ops, st.integers(0, 9).map(Term.integer)), max_size=1)))
        keys = [s.var for s in select]
        select_all = False
    else:
        group, having = (), ()
        select = tuple(SelectItem(x) for x in draw(st.lists(var, min_size=1, max_size=3, unique=True)))
        select_all = draw(st.booleans())
        keys = bound
        if select_all:
            select = ()
    order = tuple(draw(st.lists(st.builds(OrderKey, st.sampled_from(keys), st.booleans()), max_size=2)))
    pq = ParsedQuery(
        select=select,
        select_all=select_all,
        distinct=draw(st.booleans()),
        patterns=pats,
        filters=filters,
        group_by=group,
        having=having,
        order_by=order,
        limit=draw(st.one_of(st.none(), st.integers(0, 50))),
        offset=draw(st.one_of(st.none(), st.integers(0, 50))),
    )
    try:
        return _validate(pq)
    except InvalidQuery:
        assume(False)


@given(queries())
def test_print_parse_round_trip(pq):
    assert parse(to_text(pq)) == pq


@given(queries())
def test_pattern_graph_has_one_edge_per_pattern(pq):
    g = to_pattern_graph(pq)
    assert len(g.edges) == len(pq.patterns)
    for e in g.edges:
        p = pq.patterns[e.pattern_index]
        assert g.nodes[e.source] == p.subject and g.nodes[e.target] == p.object and e.label == p.predicate
