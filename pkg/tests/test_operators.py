import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from snes.hashing import hash_string
from snes.operators import (
    END,
    AggColumn,
    AggFunc,
    AggregateParams,
    AggregateState,
    Cmp,
    CollectParams,
    Comparison,
    Constant,
    GpsParams,
    MalformedTree,
    OperatorDescriptor,
    OperatorTree,
    OpType,
    ProjectionMask,
    Row,
    RowTooWide,
    SelectionParams,
    SljParams,
    SlotType,
    SpecMismatch,
    TypeMismatch,
    tree_run,
)
from snes.rdf import Term, TupleStore

from conftest import iri, triple

D, I, F, H = SlotType.DROP, SlotType.INTEGER, SlotType.FLOAT, SlotType.STRING_HASH


def mask(*types):
    return ProjectionMask.from_types(types)


def gps(op_id, parent, types, s=None, p=None, o=None):
    consts = tuple(None if t is None else Constant.of_term(t) for t in (s, p, o))
    return OperatorDescriptor(op_id, OpType.GPS, parent, mask(*types), GpsParams(consts))


def collect(op_id, types):
    return OperatorDescriptor(op_id, OpType.COLLECT, None, mask(*types), CollectParams())


def h(term):
    return hash_string(term.token())


def rows(out):
    return [r.values for _, r in out if not r.end]


@pytest.fixture
def store():
    ts = TupleStore()
    ts.extend(
        [
            triple("s1", "attached_to", "System_S1"),
            triple("s2", "attached_to", "System_S1"),
            triple("s3", "attached_to", "System_S2"),
        ]
    )
    return ts


def test_mask_layout():
    m = mask(D, H, D, I)
    assert m.value == 0b00_11_00_01 << 24
    assert m.kept == (1, 3) and m.kept_types == (H, I)
    with pytest.raises(RowTooWide):
        mask(*[I] * 17)


def test_gps_constant_match(store):
    out = tree_run([gps(0, 1, (H, D, D), p=iri("attached_to"), o=iri("System_S1")), collect(1, (H,))], store)
    assert sorted(rows(out)) == sorted([(h(iri("s1")),), (h(iri("s2")),)])
    assert out[-1][1].end and sum(r.end for _, r in out) == 1


def test_gps_all_variable(store):
    out = tree_run([gps(0, 1, (H, H, H)), collect(1, (H, H, H))], store)
    assert len(rows(out)) == 3


def test_gps_drop_all(store):
    out = tree_run([gps(0, 1, (D, D, D)), collect(1, ())], store)
    assert rows(out) == [(), (), ()]
    assert out[-1][1] == END


def test_empty_store_only_end_marker():
    out = tree_run([gps(0, 1, (H, H, H)), collect(1, (H, H, H))], TupleStore())
    assert out == [(1, END)]


def _select(row, comparisons, types):
    ts = TupleStore()
    desc = OperatorDescriptor(1, OpType.SELECTION, 2, mask(*types), SelectionParams(tuple(comparisons)))
    tree = OperatorTree([gps(0, 1, types), desc, collect(2, types)], ts)
    sel = tree.ops[1]
    sel.push(row, 0)
    return tree.output


def test_selection_examples():
    r = Row((21.8,), (F,))
    assert _select(r, [Comparison(0, Cmp.GT, Constant(F, 20.0))], (F,))
    assert not _select(Row((5,), (I,)), [Comparison(0, Cmp.NE, Constant(I, 5))], (I,))
    lt = Comparison(0, Cmp.LT, 1)
    assert _select(Row((3, 7), (I, I)), [lt], (I, I))
    assert not _select(Row((7, 3), (I, I)), [lt], (I, I))


def test_selection_rejects_ordering_on_hashes():
    with pytest.raises(TypeMismatch):
        _select(Row((12,), (H,)), [Comparison(0, Cmp.LT, Constant(H, 3))], (H,))


def test_int_float_promotion():
    assert _select(Row((5,), (I,)), [Comparison(0, Cmp.EQ, Constant(F, 5.0))], (I,))


def _join(left, right, la, ra):
    """SLJ over two literal row lists; GPS children are fed by hand."""
    ltypes, rtypes = left[1], right[1]
    out_types = ltypes + rtypes
    # the GPS leaves only fix the child arities; rows are fed by hand
    descs = [
        gps(0, 2, ltypes),
        gps(1, 2, rtypes),
        OperatorDescriptor(2, OpType.SLJ, 3, mask(*out_types), SljParams(la, ra)),
        collect(3, out_types),
    ]
    tree = OperatorTree(descs, TupleStore())
    return tree, tree.ops[2]


def feed(slj, left_rows, right_rows, ltypes, rtypes, order):
    streams = {0: [Row(r, ltypes) for r in left_rows] + [END], 1: [Row(r, rtypes) for r in right_rows] + [END]}
    for child in order:
        slj.push(streams[child].pop(0), child)


def test_slj_examples():
    A, B, C, X, Y = 100, 200, 300, 900, 901
    tree, slj = _join(([], (H, I)), ([], (I, H)), 1, 0)
    feed(slj, [(A, 1), (B, 2)], [(1, X)], (H, I), (I, H), [0, 0, 0, 1, 1])
    assert rows(tree.output) == [(A, 1, 1, X)]

    tree, slj = _join(([], (H, I)), ([], (I, H)), 1, 0)
    feed(slj, [], [(1, X)], (H, I), (I, H), [0, 1, 1])
    assert rows(tree.output) == []

    tree, slj = _join(([], (H, I)), ([], (I, H)), 1, 0)
    feed(slj, [(A, 1), (C, 1)], [(1, X), (1, Y)], (H, I), (I, H), [1, 1, 1, 0, 0, 0])
    assert sorted(rows(tree.output)) == sorted([(A, 1, 1, X), (A, 1, 1, Y), (C, 1, 1, X), (C, 1, 1, Y)])
    assert tree.output[-1][1].end


@given(
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 9)), max_size=8),
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 9)), max_size=8),
    st.randoms(),
)
def test_slj_any_interleaving_matches_nested_loop(left, right, rnd):
    tree, slj = _join(([], (I, I)), ([], (I, I)), 0, 0)
    order = [0] * (len(left) + 1) + [1] * (len(right) + 1)
    rnd.shuffle(order)
    feed(slj, left, right, (I, I), (I, I), order)
    expected = [l + r for l, r in itertools.product(left, right) if l[0] == r[0]]
    assert sorted(rows(tree.output)) == sorted(expected)
    assert sum(r.end for _, r in tree.output) == 1 and tree.output[-1][1].end


def test_slj_too_wide():
    def slj(op_id, parent, width):
        return OperatorDescriptor(op_id, OpType.SLJ, parent, mask(*[H] * min(width, 16)), SljParams(0, 0))

    descs = [gps(i, p, (H, H, H)) for i, p in [(0, 6), (1, 6), (2, 7), (3, 7), (4, 9), (5, 10)]]
    descs += [slj(6, 8, 6), slj(7, 8, 6), slj(8, 9, 12), slj(9, 10, 15), slj(10, 11, 18), collect(11, [H] * 16)]
    with pytest.raises(RowTooWide):
        OperatorTree(descs, TupleStore())


def test_optree_gps_order_and_join_result():
    ts = TupleStore()
    ts.extend(
        [
            triple("n", "observed", "c1"),
            triple("c1", "sev", "Critical"),
            triple("c1", "time", Term.integer(5)),
            triple("c2", "sev", "Critical"),
        ]
    )
    descs = [
        gps(1, 4, (D, D, H), s=None, p=iri("observed")),
        gps(2, 4, (H, D, D), p=iri("sev"), o=iri("Critical")),
        gps(3, 5, (H, D, I), p=iri("time")),
        OperatorDescriptor(4, OpType.SLJ, 5, mask(H, D), SljParams(0, 0)),
        # left is GPS 3 (lower id): columns (c, time) ++ (c)
        OperatorDescriptor(5, OpType.SLJ, 6, mask(D, I, D), SljParams(0, 0)),
        collect(6, (I,)),
    ]
    tree = OperatorTree(descs, ts)
    out = tree.run()
    assert tree.execution_order == [1, 2, 3]
    assert rows(out) == [(5,)]


def test_malformed_trees():
    with pytest.raises(MalformedTree):
        OperatorTree([gps(0, None, (H, H, H))], TupleStore())  # GPS root
    with pytest.raises(MalformedTree):
        OperatorTree([gps(0, 7, (H, H, H)), collect(1, (H, H, H))], TupleStore())  # missing parent
    with pytest.raises(MalformedTree):
        OperatorTree([gps(0, 1, (H, H, H)), gps(1, 2, (H, H, H)), collect(2, (H, H, H))], TupleStore())


# -- aggregates


def agg(spec, *updates):
    s = AggregateState(spec)
    for u in updates:
        s.update(u)
    return s


def test_aggregate_examples():
    assert agg([(AggFunc.COUNT, I)], [None], [None], [None]).emit() == [Term.integer(3)]
    assert agg([(AggFunc.MIN, I)], [5], [3], [9]).emit() == [Term.integer(3)]
    s = agg([(AggFunc.AVG, I)], [10], [20], [30])
    assert (s.columns[0].total, s.columns[0].count) == (60, 3)
    assert s.emit() == [Term.float(20.0)]


def test_merge_examples():
    c = [(AggFunc.COUNT, I)]
    assert agg(c, [None], [None]).merge(agg(c, *[[None]] * 4)).emit() == [Term.integer(6)]
    m = [(AggFunc.MIN, I)]
    assert agg(m, [3]).merge(agg(m, [5])).emit() == [Term.integer(3)]
    a = [(AggFunc.AVG, I)]
    merged = agg(a, [4], [6]).merge(agg(a, [5], [7], [8]))
    assert (merged.columns[0].total, merged.columns[0].count) == (30, 5)
    assert merged.emit() == [Term.float(6.0)]


def test_merge_spec_mismatch():
    with pytest.raises(SpecMismatch):
        AggregateState([(AggFunc.SUM, I)]).merge(AggregateState([(AggFunc.MIN, I)]))


SPEC = [(AggFunc.SUM, I), (AggFunc.COUNT, I), (AggFunc.AVG, I), (AggFunc.MIN, I), (AggFunc.MAX, I)]
states = st.lists(st.integers(-1000, 1000), max_size=6).map(lambda vs: agg(SPEC, *[[v] * 5 for v in vs]))


@given(states, states, states)
def test_merge_associative_commutative(a, b, c):
    assert a.merge(b).state_key() == b.merge(a).state_key()
    assert a.merge(b).merge(c).state_key() == a.merge(b.merge(c)).state_key()


@given(st.lists(st.integers(-1000, 1000), max_size=12), st.integers(0, 12))
def test_split_and_merge_equals_whole(values, cut):
    whole = agg(SPEC, *[[v] * 5 for v in values])
    parts = agg(SPEC, *[[v] * 5 for v in values[:cut]]).merge(agg(SPEC, *[[v] * 5 for v in values[cut:]]))
    assert whole.state_key() == parts.state_key()


def test_aggregate_root_in_tree():
    ts = TupleStore()
    ts.extend([triple(f"s{i}", "v", Term.integer(i)) for i in range(4)])
    descs = [
        gps(0, 1, (D, D, I), p=iri("v")),
        OperatorDescriptor(
            1,
            OpType.AGGREGATE,
            None,
            mask(I, I),
            AggregateParams((AggColumn(AggFunc.COUNT), AggColumn(AggFunc.SUM, 0))),
        ),
    ]
    tree = OperatorTree(descs, ts)
    assert tree.run() == []  # nothing leaves an aggregate root directly
    assert tree.aggregates[1].subtree_state().emit() == [Term.integer(4), Term.integer(6)]
