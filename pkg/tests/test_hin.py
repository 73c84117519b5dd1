import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SCHEMA, random_hin
from hinrisk.errors import (
    DanglingEdge,
    DuplicateId,
    InvalidWindow,
    ParseError,
    SchemaError,
    SelfLoop,
    TypeMismatch,
    UnknownNode,
    UnknownType,
)
from hinrisk.hin import (
    Edge,
    Hin,
    Node,
    ObjectType,
    RelationType,
    Schema,
    as_of,
    default_sme_schema,
    discretize,
    load_hin,
    neighbors,
    write_hin,
)
from hinrisk.oracles import oracle_neighbors
from hinrisk.synthgen import figure3_fixture

seeds = st.integers(0, 2**31 - 1)


# -- schema ------------------------------------------------------------------


def test_default_schema_has_four_object_types():
    s = default_sme_schema()
    assert [t.name for t in s.object_types] == ["commodity", "enterprise", "news", "person"]


def test_parent_subsidiary_are_mutual_inverses():
    s = default_sme_schema()
    parent = s.relation("parent", "enterprise", "enterprise")
    sub = s.inverse(parent)
    assert sub.name == "subsidiary"
    assert s.inverse(sub) == parent


def test_supply_sales_and_relate():
    s = default_sme_schema()
    assert s.inverse(s.relation("supply", "enterprise", "enterprise")).name == "sales"
    relate = s.relation("relate", "person", "person")
    assert relate.self_inverse and s.inverse(relate) == relate


def test_boardmember_present_both_ways():
    s = default_sme_schema()
    s.relation("boardmember", "enterprise", "person")
    s.relation("boardmember", "person", "enterprise")


def test_every_relation_has_involutive_inverse():
    s = default_sme_schema()
    for r in s.relation_types:
        inv = s.inverse(r)
        assert (inv.source, inv.target) == (r.target, r.source)
        assert s.inverse(inv) == r


def test_schema_rejects_missing_inverse():
    a = ObjectType("a", "A")
    b = ObjectType("b", "B")
    with pytest.raises(SchemaError):
        Schema([a, b], [RelationType("x", a, b, "y")])


def test_schema_rejects_unknown_endpoint_and_duplicates():
    a = ObjectType("a", "A")
    b = ObjectType("b", "B")
    with pytest.raises(SchemaError):
        Schema([a], [RelationType("x", a, b, "x"), RelationType("x", b, a, "x")])
    with pytest.raises(SchemaError):
        Schema([a, ObjectType("a", "Z")], [])


# -- construction and loading --------------------------------------------------


def test_figure3_types():
    g = figure3_fixture()
    assert len(g.nodes) == 13 and len(g.edges) == 13
    assert g.node("v1").otype.name == "enterprise"
    assert g.edges["e1"].rtype.name == "parent"


def test_figure3_neighbors_parent():
    g = figure3_fixture()
    assert neighbors(g, "v1", "parent") == {"v2"}
    assert neighbors(g, "v2", "subsidiary") == {"v1"}


def test_isolated_node_has_no_neighbors():
    g = Hin(SCHEMA, [Node("a", SCHEMA.object_type("enterprise"))])
    for r in SCHEMA.out_relations(SCHEMA.object_type("enterprise")):
        assert neighbors(g, "a", r) == frozenset()


def test_unknown_node_query():
    with pytest.raises(UnknownNode):
        figure3_fixture().neighbors("v99", "parent")


def test_empty_sources():
    g = load_hin(SCHEMA, [], [], [])
    assert len(g.nodes) == 0 and len(g.edges) == 0


NODES_CSV = "id,type,timestamp\nv1,enterprise,\nv2,enterprise,3\nv3,person,\n"


def test_dangling_edge_reports_location():
    edges = "id,src,dst,relation,timestamp\ne1,v1,v2,parent,\ne2,v1,v99,parent,\n"
    with pytest.raises(DanglingEdge) as exc:
        load_hin(SCHEMA, io.StringIO(NODES_CSV), io.StringIO(edges))
    assert exc.value.line == 3 and exc.value.column == "dst"
    assert "v99" in str(exc.value)


def test_unknown_type_reports_row():
    nodes = "id,type,timestamp\nv1,enterprise,\nv2,bank,\n"
    with pytest.raises(UnknownType) as exc:
        load_hin(SCHEMA, io.StringIO(nodes), [])
    assert exc.value.line == 3 and exc.value.column == "type"


def test_unknown_relation_and_type_mismatch():
    bad_rel = "id,src,dst,relation,timestamp\ne1,v1,v2,owns,\n"
    with pytest.raises(UnknownType) as exc:
        load_hin(SCHEMA, io.StringIO(NODES_CSV), io.StringIO(bad_rel))
    assert exc.value.column == "relation"
    mismatch = "id,src,dst,relation,timestamp\ne1,v1,v3,parent,\n"
    with pytest.raises(TypeMismatch) as exc:
        load_hin(SCHEMA, io.StringIO(NODES_CSV), io.StringIO(mismatch))
    assert exc.value.line == 2


def test_duplicate_ids():
    nodes = NODES_CSV + "v1,person,\n"
    with pytest.raises(DuplicateId) as exc:
        load_hin(SCHEMA, io.StringIO(nodes), [])
    assert exc.value.line == 5
    edges = "id,src,dst,relation,timestamp\ne1,v1,v2,parent,\ne1,v1,v2,supply,\n"
    with pytest.raises(DuplicateId):
        load_hin(SCHEMA, io.StringIO(NODES_CSV), io.StringIO(edges))


def test_self_loop_rejected():
    edges = "id,src,dst,relation,timestamp\ne1,v1,v1,supply,\n"
    with pytest.raises(SelfLoop):
        load_hin(SCHEMA, io.StringIO(NODES_CSV), io.StringIO(edges))


def test_bad_timestamp_and_label():
    nodes = "id,type,timestamp\nv1,enterprise,yesterday\n"
    with pytest.raises(ParseError) as exc:
        load_hin(SCHEMA, io.StringIO(nodes), [])
    assert exc.value.column == "timestamp"
    with pytest.raises(ParseError):
        load_hin(SCHEMA, io.StringIO(NODES_CSV), [], io.StringIO("id,risky\nv1,yes\n"))


def test_missing_header_column():
    with pytest.raises(ParseError) as exc:
        load_hin(SCHEMA, io.StringIO("id,type\nv1,enterprise\n"), [])
    assert exc.value.line == 1


def test_labels_and_attributes_attach():
    attrs = "id,attr_name,attr_value\nv1,sector,retail\nv2,sector,mining\n"
    g = load_hin(SCHEMA, io.StringIO(NODES_CSV), [], io.StringIO("id,risky\nv1,1\nv2,0\n"), io.StringIO(attrs))
    assert g.node("v1").risk_label is True and g.node("v2").risk_label is False
    assert g.node("v3").risk_label is None
    assert g.node("v1").attributes == {"sector": "retail"}
    assert g.attribute_registry("enterprise") == {"sector": ("mining", "retail")}


def test_numeric_attributes_are_discretized():
    assert discretize([1, 2, 3, 4, 5, 6, 7, 8, 9, 10], 5) == [
        "q0", "q0", "q1", "q1", "q2", "q2", "q3", "q3", "q4", "q4"
    ]
    assert discretize([]) == []


# -- time windows ----------------------------------------------------------


def _timed_fixture():
    E = SCHEMA.object_type("enterprise")
    nodes = [Node(f"a{i}", E) for i in range(6)]
    sup = SCHEMA.relation("supply", E, E)
    times = [1, 2, 3, 2, None]
    edges = [Edge(f"e{i}", f"a{i}", f"a{i + 1}", sup, t) for i, t in enumerate(times)]
    return Hin(SCHEMA, nodes, edges)


def test_as_of_hand_example():
    g = as_of(_timed_fixture(), 2, 3)
    assert sorted(g.edges) == ["e1", "e2", "e3", "e4"]
    assert {g.edges[e].timestamp for e in g.edges} == {2, 3, None}


def test_as_of_identity_window():
    g = _timed_fixture()
    assert as_of(g, 0, 100) == g


def test_as_of_excluding_all_timestamped():
    g = as_of(_timed_fixture(), 50, 60)
    assert list(g.edges) == ["e4"]


def test_as_of_invalid_window():
    with pytest.raises(InvalidWindow):
        as_of(_timed_fixture(), 3, 2)


def test_as_of_drops_edges_of_dropped_nodes():
    E = SCHEMA.object_type("enterprise")
    g = Hin(
        SCHEMA,
        [Node("a", E, timestamp=1), Node("b", E)],
        [Edge("e", "a", "b", SCHEMA.relation("supply", E, E))],
    )
    h = as_of(g, 5, 9)
    assert list(h.nodes) == ["b"] and not h.edges


@given(seeds, st.integers(0, 9), st.integers(0, 9))
def test_as_of_idempotent(seed, a, b):
    g = random_hin(seed, timestamps=True)
    lo, hi = min(a, b), max(a, b)
    once = as_of(g, lo, hi)
    assert as_of(once, lo, hi) == once
    for e in once.edges.values():
        assert e.timestamp is None or lo <= e.timestamp <= hi
        assert e.src in once.nodes and e.dst in once.nodes


# -- properties --------------------------------------------------------------


@given(seeds)
def test_type_safety(seed):
    g = random_hin(seed)
    for e in g.edges.values():
        assert g.nodes[e.src].otype == e.rtype.source
        assert g.nodes[e.dst].otype == e.rtype.target


@given(seeds)
def test_inverse_closure(seed):
    g = random_hin(seed)
    for a in g.nodes:
        for r in SCHEMA.out_relations(g.nodes[a].otype):
            for b in g.neighbors(a, r):
                assert a in g.neighbors(b, SCHEMA.inverse(r))


@given(seeds)
def test_neighbors_match_edge_scan(seed):
    g = random_hin(seed, max_nodes=50, max_edges=120)
    for a in g.nodes:
        for r in SCHEMA.out_relations(g.nodes[a].otype):
            assert set(g.neighbors(a, r)) == oracle_neighbors(g, a, r)


@given(seed=seeds)
def test_csv_round_trip_and_load_determinism(tmp_path_factory, seed):
    g = random_hin(seed, timestamps=True, labels=True)
    d = tmp_path_factory.mktemp("hin")
    p = write_hin(g, d)
    args = (SCHEMA, p["nodes"], p["edges"], p["labels"], p["attributes"])
    first = load_hin(*args)
    second = load_hin(*args)
    assert first == g
    assert second == first and second.fingerprint() == first.fingerprint()


def test_edges_stored_once():
    g = figure3_fixture()
    assert g.degree("v1") == 5
    assert sum(g.degree(n) for n in g.nodes) == 2 * len(g.edges)
