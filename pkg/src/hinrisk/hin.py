"""Typed heterogeneous information networks.

A :class:`Schema` fixes the object types and the relation types between
them.  A :class:`Hin` is an immutable directed multigraph whose nodes and
edges are typed against a schema.  Each edge is stored once; traversing it
backwards goes through the relation's inverse.

Relations are identified by ``(name, source, target)``, so the same name can
be registered in both directions (``control`` is enterprise->person and
person->enterprise), which is how the meta paths of the SME network read.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
import threading
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import (
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

__all__ = [
    "ObjectType",
    "RelationType",
    "Schema",
    "Node",
    "Edge",
    "Hin",
    "default_sme_schema",
    "load_hin",
    "write_hin",
    "as_of",
    "neighbors",
    "discretize",
]


@dataclass(frozen=True, order=True)
class ObjectType:
    name: str
    code: str = ""

    def __post_init__(self):
        if not self.code:
            object.__setattr__(self, "code", self.name[:1].upper())

    def __str__(self):
        return self.name


@dataclass(frozen=True, order=True)
class RelationType:
    name: str
    source: ObjectType
    target: ObjectType
    inverse_name: str

    @property
    def key(self):
        return (self.name, self.source.name, self.target.name)

    @property
    def inverse_key(self):
        return (self.inverse_name, self.target.name, self.source.name)

    @property
    def self_inverse(self):
        return self.key == self.inverse_key

    def __str__(self):
        return f"{self.source.code}-[{self.name}]->{self.target.code}"


class Schema:
    """Object and relation types, closed under inverses."""

    def __init__(self, object_types: Iterable[ObjectType], relation_types: Iterable[RelationType]):
        object_types = sorted(object_types)
        names = [t.name for t in object_types]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate object type names in {names}")
        codes = [t.code for t in object_types]
        if len(set(codes)) != len(codes):
            raise SchemaError(f"duplicate object type codes in {codes}")
        self._types = {t.name: t for t in object_types}
        self._codes = {t.code: t for t in object_types}

        self._relations: dict[tuple, RelationType] = {}
        for r in relation_types:
            for end in (r.source, r.target):
                if self._types.get(end.name) != end:
                    raise SchemaError(f"relation {r.name} uses unknown object type {end.name}")
            if r.key in self._relations:
                raise SchemaError(f"duplicate relation {r.key}")
            self._relations[r.key] = r
        for r in self._relations.values():
            inv = self._relations.get(r.inverse_key)
            if inv is None:
                raise SchemaError(f"relation {r.key} has no inverse {r.inverse_key}")
            if inv.inverse_key != r.key:
                raise SchemaError(f"inverse of {r.key} is not an involution")

        self.object_types = tuple(object_types)
        self.relation_types = tuple(sorted(self._relations.values()))

    def object_type(self, name: str) -> ObjectType:
        try:
            return self._types[name]
        except KeyError:
            raise UnknownType(f"unknown object type {name!r}") from None

    def by_code(self, code: str) -> ObjectType:
        try:
            return self._codes[code]
        except KeyError:
            raise UnknownType(f"unknown object type code {code!r}") from None

    def has_relation_name(self, name: str) -> bool:
        return any(r.name == name for r in self.relation_types)

    def relation(self, name: str, source, target) -> RelationType:
        src = source.name if isinstance(source, ObjectType) else source
        tgt = target.name if isinstance(target, ObjectType) else target
        r = self._relations.get((name, src, tgt))
        if r is None:
            if not self.has_relation_name(name):
                raise UnknownType(f"unknown relation {name!r}")
            raise TypeMismatch(f"relation {name!r} is not declared from {src} to {tgt}")
        return r

    def inverse(self, rtype: RelationType) -> RelationType:
        return self._relations[rtype.inverse_key]

    def out_relations(self, otype: ObjectType) -> list[RelationType]:
        return [r for r in self.relation_types if r.source == otype]

    def __contains__(self, item):
        if isinstance(item, RelationType):
            return self._relations.get(item.key) == item
        if isinstance(item, ObjectType):
            return self._types.get(item.name) == item
        return False

    def __eq__(self, other):
        if not isinstance(other, Schema):
            return NotImplemented
        return (self.object_types, self.relation_types) == (other.object_types, other.relation_types)

    def __hash__(self):
        return hash((self.object_types, self.relation_types))

    def __repr__(self):
        return f"Schema({len(self.object_types)} object types, {len(self.relation_types)} relation types)"


ENTERPRISE = ObjectType("enterprise", "E")
PERSON = ObjectType("person", "P")
COMMODITY = ObjectType("commodity", "C")
NEWS = ObjectType("news", "N")


def _pair(name, a, b, inverse_name=None):
    """Relation ``name`` from a to b plus its inverse from b to a."""
    inverse_name = inverse_name or name
    return [RelationType(name, a, b, inverse_name), RelationType(inverse_name, b, a, name)]


def default_sme_schema() -> Schema:
    """The four SME object types and their relations.

    ``parent``/``subsidiary`` and ``supply``/``sales`` are mutual inverses
    between enterprises and ``relate`` is its own inverse between persons.
    The enterprise-person relations (including ``boardmember``) and
    ``produce`` carry the same name in both directions.  ``report`` links
    news to enterprises, persons and commodities.
    """
    rels = []
    rels += _pair("parent", ENTERPRISE, ENTERPRISE, "subsidiary")
    rels += _pair("supply", ENTERPRISE, ENTERPRISE, "sales")
    for name in ("control", "shareholder", "manager", "employee", "boardmember"):
        rels += _pair(name, ENTERPRISE, PERSON)
    rels += _pair("produce", ENTERPRISE, COMMODITY)
    for t in (ENTERPRISE, PERSON, COMMODITY):
        rels += _pair("report", t, NEWS)
    rels.append(RelationType("relate", PERSON, PERSON, "relate"))
    return Schema([ENTERPRISE, PERSON, COMMODITY, NEWS], rels)


@dataclass(frozen=True)
class Node:
    id: str
    otype: ObjectType
    attributes: Mapping[str, str] = field(default_factory=dict)
    timestamp: int | None = None
    risk_label: bool | None = None
    label_source: str | None = None


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    rtype: RelationType
    timestamp: int | None = None


class Hin:
    """Immutable typed multigraph with adjacency indexed by (node, relation)."""

    def __init__(self, schema: Schema, nodes: Iterable[Node] = (), edges: Iterable[Edge] = ()):
        self.schema = schema
        node_map: dict[str, Node] = {}
        for n in nodes:
            if n.id in node_map:
                raise DuplicateId(f"duplicate node id {n.id!r}")
            if n.otype not in schema:
                raise UnknownType(f"node {n.id!r} has unknown type {n.otype.name!r}")
            node_map[n.id] = n
        edge_map: dict[str, Edge] = {}
        out_idx: dict[tuple, list] = {}
        in_idx: dict[tuple, list] = {}
        degree: dict[str, int] = dict.fromkeys(node_map, 0)
        for e in edges:
            if e.id in edge_map:
                raise DuplicateId(f"duplicate edge id {e.id!r}")
            if e.rtype not in schema:
                raise UnknownType(f"edge {e.id!r} has unknown relation {e.rtype.key}")
            for end in (e.src, e.dst):
                if end not in node_map:
                    raise DanglingEdge(f"edge {e.id!r} references absent node {end!r}")
            if e.src == e.dst:
                raise SelfLoop(f"edge {e.id!r} is a self loop on {e.src!r}")
            if node_map[e.src].otype != e.rtype.source or node_map[e.dst].otype != e.rtype.target:
                raise TypeMismatch(
                    f"edge {e.id!r} {e.rtype.name} needs {e.rtype.source.name}->{e.rtype.target.name}, "
                    f"got {node_map[e.src].otype.name}->{node_map[e.dst].otype.name}"
                )
            edge_map[e.id] = e
            out_idx.setdefault((e.src, e.rtype.key), []).append((e.dst, e.id))
            in_idx.setdefault((e.dst, e.rtype.key), []).append((e.src, e.id))
            degree[e.src] += 1
            degree[e.dst] += 1
        for lst in out_idx.values():
            lst.sort()
        for lst in in_idx.values():
            lst.sort()

        self.nodes = MappingProxyType(dict(sorted(node_map.items())))
        self.edges = MappingProxyType(dict(sorted(edge_map.items())))
        self._out = out_idx
        self._in = in_idx
        self._degree = degree
        by_type: dict[str, list[str]] = {t.name: [] for t in schema.object_types}
        for nid, n in self.nodes.items():
            by_type[n.otype.name].append(nid)
        self._by_type = {k: tuple(v) for k, v in by_type.items()}
        self._type_pos = {k: {nid: i for i, nid in enumerate(v)} for k, v in self._by_type.items()}
        self._cache: dict = {}
        self._lock = threading.RLock()

    # -- basic queries -------------------------------------------------
    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node {node_id!r}") from None

    def nodes_of_type(self, otype) -> tuple[str, ...]:
        name = otype.name if isinstance(otype, ObjectType) else otype
        return self._by_type[name]

    def type_position(self, otype) -> Mapping[str, int]:
        name = otype.name if isinstance(otype, ObjectType) else otype
        return self._type_pos[name]

    def degree(self, node_id: str) -> int:
        """Number of edges incident on the node, in either stored direction."""
        self.node(node_id)
        return self._degree[node_id]

    def resolve_relation(self, node_id: str, rtype) -> RelationType:
        if isinstance(rtype, RelationType):
            return rtype
        src = self.node(node_id).otype
        matches = [r for r in self.schema.out_relations(src) if r.name == rtype]
        if len(matches) != 1:
            raise UnknownType(f"relation {rtype!r} is not uniquely defined from {src.name}")
        return matches[0]

    def traversals(self, node_id: str, rtype) -> list[tuple[str, str]]:
        """``(neighbor, edge_id)`` pairs reachable from ``node_id`` over ``rtype``.

        Stored edges of ``rtype`` leaving the node are walked forward; stored
        edges of its inverse entering the node are walked backward.
        """
        self.node(node_id)
        r = self.resolve_relation(node_id, rtype)
        out = list(self._out.get((node_id, r.key), ()))
        out += self._in.get((node_id, r.inverse_key), ())
        out.sort()
        return out

    def neighbors(self, node_id: str, rtype) -> frozenset[str]:
        return frozenset(n for n, _ in self.traversals(node_id, rtype))

    def attribute_registry(self, otype) -> dict[str, tuple[str, ...]]:
        levels: dict[str, set] = {}
        for nid in self.nodes_of_type(otype):
            for k, v in self.nodes[nid].attributes.items():
                levels.setdefault(k, set()).add(v)
        return {k: tuple(sorted(v)) for k, v in sorted(levels.items())}

    def labels(self) -> dict[str, bool]:
        return {nid: n.risk_label for nid, n in self.nodes.items() if n.risk_label is not None}

    def with_labels(self, labels: Mapping[str, bool], source: str = "observed") -> "Hin":
        nodes = []
        for nid, n in self.nodes.items():
            if nid in labels:
                n = replace(n, risk_label=bool(labels[nid]), label_source=source)
            nodes.append(n)
        return Hin(self.schema, nodes, self.edges.values())

    # -- matrix views --------------------------------------------------
    def _cached(self, key, build):
        val = self._cache.get(key)
        if val is None:
            with self._lock:
                val = self._cache.get(key)
                if val is None:
                    val = build()
                    self._cache[key] = val
        return val

    def relation_matrix(self, rtype: RelationType) -> sp.csr_matrix:
        """Traversal counts ``W[a, b]`` from source-type to target-type nodes."""
        return self._cached(("W", rtype.key), lambda: self._build_relation_matrix(rtype))

    def _build_relation_matrix(self, r):
        rows, cols = [], []
        spos = self.type_position(r.source)
        tpos = self.type_position(r.target)
        inv_key = r.inverse_key
        for e in self.edges.values():
            k = e.rtype.key
            if k == r.key:
                rows.append(spos[e.src])
                cols.append(tpos[e.dst])
            if k == inv_key:
                rows.append(spos[e.dst])
                cols.append(tpos[e.src])
        shape = (len(spos), len(tpos))
        data = np.ones(len(rows))
        m = sp.csr_matrix((data, (rows, cols)), shape=shape)
        m.sum_duplicates()
        return m

    def degree_vector(self, otype) -> np.ndarray:
        ids = self.nodes_of_type(otype)
        return np.array([self._degree[i] for i in ids], dtype=float)

    # -- identity ------------------------------------------------------
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for n in self.nodes.values():
            attrs = ",".join(f"{k}={v}" for k, v in sorted(n.attributes.items()))
            h.update(f"N|{n.id}|{n.otype.name}|{n.timestamp}|{n.risk_label}|{attrs}\n".encode())
        for e in self.edges.values():
            h.update(f"E|{e.id}|{e.src}|{e.dst}|{e.rtype.key}|{e.timestamp}\n".encode())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Hin):
            return NotImplemented
        return (
            self.schema == other.schema
            and dict(self.nodes) == dict(other.nodes)
            and dict(self.edges) == dict(other.edges)
        )

    __hash__ = None

    def __repr__(self):
        return f"Hin({len(self.nodes)} nodes, {len(self.edges)} edges)"


def neighbors(hin: Hin, node: str, rtype) -> frozenset[str]:
    """All nodes reachable from ``node`` over one ``rtype`` link."""
    return hin.neighbors(node, rtype)


def _in_window(ts, start, end):
    return ts is None or start <= ts <= end


def as_of(hin: Hin, window_start: int, window_end: int) -> Hin:
    """Sub-network of elements timestamped inside the closed window.

    Untimestamped nodes and edges always survive; edges whose endpoint was
    dropped go too.
    """
    if window_start > window_end:
        raise InvalidWindow(f"window start {window_start} is after end {window_end}")
    nodes = [n for n in hin.nodes.values() if _in_window(n.timestamp, window_start, window_end)]
    keep = {n.id for n in nodes}
    edges = [
        e
        for e in hin.edges.values()
        if _in_window(e.timestamp, window_start, window_end) and e.src in keep and e.dst in keep
    ]
    return Hin(hin.schema, nodes, edges)


# ---------------------------------------------------------------------------
# flat-file ingestion


def _rows(source, required, name):
    """Yield ``(line_no, row)`` from a CSV path, file object or row dicts."""
    if source is None:
        return
    if isinstance(source, (str, os.PathLike)):
        label = str(source)
        with open(source, newline="", encoding="utf-8") as fh:
            yield from _csv_rows(fh, required, label)
        return
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        yield from _csv_rows(source, required, name)
        return
    for i, row in enumerate(source):
        for col in required:
            if col not in row:
                raise ParseError(f"missing column {col!r}", name, i + 2, col)
        yield i + 2, row, name


def _csv_rows(fh, required, label):
    reader = csv.DictReader(fh)
    header = reader.fieldnames
    if header is None:
        return
    for col in required:
        if col not in header:
            raise ParseError(f"header lacks column {col!r}", label, 1, col)
    for row in reader:
        yield reader.line_num, row, label


def _timestamp(value, where):
    if value is None:
        return None
    value = str(value).strip()
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"timestamp {value!r} is not an integer", *where) from None


def _as_float(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return None


def discretize(values, n_bins: int = 5) -> list[str]:
    """Quantile-bin numeric values into tokens ``q0 .. q{n_bins-1}``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return []
    cuts = np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
    bins = np.searchsorted(cuts, x, side="right")
    return [f"q{int(b)}" for b in bins]


def load_hin(
    schema: Schema,
    node_records,
    edge_records,
    label_records=None,
    attribute_records=None,
    n_bins: int | None = 5,
) -> Hin:
    """Build a :class:`Hin` from nodes/edges/labels/attributes tables.

    Sources may be CSV paths, open text files or iterables of row dicts.
    Numeric attribute columns (per object type and attribute name) are
    discretized into ``n_bins`` quantile levels; pass ``n_bins=None`` to keep
    raw tokens.
    """
    nodes: dict[str, dict] = {}
    for line, row, src in _rows(node_records, ("id", "type", "timestamp"), "nodes"):
        nid = row["id"].strip()
        if nid in nodes:
            raise DuplicateId(f"duplicate node id {nid!r}", src, line, "id")
        tname = row["type"].strip()
        try:
            otype = schema.object_type(tname)
        except UnknownType:
            raise UnknownType(f"unknown object type {tname!r}", src, line, "type") from None
        nodes[nid] = {
            "otype": otype,
            "timestamp": _timestamp(row.get("timestamp"), (src, line, "timestamp")),
            "attributes": {},
            "risk_label": None,
        }

    raw_attrs: dict[tuple, list] = {}
    for line, row, src in _rows(attribute_records, ("id", "attr_name", "attr_value"), "attributes"):
        nid = row["id"].strip()
        if nid not in nodes:
            raise UnknownNode(f"attribute row for absent node {nid!r} ({src}, line {line}, column 'id')")
        key = (nodes[nid]["otype"].name, row["attr_name"].strip())
        raw_attrs.setdefault(key, []).append((nid, row["attr_value"].strip()))
    for (tname, attr), items in sorted(raw_attrs.items()):
        values = [v for _, v in items]
        nums = [_as_float(v) for v in values]
        if n_bins and all(x is not None for x in nums):
            values = discretize(nums, n_bins)
        for (nid, _), level in zip(items, values):
            nodes[nid]["attributes"][attr] = level

    for line, row, src in _rows(label_records, ("id", "risky"), "labels"):
        nid = row["id"].strip()
        if nid not in nodes:
            raise UnknownNode(f"label for absent node {nid!r} ({src}, line {line}, column 'id')")
        val = str(row["risky"]).strip()
        if val not in ("0", "1"):
            raise ParseError(f"risky must be 0 or 1, got {val!r}", src, line, "risky")
        nodes[nid]["risk_label"] = val == "1"

    edges: list[Edge] = []
    seen: set[str] = set()
    for line, row, src in _rows(edge_records, ("id", "src", "dst", "relation", "timestamp"), "edges"):
        eid = row["id"].strip()
        if eid in seen:
            raise DuplicateId(f"duplicate edge id {eid!r}", src, line, "id")
        seen.add(eid)
        a, b = row["src"].strip(), row["dst"].strip()
        for col, end in (("src", a), ("dst", b)):
            if end not in nodes:
                raise DanglingEdge(f"edge {eid!r} references absent node {end!r}", src, line, col)
        if a == b:
            raise SelfLoop(f"edge {eid!r} is a self loop", src, line, "dst")
        rname = row["relation"].strip()
        if not schema.has_relation_name(rname):
            raise UnknownType(f"unknown relation {rname!r}", src, line, "relation")
        try:
            rtype = schema.relation(rname, nodes[a]["otype"], nodes[b]["otype"])
        except TypeMismatch as exc:
            raise TypeMismatch(str(exc), src, line, "relation") from None
        edges.append(Edge(eid, a, b, rtype, _timestamp(row.get("timestamp"), (src, line, "timestamp"))))

    node_objs = [
        Node(
            nid,
            d["otype"],
            dict(sorted(d["attributes"].items())),
            d["timestamp"],
            d["risk_label"],
            "observed" if d["risk_label"] is not None else None,
        )
        for nid, d in nodes.items()
    ]
    return Hin(schema, node_objs, edges)


def write_hin(hin: Hin, directory) -> dict[str, str]:
    """Write the four CSV files consumed by :func:`load_hin`."""
    os.makedirs(directory, exist_ok=True)
    paths = {k: os.path.join(directory, f"{k}.csv") for k in ("nodes", "attributes", "edges", "labels")}

    def ts(v):
        return "" if v is None else str(v)

    with open(paths["nodes"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "type", "timestamp"])
        for n in hin.nodes.values():
            w.writerow([n.id, n.otype.name, ts(n.timestamp)])
    with open(paths["attributes"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "attr_name", "attr_value"])
        for n in hin.nodes.values():
            for k, v in sorted(n.attributes.items()):
                w.writerow([n.id, k, v])
    with open(paths["edges"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "src", "dst", "relation", "timestamp"])
        for e in hin.edges.values():
            w.writerow([e.id, e.src, e.dst, e.rtype.name, ts(e.timestamp)])
    with open(paths["labels"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "risky"])
        for n in hin.nodes.values():
            if n.risk_label is not None and n.label_source in (None, "observed"):
                w.writerow([n.id, int(n.risk_label)])
    return paths
