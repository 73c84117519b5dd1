"""Meta paths: a small text syntax, enumeration over a schema, and matching.

The text form alternates one-letter object type codes with bracketed
relation names::

    E-[parent]->E-[report]->N

Whitespace between tokens is ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import IncompatibleEndpoint, MetaPathSyntaxError, TypeMismatch, UnknownType
from .hin import Hin, ObjectType, RelationType, Schema

__all__ = [
    "MetaPath",
    "PathInstance",
    "parse_metapath",
    "format_metapath",
    "inverse_metapath",
    "enumerate_metapaths",
    "match_instances",
    "reachable_targets",
    "read_metapaths",
    "write_metapaths",
]


@dataclass(frozen=True)
class MetaPath:
    relation_types: tuple[RelationType, ...]

    def __post_init__(self):
        rels = tuple(self.relation_types)
        if not rels:
            raise ValueError("a meta path needs at least one relation")
        for i in range(len(rels) - 1):
            if rels[i].target != rels[i + 1].source:
                raise IncompatibleEndpoint(i + 2, f"{rels[i]} does not chain into {rels[i + 1]}")
        object.__setattr__(self, "relation_types", rels)

    @property
    def node_types(self) -> tuple[ObjectType, ...]:
        return (self.relation_types[0].source,) + tuple(r.target for r in self.relation_types)

    @property
    def root(self) -> ObjectType:
        return self.relation_types[0].source

    @property
    def terminal(self) -> ObjectType:
        return self.relation_types[-1].target

    def __len__(self):
        return len(self.relation_types)

    def sort_key(self):
        return (len(self), self.root.name, tuple((r.name, r.target.name) for r in self.relation_types))

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __str__(self):
        return format_metapath(self)


@dataclass(frozen=True)
class PathInstance:
    nodes: tuple[str, ...]
    edges: tuple[str, ...]
    meta: MetaPath

    def __str__(self):
        parts = [self.nodes[0]]
        for e, v in zip(self.edges, self.nodes[1:]):
            parts += [e, v]
        return "·".join(parts)


def format_metapath(mp: MetaPath) -> str:
    out = [mp.root.code]
    for r in mp.relation_types:
        out.append(f"-[{r.name}]->{r.target.code}")
    return "".join(out)


def inverse_metapath(mp: MetaPath, schema: Schema) -> MetaPath:
    return MetaPath(tuple(schema.inverse(r) for r in reversed(mp.relation_types)))


_TOKEN = re.compile(r"\s*(?:(?P<open>-\[)|(?P<close>\]->)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*))")


def _tokens(text):
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            return
        m = _TOKEN.match(text, pos)
        if m is None:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise MetaPathSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        yield kind, m.group(kind), m.start(kind)
        pos = m.end()


def parse_metapath(text: str, schema: Schema) -> MetaPath:
    """Parse ``TYPE ("-[" REL "]->" TYPE)+`` and type-check it against ``schema``."""
    if not text or not text.strip():
        raise MetaPathSyntaxError("empty meta path", 0)
    toks = list(_tokens(text))
    end = len(text)

    def expect(i, kind, what):
        if i >= len(toks):
            raise MetaPathSyntaxError(f"expected {what}, found end of input", end)
        k, val, pos = toks[i]
        if k != kind:
            raise MetaPathSyntaxError(f"expected {what}, found {val!r}", pos)
        return val, pos

    def object_type(i):
        code, pos = expect(i, "ident", "object type")
        try:
            return schema.by_code(code)
        except UnknownType:
            raise UnknownType(f"unknown object type {code!r} at position {pos}") from None

    types = [object_type(0)]
    names = []
    i = 1
    while i < len(toks):
        expect(i, "open", "'-['")
        rel, rpos = expect(i + 1, "ident", "relation name")
        expect(i + 2, "close", "']->'")
        types.append(object_type(i + 3))
        names.append((rel, rpos))
        i += 4
    if not names:
        raise MetaPathSyntaxError("a meta path needs at least one step", end)

    rels = []
    for idx, (name, pos) in enumerate(names, start=1):
        if not schema.has_relation_name(name):
            raise UnknownType(f"unknown relation {name!r} at position {pos}")
        try:
            rels.append(schema.relation(name, types[idx - 1], types[idx]))
        except TypeMismatch:
            raise IncompatibleEndpoint(
                idx, f"{name} is not declared from {types[idx - 1].name} to {types[idx].name}"
            ) from None
    return MetaPath(tuple(rels))


def read_metapaths(source, schema: Schema) -> list[MetaPath]:
    """Read a meta-paths file: one path per line, ``#`` starts a comment line."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    out = []
    for line in lines:
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        out.append(parse_metapath(s, schema))
    return out


def write_metapaths(paths, dest) -> None:
    with open(dest, "w", encoding="utf-8") as fh:
        for mp in paths:
            fh.write(format_metapath(mp) + "\n")


def enumerate_metapaths(
    schema: Schema,
    root: ObjectType,
    max_relations: int,
    allow_backtracking: bool = False,
) -> list[MetaPath]:
    """Every schema-valid meta path from ``root`` with 1..max_relations steps.

    Paths that immediately walk back over the inverse of the previous
    relation are skipped unless ``allow_backtracking``.  Output is sorted by
    length, then by relation/type names.
    """
    if max_relations < 1:
        raise ValueError("max_relations must be >= 1")
    found = []

    def extend(prefix):
        if prefix:
            found.append(MetaPath(tuple(prefix)))
        if len(prefix) == max_relations:
            return
        here = prefix[-1].target if prefix else root
        for r in schema.out_relations(here):
            if prefix and not allow_backtracking and r.key == prefix[-1].inverse_key:
                continue
            prefix.append(r)
            extend(prefix)
            prefix.pop()

    extend([])
    return sorted(found, key=MetaPath.sort_key)


def _check_start(hin: Hin, start: str, mp: MetaPath):
    node = hin.node(start)
    if node.otype != mp.root:
        raise TypeMismatch(f"node {start!r} is {node.otype.name}, meta path starts at {mp.root.name}")


def match_instances(hin: Hin, start: str, mp: MetaPath) -> list[PathInstance]:
    """All path instances of ``mp`` leaving ``start``.

    Interior nodes may repeat; an instance may not end where it started.
    """
    _check_start(hin, start, mp)
    rels = mp.relation_types
    out = []
    nodes = [start]
    edges = []

    def walk(i):
        here = nodes[-1]
        if i == len(rels):
            if here != start:
                out.append(PathInstance(tuple(nodes), tuple(edges), mp))
            return
        for nxt, eid in hin.traversals(here, rels[i]):
            nodes.append(nxt)
            edges.append(eid)
            walk(i + 1)
            nodes.pop()
            edges.pop()

    walk(0)
    return out


def reachable_targets(hin: Hin, start: str, mp: MetaPath) -> frozenset[str]:
    """Distinct terminal nodes of the instances of ``mp`` from ``start``."""
    _check_start(hin, start, mp)
    frontier = {start}
    for r in mp.relation_types:
        nxt = set()
        for v in frontier:
            nxt.update(hin.neighbors(v, r))
        frontier = nxt
        if not frontier:
            break
    frontier.discard(start)
    return frozenset(frontier)
