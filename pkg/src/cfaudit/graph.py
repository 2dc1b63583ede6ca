"""Attribute causal DAG and the graph surgery used by interventions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import CycleError, SchemaError, UnknownAttributeError, UnknownParentError

KINDS = ("binary", "continuous", "categorical")


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    raw_range: tuple[float, float] | None = None
    cardinality: int | None = None
    parents: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        if self.raw_range is not None:
            object.__setattr__(self, "raw_range", (float(self.raw_range[0]), float(self.raw_range[1])))
        if not self.name or not self.name.isidentifier():
            raise SchemaError(f"attribute name {self.name!r} is not an identifier")
        if self.kind not in KINDS:
            raise SchemaError(f"attribute {self.name}: unknown kind {self.kind!r}")
        if self.kind == "continuous":
            if self.raw_range is None or not self.raw_range[0] < self.raw_range[1]:
                raise SchemaError(f"attribute {self.name}: continuous needs raw_range lo < hi")
        if self.kind == "categorical":
            if self.cardinality is None or int(self.cardinality) < 2:
                raise SchemaError(f"attribute {self.name}: categorical needs cardinality >= 2")
        if self.kind == "binary" and self.cardinality not in (None, 2):
            raise SchemaError(f"attribute {self.name}: binary cardinality must be 2")
        if len(set(self.parents)) != len(self.parents):
            raise SchemaError(f"attribute {self.name}: duplicate parents")
        if self.name in self.parents:
            raise SchemaError(f"attribute {self.name}: lists itself as a parent")

    @property
    def levels(self) -> int:
        """Number of discrete values (2 for binary); 0 for continuous."""
        if self.kind == "binary":
            return 2
        if self.kind == "categorical":
            return int(self.cardinality)
        return 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "raw_range": list(self.raw_range) if self.raw_range is not None else None,
            "cardinality": self.cardinality,
            "parents": list(self.parents),
        }


@dataclass(frozen=True)
class CausalGraph:
    attributes: tuple[AttributeSpec, ...]
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "_index", {a.name: a for a in self.attributes})

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def __contains__(self, name) -> bool:
        return name in self._index

    def spec(self, name: str) -> AttributeSpec:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownAttributeError(f"unknown attribute {name!r}") from None

    def parents(self, name: str) -> tuple[str, ...]:
        return self.spec(name).parents

    def children(self, name: str) -> list[str]:
        self.spec(name)
        return [a.name for a in self.attributes if name in a.parents]

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, a.name) for a in self.attributes for p in a.parents]

    def to_dict(self) -> dict:
        return {"attributes": [a.to_dict() for a in self.attributes]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "CausalGraph":
        if set(doc) != {"attributes"}:
            raise SchemaError(f"graph document has unexpected keys {sorted(set(doc) - {'attributes'})}")
        specs = []
        allowed = {"name", "kind", "raw_range", "cardinality", "parents"}
        for entry in doc["attributes"]:
            extra = set(entry) - allowed
            if extra:
                raise SchemaError(f"unknown attribute fields {sorted(extra)}")
            rr = entry.get("raw_range")
            specs.append(
                AttributeSpec(
                    name=entry["name"],
                    kind=entry["kind"],
                    raw_range=tuple(rr) if rr is not None else None,
                    cardinality=entry.get("cardinality"),
                    parents=tuple(entry.get("parents", ())),
                )
            )
        return build_graph(specs)

    @classmethod
    def from_json(cls, text: str) -> "CausalGraph":
        return cls.from_dict(json.loads(text))


def _find_cycle_edge(specs: list[AttributeSpec], remaining: set[str]) -> tuple[str, str]:
    parents = {a.name: [p for p in a.parents if p in remaining] for a in specs if a.name in remaining}
    # every remaining node has a remaining parent, so walking parents must revisit a node
    node = next(a.name for a in specs if a.name in remaining)
    seen = []
    while node not in seen:
        seen.append(node)
        node = parents[node][0]
    # node is a parent of the last visited node and lies on the cycle
    return node, seen[-1]


def build_graph(specs: Iterable[AttributeSpec]) -> CausalGraph:
    """Validate attribute specs and return the DAG they describe."""
    specs = list(specs)
    if not specs:
        raise SchemaError("graph needs at least one attribute")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate attribute names")
    by_name = {s.name: s for s in specs}
    for s in specs:
        for p in s.parents:
            if p not in by_name:
                raise UnknownParentError(f"attribute {s.name}: unknown parent {p!r}")
            pk = by_name[p].kind
            # CPT nodes take discrete parents; linear-Gaussian nodes take numeric ones
            if s.kind == "continuous" and pk == "categorical":
                raise SchemaError(f"continuous attribute {s.name} cannot have categorical parent {p}")
            if s.kind != "continuous" and pk == "continuous":
                raise SchemaError(f"discrete attribute {s.name} cannot have continuous parent {p}")
    graph = CausalGraph(tuple(specs))
    topo_order(graph)
    return graph


def topo_order(graph: CausalGraph) -> list[str]:
    """Kahn's algorithm; ready nodes are released in declaration order."""
    specs = graph.attributes
    indeg = {a.name: len(a.parents) for a in specs}
    done: list[str] = []
    placed: set[str] = set()
    while len(done) < len(specs):
        ready = next((a.name for a in specs if a.name not in placed and indeg[a.name] == 0), None)
        if ready is None:
            remaining = {a.name for a in specs} - placed
            p, c = _find_cycle_edge(list(specs), remaining)
            raise CycleError(f"cycle through edge {p} -> {c}")
        done.append(ready)
        placed.add(ready)
        for a in specs:
            if ready in a.parents:
                indeg[a.name] -= 1
    return done


def descendants(graph: CausalGraph, roots: Iterable[str]) -> set[str]:
    roots = set(roots)
    for r in roots:
        graph.spec(r)
    out: set[str] = set()
    frontier = list(roots)
    while frontier:
        node = frontier.pop()
        for ch in graph.children(node):
            if ch not in out:
                out.add(ch)
                frontier.append(ch)
    return out - roots


def mutilate(graph: CausalGraph, targets: Iterable[str]) -> CausalGraph:
    """Copy of ``graph`` with every incoming edge of ``targets`` removed."""
    targets = set(targets)
    for t in targets:
        graph.spec(t)
    return CausalGraph(
        tuple(replace(a, parents=()) if a.name in targets else a for a in graph.attributes)
    )
