"""Causal graph model: acyclic node-link structure with treatment/outcome
designation and exact variable-type classification.

Graphs are immutable values; every mutation returns a new ``CausalDag`` and a
rejected mutation leaves the original untouched. Classification works on
reachability (transitive ancestors/descendants), so chains such as
``X -> W -> T`` with ``X -> Y`` still mark ``X`` as a confounder.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import (
    CycleError,
    DuplicateEdgeError,
    MissingDesignationError,
    ParseError,
    RoleConflictError,
    SchemaError,
    UnknownNodeError,
)


class NodeClass(str, Enum):
    TREATMENT = "treatment"
    OUTCOME = "outcome"
    CONFOUNDER = "confounder"
    MEDIATOR = "mediator"
    COLLIDER = "collider"
    PROGNOSTIC = "prognostic"
    UNCLASSIFIED = "unclassified"


def _clean_name(name: object) -> str:
    if not isinstance(name, str):
        raise SchemaError(f"node name must be a string, got {type(name).__name__}")
    cleaned = name.strip()
    if not cleaned:
        raise SchemaError("node name is empty")
    return cleaned


def _norm_layout(pairs: Iterable[tuple[str, tuple[float, float]]]) -> tuple[tuple[str, tuple[float, float]], ...]:
    # Canonical (sorted) order so structural equality ignores insertion order.
    return tuple(sorted(pairs))


@dataclass(frozen=True)
class CausalDag:
    """Directed acyclic graph of named variables.

    ``layout`` holds optional per-node canvas coordinates; they round-trip
    through JSON but carry no semantics in the engine.
    """

    nodes: frozenset[str] = frozenset()
    edges: frozenset[tuple[str, str]] = frozenset()
    treatment: str | None = None
    outcome: str | None = None
    layout: tuple[tuple[str, tuple[float, float]], ...] = ()

    # --- construction -----------------------------------------------------

    @classmethod
    def build(
        cls,
        nodes: Iterable[str] = (),
        edges: Iterable[tuple[str, str]] = (),
        treatment: str | None = None,
        outcome: str | None = None,
        layout: Mapping[str, tuple[float, float]] | None = None,
    ) -> "CausalDag":
        dag = cls()
        for name in nodes:
            dag = dag.with_node(name)
        for source, target in edges:
            dag = dag.with_edge(source, target)
        if treatment is not None:
            dag = dag.with_treatment(treatment)
        if outcome is not None:
            dag = dag.with_outcome(outcome)
        if layout:
            for name, (x, y) in layout.items():
                dag = dag.with_position(name, x, y)
        return dag

    # --- views --------------------------------------------------------------

    @property
    def layout_map(self) -> dict[str, tuple[float, float]]:
        return dict(self.layout)

    def parents(self, node: str) -> set[str]:
        return {s for s, t in self.edges if t == node}

    def children(self, node: str) -> set[str]:
        return {t for s, t in self.edges if s == node}

    def ancestors(self, node: str) -> set[str]:
        """All nodes with a directed path to ``node`` (excluding itself)."""
        return self._reach(node, forward=False)

    def descendants(self, node: str) -> set[str]:
        """All nodes reachable from ``node`` by a directed path (excluding itself)."""
        return self._reach(node, forward=True)

    def _reach(self, start: str, forward: bool, skip: str | None = None) -> set[str]:
        if start not in self.nodes:
            raise UnknownNodeError(f"unknown node {start!r}")
        step = self.children if forward else self.parents
        seen: set[str] = set()
        queue = deque([start])
        while queue:
            current = queue.popleft()
            for nxt in step(current):
                if nxt == skip or nxt in seen:
                    continue
                seen.add(nxt)
                queue.append(nxt)
        seen.discard(start)
        return seen

    # --- mutations (each returns a new graph) -------------------------------

    def with_node(self, name: str, x: float | None = None, y: float | None = None) -> "CausalDag":
        name = _clean_name(name)
        layout = self.layout
        if x is not None and y is not None:
            layout = _norm_layout(
                tuple((n, p) for n, p in self.layout if n != name) + ((name, (float(x), float(y))),)
            )
        return CausalDag(self.nodes | {name}, self.edges, self.treatment, self.outcome, layout)

    def without_node(self, name: str) -> "CausalDag":
        if name not in self.nodes:
            raise UnknownNodeError(f"unknown node {name!r}")
        edges = frozenset(e for e in self.edges if name not in e)
        return CausalDag(
            self.nodes - {name},
            edges,
            None if self.treatment == name else self.treatment,
            None if self.outcome == name else self.outcome,
            tuple((n, p) for n, p in self.layout if n != name),
        )

    def with_edge(self, source: str, target: str) -> "CausalDag":
        for name in (source, target):
            if name not in self.nodes:
                raise UnknownNodeError(f"unknown node {name!r}")
        if source == target:
            raise CycleError(f"self edge {source!r} -> {target!r}")
        if (source, target) in self.edges:
            raise DuplicateEdgeError(f"edge {source!r} -> {target!r} already present")
        # A new edge source -> target closes a cycle iff source is reachable
        # from target.
        if source in self._reach(target, forward=True) | {target}:
            raise CycleError(f"edge {source!r} -> {target!r} would close a cycle")
        return CausalDag(self.nodes, self.edges | {(source, target)}, self.treatment, self.outcome, self.layout)

    def without_edge(self, source: str, target: str) -> "CausalDag":
        if (source, target) not in self.edges:
            raise UnknownNodeError(f"edge {source!r} -> {target!r} not present")
        return CausalDag(self.nodes, self.edges - {(source, target)}, self.treatment, self.outcome, self.layout)

    def with_treatment(self, node: str) -> "CausalDag":
        if node not in self.nodes:
            raise UnknownNodeError(f"unknown node {node!r}")
        if node == self.outcome:
            raise RoleConflictError(f"{node!r} is already the outcome")
        return CausalDag(self.nodes, self.edges, node, self.outcome, self.layout)

    def with_outcome(self, node: str) -> "CausalDag":
        if node not in self.nodes:
            raise UnknownNodeError(f"unknown node {node!r}")
        if node == self.treatment:
            raise RoleConflictError(f"{node!r} is already the treatment")
        return CausalDag(self.nodes, self.edges, self.treatment, node, self.layout)

    def with_position(self, node: str, x: float, y: float) -> "CausalDag":
        if node not in self.nodes:
            raise UnknownNodeError(f"unknown node {node!r}")
        layout = _norm_layout(
            tuple((n, p) for n, p in self.layout if n != node) + ((node, (float(x), float(y))),)
        )
        return CausalDag(self.nodes, self.edges, self.treatment, self.outcome, layout)


def add_edge(dag: CausalDag, source: str, target: str) -> CausalDag:
    return dag.with_edge(source, target)


def set_treatment(dag: CausalDag, node: str) -> CausalDag:
    return dag.with_treatment(node)


def set_outcome(dag: CausalDag, node: str) -> CausalDag:
    return dag.with_outcome(node)


# --- classification -----------------------------------------------------------


@dataclass(frozen=True)
class ClassificationResult:
    """Exactly one class per node, plus sorted projections of the four
    adjustment-relevant classes."""

    classes: Mapping[str, NodeClass]
    confounders: tuple[str, ...] = field(default=())
    colliders: tuple[str, ...] = field(default=())
    mediators: tuple[str, ...] = field(default=())
    prognostics: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "classes": {name: cls.value for name, cls in sorted(self.classes.items())},
            "confounders": list(self.confounders),
            "colliders": list(self.colliders),
            "mediators": list(self.mediators),
            "prognostics": list(self.prognostics),
        }


def classify(dag: CausalDag) -> ClassificationResult:
    """Assign a :class:`NodeClass` to every node.

    Requires both designations. With T = treatment and Y = outcome, for every
    other node v:

    * mediator:   v is a descendant of T and an ancestor of Y
    * confounder: v is an ancestor of T and has a directed path to Y that
      avoids T
    * collider:   v is a descendant of both T and Y
    * prognostic: v is an ancestor of Y but neither an ancestor nor a
      descendant of T
    * otherwise unclassified

    The five cases are mutually exclusive in an acyclic graph.
    """
    if dag.treatment is None or dag.outcome is None:
        raise MissingDesignationError("treatment and outcome must both be set")
    t, y = dag.treatment, dag.outcome
    anc_t = dag.ancestors(t)
    desc_t = dag.descendants(t)
    anc_y = dag.ancestors(y)
    desc_y = dag.descendants(y)
    # Nodes with a directed path to Y in the graph with T removed.
    to_y_avoiding_t = dag._reach(y, forward=False, skip=t)

    classes: dict[str, NodeClass] = {t: NodeClass.TREATMENT, y: NodeClass.OUTCOME}
    for node in dag.nodes - {t, y}:
        if node in desc_t and node in anc_y:
            classes[node] = NodeClass.MEDIATOR
        elif node in anc_t and node in to_y_avoiding_t:
            classes[node] = NodeClass.CONFOUNDER
        elif node in desc_t and node in desc_y:
            classes[node] = NodeClass.COLLIDER
        elif node in anc_y and node not in anc_t and node not in desc_t:
            classes[node] = NodeClass.PROGNOSTIC
        else:
            classes[node] = NodeClass.UNCLASSIFIED

    def names(cls: NodeClass) -> tuple[str, ...]:
        return tuple(sorted(n for n, c in classes.items() if c is cls))

    return ClassificationResult(
        classes=classes,
        confounders=names(NodeClass.CONFOUNDER),
        colliders=names(NodeClass.COLLIDER),
        mediators=names(NodeClass.MEDIATOR),
        prognostics=names(NodeClass.PROGNOSTIC),
    )


# --- JSON import / export ------------------------------------------------------


def export_dag_json(dag: CausalDag) -> dict:
    """Serialize to the canonical document schema.

    Nodes and links are sorted so identical graphs export identical documents.
    """
    layout = dag.layout_map
    nodes = []
    for name in sorted(dag.nodes):
        entry: dict = {"name": name}
        if name in layout:
            entry["x"], entry["y"] = layout[name]
        nodes.append(entry)
    return {
        "nodes": nodes,
        "links": [{"source": s, "target": t} for s, t in sorted(dag.edges)],
        "treatment": dag.treatment,
        "outcome": dag.outcome,
    }


def _as_document(document: object) -> dict:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("document must be a JSON object")
    return document


def import_dag_json(document: object) -> CausalDag:
    """Parse the canonical schema back into a graph (inverse of export)."""
    doc = _as_document(document)
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list):
        raise SchemaError('missing or invalid "nodes" list')
    dag = CausalDag()
    for entry in raw_nodes:
        if not isinstance(entry, dict) or "name" not in entry:
            raise SchemaError('each node needs a "name"')
        x, y = entry.get("x"), entry.get("y")
        dag = dag.with_node(entry["name"], x, y)
    dag = _import_links(dag, doc)
    treatment, outcome = doc.get("treatment"), doc.get("outcome")
    if treatment is not None:
        dag = dag.with_treatment(_clean_name(treatment))
    if outcome is not None:
        dag = dag.with_outcome(_clean_name(outcome))
    return dag


def import_node_link(document: object) -> CausalDag:
    """Accept the common node-link convention: nodes carry "id" (or "name"),
    links may be called "edges". Designations are not imported."""
    doc = _as_document(document)
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list):
        raise SchemaError('missing or invalid "nodes" list')
    dag = CausalDag()
    for entry in raw_nodes:
        if isinstance(entry, dict):
            name = entry.get("id", entry.get("name"))
            if name is None:
                raise SchemaError('each node needs an "id" or "name"')
            dag = dag.with_node(str(name), entry.get("x"), entry.get("y"))
        elif isinstance(entry, str):
            dag = dag.with_node(entry)
        else:
            raise SchemaError("node entries must be objects or strings")
    return _import_links(dag, doc)


def _import_links(dag: CausalDag, doc: dict) -> CausalDag:
    links = doc.get("links", doc.get("edges", []))
    if not isinstance(links, list):
        raise SchemaError('"links" must be a list')
    for entry in links:
        if isinstance(entry, dict):
            source, target = entry.get("source"), entry.get("target")
        elif isinstance(entry, (list, tuple)) and len(entry) == 2:
            source, target = entry
        else:
            raise SchemaError("links must be objects or [source, target] pairs")
        if source is None or target is None:
            raise SchemaError('each link needs "source" and "target"')
        try:
            dag = dag.with_edge(str(source), str(target))
        except DuplicateEdgeError:
            continue
    return dag
