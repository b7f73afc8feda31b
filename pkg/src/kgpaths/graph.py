"""Knowledge-graph storage, loading, neighborhood expansion, and edits.

Entities and relations are interned to dense integer ids in first-come
order. The base graph is immutable after loading; all per-query state
(working node/edge sets, soft edge multipliers, refutations) lives on
:class:`Subgraph` values owned by a single query episode.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import EditError, ParseError, UnknownEntityError, UnknownRelationError

# sigmoid(+/-4): default soft multipliers for confirmed / refuted triples.
# Confirmation roughly halves effective traversal cost; refutation leaves the
# cost nearly unchanged and relies on the verifier hard gate instead.
CONFIRM_MULTIPLIER = 1.0 / (1.0 + math.exp(-4.0))
REFUTE_MULTIPLIER = 1.0 / (1.0 + math.exp(4.0))


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass(frozen=True)
class SeedCandidate:
    """An entity-linked seed with its link confidence in [0, 1]."""

    entity: int
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"seed confidence {self.confidence} outside [0, 1]")


# --- graph edits ---------------------------------------------------------
# Defined here (rather than in the loop module) because apply_edits consumes
# them; the diagnostic mapper in kgpaths.loop produces them.


@dataclass(frozen=True)
class ExpandSeed:
    entity: int
    radius: int = 1


@dataclass(frozen=True)
class PruneEdge:
    triple: Triple


@dataclass(frozen=True)
class ConfirmTriple:
    triple: Triple
    multiplier: float = CONFIRM_MULTIPLIER


@dataclass(frozen=True)
class RefuteTriple:
    triple: Triple
    multiplier: float = REFUTE_MULTIPLIER


@dataclass(frozen=True)
class SwapSeed:
    old_entity: int
    new_entity: int
    radius: int = 1


GraphEdit = ExpandSeed | PruneEdge | ConfirmTriple | RefuteTriple | SwapSeed


class KnowledgeGraph:
    """Interned triple store with typed out-adjacency and relation priors.

    Immutable after construction; safe for concurrent readers.
    """

    def __init__(self):
        self.entity_labels: list[str] = []
        self._entity_ids: dict[str, int] = {}
        self.relation_labels: list[str] = []
        self._relation_ids: dict[str, int] = {}
        self.relation_frequency: list[int] = []
        self.triples: set[Triple] = set()
        self.out_adj: list[list[tuple[int, int]]] = []  # entity -> [(relation, tail)]
        self._prior_cost: list[float] = []

    # -- interning -----------------------------------------------------

    def _intern_entity(self, label: str) -> int:
        eid = self._entity_ids.get(label)
        if eid is None:
            eid = len(self.entity_labels)
            self._entity_ids[label] = eid
            self.entity_labels.append(label)
            self.out_adj.append([])
        return eid

    def _intern_relation(self, label: str) -> int:
        rid = self._relation_ids.get(label)
        if rid is None:
            rid = len(self.relation_labels)
            self._relation_ids[label] = rid
            self.relation_labels.append(label)
            self.relation_frequency.append(0)
            self._prior_cost.append(0.0)
        return rid

    # -- lookups ---------------------------------------------------------

    @property
    def num_entities(self) -> int:
        return len(self.entity_labels)

    @property
    def num_relations(self) -> int:
        return len(self.relation_labels)

    def entity_id(self, label: str) -> int:
        try:
            return self._entity_ids[label]
        except KeyError:
            raise UnknownEntityError(f"unknown entity: {label!r}") from None

    def relation_id(self, label: str) -> int:
        try:
            return self._relation_ids[label]
        except KeyError:
            raise UnknownRelationError(f"unknown relation: {label!r}") from None

    def has_entity(self, label: str) -> bool:
        return label in self._entity_ids

    def has_relation(self, label: str) -> bool:
        return label in self._relation_ids

    def prior_cost(self, relation: int) -> float:
        return self._prior_cost[relation]

    def set_prior_cost(self, relation: int, cost: float) -> None:
        if not 0.0 <= cost <= 1.0:
            raise ValueError(f"prior cost {cost} outside [0, 1]")
        self._prior_cost[relation] = cost

    def out_degree(self, entity: int) -> int:
        return len(self.out_adj[entity])

    def triple_labels(self, t: Triple) -> tuple[str, str, str]:
        return (
            self.entity_labels[t.head],
            self.relation_labels[t.relation],
            self.entity_labels[t.tail],
        )

    # -- construction ------------------------------------------------------

    def add_triple(self, head: str, relation: str, tail: str) -> Triple:
        h = self._intern_entity(head)
        r = self._intern_relation(relation)
        t = self._intern_entity(tail)
        triple = Triple(h, r, t)
        self.relation_frequency[r] += 1
        if triple not in self.triples:
            self.triples.add(triple)
            self.out_adj[h].append((r, t))
        return triple

    def finalize(self) -> None:
        """Sort adjacency for deterministic traversal and derive default
        relation priors from frequency (rare relations cost more)."""
        for adj in self.out_adj:
            adj.sort()
        max_freq = max(self.relation_frequency, default=0)
        if max_freq > 0:
            self._prior_cost = [
                1.0 - f / max_freq for f in self.relation_frequency
            ]


def load_triples(source, add_inverse: bool = False) -> KnowledgeGraph:
    """Load a TSV triple stream: one ``head<TAB>relation<TAB>tail`` per line.

    ``source`` may be a path or an iterable of lines. Duplicate lines are
    stored once but still count toward relation frequency. With
    ``add_inverse``, every triple also materializes ``tail r⁻¹ head``.
    """
    graph = KnowledgeGraph()
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8") as fh:
            _load_lines(graph, fh, add_inverse)
    else:
        _load_lines(graph, source, add_inverse)
    graph.finalize()
    return graph


def _load_lines(graph: KnowledgeGraph, lines: Iterable[str], add_inverse: bool) -> None:
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"expected 3 tab-separated fields, got {len(fields)}", lineno
            )
        head, relation, tail = fields
        graph.add_triple(head, relation, tail)
        if add_inverse:
            graph.add_triple(tail, relation + "⁻¹", head)


def load_prior_overrides(graph: KnowledgeGraph, source) -> None:
    """Apply a relation-prior override TSV: ``relation<TAB>prior_cost``."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        fh = open(source, encoding="utf-8")
        close = True
    else:
        fh, close = source, False
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError("expected relation<TAB>prior_cost", lineno)
            label, cost = fields
            graph.set_prior_cost(graph.relation_id(label), float(cost))
    finally:
        if close:
            fh.close()


@dataclass
class Subgraph:
    """A per-query working view onto a parent :class:`KnowledgeGraph`.

    Tracks node/edge provenance (the round at which each element entered),
    soft edge multipliers, and the episode's confirmed/refuted triples.
    Mutated only by its owning query loop.
    """

    graph: KnowledgeGraph
    nodes: set[int] = field(default_factory=set)
    edges: set[Triple] = field(default_factory=set)
    node_provenance: dict[int, int] = field(default_factory=dict)
    edge_provenance: dict[Triple, int] = field(default_factory=dict)
    soft: dict[Triple, float] = field(default_factory=dict)
    confirmed: set[Triple] = field(default_factory=set)
    refuted: set[Triple] = field(default_factory=set)
    pruned: set[Triple] = field(default_factory=set)
    warnings: list[str] = field(default_factory=list)

    def multiplier(self, triple: Triple) -> float:
        return self.soft.get(triple, 0.0)

    def out_edges(self, entity: int) -> list[Triple]:
        result = []
        for r, t in self.graph.out_adj[entity]:
            triple = Triple(entity, r, t)
            if triple in self.edges:
                result.append(triple)
        return result

    def add_node(self, entity: int, round_index: int) -> None:
        if entity not in self.nodes:
            self.nodes.add(entity)
            self.node_provenance[entity] = round_index

    def add_edge(self, triple: Triple, round_index: int) -> None:
        if triple not in self.edges and triple not in self.pruned:
            self.edges.add(triple)
            self.edge_provenance[triple] = round_index

    def induce_edges(self, round_index: int) -> None:
        """Add every parent-graph edge whose endpoints are both present."""
        for u in self.nodes:
            for r, t in self.graph.out_adj[u]:
                if t in self.nodes:
                    self.add_edge(Triple(u, r, t), round_index)

    def to_json(self) -> str:
        """Debug dump: nodes, edges, and provenance."""
        payload = {
            "nodes": [
                {
                    "id": n,
                    "label": self.graph.entity_labels[n],
                    "round": self.node_provenance.get(n, 0),
                }
                for n in sorted(self.nodes)
            ],
            "edges": [
                {
                    "head": self.graph.entity_labels[e.head],
                    "relation": self.graph.relation_labels[e.relation],
                    "tail": self.graph.entity_labels[e.tail],
                    "round": self.edge_provenance.get(e, 0),
                    "soft_multiplier": self.multiplier(e),
                }
                for e in sorted(self.edges)
            ],
        }
        return json.dumps(payload, sort_keys=True)


def _bfs_add(subgraph: Subgraph, start: int, radius: int, round_index: int) -> None:
    subgraph.add_node(start, round_index)
    frontier = deque([(start, 0)])
    seen = {start}
    while frontier:
        node, depth = frontier.popleft()
        if depth == radius:
            continue
        for r, t in subgraph.graph.out_adj[node]:
            subgraph.add_node(t, round_index)
            if t not in seen:
                seen.add(t)
                frontier.append((t, depth + 1))


def expand_neighborhood(
    graph: KnowledgeGraph,
    seeds: list[SeedCandidate],
    radius: int,
    knn: int = 0,
    embeddings=None,
    round_index: int = 0,
    into: Subgraph | None = None,
) -> Subgraph:
    """Collect all nodes within ``radius`` hops of any seed plus the ``knn``
    nearest entities to each seed by embedding cosine; edges are induced.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    for seed in seeds:
        if seed.entity >= graph.num_entities or seed.entity < 0:
            raise UnknownEntityError(f"unknown seed entity id: {seed.entity}")

    subgraph = into if into is not None else Subgraph(graph=graph)
    for seed in seeds:
        _bfs_add(subgraph, seed.entity, radius, round_index)

    if knn > 0:
        if embeddings is None:
            raise ValueError("knn expansion requires an embedding provider")
        from .embeddings import cosine  # deferred: avoid import cycle

        all_vecs = [
            embeddings.embed(label) for label in graph.entity_labels
        ]
        for seed in seeds:
            seed_vec = all_vecs[seed.entity]
            sims = sorted(
                (
                    (-cosine(seed_vec, all_vecs[e]), e)
                    for e in range(graph.num_entities)
                    if e != seed.entity
                ),
            )
            for _, e in sims[:knn]:
                subgraph.add_node(e, round_index)

    subgraph.induce_edges(round_index)
    return subgraph


def apply_edits(
    subgraph: Subgraph,
    graph: KnowledgeGraph,
    edits: list[GraphEdit],
    round_index: int = 0,
) -> Subgraph:
    """Apply graph edits in order, mutating and returning ``subgraph``.

    Pruning an edge already absent is a no-op recorded in
    ``subgraph.warnings``. Edits referencing entities outside the parent
    graph raise :class:`EditError`.
    """

    def check_entity(eid: int):
        if not 0 <= eid < graph.num_entities:
            raise EditError(f"edit references unknown entity id {eid}")

    for edit in edits:
        if isinstance(edit, ExpandSeed):
            check_entity(edit.entity)
            _bfs_add(subgraph, edit.entity, edit.radius, round_index)
            subgraph.induce_edges(round_index)
        elif isinstance(edit, PruneEdge):
            check_entity(edit.triple.head)
            check_entity(edit.triple.tail)
            if edit.triple in subgraph.edges:
                subgraph.edges.discard(edit.triple)
                subgraph.edge_provenance.pop(edit.triple, None)
                subgraph.pruned.add(edit.triple)
            else:
                subgraph.warnings.append(
                    f"prune of absent edge {edit.triple} ignored"
                )
        elif isinstance(edit, ConfirmTriple):
            check_entity(edit.triple.head)
            check_entity(edit.triple.tail)
            subgraph.soft[edit.triple] = edit.multiplier
            subgraph.confirmed.add(edit.triple)
        elif isinstance(edit, RefuteTriple):
            check_entity(edit.triple.head)
            check_entity(edit.triple.tail)
            subgraph.soft[edit.triple] = edit.multiplier
            subgraph.refuted.add(edit.triple)
        elif isinstance(edit, SwapSeed):
            check_entity(edit.old_entity)
            check_entity(edit.new_entity)
            if edit.old_entity in subgraph.nodes:
                subgraph.nodes.discard(edit.old_entity)
                subgraph.node_provenance.pop(edit.old_entity, None)
                stale = [
                    e
                    for e in subgraph.edges
                    if e.head == edit.old_entity or e.tail == edit.old_entity
                ]
                for e in stale:
                    subgraph.edges.discard(e)
                    subgraph.edge_provenance.pop(e, None)
            _bfs_add(subgraph, edit.new_entity, edit.radius, round_index)
            subgraph.induce_edges(round_index)
        else:
            raise EditError(f"unknown edit type: {edit!r}")
    return subgraph
