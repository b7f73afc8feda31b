"""Candidate path representation and latent pooling."""

from __future__ import annotations

import numpy as np

from .errors import EmptyPathError, ZeroVectorError
from .graph import KnowledgeGraph, Triple


class Path:
    """A contiguous, simple chain of edges.

    ``nodes`` is derived from the edge list; identity for deduplication is
    the (node sequence, relation sequence) pair so parallel edges with
    different relations stay distinct.
    """

    __slots__ = ("edges", "nodes")

    def __init__(self, edges):
        edges = tuple(edges)
        if not edges:
            raise EmptyPathError("a path must contain at least one edge")
        nodes = [edges[0].head]
        for e in edges:
            if e.head != nodes[-1]:
                raise ValueError(f"non-contiguous path at edge {e}")
            nodes.append(e.tail)
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"path repeats a node: {nodes}")
        self.edges: tuple[Triple, ...] = edges
        self.nodes: tuple[int, ...] = tuple(nodes)

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def relations(self) -> tuple[int, ...]:
        return tuple(e.relation for e in self.edges)

    @property
    def terminal(self) -> int:
        return self.nodes[-1]

    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return (self.nodes, self.relations)

    def __eq__(self, other) -> bool:
        return isinstance(other, Path) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"Path(nodes={self.nodes}, relations={self.relations})"

    def verbalize(self, graph: KnowledgeGraph) -> str:
        parts = [graph.entity_labels[self.nodes[0]]]
        for e in self.edges:
            parts.append(graph.relation_labels[e.relation])
            parts.append(graph.entity_labels[e.tail])
        return " -> ".join(parts)


def pool_path_vector(path: Path, embeddings, graph: KnowledgeGraph) -> np.ndarray:
    """Mean of all node and relation embeddings along the path, normalized.

    Order-insensitive by construction; a zero mean is an error.
    """
    labels = [graph.entity_labels[n] for n in path.nodes]
    labels += [graph.relation_labels[r] for r in path.relations]
    mean = np.mean([embeddings.embed(label) for label in labels], axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise ZeroVectorError(f"pooled vector is zero for {path!r}")
    return mean / norm
