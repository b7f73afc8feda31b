"""Edge-weight and path-score computation.

An edge's weight combines a structural cost, the semantic gap between its
endpoint embeddings, and a relation prior:

    total = alpha * structural + beta * (1 - cos(head, tail)) + gamma * prior

A path's score is the negated sum of effective edge costs plus a weighted
semantic match between the pooled path embedding and the query embedding.
Soft multipliers lower effective traversal cost multiplicatively
(``total / (1 + multiplier)``), so boosted edges are preferred by the
shortest-path search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embeddings import cosine
from .errors import EmptyPathError
from .graph import KnowledgeGraph, Subgraph, Triple
from .paths import Path, pool_path_vector

DEFAULT_LAMBDA_SEM = 0.70
DEFAULT_TAU = 0.2


@dataclass(frozen=True)
class WeightCoefficients:
    alpha: float = 0.4
    beta: float = 0.4
    gamma: float = 0.2
    lambda_sem: float = DEFAULT_LAMBDA_SEM
    struct_mode: str = "uniform"  # "uniform" | "degree"

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "lambda_sem"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.struct_mode not in ("uniform", "degree"):
            raise ValueError(f"unknown struct_mode: {self.struct_mode!r}")


@dataclass(frozen=True)
class EdgeWeightBreakdown:
    structural: float
    semantic_gap: float
    relation_prior: float
    total: float


def edge_weight(
    edge: Triple,
    coeffs: WeightCoefficients,
    embeddings,
    graph: KnowledgeGraph,
) -> EdgeWeightBreakdown:
    if coeffs.struct_mode == "degree":
        structural = math.log1p(graph.out_degree(edge.head))
    else:
        structural = 1.0
    head_vec = embeddings.embed(graph.entity_labels[edge.head])
    tail_vec = embeddings.embed(graph.entity_labels[edge.tail])
    semantic_gap = 1.0 - cosine(head_vec, tail_vec)
    relation_prior = graph.prior_cost(edge.relation)
    total = (
        coeffs.alpha * structural
        + coeffs.beta * semantic_gap
        + coeffs.gamma * relation_prior
    )
    return EdgeWeightBreakdown(structural, semantic_gap, relation_prior, total)


def effective_cost(
    edge: Triple,
    coeffs: WeightCoefficients,
    embeddings,
    graph: KnowledgeGraph,
    subgraph: Subgraph | None = None,
) -> float:
    """Traversal cost after the soft multiplier: total / (1 + multiplier)."""
    total = edge_weight(edge, coeffs, embeddings, graph).total
    multiplier = subgraph.multiplier(edge) if subgraph is not None else 0.0
    return total / (1.0 + multiplier)


def semantic_match(
    path: Path,
    query_embedding: np.ndarray,
    embeddings,
    graph: KnowledgeGraph,
) -> float:
    """Cosine between the pooled path embedding and the query embedding."""
    return cosine(pool_path_vector(path, embeddings, graph), query_embedding)


def path_score(
    path: Path,
    query_embedding: np.ndarray,
    coeffs: WeightCoefficients,
    embeddings,
    graph: KnowledgeGraph,
    subgraph: Subgraph | None = None,
    edge_cost_cache: dict[Triple, float] | None = None,
) -> float:
    """Eq.-style ranking score: higher is better."""
    if len(path) == 0:  # Path() already forbids this; belt and braces
        raise EmptyPathError("cannot score an empty path")
    cost = 0.0
    for e in path.edges:
        if edge_cost_cache is not None and e in edge_cost_cache:
            cost += edge_cost_cache[e]
        else:
            c = effective_cost(e, coeffs, embeddings, graph, subgraph)
            if edge_cost_cache is not None:
                edge_cost_cache[e] = c
            cost += c
    sem = semantic_match(path, query_embedding, embeddings, graph)
    return -cost + coeffs.lambda_sem * sem
