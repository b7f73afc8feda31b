"""Hybrid candidate path generation with hard budgets.

Three generators feed a shared candidate pool: exact k-lowest-cost bounded
simple paths, beam expansion keeping the highest-scoring prefixes per depth,
and restart-limited random walks biased toward cheap edges. The union is
deduplicated, ranked by path score, and truncated to the candidate cap.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass

import numpy as np

from .graph import Subgraph, Triple
from .paths import Path
from .weights import WeightCoefficients, effective_cost, path_score


@dataclass(frozen=True)
class EnumerationBudget:
    max_length: int = 4  # L
    max_candidates: int = 200  # K
    beam_size: int = 32  # B
    walks: int = 100  # R
    restart_prob: float = 0.15

    def __post_init__(self):
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.walks < 0:
            raise ValueError("walks must be >= 0")
        if not 0.0 < self.restart_prob < 1.0:
            raise ValueError("restart_prob must lie in (0, 1)")


def edge_costs(
    subgraph: Subgraph, coeffs: WeightCoefficients, embeddings
) -> dict[Triple, float]:
    """Effective traversal cost for every subgraph edge, computed once."""
    return {
        e: effective_cost(e, coeffs, embeddings, subgraph.graph, subgraph)
        for e in subgraph.edges
    }


def _adjacency(subgraph: Subgraph) -> dict[int, list[Triple]]:
    adj: dict[int, list[Triple]] = {n: [] for n in subgraph.nodes}
    for e in sorted(subgraph.edges):
        adj.setdefault(e.head, []).append(e)
    return adj


def k_shortest_weighted(
    subgraph: Subgraph,
    seed: int,
    k: int,
    budget: EnumerationBudget,
    coeffs: WeightCoefficients,
    embeddings,
    target: int | None = None,
    costs: dict[Triple, float] | None = None,
) -> list[Path]:
    """The k lowest-effective-cost simple paths from ``seed``, length <= L.

    Best-first expansion over partial simple paths: with nonnegative edge
    costs, popping in (cost, node-sequence, relation-sequence) order emits
    complete paths in exactly nondecreasing cost order with lexicographic
    node-id tie-breaking. ``target`` restricts output to paths ending there
    (pair mode); by default any endpoint counts.
    """
    if seed not in subgraph.nodes:
        raise ValueError(f"seed {seed} not in subgraph")
    if costs is None:
        costs = edge_costs(subgraph, coeffs, embeddings)
    adj = _adjacency(subgraph)

    out: list[Path] = []
    # heap entries: (cost, node sequence, relation sequence, edges)
    heap: list[tuple[float, tuple[int, ...], tuple[int, ...], tuple[Triple, ...]]] = []
    for e in adj.get(seed, []):
        heapq.heappush(heap, (costs[e], (seed, e.tail), (e.relation,), (e,)))

    while heap and len(out) < k:
        cost, nodes, rels, edges = heapq.heappop(heap)
        if target is None or nodes[-1] == target:
            out.append(Path(edges))
        if len(edges) < budget.max_length:
            visited = set(nodes)
            for e in adj.get(nodes[-1], []):
                if e.tail in visited:
                    continue
                heapq.heappush(
                    heap,
                    (cost + costs[e], nodes + (e.tail,), rels + (e.relation,),
                     edges + (e,)),
                )
    return out


def beam_expand(
    subgraph: Subgraph,
    seeds: list[int],
    budget: EnumerationBudget,
    query_embedding: np.ndarray,
    coeffs: WeightCoefficients,
    embeddings,
    costs: dict[Triple, float] | None = None,
) -> list[Path]:
    """Breadth-first expansion keeping the B highest-scoring partial paths
    per depth; every retained prefix is returned as a candidate."""
    if costs is None:
        costs = edge_costs(subgraph, coeffs, embeddings)
    adj = _adjacency(subgraph)

    def score(path: Path) -> float:
        return path_score(
            path, query_embedding, coeffs, embeddings, subgraph.graph,
            subgraph, edge_cost_cache=costs,
        )

    frontier: list[Path] = []
    for s in sorted(set(seeds)):
        for e in adj.get(s, []):
            frontier.append(Path((e,)))
    frontier.sort(key=lambda p: (-score(p), p.nodes, p.relations))
    frontier = frontier[: budget.beam_size]

    retained: list[Path] = list(frontier)
    for _depth in range(1, budget.max_length):
        nxt: list[Path] = []
        for p in frontier:
            visited = set(p.nodes)
            for e in adj.get(p.terminal, []):
                if e.tail in visited:
                    continue
                nxt.append(Path(p.edges + (e,)))
        if not nxt:
            break
        nxt.sort(key=lambda p: (-score(p), p.nodes, p.relations))
        frontier = nxt[: budget.beam_size]
        retained.extend(frontier)
    return retained


def random_walk_proposals(
    subgraph: Subgraph,
    seeds: list[int],
    budget: EnumerationBudget,
    rng_seed: int,
    coeffs: WeightCoefficients,
    embeddings,
    costs: dict[Triple, float] | None = None,
) -> list[Path]:
    """R restart-limited walks; each walk records its prefix as a path.

    Step choice is proportional to inverse effective cost; revisits are
    treated as dead ends so proposals stay simple. Deterministic given
    ``rng_seed``.
    """
    if budget.walks == 0 or not seeds:
        return []
    if costs is None:
        costs = edge_costs(subgraph, coeffs, embeddings)
    adj = _adjacency(subgraph)
    rng = random.Random(rng_seed)
    seeds = sorted(set(seeds))

    out: list[Path] = []
    for i in range(budget.walks):
        start = seeds[i % len(seeds)]
        edges: list[Triple] = []
        visited = {start}
        node = start
        while len(edges) < budget.max_length:
            if rng.random() < budget.restart_prob:
                break
            options = [e for e in adj.get(node, []) if e.tail not in visited]
            if not options:
                break
            inv = [1.0 / max(costs[e], 1e-9) for e in options]
            chosen = rng.choices(options, weights=inv, k=1)[0]
            edges.append(chosen)
            visited.add(chosen.tail)
            node = chosen.tail
        if edges:
            out.append(Path(edges))
    return out


def enumerate_paths(
    subgraph: Subgraph,
    seeds: list[int],
    budget: EnumerationBudget,
    query_embedding: np.ndarray,
    coeffs: WeightCoefficients,
    embeddings,
    rng_seed: int = 0,
    pair_mode: bool = False,
) -> list[Path]:
    """Union of the three generators, deduplicated on (node sequence,
    relation sequence), ranked by path score descending, truncated to K."""
    if not seeds:
        raise ValueError("seeds must be nonempty")
    seeds = [s for s in seeds if s in subgraph.nodes]
    if not seeds:
        return []
    costs = edge_costs(subgraph, coeffs, embeddings)

    pool: dict[tuple, Path] = {}

    def absorb(paths):
        for p in paths:
            pool.setdefault(p.key(), p)

    for s in sorted(set(seeds)):
        if pair_mode:
            for t in sorted(set(seeds)):
                if t != s:
                    absorb(k_shortest_weighted(
                        subgraph, s, budget.max_candidates, budget, coeffs,
                        embeddings, target=t, costs=costs))
        else:
            absorb(k_shortest_weighted(
                subgraph, s, budget.max_candidates, budget, coeffs,
                embeddings, costs=costs))
    absorb(beam_expand(subgraph, seeds, budget, query_embedding, coeffs,
                       embeddings, costs=costs))
    absorb(random_walk_proposals(subgraph, seeds, budget, rng_seed, coeffs,
                                 embeddings, costs=costs))

    candidates = pool.values()
    if pair_mode:  # beam/walk proposals must also satisfy the endpoint rule
        seed_set = set(seeds)
        candidates = [p for p in candidates
                      if p.terminal in seed_set and p.terminal != p.nodes[0]]
    ranked = sorted(
        candidates,
        key=lambda p: (
            -path_score(p, query_embedding, coeffs, embeddings,
                        subgraph.graph, subgraph, edge_cost_cache=costs),
            p.nodes,
            p.relations,
        ),
    )
    return ranked[: budget.max_candidates]
