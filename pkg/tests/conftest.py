import random

import pytest

from kgpaths.embeddings import HashEmbeddings
from kgpaths.graph import KnowledgeGraph, Subgraph, Triple


def build_graph(triples):
    graph = KnowledgeGraph()
    for h, r, t in triples:
        graph.add_triple(h, r, t)
    graph.finalize()
    return graph


def full_subgraph(graph):
    """Working view containing every node and edge of the parent graph."""
    sub = Subgraph(graph=graph)
    for n in range(graph.num_entities):
        sub.add_node(n, 0)
    sub.induce_edges(0)
    return sub


def random_graph(rng: random.Random, max_nodes=12, max_edges=30):
    n = rng.randint(2, max_nodes)
    graph = KnowledgeGraph()
    for i in range(n):
        graph._intern_entity(f"n{i}")
    for _ in range(rng.randint(1, max_edges)):
        h = rng.randrange(n)
        t = rng.randrange(n)
        if h == t:
            continue
        graph.add_triple(f"n{h}", f"r{rng.randrange(4)}", f"n{t}")
    graph.finalize()
    return graph


@pytest.fixture
def chain_graph():
    return build_graph([
        ("a", "r1", "b"),
        ("b", "r2", "c"),
        ("c", "r1", "d"),
        ("a", "r3", "c"),
    ])


@pytest.fixture
def hash_embeddings():
    return HashEmbeddings(dimension=16, seed=0)


def triple(h, r, t):
    return Triple(h, r, t)
