"""Deterministic synthetic fixtures for testing and demos.

Each builder returns a :class:`Fixture` carrying a ready-to-use graph,
embedding provider, benchmark records, and run configuration, and can also
write itself out as the CLI-facing file set (triples TSV, embeddings TSV,
benchmark JSONL, config file, probes JSON).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .config import RunConfig
from .embeddings import FileEmbeddings, HashEmbeddings
from .evaluation import BenchmarkRecord
from .graph import KnowledgeGraph


@dataclass
class Fixture:
    graph: KnowledgeGraph
    embeddings: object
    records: list[BenchmarkRecord]
    config: RunConfig
    triples: list[tuple[str, str, str]]
    vectors: dict[str, np.ndarray] | None = None  # None -> hash provider
    probes: dict[str, tuple[str, str]] = field(default_factory=dict)
    prior_overrides: dict[str, float] = field(default_factory=dict)

    def write(self, directory) -> dict[str, str]:
        """Emit the file set the CLI consumes; returns name -> path."""
        os.makedirs(directory, exist_ok=True)
        paths = {}

        def path_of(name):
            paths[name] = p = os.path.join(directory, name)
            return p

        with open(path_of("triples.tsv"), "w", encoding="utf-8") as fh:
            for h, r, t in self.triples:
                fh.write(f"{h}\t{r}\t{t}\n")

        with open(path_of("bench.jsonl"), "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps({
                    "question": rec.question,
                    "seeds": [{"entity": e, "confidence": c}
                              for e, c in rec.seeds],
                    "answers": sorted(rec.answers),
                    "gold_paths": [{"nodes": list(n), "relations": list(r)}
                                   for n, r in rec.gold_paths],
                    "hops": rec.hops,
                }, sort_keys=True) + "\n")

        with open(path_of("config.cfg"), "w", encoding="utf-8") as fh:
            for f in fields(RunConfig):
                fh.write(f"{f.name} = {getattr(self.config, f.name)}\n")

        if self.vectors is not None:
            with open(path_of("embeddings.tsv"), "w", encoding="utf-8") as fh:
                for label, vec in self.vectors.items():
                    fh.write(label + "\t" + ",".join(repr(float(x))
                                                     for x in vec) + "\n")
        if self.probes:
            with open(path_of("probes.json"), "w", encoding="utf-8") as fh:
                json.dump({q: list(p) for q, p in self.probes.items()}, fh,
                          sort_keys=True)
        if self.prior_overrides:
            with open(path_of("priors.tsv"), "w", encoding="utf-8") as fh:
                for rel, cost in self.prior_overrides.items():
                    fh.write(f"{rel}\t{cost}\n")
        return paths


def _build_graph(triples, prior_overrides=None) -> KnowledgeGraph:
    graph = KnowledgeGraph()
    for h, r, t in triples:
        graph.add_triple(h, r, t)
    graph.finalize()
    for rel, cost in (prior_overrides or {}).items():
        graph.set_prior_cost(graph.relation_id(rel), cost)
    return graph


# --- Argo-style dialogue fixture ---------------------------------------------

ARGO_QUESTION = "Where was the screenwriter of Argo born?"


def argo_fixture() -> Fixture:
    """Two-round dialogue scenario.

    Round 1 selects the spurious based_in path and answers Boston below
    the confidence threshold; the configured verification probe refutes
    (Boston, host_event, 1976_Summer_Olympics), the verifier gates every
    Boston-terminated path to zero, and round 2 answers New_York_City
    above threshold. Exactly two rounds, exactly one graph update.
    """
    triples = [
        ("Argo", "written_by", "Chris_Terrio"),
        ("Chris_Terrio", "based_in", "Boston"),
        ("Chris_Terrio", "born_in", "New_York_City"),
        ("New_York_City", "host_event", "1976_Summer_Olympics"),
    ]
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0, 0.0])
    e4 = np.array([0.0, 0.0, 0.0, 1.0])
    vectors = {
        ARGO_QUESTION: e1,
        "Boston": e1,
        # close to Boston in embedding space but distinguishable
        "New_York_City": np.array([0.9, math.sqrt(0.19), 0.0, 0.0]),
        "Argo": e3,
        "Chris_Terrio": e3,
        "1976_Summer_Olympics": e4,
        "written_by": e4,
        "based_in": e4,
        "born_in": e4,
        "host_event": e4,
    }
    config = RunConfig(
        alpha=0.1, beta=0.0, gamma=0.0, lambda_sem=0.7,
        radius=2, rounds=3, conf_threshold=0.4, embed_dim=4,
    )
    records = [BenchmarkRecord(
        question=ARGO_QUESTION,
        seeds=(("Argo", 1.0),),
        answers=frozenset({"New_York_City"}),
        gold_paths=((("Argo", "Chris_Terrio", "New_York_City"),
                     ("written_by", "born_in")),),
        hops=2,
    )]
    probes = {ARGO_QUESTION: ("host_event", "1976_Summer_Olympics")}
    return Fixture(
        graph=_build_graph(triples),
        embeddings=FileEmbeddings(vectors),
        records=records,
        config=config,
        triples=triples,
        vectors=vectors,
        probes=probes,
    )


# --- coverage-vs-K fixture ----------------------------------------------------

COVERAGE_DISTRACTORS = (5, 18, 40, 90, 180)


def coverage_fixture() -> Fixture:
    """50 questions, each a 3-hop gold chain competing with n one-hop
    distractors, n in {5, 18, 40, 90, 180} (10 questions apiece).

    With purely structural costs the gold chain ranks exactly n + 3, so
    coverage over K in {10, 25, 50, 100, 200} steps through
    0.2, 0.4, 0.6, 0.8, 1.0.
    """
    triples = []
    records = []
    for i in range(50):
        n = COVERAGE_DISTRACTORS[i // 10]
        s, g1, g2, g3 = (f"c{i:02d}_{x}" for x in ("s", "g1", "g2", "g3"))
        triples += [(s, "step", g1), (g1, "step", g2), (g2, "step", g3)]
        triples += [(s, "step", f"c{i:02d}_d{j:03d}") for j in range(n)]
        records.append(BenchmarkRecord(
            question=f"coverage question {i:02d}",
            seeds=((s, 1.0),),
            answers=frozenset({g3}),
            gold_paths=(((s, g1, g2, g3), ("step", "step", "step")),),
            hops=3,
        ))
    config = RunConfig(
        alpha=1.0, beta=0.0, gamma=0.0, lambda_sem=0.0,
        L=3, walks=0, radius=3, rounds=1, embed_dim=8,
    )
    return Fixture(
        graph=_build_graph(triples),
        embeddings=HashEmbeddings(dimension=config.embed_dim),
        records=records,
        config=config,
        triples=triples,
    )


# --- adversarial hybrid-weighting fixture -------------------------------------


def adversarial_fixture() -> Fixture:
    """Two trap families of 8 questions each, K = 60.

    Family A (structure trap): the 3-hop gold chain sits behind 80
    semantically hostile one-hop distractors; pure structural weighting
    ranks gold 83rd and misses it, semantic and hybrid weighting recover
    it.

    Family B (semantics trap): the gold answer is one hop away but across
    a large embedding gap, while 25 three-hop distractor chains hug the
    query direction; pure semantic weighting ranks gold 76th and misses
    it, structural and hybrid weighting recover it.

    Hybrid (0.4, 0.4, 0.2) therefore covers 16/16 questions; each pure
    mode covers only 8/16.
    """
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0, 0.0])
    v_d = np.array([0.0, 0.0, math.sqrt(0.84), 0.4])

    triples = []
    records = []
    vectors = {
        "rel_gold_a": e1, "rel_dist_a": e2,
        "rel_gold_b": e3, "rel_dist_b": v_d,
    }

    for i in range(8):
        q = f"structure trap question {i}"
        s, g1, g2, g3 = (f"a{i}_{x}" for x in ("s", "g1", "g2", "g3"))
        triples += [(s, "rel_gold_a", g1), (g1, "rel_gold_a", g2),
                    (g2, "rel_gold_a", g3)]
        vectors.update({q: e1, s: e1, g1: e1, g2: e1, g3: e1})
        for j in range(80):
            d = f"a{i}_d{j:02d}"
            triples.append((s, "rel_dist_a", d))
            vectors[d] = -e1
        records.append(BenchmarkRecord(
            question=q, seeds=((s, 1.0),), answers=frozenset({g3}),
            gold_paths=(((s, g1, g2, g3),
                         ("rel_gold_a", "rel_gold_a", "rel_gold_a")),),
            hops=3,
        ))

    for i in range(8):
        q = f"semantics trap question {i}"
        s, t = f"b{i}_s", f"b{i}_t"
        triples.append((s, "rel_gold_b", t))
        vectors.update({q: e3, s: e3, t: -e3})
        for j in range(25):
            chain = [s] + [f"b{i}_c{j:02d}_{h}" for h in range(1, 4)]
            for h in range(3):
                triples.append((chain[h], "rel_dist_b", chain[h + 1]))
                vectors[chain[h + 1]] = v_d
        records.append(BenchmarkRecord(
            question=q, seeds=((s, 1.0),), answers=frozenset({t}),
            gold_paths=(((s, t), ("rel_gold_b",)),),
            hops=1,
        ))

    prior_overrides = {r: 0.5 for r in
                       ("rel_gold_a", "rel_dist_a", "rel_gold_b", "rel_dist_b")}
    config = RunConfig(
        lambda_sem=0.7, L=3, K=60, walks=0,
        radius=3, rounds=1, embed_dim=4,
    )
    return Fixture(
        graph=_build_graph(triples, prior_overrides),
        embeddings=FileEmbeddings(vectors),
        records=records,
        config=config,
        triples=triples,
        vectors=vectors,
        prior_overrides=prior_overrides,
    )


# --- 20-question metrics fixture -----------------------------------------------


def metrics_fixture() -> Fixture:
    """20 single-round star questions with fully predictable outcomes.

    Every seed has m one-hop neighbors t1 < t2 < ... (equal costs, verifier
    disabled), so the answer is always t1 and the ranked answers are
    alphabetical. Gold answers and gold paths are placed to hit known
    Hit@1 / F1 / MRR / coverage values; hop labels split the questions
    into buckets 1, 2, 3.
    """
    triples = []
    records = []

    def make(i, m, gold, hops):
        s = f"q{i:02d}_s"
        ts = [f"q{i:02d}_t{j}" for j in range(1, m + 1)]
        triples.extend((s, "r", t) for t in ts)
        covered = i % 2 == 1  # odd questions list a retrievable gold path
        gold_path = ((s, ts[0]), ("r",) if covered else ("ghost",))
        records.append(BenchmarkRecord(
            question=f"metrics question {i:02d}",
            seeds=((s, 1.0),),
            answers=frozenset(f"q{i:02d}_t{j}" for j in gold),
            gold_paths=(gold_path,),
            hops=hops,
        ))

    for i in range(1, 9):  # m=2, hops=1: gold t1 (q1-5) or t2 (q6-8)
        make(i, 2, (1,) if i <= 5 else (2,), hops=1)
    for i in range(9, 15):  # m=3, hops=2: gold {t1,t2} (q9-11) or t3
        make(i, 3, (1, 2) if i <= 11 else (3,), hops=2)
    for i in range(15, 21):  # m=4, hops=3: gold t1 (q15-17) or t4
        make(i, 4, (1,) if i <= 17 else (4,), hops=3)

    config = RunConfig(
        alpha=1.0, beta=0.0, gamma=0.0, lambda_sem=0.0,
        walks=0, radius=1, rounds=1, no_verifier=True, embed_dim=8,
    )
    return Fixture(
        graph=_build_graph(triples),
        embeddings=HashEmbeddings(dimension=config.embed_dim),
        records=records,
        config=config,
        triples=triples,
    )


FIXTURES = {
    "argo": argo_fixture,
    "coverage": coverage_fixture,
    "adversarial": adversarial_fixture,
    "metrics": metrics_fixture,
}
