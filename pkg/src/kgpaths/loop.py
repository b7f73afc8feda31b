"""The iterative retrieval-reasoning loop.

Each round enumerates and scores candidate paths, injects a soft mixture of
selected path latents into a reasoner, and, when the reasoner's confidence
stays below threshold, maps its diagnostic message to targeted graph edits
(verification, expansion, disambiguation, pruning) applied before the next
round. Soft per-edge masks bridge the diagnostics into traversal costs; a
noisy top-k discretization picks which candidate paths carry the mask
forward.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .embeddings import query_embedding
from .errors import EmptySelectionError, KgError, ServiceError
from .graph import (
    ConfirmTriple,
    ExpandSeed,
    GraphEdit,
    KnowledgeGraph,
    PruneEdge,
    RefuteTriple,
    SeedCandidate,
    Subgraph,
    SwapSeed,
    Triple,
    apply_edits,
    expand_neighborhood,
)
from .injection import AttentionMatrix, attention_mass, alignment_loss, context_mixture, encode_path
from .pathenum import enumerate_paths
from .scoring import (
    GumbelConfig,
    ScoredCandidate,
    gumbel_soft_weights,
    score_candidates,
    select_and_inject,
    verify,
)

log = logging.getLogger(__name__)

REASONER_URL_ENV = "KGPATHS_REASONER_URL"
REASONER_TOKEN_ENV = "KGPATHS_REASONER_TOKEN"

VERIFY = "VERIFY"
EXPAND = "EXPAND"
DISAMBIGUATE = "DISAMBIGUATE"
PRUNE = "PRUNE"
NONE = "NONE"

_DIAG_RE = re.compile(r"^\s*(VERIFY|EXPAND|DISAMBIGUATE|PRUNE)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class DiagnosticMessage:
    kind: str
    args: tuple[str, ...] = ()
    uncertainty: float = 0.0
    raw_text: str = ""

    def __post_init__(self):
        if not 0.0 <= self.uncertainty <= 1.0:
            raise ValueError("uncertainty must lie in [0, 1]")

    def canonical(self) -> str:
        if self.kind == NONE:
            return NONE
        return f"{self.kind}({', '.join(self.args)})"


def parse_diagnostic(text: str, uncertainty: float = 0.0) -> DiagnosticMessage | None:
    """Parse reasoner diagnostic text; ``None`` marks an unparseable message
    (the loop logs it and applies no edits)."""
    stripped = text.strip()
    if stripped == NONE or stripped == "":
        return DiagnosticMessage(NONE, (), uncertainty, text)
    match = _DIAG_RE.match(stripped)
    if not match:
        return None
    kind, body = match.group(1), match.group(2)
    args = tuple(a.strip() for a in body.split(","))
    expected = {VERIFY: 3, EXPAND: 2, DISAMBIGUATE: 2, PRUNE: 1}[kind]
    if len(args) != expected or any(not a for a in args):
        return None
    return DiagnosticMessage(kind, args, uncertainty, text)


def map_diagnostic(
    message: DiagnosticMessage | None,
    subgraph: Subgraph,
    graph: KnowledgeGraph,
    candidates: list[ScoredCandidate] | None = None,
) -> list[GraphEdit]:
    """Rule-template mapping from a diagnostic to concrete graph edits.

    VERIFY is a local check against the base KG: present facts are
    confirmed, absent ones refuted. Parse failures never abort the loop;
    they yield no edits.
    """
    if message is None:
        log.warning("unparseable diagnostic; no edits emitted")
        return []
    if message.kind == NONE:
        return []
    try:
        if message.kind == VERIFY:
            head_l, rel_l, tail_l = message.args
            head = graph.entity_id(head_l)
            rel = graph.relation_id(rel_l)
            tail = graph.entity_id(tail_l)
            triple = Triple(head, rel, tail)
            if triple in graph.triples:
                return [ConfirmTriple(triple)]
            return [RefuteTriple(triple)]
        if message.kind == EXPAND:
            entity_l, radius_s = message.args
            return [ExpandSeed(graph.entity_id(entity_l), int(radius_s))]
        if message.kind == DISAMBIGUATE:
            mention_l, alternatives = message.args
            alt = alternatives.split("|")[0].strip()
            return [SwapSeed(graph.entity_id(mention_l), graph.entity_id(alt))]
        if message.kind == PRUNE:
            if candidates is None:
                log.warning("PRUNE diagnostic without a candidate list")
                return []
            idx = int(message.args[0])
            if not 0 <= idx < len(candidates):
                log.warning("PRUNE path_id %d out of range", idx)
                return []
            return [PruneEdge(e) for e in candidates[idx].path.edges]
    except (ValueError, KeyError, KgError) as exc:
        log.warning("diagnostic %r failed to map: %s", message.canonical(), exc)
        return []
    log.warning("unknown diagnostic kind %r", message.kind)
    return []


@dataclass(frozen=True)
class DiagnosticContext:
    mu: np.ndarray | None  # diagnostic text embedding, when available
    uncertainty: float


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _edit_relevance(edits: list[GraphEdit]) -> tuple[set[Triple], set[Triple]]:
    confirmed = {e.triple for e in edits if isinstance(e, ConfirmTriple)}
    refuted = {e.triple for e in edits if isinstance(e, RefuteTriple)}
    return confirmed, refuted


def soft_mask(
    context: DiagnosticContext,
    candidates: list[ScoredCandidate],
    edits: list[GraphEdit],
    gain: float = 4.0,
    uncertainty_gain: float = 0.0,
) -> dict[Triple, float]:
    """Per-edge mask values delta in (0, 1).

    delta = sigmoid(gain * relevance + uncertainty_gain * uncertainty) with
    relevance +1 for edges confirmed by the round's edits, -1 for refuted,
    0 otherwise. Edges covered are those on candidate paths plus the edit
    triples themselves.
    """
    confirmed, refuted = _edit_relevance(edits)
    edges: set[Triple] = set(confirmed) | set(refuted)
    for c in candidates:
        edges.update(c.path.edges)
    deltas = {}
    for e in edges:
        relevance = 1.0 if e in confirmed else -1.0 if e in refuted else 0.0
        deltas[e] = _sigmoid(gain * relevance + uncertainty_gain * context.uncertainty)
    return deltas


def path_mask(
    context: DiagnosticContext,
    candidates: list[ScoredCandidate],
    edits: list[GraphEdit],
    gain: float = 4.0,
    uncertainty_gain: float = 0.0,
) -> dict[tuple, float]:
    """Per-path mask values keyed by path identity; refutation of any edge
    dominates confirmation."""
    confirmed, refuted = _edit_relevance(edits)
    out = {}
    for c in candidates:
        if any(e in refuted for e in c.path.edges):
            relevance = -1.0
        elif any(e in confirmed for e in c.path.edges):
            relevance = 1.0
        else:
            relevance = 0.0
        out[c.path.key()] = _sigmoid(
            gain * relevance + uncertainty_gain * context.uncertainty
        )
    return out


def discretize_target(k: int) -> int:
    """Discrete selection size: min(ceil(0.2 K), 20)."""
    return min(math.ceil(0.2 * k), 20)


def discretize_topk(
    deltas: dict,
    k: int,
    rng_seed: int = 0,
    deterministic: bool = False,
    tau: float = 0.2,
) -> list:
    """Noisy top-k over mask values: keep the K' items with the largest
    (log delta + g) / tau, g ~ Gumbel(0,1) (zero when deterministic).
    Ties break on item id; fewer than K' items selects everything.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    for key, d in deltas.items():
        if not 0.0 < d < 1.0:
            raise ValueError(f"delta for {key!r} must lie in (0, 1), got {d}")
    k_prime = discretize_target(k)
    items = sorted(deltas.items())
    if len(items) <= k_prime:
        return [key for key, _ in items]
    rng = random.Random(rng_seed)
    scored = []
    for key, d in items:
        g = 0.0 if deterministic else -math.log(-math.log(
            min(max(rng.random(), 1e-300), 1.0 - 1e-16)))
        scored.append(((math.log(d) + g) / tau, key))
    scored.sort(key=lambda sk: (-sk[0], sk[1]))
    return [key for _, key in scored[:k_prime]]


# --- reasoners -------------------------------------------------------------


@dataclass(frozen=True)
class ReasonerReply:
    answer: str
    confidence: float
    diagnostic: str = NONE
    attention: AttentionMatrix | None = None
    tokens: int = 0
    logprob: float | None = None


class ScriptedReasoner:
    """Deterministic test double bound to a graph.

    Answer: terminal entity of the highest-adjusted-injection selected path.
    Confidence: that path's adjusted injection times its verifier value.
    Diagnostic below the confidence threshold: a per-question verification
    probe when configured, otherwise VERIFY on the top path's final edge.

    Log-probability rule (published so tests can evaluate it independently):
    mass(a) = sum of adjusted_injection * verifier over selected paths
    terminating at entity a; P(a) = (mass(a) + eps) / (sum_mass + eps * N)
    where N counts the distinct terminal entities plus the queried answer if
    it terminates no path.
    """

    mode = "scripted"
    capabilities = frozenset({"answers", "log_probs", "attention"})

    def __init__(self, graph: KnowledgeGraph, conf_threshold: float = 0.7,
                 probes: dict[str, tuple[str, str]] | None = None,
                 epsilon: float = 0.01):
        self.graph = graph
        self.conf_threshold = conf_threshold
        self.probes = dict(probes or {})
        self.epsilon = epsilon

    def _top(self, selected: list[ScoredCandidate]) -> ScoredCandidate:
        return max(
            selected,
            key=lambda c: (c.adjusted_injection, tuple(-n for n in c.path.nodes)),
        )

    def answer_for(self, question: str, selected: list[ScoredCandidate]) -> str:
        if not selected:
            return ""
        return self.graph.entity_labels[self._top(selected).path.terminal]

    def log_prob(self, question: str, selected: list[ScoredCandidate],
                 answer: str) -> float:
        mass: dict[str, float] = {}
        for c in selected:
            label = self.graph.entity_labels[c.path.terminal]
            mass[label] = mass.get(label, 0.0) + c.adjusted_injection * c.verifier
        space = set(mass) | {answer}
        total = sum(mass.values())
        p = (mass.get(answer, 0.0) + self.epsilon) / (
            total + self.epsilon * len(space)
        )
        return math.log(p)

    def reason(self, question: str, selected: list[ScoredCandidate],
               mixture=None) -> ReasonerReply:
        top = self._top(selected)
        answer = self.graph.entity_labels[top.path.terminal]
        confidence = min(max(top.adjusted_injection * top.verifier, 0.0), 1.0)

        if confidence > self.conf_threshold:
            diagnostic = NONE
        elif question in self.probes:
            rel, obj = self.probes[question]
            diagnostic = f"{VERIFY}({answer}, {rel}, {obj})"
        else:
            h, r, t = self.graph.triple_labels(top.path.edges[-1])
            diagnostic = f"{VERIFY}({h}, {r}, {t})"

        tokens = sum(
            len(c.path.verbalize(self.graph).split()) for c in selected
        )
        alphas = np.array([c.adjusted_injection for c in selected], dtype=float)
        if alphas.sum() <= 0:
            alphas = np.full(len(selected), 1.0 / len(selected))
        else:
            alphas = alphas / alphas.sum()
        n_tok = max(1, len(answer.split()))
        attention = AttentionMatrix(np.tile(alphas, (n_tok, 1)))
        return ReasonerReply(
            answer=answer, confidence=confidence, diagnostic=diagnostic,
            attention=attention, tokens=tokens,
            logprob=self.log_prob(question, selected, answer),
        )


class ExternalReasoner:
    """HTTP reasoner client.

    POST ``{"question", "paths": [{"text", "weight", "verifier"}],
    "mixture": [...]}`` and expect ``{"answer", "confidence", "diagnostic",
    "attention"?, "logprob"?}``; confidence must be a scalar in [0, 1].
    """

    mode = "external-service"

    def __init__(self, graph: KnowledgeGraph, url: str | None = None,
                 token: str | None = None, timeout: float = 60.0,
                 session=None):
        import os

        self.graph = graph
        self.url = url or os.environ.get(REASONER_URL_ENV)
        if not self.url:
            raise ValueError(f"no reasoner URL given and {REASONER_URL_ENV} unset")
        self.token = token if token is not None else os.environ.get(
            REASONER_TOKEN_ENV)
        self.timeout = timeout
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self.capabilities = frozenset({"answers"})

    def reason(self, question: str, selected: list[ScoredCandidate],
               mixture=None) -> ReasonerReply:
        payload = {
            "question": question,
            "paths": [
                {
                    "text": c.path.verbalize(self.graph),
                    "weight": c.adjusted_injection,
                    "verifier": c.verifier,
                }
                for c in selected
            ],
            "mixture": list(map(float, mixture.z_ctx)) if mixture is not None else [],
        }
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self._session.post(self.url, json=payload, headers=headers,
                                      timeout=self.timeout)
        except Exception as exc:
            raise ServiceError(f"reasoner unreachable: {exc}", retryable=True) from exc
        if resp.status_code != 200:
            raise ServiceError(
                f"reasoner returned {resp.status_code}",
                retryable=resp.status_code in (429, 502, 503, 504),
                status=resp.status_code,
            )
        body = resp.json()
        confidence = float(body["confidence"])
        if not 0.0 <= confidence <= 1.0:
            raise ServiceError(f"confidence {confidence} outside [0, 1]")
        attention = None
        if body.get("attention") is not None:
            attention = AttentionMatrix(np.asarray(body["attention"], dtype=float))
        tokens = int(body.get("tokens", sum(
            len(p["text"].split()) for p in payload["paths"])))
        return ReasonerReply(
            answer=str(body["answer"]), confidence=confidence,
            diagnostic=str(body.get("diagnostic", NONE)),
            attention=attention, tokens=tokens,
            logprob=body.get("logprob"),
        )


# --- episode driver --------------------------------------------------------


@dataclass
class RoundState:
    round: int
    subgraph_nodes: int
    subgraph_edges: int
    num_candidates: int
    selected: list[dict]
    answer: str | None
    confidence: float | None
    diagnostic: str | None
    edits: list[str]
    reasoner_calls: int
    tokens: int
    edits_applied: int
    alignment: float | None = None
    attn_spearman: float | None = None
    forced_expand: bool = False

    def to_record(self) -> dict:
        return {
            "round": self.round,
            "subgraph_nodes": self.subgraph_nodes,
            "subgraph_edges": self.subgraph_edges,
            "num_candidates": self.num_candidates,
            "selected": self.selected,
            "answer": self.answer,
            "confidence": self.confidence,
            "diagnostic": self.diagnostic,
            "edits": self.edits,
            "counters": {
                "reasoner_calls": self.reasoner_calls,
                "tokens": self.tokens,
                "edits": self.edits_applied,
            },
            "alignment": self.alignment,
            "attn_spearman": self.attn_spearman,
            "forced_expand": self.forced_expand,
        }


@dataclass
class EpisodeResult:
    answer: str | None
    confidence: float | None
    rounds: list[RoundState]
    ranked_answers: list[str]
    retrieved_paths: list[tuple[tuple[str, ...], tuple[str, ...]]]
    reasoner_calls: int
    tokens: int
    edits_applied: int
    failed: bool = False
    failure: str | None = None
    subgraph: Subgraph | None = field(default=None, repr=False)

    def trace_jsonl(self) -> str:
        return "\n".join(
            json.dumps(r.to_record(), sort_keys=True) for r in self.rounds
        )


def _edit_repr(edit: GraphEdit, graph: KnowledgeGraph) -> str:
    if isinstance(edit, ExpandSeed):
        return f"ExpandSeed({graph.entity_labels[edit.entity]}, {edit.radius})"
    if isinstance(edit, SwapSeed):
        return (f"SwapSeed({graph.entity_labels[edit.old_entity]}, "
                f"{graph.entity_labels[edit.new_entity]})")
    name = type(edit).__name__
    h, r, t = graph.triple_labels(edit.triple)
    return f"{name}({h}, {r}, {t})"


def _spearman(a: np.ndarray, b: np.ndarray) -> float | None:
    if len(a) < 2 or np.allclose(a, a[0]) or np.allclose(b, b[0]):
        return None
    from scipy.stats import spearmanr

    rho = spearmanr(a, b).statistic
    return None if math.isnan(rho) else float(rho)


def run_loop(
    question: str,
    seeds: list[SeedCandidate],
    graph: KnowledgeGraph,
    config: RunConfig,
    reasoner,
    embeddings,
    scorer=None,
    verifier=None,
    trace_file=None,
) -> EpisodeResult:
    """Run one retrieval-reasoning episode of up to ``config.rounds`` rounds.

    Terminates when the reasoner's confidence exceeds the threshold or the
    round budget is exhausted. Reasoner service failures mark the episode
    failed with a partial trace; an empty candidate set forces an EXPAND
    edit on the highest-confidence seed.
    """
    if not seeds:
        raise ValueError("seeds must be nonempty")
    config.validate()
    coeffs = config.coefficients()
    budget = config.budget()

    subgraph = expand_neighborhood(
        graph, seeds, config.radius, config.knn, embeddings)
    qvec = query_embedding(embeddings, question, graph)
    seed_ids = [s.entity for s in seeds]
    seed_conf = {s.entity: s.confidence for s in seeds}

    rounds: list[RoundState] = []
    reasoner_calls = tokens = edits_applied = 0
    answer: str | None = None
    confidence: float | None = None
    ranked_answers: list[str] = []
    retrieved: list = []
    failed = False
    failure = None

    def emit(state: RoundState):
        rounds.append(state)
        if trace_file is not None:
            trace_file.write(json.dumps(state.to_record(), sort_keys=True) + "\n")

    for t in range(config.rounds):
        paths = enumerate_paths(
            subgraph, seed_ids, budget, qvec, coeffs, embeddings,
            rng_seed=config.seed + 1000 * t, pair_mode=config.pair_mode)

        def forced_expand():
            nonlocal edits_applied
            top_seed = max(seeds, key=lambda s: (s.confidence, -s.entity))
            edit = ExpandSeed(top_seed.entity, radius=1)
            apply_edits(subgraph, graph, [edit], round_index=t + 1)
            edits_applied += 1
            emit(RoundState(
                round=t, subgraph_nodes=len(subgraph.nodes),
                subgraph_edges=len(subgraph.edges), num_candidates=0,
                selected=[], answer=None, confidence=None,
                diagnostic=f"{EXPAND}({graph.entity_labels[top_seed.entity]}, 1)",
                edits=[_edit_repr(edit, graph)],
                reasoner_calls=reasoner_calls, tokens=tokens,
                edits_applied=edits_applied, forced_expand=True))

        if not paths:
            forced_expand()
            continue

        candidates = score_candidates(
            paths, qvec, coeffs, embeddings, graph, subgraph, scorer=scorer)
        gumbel_soft_weights(candidates, GumbelConfig(
            temperature=config.tau, rng_seed=config.seed + 7919 * (t + 1),
            deterministic=config.deterministic))
        for c in candidates:
            c.verifier = 1.0 if config.no_verifier else verify(
                c.path, qvec, embeddings, graph, refuted=subgraph.refuted,
                verifier=verifier, coeffs=coeffs, subgraph=subgraph)

        try:
            selected = select_and_inject(
                candidates, top_k=config.effective_top_k(),
                threshold=config.select_threshold,
                seed_confidence=seed_conf, rho=config.rho)
        except EmptySelectionError:
            forced_expand()
            continue

        latents = [encode_path(c.path, embeddings, graph, i)
                   for i, c in enumerate(selected)]
        mixture = context_mixture([
            (lat, c.adjusted_injection) for lat, c in zip(latents, selected)
        ])

        try:
            reply = reasoner.reason(question, selected, mixture=mixture)
        except ServiceError as exc:
            failed = True
            failure = str(exc)
            emit(RoundState(
                round=t, subgraph_nodes=len(subgraph.nodes),
                subgraph_edges=len(subgraph.edges),
                num_candidates=len(candidates), selected=[], answer=None,
                confidence=None, diagnostic=None, edits=[],
                reasoner_calls=reasoner_calls, tokens=tokens,
                edits_applied=edits_applied))
            break

        reasoner_calls += 1
        tokens += reply.tokens

        align = spearman = None
        if reply.attention is not None and not config.no_align_diagnostics:
            key_index = mixture.key_index
            alphas = {c_i: selected[c_i].adjusted_injection
                      for c_i in range(len(selected))}
            try:
                masses = {p: attention_mass(reply.attention, key_index, p)
                          for p in key_index}
                align = alignment_loss(alphas, masses)
                spearman = _spearman(
                    np.array([alphas[p] for p in sorted(alphas)]),
                    np.array([masses[p] for p in sorted(alphas)]))
            except (ValueError, IndexError):
                pass  # external attention may not partition our keys

        # collect before edits mutate anything
        retrieved = [
            (tuple(graph.entity_labels[n] for n in c.path.nodes),
             tuple(graph.relation_labels[r] for r in c.path.relations))
            for c in candidates
        ]
        terminal_mass: dict[str, float] = {}
        for c in selected:
            label = graph.entity_labels[c.path.terminal]
            terminal_mass[label] = terminal_mass.get(label, 0.0) + c.adjusted_injection
        ranked_answers = [label for label, _ in sorted(
            terminal_mass.items(), key=lambda kv: (-kv[1], kv[0]))]

        answer = reply.answer
        confidence = reply.confidence
        done = reply.confidence > config.conf_threshold
        last_round = t == config.rounds - 1

        edits: list[GraphEdit] = []
        diagnostic = reply.diagnostic
        if not done and not last_round:
            message = parse_diagnostic(
                reply.diagnostic, uncertainty=1.0 - reply.confidence)
            edits = map_diagnostic(message, subgraph, graph,
                                   candidates=candidates)
            remaining = config.edit_budget - edits_applied
            edits = edits[:max(remaining, 0)]

            diag_text = (message.canonical() if message is not None
                         else reply.diagnostic)
            context = DiagnosticContext(
                mu=embeddings.embed(diag_text) if embeddings.has(diag_text)
                else None,
                uncertainty=1.0 - reply.confidence)
            edge_deltas = soft_mask(
                context, candidates, edits,
                gain=config.mask_gain,
                uncertainty_gain=config.mask_uncertainty_gain)
            per_path = path_mask(
                context, candidates, edits,
                gain=config.mask_gain,
                uncertainty_gain=config.mask_uncertainty_gain)
            kept = set(discretize_topk(
                per_path, k=len(candidates),
                rng_seed=config.seed + 104729 * (t + 1),
                deterministic=config.deterministic,
                tau=config.discretize_tau))
            by_key = {c.path.key(): c for c in candidates}
            for key in kept:
                for e in by_key[key].path.edges:
                    subgraph.soft[e] = edge_deltas[e]
            apply_edits(subgraph, graph, edits, round_index=t + 1)
            edits_applied += len(edits)

        emit(RoundState(
            round=t, subgraph_nodes=len(subgraph.nodes),
            subgraph_edges=len(subgraph.edges),
            num_candidates=len(candidates),
            selected=[
                {
                    "path": c.path.verbalize(graph),
                    "u": c.u,
                    "soft_weight": c.soft_weight,
                    "verifier": c.verifier,
                    "injection": c.injection,
                    "adjusted_injection": c.adjusted_injection,
                }
                for c in selected
            ],
            answer=reply.answer, confidence=reply.confidence,
            diagnostic=diagnostic,
            edits=[_edit_repr(e, graph) for e in edits],
            reasoner_calls=reasoner_calls, tokens=tokens,
            edits_applied=edits_applied,
            alignment=align, attn_spearman=spearman))

        if done:
            break

    return EpisodeResult(
        answer=answer, confidence=confidence, rounds=rounds,
        ranked_answers=ranked_answers, retrieved_paths=retrieved,
        reasoner_calls=reasoner_calls, tokens=tokens,
        edits_applied=edits_applied, failed=failed, failure=failure,
        subgraph=subgraph)
