"""Embedding providers and similarity primitives.

Three provider modes share the ``embed(label) -> vector`` interface:

* hash-deterministic — seeded pseudorandom unit vectors derived from the
  label text; zero-dependency default, stable across runs and platforms.
* file — vectors loaded from a TSV (``label<TAB>v1,v2,...``).
* external service — HTTP POST JSON ``{"items": [...]}`` returning
  ``{"vectors": [[...]]}``.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .errors import ParseError, ServiceError, UnknownItemError, ZeroVectorError

EMBED_URL_ENV = "KGPATHS_EMBED_URL"
EMBED_TOKEN_ENV = "KGPATHS_EMBED_TOKEN"


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity clamped to [-1, 1]. Zero vectors are an error, not
    a silent 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class HashEmbeddings:
    """Deterministic unit vectors seeded from the item label.

    The label digest (not Python's salted hash) seeds the generator, so the
    same (seed, label) pair maps to the same vector everywhere.
    """

    mode = "hash-deterministic"

    def __init__(self, dimension: int = 64, seed: int = 0):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, label: str) -> np.ndarray:
        vec = self._cache.get(label)
        if vec is None:
            digest = hashlib.blake2b(
                label.encode("utf-8"), digest_size=8, key=str(self.seed).encode()
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            raw = rng.standard_normal(self.dimension)
            norm = np.linalg.norm(raw)
            if norm == 0.0:  # standard normal draw; effectively unreachable
                raw[0] = 1.0
                norm = 1.0
            vec = raw / norm
            vec.setflags(write=False)
            self._cache[label] = vec
        return vec

    def has(self, label: str) -> bool:
        return True


class FileEmbeddings:
    """Vectors loaded from TSV ``label<TAB>v1,v2,...`` or a mapping."""

    mode = "file"

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise ValueError("empty embedding table")
        dims = {len(v) for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dimension = dims.pop()
        self._vectors = {}
        for label, vec in vectors.items():
            arr = np.asarray(vec, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite embedding for {label!r}")
            arr.setflags(write=False)
            self._vectors[label] = arr

    @classmethod
    def load(cls, source) -> "FileEmbeddings":
        vectors: dict[str, np.ndarray] = {}
        if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
            fh = open(source, encoding="utf-8")
            close = True
        else:
            fh, close = source, False
        try:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise ParseError("expected label<TAB>v1,v2,...", lineno)
                label, values = fields
                try:
                    vectors[label] = np.array(
                        [float(x) for x in values.split(",")], dtype=float
                    )
                except ValueError as exc:
                    raise ParseError(str(exc), lineno) from None
        finally:
            if close:
                fh.close()
        return cls(vectors)

    def embed(self, label: str) -> np.ndarray:
        try:
            return self._vectors[label]
        except KeyError:
            raise UnknownItemError(f"no embedding for {label!r}") from None

    def has(self, label: str) -> bool:
        return label in self._vectors


class ServiceEmbeddings:
    """HTTP embedding service client with a per-instance result cache.

    Failures raise :class:`ServiceError` with ``retryable`` / ``retry_after``
    metadata; retry policy is the caller's decision.
    """

    mode = "external-service"

    def __init__(self, dimension: int, url: str | None = None,
                 token: str | None = None, timeout: float = 30.0, session=None):
        self.dimension = dimension
        self.url = url or os.environ.get(EMBED_URL_ENV)
        if not self.url:
            raise ValueError(f"no service URL given and {EMBED_URL_ENV} unset")
        self.token = token if token is not None else os.environ.get(EMBED_TOKEN_ENV)
        self.timeout = timeout
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, label: str) -> np.ndarray:
        if label not in self._cache:
            self.embed_many([label])
        return self._cache[label]

    def embed_many(self, labels: list[str]) -> list[np.ndarray]:
        missing = [l for l in labels if l not in self._cache]
        if missing:
            headers = {"Content-Type": "application/json"}
            if self.token:
                headers["Authorization"] = f"Bearer {self.token}"
            try:
                resp = self._session.post(
                    self.url, json={"items": missing}, headers=headers,
                    timeout=self.timeout,
                )
            except Exception as exc:  # connection-level failure: retryable
                raise ServiceError(
                    f"embedding service unreachable: {exc}", retryable=True
                ) from exc
            if resp.status_code != 200:
                retryable = resp.status_code in (429, 502, 503, 504)
                retry_after = resp.headers.get("Retry-After")
                raise ServiceError(
                    f"embedding service returned {resp.status_code}",
                    retryable=retryable,
                    retry_after=float(retry_after) if retry_after else None,
                    status=resp.status_code,
                )
            vectors = resp.json()["vectors"]
            if len(vectors) != len(missing):
                raise ServiceError("vector count mismatch in service reply")
            for label, vec in zip(missing, vectors):
                arr = np.asarray(vec, dtype=float)
                if arr.shape != (self.dimension,):
                    raise ServiceError(
                        f"service vector for {label!r} has dimension "
                        f"{arr.shape}, expected ({self.dimension},)"
                    )
                arr.setflags(write=False)
                self._cache[label] = arr
        return [self._cache[l] for l in labels]

    def has(self, label: str) -> bool:
        return True


def query_embedding(provider, question: str, graph) -> np.ndarray:
    """Embed a question.

    If the provider knows the full question string (file mode fixtures),
    use that directly. Otherwise average the embeddings of entity/relation
    labels overlapped by whitespace tokens of the question, L2-normalized;
    with no overlap at all, fall back to embedding the raw question text.
    """
    if provider.has(question):
        return provider.embed(question)

    lookup: dict[str, str] = {}
    for label in list(graph.entity_labels) + list(graph.relation_labels):
        lookup.setdefault(label.lower(), label)
        for part in label.replace("_", " ").split():
            lookup.setdefault(part.lower(), label)

    matched: list[str] = []
    for token in question.split():
        token = token.strip(".,;:?!\"'()").lower()
        if token in lookup:
            matched.append(lookup[token])

    if not matched:
        return provider.embed(question)
    mean = np.mean([provider.embed(label) for label in matched], axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise ZeroVectorError("query token embeddings cancel to zero")
    return mean / norm
