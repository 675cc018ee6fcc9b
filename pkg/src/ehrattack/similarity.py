"""Record embeddings and cosine similarity between records.

The reference encoder gives every ontology node a pseudo-random unit vector
derived from a hash of ``(seed, node id)``. A code's embedding adds its
ancestors' vectors with geometric decay, so siblings share most of their
direction. Visits average their codes; the record sums visits with recency
weights and is normalized to unit length.
"""
from __future__ import annotations

import hashlib
import weakref
from collections import OrderedDict
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import DegenerateRecord, UnknownCode
from .ontology import Ontology
from .records import PatientRecord


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 64
    gamma: float = 0.5
    rho: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("encoder.dim must be a positive integer")
        if not 0 < self.gamma <= 1:
            raise ValueError("encoder.gamma must lie in (0, 1]")
        if not 0 < self.rho <= 1:
            raise ValueError("encoder.rho must lie in (0, 1]")
        if self.seed < 0:
            raise ValueError("encoder.seed must be non-negative")


class Encoder(Protocol):
    def encode(self, record: PatientRecord) -> np.ndarray: ...


def node_vector(node: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x1f{node}".encode(), digest_size=16).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class OntologyHashEncoder:
    """Deterministic ontology-aware encoder; immutable once built."""

    def __init__(self, ontology: Ontology, config: EncoderConfig = EncoderConfig(),
                 cache_size: int = 50_000):
        self.ontology = ontology
        self.config = config
        self.codes = ontology.sorted_leaves()
        self._index = {c: i for i, c in enumerate(self.codes)}
        node_vecs = {}
        mat = np.zeros((len(self.codes), config.dim))
        for i, c in enumerate(self.codes):
            d = ontology.depth(c)
            for a in [c] + ontology.ancestors(c):
                if a not in node_vecs:
                    node_vecs[a] = node_vector(a, config.dim, config.seed)
                mat[i] += config.gamma ** (d - ontology.depth(a)) * node_vecs[a]
        self.code_matrix = mat
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size

    def code_embedding(self, code: str) -> np.ndarray:
        try:
            return self.code_matrix[self._index[code]].copy()
        except KeyError:
            raise UnknownCode(f"{code!r} is not an ontology leaf") from None

    def _raw(self, record: PatientRecord) -> np.ndarray:
        rows, weights = [], []
        n = record.n_visits
        for v in record.visits:
            if not v.codes:
                continue
            w = self.config.rho ** (n - v.index) / len(v.codes)
            for c in sorted(v.codes):
                try:
                    rows.append(self._index[c])
                except KeyError:
                    raise UnknownCode(f"{c!r} is not an ontology leaf") from None
                weights.append(w)
        if not rows:
            raise DegenerateRecord(f"record {record.id} has no codes")
        return np.asarray(weights) @ self.code_matrix[rows]

    def encode(self, record: PatientRecord) -> np.ndarray:
        hit = self._cache.get(record)
        if hit is not None:
            self._cache.move_to_end(record)
            return hit
        raw = self._raw(record)
        norm = np.linalg.norm(raw)
        if norm == 0.0:
            raise DegenerateRecord(f"record {record.id} embeds to the zero vector")
        vec = raw / norm
        vec.flags.writeable = False
        self._cache[record] = vec
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateRecord("cosine with a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def record_similarity(encoder: Encoder, a: PatientRecord, b: PatientRecord) -> float:
    """SSF for an arbitrary encoder."""
    return cosine(encoder.encode(a), encoder.encode(b))


_encoders: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def get_encoder(ontology: Ontology, config: EncoderConfig = EncoderConfig()) -> OntologyHashEncoder:
    """Shared reference encoder for an (ontology, config) pair."""
    per_onto = _encoders.setdefault(ontology, {})
    enc = per_onto.get(config)
    if enc is None:
        enc = per_onto[config] = OntologyHashEncoder(ontology, config)
    return enc


def encode(record: PatientRecord, ontology: Ontology,
           config: EncoderConfig = EncoderConfig()) -> np.ndarray:
    return get_encoder(ontology, config).encode(record)


def ssf(a: PatientRecord, b: PatientRecord, ontology: Ontology,
        config: EncoderConfig = EncoderConfig()) -> float:
    return record_similarity(get_encoder(ontology, config), a, b)
