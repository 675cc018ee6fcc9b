from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UnknownCode
from ..records import PatientRecord


@dataclass(frozen=True)
class Vocabulary:
    codes: tuple

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.codes)})

    def __len__(self):
        return len(self.codes)

    def __contains__(self, code):
        return code in self._index

    def index(self, code: str) -> int:
        try:
            return self._index[code]
        except KeyError:
            raise UnknownCode(f"code {code!r} is not in the model vocabulary") from None


def featurize(record: PatientRecord, vocab: Vocabulary, rho: float = 0.7) -> np.ndarray:
    """Recency-weighted code counts: entry j is sum over visits n of rho**(N-n) * [j in v_n]."""
    x = np.zeros(len(vocab))
    n = record.n_visits
    for v in record.visits:
        w = rho ** (n - v.index)
        for c in v.codes:
            x[vocab.index(c)] += w
    return x


def featurize_many(records, vocab: Vocabulary, rho: float = 0.7) -> np.ndarray:
    return np.vstack([featurize(r, vocab, rho) for r in records]) if records else np.zeros((0, len(vocab)))
