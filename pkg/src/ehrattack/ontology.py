"""Concept hierarchy, co-occurrence statistics and synonym code selection.

The hierarchy is a single-parent forest hung under a virtual ``ROOT``. Only
leaves appear in patient records; internal nodes group them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import ParseError, StructureError, UnknownCode
from .records import CodeKind, Cohort

ROOT = "ROOT"


class Ontology:
    """Immutable single-parent concept forest.

    Parameters
    ----------
    parent : mapping of child id to parent id; top-level concepts map to ``ROOT``.
    kinds : optional mapping of top-level concept id to :class:`CodeKind`.
    """

    def __init__(self, parent: dict, kinds: Optional[dict] = None):
        if not parent:
            raise StructureError("ontology has no nodes")
        if ROOT in parent:
            raise StructureError(f"{ROOT} cannot have a parent")
        self._parent = dict(parent)
        children: dict = {}
        for child, par in self._parent.items():
            if par != ROOT and par not in self._parent:
                raise StructureError(f"parent {par!r} of {child!r} is not declared as a node")
            children.setdefault(par, []).append(child)
        self._children = {k: tuple(sorted(v)) for k, v in children.items()}
        self._depth: dict = {}
        for node in sorted(self._parent):
            self._resolve_depth(node)
        self.nodes = frozenset(self._parent)
        self.leaves = frozenset(n for n in self._parent if n not in self._children)
        self._kinds = dict(kinds or {})

    def _resolve_depth(self, node):
        path = []
        cur = node
        seen = set()
        while cur != ROOT and cur not in self._depth:
            if cur in seen:
                raise StructureError(f"cycle through {cur!r}")
            seen.add(cur)
            path.append(cur)
            cur = self._parent[cur]
        base = 0 if cur == ROOT else self._depth[cur]
        for i, n in enumerate(reversed(path), start=1):
            self._depth[n] = base + i

    def __contains__(self, node):
        return node in self._parent

    def __len__(self):
        return len(self._parent)

    def is_leaf(self, code) -> bool:
        return code in self.leaves

    def parent(self, node: str) -> str:
        try:
            return self._parent[node]
        except KeyError:
            raise UnknownCode(f"unknown concept {node!r}") from None

    def children(self, node: str) -> tuple:
        return self._children.get(node, ())

    def depth(self, node: str) -> int:
        """Top-level concepts have depth 1; the virtual root has depth 0."""
        if node == ROOT:
            return 0
        try:
            return self._depth[node]
        except KeyError:
            raise UnknownCode(f"unknown concept {node!r}") from None

    def ancestors(self, node: str) -> list:
        """Proper ancestors, nearest first, excluding the virtual root."""
        out = []
        cur = self.parent(node)
        while cur != ROOT:
            out.append(cur)
            cur = self._parent[cur]
        return out

    def top_level(self, node: str) -> str:
        anc = self.ancestors(node)
        return anc[-1] if anc else node

    def kind_of(self, code: str) -> Optional[CodeKind]:
        return self._kinds.get(self.top_level(code))

    def sorted_leaves(self) -> list:
        return sorted(self.leaves)

    def edges(self) -> list:
        """(child, parent) pairs ordered by depth then id; stable for serialization."""
        return sorted(self._parent.items(), key=lambda e: (self._depth[e[0]], e[0]))


def parse_ontology(lines: Iterable[str]) -> Ontology:
    parent: dict = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ParseError(f"line {lineno}: expected '<child>\\t<parent>', got {line!r}")
        child, par = parts
        if child == par:
            raise StructureError(f"line {lineno}: {child!r} is its own parent")
        if child in parent:
            if parent[child] == par:
                continue
            raise StructureError(
                f"line {lineno}: {child!r} has two parents ({parent[child]!r}, {par!r})")
        parent[child] = par
    return Ontology(parent)


def load_ontology(path) -> Ontology:
    with open(path, encoding="utf-8") as fh:
        return parse_ontology(fh)


def ontology_tsv(ontology: Ontology) -> str:
    return "".join(f"{c}\t{p}\n" for c, p in ontology.edges())


def write_ontology(ontology: Ontology, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ontology_tsv(ontology))


def siblings(ontology: Ontology, code: str) -> frozenset:
    """Other leaves under the same parent as `code` (the virtual root counts as a parent)."""
    if not ontology.is_leaf(code):
        raise UnknownCode(f"{code!r} is not a leaf of the ontology")
    par = ontology.parent(code)
    return frozenset(c for c in ontology.children(par) if c != code and ontology.is_leaf(c))


@dataclass(frozen=True)
class CooccurrenceTable:
    """Exact patient (or visit) counts behind conditional co-occurrence probabilities.

    ``conditional(anchor, candidate)`` is ``Pr(candidate | anchor)`` by default;
    ``direction="anchor_given_candidate"`` flips the conditioning.
    """

    codes: tuple
    pair_counts: np.ndarray
    scope: str = "record"
    direction: str = "candidate_given_anchor"
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.direction not in ("candidate_given_anchor", "anchor_given_candidate"):
            raise ValueError(f"unknown conditioning direction {self.direction!r}")
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.codes)})

    def support(self, code: str) -> int:
        i = self._index.get(code)
        return 0 if i is None else int(self.pair_counts[i, i])

    def joint(self, a: str, b: str) -> int:
        i, j = self._index.get(a), self._index.get(b)
        if i is None or j is None:
            return 0
        return int(self.pair_counts[i, j])

    def conditional(self, anchor: str, candidate: str) -> Optional[float]:
        """None when the conditioning code never occurs."""
        given = anchor if self.direction == "candidate_given_anchor" else candidate
        denom = self.support(given)
        if denom == 0:
            return None
        return self.joint(anchor, candidate) / denom


def build_cooccurrence(cohort: Cohort, scope: str = "record",
                       direction: str = "candidate_given_anchor") -> CooccurrenceTable:
    """Count code pairs over patients (``scope="record"``) or over single visits."""
    if len(cohort) == 0:
        raise ValueError("co-occurrence needs a non-empty cohort")
    if scope not in ("record", "visit"):
        raise ValueError(f"unknown co-occurrence scope {scope!r}")
    codes = tuple(cohort.vocabulary())
    index = {c: i for i, c in enumerate(codes)}
    baskets = []
    for p in cohort:
        if scope == "record":
            baskets.append(p.record.all_codes())
        else:
            baskets.extend(v.codes for v in p.record.visits if v.codes)
    incidence = np.zeros((len(baskets), len(codes)), dtype=np.int64)
    for r, basket in enumerate(baskets):
        incidence[r, [index[c] for c in basket]] = 1
    counts = incidence.T @ incidence
    return CooccurrenceTable(codes, counts, scope, direction)


@dataclass(frozen=True)
class SynonymSet:
    anchor: str
    members: tuple

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)


def synonym_set(ontology: Ontology, table: CooccurrenceTable, anchor: str,
                p: float) -> SynonymSet:
    """Siblings of `anchor` whose conditional co-occurrence strictly exceeds `p`.

    Members are ordered by probability (descending) then id, so downstream
    tie-breaks are reproducible.
    """
    scored = []
    for s in siblings(ontology, anchor):
        prob = table.conditional(anchor, s)
        if prob is not None and prob > p:
            scored.append((-prob, s))
    scored.sort()
    return SynonymSet(anchor, tuple(s for _, s in scored))
