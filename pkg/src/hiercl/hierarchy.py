"""Sense taxonomy, label sequences, and sub-path Dice similarity.

Senses get dense integer ids in level-major order: all level-1 senses
first, then level 2, and so on.  A label sequence is a tuple of global ids,
one per level, where every adjacent pair is a declared parent-child edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class HierarchyError(ValueError):
    """Raised for malformed hierarchy documents or invalid label sequences."""


@dataclass(frozen=True)
class Sense:
    id: int
    level: int  # 1-based
    name: str
    parents: frozenset[int] = field(default_factory=frozenset)


class SenseHierarchy:
    """Immutable M-level sense taxonomy.

    Parameters
    ----------
    levels : sequence of sequences of str
        Sense names per level, top level first.
    edges : iterable of (parent, child) name pairs
        Each child must sit exactly one level below its parent.  Children
        may have several parents (DAG), which is how connectives shared
        between senses are represented.
    """

    def __init__(self, levels: Sequence[Sequence[str]], edges: Iterable[Sequence[str]]):
        if len(levels) == 0:
            raise HierarchyError("hierarchy needs at least one level")
        names_to_ids: list[dict[str, int]] = []
        senses: list[Sense] = []
        for depth, names in enumerate(levels, start=1):
            if len(names) == 0:
                raise HierarchyError(f"level {depth} is empty")
            index: dict[str, int] = {}
            for name in names:
                if name in index:
                    raise HierarchyError(f"duplicate name {name!r} within level {depth}")
                index[name] = len(senses)
                senses.append(Sense(len(senses), depth, str(name)))
            names_to_ids.append(index)

        parents: list[set[int]] = [set() for _ in senses]
        edge_list: list[tuple[int, int]] = []
        for pair in edges:
            if len(pair) != 2:
                raise HierarchyError(f"edge must be a [parent, child] pair, got {pair!r}")
            parent, child = pair
            p_levels = [m for m, idx in enumerate(names_to_ids) if parent in idx]
            c_levels = [m for m, idx in enumerate(names_to_ids) if child in idx]
            if not p_levels:
                raise HierarchyError(f"unknown parent name {parent!r}")
            if not c_levels:
                raise HierarchyError(f"unknown child name {child!r}")
            # a name may recur at several levels; pick the reading that links adjacent levels
            match = [(p, c) for p in p_levels for c in c_levels if c == p + 1]
            if not match:
                if any(c == p for p in p_levels for c in c_levels):
                    raise HierarchyError(f"edge {parent!r} -> {child!r} lies within a level")
                raise HierarchyError(f"edge {parent!r} -> {child!r} skips a level")
            p, c = match[0]
            pid, cid = names_to_ids[p][parent], names_to_ids[c][child]
            if pid not in parents[cid]:
                parents[cid].add(pid)
                edge_list.append((pid, cid))

        for sense in senses:
            if sense.level >= 2 and not parents[sense.id]:
                raise HierarchyError(
                    f"sense {sense.name!r} at level {sense.level} has no parent"
                )

        self._senses = tuple(
            Sense(s.id, s.level, s.name, frozenset(parents[s.id])) for s in senses
        )
        self._names_to_ids = tuple(names_to_ids)
        self._edges = tuple(sorted(edge_list))
        self._edge_set = frozenset(self._edges)
        self._level_names = tuple(tuple(str(n) for n in names) for names in levels)

    # -- basic shape -----------------------------------------------------

    @property
    def n_levels(self) -> int:
        return len(self._level_names)

    @property
    def senses(self) -> tuple[Sense, ...]:
        return self._senses

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    @property
    def level_sizes(self) -> tuple[int, ...]:
        return tuple(len(names) for names in self._level_names)

    @cached_property
    def level_offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.cumsum((0,) + self.level_sizes[:-1]))

    def __len__(self) -> int:
        return len(self._senses)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SenseHierarchy):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash((self._level_names, self._edges))

    def __repr__(self) -> str:
        return f"SenseHierarchy(level_sizes={self.level_sizes}, n_edges={len(self._edges)})"

    # -- lookups ---------------------------------------------------------

    def sense_id(self, level: int, name: str) -> int:
        """Global id of ``name`` at 1-based ``level``."""
        try:
            return self._names_to_ids[level - 1][name]
        except (IndexError, KeyError):
            raise HierarchyError(f"unknown sense {name!r} at level {level}") from None

    def local_index(self, sense_id: int) -> int:
        sense = self._senses[sense_id]
        return sense_id - self.level_offsets[sense.level - 1]

    def name(self, sense_id: int) -> str:
        return self._senses[sense_id].name

    def is_edge(self, parent: int, child: int) -> bool:
        return (parent, child) in self._edge_set

    # -- label sequences -------------------------------------------------

    def sequence(self, names: Sequence[str]) -> tuple[int, ...]:
        """Validate a sequence of sense names, one per level, and return ids."""
        if len(names) != self.n_levels:
            raise HierarchyError(
                f"label sequence has {len(names)} senses, hierarchy has {self.n_levels} levels"
            )
        ids = tuple(self.sense_id(m, n) for m, n in enumerate(names, start=1))
        self.validate(ids)
        return ids

    def validate(self, seq: Sequence[int]) -> None:
        if len(seq) != self.n_levels:
            raise HierarchyError(
                f"label sequence has {len(seq)} senses, hierarchy has {self.n_levels} levels"
            )
        for m, sid in enumerate(seq, start=1):
            if not 0 <= sid < len(self) or self._senses[sid].level != m:
                raise HierarchyError(f"sense id {sid} is not a level-{m} sense")
        for parent, child in zip(seq[:-1], seq[1:]):
            if not self.is_edge(parent, child):
                raise HierarchyError(
                    f"{self.name(parent)!r} -> {self.name(child)!r} is not a declared edge"
                )

    def names(self, seq: Sequence[int]) -> tuple[str, ...]:
        return tuple(self.name(s) for s in seq)

    def paths(self) -> list[tuple[int, ...]]:
        """Every valid full label sequence, in lexicographic id order."""
        children: dict[int, list[int]] = {}
        for p, c in self._edges:
            children.setdefault(p, []).append(c)
        out: list[tuple[int, ...]] = []

        def walk(prefix: tuple[int, ...]) -> None:
            if len(prefix) == self.n_levels:
                out.append(prefix)
                return
            for c in sorted(children.get(prefix[-1], ())):
                walk(prefix + (c,))

        for root in range(self.level_sizes[0]):
            walk((root,))
        return out

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "levels": [list(names) for names in self._level_names],
            "edges": [[self.name(p), self.name(c)] for p, c in self._edges],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SenseHierarchy":
        if not isinstance(doc, dict) or "levels" not in doc:
            raise HierarchyError("hierarchy document needs a 'levels' list")
        return cls(doc["levels"], doc.get("edges", []))

    @classmethod
    def tree(cls, widths: Sequence[int], prefixes: str = "TSCDEFGH") -> "SenseHierarchy":
        """Balanced-ish tree with the given level widths.

        Sense ``i`` at level m hangs under sense ``floor(i * w[m-1] / w[m])``
        of the level above, so 4/8/16 yields two children per node.
        """
        if any(w < 1 for w in widths):
            raise HierarchyError("level widths must be positive")
        if any(b < a for a, b in zip(widths[:-1], widths[1:])):
            raise HierarchyError("level widths must be non-decreasing for a tree")
        levels = [[f"{prefixes[m % len(prefixes)]}{i}" for i in range(w)] for m, w in enumerate(widths)]
        edges = []
        for m in range(1, len(widths)):
            for i in range(widths[m]):
                edges.append([levels[m - 1][i * widths[m - 1] // widths[m]], levels[m][i]])
        return cls(levels, edges)


def load_hierarchy(source: str | Path | dict) -> SenseHierarchy:
    """Read a hierarchy document (``{"levels": [...], "edges": [...]}``)."""
    if isinstance(source, dict):
        return SenseHierarchy.from_dict(source)
    with open(source, encoding="utf-8") as fh:
        return SenseHierarchy.from_dict(json.load(fh))


def save_hierarchy(hierarchy: SenseHierarchy, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(hierarchy.to_dict(), fh, indent=1, ensure_ascii=False)
        fh.write("\n")


def adjacency(hierarchy: SenseHierarchy) -> np.ndarray:
    """Symmetric 0/1 adjacency with self loops over all senses."""
    n = len(hierarchy)
    A = np.eye(n)
    for p, c in hierarchy.edges:
        A[p, c] = A[c, p] = 1.0
    return A


def subpaths(seq: Sequence) -> list[frozenset]:
    """All contiguous level ranges of ``seq`` as sets of (level, label) pairs.

    Ordered by range length, then start level, so for three levels the
    result reads T, S, C, TS, SC, TSC.
    """
    M = len(seq)
    return [
        frozenset((m + 1, seq[m]) for m in range(start, start + length))
        for length in range(1, M + 1)
        for start in range(0, M - length + 1)
    ]


def dice(a: Iterable, b: Iterable) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        raise ValueError("Dice coefficient undefined for two empty sets")
    return 2.0 * len(a & b) / (len(a) + len(b))


def local_score(y_i: Sequence, y_j: Sequence) -> float:
    """Mean Dice coefficient over corresponding sub-paths of two label sequences."""
    if len(y_i) != len(y_j):
        raise HierarchyError("label sequences come from hierarchies of different depth")
    p_i, p_j = subpaths(y_i), subpaths(y_j)
    return sum(dice(a, b) for a, b in zip(p_i, p_j)) / len(p_i)


def score_matrix(seqs_a: np.ndarray, seqs_b: np.ndarray | None = None) -> np.ndarray:
    """Pairwise :func:`local_score` for two stacks of label sequences.

    Vectorized: the Dice term of a sub-path over levels [s, e) reduces to the
    fraction of agreeing levels in that range, because each sub-path set
    holds exactly one element per level.
    """
    a = np.asarray(seqs_a)
    b = a if seqs_b is None else np.asarray(seqs_b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise HierarchyError("score_matrix expects two (n, M) arrays with equal M")
    M = a.shape[1]
    eq = (a[:, None, :] == b[None, :, :]).astype(np.float64)
    csum = np.concatenate([np.zeros(eq.shape[:2] + (1,)), np.cumsum(eq, axis=2)], axis=2)
    total = np.zeros(eq.shape[:2])
    for length in range(1, M + 1):
        for start in range(0, M - length + 1):
            total += (csum[..., start + length] - csum[..., start]) / length
    return total / (M * (M + 1) // 2)
