"""Directed acyclic graphs stored as parent sets."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Dag:
    """A DAG over variables ``0..n-1`` given by ``parents[i]`` = sorted parents of i."""

    parents: tuple[tuple[int, ...], ...]

    def __init__(self, parents: Iterable[Iterable[int]]):
        ps = tuple(tuple(sorted(set(int(j) for j in p))) for p in parents)
        n = len(ps)
        for i, p in enumerate(ps):
            if i in p:
                raise ValueError(f"variable {i} is its own parent")
            if any(j < 0 or j >= n for j in p):
                raise ValueError(f"parent index out of range for variable {i}")
        object.__setattr__(self, "parents", ps)
        if self.topological_order() is None:
            raise ValueError("graph has a directed cycle")

    @classmethod
    def empty(cls, n: int) -> "Dag":
        return cls([()] * n)

    @classmethod
    def from_masks(cls, masks: Sequence[int]) -> "Dag":
        n = len(masks)
        return cls([[j for j in range(n) if m >> j & 1] for m in masks])

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Dag":
        ps = [[] for _ in range(n)]
        for a, b in edges:
            ps[b].append(a)
        return cls(ps)

    @property
    def n(self) -> int:
        return len(self.parents)

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << j for j in p) for p in self.parents)

    def edges(self) -> list[tuple[int, int]]:
        return [(j, i) for i, p in enumerate(self.parents) for j in p]

    def arc_count(self) -> int:
        return sum(len(p) for p in self.parents)

    def topological_order(self) -> list[int] | None:
        """Kahn's algorithm; ``None`` if the graph is cyclic."""
        n = len(self.parents)
        indeg = [len(p) for p in self.parents]
        children = [[] for _ in range(n)]
        for i, p in enumerate(self.parents):
            for j in p:
                children[j].append(i)
        ready = [i for i in range(n) if indeg[i] == 0]
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return order if len(order) == n else None

    def with_parents(self, child: int, parents: Iterable[int]) -> "Dag":
        ps = list(self.parents)
        ps[child] = tuple(parents)
        return Dag(ps)

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        names = list(names) if names is not None else [f"V{i}" for i in range(self.n)]
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "names": names,
            "parents": {str(i): list(p) for i, p in enumerate(self.parents)},
        }

    def to_json(self, names: Sequence[str] | None = None) -> str:
        return json.dumps(self.to_dict(names), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "Dag":
        n = int(doc["n"])
        ps = [doc["parents"].get(str(i), []) for i in range(n)]
        return cls(ps)

    def to_dot(self, names: Sequence[str] | None = None) -> str:
        names = list(names) if names is not None else [f"V{i}" for i in range(self.n)]
        lines = ["digraph G {"]
        lines += [f'  "{names[i]}";' for i in range(self.n)]
        lines += [f'  "{names[a]}" -> "{names[b]}";' for a, b in sorted(self.edges())]
        lines.append("}")
        return "\n".join(lines) + "\n"
