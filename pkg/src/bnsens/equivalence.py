"""Markov equivalence identities: skeleton plus v-structures."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .dag import Dag


@dataclass(frozen=True, order=True)
class EquivalenceKey:
    skeleton: frozenset[tuple[int, int]]
    v_structures: frozenset[tuple[int, int, int]]

    def to_json(self) -> str:
        """Canonical JSON string with sorted edge and triple lists."""
        return json.dumps({"skeleton": sorted(self.skeleton),
                           "v_structures": sorted(self.v_structures)},
                          separators=(",", ":"))

    def digest(self, length: int = 16) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:length]


def skeleton(dag: Dag) -> frozenset[tuple[int, int]]:
    """Undirected edges as ``(low, high)`` pairs."""
    return frozenset((min(a, b), max(a, b)) for a, b in dag.edges())


def v_structures(dag: Dag) -> frozenset[tuple[int, int, int]]:
    """Colliders ``a -> c <- b`` with ``a < b`` non-adjacent, as ``(a, c, b)``."""
    skel = skeleton(dag)
    out = set()
    for c, ps in enumerate(dag.parents):
        for x in range(len(ps)):
            for y in range(x + 1, len(ps)):
                a, b = ps[x], ps[y]
                if (a, b) not in skel:
                    out.add((a, c, b))
    return frozenset(out)


def equivalence_key(dag: Dag) -> EquivalenceKey:
    return EquivalenceKey(skeleton(dag), v_structures(dag))


def same_independence_model(d1: Dag, d2: Dag) -> bool:
    if d1.n != d2.n:
        raise ValueError(f"graphs have different sizes ({d1.n} and {d2.n})")
    return equivalence_key(d1) == equivalence_key(d2)


def arc_count(dag: Dag) -> int:
    return dag.arc_count()
