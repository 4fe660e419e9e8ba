"""Exhaustive reference decision by backtracking over edge rotators.

Independent of the structural decision procedure: it enumerates rotation
systems edge by edge (edges of face-degree at most two have a unique cyclic
order) and prunes a branch as soon as some vertex has all incident edges
decided and its link rotation has positive genus.  The pruning is exact: any
completion of a pruned prefix induces the same positive-genus link, so both
existence answers and planar counts are unaffected.  Exponential in general;
usable for complexes whose rotation space is small.

Results use a three-valued status -- ``exists`` / ``not-exists`` /
``cap-exceeded`` -- rather than raising on large spaces, so batch callers can
tally capped instances as data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .complexes import TwoComplex
from .errors import OutOfImplementedRange
from .links import LinkGraph, link_at
from .rotation import (
    DartAddr,
    GraphRotation,
    LoopPairing,
    RotationSystem,
    enumerate_rotations,
    count_rotations,
    genus_of_rotation,
    induced_rotation,
)

__all__ = [
    "EXISTS",
    "NOT_EXISTS",
    "CAP_EXCEEDED",
    "EnumerationStats",
    "OracleResult",
    "LoopOracleResult",
    "rotation_space",
    "oracle_decide",
    "oracle_loop_planar",
]

EXISTS = "exists"
NOT_EXISTS = "not-exists"
CAP_EXCEEDED = "cap-exceeded"


@dataclass
class EnumerationStats:
    space: int = 0  # closed form: product over edges of (degree - 1)!
    assignments: int = 0  # rotators tried across all branches
    prunes: int = 0  # branches cut by a positive-genus link
    leaves: int = 0  # complete systems reached
    #: exact number of planar systems when the search ran exhaustively
    planar_count: Optional[int] = None


@dataclass(frozen=True)
class OracleResult:
    status: str
    system: Optional[RotationSystem]
    stats: EnumerationStats

    @property
    def embeddable(self) -> bool:
        if self.status == CAP_EXCEEDED:
            raise OutOfImplementedRange(
                f"oracle capped at space {self.stats.space}; no verdict"
            )
        return self.status == EXISTS


@dataclass(frozen=True)
class LoopOracleResult:
    status: str
    rotation: Optional[GraphRotation]
    stats: EnumerationStats

    @property
    def exists(self) -> bool:
        if self.status == CAP_EXCEEDED:
            raise OutOfImplementedRange(
                f"loop oracle capped at space {self.stats.space}; no verdict"
            )
        return self.status == EXISTS


def _edge_candidates(cx: TwoComplex, e: int) -> List[Tuple[DartAddr, ...]]:
    """All cyclic orders of the darts at e, smallest dart held first."""
    darts = sorted(cx.edge_faces(e))
    if len(darts) <= 2:
        return [tuple(darts)]
    first, rest = darts[0], darts[1:]
    return [(first,) + perm for perm in itertools.permutations(rest)]


def rotation_space(cx: TwoComplex) -> int:
    total = 1
    for e in cx.edges:
        d = cx.edge_degree(e)
        if d > 2:
            k = 1
            for i in range(1, d):
                k *= i
            total *= k
    return total


def oracle_decide(cx: TwoComplex, cap: int = 10**7, count_all: bool = False) -> OracleResult:
    """Search the rotation space for a planar system.

    Returns the lexicographically first witness on success.  With
    ``count_all`` the search continues past the first witness and fills in
    ``stats.planar_count`` exactly.
    """
    stats = EnumerationStats(space=rotation_space(cx))
    if stats.space > cap:
        return OracleResult(CAP_EXCEEDED, None, stats)
    edges = sorted(cx.edges)
    candidates = {e: _edge_candidates(cx, e) for e in edges}

    # After deciding edge e (scanning in id order), the links of these
    # vertices are fully determined and can be genus-checked.
    last_edge_at: Dict[int, int] = {}
    for v in cx.vertices:
        incident = cx.vertex_edges(v)
        if incident:
            last_edge_at[v] = max(incident)
    complete_after: Dict[int, List[int]] = {e: [] for e in edges}
    for v, e in last_edge_at.items():
        complete_after[e].append(v)
    links: Dict[int, LinkGraph] = {v: link_at(cx, v) for v in last_edge_at}

    chosen: Dict[int, Tuple[DartAddr, ...]] = {}
    found: List[RotationSystem] = []
    planar = 0

    def extend(i: int) -> bool:
        nonlocal planar
        if i == len(edges):
            stats.leaves += 1
            planar += 1
            if not found:
                found.append(RotationSystem(dict(chosen)))
            return not count_all
        e = edges[i]
        for rot in candidates[e]:
            chosen[e] = rot
            stats.assignments += 1
            ok = True
            for v in complete_after[e]:
                partial = RotationSystem(
                    {x: chosen[x] for x in cx.vertex_edges(v)}
                )
                link = links[v]
                if link.nodes and genus_of_rotation(
                    link, induced_rotation(cx, partial, v, link)
                ) != 0:
                    ok = False
                    stats.prunes += 1
                    break
            if ok and extend(i + 1):
                return True
            if not ok or count_all or not found:
                del chosen[e]
                continue
            return True  # pragma: no cover - unreachable guard
        return False

    extend(0)
    if count_all:
        stats.planar_count = planar
    system = found[0] if found else None
    return OracleResult(EXISTS if system is not None else NOT_EXISTS, system, stats)


def oracle_loop_planar(
    link, pairings: Sequence[LoopPairing], cap: int = 10**6
) -> LoopOracleResult:
    """Exhaustive search for a genus-zero rotation respecting loop pairings.

    The rotator at each pairing's second node is forced by the rotator at the
    first, so only the remaining nodes are enumerated.
    """
    forced = {p.node_b for p in pairings}
    drive = {p.node_a: p for p in pairings}
    if forced & set(drive):
        raise OutOfImplementedRange("chained pairings not supported by the oracle")
    stats = EnumerationStats(space=count_rotations(link, fixed=forced))
    if stats.space > cap:
        return LoopOracleResult(CAP_EXCEEDED, None, stats)
    for rot in enumerate_rotations(link, base={n: () for n in forced}):
        free = {n: r for n, r in rot.rotators.items() if n not in forced}
        full = dict(free)
        for p in pairings:
            full[p.node_b] = p.transfer(full[p.node_a])
        stats.assignments += 1
        cand = GraphRotation(full)
        if genus_of_rotation(link, cand) == 0:
            stats.leaves += 1
            return LoopOracleResult(EXISTS, cand, stats)
        stats.prunes += 1
    return LoopOracleResult(NOT_EXISTS, None, stats)
