"""Rotation systems of complexes and of their link graphs.

A rotation system of a complex fixes one cyclic order of darts per edge.  At
an edge-end node of a link it induces a cyclic order of the arc-ends there
(read reversed at the end with the larger end index, so that the two ends of
an edge describe the same spatial rotation seen from opposite sides).  The
system is planar when the induced rotation of every link graph embeds each
connected component in the sphere.

Genus bookkeeping uses the standard face-tracing count: the successor of a
half-arc is the rotation successor of its twin at the far node, and each
component contributes (2 - V + E - F) / 2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx

from .complexes import Dart, TwoComplex
from .errors import BudgetExceeded, InvalidInput, OutOfImplementedRange
from .links import LinkGraph, Multigraph, link_at

# A dart address inside a rotator: (face id, position in the face trail).
DartAddr = Tuple[int, int]
# A half-arc of a multigraph: (arc key, side index 0/1).
ArcEnd = Tuple[object, int]

__all__ = [
    "DartAddr",
    "ArcEnd",
    "RotationSystem",
    "GraphRotation",
    "induced_rotation",
    "induced_rotator_at",
    "un_induce",
    "genus_of_rotation",
    "is_planar_system",
    "system_genus",
    "PlanarityResult",
    "NonPlanarWitness",
    "planar_embed",
    "unique_embedding_3connected",
    "enumerate_rotations",
    "count_rotations",
    "enumerate_planar_rotations",
    "LoopPairing",
    "loop_pairing",
    "vertex_sum",
]


def _canonical_cycle(seq: Sequence, key=repr) -> Tuple:
    """Rotate a cyclic sequence so that it starts at its smallest element."""
    if not seq:
        return tuple(seq)
    i = min(range(len(seq)), key=lambda k: key(seq[k]))
    return tuple(seq[i:]) + tuple(seq[:i])


@dataclass(frozen=True)
class RotationSystem:
    """One cyclic order of darts per edge, keyed by edge id."""

    rotators: Dict[int, Tuple[DartAddr, ...]]

    def canonical(self) -> "RotationSystem":
        return RotationSystem(
            {e: _canonical_cycle(r, key=lambda d: d) for e, r in self.rotators.items()}
        )

    def check_against(self, cx: TwoComplex) -> None:
        if set(self.rotators) != set(cx.edges):
            raise InvalidInput("rotation system does not cover exactly the edges")
        for e, rot in self.rotators.items():
            expect = set(cx.edge_faces(e))
            if len(rot) != len(expect) or set(rot) != expect:
                raise InvalidInput(f"rotator of edge {e} does not list its darts exactly once")

    def reversed_at(self, e: int) -> "RotationSystem":
        rot = dict(self.rotators)
        rot[e] = tuple(reversed(rot[e]))
        return RotationSystem(rot)


@dataclass(frozen=True)
class GraphRotation:
    """One cyclic order of arc-ends per node of a multigraph."""

    rotators: Dict[object, Tuple[ArcEnd, ...]]

    def canonical(self) -> "GraphRotation":
        return GraphRotation({n: _canonical_cycle(r) for n, r in self.rotators.items()})

    def mirrored(self) -> "GraphRotation":
        return GraphRotation({n: tuple(reversed(r)) for n, r in self.rotators.items()})

    def check_against(self, g: Multigraph) -> None:
        if set(self.rotators) != set(g.nodes):
            raise InvalidInput("graph rotation does not cover exactly the nodes")
        for n in g.nodes:
            if sorted(map(repr, self.rotators[n])) != sorted(map(repr, g.arc_ends(n))):
                raise InvalidInput(f"rotator at node {n!r} does not list its arc-ends exactly once")


def _dart_corner_at_end(cx: TwoComplex, dart: DartAddr, end: int) -> ArcEnd:
    """The arc-end of the link corner that the dart meets at its given end.

    ``end`` is the endpoint index of the dart's edge: the corner at the tail
    of the dart is (face, pos-1) read from side 1; the corner at the head is
    (face, pos) read from side 0.
    """
    f, pos = dart
    trail = cx.faces[f]
    e, d = trail[pos]
    tail_end = 0 if d == 1 else 1
    if tail_end == end:
        return ((f, (pos - 1) % len(trail)), 1)
    return ((f, pos), 0)


def induced_rotator_at(
    cx: TwoComplex, rotator: Sequence[DartAddr], node: Tuple[int, int]
) -> Tuple[ArcEnd, ...]:
    """The rotator a single link node inherits from its edge's dart order."""
    _, end = node
    seq = [_dart_corner_at_end(cx, dart, end) for dart in rotator]
    if end == 1:
        seq.reverse()
    return tuple(seq)


def induced_rotation(
    cx: TwoComplex, system: RotationSystem, v: int, link: Optional[LinkGraph] = None
) -> GraphRotation:
    """The rotation of the link at v induced by the edge rotators."""
    if link is None:
        link = link_at(cx, v)
    rotators: Dict[object, Tuple[ArcEnd, ...]] = {}
    for node in link.nodes:
        e, end = node
        seq = [_dart_corner_at_end(cx, dart, end) for dart in system.rotators[e]]
        if end == 1:
            seq.reverse()
        rotators[node] = tuple(seq)
    rot = GraphRotation(rotators)
    rot.check_against(link)
    return rot


def un_induce(cx: TwoComplex, v: int, node: Tuple[int, int], seq: Sequence[ArcEnd]) -> Tuple[DartAddr, ...]:
    """Invert induced_rotation at a single link node back to an edge rotator."""
    e, end = node
    darts: List[DartAddr] = []
    for (f, i), side in seq:
        trail = cx.faces[f]
        if side == 0:
            darts.append((f, i))
        else:
            darts.append((f, (i + 1) % len(trail)))
    if end == 1:
        darts.reverse()
    for d in darts:
        f, pos = d
        if cx.faces[f][pos][0] != e:
            raise InvalidInput("arc-end sequence does not belong to this edge-end")
    return tuple(darts)


def _face_orbits(g: Multigraph, rot: GraphRotation) -> List[Tuple[ArcEnd, ...]]:
    """Orbits of the face-tracing permutation; each orbit is a face boundary."""
    succ: Dict[ArcEnd, ArcEnd] = {}
    for n, seq in rot.rotators.items():
        L = len(seq)
        for i, ae in enumerate(seq):
            succ[ae] = seq[(i + 1) % L]
    faces: List[Tuple[ArcEnd, ...]] = []
    seen: set = set()
    for start in sorted(succ, key=repr):
        if start in seen:
            continue
        orbit: List[ArcEnd] = []
        cur = start
        while True:
            orbit.append(cur)
            seen.add(cur)
            arc, side = cur
            cur = succ[(arc, 1 - side)]
            if cur == start:
                break
        faces.append(tuple(orbit))
    return faces


def genus_of_rotation(g: Multigraph, rot: GraphRotation) -> int:
    """Total genus over the connected components of g under rot."""
    rot.check_against(g)
    faces = _face_orbits(g, rot)
    comps = g.components()
    node_comp: Dict[object, int] = {}
    for i, comp in enumerate(comps):
        for n in comp:
            node_comp[n] = i
    F = [0] * len(comps)
    for orbit in faces:
        arc, side = orbit[0]
        F[node_comp[g.arcs[arc][side]]] += 1
    total = 0
    for i, comp in enumerate(comps):
        V = len(comp)
        E = sum(1 for a, (n0, n1) in g.arcs.items() if node_comp[n0] == i)
        Fc = F[i] if F[i] else 1  # an isolated node bounds one face
        chi = V - E + Fc
        if (2 - chi) % 2 != 0:
            raise InvalidInput("odd Euler defect; rotation inconsistent")
        total += (2 - chi) // 2
    return total


def is_planar_system(cx: TwoComplex, system: RotationSystem) -> bool:
    return system_genus(cx, system) == 0


def system_genus(cx: TwoComplex, system: RotationSystem) -> int:
    """Sum of link genera under the induced rotations."""
    system.check_against(cx)
    total = 0
    for v in sorted(cx.vertices):
        link = link_at(cx, v)
        if not link.nodes:
            continue
        total += genus_of_rotation(link, induced_rotation(cx, system, v, link))
    return total


# ---------------------------------------------------------------------------
# Planarity of multigraphs with explicit embeddings and witnesses.


@dataclass(frozen=True)
class NonPlanarWitness:
    """Arcs of a subdivided K5 or K3,3 inside the graph."""

    arcs: Tuple[object, ...]
    branch_nodes: Tuple[object, ...]
    kind: str  # "K5", "K3,3" or "" when undetermined


@dataclass(frozen=True)
class PlanarityResult:
    planar: bool
    rotation: Optional[GraphRotation] = None
    witness: Optional[NonPlanarWitness] = None


def _subdivided(g: Multigraph) -> nx.Graph:
    """Each arc becomes a three-edge path through two private nodes."""
    G = nx.Graph()
    for n in g.sorted_nodes():
        G.add_node(("n", n))
    for a in sorted(g.arcs, key=repr):
        n0, n1 = g.arcs[a]
        G.add_edge(("n", n0), ("a", a, 0))
        G.add_edge(("a", a, 0), ("a", a, 1))
        G.add_edge(("a", a, 1), ("n", n1))
    return G


def planar_embed(g: Multigraph) -> PlanarityResult:
    """Planarity test returning an embedding rotation or a Kuratowski witness."""
    G = _subdivided(g)
    ok, cert = nx.check_planarity(G, counterexample=True)
    if ok:
        data = cert.get_data()
        rotators: Dict[object, Tuple[ArcEnd, ...]] = {}
        for n in g.nodes:
            seq: List[ArcEnd] = []
            for nb in data.get(("n", n), []):
                _, a, s = nb
                seq.append((a, s))
            rotators[n] = tuple(seq)
        rot = GraphRotation(rotators)
        if genus_of_rotation(g, rot) != 0:
            raise InvalidInput("embedding produced a positive-genus rotation")
        return PlanarityResult(True, rotation=rot)
    arcs = sorted({x[1] for e in cert.edges for x in e if x[0] == "a"}, key=repr)
    branch = sorted(
        (n[1] for n in cert.nodes if n[0] == "n" and cert.degree(n) >= 3), key=repr
    )
    degs = sorted(cert.degree(("n", b)) for b in branch)
    if len(branch) == 5 and degs == [4] * 5:
        kind = "K5"
    elif len(branch) == 6 and degs == [3] * 6:
        kind = "K3,3"
    else:
        kind = ""
    return PlanarityResult(
        False, witness=NonPlanarWitness(tuple(arcs), tuple(branch), kind)
    )


def unique_embedding_3connected(g: Multigraph) -> Tuple[GraphRotation, GraphRotation]:
    """The mirror pair of rotations of a planar subdivision of a 3-connected graph."""
    from .links import is_subdivision_3connected

    if not is_subdivision_3connected(g):
        raise InvalidInput("graph is not a subdivision of a 3-connected graph")
    res = planar_embed(g)
    if not res.planar:
        raise InvalidInput("graph is not planar")
    rot = res.rotation.canonical()
    return rot, rot.mirrored().canonical()


# ---------------------------------------------------------------------------
# Exhaustive enumeration of rotations of a multigraph (small cases only).


def count_rotations(g: Multigraph, fixed: Iterable[object] = ()) -> int:
    """Size of the rotation space with the given nodes held fixed."""
    total = 1
    fixed = set(fixed)
    for n in g.nodes:
        if n in fixed:
            continue
        d = g.degree(n)
        if d > 1:
            k = 1
            for i in range(2, d):
                k *= i
            total *= k
    return total


def enumerate_rotations(
    g: Multigraph,
    cap: Optional[int] = None,
    base: Optional[Dict[object, Tuple[ArcEnd, ...]]] = None,
) -> Iterator[GraphRotation]:
    """All rotations of g; nodes present in ``base`` keep their given rotator."""
    base = dict(base or {})
    free_nodes = [n for n in g.sorted_nodes() if n not in base]
    if cap is not None and count_rotations(g, fixed=base) > cap:
        raise BudgetExceeded(
            f"rotation space exceeds cap {cap}"
        )
    choices: List[List[Tuple[ArcEnd, ...]]] = []
    for n in free_nodes:
        ends = sorted(g.arc_ends(n), key=repr)
        if len(ends) <= 2:
            choices.append([tuple(ends)])
        else:
            first, rest = ends[0], ends[1:]
            choices.append([
                (first,) + perm for perm in itertools.permutations(rest)
            ])
    for combo in itertools.product(*choices):
        rot = dict(base)
        for n, seq in zip(free_nodes, combo):
            rot[n] = seq
        yield GraphRotation(rot)


def enumerate_planar_rotations(g: Multigraph, cap: int) -> List[GraphRotation]:
    """All genus-zero rotations, canonicalised and deduplicated."""
    out: List[GraphRotation] = []
    seen: set = set()
    for rot in enumerate_rotations(g, cap=cap):
        if genus_of_rotation(g, rot) == 0:
            can = rot.canonical()
            key = tuple(sorted((repr(n), r) for n, r in can.rotators.items()))
            if key not in seen:
                seen.add(key)
                out.append(can)
    return out


# ---------------------------------------------------------------------------
# Loops created by contraction: pairings and loop-planarity.


@dataclass(frozen=True)
class LoopPairing:
    """How the two link nodes of a loop edge mirror each other.

    ``forward`` maps each arc-end at node_a to the arc-end at node_b that the
    same dart of the loop meets from the other side.  A rotation respects the
    pairing when the rotator at node_b equals the reversed image of the
    rotator at node_a.
    """

    edge: int
    node_a: Tuple[int, int]
    node_b: Tuple[int, int]
    forward: Dict[ArcEnd, ArcEnd] = field(hash=False)

    def respected_by(self, rot: GraphRotation) -> bool:
        seq = tuple(reversed([self.forward[ae] for ae in rot.rotators[self.node_a]]))
        return _canonical_cycle(seq) == _canonical_cycle(rot.rotators[self.node_b])

    def transfer(self, seq: Sequence[ArcEnd]) -> Tuple[ArcEnd, ...]:
        return tuple(reversed([self.forward[ae] for ae in seq]))


def loop_pairing(cx: TwoComplex, e: int) -> LoopPairing:
    """The pairing of the two end nodes of a loop edge."""
    u, v = cx.edges[e]
    if u != v:
        raise InvalidInput(f"edge {e} is not a loop")
    node_a, node_b = (e, 0), (e, 1)
    forward: Dict[ArcEnd, ArcEnd] = {}
    for dart in cx.edge_faces(e):
        a_side = _dart_corner_at_end(cx, dart, 0)
        b_side = _dart_corner_at_end(cx, dart, 1)
        forward[a_side] = b_side
    return LoopPairing(e, node_a, node_b, forward)


def vertex_sum(cx: TwoComplex, e: int):
    """Link of the merged vertex after contracting a non-loop edge.

    Returns (contract result, link graph).  Edge ids and end indices survive
    the contraction, so link nodes of either end keep their keys in the sum.
    """
    from .complexes import contract_edge

    res = contract_edge(cx, e)
    link = link_at(res.complex, res.merged_vertex)
    return res, link
