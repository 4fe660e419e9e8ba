"""Obstruction analysis for stretched-out complexes.

This module decides whether a complex whose vertex links are all almost
3-connected (and which is stretched out, i.e. no face-degree-2 edge joins
two rigid links) admits a planar rotation system.  It either assembles a
concrete planar system or returns one of four obstruction certificates:

* :class:`NonPlanarLink` -- some vertex link is not even a planar graph;
* :class:`TorusCrossing` -- a cycle of parallel links carries two mega
  faces with different winding numbers;
* :class:`NonLoopPlanarParaPath` -- contracting a path of parallel links
  between two rigid vertices yields a vertex with no usable rotation;
* :class:`NonLoopPlanarContraction` -- same failure along a cycle through
  rigid vertices, exhibited by contracting all but one of its edges.

Every certificate can be replayed against the complex it was issued for
with :func:`verify_certificate`, which re-establishes the obstruction from
scratch (physical contractions, link rebuilds and an independent search)
rather than trusting the analysis that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .complexes import TwoComplex, contract_edge
from .errors import (
    InvalidInput,
    NotParaCycle,
    PipelineError,
    PreconditionViolated,
    VerificationFailed,
)
from .links import (
    LinkGraph,
    Multigraph,
    classify,
    is_almost_3connected,
    is_free_graph,
    is_subdivision_3connected,
    link_at,
    parallel_pairing,
)
from .oracle import oracle_loop_planar
from .rotation import (
    ArcEnd,
    DartAddr,
    GraphRotation,
    LoopPairing,
    NonPlanarWitness,
    RotationSystem,
    genus_of_rotation,
    induced_rotator_at,
    is_planar_system,
    loop_pairing,
    planar_embed,
    un_induce,
    unique_embedding_3connected,
)

__all__ = [
    "MegaFace",
    "mega_faces",
    "find_para_cycles",
    "find_para_paths",
    "is_stretched_out",
    "LoopPlanarResult",
    "loop_planar",
    "NonPlanarLink",
    "TorusCrossing",
    "NonLoopPlanarParaPath",
    "NonLoopPlanarContraction",
    "Certificate",
    "torus_crossing_check",
    "verify_certificate",
    "NormalFormResult",
    "normal_form_check",
]


# ---------------------------------------------------------------------------
# small shared helpers


def _end_at(cx: TwoComplex, e: int, v: int) -> int:
    u, w = cx.edges[e]
    if v == u:
        return 0
    if v == w:
        return 1
    raise InvalidInput(f"vertex {v} is not an end of edge {e}")


def _cyc_eq(a: Sequence, b: Sequence) -> bool:
    """Equality of two sequences read as cyclic words."""
    a, b = tuple(a), tuple(b)
    if len(a) != len(b):
        return False
    if not a:
        return True
    return any(b == a[i:] + a[:i] for i in range(len(a)))


def _face_arc_end_at(link: Multigraph, node: Tuple[int, int], f: int) -> ArcEnd:
    """The unique arc-end at ``node`` whose arc is a corner of face ``f``."""
    hits = [(arc, side) for arc, side in link.arc_ends(node) if arc[0] == f]
    if len(hits) != 1:
        raise PipelineError(
            f"face {f} has {len(hits)} corners at link node {node}, expected one"
        )
    return hits[0]


def _full_rotation(link: Multigraph, forced: Dict[Tuple[int, int], Tuple[ArcEnd, ...]]) -> GraphRotation:
    """Extend rotators at a few nodes to the whole link; all remaining nodes
    must have degree <= 2, where the cyclic order is unique."""
    rotators: Dict[object, Tuple[ArcEnd, ...]] = dict(forced)
    for n in link.nodes:
        if n in rotators:
            continue
        ends = link.arc_ends(n)
        if len(ends) > 2:
            raise PipelineError(f"no rotator prescribed at branch node {n}")
        rotators[n] = tuple(ends)
    return GraphRotation(rotators)


# ---------------------------------------------------------------------------
# mega faces of a cycle of parallel links


@dataclass(frozen=True)
class MegaFace:
    """A closed trail of faces glued along face-degree-2 linking edges.

    ``linking[i]`` is the edge shared by ``faces[i]`` and ``faces[i+1]``
    (cyclically).  A mega face consisting of a single triangle that covers a
    3-cycle on its own has no linking edges at all.  ``winding`` counts how
    many times the trail runs around the carrying cycle.
    """

    faces: Tuple[int, ...]
    linking: Tuple[int, ...]
    winding: int


class _CycleMachine:
    """Shared walk machinery along a cycle whose links are parallel between
    the two incident cycle edges.

    The cycle is ``vertices[i]`` joined to ``vertices[i+1]`` by ``edges[i]``,
    indices mod k; the base edge is ``edges[-1]``.  Faces at the base edge
    are permuted by walking once around the cycle; the orbits of that
    permutation are the mega faces and the orbit sizes their windings.
    """

    def __init__(self, cx: TwoComplex, vertices: Sequence[int], edges: Sequence[int],
                 links: Optional[Dict[int, LinkGraph]] = None):
        if len(vertices) != len(edges) or len(edges) < 1:
            raise InvalidInput("cycle needs as many edges as vertices")
        self.cx = cx
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        k = len(edges)
        self.links: Dict[int, LinkGraph] = {}
        self.n_in: List[Tuple[int, int]] = []
        self.n_out: List[Tuple[int, int]] = []
        self.pairings = []
        for i, v in enumerate(self.vertices):
            e_in = self.edges[i - 1]
            e_out = self.edges[i]
            lk = links[v] if links is not None else link_at(cx, v)
            self.links[v] = lk
            ni = (e_in, _end_at(cx, e_in, v))
            no = (e_out, _end_at(cx, e_out, v))
            pp = parallel_pairing(lk, ni, no)
            if pp is None:
                raise NotParaCycle(
                    f"link of vertex {v} is not parallel between edges {e_in} and {e_out}"
                )
            self.n_in.append(ni)
            self.n_out.append(no)
            self.pairings.append(pp)
        base = self.edges[-1]
        self.base_edge = base
        self.base_darts = cx.edge_faces(base)
        if not self.base_darts:
            raise NotParaCycle(f"cycle edge {base} carries no faces")
        self.dart_of_face = {f: (f, pos) for f, pos in self.base_darts}

    def lap(self, f: int, collect: Optional[list] = None) -> int:
        """One full trip around the cycle starting from face ``f`` crossing
        the base edge; returns the next face crossing the base edge.  When
        ``collect`` is given the traversed (faces, linking-edge) walk pieces
        are appended to it, one pair of lists per vertex."""
        cur = f
        k = len(self.edges)
        for i in range(k):
            v = self.vertices[i]
            ae_in = _face_arc_end_at(self.links[v], self.n_in[i], cur)
            ae_out = self.pairings[i].pairs[ae_in]
            if collect is not None:
                arcs, nodes = self.pairings[i].walks[ae_in]
                collect.append(([a[0] for a in arcs], [n[0] for n in nodes[1:-1]]))
            cur = ae_out[0][0]
        return cur

    def orbits(self) -> List[List[int]]:
        """Orbits of the base-edge faces under a full lap, each listed in
        visit order starting from its smallest face."""
        done: Set[int] = set()
        out: List[List[int]] = []
        for f, _ in self.base_darts:
            if f in done:
                continue
            orbit = [f]
            cur = self.lap(f)
            while cur != f:
                orbit.append(cur)
                cur = self.lap(cur)
            done.update(orbit)
            out.append(orbit)
        return out

    def mega_face(self, orbit: List[int]) -> MegaFace:
        pieces: List[Tuple[List[int], List[int]]] = []
        for f in orbit:
            self.lap(f, collect=pieces)
        faces: List[int] = []
        linking: List[int] = []
        for wf, wl in pieces:
            if faces:
                if faces[-1] != wf[0]:
                    raise PipelineError("mega face walk does not chain across an edge")
                faces.extend(wf[1:])
            else:
                faces.extend(wf)
            linking.extend(wl)
        if len(faces) > 1:
            if faces[-1] != faces[0]:
                raise PipelineError("mega face walk does not close up")
            faces.pop()
        return MegaFace(tuple(faces), tuple(linking), winding=len(orbit))

    def transport(self, sigma: Tuple[DartAddr, ...]):
        """Carry a dart order on the base edge once around the cycle.

        Returns (sigma per edge in cycle order, rotation per vertex, final
        dart order back at the base edge)."""
        cx = self.cx
        sigmas: List[Tuple[DartAddr, ...]] = []
        rotations: Dict[int, GraphRotation] = {}
        cur = tuple(sigma)
        for i, v in enumerate(self.vertices):
            r_in = induced_rotator_at(cx, cur, self.n_in[i])
            r_out = tuple(reversed([self.pairings[i].pairs[ae] for ae in r_in]))
            rotations[v] = _full_rotation(
                self.links[v], {self.n_in[i]: r_in, self.n_out[i]: r_out}
            )
            cur = un_induce(cx, v, self.n_out[i], r_out)
            sigmas.append(cur)
        return sigmas, rotations, cur


def _rotate_cycle(vertices: Sequence[int], edges: Sequence[int]) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Rotate a cycle so that the smallest edge is the base (last) edge."""
    k = len(edges)
    j = min(range(k), key=lambda i: edges[i])
    shift = (j + 1) % k
    return (
        tuple(vertices[shift:]) + tuple(vertices[:shift]),
        tuple(edges[shift:]) + tuple(edges[:shift]),
    )


def mega_faces(cx: TwoComplex, vertices: Sequence[int], edges: Sequence[int]) -> Tuple[MegaFace, ...]:
    """The mega faces carried by a cycle of parallel links.

    ``edges[i]`` must join ``vertices[i]`` and ``vertices[i+1]`` (cyclically)
    and every link along the cycle must fall apart into disjoint paths
    between the two incident cycle edges; otherwise :class:`NotParaCycle`
    is raised.  Boundary cycles of a disc-like sheet qualify as well: a
    single sheet yields one mega face of winding one.
    """
    verts, eds = _rotate_cycle(vertices, edges)
    machine = _CycleMachine(cx, verts, eds)
    return tuple(machine.mega_face(o) for o in machine.orbits())


# ---------------------------------------------------------------------------
# para-cycles and para-paths


def _chain_edges(cx: TwoComplex, v: int, link: Optional[LinkGraph] = None) -> Optional[Tuple[int, int]]:
    """The two branch edges at a vertex whose link is a parallel graph with
    at least three connecting paths; None otherwise."""
    lk = link if link is not None else link_at(cx, v)
    c = classify(lk)
    if c.tag != "ParallelGraph":
        return None
    a, b = (n[0] for n in c.branch_nodes)
    return (a, b)


def _walk_chain(cx: TwoComplex, chain: Dict[int, Tuple[int, int]], start: int, first_edge: int):
    """Follow branch edges through parallel-link vertices starting at
    ``start`` along ``first_edge``.  Returns (vertices, edges, closed) where
    ``vertices`` begins with ``start`` and, if the walk leaves the chain,
    ends with the first vertex outside it."""
    verts = [start]
    eds: List[int] = []
    v, e = start, first_edge
    while True:
        eds.append(e)
        u, w = cx.edges[e]
        v = w if v == u else u
        if v == start:
            return verts, eds, True
        verts.append(v)
        if v not in chain:
            return verts, eds, False
        a, b = chain[v]
        if e not in (a, b):
            raise PipelineError(
                f"edge {e} reaches vertex {v} but is not one of its branch edges"
            )
        e = b if e == a else a


def _chain_map(cx: TwoComplex) -> Dict[int, Tuple[int, int]]:
    return {
        v: pair
        for v in sorted(cx.vertices)
        if (pair := _chain_edges(cx, v)) is not None
    }


def find_para_cycles(cx: TwoComplex) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """Cycles all of whose vertex links are parallel graphs with the two
    incident cycle edges as branch nodes.  Each cycle is reported once, in
    canonical orientation (smallest vertex first, towards its smaller
    neighbour)."""
    chain = _chain_map(cx)
    seen: Set[int] = set()
    out = []
    for v0 in sorted(chain):
        if v0 in seen:
            continue
        verts, eds, closed = _walk_chain(cx, chain, v0, chain[v0][0])
        if not closed:
            # walk the other way as well so every chain vertex is consumed
            verts2, _, _ = _walk_chain(cx, chain, v0, chain[v0][1])
            seen.update(verts)
            seen.update(verts2)
            continue
        seen.update(verts)
        out.append(_canonical_cycle_form(verts, eds))
    return out


def _canonical_cycle_form(verts: List[int], eds: List[int]):
    k = len(verts)
    i = verts.index(min(verts))
    verts = verts[i:] + verts[:i]
    eds = eds[i:] + eds[:i]
    if k > 2 and verts[-1] < verts[1]:
        verts = [verts[0]] + verts[:0:-1]
        eds = eds[::-1]
    return tuple(verts), tuple(eds)


def find_para_paths(cx: TwoComplex) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """Paths joining two vertices with rigid (subdivided 3-connected) links
    through parallel-link vertices, every edge of face-degree >= 3.  A single
    such edge between two rigid vertices is the shortest case."""
    links = {v: link_at(cx, v) for v in sorted(cx.vertices)}
    rigid = {v for v, lk in links.items() if is_subdivision_3connected(lk)}
    chain = {
        v: pair
        for v in sorted(cx.vertices)
        if (pair := _chain_edges(cx, v, links[v])) is not None
    }
    out = []
    for e in sorted(cx.edges):
        u, w = cx.edges[e]
        if u in rigid and w in rigid and cx.edge_degree(e) >= 3:
            out.append(((u, w) if u <= w else (w, u), (e,)))
    seen: Set[int] = set()
    for v0 in sorted(chain):
        if v0 in seen:
            continue
        fwd_v, fwd_e, closed = _walk_chain(cx, chain, v0, chain[v0][1])
        if closed:
            seen.add(v0)
            seen.update(fwd_v)
            continue
        back_v, back_e, _ = _walk_chain(cx, chain, v0, chain[v0][0])
        verts = back_v[:0:-1] + fwd_v
        eds = back_e[::-1] + fwd_e
        seen.update(verts)
        if verts[0] in rigid and verts[-1] in rigid:
            if verts[0] > verts[-1]:
                verts = verts[::-1]
                eds = eds[::-1]
            out.append((tuple(verts), tuple(eds)))
    return sorted(out)


def is_stretched_out(cx: TwoComplex) -> bool:
    """No face-degree-2 edge may join two vertices that both have rigid
    links (subdivided 3-connected, or parallel with three or more paths)."""
    rigid_cache: Dict[int, bool] = {}

    def rigid(v: int) -> bool:
        if v not in rigid_cache:
            tag = classify(link_at(cx, v)).tag
            rigid_cache[v] = tag in ("Subdivision3Connected", "ParallelGraph")
        return rigid_cache[v]

    for e in sorted(cx.edges):
        if cx.edge_degree(e) != 2:
            continue
        u, w = cx.edges[e]
        if rigid(u) and rigid(w):
            return False
    return True


# ---------------------------------------------------------------------------
# loop-planarity of a single link


@dataclass(frozen=True)
class LoopPlanarResult:
    planar: bool
    rotation: Optional[GraphRotation]
    method: str


def loop_planar(link: Multigraph, pairings: Sequence[LoopPairing], cap: int = 10**6) -> LoopPlanarResult:
    """Does the link admit a genus-zero rotation respecting every pairing?

    Pairings arise from loop edges: the rotator at one loop end must be the
    reversed image of the rotator at the other.  Three fast routes are tried
    before falling back to exhaustive search: plain planarity when there are
    no pairings, the mirror pair of an essentially 3-connected link, and an
    orbit-size argument when the link is parallel between the two ends of a
    single loop.
    """
    pr = planar_embed(link)
    if not pr.planar:
        return LoopPlanarResult(False, None, "planar-embed")
    if not pairings:
        return LoopPlanarResult(True, pr.rotation, "planar-embed")
    if is_subdivision_3connected(link):
        rot = unique_embedding_3connected(link)[0]
        for cand in (rot, rot.mirrored()):
            if all(p.respected_by(cand) for p in pairings):
                return LoopPlanarResult(True, cand, "unique-pair")
        return LoopPlanarResult(False, None, "unique-pair")
    if len(pairings) == 1:
        p = pairings[0]
        pp = parallel_pairing(link, p.node_a, p.node_b)
        if pp is not None:
            return _loop_planar_parallel(link, p, pp)
    res = oracle_loop_planar(link, list(pairings), cap=cap)
    return LoopPlanarResult(res.exists, res.rotation, "search")


def _loop_planar_parallel(link: Multigraph, p: LoopPairing, pp) -> LoopPlanarResult:
    """Link falling apart into disjoint paths between the two ends of one
    loop: a respecting planar rotation exists iff the orbits of (pairing
    followed by walking back through the link) all have the same size; the
    witness interleaves the orbits."""
    back = {v: k for k, v in p.forward.items()}
    psi = {ae: back[pp.pairs[ae]] for ae in pp.pairs}
    orbits: List[List[ArcEnd]] = []
    done: Set[ArcEnd] = set()
    for ae in sorted(psi, key=repr):
        if ae in done:
            continue
        orbit = [ae]
        cur = psi[ae]
        while cur != ae:
            orbit.append(cur)
            cur = psi[cur]
        done.update(orbit)
        orbits.append(orbit)
    sizes = {len(o) for o in orbits}
    if len(sizes) != 1:
        return LoopPlanarResult(False, None, "orbit")
    size = sizes.pop()
    r_a = tuple(orbits[j][w] for w in range(size) for j in range(len(orbits)))
    r_b = tuple(reversed([pp.pairs[ae] for ae in r_a]))
    rot = _full_rotation(link, {p.node_a: r_a, p.node_b: r_b})
    if genus_of_rotation(link, rot) != 0 or not p.respected_by(rot):
        raise PipelineError("interleaved rotation fails its own invariants")
    return LoopPlanarResult(True, rot, "orbit")


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class NonPlanarLink:
    """A vertex whose link contains a subdivided K5 or K3,3."""

    vertex: int
    witness: NonPlanarWitness

    kind = "non-planar-link"


@dataclass(frozen=True)
class TorusCrossing:
    """Two mega faces of one cycle of parallel links with different windings.

    ``edges[i]`` joins ``vertices[i]`` and ``vertices[i+1]`` cyclically;
    ``deleted_faces`` lists the faces outside the two mega faces, so the
    obstruction survives as a subcomplex on its own."""

    vertices: Tuple[int, ...]
    edges: Tuple[int, ...]
    base_edge: int
    mega: Tuple[MegaFace, MegaFace]
    deleted_faces: Tuple[int, ...]

    kind = "torus-crossing"

    @property
    def windings(self) -> Tuple[int, int]:
        return (self.mega[0].winding, self.mega[1].winding)


@dataclass(frozen=True)
class NonLoopPlanarParaPath:
    """A path through parallel links whose contraction has no planar
    rotation respecting the loop pairings it creates.  ``chord`` names the
    direct edge between the endpoints when one exists (it turns into the
    single loop)."""

    vertices: Tuple[int, ...]
    edges: Tuple[int, ...]
    chord: Optional[int] = None

    kind = "para-path"


@dataclass(frozen=True)
class NonLoopPlanarContraction:
    """A cycle such that contracting all but its last edge leaves a vertex
    whose link has no planar rotation respecting the loop pairings.
    ``edges[i]`` joins ``vertices[i]`` and ``vertices[i+1]`` cyclically."""

    vertices: Tuple[int, ...]
    edges: Tuple[int, ...]

    kind = "contraction"


Certificate = (NonPlanarLink, TorusCrossing, NonLoopPlanarParaPath, NonLoopPlanarContraction)


# ---------------------------------------------------------------------------
# torus crossing check


def torus_crossing_check(cx: TwoComplex, vertices: Sequence[int], edges: Sequence[int],
                         links: Optional[Dict[int, LinkGraph]] = None):
    """Decide a cycle of parallel links.

    Returns ``(certificate, None)`` when two mega faces have different winding
    numbers, else ``(None, rotations)`` with a genus-zero rotation of every
    link along the cycle obtained by interleaving the mega faces around the
    base edge and carrying it around."""
    verts, eds = _rotate_cycle(vertices, edges)
    machine = _CycleMachine(cx, verts, eds, links=links)
    orbits = machine.orbits()
    megas = [machine.mega_face(o) for o in orbits]
    windings = [m.winding for m in megas]
    if len(set(windings)) > 1:
        lo = megas[windings.index(min(windings))]
        hi = megas[windings.index(max(windings))]
        kept = set(lo.faces) | set(hi.faces)
        cert = TorusCrossing(
            vertices=verts,
            edges=eds,
            base_edge=machine.base_edge,
            mega=(lo, hi),
            deleted_faces=tuple(f for f in sorted(cx.faces) if f not in kept),
        )
        return cert, None
    w = windings[0]
    seed = tuple(
        machine.dart_of_face[orbits[j][t]]
        for t in range(w)
        for j in range(len(orbits))
    )
    _, rotations, final = machine.transport(seed)
    if not _cyc_eq(final, seed):
        raise PipelineError("equal windings but the interleaved order does not close up")
    return None, rotations


# ---------------------------------------------------------------------------
# certificate verification


def verify_certificate(cx: TwoComplex, cert, cap: int = 10**6) -> None:
    """Re-establish an obstruction certificate against ``cx`` from scratch.

    Raises :class:`VerificationFailed` when the certificate does not hold.
    Verification never trusts the analysis that issued the certificate: it
    rebuilds links, replays contractions and re-runs the loop-planarity
    decision."""
    if isinstance(cert, NonPlanarLink):
        _verify_non_planar_link(cx, cert)
    elif isinstance(cert, TorusCrossing):
        _verify_torus_crossing(cx, cert)
    elif isinstance(cert, NonLoopPlanarParaPath):
        _verify_para_path(cx, cert, cap)
    elif isinstance(cert, NonLoopPlanarContraction):
        _verify_contraction(cx, cert, cap)
    else:
        raise VerificationFailed(f"unknown certificate type {type(cert).__name__}")


def _fail(msg: str):
    raise VerificationFailed(msg)


def _verify_non_planar_link(cx: TwoComplex, cert: NonPlanarLink) -> None:
    if cert.vertex not in cx.vertices:
        _fail(f"vertex {cert.vertex} not in the complex")
    link = link_at(cx, cert.vertex)
    missing = [a for a in cert.witness.arcs if a not in link.arcs]
    if missing:
        _fail(f"witness arcs {missing} not in the link of vertex {cert.vertex}")
    arcs = {a: link.arcs[a] for a in cert.witness.arcs}
    nodes = {n for ends in arcs.values() for n in ends}
    sub = Multigraph(tuple(sorted(nodes, key=repr)), arcs)
    supp, _ = sub.suppressed()
    degs = sorted(supp.degree(n) for n in supp.nodes)
    if not supp.is_simple():
        _fail("suppressed witness is not a simple graph")
    if len(supp.nodes) == 5 and degs == [4] * 5 and len(supp.arcs) == 10:
        found = "K5"
    elif (
        len(supp.nodes) == 6
        and degs == [3] * 6
        and len(supp.arcs) == 9
        and nx.is_bipartite(supp.to_networkx_simple())
    ):
        found = "K3,3"
    else:
        _fail("witness arcs do not form a subdivided K5 or K3,3")
    if cert.witness.kind and cert.witness.kind != found:
        _fail(f"witness claims {cert.witness.kind} but forms {found}")


def _check_cycle_shape(cx: TwoComplex, vertices, edges, minimum: int) -> None:
    k = len(edges)
    if k < minimum or len(vertices) != k:
        _fail("malformed cycle")
    if len(set(vertices)) != k or len(set(edges)) != k:
        _fail("cycle repeats a vertex or an edge")
    for i in range(k):
        e = edges[i]
        if e not in cx.edges:
            _fail(f"edge {e} not in the complex")
        if set(cx.edges[e]) != {vertices[i], vertices[(i + 1) % k]}:
            _fail(f"edge {e} does not join consecutive cycle vertices")


def _verify_torus_crossing(cx: TwoComplex, cert: TorusCrossing) -> None:
    _check_cycle_shape(cx, cert.vertices, cert.edges, minimum=3)
    if cert.base_edge not in cert.edges:
        _fail("base edge is not on the cycle")
    if cert.base_edge != min(cert.edges):
        _fail("base edge is not the smallest cycle edge")
    try:
        recomputed = mega_faces(cx, list(cert.vertices), list(cert.edges))
    except NotParaCycle as exc:
        raise VerificationFailed(f"cycle is not a cycle of parallel links: {exc}") from exc
    m0 = _match_mega_face(cert.mega[0], recomputed)
    m1 = _match_mega_face(cert.mega[1], recomputed)
    if m0 is None or m1 is None:
        _fail("a claimed mega face matches no recomputed face orbit")
    if m0 == m1:
        _fail("the two claimed mega faces are the same face orbit")
    if cert.mega[0].winding == cert.mega[1].winding:
        _fail("the two mega faces have equal windings")
    kept = set(cert.mega[0].faces) | set(cert.mega[1].faces)
    if set(cert.deleted_faces) != set(cx.faces) - kept:
        _fail("deleted faces are not the complement of the two mega faces")


def _mega_face_variants(mf: MegaFace):
    """All rotations of a mega face in both traversal directions, as
    (faces, linking) pairs with the linking edges kept aligned."""
    n = len(mf.faces)
    if n == 1:
        yield mf.faces, mf.linking
        return
    rev_l = mf.linking[::-1]
    for faces, linking in (
        (mf.faces, mf.linking),
        (mf.faces[::-1], rev_l[1:] + rev_l[:1]),
    ):
        for i in range(n):
            yield faces[i:] + faces[:i], linking[i:] + linking[:i]


def _match_mega_face(claimed: MegaFace, orbits: Sequence[MegaFace]) -> Optional[int]:
    for idx, mf in enumerate(orbits):
        if mf.winding != claimed.winding or len(mf.faces) != len(claimed.faces):
            continue
        target = (mf.faces, mf.linking)
        if any(variant == target for variant in _mega_face_variants(claimed)):
            return idx
    return None


def _contract_and_test(cx: TwoComplex, edges_to_contract: Sequence[int], cap: int):
    cur = cx
    merged = None
    for e in edges_to_contract:
        res = contract_edge(cur, e)
        cur = res.complex
        merged = res.merged_vertex
    loops = [e for e in sorted(cur.edges) if cur.is_loop(e)]
    pairings = [loop_pairing(cur, l) for l in loops]
    link = link_at(cur, merged)
    return loop_planar(link, pairings, cap=cap)


def _verify_para_path(cx: TwoComplex, cert: NonLoopPlanarParaPath, cap: int) -> None:
    verts, eds = cert.vertices, cert.edges
    if len(verts) != len(eds) + 1 or len(eds) < 1:
        _fail("malformed path")
    if len(set(verts)) != len(verts) or len(set(eds)) != len(eds):
        _fail("path repeats a vertex or an edge")
    for i, e in enumerate(eds):
        if e not in cx.edges or set(cx.edges[e]) != {verts[i], verts[i + 1]}:
            _fail(f"edge {e} does not join consecutive path vertices")
    if cert.chord is not None:
        if cert.chord not in cx.edges or cert.chord in eds:
            _fail("chord edge invalid")
        if set(cx.edges[cert.chord]) != {verts[0], verts[-1]}:
            _fail("chord does not join the path endpoints")
    result = _contract_and_test(cx, eds, cap)
    if result.planar:
        _fail("contracting the path leaves a loop-planar vertex after all")


def _verify_contraction(cx: TwoComplex, cert: NonLoopPlanarContraction, cap: int) -> None:
    _check_cycle_shape(cx, cert.vertices, cert.edges, minimum=3)
    result = _contract_and_test(cx, cert.edges[:-1], cap)
    if result.planar:
        _fail("contracting the cycle leaves a loop-planar vertex after all")


# ---------------------------------------------------------------------------
# transport along chains of parallel links


def _transport_vertex(cx: TwoComplex, link: LinkGraph, v: int, e_in: int, e_out: int,
                      sigma_in: Tuple[DartAddr, ...]):
    """Force the dart order of ``e_out`` from the one of ``e_in`` through a
    parallel link; returns (sigma_out, rotation of the link)."""
    n_in = (e_in, _end_at(cx, e_in, v))
    n_out = (e_out, _end_at(cx, e_out, v))
    pp = parallel_pairing(link, n_in, n_out)
    if pp is None:
        raise PipelineError(
            f"link of vertex {v} is not parallel between edges {e_in} and {e_out}"
        )
    r_in = induced_rotator_at(cx, sigma_in, n_in)
    r_out = tuple(reversed([pp.pairs[ae] for ae in r_in]))
    sigma_out = un_induce(cx, v, n_out, r_out)
    rot = _full_rotation(link, {n_in: r_in, n_out: r_out})
    return sigma_out, rot


def _transport_chain(cx: TwoComplex, links: Dict[int, LinkGraph], vertices: Sequence[int],
                     edges: Sequence[int], sigma_first: Tuple[DartAddr, ...]):
    """Transport a dart order down ``edges``, forcing a rotation at every
    interior vertex (vertices[1:-1]); returns (final sigma, rotations)."""
    rotations: Dict[int, GraphRotation] = {}
    cur = tuple(sigma_first)
    for i in range(1, len(vertices) - 1):
        w = vertices[i]
        cur, rot = _transport_vertex(cx, links[w], w, edges[i - 1], edges[i], cur)
        rotations[w] = rot
    return cur, rotations


# ---------------------------------------------------------------------------
# the normal-form decision


@dataclass(frozen=True)
class NormalFormResult:
    embeddable: bool
    system: Optional[RotationSystem] = None
    certificate: Optional[object] = None


@dataclass
class _Segment:
    """A maximal run of parallel-link vertices inside a mixed component,
    together with its attachments.  ``vertices``/``edges`` trace the full
    path; for kind "link" both end vertices are rigid, for kind "cycle" they
    coincide, for kind "dangling" the far end has a free link."""

    vertices: Tuple[int, ...]
    edges: Tuple[int, ...]
    kind: str
    parity: Optional[int] = None


def normal_form_check(cx: TwoComplex, cap: int = 10**6) -> NormalFormResult:
    """Decide a connected, stretched-out complex with almost-3-connected
    links: assemble a planar rotation system or produce an obstruction
    certificate.

    A non-planar link is certified before anything else -- that outcome
    needs no structural assumptions.  After that scan the method raises
    :class:`PreconditionViolated` when a link is disconnected or not almost
    3-connected, or the complex is not stretched out; those cases belong to
    the stretching pipeline, not to this check."""
    links: Dict[int, LinkGraph] = {}
    for v in sorted(cx.vertices):
        links[v] = link_at(cx, v)
        pr = planar_embed(links[v])
        if not pr.planar:
            return NormalFormResult(
                False, certificate=NonPlanarLink(vertex=v, witness=pr.witness)
            )

    tags: Dict[int, str] = {}
    branch: Dict[int, Tuple[int, int]] = {}
    free: Dict[int, bool] = {}
    for v in sorted(cx.vertices):
        lk = links[v]
        if not lk.nodes:
            tags[v] = "Empty"
            free[v] = True
            continue
        if not lk.is_connected():
            raise PreconditionViolated(f"link of vertex {v} is disconnected")
        if not is_almost_3connected(lk):
            raise PreconditionViolated(f"link of vertex {v} is not almost 3-connected")
        c = classify(lk)
        tags[v] = c.tag
        free[v] = is_free_graph(lk)
        if c.tag == "ParallelGraph":
            branch[v] = tuple(n[0] for n in c.branch_nodes)
    if not is_stretched_out(cx):
        raise PreconditionViolated("complex is not stretched out")

    h_adj: Dict[int, List[Tuple[int, int]]] = {v: [] for v in cx.vertices}
    for e in sorted(cx.edges):
        u, w = cx.edges[e]
        if cx.edge_degree(e) == 2 or free[u] or free[w]:
            continue
        h_adj[u].append((e, w))
        h_adj[w].append((e, u))

    rotations: Dict[int, GraphRotation] = {}

    def record(v: int, rot: GraphRotation) -> None:
        if v in rotations:
            raise PipelineError(f"vertex {v} assigned two rotations")
        rotations[v] = rot

    seen: Set[int] = set()
    for v0 in sorted(cx.vertices):
        if v0 in seen:
            continue
        comp = _component_from(h_adj, v0)
        seen.update(comp)
        edged = any(h_adj[v] for v in comp)
        if not edged:
            if free[v0] or tags[v0] == "Empty":
                continue
            record(v0, planar_embed(links[v0]).rotation)
            continue
        rigid = sorted(v for v in comp if tags[v] == "Subdivision3Connected")
        for v in comp:
            if tags[v] not in ("Subdivision3Connected", "ParallelGraph"):
                raise PipelineError(
                    f"vertex {v} with link class {tags[v]} carries a retained edge"
                )
        if not rigid:
            cert = _decide_parallel_component(cx, links, branch, h_adj, comp, record)
        else:
            cert = _decide_mixed_component(cx, links, branch, h_adj, comp, rigid, record)
        if cert is not None:
            return NormalFormResult(False, certificate=cert)

    sigma: Dict[int, Tuple[DartAddr, ...]] = {}
    for v in sorted(rotations):
        rot = rotations[v]
        for node in links[v].sorted_nodes():
            e = node[0]
            order = un_induce(cx, v, node, rot.rotators[node])
            if e in sigma:
                if not _cyc_eq(sigma[e], order):
                    raise PipelineError(f"conflicting dart orders assembled at edge {e}")
            else:
                sigma[e] = order
    for e in sorted(cx.edges):
        sigma.setdefault(e, cx.edge_faces(e))
    system = RotationSystem({e: tuple(s) for e, s in sigma.items()})
    system.check_against(cx)
    if not is_planar_system(cx, system):
        raise PipelineError("assembled rotation system fails the final planarity gate")
    return NormalFormResult(True, system=system)


def _component_from(h_adj: Dict[int, List[Tuple[int, int]]], v0: int) -> Set[int]:
    comp = {v0}
    stack = [v0]
    while stack:
        v = stack.pop()
        for _, w in h_adj[v]:
            if w not in comp:
                comp.add(w)
                stack.append(w)
    return comp


def _decide_parallel_component(cx, links, branch, h_adj, comp, record):
    """A retained component made of parallel-link vertices only: a closed
    cycle goes through the torus-crossing test, an open chain is satisfied
    by transporting any dart order from one end."""
    degrees = {v: len(h_adj[v]) for v in comp}
    if not all(1 <= d <= 2 for d in degrees.values()):
        raise PipelineError("parallel-link vertex retains more than two edges")
    if all(d == 2 for d in degrees.values()):
        v0 = min(comp)
        verts, eds, closed = _walk_chain(cx, branch, v0, min(h_adj[v0])[0])
        if not closed or set(verts) != comp:
            raise PipelineError("2-regular parallel component did not close into a cycle")
        cert, rots = torus_crossing_check(cx, verts, eds, links=links)
        if cert is not None:
            return cert
        for v, rot in rots.items():
            record(v, rot)
        return None
    ends = sorted(v for v in comp if degrees[v] == 1)
    if len(ends) != 2:
        raise PipelineError("parallel component is neither a cycle nor a chain")
    start = ends[0]
    inner = min(h_adj[start])[0]
    a, b = branch[start]
    if inner not in (a, b):
        raise PipelineError(f"retained edge {inner} is not a branch edge of vertex {start}")
    outer_a = b if inner == a else a
    ua, wa = cx.edges[outer_a]
    chain_v, chain_e, closed = _walk_chain(cx, branch, start, inner)
    if closed or set(chain_v[:-1]) != comp:
        raise PipelineError("open parallel component did not walk as a chain")
    verts = [wa if wa != start else ua] + chain_v
    eds = [outer_a] + chain_e
    _, rots = _transport_chain(cx, links, verts, eds, cx.edge_faces(eds[0]))
    for v, rot in rots.items():
        record(v, rot)
    return None


def _decide_mixed_component(cx, links, branch, h_adj, comp, rigid, record):
    """A retained component with rigid vertices: every rigid link has
    exactly two planar rotations (a mirror pair), so each run of parallel
    links between rigid vertices becomes a parity constraint between the
    two binary choices.  An inconsistent constraint cycle is realized as a
    chordless cycle in the complex and certified by contraction."""
    pair: Dict[int, Tuple[GraphRotation, GraphRotation]] = {}
    for u in rigid:
        base = unique_embedding_3connected(links[u])[0]
        pair[u] = (base, base.mirrored())

    segments: List[_Segment] = []
    seen_direct: Set[int] = set()
    visited_chain: Set[int] = set()
    rigid_set = set(rigid)
    for u in rigid:
        for e, w in sorted(h_adj[u]):
            if w in rigid_set:
                if e in seen_direct:
                    continue
                seen_direct.add(e)
                segments.append(_Segment((u, w), (e,), "link"))
                continue
            if w in visited_chain:
                continue
            verts = [u, w]
            eds = [e]
            cur = w
            kind = None
            while True:
                visited_chain.add(cur)
                a, b = branch[cur]
                if eds[-1] not in (a, b):
                    raise PipelineError(
                        f"edge {eds[-1]} is not a branch edge of vertex {cur}"
                    )
                nxt_e = b if eds[-1] == a else a
                eds.append(nxt_e)
                p, q = cx.edges[nxt_e]
                nxt = q if cur == p else p
                verts.append(nxt)
                if nxt in rigid_set:
                    kind = "cycle" if nxt == u else "link"
                    break
                if nxt in comp:
                    cur = nxt
                    continue
                kind = "dangling"
                break
            segments.append(_Segment(tuple(verts), tuple(eds), kind))

    for seg in segments:
        if seg.kind == "dangling":
            continue
        u = seg.vertices[0]
        v = seg.vertices[-1]
        rot_u = pair[u][0]
        n_first = (seg.edges[0], _end_at(cx, seg.edges[0], u))
        sigma0 = un_induce(cx, u, n_first, rot_u.rotators[n_first])
        final, _ = _transport_chain(cx, links, seg.vertices, seg.edges, sigma0)
        n_last = (seg.edges[-1], _end_at(cx, seg.edges[-1], v))
        arrived = induced_rotator_at(cx, final, n_last)
        hit0 = _cyc_eq(arrived, pair[v][0].rotators[n_last])
        hit1 = _cyc_eq(arrived, pair[v][1].rotators[n_last])
        if hit0 and hit1:
            raise PipelineError("a rotator matched both members of a mirror pair")
        if not hit0 and not hit1:
            if seg.kind == "cycle":
                cyc_v, cyc_e = _canonical_cycle_form(list(seg.vertices[:-1]), list(seg.edges))
                return NonLoopPlanarContraction(cyc_v, cyc_e)
            chord = _direct_edge_between(cx, u, v, exclude=seg.edges)
            return NonLoopPlanarParaPath(seg.vertices, seg.edges, chord=chord)
        seg.parity = 0 if hit0 else 1
        if seg.kind == "cycle" and seg.parity == 1:
            cyc_v, cyc_e = _canonical_cycle_form(list(seg.vertices[:-1]), list(seg.edges))
            return NonLoopPlanarContraction(cyc_v, cyc_e)

    # Constraint forest over the rigid vertices: ``forest[x] = (parent,
    # parity, segment)`` where ``segment`` joins exactly x and parent.  Before
    # linking two trees the first is re-rooted at its own endpoint so that
    # invariant survives, which keeps conflict cycles realizable as genuine
    # paths in the complex.
    forest: Dict[int, Tuple[int, int, _Segment]] = {}

    def parity_of(u: int) -> Tuple[int, int]:
        p = 0
        while u in forest:
            p ^= forest[u][1]
            u = forest[u][0]
        return u, p

    def reroot(x: int) -> None:
        entries = []
        while x in forest:
            parent, p, s = forest.pop(x)
            entries.append((x, parent, p, s))
            x = parent
        for child, parent, p, s in entries:
            forest[parent] = (child, p, s)

    for seg in segments:
        if seg.kind != "link":
            continue
        u, v = seg.vertices[0], seg.vertices[-1]
        ru, pu = parity_of(u)
        rv, pv = parity_of(v)
        if ru != rv:
            reroot(u)
            forest[u] = (v, seg.parity, seg)
            continue
        if pu ^ pv == seg.parity:
            continue
        cycle_segs = _constraint_cycle(segments, forest, u, v) + [seg]
        cyc_v, cyc_e = _realize_constraint_cycle(cx, cycle_segs, u)
        cyc_v, cyc_e = _refine_odd_cycle(cx, segments, cyc_v, cyc_e)
        return NonLoopPlanarContraction(*_canonical_cycle_form(list(cyc_v), list(cyc_e)))

    choice: Dict[int, int] = {}
    for u in rigid:
        _, p = parity_of(u)
        choice[u] = p
    for u in rigid:
        record(u, pair[u][choice[u]])
    for seg in segments:
        u = seg.vertices[0]
        rot_u = pair[u][choice[u]]
        n_first = (seg.edges[0], _end_at(cx, seg.edges[0], u))
        sigma0 = un_induce(cx, u, n_first, rot_u.rotators[n_first])
        final, rots = _transport_chain(cx, links, seg.vertices, seg.edges, sigma0)
        for w, rot in rots.items():
            record(w, rot)
        if seg.kind == "dangling":
            continue
        v = seg.vertices[-1]
        n_last = (seg.edges[-1], _end_at(cx, seg.edges[-1], v))
        arrived = induced_rotator_at(cx, final, n_last)
        if not _cyc_eq(arrived, pair[v][choice[v]].rotators[n_last]):
            raise PipelineError("transport disagrees with the chosen mirror assignment")
    return None


def _direct_edge_between(cx: TwoComplex, u: int, v: int, exclude: Sequence[int]) -> Optional[int]:
    for e in sorted(cx.vertex_edges(u)):
        if e in exclude:
            continue
        if set(cx.edges[e]) == {u, v}:
            return e
    return None


def _constraint_cycle(segments, forest, u, v) -> List[_Segment]:
    """The forest path between two rigid vertices as a list of segments."""

    def path_to_root(x):
        out = []
        while x in forest:
            parent, _, seg = forest[x]
            out.append((x, seg))
            x = parent
        return out, x

    pu, root_u = path_to_root(u)
    pv, root_v = path_to_root(v)
    if root_u != root_v:
        raise PipelineError("constraint cycle endpoints in different trees")
    on_u = {x for x, _ in pu} | {root_u}
    lca = v
    while lca not in on_u:
        lca = forest[lca][0]
    segs: List[_Segment] = []
    for x, seg in pu:
        if x == lca:
            break
        segs.append(seg)
    tail: List[_Segment] = []
    for x, seg in pv:
        if x == lca:
            break
        tail.append(seg)
    return segs + tail[::-1]


def _realize_constraint_cycle(cx, cycle_segs: List[_Segment], start: int):
    """Concatenate the vertex paths of a closed run of segments into one
    vertex/edge cycle through the complex, starting at ``start``."""
    verts: List[int] = [start]
    eds: List[int] = []
    cur = start
    for seg in cycle_segs:
        if seg.vertices[0] == cur:
            vs, es = list(seg.vertices), list(seg.edges)
        elif seg.vertices[-1] == cur:
            vs, es = list(seg.vertices[::-1]), list(seg.edges[::-1])
        else:
            raise PipelineError("segments do not chain into a cycle")
        verts.extend(vs[1:])
        eds.extend(es)
        cur = vs[-1]
    if verts[-1] != start:
        raise PipelineError("constraint cycle does not close")
    verts.pop()
    if len(set(verts)) != len(verts):
        raise PipelineError("constraint cycle revisits a vertex")
    return tuple(verts), tuple(eds)


def _refine_odd_cycle(cx, segments: List[_Segment], verts: Tuple[int, ...], eds: Tuple[int, ...]):
    """Shorten an odd constraint cycle until the realized complex cycle is
    chordless.  Every chord of such a cycle is a direct edge between two
    rigid vertices, hence itself a segment with a known parity; the chord
    splits the cycle into two and exactly one half stays odd."""
    by_single_edge: Dict[int, _Segment] = {
        seg.edges[0]: seg for seg in segments if seg.kind == "link" and len(seg.edges) == 1
    }

    def parity_of_edge_run(run_edges: List[int]) -> int:
        # recover the segment decomposition of a realized arc and xor parities
        p = 0
        i = 0
        while i < len(run_edges):
            seg = _segment_containing(segments, run_edges[i])
            p ^= seg.parity
            i += len(seg.edges)
        return p

    while True:
        vset = set(verts)
        eset = set(eds)
        chord = None
        for e in sorted(cx.edges):
            if e in eset:
                continue
            a, b = cx.edges[e]
            if a in vset and b in vset:
                chord = e
                break
        if chord is None:
            return verts, eds
        seg_c = by_single_edge.get(chord)
        if seg_c is None or seg_c.parity is None:
            raise PipelineError(f"cycle chord {chord} is not a decided direct segment")
        a, b = cx.edges[chord]
        ia, ib = verts.index(a), verts.index(b)
        if ia > ib:
            ia, ib = ib, ia
        arc1_v = verts[ia : ib + 1]
        arc1_e = eds[ia:ib]
        arc2_v = verts[ib:] + verts[: ia + 1]
        arc2_e = eds[ib:] + eds[:ia]
        p1 = parity_of_edge_run(list(arc1_e))
        if (p1 ^ seg_c.parity) % 2 == 1:
            verts = tuple(arc1_v)
            eds = tuple(arc1_e) + (chord,)
        else:
            verts = tuple(arc2_v)
            eds = tuple(arc2_e) + (chord,)
        if len(eds) >= len(eset):
            raise PipelineError("chord refinement failed to shrink the cycle")


def _segment_containing(segments: List[_Segment], e: int) -> _Segment:
    for seg in segments:
        if e in seg.edges:
            return seg
    raise PipelineError(f"edge {e} belongs to no segment")
