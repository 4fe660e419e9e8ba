"""Core data model: 2-dimensional complexes with faces attached along edge trails.

A complex stores vertices (ints), edges (id -> ordered endpoint pair) and faces
(id -> closed trail of darts).  A dart is a pair ``(edge_id, direction)`` with
direction ``+1`` (traverse from ``edges[e][0]`` to ``edges[e][1]``) or ``-1``
(the reverse).  A trail is closed and chained: the head of each dart is the
tail of the next, cyclically.

Faces are identified with their darts for rotation-system purposes: the dart at
position ``i`` of face ``f`` is addressed as ``(f, i)``.  Rotation systems
(see :mod:`twoplex.rotation`) store one cyclic order of these addresses per edge.

Simplicial complexes are the fragment the decision procedure operates on: no
loops, no parallel edges, every face a triangle on three distinct vertices, and
no two faces with the same vertex set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import InvalidInput, LinkConnected, LoopContraction, NotBigon

__all__ = [
    "Dart",
    "TwoComplex",
    "ValidationReport",
    "validate",
    "contract_edge",
    "contract_bigon",
    "split_vertex",
    "delete_faces",
    "edge_degree_parameter",
]

#: A dart: (edge id, direction).  Direction +1 runs tail->head of the stored pair.
Dart = Tuple[int, int]


@dataclass(frozen=True)
class TwoComplex:
    """An abstract 2-complex.  Treat instances as immutable.

    Parameters
    ----------
    vertices : frozenset of int
    edges : mapping edge id -> (u, v)
        Ordered endpoint pair; the order fixes dart directions.
    faces : mapping face id -> tuple of darts
        Each value is a closed trail.
    """

    vertices: frozenset
    edges: Dict[int, Tuple[int, int]]
    faces: Dict[int, Tuple[Dart, ...]]

    # -- construction -----------------------------------------------------

    @staticmethod
    def build(
        vertices: Iterable[int],
        edges: Mapping[int, Tuple[int, int]],
        faces: Mapping[int, Sequence[Dart]] = (),
    ) -> "TwoComplex":
        cx = TwoComplex(
            vertices=frozenset(vertices),
            edges={int(e): (int(u), int(v)) for e, (u, v) in dict(edges).items()},
            faces={int(f): tuple((int(e), int(d)) for e, d in trail) for f, trail in dict(faces).items()},
        )
        cx.check_consistent()
        return cx

    @staticmethod
    def from_triangles(triangles: Sequence[Tuple[int, int, int]]) -> "TwoComplex":
        """Build a simplicial complex from triangle vertex triples.

        Edges are created (ids in first-seen order) and shared between
        triangles; faces get ids 0..n-1 in input order.
        """
        edge_ids: Dict[Tuple[int, int], int] = {}
        edges: Dict[int, Tuple[int, int]] = {}
        vertices = set()
        faces: Dict[int, Tuple[Dart, ...]] = {}

        def edge_of(a: int, b: int) -> Dart:
            key = (min(a, b), max(a, b))
            if key not in edge_ids:
                edge_ids[key] = len(edge_ids)
                edges[edge_ids[key]] = key
            e = edge_ids[key]
            return (e, 1 if edges[e][0] == a else -1)

        for fid, tri in enumerate(triangles):
            a, b, c = tri
            vertices.update(tri)
            faces[fid] = (edge_of(a, b), edge_of(b, c), edge_of(c, a))
        return TwoComplex.build(vertices, edges, faces)

    def check_consistent(self) -> None:
        """Raise InvalidInput unless references and trails are well formed."""
        for e, (u, v) in self.edges.items():
            if u not in self.vertices or v not in self.vertices:
                raise InvalidInput(f"edge {e} references missing vertex")
        for f, trail in self.faces.items():
            if not trail:
                raise InvalidInput(f"face {f} has an empty trail")
            for e, d in trail:
                if e not in self.edges:
                    raise InvalidInput(f"face {f} references missing edge {e}")
                if d not in (1, -1):
                    raise InvalidInput(f"face {f} has bad dart direction {d}")
            for i, dart in enumerate(trail):
                nxt = trail[(i + 1) % len(trail)]
                if self.dart_head(dart) != self.dart_tail(nxt):
                    raise InvalidInput(f"face {f} trail does not chain at position {i}")

    # -- darts and incidence ----------------------------------------------

    def dart_tail(self, dart: Dart) -> int:
        e, d = dart
        u, v = self.edges[e]
        return u if d == 1 else v

    def dart_head(self, dart: Dart) -> int:
        e, d = dart
        u, v = self.edges[e]
        return v if d == 1 else u

    def face_vertices(self, f: int) -> Tuple[int, ...]:
        """Corner vertices of ``f`` in trail order (corner i sits at head of dart i)."""
        return tuple(self.dart_head(d) for d in self.faces[f])

    def edge_faces(self, e: int) -> Tuple[Tuple[int, int], ...]:
        """All darts lying on edge ``e`` as (face id, position) pairs, sorted."""
        return self._edge_faces().get(e, ())

    def _edge_faces(self) -> Dict[int, Tuple[Tuple[int, int], ...]]:
        cache = self.__dict__.get("_edge_faces_cache")
        if cache is None:
            acc: Dict[int, List[Tuple[int, int]]] = {}
            for f in sorted(self.faces):
                for pos, (e, _) in enumerate(self.faces[f]):
                    acc.setdefault(e, []).append((f, pos))
            cache = {e: tuple(lst) for e, lst in acc.items()}
            object.__setattr__(self, "_edge_faces_cache", cache)
        return cache

    def edge_degree(self, e: int) -> int:
        """Face-degree: the number of darts on ``e`` over all faces (with multiplicity)."""
        return len(self.edge_faces(e))

    def vertex_edges(self, v: int) -> Tuple[int, ...]:
        """Edge ids with at least one endpoint at ``v``, sorted."""
        cache = self.__dict__.get("_vertex_edges_cache")
        if cache is None:
            acc: Dict[int, List[int]] = {}
            for e in sorted(self.edges):
                u, w = self.edges[e]
                acc.setdefault(u, []).append(e)
                if w != u:
                    acc.setdefault(w, []).append(e)
            cache = {v_: tuple(lst) for v_, lst in acc.items()}
            object.__setattr__(self, "_vertex_edges_cache", cache)
        return cache.get(v, ())

    def is_loop(self, e: int) -> bool:
        u, v = self.edges[e]
        return u == v

    # -- structure predicates ----------------------------------------------

    @property
    def is_simplicial(self) -> bool:
        seen_pairs = set()
        for e, (u, v) in self.edges.items():
            if u == v:
                return False
            key = (min(u, v), max(u, v))
            if key in seen_pairs:
                return False
            seen_pairs.add(key)
        seen_sets = set()
        for f, trail in self.faces.items():
            if len(trail) != 3:
                return False
            vs = frozenset(self.face_vertices(f))
            if len(vs) != 3:
                return False
            if vs in seen_sets:
                return False
            seen_sets.add(vs)
        return True

    def fresh_vertex(self) -> int:
        return max(self.vertices, default=-1) + 1

    def fresh_edge(self) -> int:
        return max(self.edges, default=-1) + 1

    def fresh_face(self) -> int:
        return max(self.faces, default=-1) + 1

    def __repr__(self) -> str:  # keep test failures readable
        return (
            f"TwoComplex(|V|={len(self.vertices)}, |E|={len(self.edges)}, "
            f"|F|={len(self.faces)})"
        )


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`.

    ``deleted_edges`` / ``deleted_vertices`` list isolated cells that were
    removed (edges in no face, then vertices in no edge); removal is the
    repair convention, not an error.
    """

    complex: TwoComplex
    deleted_edges: Tuple[int, ...] = ()
    deleted_vertices: Tuple[int, ...] = ()
    simplicial: bool = False


def validate(cx: TwoComplex) -> ValidationReport:
    """Check well-formedness and repair isolated cells.

    Raises InvalidInput for structural defects (dangling references, broken
    trails).  Edges incident with no face and vertices incident with no edge
    are deleted and reported.
    """
    cx.check_consistent()
    dead_edges = tuple(sorted(e for e in cx.edges if cx.edge_degree(e) == 0))
    edges = {e: uv for e, uv in cx.edges.items() if e not in set(dead_edges)}
    used_vertices = set()
    for u, v in edges.values():
        used_vertices.add(u)
        used_vertices.add(v)
    dead_vertices = tuple(sorted(cx.vertices - used_vertices))
    repaired = TwoComplex(
        vertices=frozenset(used_vertices),
        edges=edges,
        faces=dict(cx.faces),
    )
    return ValidationReport(
        complex=repaired,
        deleted_edges=dead_edges,
        deleted_vertices=dead_vertices,
        simplicial=repaired.is_simplicial,
    )


# ---------------------------------------------------------------------------
# elementary operations


@dataclass
class ContractResult:
    """Result of contracting an edge: the new complex plus the id bookkeeping
    needed to map rotation systems back and forth."""

    complex: TwoComplex
    merged_vertex: int
    #: face id -> list of positions (in the old trail) that were deleted
    dropped_darts: Dict[int, Tuple[int, ...]] = field(default_factory=dict)
    deleted_faces: Tuple[int, ...] = ()
    #: old (face,pos) -> new (face,pos) for every surviving dart
    dart_map: Dict[Tuple[int, int], Tuple[int, int]] = field(default_factory=dict)


def contract_edge(cx: TwoComplex, e: int) -> ContractResult:
    """Contract a non-loop edge ``e``: identify its endpoints (fresh vertex id),
    drop all darts on ``e`` from face trails, delete faces that become empty.

    Other edges between the two endpoints become loops; parallel edges and
    short faces may appear.  Callers that need simpliciality restore it by
    contracting the arising size-2 faces.
    """
    if e not in cx.edges:
        raise InvalidInput(f"no edge {e}")
    u, v = cx.edges[e]
    if u == v:
        raise LoopContraction(f"edge {e} is a loop")
    m = cx.fresh_vertex()
    remap = {u: m, v: m}

    def mv(x: int) -> int:
        return remap.get(x, x)

    edges = {
        eid: (mv(a), mv(b)) for eid, (a, b) in cx.edges.items() if eid != e
    }
    faces: Dict[int, Tuple[Dart, ...]] = {}
    dropped: Dict[int, Tuple[int, ...]] = {}
    dart_map: Dict[Tuple[int, int], Tuple[int, int]] = {}
    deleted: List[int] = []
    for f, trail in cx.faces.items():
        kept = [(pos, dart) for pos, dart in enumerate(trail) if dart[0] != e]
        gone = tuple(pos for pos, dart in enumerate(trail) if dart[0] == e)
        if gone:
            dropped[f] = gone
        if not kept:
            deleted.append(f)
            continue
        faces[f] = tuple(dart for _, dart in kept)
        for newpos, (oldpos, _) in enumerate(kept):
            dart_map[(f, oldpos)] = (f, newpos)
    vertices = (cx.vertices - {u, v}) | {m}
    out = TwoComplex(vertices=frozenset(vertices), edges=edges, faces=faces)
    out.check_consistent()
    return ContractResult(
        complex=out,
        merged_vertex=m,
        dropped_darts=dropped,
        deleted_faces=tuple(deleted),
        dart_map=dart_map,
    )


@dataclass
class BigonResult:
    """Result of contracting a size-2 face (two parallel edges merge into one)."""

    complex: TwoComplex
    merged_edge: int
    removed_edge: int
    removed_face: int
    #: old (face,pos) -> new (face,pos); darts on the removed face are absent
    dart_map: Dict[Tuple[int, int], Tuple[int, int]] = field(default_factory=dict)
    #: True when the removed edge's stored endpoint order was opposite to the
    #: merged edge's (its darts flipped direction)
    flipped: bool = False


def contract_bigon(cx: TwoComplex, f: int) -> BigonResult:
    """Contract the size-2 face ``f``: its two darts must lie on distinct
    parallel edges e1, e2; e2's darts are rewritten onto e1 and both the face
    and e2 are deleted.  The smaller edge id survives."""
    trail = cx.faces.get(f)
    if trail is None or len(trail) != 2:
        raise NotBigon(f"face {f} does not have size two")
    (e1, _), (e2, _) = trail
    if e1 == e2:
        raise NotBigon(f"face {f} lies twice on edge {e1}")
    if set(cx.edges[e1]) != set(cx.edges[e2]):
        # cannot happen in a well-chained trail, but guard anyway
        raise NotBigon(f"edges {e1},{e2} of face {f} are not parallel")
    keep, drop = (e1, e2) if e1 < e2 else (e2, e1)
    flipped = cx.edges[keep] != cx.edges[drop]
    edges = {eid: uv for eid, uv in cx.edges.items() if eid != drop}
    faces: Dict[int, Tuple[Dart, ...]] = {}
    dart_map: Dict[Tuple[int, int], Tuple[int, int]] = {}
    for g, tr in cx.faces.items():
        if g == f:
            continue
        new_trail: List[Dart] = []
        for pos, (e, d) in enumerate(tr):
            if e == drop:
                e, d = keep, (-d if flipped else d)
            new_trail.append((e, d))
            dart_map[(g, pos)] = (g, pos)
        faces[g] = tuple(new_trail)
    out = TwoComplex(vertices=cx.vertices, edges=edges, faces=faces)
    out.check_consistent()
    return BigonResult(
        complex=out,
        merged_edge=keep,
        removed_edge=drop,
        removed_face=f,
        dart_map=dart_map,
        flipped=flipped,
    )


@dataclass
class SplitResult:
    complex: TwoComplex
    #: new vertex id -> nodes ((edge, end) pairs at the old vertex) it received
    parts: Dict[int, Tuple[Tuple[int, int], ...]] = field(default_factory=dict)
    old_vertex: int = -1


def split_vertex(cx: TwoComplex, v: int) -> SplitResult:
    """Split ``v`` into one vertex per connected component of its link.

    Edge ends at ``v`` are reattached according to the component of their link
    node; faces are untouched as edge trails.  Raises LinkConnected if the
    link has a single component (nothing to do) and DisconnectedLink never --
    this is the operation that *removes* disconnection.
    """
    from .links import link_at  # local import: links depends on complexes

    lk = link_at(cx, v)
    comps = lk.components()
    if len(comps) <= 1:
        raise LinkConnected(f"link at {v} is connected")
    parts: Dict[int, Tuple[Tuple[int, int], ...]] = {}
    end_target: Dict[Tuple[int, int], int] = {}
    base = cx.fresh_vertex()
    for i, comp in enumerate(sorted(comps, key=lambda c: sorted(c)[0])):
        nv = base + i
        parts[nv] = tuple(sorted(comp))
        for node in comp:
            end_target[node] = nv
    edges = dict(cx.edges)
    for (e, end), nv in end_target.items():
        u, w = edges[e]
        edges[e] = (nv, w) if end == 0 else (u, nv)
    vertices = (cx.vertices - {v}) | set(parts)
    out = TwoComplex(vertices=frozenset(vertices), edges=edges, faces=dict(cx.faces))
    out.check_consistent()
    return SplitResult(complex=out, parts=parts, old_vertex=v)


def delete_faces(cx: TwoComplex, drop: Iterable[int]) -> TwoComplex:
    """Delete the listed faces, then isolated edges and vertices (validator
    convention).  Used by obstruction certificates to carve sub-complexes."""
    drop = set(drop)
    faces = {f: tr for f, tr in cx.faces.items() if f not in drop}
    interim = TwoComplex(vertices=cx.vertices, edges=dict(cx.edges), faces=faces)
    return validate(interim).complex


def edge_degree_parameter(cx: TwoComplex) -> int:
    """Sum of (face-degree - 2) over edges of face-degree >= 3."""
    total = 0
    for e in cx.edges:
        d = cx.edge_degree(e)
        if d >= 3:
            total += d - 2
    return total
