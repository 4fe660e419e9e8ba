"""The five stretching operations, recorded as replayable steps.

Every operation returns the rewritten complex together with a list of step
records.  A step keeps both endpoint complexes plus the id bookkeeping needed
to do two things later:

* replay the whole trace forward and land on the same complex bit for bit;
* pull a rotation system of the final complex back to the original one
  (``rotation_pullback``), which is how a positive answer of the decision
  procedure is turned into a verified certificate.

Pulling back through a pure stretch is a dart-by-dart translation.  Pulling
back through a contraction has to reconstruct the rotator of the contracted
edge; for the contractions this package performs, the rotator is either
transported through a parallel link or found by a small gated search, and a
failure of both is a ``PipelineError`` (an internal-invariant breach, never a
wrong answer).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .complexes import (
    BigonResult,
    ContractResult,
    Dart,
    TwoComplex,
    contract_bigon,
    contract_edge,
    split_vertex,
)
from .errors import (
    AdjacencyNotForced,
    BudgetExceeded,
    DegreeTooLow,
    DisconnectedLink,
    InvalidInput,
    LinkNot2Connected,
    LoopContraction,
    NotABranch,
    NotReversible,
    NotTwoSeparator,
    OutOfImplementedRange,
    PipelineError,
)
from .links import (
    LinkGraph,
    is_subdivision_3connected,
    link_at,
    para_star_center,
    parallel_witness,
    two_separators,
)
from .rotation import (
    DartAddr,
    RotationSystem,
    enumerate_planar_rotations,
    genus_of_rotation,
    induced_rotation,
    induced_rotator_at,
    planar_embed,
    un_induce,
    unique_embedding_3connected,
)

__all__ = [
    "StretchStep",
    "SplitVertexStep",
    "BranchPreStep",
    "SubdivideFaceStep",
    "SubdivideEdgeStep",
    "TwoSeparatorStep",
    "EdgePreStep",
    "ContractEdgeStep",
    "ContractBigonStep",
    "StretchTrace",
    "split_disconnected_link",
    "stretch_branch",
    "stretch_two_separator",
    "stretch_edge",
    "contract_reversible",
    "rotation_pullback",
]


def _head_end(d: Dart) -> int:
    return 1 if d[1] == 1 else 0


def _tail_end(d: Dart) -> int:
    return 0 if d[1] == 1 else 1


def _node_at(cx: TwoComplex, v: int, e: int) -> Tuple[int, int]:
    """The link node of edge e at vertex v (the end index of e at v)."""
    if e not in cx.edges:
        raise InvalidInput(f"no edge {e}")
    u, w = cx.edges[e]
    if u == w:
        raise InvalidInput(f"edge {e} is a loop")
    if u == v:
        return (e, 0)
    if w == v:
        return (e, 1)
    raise InvalidInput(f"edge {e} is not incident with vertex {v}")


# ---------------------------------------------------------------------------
# step records


class StretchStep:
    """Base class; concrete steps define pull() and describe()."""

    op = "step"
    before: TwoComplex
    after: TwoComplex

    def pull(self, rot: RotationSystem) -> RotationSystem:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


def _pull_translate(step: StretchStep, rot: RotationSystem, dart_back: Dict) -> RotationSystem:
    """Translate each surviving edge's rotator dart by dart back to `before`.

    Sound for pure stretches: every edge of the pre-complex keeps its face
    set, only dart addresses move.
    """
    out: Dict[int, Tuple[DartAddr, ...]] = {}
    before = step.before
    for x in before.edges:
        seq = rot.rotators.get(x)
        if seq is None:
            raise PipelineError(f"pullback: edge {x} missing from rotation")
        mapped = []
        for d in seq:
            md = dart_back.get(d, d)
            trail = before.faces.get(md[0])
            if trail is None or trail[md[1]][0] != x:
                raise PipelineError(f"pullback: dart {d} of edge {x} has no preimage")
            mapped.append(md)
        out[x] = tuple(mapped)
    return RotationSystem(out)


@dataclass
class SplitVertexStep(StretchStep):
    before: TwoComplex
    after: TwoComplex
    vertex: int
    parts: Dict[int, Tuple[Tuple[int, int], ...]]
    op = "SplitVertex"

    def pull(self, rot: RotationSystem) -> RotationSystem:
        # faces and edge ids are untouched; rotators carry over verbatim
        return RotationSystem(dict(rot.rotators))

    def describe(self) -> dict:
        return {
            "op": self.op,
            "vertex": self.vertex,
            "parts": {str(k): sorted(v) for k, v in self.parts.items()},
        }


@dataclass
class BranchPreStep(StretchStep):
    """Move a branch of the link at `vertex` off to a fresh vertex.

    Faces joining the moved branch to `edge` gain a dart of `new_edge`; the
    subsequent face subdivisions are recorded as separate steps.
    """

    before: TwoComplex
    after: TwoComplex
    vertex: int
    edge: int
    branch: Tuple[Tuple[int, int], ...]
    new_vertex: int
    new_edge: int
    #: face -> position where the new edge's dart was inserted
    insertions: Dict[int, int]
    op = "Branch"

    def _dart_back(self) -> Dict[DartAddr, DartAddr]:
        back: Dict[DartAddr, DartAddr] = {}
        for f, p in self.insertions.items():
            L = len(self.after.faces[f])
            for q in range(p + 1, L):
                back[(f, q)] = (f, q - 1)
        return back

    def pull(self, rot: RotationSystem) -> RotationSystem:
        return _pull_translate(self, rot, self._dart_back())

    def describe(self) -> dict:
        return {
            "op": self.op,
            "vertex": self.vertex,
            "edge": self.edge,
            "branch": sorted(self.branch),
            "new_vertex": self.new_vertex,
            "new_edge": self.new_edge,
            "extended_faces": sorted(self.insertions),
        }


@dataclass
class SubdivideFaceStep(StretchStep):
    before: TwoComplex
    after: TwoComplex
    face: int
    part_a: int
    part_b: int
    new_edge: int
    corner_i: int
    corner_j: int
    dart_back: Dict[DartAddr, DartAddr]
    op = "Subdivide"

    def pull(self, rot: RotationSystem) -> RotationSystem:
        return _pull_translate(self, rot, self.dart_back)

    def describe(self) -> dict:
        return {
            "op": self.op,
            "kind": "face",
            "face": self.face,
            "parts": [self.part_a, self.part_b],
            "new_edge": self.new_edge,
        }


@dataclass
class SubdivideEdgeStep(StretchStep):
    before: TwoComplex
    after: TwoComplex
    edge: int
    new_edge: int
    new_vertex: int
    dart_back: Dict[DartAddr, DartAddr]
    op = "Subdivide"

    def pull(self, rot: RotationSystem) -> RotationSystem:
        return _pull_translate(self, rot, self.dart_back)

    def describe(self) -> dict:
        return {
            "op": self.op,
            "kind": "edge",
            "edge": self.edge,
            "new_edge": self.new_edge,
            "new_vertex": self.new_vertex,
        }


@dataclass
class PieceInfo:
    """One inserted sheet of a two-separator stretch (component X)."""

    u_vertex: int
    edge_vu: int
    edge_au: int
    edge_bu: int
    face_a: int
    face_b: int
    moved: Tuple[Tuple[int, int], ...]


@dataclass
class TwoSeparatorStep(StretchStep):
    before: TwoComplex
    after: TwoComplex
    vertex: int
    edge_a: int
    edge_b: int
    bar_a: int
    bar_b: int
    pieces: Tuple[PieceInfo, ...]
    note: str = ""
    op = "TwoSeparator"

    def pull(self, rot: RotationSystem) -> RotationSystem:
        cur = self.after
        rotators: Dict[int, Tuple[DartAddr, ...]] = {
            x: tuple(seq) for x, seq in rot.rotators.items()
        }
        merged = self.vertex
        for piece in self.pieces:
            res = contract_edge(cur, piece.edge_vu)
            rotators = _push_contract_edge(res, piece.edge_vu, rotators)
            cur = res.complex
            merged = res.merged_vertex
            for bf in (piece.face_a, piece.face_b):
                bres = contract_bigon(cur, bf)
                rotators = _push_contract_bigon(res_complex=cur, res=bres, rotators=rotators)
                cur = bres.complex
        emap = {self.bar_a: self.edge_a, self.bar_b: self.edge_b}
        renamed = _rename_cells(cur, emap, {merged: self.vertex})
        if renamed != self.before:
            raise PipelineError("two-separator pullback did not reproduce the pre-complex")
        out = {emap.get(x, x): seq for x, seq in rotators.items()}
        return RotationSystem(out)

    def describe(self) -> dict:
        return {
            "op": self.op,
            "vertex": self.vertex,
            "edges": [self.edge_a, self.edge_b],
            "replacements": [self.bar_a, self.bar_b],
            "sheets": [
                {
                    "vertex": p.u_vertex,
                    "edges": [p.edge_vu, p.edge_au, p.edge_bu],
                    "faces": [p.face_a, p.face_b],
                    "moved": sorted(p.moved),
                }
                for p in self.pieces
            ],
            "note": self.note,
        }


@dataclass
class EdgePreStep(StretchStep):
    """Split an edge into a parallel pair bounding a bigon; two chosen faces
    move to the fresh copy, the rest stay."""

    before: TwoComplex
    after: TwoComplex
    edge: int
    new_edge: int
    bigon: int
    moved_faces: Tuple[int, int]
    op = "Edge"

    def pull(self, rot: RotationSystem) -> RotationSystem:
        bres = contract_bigon(self.after, self.bigon)
        rotators = _push_contract_bigon(
            res_complex=self.after, res=bres, rotators=dict(rot.rotators)
        )
        if bres.complex != self.before:
            raise PipelineError("edge pre-stretch pullback did not reproduce the pre-complex")
        if bres.merged_edge != self.edge or bres.removed_edge != self.new_edge:
            raise PipelineError("edge pre-stretch pullback merged the wrong edge")
        return RotationSystem(rotators)

    def describe(self) -> dict:
        return {
            "op": self.op,
            "edge": self.edge,
            "new_edge": self.new_edge,
            "bigon": self.bigon,
            "moved_faces": list(self.moved_faces),
        }


@dataclass
class ContractEdgeStep(StretchStep):
    before: TwoComplex
    after: TwoComplex
    edge: int
    merged_vertex: int
    dart_map: Dict[DartAddr, DartAddr]
    #: "reversible" (checked para-star contraction), "unstretch" (undoing an
    #: earlier branch stretch) or "forced" (caller vouches for legality)
    mode: str = "reversible"
    op = "ContractReversible"

    def pull(self, rot: RotationSystem) -> RotationSystem:
        inv: Dict[DartAddr, DartAddr] = {}
        for old, new in self.dart_map.items():
            inv[new] = old
        base: Dict[int, Tuple[DartAddr, ...]] = {}
        for x in self.before.edges:
            if x == self.edge:
                continue
            seq = rot.rotators.get(x)
            if seq is None:
                raise PipelineError(f"pullback: edge {x} missing from rotation")
            base[x] = tuple(inv[d] for d in seq)
        base[self.edge] = _reconstruct_rotator(self.before, self.edge, base)
        return RotationSystem(base)

    def describe(self) -> dict:
        return {
            "op": self.op,
            "edge": self.edge,
            "merged_vertex": self.merged_vertex,
            "mode": self.mode,
        }


@dataclass
class ContractBigonStep(StretchStep):
    before: TwoComplex
    after: TwoComplex
    face: int
    kept_edge: int
    removed_edge: int
    flipped: bool
    op = "ContractBigon"

    def pull(self, rot: RotationSystem) -> RotationSystem:
        before = self.before
        keep, drop, f = self.kept_edge, self.removed_edge, self.face
        seq = rot.rotators.get(keep)
        if seq is None:
            raise PipelineError(f"pullback: edge {keep} missing from rotation")

        def owner(d: DartAddr) -> int:
            return before.faces[d[0]][d[1]][0]

        n_keep = sum(1 for d in seq if owner(d) == keep)
        n_drop = len(seq) - n_keep
        btrail = before.faces[f]
        pos_keep = 0 if btrail[0][0] == keep else 1
        fk: DartAddr = (f, pos_keep)
        fd: DartAddr = (f, 1 - pos_keep)

        candidates: List[Tuple[Tuple[DartAddr, ...], Tuple[DartAddr, ...]]] = []
        if n_drop == 0:
            # the removed edge's only face was the bigon: insert anywhere
            for i in range(max(1, len(seq))):
                candidates.append((seq[:i] + (fk,) + seq[i:], (fd,)))
        elif n_keep == 0:
            for i in range(max(1, len(seq))):
                candidates.append(((fk,), seq[:i] + (fd,) + seq[i:]))
        else:
            for shift in range(len(seq)):
                r = seq[shift:] + seq[:shift]
                if all(owner(d) == keep for d in r[:n_keep]) and all(
                    owner(d) == drop for d in r[n_keep:]
                ):
                    kb, db = r[:n_keep], r[n_keep:]
                    for db2 in (db, tuple(reversed(db))):
                        candidates.append((kb + (fk,), db2 + (fd,)))
                    break
        if not candidates:
            raise PipelineError(
                f"bigon pullback: rotator of edge {keep} does not split into blocks"
            )
        base = {
            x: tuple(rot.rotators[x])
            for x in before.edges
            if x not in (keep, drop)
        }
        ends = set(before.edges[keep])
        for ck, cd in candidates:
            full = dict(base)
            full[keep] = ck
            full[drop] = cd
            sys = RotationSystem(full)
            if _links_planar(before, sys, ends):
                return sys
        raise PipelineError(f"bigon pullback: no planar rotator split at face {f}")

    def describe(self) -> dict:
        return {
            "op": self.op,
            "face": self.face,
            "kept_edge": self.kept_edge,
            "removed_edge": self.removed_edge,
        }


# ---------------------------------------------------------------------------
# rotation pushforwards through contractions (used inside pullbacks)


def _links_planar(cx: TwoComplex, sys: RotationSystem, vertices: Iterable[int]) -> bool:
    for v in vertices:
        lk = link_at(cx, v)
        if not lk.nodes:
            continue
        if genus_of_rotation(lk, induced_rotation(cx, sys, v, lk)) != 0:
            return False
    return True


def _push_contract_edge(
    res: ContractResult, e: int, rotators: Dict[int, Tuple[DartAddr, ...]]
) -> Dict[int, Tuple[DartAddr, ...]]:
    out: Dict[int, Tuple[DartAddr, ...]] = {}
    for x, seq in rotators.items():
        if x == e:
            continue
        out[x] = tuple(res.dart_map[d] for d in seq)
    return out


def _push_contract_bigon(
    res_complex: TwoComplex,
    res: BigonResult,
    rotators: Dict[int, Tuple[DartAddr, ...]],
) -> Dict[int, Tuple[DartAddr, ...]]:
    """Splice the removed edge's rotator into the kept edge's at the bigon.

    The correct orientation of the spliced block is decided by a genus gate
    at the two endpoint links; exactly the two links touched by the choice.
    """
    keep, drop, f = res.merged_edge, res.removed_edge, res.removed_face
    rk, rd = rotators[keep], rotators[drop]
    pk = next(i for i, d in enumerate(rk) if d[0] == f)
    pd = next(i for i, d in enumerate(rd) if d[0] == f)
    body = rd[pd + 1 :] + rd[:pd]
    base: Dict[int, Tuple[DartAddr, ...]] = {}
    for x, seq in rotators.items():
        if x in (keep, drop):
            continue
        base[x] = tuple(res.dart_map[d] for d in seq)
    ends = set(res.complex.edges[keep])
    for cand in (body, tuple(reversed(body))):
        merged = rk[:pk] + cand + rk[pk + 1 :]
        mapped = tuple(res.dart_map[d] for d in merged)
        full = dict(base)
        full[keep] = mapped
        if _links_planar(res.complex, RotationSystem(full), ends):
            return full
    raise PipelineError(f"bigon pushforward at face {f} failed both orientations")


def _rename_cells(
    cx: TwoComplex, edge_map: Dict[int, int], vertex_map: Dict[int, int]
) -> TwoComplex:
    vertices = frozenset(vertex_map.get(v, v) for v in cx.vertices)
    edges = {
        edge_map.get(e, e): tuple(vertex_map.get(x, x) for x in uv)
        for e, uv in cx.edges.items()
    }
    faces = {
        f: tuple((edge_map.get(e, e), d) for (e, d) in trail)
        for f, trail in cx.faces.items()
    }
    return TwoComplex.build(vertices, edges, faces)


# ---------------------------------------------------------------------------
# rotator reconstruction for contracted edges


def _transport_candidates(
    before: TwoComplex,
    e: int,
    base: Dict[int, Tuple[DartAddr, ...]],
    v: int,
    end: int,
) -> List[Tuple[DartAddr, ...]]:
    """Rotator candidates for e forced through a parallel link at v.

    In a parallel link the rotator at one branch node determines the rotator
    at the other (reversed, path by path); if the other branch node's edge
    already has a rotator, transport it.
    """
    lk = link_at(before, v)
    node = (e, end)
    wit = parallel_witness(lk)
    if wit is None or node not in wit.branch_nodes:
        return []
    other = wit.branch_nodes[1] if wit.branch_nodes[0] == node else wit.branch_nodes[0]
    oe, _ = other
    if oe == e or oe not in base:
        return []
    seq_o = induced_rotator_at(before, base[oe], other)
    pair: Dict = {}
    for arcs_p in wit.paths:
        first, last = arcs_p[0], arcs_p[-1]
        end0 = (first, 0) if lk.node_of(first, 0) == wit.branch_nodes[0] else (first, 1)
        end1 = (last, 0) if lk.node_of(last, 0) == wit.branch_nodes[1] else (last, 1)
        if other == wit.branch_nodes[0]:
            pair[end0] = end1
        else:
            pair[end1] = end0
    try:
        mapped = [pair[a] for a in seq_o]
    except KeyError:
        return []
    req = tuple(reversed(mapped))
    out: List[Tuple[DartAddr, ...]] = []
    for s in (req, tuple(reversed(req))):
        try:
            out.append(un_induce(before, v, node, s))
        except Exception:
            continue
    return out


def _reconstruct_rotator(
    before: TwoComplex, e: int, base: Dict[int, Tuple[DartAddr, ...]]
) -> Tuple[DartAddr, ...]:
    """Find a dart order for e making both endpoint links genus zero, all
    other rotators held fixed.  Transport through a parallel link first, then
    a bounded exhaustive search."""
    darts = sorted(before.edge_faces(e))
    u, w = before.edges[e]
    ends = {u, w}

    def gate(cand: Tuple[DartAddr, ...]) -> bool:
        full = dict(base)
        full[e] = cand
        return _links_planar(before, RotationSystem(full), ends)

    if len(darts) <= 2:
        cand = tuple(darts)
        if gate(cand):
            return cand
        raise PipelineError(f"unique rotator of edge {e} is not planar")

    tried: List[Tuple[DartAddr, ...]] = []
    for end, vv in ((0, u), (1, w)):
        if before.edges[e][end] != vv:  # pragma: no cover - defensive
            continue
        for cand in _transport_candidates(before, e, base, vv, end):
            if cand in tried:
                continue
            tried.append(cand)
            if gate(cand):
                return cand
    k = len(darts)
    if math.factorial(k - 1) > 40320:
        raise PipelineError(
            f"rotator reconstruction for edge {e} out of range (degree {k})"
        )
    first, rest = darts[0], darts[1:]
    for perm in itertools.permutations(rest):
        cand = (first,) + perm
        if cand in tried:
            continue
        if gate(cand):
            return cand
    raise PipelineError(f"no planar rotator exists for contracted edge {e}")


# ---------------------------------------------------------------------------
# operation 5: split a vertex with disconnected link


def split_disconnected_link(cx: TwoComplex, v: int) -> Tuple[TwoComplex, List[StretchStep]]:
    res = split_vertex(cx, v)
    step = SplitVertexStep(
        before=cx,
        after=res.complex,
        vertex=v,
        parts={k: tuple(t) for k, t in res.parts.items()},
    )
    return res.complex, [step]


# ---------------------------------------------------------------------------
# operation 1: stretching a local branch


def stretch_branch(
    cx: TwoComplex,
    v: int,
    e: int,
    branch_nodes: Optional[Iterable[Tuple[int, int]]] = None,
) -> Tuple[TwoComplex, List[StretchStep]]:
    """Move one branch of the link at v (at its node e) onto a fresh vertex.

    `branch_nodes` selects the branch (link nodes, the node of e excluded or
    included -- both accepted); it may be omitted when there is exactly one.
    """
    if not cx.is_simplicial:
        raise InvalidInput("branch stretching expects a simplicial complex")
    n_e = _node_at(cx, v, e)
    lk = link_at(cx, v)
    if not lk.is_connected():
        raise DisconnectedLink(v)
    rest = lk.without_nodes((n_e,))
    comps = sorted(rest.components(), key=lambda c: sorted(c))
    if not comps:
        raise NotABranch(f"link at {v} has no branch at edge {e}")
    if branch_nodes is None:
        if len(comps) > 1:
            raise NotABranch(
                f"link at {v} has {len(comps)} branches at edge {e}; pass branch_nodes"
            )
        comp: Set[Tuple[int, int]] = set(comps[0])
    else:
        want = set(branch_nodes) - {n_e}
        for c in comps:
            if set(c) == want:
                comp = want
                break
        else:
            raise NotABranch(f"nodes are not a branch of the link at {v} at edge {e}")
    moved = tuple(sorted(comp))

    v_new = cx.fresh_vertex()
    e_new = cx.fresh_edge()
    edges = dict(cx.edges)
    edges[e_new] = (v, v_new)
    for z, end in moved:
        a0, a1 = edges[z]
        edges[z] = (v_new, a1) if end == 0 else (a0, v_new)

    faces: Dict[int, Tuple[Dart, ...]] = {}
    insertions: Dict[int, int] = {}
    for f in sorted(cx.faces):
        trail = cx.faces[f]
        L = len(trail)
        ins: Optional[Tuple[int, Dart]] = None
        for i, d in enumerate(trail):
            if cx.dart_head(d) != v:
                continue
            d2 = trail[(i + 1) % L]
            n_in = (d[0], _head_end(d))
            n_out = (d2[0], _tail_end(d2))
            if n_in == n_e and n_out in comp:
                ins = (i + 1, (e_new, 1))
            elif n_in in comp and n_out == n_e:
                ins = (i + 1, (e_new, -1))
        if ins is None:
            faces[f] = trail
        else:
            p, dart = ins
            faces[f] = trail[:p] + (dart,) + trail[p:]
            insertions[f] = p

    mid = TwoComplex.build(cx.vertices | {v_new}, edges, faces)
    steps: List[StretchStep] = [
        BranchPreStep(
            before=cx,
            after=mid,
            vertex=v,
            edge=e,
            branch=moved,
            new_vertex=v_new,
            new_edge=e_new,
            insertions=insertions,
        )
    ]
    w = cx.edges[e][0] if cx.edges[e][0] != v else cx.edges[e][1]
    cur = mid
    for f in sorted(insertions):
        trail = cur.faces[f]
        if len(trail) != 4:
            raise PipelineError(f"extended face {f} is not a quadrilateral")
        heads = [cur.dart_head(d) for d in trail]
        apex = [h for h in heads if h not in (v, v_new, w)]
        if len(apex) != 1:
            raise PipelineError(f"extended face {f} has no unique apex corner")
        ci = heads.index(v)
        cj = heads.index(apex[0])
        keep_pos = next(p for p, d in enumerate(trail) if d[0] == e)
        cur, st = _subdivide_face(cur, f, ci, cj, keep_pos)
        steps.append(st)
    return cur, steps


def _subdivide_face(
    cx: TwoComplex, f: int, ci: int, cj: int, keep_dart_pos: int
) -> Tuple[TwoComplex, SubdivideFaceStep]:
    """Split face f by a fresh edge between the corners at positions ci, cj
    (corner k sits at the head of trail dart k).  The part containing
    keep_dart_pos inherits f's id."""
    trail = cx.faces[f]
    L = len(trail)
    if ci == cj:
        raise InvalidInput("face subdivision needs two distinct corners")
    x = cx.dart_head(trail[ci])
    y = cx.dart_head(trail[cj])
    if x == y:
        raise InvalidInput("face subdivision corners at the same vertex")
    s = cx.fresh_edge()
    f2 = cx.fresh_face()
    nA = (cj - ci) % L
    idxA = [(ci + k) % L for k in range(1, nA + 1)]
    idxB = [(cj + k) % L for k in range(1, L - nA + 1)]
    trailA = tuple(trail[k] for k in idxA) + ((s, -1),)
    trailB = tuple(trail[k] for k in idxB) + ((s, 1),)
    if keep_dart_pos in idxA:
        idA, idB = f, f2
    else:
        idA, idB = f2, f
    faces = {g: t for g, t in cx.faces.items() if g != f}
    faces[idA] = trailA
    faces[idB] = trailB
    edges = dict(cx.edges)
    edges[s] = (x, y)
    after = TwoComplex.build(cx.vertices, edges, faces)
    dart_back: Dict[DartAddr, DartAddr] = {}
    for pos, k in enumerate(idxA):
        dart_back[(idA, pos)] = (f, k)
    for pos, k in enumerate(idxB):
        dart_back[(idB, pos)] = (f, k)
    step = SubdivideFaceStep(
        before=cx,
        after=after,
        face=f,
        part_a=idA,
        part_b=idB,
        new_edge=s,
        corner_i=ci,
        corner_j=cj,
        dart_back=dart_back,
    )
    return after, step


def _subdivide_edge(cx: TwoComplex, e: int) -> Tuple[TwoComplex, SubdivideEdgeStep]:
    u, w = cx.edges[e]
    m = cx.fresh_vertex()
    h = cx.fresh_edge()
    edges = dict(cx.edges)
    edges[e] = (u, m)
    edges[h] = (m, w)
    faces: Dict[int, Tuple[Dart, ...]] = {}
    dart_back: Dict[DartAddr, DartAddr] = {}
    for f in sorted(cx.faces):
        trail = cx.faces[f]
        new: List[Dart] = []
        for p, d in enumerate(trail):
            if d[0] == e:
                pair = [(e, 1), (h, 1)] if d[1] == 1 else [(h, -1), (e, -1)]
                for dd in pair:
                    if dd[0] == e:
                        dart_back[(f, len(new))] = (f, p)
                    new.append(dd)
            else:
                dart_back[(f, len(new))] = (f, p)
                new.append(d)
        faces[f] = tuple(new)
    after = TwoComplex.build(cx.vertices | {m}, edges, faces)
    return after, SubdivideEdgeStep(
        before=cx, after=after, edge=e, new_edge=h, new_vertex=m, dart_back=dart_back
    )


# ---------------------------------------------------------------------------
# operation 2: stretching at a 2-separator of a link


def stretch_two_separator(
    cx: TwoComplex,
    v: int,
    a: int,
    b: int,
    allow_trivial: bool = False,
    note: str = "",
) -> Tuple[TwoComplex, List[StretchStep]]:
    """Insert a stack of sheets between edges a and b at vertex v, one sheet
    per component of the link minus the two separator nodes.

    With `allow_trivial` a single component is accepted (used internally to
    clear a vertex before contracting through it); publicly the pair must be
    a genuine separator of a 2-connected link.
    """
    if not cx.is_simplicial:
        raise InvalidInput("separator stretching expects a simplicial complex")
    n_a = _node_at(cx, v, a)
    n_b = _node_at(cx, v, b)
    if n_a == n_b:
        raise NotTwoSeparator("the two separator edges coincide")
    lk = link_at(cx, v)
    if allow_trivial:
        if not lk.is_connected():
            raise DisconnectedLink(v)
    elif not lk.is_2connected():
        raise LinkNot2Connected(f"link at {v} is not 2-connected")
    rest = lk.without_nodes((n_a, n_b))
    comps = sorted(rest.components(), key=lambda c: sorted(c))
    need = 1 if allow_trivial else 2
    if len(comps) < need:
        raise NotTwoSeparator(
            f"edges {a},{b} leave {len(comps)} component(s) of the link at {v}"
        )

    w_a = cx.edges[a][0] if cx.edges[a][0] != v else cx.edges[a][1]
    w_b = cx.edges[b][0] if cx.edges[b][0] != v else cx.edges[b][1]

    e_base = cx.fresh_edge()
    bar_a, bar_b = e_base, e_base + 1
    v_base = cx.fresh_vertex()
    f_base = cx.fresh_face()

    edges = dict(cx.edges)
    # the replacements keep the stored endpoint order of the originals, so
    # replaced darts keep their direction
    edges[bar_a] = cx.edges[a]
    edges[bar_b] = cx.edges[b]

    node_home: Dict[Tuple[int, int], int] = {}
    pieces: List[PieceInfo] = []
    for i, comp in enumerate(comps):
        u_x = v_base + i
        e_vu = e_base + 2 + 3 * i
        e_au = e_base + 3 + 3 * i
        e_bu = e_base + 4 + 3 * i
        f_a = f_base + 2 * i
        f_b = f_base + 2 * i + 1
        edges[e_vu] = (v, u_x)
        edges[e_au] = (w_a, u_x)
        edges[e_bu] = (w_b, u_x)
        moved = tuple(sorted(comp))
        for z, end in moved:
            z0, z1 = edges[z]
            edges[z] = (u_x, z1) if end == 0 else (z0, u_x)
            node_home[(z, end)] = i
        pieces.append(
            PieceInfo(
                u_vertex=u_x,
                edge_vu=e_vu,
                edge_au=e_au,
                edge_bu=e_bu,
                face_a=f_a,
                face_b=f_b,
                moved=moved,
            )
        )

    faces: Dict[int, Tuple[Dart, ...]] = {}
    for f in sorted(cx.faces):
        trail = cx.faces[f]
        L = len(trail)
        corner: Optional[Tuple] = None
        for i, d in enumerate(trail):
            if cx.dart_head(d) != v:
                continue
            d2 = trail[(i + 1) % L]
            corner = ((d[0], _head_end(d)), (d2[0], _tail_end(d2)))
        eset = {d[0] for d in trail}
        new = list(trail)
        if corner is not None and corner[0] in (n_a, n_b) and corner[1] in (n_a, n_b):
            # joins a to b: swap both for the replacement pair, stay at v
            new = [
                (bar_a, d[1]) if d[0] == a else ((bar_b, d[1]) if d[0] == b else d)
                for d in new
            ]
        else:
            for sep_edge, bar, far, au_field in (
                (a, bar_a, w_a, "edge_au"),
                (b, bar_b, w_b, "edge_bu"),
            ):
                if sep_edge not in eset:
                    continue
                if corner is None:
                    raise PipelineError(
                        f"face {f} meets edge {sep_edge} but has no corner at {v}"
                    )
                zn = corner[0] if corner[1] == (sep_edge, _node_at(cx, v, sep_edge)[1]) else corner[1]
                # the corner joins the separator node to a moved node
                if zn not in node_home:
                    raise PipelineError(
                        f"face {f}: corner partner {zn} not in any component"
                    )
                piece = pieces[node_home[zn]]
                repl = getattr(piece, au_field)
                rebuilt = []
                for d in new:
                    if d[0] != sep_edge:
                        rebuilt.append(d)
                        continue
                    # old dart ran v->far (+/- by storage); new one u_X->far
                    headed_far = cx.dart_head(d) == far
                    # repl is stored (far, u_X): dart +1 runs far->u_X
                    rebuilt.append((repl, -1 if headed_far else 1))
                new = rebuilt
        faces[f] = tuple(new)

    for piece, comp in zip(pieces, comps):
        # sheet faces: v -> w_a -> u_X -> v   and   v -> w_b -> u_X -> v
        da = 1 if cx.edges[a][0] == v else -1
        db = 1 if cx.edges[b][0] == v else -1
        faces[piece.face_a] = ((bar_a, da), (piece.edge_au, 1), (piece.edge_vu, -1))
        faces[piece.face_b] = ((bar_b, db), (piece.edge_bu, 1), (piece.edge_vu, -1))

    del edges[a]
    del edges[b]
    vertices = cx.vertices | {p.u_vertex for p in pieces}
    after = TwoComplex.build(vertices, edges, faces)
    step = TwoSeparatorStep(
        before=cx,
        after=after,
        vertex=v,
        edge_a=a,
        edge_b=b,
        bar_a=bar_a,
        bar_b=bar_b,
        pieces=tuple(pieces),
        note=note,
    )
    return after, [step]


# ---------------------------------------------------------------------------
# operation 3: stretching an edge at two faces


def _pair_adjacent(rotator: Sequence, f1: int, f2: int) -> bool:
    pos1 = [i for i, (k, _s) in enumerate(rotator) if k[0] == f1]
    pos2 = [i for i, (k, _s) in enumerate(rotator) if k[0] == f2]
    if len(pos1) != 1 or len(pos2) != 1:
        raise InvalidInput("faces do not meet the link node exactly once each")
    L = len(rotator)
    d = (pos1[0] - pos2[0]) % L
    return d in (1, L - 1)


def _adjacency_forced(cx: TwoComplex, e: int, f1: int, f2: int) -> bool:
    """True when at some endpoint every planar link rotation has the two
    faces adjacent in the rotator at e."""
    undecided = False
    for end in (0, 1):
        v = cx.edges[e][end]
        lk = link_at(cx, v)
        node = (e, end)
        if is_subdivision_3connected(lk):
            rot, _ = unique_embedding_3connected(lk)
            if _pair_adjacent(rot.rotators[node], f1, f2):
                return True
            continue
        if lk.is_2connected():
            seps = two_separators(lk)
            if not any(s.proper and node in s.nodes for s in seps):
                pr = planar_embed(lk)
                if pr.rotation is None:
                    return True  # no planar rotation at all: vacuously forced
                if _pair_adjacent(pr.rotation.rotators[node], f1, f2):
                    return True
                continue
        try:
            rots = enumerate_planar_rotations(lk, cap=20000)
        except BudgetExceeded:
            undecided = True
            continue
        if not rots:
            return True
        if all(_pair_adjacent(r.rotators[node], f1, f2) for r in rots):
            return True
    if undecided:
        raise OutOfImplementedRange(
            f"cannot decide forced adjacency at edge {e}: rotation spaces too large"
        )
    return False


def stretch_edge(
    cx: TwoComplex, e: int, f1: int, f2: int
) -> Tuple[TwoComplex, List[StretchStep]]:
    """Split e into a parallel pair, f1 and f2 moving to the fresh copy, then
    restore simpliciality by subdividing the old copy and the faces that grew.

    Requires the two faces to be forced adjacent at e in every planar link
    rotation of some endpoint, which is what keeps the split equivalent.
    """
    if not cx.is_simplicial:
        raise InvalidInput("edge stretching expects a simplicial complex")
    efs = {f for f, _ in cx.edge_faces(e)}
    if f1 == f2 or f1 not in efs or f2 not in efs:
        raise InvalidInput(f"faces {f1},{f2} are not two distinct faces of edge {e}")
    if cx.edge_degree(e) < 3:
        raise DegreeTooLow(f"edge {e} has face-degree {cx.edge_degree(e)} < 3")
    if not _adjacency_forced(cx, e, f1, f2):
        raise AdjacencyNotForced(
            f"faces {f1},{f2} are not forced adjacent at edge {e}"
        )
    u, w = cx.edges[e]
    e1 = cx.fresh_edge()
    f0 = cx.fresh_face()
    edges = dict(cx.edges)
    edges[e1] = (u, w)
    faces: Dict[int, Tuple[Dart, ...]] = {}
    for f, trail in cx.faces.items():
        if f in (f1, f2):
            faces[f] = tuple((e1, d[1]) if d[0] == e else d for d in trail)
        else:
            faces[f] = trail
    faces[f0] = ((e1, 1), (e, -1))
    mid = TwoComplex.build(cx.vertices, edges, faces)
    steps: List[StretchStep] = [
        EdgePreStep(
            before=cx, after=mid, edge=e, new_edge=e1, bigon=f0, moved_faces=(f1, f2)
        )
    ]
    cur, st = _subdivide_edge(mid, e)
    steps.append(st)
    m = st.new_vertex
    quads = [f for f, _ in cur.edge_faces(e) if len(cur.faces[f]) == 4]
    for f in sorted(quads):
        trail = cur.faces[f]
        heads = [cur.dart_head(d) for d in trail]
        apex = [h for h in heads if h not in (u, w, m)]
        if len(apex) != 1:
            raise PipelineError(f"subdivided face {f} has no unique apex corner")
        ci = heads.index(m)
        cj = heads.index(apex[0])
        keep_pos = next(p for p, d in enumerate(trail) if d[0] == e)
        cur, st2 = _subdivide_face(cur, f, ci, cj, keep_pos)
        steps.append(st2)
    return cur, steps


# ---------------------------------------------------------------------------
# operation 4: contracting a reversible edge


def contract_reversible(
    cx: TwoComplex, e: int, forced: bool = False
) -> Tuple[TwoComplex, List[StretchStep]]:
    """Contract a non-loop edge whose endpoint links are stars of parallel
    graphs with e of maximum degree, then contract the size-2 faces that
    appear.  ``forced`` skips the reversibility check (internal callers that
    justify legality by construction; the pullback still verifies)."""
    if e not in cx.edges:
        raise InvalidInput(f"no edge {e}")
    if not cx.is_simplicial:
        raise InvalidInput("reversible contraction expects a simplicial complex")
    u, w = cx.edges[e]
    if u == w:
        raise LoopContraction(f"edge {e} is a loop")
    if not forced:
        for end, vv in ((0, u), (1, w)):
            lk = link_at(cx, vv)
            if para_star_center(lk) is None:
                raise NotReversible(f"link at {vv} is not a star of parallel graphs")
            node = (e, end)
            dmax = max(lk.degree(n) for n in lk.nodes)
            if lk.degree(node) != dmax:
                raise NotReversible(
                    f"edge {e} does not have maximum degree in the link at {vv}"
                )
    return _contract_with_bigons(cx, e, mode="forced" if forced else "reversible")


def _contract_with_bigons(
    cx: TwoComplex, e: int, mode: str
) -> Tuple[TwoComplex, List[StretchStep]]:
    bigon_faces = sorted(f for f, _ in cx.edge_faces(e))
    res = contract_edge(cx, e)
    if res.deleted_faces:
        raise PipelineError(f"contracting edge {e} deleted faces {res.deleted_faces}")
    steps: List[StretchStep] = [
        ContractEdgeStep(
            before=cx,
            after=res.complex,
            edge=e,
            merged_vertex=res.merged_vertex,
            dart_map=dict(res.dart_map),
            mode=mode,
        )
    ]
    cur = res.complex
    for f in bigon_faces:
        trail = cur.faces.get(f)
        if trail is None or len(trail) != 2:
            raise PipelineError(f"face {f} did not shrink to a bigon")
        bres = contract_bigon(cur, f)
        steps.append(
            ContractBigonStep(
                before=cur,
                after=bres.complex,
                face=f,
                kept_edge=bres.merged_edge,
                removed_edge=bres.removed_edge,
                flipped=bres.flipped,
            )
        )
        cur = bres.complex
    return cur, steps


# ---------------------------------------------------------------------------
# traces


@dataclass
class StretchTrace:
    """A forward-replayable sequence of stretching steps."""

    original: TwoComplex
    steps: List[StretchStep] = field(default_factory=list)

    @property
    def result(self) -> TwoComplex:
        return self.steps[-1].after if self.steps else self.original

    def extend(self, steps: Iterable[StretchStep]) -> None:
        for s in steps:
            tip = self.result
            if s.before != tip:
                raise PipelineError("step does not continue the trace")
            self.steps.append(s)

    def replay(self) -> TwoComplex:
        cur = self.original
        for s in self.steps:
            if s.before != cur:
                raise PipelineError("trace does not replay from its original complex")
            cur = s.after
        return cur

    def describe(self) -> List[dict]:
        return [s.describe() for s in self.steps]


def rotation_pullback(trace: StretchTrace, rot: RotationSystem) -> RotationSystem:
    """Pull a rotation system of the trace's final complex back to the
    original, step by step; each intermediate system is structurally checked
    against its complex."""
    cur = rot
    cur.check_against(trace.result)
    for step in reversed(trace.steps):
        cur = step.pull(cur)
        cur.check_against(step.before)
    return cur
