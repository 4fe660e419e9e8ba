"""End-to-end decision procedure.

Drives a simplicial complex through vertex splittings and stretchings until
every link graph is almost 3-connected and the complex is stretched out, then
runs the normal-form check.  A positive answer is pulled back through the
trace to a planar rotation system of the *input* complex; a negative answer
is an obstruction certificate on the *final* complex together with the trace
that locates it.

The driver recurses on the cutvertex-degree (the largest degree of a cut
node over all link graphs).  One round lowers it by at least one while never
raising the edge degree parameter; both facts are asserted per round.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .complexes import TwoComplex, edge_degree_parameter
from .errors import BudgetExceeded, InvalidInput, PipelineError
from .links import (
    LinkGraph,
    Multigraph,
    branches_at,
    classify,
    cutvertex_degree,
    is_almost_3connected,
    is_subdivision_3connected,
    link_at,
    parallel_witness,
    star_of_parallel_cut,
    two_separators,
)
from .obstruction import (
    Certificate,
    NonPlanarLink,
    is_stretched_out,
    normal_form_check,
    verify_certificate,
)
from .rotation import RotationSystem, is_planar_system, planar_embed
from .stretching import (
    BranchPreStep,
    ContractBigonStep,
    StretchTrace,
    TwoSeparatorStep,
    contract_reversible,
    rotation_pullback,
    split_disconnected_link,
    stretch_branch,
    stretch_edge,
    stretch_two_separator,
)

__all__ = ["RoundStats", "DecisionOutcome", "decide", "decide_verified"]


# ---------------------------------------------------------------------------
# outcome types


@dataclass(frozen=True)
class RoundStats:
    """Diagnostics of one cutvertex-degree round."""

    cut_degree: int
    param_in: int
    param_out: int
    steps: int

    def describe(self) -> dict:
        return {
            "cut_degree": self.cut_degree,
            "degree_parameter_in": self.param_in,
            "degree_parameter_out": self.param_out,
            "trace_steps": self.steps,
        }


@dataclass(frozen=True)
class DecisionOutcome:
    """Answer of the decision procedure.

    ``rotation`` (when embeddable) is a planar rotation system of the input
    complex.  ``certificate`` (when not) refers to ``final``, the stretched
    complex at the tip of ``trace``; replaying the trace from the input
    reproduces it.
    """

    embeddable: bool
    rotation: Optional[RotationSystem]
    certificate: Optional[object]
    final: TwoComplex
    trace: StretchTrace
    rounds: Tuple[RoundStats, ...]

    def describe(self) -> dict:
        out = {
            "embeddable": self.embeddable,
            "trace_steps": len(self.trace.steps),
            "rounds": [r.describe() for r in self.rounds],
        }
        if self.certificate is not None:
            out["certificate"] = self.certificate.kind
        return out


# ---------------------------------------------------------------------------
# small helpers


def _node_at(cx: TwoComplex, v: int, e: int) -> Tuple[int, int]:
    u, w = cx.edges[e]
    if u == v:
        return (e, 0)
    if w == v:
        return (e, 1)
    raise InvalidInput(f"edge {e} is not incident with vertex {v}")


def _other_end(cx: TwoComplex, e: int, v: int) -> int:
    u, w = cx.edges[e]
    return w if u == v else u


def _extend(trace: StretchTrace, steps, budget: int) -> None:
    trace.extend(steps)
    if len(trace.steps) > budget:
        raise BudgetExceeded(
            f"stretching trace exceeded the step budget of {budget}"
        )


# ---------------------------------------------------------------------------
# phase 1: local connectivity


def _split_all(trace: StretchTrace, budget: int) -> None:
    """Split vertices until every link graph is connected."""
    while True:
        cx = trace.result
        target = None
        for v in sorted(cx.vertices):
            if not link_at(cx, v).is_connected():
                target = v
                break
        if target is None:
            return
        _, steps = split_disconnected_link(cx, target)
        _extend(trace, steps, budget)


def _branch_keeps(bg: Multigraph, c) -> bool:
    """A branch stays put when it is a path (attached anywhere) or a
    parallel graph attached at one of its branch nodes.  A parallel graph
    hanging off one of its subdivision nodes would leave a star that is not
    free even at cut degree three, so it gets peeled off."""
    w = parallel_witness(bg)
    if w is None:
        return False
    return w.path_count == 1 or bg.degree(c) == w.path_count


def _local_1cuts(trace: StretchTrace, budget: int) -> List[int]:
    """Stretch local branches until every link graph is 2-connected or a
    star of well-attached parallel graphs.  Returns the ids of the
    connecting edges the branch stretches introduced, in creation order."""
    added: List[int] = []
    while True:
        cx = trace.result
        plan = None
        for v in sorted(cx.vertices):
            lk = link_at(cx, v)
            cuts = lk.articulation_nodes()
            if not cuts:
                continue
            center = star_of_parallel_cut(lk)
            if center is None and len(cuts) >= 2:
                # move a branch holding a second cut node onto its own
                # vertex; both halves then have strictly fewer cut nodes
                cutset = set(cuts)
                for c in sorted(cuts):
                    for br in branches_at(lk, c):
                        if any(n != c and n in cutset for n in br.nodes):
                            plan = (v, c, br)
                            break
                    if plan:
                        break
                if plan is None:
                    raise PipelineError(
                        f"link at {v} has {len(cuts)} cut nodes but no "
                        "branch holding a second one"
                    )
                break
            c = center if center is not None else cuts[0]
            for br in branches_at(lk, c):
                if not _branch_keeps(lk.subgraph(br.nodes), c):
                    plan = (v, c, br)
                    break
            if plan:
                break
        if plan is None:
            return added
        v, c, br = plan
        _, steps = stretch_branch(trace.result, v, c[0], branch_nodes=br.nodes)
        for st in steps:
            if isinstance(st, BranchPreStep):
                added.append(st.new_edge)
        _extend(trace, steps, budget)


def _planarity_scan(cx: TwoComplex) -> Optional[NonPlanarLink]:
    for v in sorted(cx.vertices):
        pr = planar_embed(link_at(cx, v))
        if not pr.planar:
            return NonPlanarLink(vertex=v, witness=pr.witness)
    return None


# ---------------------------------------------------------------------------
# phase 2: clearing high-degree nodes out of 2-connected links


def _be_nice(trace: StretchTrace, a: int, budget: int) -> Optional[NonPlanarLink]:
    """Stretch until every link graph is a parallel graph, a star of
    parallel graphs whose cut node has degree exactly ``a``, or has maximum
    degree below ``a``.  Returns a certificate when a non-planar link turns
    up instead."""
    while True:
        cx = trace.result
        found = None
        for v in sorted(cx.vertices):
            lk = link_at(cx, v)
            if not lk.is_2connected():
                continue
            if parallel_witness(lk) is not None:
                continue
            node = next((n for n in lk.sorted_nodes() if lk.degree(n) >= a), None)
            if node is None:
                continue
            found = (v, lk, node)
            break
        if found is None:
            return None
        v, lk, node = found
        pr = planar_embed(lk)
        if not pr.planar:
            return NonPlanarLink(vertex=v, witness=pr.witness)
        proper = [
            s for s in two_separators(lk) if s.proper and node in s.nodes
        ]
        if proper:
            sep = proper[0]
            other = sep.nodes[0] if sep.nodes[1] == node else sep.nodes[1]
            _, steps = stretch_two_separator(
                cx, v, node[0], other[0], note="be-nice"
            )
        else:
            # the rotator at the node is the same in every planar embedding,
            # so splitting off two neighbouring faces is an equivalence
            rotator = pr.rotation.rotators[node]
            f1, f2 = rotator[0][0], rotator[1][0]
            _, steps = stretch_edge(cx, node[0], f1, f2)
        _extend(trace, steps, budget)


# ---------------------------------------------------------------------------
# phase 3: paths through parallel links


@dataclass
class _Path:
    vertices: List[int]
    edges: List[int]


def _path_family(cx: TwoComplex, a: int) -> List[_Path]:
    """Maximal family of vertex-disjoint paths whose endpoints carry stars
    of parallel graphs with cut degree ``a`` and whose interior links are
    parallel graphs, every path edge having face-degree ``a``."""
    used: Set[int] = set()
    out: List[_Path] = []
    for v in sorted(cx.vertices):
        if v in used:
            continue
        lk = link_at(cx, v)
        cut = star_of_parallel_cut(lk)
        if cut is None or lk.degree(cut) != a:
            continue
        verts = [v]
        eds: List[int] = []
        cur_v, cur_node = v, cut
        while True:
            e = cur_node[0]
            nxt = _other_end(cx, e, cur_v)
            eds.append(e)
            verts.append(nxt)
            lk2 = link_at(cx, nxt)
            node_in = _node_at(cx, nxt, e)
            if lk2.degree(node_in) != a:
                raise PipelineError(
                    f"path edge {e} has degree {lk2.degree(node_in)} != {a} "
                    f"at vertex {nxt}"
                )
            cut2 = star_of_parallel_cut(lk2)
            if cut2 is not None:
                if cut2 != node_in:
                    raise PipelineError(
                        f"star of parallel graphs at {nxt} is not cut at the "
                        "arriving edge"
                    )
                break
            w = parallel_witness(lk2)
            if w is None:
                raise PipelineError(
                    f"link at {nxt} is neither a parallel graph nor a star "
                    "of parallel graphs; the complex is not structured"
                )
            if node_in not in w.branch_nodes:
                raise PipelineError(
                    f"edge {e} is not a branch node of the parallel link at {nxt}"
                )
            b0, b1 = w.branch_nodes
            cur_node = b1 if node_in == b0 else b0
            cur_v = nxt
        if len(set(verts)) != len(verts):
            raise PipelineError("path through parallel links revisits a vertex")
        if used & set(verts):
            raise PipelineError("paths through parallel links are not disjoint")
        used.update(verts)
        out.append(_Path(vertices=verts, edges=eds))
    return out


def _undo_branch_stretches(trace: StretchTrace, added: List[int], budget: int) -> None:
    """Contract the connecting edges of this round's branch stretches that
    ended up with face-degree three or more (these are the only stretches
    that can raise the degree parameter).  Runs after the paths have been
    contracted; the satellite side of each connecting edge is untouched by
    the path machinery, so the contraction stays reversible."""
    pending = list(reversed(added))
    alias: Dict[int, int] = {}
    while pending:
        eb = pending.pop(0)
        eb = alias.get(eb, eb)
        cx = trace.result
        if eb not in cx.edges:
            raise PipelineError(f"connecting edge {eb} vanished before its undo")
        if cx.edge_degree(eb) < 3:
            continue
        _, steps = contract_reversible(cx, eb, forced=True)
        for st in steps:
            if isinstance(st, ContractBigonStep):
                for k, tgt in list(alias.items()):
                    if tgt == st.removed_edge:
                        alias[k] = st.kept_edge
                alias[st.removed_edge] = st.kept_edge
        _extend(trace, steps, budget)


def _stretch_all_branches_at(
    trace: StretchTrace, v: int, e: int, budget: int
) -> None:
    """Move every branch of the link at v at the node of e onto its own
    vertex, leaving a star of bundle arcs behind."""
    cx = trace.result
    n_e = _node_at(cx, v, e)
    lk = link_at(cx, v)
    comps = sorted(
        (frozenset(c) for c in lk.without_nodes((n_e,)).components()),
        key=lambda c: sorted(c),
    )
    for comp in comps:
        cx = trace.result
        _, steps = stretch_branch(cx, v, e, branch_nodes=comp)
        _extend(trace, steps, budget)


def _restretch_path_ends(trace: StretchTrace, path: _Path, budget: int) -> None:
    v, w = path.vertices[0], path.vertices[-1]
    if len(path.edges) >= 2:
        _stretch_all_branches_at(trace, v, path.edges[0], budget)
        _stretch_all_branches_at(trace, w, path.edges[-1], budget)
    else:
        # single-edge path: clearing one side already rules out loops and
        # parallel pairs after the contraction
        _stretch_all_branches_at(trace, v, path.edges[0], budget)


def _stretch_path_interiors(trace: StretchTrace, path: _Path, budget: int) -> None:
    """Stretch every interior vertex at its two branching edges, so the
    contraction of the path cannot identify distinct faces or edges; the
    replacement edge ids are written back into the path."""
    for i in range(1, len(path.vertices) - 1):
        w_i = path.vertices[i]
        cx = trace.result
        n_a = _node_at(cx, w_i, path.edges[i - 1])
        n_b = _node_at(cx, w_i, path.edges[i])
        if not link_at(cx, w_i).without_nodes((n_a, n_b)).nodes:
            continue
        _, steps = stretch_two_separator(
            cx,
            w_i,
            path.edges[i - 1],
            path.edges[i],
            allow_trivial=True,
            note="path-interior",
        )
        st = steps[0]
        if not isinstance(st, TwoSeparatorStep):  # pragma: no cover - shape
            raise PipelineError("separator stretch did not record its step")
        path.edges[i - 1] = st.bar_a
        path.edges[i] = st.bar_b
        _extend(trace, steps, budget)


def _contract_paths(
    trace: StretchTrace, paths: List[_Path], budget: int, tracked: List[int]
) -> None:
    """Contract every path edge in order; ``tracked`` edge ids (the pending
    branch-stretch undos) are rewritten through the bigon merges."""
    queues = [list(p.edges) for p in paths]
    for queue in queues:
        while queue:
            e = queue.pop(0)
            cx = trace.result
            if e not in cx.edges:
                raise PipelineError(f"path edge {e} vanished before contraction")
            _, steps = contract_reversible(cx, e, forced=True)
            for st in steps:
                if isinstance(st, ContractBigonStep):
                    for q2 in queues:
                        q2[:] = [
                            st.kept_edge if x == st.removed_edge else x for x in q2
                        ]
                    tracked[:] = [
                        st.kept_edge if x == st.removed_edge else x for x in tracked
                    ]
            _extend(trace, steps, budget)


# ---------------------------------------------------------------------------
# phase 4: normalisation once the cutvertex-degree is small


def _stretch_loc_con(trace: StretchTrace, budget: int) -> None:
    """Stretch proper 2-separators of 2-connected links until every link is
    a parallel graph, a subdivision of a 3-connected graph, or free."""
    while True:
        cx = trace.result
        found = None
        for v in sorted(cx.vertices):
            lk = link_at(cx, v)
            if not lk.is_2connected():
                continue
            if parallel_witness(lk) is not None:
                continue
            if is_subdivision_3connected(lk):
                continue
            proper = [s for s in two_separators(lk) if s.proper]
            if not proper:
                raise PipelineError(
                    f"2-connected link at {v} is neither a parallel graph nor "
                    "a subdivision of a 3-connected graph, yet has no proper "
                    "2-separator"
                )
            found = (v, proper[0])
            break
        if found is None:
            return
        v, sep = found
        na, nb = sep.nodes
        _, steps = stretch_two_separator(cx, v, na[0], nb[0], note="loc-3con")
        _extend(trace, steps, budget)


def _subdivided_edge_ends(lk: Multigraph, node) -> Tuple:
    """Walk from a degree-2 node in both directions to the first nodes of
    degree != 2 (the ends of the subdivided edge containing it)."""
    ends = []
    (a1, s1), (a2, s2) = lk._adj[node]
    for arc, side in ((a1, s1), (a2, s2)):
        cur = lk.other_end(arc, side)
        prev = (arc, 1 - side)
        while lk.degree(cur) == 2:
            nxt = next(p for p in lk._adj[cur] if p != prev)
            prev = (nxt[0], 1 - nxt[1])
            cur = lk.other_end(*nxt)
        ends.append(cur)
    x1, x2 = ends
    if x1 == x2:
        raise PipelineError("subdivided edge closes up on a single branch node")
    return x1, x2


def _make_stretched_out(trace: StretchTrace, budget: int) -> None:
    """Stretch until every edge of face-degree two has an endpoint whose
    link is neither a parallel graph nor a subdivision of a 3-connected
    graph."""
    while True:
        cx = trace.result
        found = None
        for e in sorted(cx.edges):
            if cx.edge_degree(e) != 2:
                continue
            sides = []
            for v in cx.edges[e]:
                lk = link_at(cx, v)
                tag = classify(lk).tag
                if tag in ("ParallelGraph", "Subdivision3Connected"):
                    sides.append((v, lk, tag))
            if len(sides) == 2:
                found = (e, sides[0])
                break
        if found is None:
            return
        e, (v, lk, tag) = found
        if tag == "ParallelGraph":
            x1, x2 = parallel_witness(lk).branch_nodes
        else:
            x1, x2 = _subdivided_edge_ends(lk, _node_at(cx, v, e))
        _, steps = stretch_two_separator(
            cx, v, x1[0], x2[0], allow_trivial=True, note="stretch-out"
        )
        _extend(trace, steps, budget)


def _links_ready(cx: TwoComplex) -> bool:
    for v in sorted(cx.vertices):
        lk = link_at(cx, v)
        if not lk.is_connected():
            return False
        if lk.arcs and not is_almost_3connected(lk):
            return False
    return True


# ---------------------------------------------------------------------------
# driver


def decide(
    cx: TwoComplex, *, step_budget: int = 10**6, cap: int = 10**6
) -> DecisionOutcome:
    """Decide whether ``cx`` admits a planar rotation system.

    ``step_budget`` bounds the total number of recorded stretching steps
    (BudgetExceeded beyond it); ``cap`` bounds the rotation enumerations the
    normal-form check may fall back to (OutOfImplementedRange beyond it).
    """
    if not isinstance(cx, TwoComplex):
        raise InvalidInput("decide expects a TwoComplex")
    if not cx.is_simplicial:
        raise InvalidInput("decide expects a simplicial complex")
    trace = StretchTrace(cx)
    rounds: List[RoundStats] = []
    prev_a: Optional[int] = None
    while True:
        param_in = edge_degree_parameter(trace.result)
        _split_all(trace, step_budget)
        added = _local_1cuts(trace, step_budget)
        bad = _planarity_scan(trace.result)
        if bad is not None:
            return _finish_obstructed(cx, trace, rounds, bad, cap)
        a = cutvertex_degree(trace.result)
        if prev_a is not None and a >= prev_a:
            raise PipelineError(
                f"cutvertex-degree failed to drop: {prev_a} -> {a}"
            )
        if a <= 3:
            break
        bad = _be_nice(trace, a, step_budget)
        if bad is not None:
            return _finish_obstructed(cx, trace, rounds, bad, cap)
        paths = _path_family(trace.result, a)
        on_paths = {e for p in paths for e in p.edges}
        if on_paths & set(added):
            raise PipelineError(
                "a connecting edge lies on a path through parallel links"
            )
        for p in paths:
            _stretch_path_interiors(trace, p, step_budget)
        for p in paths:
            _restretch_path_ends(trace, p, step_budget)
        _contract_paths(trace, paths, step_budget, added)
        # Contracting a path vertex-sums the links along it, and the sum can
        # fall apart into several components.  Each undo below reconstructs a
        # rotator by exhaustion, which is complete only when both endpoint
        # links are connected, so split first.
        _split_all(trace, step_budget)
        _undo_branch_stretches(trace, added, step_budget)
        _split_all(trace, step_budget)
        if not trace.result.is_simplicial:
            raise PipelineError("a round left a non-simplicial complex")
        param_out = edge_degree_parameter(trace.result)
        if param_out > param_in:
            raise PipelineError(
                f"a round raised the degree parameter: {param_in} -> {param_out}"
            )
        rounds.append(
            RoundStats(
                cut_degree=a,
                param_in=param_in,
                param_out=param_out,
                steps=len(trace.steps),
            )
        )
        prev_a = a
    while True:
        before = len(trace.steps)
        _split_all(trace, step_budget)
        _local_1cuts(trace, step_budget)
        _stretch_loc_con(trace, step_budget)
        _make_stretched_out(trace, step_budget)
        if is_stretched_out(trace.result) and _links_ready(trace.result):
            break
        if len(trace.steps) == before:
            raise PipelineError("normalisation stalled short of a ready complex")
    nf = normal_form_check(trace.result, cap=cap)
    if nf.embeddable:
        rot = rotation_pullback(trace, nf.system)
        if not is_planar_system(cx, rot):
            raise PipelineError(
                "pulled-back rotation system is not planar on the input"
            )
        return DecisionOutcome(
            embeddable=True,
            rotation=rot,
            certificate=None,
            final=trace.result,
            trace=trace,
            rounds=tuple(rounds),
        )
    return _finish_obstructed(cx, trace, rounds, nf.certificate, cap)


def _finish_obstructed(
    cx: TwoComplex,
    trace: StretchTrace,
    rounds: List[RoundStats],
    cert,
    cap: int,
) -> DecisionOutcome:
    verify_certificate(trace.result, cert, cap=cap)
    return DecisionOutcome(
        embeddable=False,
        rotation=None,
        certificate=cert,
        final=trace.result,
        trace=trace,
        rounds=tuple(rounds),
    )


def decide_verified(
    cx: TwoComplex, *, step_budget: int = 10**6, cap: int = 10**6
) -> DecisionOutcome:
    """``decide`` plus an independent replay of the evidence: the trace is
    re-run from the input, and the rotation system or certificate is checked
    once more against the complex it refers to."""
    out = decide(cx, step_budget=step_budget, cap=cap)
    if out.trace.replay() != out.final:
        raise PipelineError("trace does not replay to the final complex")
    if out.embeddable:
        out.rotation.check_against(cx)
        if not is_planar_system(cx, out.rotation):
            raise PipelineError("returned rotation system is not planar")
    else:
        verify_certificate(out.final, out.certificate, cap=cap)
    return out
