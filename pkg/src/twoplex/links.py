"""Link graphs and their classification.

The link of a vertex v is a multigraph: its nodes are the edge-ends at v (a
non-loop edge contributes one, a loop two), its arcs are the face corners at v.
A corner of face f between consecutive darts d_i, d_{i+1} sits at the vertex
head(d_i) = tail(d_{i+1}) and joins the head-end of d_i to the tail-end of
d_{i+1}.  The degree of a link node equals the face-degree of its edge.

Nodes are keyed ``(edge_id, end)`` with end in {0, 1} (the index into the
stored endpoint pair); arcs are keyed ``(face_id, position)`` by the first
dart of the corner.  Links of simplicial complexes are simple graphs; the
generic Multigraph also carries the loops and parallel arcs that appear in
vertex sums and mid-contraction links.

2-separators are computed for simple graphs only (links of simplicial
complexes); the multigraph refinement, which would treat a parallel class as a
single separating position, is a documented extension point and is not needed
by the decision procedure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .complexes import TwoComplex
from .errors import DisconnectedLink, Not2Connected, NotCutVertex

__all__ = [
    "Multigraph",
    "LinkGraph",
    "link_at",
    "GraphClass",
    "classify",
    "ParallelWitness",
    "parallel_witness",
    "ParallelPairing",
    "parallel_pairing",
    "is_free_graph",
    "is_subdivision_3connected",
    "para_star_center",
    "star_of_parallel_cut",
    "TwoSeparator",
    "two_separators",
    "Branch",
    "branches_at",
    "degree_sequence_abbrev",
    "degree_parameter_complex",
    "cutvertex_degree",
]


def _key(x) -> str:
    # Node/arc keys are heterogeneous tuples; repr gives a stable total order.
    return repr(x)


class Multigraph:
    """A small multigraph with loops, keyed nodes and keyed arcs.

    ``arcs`` maps an arc key to its ordered endpoint pair (n0, n1); the order
    distinguishes the two arc-ends, which matters for rotation systems.
    """

    __slots__ = ("nodes", "arcs", "_adj")

    def __init__(self, nodes: Iterable, arcs: Dict):
        self.nodes: Tuple = tuple(dict.fromkeys(nodes))
        self.arcs: Dict = dict(arcs)
        adj: Dict = {n: [] for n in self.nodes}
        for a in sorted(self.arcs, key=_key):
            n0, n1 = self.arcs[a]
            adj[n0].append((a, 0))
            adj[n1].append((a, 1))
        self._adj = adj

    # -- basic accessors ----------------------------------------------------

    def arc_ends(self, n) -> Tuple[Tuple[object, int], ...]:
        """The arc-ends (arc key, side) attached at node n, in key order."""
        return tuple(self._adj[n])

    def degree(self, n) -> int:
        return len(self._adj[n])

    def node_of(self, arc, side: int):
        return self.arcs[arc][side]

    def other_end(self, arc, side: int):
        return self.arcs[arc][1 - side]

    def is_loop_arc(self, arc) -> bool:
        n0, n1 = self.arcs[arc]
        return n0 == n1

    def sorted_nodes(self) -> Tuple:
        return tuple(sorted(self.nodes, key=_key))

    def __repr__(self) -> str:
        return f"Multigraph(|N|={len(self.nodes)}, |A|={len(self.arcs)})"

    # -- connectivity --------------------------------------------------------

    def components(self) -> List[FrozenSet]:
        seen = set()
        comps: List[FrozenSet] = []
        for start in self.nodes:
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                n = stack.pop()
                for arc, side in self._adj[n]:
                    m = self.other_end(arc, side)
                    if m not in comp:
                        comp.add(m)
                        stack.append(m)
            seen |= comp
            comps.append(frozenset(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def to_networkx_simple(self) -> "nx.Graph":
        """Underlying simple graph (loops dropped, parallels collapsed)."""
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        for n0, n1 in self.arcs.values():
            if n0 != n1:
                g.add_edge(n0, n1)
        return g

    def articulation_nodes(self) -> Tuple:
        g = self.to_networkx_simple()
        return tuple(sorted(nx.articulation_points(g), key=_key))

    def is_2connected(self) -> bool:
        """Connected, at least three nodes, no articulation node."""
        if len(self.nodes) < 3 or not self.is_connected():
            return False
        return not self.articulation_nodes()

    def has_loop(self) -> bool:
        return any(self.is_loop_arc(a) for a in self.arcs)

    def has_parallel(self) -> bool:
        seen = set()
        for n0, n1 in self.arcs.values():
            key = frozenset((repr(n0), repr(n1)))
            if key in seen:
                return True
            seen.add(key)
        return False

    def is_simple(self) -> bool:
        return not self.has_loop() and not self.has_parallel()

    def subgraph(self, keep_nodes: Iterable) -> "Multigraph":
        keep = set(keep_nodes)
        arcs = {
            a: ends
            for a, ends in self.arcs.items()
            if ends[0] in keep and ends[1] in keep
        }
        return Multigraph([n for n in self.nodes if n in keep], arcs)

    def without_nodes(self, drop: Iterable) -> "Multigraph":
        drop = set(drop)
        return self.subgraph([n for n in self.nodes if n not in drop])

    # -- suppression ---------------------------------------------------------

    def suppressed(self) -> Tuple["Multigraph", Dict]:
        """Suppress degree-2 nodes.

        Returns the suppressed multigraph and a map from each of its arc keys
        to the tuple of original arc keys it replaces (in path order).  Pure
        cycle components degenerate to a single node carrying a loop.
        """
        arcs = {a: ends for a, ends in self.arcs.items()}
        paths: Dict = {a: (a,) for a in arcs}
        nodes = list(self.nodes)
        changed = True
        while changed:
            changed = False
            adj: Dict = {n: [] for n in nodes}
            for a, (n0, n1) in arcs.items():
                adj[n0].append((a, 0))
                adj[n1].append((a, 1))
            for n in sorted(nodes, key=_key):
                ends = adj[n]
                if len(ends) != 2:
                    continue
                (a, sa), (b, sb) = ends
                if a == b:
                    continue  # single-node cycle remnant; leave it
                x = arcs[a][1 - sa]
                y = arcs[b][1 - sb]
                # orient the replacement x -> y; store constituent arcs in order
                seq = tuple(reversed(paths[a])) if sa == 0 else paths[a]
                seq2 = paths[b] if sb == 0 else tuple(reversed(paths[b]))
                new = ("supp", min(paths[a] + paths[b], key=_key))
                del arcs[a]
                del arcs[b]
                del paths[a]
                del paths[b]
                arcs[new] = (x, y)
                paths[new] = seq + seq2
                nodes.remove(n)
                changed = True
                break
        out = Multigraph(nodes, arcs)
        return out, {a: paths[a] for a in arcs}


class LinkGraph(Multigraph):
    """The link of a vertex; a Multigraph remembering which vertex it is."""

    __slots__ = ("vertex",)

    def __init__(self, nodes: Iterable, arcs: Dict, vertex: int):
        super().__init__(nodes, arcs)
        self.vertex = vertex

    def __repr__(self) -> str:
        return f"LinkGraph(v={self.vertex}, |N|={len(self.nodes)}, |A|={len(self.arcs)})"


def _tail_end(dart) -> int:
    return 0 if dart[1] == 1 else 1


def _head_end(dart) -> int:
    return 1 if dart[1] == 1 else 0


def link_at(cx: TwoComplex, v: int) -> LinkGraph:
    """Construct the link graph of ``v``."""
    nodes = []
    for e in cx.vertex_edges(v):
        u, w = cx.edges[e]
        if u == v:
            nodes.append((e, 0))
        if w == v:
            nodes.append((e, 1))
    arcs: Dict = {}
    for f in sorted(cx.faces):
        trail = cx.faces[f]
        L = len(trail)
        for i, dart in enumerate(trail):
            if cx.dart_head(dart) != v:
                continue
            nxt = trail[(i + 1) % L]
            node_a = (dart[0], _head_end(dart))
            node_b = (nxt[0], _tail_end(nxt))
            arcs[(f, i)] = (node_a, node_b)
    return LinkGraph(nodes, arcs, v)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class GraphClass:
    """Primary classification tag plus witness data.

    tag is one of: Disconnected, Path, Cycle, FreeGraph, ParallelGraph,
    Subdivision3Connected, StarOfParallelGraphs, ParaStar, TwoConnectedOther,
    Other.  Tags lower in this list never shadow ones higher up; a cycle, for
    example, still answers parallel-graph queries via parallel_witness().
    """

    tag: str
    branch_nodes: Tuple = ()
    path_count: int = 0
    cut_node: Optional[object] = None
    center: Optional[object] = None


@dataclass(frozen=True)
class ParallelWitness:
    branch_nodes: Tuple
    path_count: int
    #: each path as the tuple of its arc keys from branch_nodes[0] to [1]
    paths: Tuple[Tuple, ...] = ()
    #: node sequence of each path, including both branch nodes
    path_nodes: Tuple[Tuple, ...] = ()


def _walk_path(
    g: Multigraph, start, first: Tuple[object, int], stop_nodes
) -> Optional[Tuple[Tuple, Tuple, Tuple[object, int]]]:
    """Follow arcs from ``start`` along arc-end ``first`` through degree-2
    nodes until a node in ``stop_nodes`` is hit.  Returns (arc keys, node
    sequence, terminal arc-end) or None if a node of other degree interrupts
    the walk.  The terminal arc-end is the (arc, side) attached at the last
    node, so callers can mark it consumed."""
    arcs = []
    nodes = [start]
    arc, side = first
    while True:
        n = g.other_end(arc, side)
        arcs.append(arc)
        nodes.append(n)
        if n in stop_nodes:
            return tuple(arcs), tuple(nodes), (arc, 1 - side)
        if g.degree(n) != 2:
            return None
        for a2, s2 in g._adj[n]:
            if (a2, s2) != (arc, 1 - side):
                arc, side = a2, s2
                break
        else:  # both ends of the same arc at n (tight loop); not a path
            return None


def parallel_witness(g: Multigraph) -> Optional[ParallelWitness]:
    """Test for a parallel graph: two branch nodes joined by internally
    disjoint paths covering everything.  Cycles count (branch degree two);
    single arcs count (one path); single nodes do not."""
    if len(g.nodes) < 2 or not g.is_connected() or g.has_loop():
        return None
    off = [n for n in g.nodes if g.degree(n) != 2]
    if len(off) == 0:
        srt = g.sorted_nodes()
        branches = (srt[0], srt[1])
    elif len(off) == 2:
        branches = tuple(sorted(off, key=_key))
    else:
        return None
    x, y = branches
    paths: List[Tuple] = []
    path_nodes: List[Tuple] = []
    used = set()
    for first in g._adj[x]:
        walk = _walk_path(g, x, first, {x, y})
        if walk is None:
            return None
        arcs, nodes, _ = walk
        if nodes[-1] != y:
            return None
        if any(n in used for n in nodes[1:-1]):
            return None
        used.update(nodes[1:-1])
        paths.append(arcs)
        path_nodes.append(nodes)
    if g.degree(x) != g.degree(y):
        return None
    covered = set()
    for arcs in paths:
        covered.update(arcs)
    if covered != set(g.arcs):
        return None
    if len(used) + 2 != len(g.nodes):
        return None
    return ParallelWitness(
        branch_nodes=branches,
        path_count=len(paths),
        paths=tuple(paths),
        path_nodes=tuple(path_nodes),
    )


@dataclass(frozen=True)
class ParallelPairing:
    """Bijection between the arc-ends at two nodes through disjoint paths.

    Exists when deleting the two nodes leaves only the interiors of disjoint
    paths between them, i.e. the graph is parallel with these branch nodes
    (degree-2 branch nodes included, so cycles and paths qualify too)."""

    node_in: object
    node_out: object
    #: arc-end at node_in -> arc-end at node_out on the same path
    pairs: Dict = field(hash=False, default_factory=dict)
    #: arc-end at node_in -> (arc keys, node sequence incl. both ends)
    walks: Dict = field(hash=False, default_factory=dict)


def parallel_pairing(g: Multigraph, n_in, n_out) -> Optional[ParallelPairing]:
    if n_in == n_out or n_in not in g._adj or n_out not in g._adj:
        return None
    if g.has_loop():
        return None
    pairs: Dict = {}
    walks: Dict = {}
    covered = {n_in, n_out}
    for first in g.arc_ends(n_in):
        walk = _walk_path(g, n_in, first, {n_in, n_out})
        if walk is None:
            return None
        arcs, nodes, last_end = walk
        if nodes[-1] != n_out:
            return None
        pairs[first] = last_end
        walks[first] = (arcs, nodes)
        covered.update(nodes)
    if covered != set(g.nodes):
        return None
    return ParallelPairing(node_in=n_in, node_out=n_out, pairs=pairs, walks=walks)


def _is_path_graph(g: Multigraph) -> bool:
    if not g.is_connected() or g.has_loop():
        return False
    if len(g.nodes) == 1:
        return not g.arcs
    degs = sorted(g.degree(n) for n in g.nodes)
    return degs[:2] == [1, 1] and all(d == 2 for d in degs[2:])


def _is_cycle_graph(g: Multigraph) -> bool:
    return (
        bool(g.arcs)
        and g.is_connected()
        and all(g.degree(n) == 2 for n in g.nodes)
    )


def is_free_graph(g: Multigraph) -> bool:
    """Subdivision of a 3-star, a path, or a cycle with an attached path.

    Bare cycles are *not* free (they are not subdivisions of any of the three
    shapes); they are still almost-3-connected via the parallel class.
    """
    if _is_path_graph(g):
        return True
    if not g.is_connected() or _is_cycle_graph(g):
        return False
    heavy = [n for n in g.nodes if g.degree(n) >= 3]
    if len(heavy) != 1 or g.degree(heavy[0]) != 3:
        return False
    c = heavy[0]
    tips = 0
    returns = 0
    seen_arc_ends = set()
    for first in g._adj[c]:
        if first in seen_arc_ends:
            continue
        walk = _walk_path(g, c, first, {c} | {n for n in g.nodes if g.degree(n) == 1})
        if walk is None:
            return False
        _, nodes, last_end = walk
        if nodes[-1] == c:
            returns += 1
            seen_arc_ends.add(last_end)  # the walk consumed a second arc-end at c
        else:
            tips += 1
    return (tips == 3 and returns == 0) or (tips == 1 and returns == 1)


def is_subdivision_3connected(g: Multigraph) -> bool:
    """Suppression is simple, has >= 4 nodes, minimum degree >= 3 and node
    connectivity >= 3 (K4 is the smallest witness)."""
    if not g.is_connected() or g.has_loop():
        return False
    supp, _ = g.suppressed()
    if len(supp.nodes) < 4 or not supp.is_simple():
        return False
    if any(supp.degree(n) < 3 for n in supp.nodes):
        return False
    return nx.node_connectivity(supp.to_networkx_simple()) >= 3


def para_star_center(g: Multigraph) -> Optional[object]:
    """Smallest node at which g decomposes into parallel graphs glued at a
    single vertex; None if no such node.  2-connected para-stars are exactly
    the parallel graphs (single constituent)."""
    if not g.is_connected() or not g.arcs or g.has_loop():
        return None
    w = parallel_witness(g)
    if w is not None:
        return w.branch_nodes[0]
    for c in g.articulation_nodes():
        ok = True
        for br in branches_at(g, c):
            bg = g.subgraph(br.nodes)
            if parallel_witness(bg) is None:
                ok = False
                break
        if ok:
            return c
    return None


def star_of_parallel_cut(g: Multigraph) -> Optional[object]:
    """Center of a star of parallel graphs: a para-star that is not
    2-connected.  Paths qualify (split at any interior vertex); parallel
    graphs other than paths do not."""
    if g.is_2connected():
        return None
    return para_star_center(g)


def classify(g: Multigraph) -> GraphClass:
    """Primary classification; see GraphClass for the precedence order."""
    if not g.is_connected():
        return GraphClass(tag="Disconnected")
    if _is_path_graph(g):
        return GraphClass(tag="Path")
    if _is_cycle_graph(g):
        w = parallel_witness(g)
        return GraphClass(
            tag="Cycle",
            branch_nodes=w.branch_nodes if w else (),
            path_count=w.path_count if w else 0,
        )
    if is_free_graph(g):
        return GraphClass(tag="FreeGraph")
    w = parallel_witness(g)
    if w is not None:
        return GraphClass(
            tag="ParallelGraph", branch_nodes=w.branch_nodes, path_count=w.path_count
        )
    if is_subdivision_3connected(g):
        return GraphClass(tag="Subdivision3Connected")
    cut = star_of_parallel_cut(g)
    if cut is not None:
        return GraphClass(tag="StarOfParallelGraphs", cut_node=cut)
    center = para_star_center(g)
    if center is not None:  # pragma: no cover - shadowed by the cases above
        return GraphClass(tag="ParaStar", center=center)
    if g.is_2connected():
        return GraphClass(tag="TwoConnectedOther")
    return GraphClass(tag="Other")


def is_almost_3connected(g: Multigraph) -> bool:
    """Subdivision of a 3-connected graph, parallel graph, or free graph."""
    return (
        is_subdivision_3connected(g)
        or parallel_witness(g) is not None
        or is_free_graph(g)
    )


# ---------------------------------------------------------------------------
# separators and branches


@dataclass(frozen=True)
class TwoSeparator:
    nodes: Tuple
    proper: bool
    components: Tuple[FrozenSet, ...]


def two_separators(g: Multigraph) -> Tuple[TwoSeparator, ...]:
    """All 2-separators of a 2-connected simple graph, brute force, sorted.

    A separator (a, b) is proper unless the removal leaves exactly two
    components, one of which is a path, and a, b are not adjacent.
    """
    if not g.is_2connected():
        raise Not2Connected("two_separators needs a 2-connected graph")
    adj_pairs = set()
    for n0, n1 in g.arcs.values():
        adj_pairs.add(frozenset((_key(n0), _key(n1))))
    out: List[TwoSeparator] = []
    srt = g.sorted_nodes()
    for i, a in enumerate(srt):
        for b in srt[i + 1 :]:
            rest = g.without_nodes((a, b))
            comps = rest.components()
            if len(comps) < 2:
                continue
            comps = tuple(sorted(comps, key=lambda c: sorted(map(_key, c))))
            improper = (
                len(comps) == 2
                and any(_is_path_graph(rest.subgraph(c)) for c in comps)
                and frozenset((_key(a), _key(b))) not in adj_pairs
            )
            out.append(TwoSeparator(nodes=(a, b), proper=not improper, components=comps))
    return tuple(out)


@dataclass(frozen=True)
class Branch:
    """A branch of a graph at a node c: one component of g - c together with c
    and the arcs joining them."""

    cut: object
    nodes: Tuple
    arcs: Tuple


def branches_at(g: Multigraph, c) -> Tuple[Branch, ...]:
    """Branches at ``c``; requires c to be an articulation node (or the graph
    minus c to be empty, in which case there are no branches).

    Works for any node when the caller wants the decomposition regardless of
    cut status; raises NotCutVertex only when strict=True semantics are needed
    -- here we keep it permissive and let callers check.
    """
    if c not in g._adj:
        raise NotCutVertex(f"{c!r} is not a node")
    rest = g.without_nodes((c,))
    out: List[Branch] = []
    for comp in sorted(rest.components(), key=lambda s: sorted(map(_key, s))):
        nodes = tuple(sorted(comp, key=_key)) + (c,)
        keep = set(comp) | {c}
        arcs = tuple(
            sorted(
                (
                    a
                    for a, (n0, n1) in g.arcs.items()
                    if n0 in keep and n1 in keep and (n0 in comp or n1 in comp)
                ),
                key=_key,
            )
        )
        out.append(Branch(cut=c, nodes=nodes, arcs=arcs))
    return tuple(out)


# ---------------------------------------------------------------------------
# degree parameters


def degree_sequence_abbrev(g: Multigraph) -> Tuple[int, ...]:
    """Node degrees >= 3, sorted descending (degrees <= 2 are dropped)."""
    return tuple(sorted((d for d in (g.degree(n) for n in g.nodes) if d >= 3), reverse=True))


def degree_parameter_complex(cx: TwoComplex) -> Tuple[Tuple[int, ...], ...]:
    """Abbreviated degree sequences of all links, sorted descending.

    Comparison convention throughout: descending-lexicographic on tuples;
    stretching operations must not increase this parameter.
    """
    seqs = [degree_sequence_abbrev(link_at(cx, v)) for v in sorted(cx.vertices)]
    return tuple(sorted(seqs, reverse=True))


def cutvertex_degree(cx: TwoComplex) -> int:
    """Maximum degree of a cut vertex over all link graphs; 0 if none.

    Raises DisconnectedLink if some link is disconnected (split such vertices
    first).
    """
    best = 0
    for v in sorted(cx.vertices):
        lk = link_at(cx, v)
        if not lk.is_connected():
            raise DisconnectedLink(v)
        for n in lk.articulation_nodes():
            best = max(best, lk.degree(n))
    return best
