"""Built-in example complexes and a random simplicial complex generator."""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Sequence, Tuple

from .complexes import TwoComplex

__all__ = [
    "tetrahedron",
    "octahedron",
    "delta2",
    "delta_plus",
    "cone_over_graph",
    "cone",
    "strip",
    "annulus",
    "moebius_disc",
    "torus_cross",
    "parallel_book",
    "triangulated_disc",
    "random_complex",
    "GENERATORS",
]


def tetrahedron() -> TwoComplex:
    return TwoComplex.from_triangles(
        [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    )


def octahedron() -> TwoComplex:
    """Boundary of the octahedron: poles 0 and 5, equator 1-4."""
    return TwoComplex.from_triangles(
        [
            (0, 1, 2),
            (0, 2, 3),
            (0, 3, 4),
            (0, 4, 1),
            (5, 2, 1),
            (5, 3, 2),
            (5, 4, 3),
            (5, 1, 4),
        ]
    )


def delta2() -> TwoComplex:
    """Two triangles glued along one edge."""
    return TwoComplex.from_triangles([(0, 1, 2), (0, 1, 3)])


def delta_plus(n: int) -> TwoComplex:
    """n copies of delta2 glued along a common path of length two.

    The path is w_a (vertex 1) -- v (vertex 0) -- w_b (vertex 2); copy X adds
    vertex u_X and the two triangles (v, u_X, w_a), (v, u_X, w_b).
    """
    if n < 1:
        raise ValueError("n must be positive")
    tris: List[Tuple[int, int, int]] = []
    for i in range(n):
        u = 3 + i
        tris.append((0, u, 1))
        tris.append((0, u, 2))
    return TwoComplex.from_triangles(tris)


def cone_over_graph(edges: Sequence[Tuple[int, int]]) -> TwoComplex:
    """Cone over a simple graph: one triangle (u, v, apex) per graph edge."""
    nodes = sorted({x for e in edges for x in e})
    apex = max(nodes) + 1
    tris = [(u, v, apex) for u, v in edges]
    return TwoComplex.from_triangles(tris)


_NAMED_GRAPHS: Dict[str, List[Tuple[int, int]]] = {
    "k4": [(i, j) for i in range(4) for j in range(i + 1, 4)],
    "k5": [(i, j) for i in range(5) for j in range(i + 1, 5)],
    "k33": [(i, j + 3) for i in range(3) for j in range(3)],
}


def cone(name: str) -> TwoComplex:
    """Cone over a named graph: k4, k5 or k33."""
    key = name.lower().replace(",", "")
    if key not in _NAMED_GRAPHS:
        raise ValueError(f"unknown graph {name!r}; choose from {sorted(_NAMED_GRAPHS)}")
    return cone_over_graph(_NAMED_GRAPHS[key])


def strip(p: int, n: int, core_base: int = 0, band_base: Optional[int] = None) -> List[Tuple[int, int, int]]:
    """Triangles of a closed band winding ``p`` times around a core n-cycle.

    Core vertices are ``core_base .. core_base+n-1``; band vertices are
    ``band_base .. band_base+p*n-1`` (default: right after the core).  For
    p = 1 this is an annulus; for p = 2 the band has a single boundary cycle
    (a Moebius band around the core).
    """
    if n < 3 or p < 1:
        raise ValueError("need n >= 3 and p >= 1")
    if band_base is None:
        band_base = core_base + n
    c = [core_base + i for i in range(n)]
    b = [band_base + j for j in range(p * n)]
    tris: List[Tuple[int, int, int]] = []
    m = p * n
    for j in range(m):
        tris.append((b[j], b[(j + 1) % m], c[j % n]))
        tris.append((b[(j + 1) % m], c[j % n], c[(j + 1) % n]))
    return tris


def annulus(n: int) -> TwoComplex:
    """Triangulated annulus with 2n faces (a band winding once)."""
    return TwoComplex.from_triangles(strip(1, n))


def moebius_disc(n: int = 3) -> TwoComplex:
    """A Moebius band around a core n-cycle, plus a disc glued along the core.

    Core edges have face-degree three: twice from the band, once from the
    disc.  The band is one mega face winding twice around the core, the disc
    is another winding once.
    """
    tris = strip(2, n)
    apex = n + 2 * n
    for i in range(n):
        tris.append((i, (i + 1) % n, apex))
    return TwoComplex.from_triangles(tris)


def torus_cross(p: int, q: int, n: int = 3) -> TwoComplex:
    """Two closed bands sharing a core n-cycle, winding p and q times."""
    if p < 1 or q < 1:
        raise ValueError("need p, q >= 1")
    tris = strip(p, n, core_base=0, band_base=n)
    tris += strip(q, n, core_base=0, band_base=n + p * n)
    return TwoComplex.from_triangles(tris)


def parallel_book(k: int) -> TwoComplex:
    """k triangles glued along one common edge (an edge of face-degree k)."""
    if k < 1:
        raise ValueError("k must be positive")
    return TwoComplex.from_triangles([(0, 1, 2 + i) for i in range(k)])


def triangulated_disc(n: int) -> TwoComplex:
    """A fan triangulation of a disc with n faces (n + 2 vertices)."""
    if n < 1:
        raise ValueError("n must be positive")
    return TwoComplex.from_triangles([(0, i + 1, i + 2) for i in range(n)])


def random_complex(
    rng: random.Random,
    max_faces: int = 10,
    max_edge_degree: int = 4,
) -> TwoComplex:
    """A connected random simplicial complex grown by gluing triangles.

    Every face shares at least an edge or a vertex with the part built before
    it; edge face-degrees stay <= max_edge_degree, which keeps the rotation
    enumeration space small.
    """
    n_faces = rng.randint(1, max_faces)
    tris: List[Tuple[int, int, int]] = [(0, 1, 2)]
    face_sets = {frozenset((0, 1, 2))}
    edge_deg: Dict[frozenset, int] = {
        frozenset((0, 1)): 1,
        frozenset((1, 2)): 1,
        frozenset((0, 2)): 1,
    }
    vertices = [0, 1, 2]

    def deg(a: int, b: int) -> int:
        return edge_deg.get(frozenset((a, b)), 0)

    while len(tris) < n_faces:
        open_edges = [tuple(sorted(e)) for e in edge_deg if edge_deg[e] < max_edge_degree]
        if not open_edges:
            break
        open_edges.sort()
        for _ in range(40):  # retry budget per face
            u, v = rng.choice(open_edges)
            if rng.random() < 0.5:
                w = max(vertices) + 1
            else:
                w = rng.choice(vertices)
                if w in (u, v):
                    continue
            fs = frozenset((u, v, w))
            if len(fs) != 3 or fs in face_sets:
                continue
            if deg(u, w) >= max_edge_degree or deg(v, w) >= max_edge_degree:
                continue
            tris.append((u, v, w))
            face_sets.add(fs)
            for a, b in ((u, v), (u, w), (v, w)):
                edge_deg[frozenset((a, b))] = deg(a, b) + 1
            if w not in vertices:
                vertices.append(w)
            break
        else:
            break  # no admissible gluing found; stop early
    return TwoComplex.from_triangles(tris)


GENERATORS = {
    "tetra": lambda args: tetrahedron(),
    "octa": lambda args: octahedron(),
    "delta2": lambda args: delta2(),
    "deltaplus": lambda args: delta_plus(int(args[0])),
    "cone": lambda args: cone(args[0]),
    "moebius-disc": lambda args: moebius_disc(int(args[0]) if args else 3),
    "torus-cross": lambda args: torus_cross(int(args[0]), int(args[1]), int(args[2]) if len(args) > 2 else 3),
    "annulus": lambda args: annulus(int(args[0]) if args else 3),
    "parallel": lambda args: parallel_book(int(args[0])),
    "disc": lambda args: triangulated_disc(int(args[0])),
}
