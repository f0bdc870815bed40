"""Exact polytopes: vertex lists, H-systems, zonotopes, compatibility tests."""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from math import comb
from typing import Sequence

from . import caps
from .exactsolve import (
    Feasible,
    LinearSystem,
    Optimum,
    Vec,
    add,
    integer_points,
    lp_feasible,
    lp_optimize,
    neg,
    origin_in_hull_int,
    rank,
    solve_square,
    strict_cone_witness,
    sub,
    vec,
)


@dataclass(frozen=True)
class VPolytope:
    """Convex hull of a finite point list (not necessarily minimal)."""

    vertices: tuple

    @staticmethod
    def of(points: Sequence[Sequence]) -> "VPolytope":
        pts = tuple(vec(p) for p in points)
        if not pts:
            raise ValueError("a polytope needs at least one point")
        if len({len(p) for p in pts}) != 1:
            raise ValueError("points have inconsistent dimensions")
        return VPolytope(pts)

    @property
    def dim(self) -> int:
        return len(self.vertices[0])

    def __neg__(self) -> "VPolytope":
        return VPolytope(tuple(neg(v) for v in self.vertices))

    def translate(self, v: Sequence) -> "VPolytope":
        v = vec(v)
        return VPolytope(tuple(add(p, v) for p in self.vertices))


@dataclass(frozen=True)
class HPolyhedron:
    system: LinearSystem


@dataclass(frozen=True)
class Zonotope:
    """``center + sum_i [-v_i, v_i]``."""

    center: Vec
    generators: tuple

    @staticmethod
    def of(center: Sequence, generators: Sequence[Sequence]) -> "Zonotope":
        c = vec(center)
        gens = tuple(vec(g) for g in generators)
        if any(len(g) != len(c) for g in gens):
            raise ValueError("generator dimension mismatch")
        return Zonotope(c, gens)


def is_extreme(v: Vec, others: Sequence[Vec]) -> bool:
    """True iff ``v`` is not in the convex hull of the other (distinct) points."""
    rows = [sub(v, u) for u in others if u != v]
    return strict_cone_witness(rows, len(v)) is not None


def probe_directions(dim: int) -> list[tuple[int, ...]]:
    rng = random.Random(dim)
    span = 1 << 16
    axes = [tuple(s if k == i else 0 for k in range(dim)) for i in range(dim) for s in (1, -1)]
    return axes + [tuple(rng.randint(-span, span) for _ in range(dim)) for _ in range(4 * dim)]


def _extreme_int(v: tuple[int, ...], others: Sequence[tuple[int, ...]]) -> bool:
    rows = [tuple(a - b for a, b in zip(v, u)) for u in others if u != v]
    return not rows or not origin_in_hull_int(rows)


def canonicalize(P: VPolytope) -> VPolytope:
    """Exactly ext(P), deduplicated and lexicographically sorted.

    Unique maximisers along a few probe directions are extreme for free.
    A remaining point is dropped when it lies in the hull of those known
    vertices and is otherwise tested against all other points.  The tests
    run on coordinates scaled to integers.  Results are memoised because the
    same point sets recur across calls.
    """
    return VPolytope(_extreme_points(tuple(sorted(set(P.vertices)))))


@lru_cache(maxsize=4096)
def _extreme_points(pts: tuple[Vec, ...]) -> tuple[Vec, ...]:
    if len(pts) <= 2:
        return pts
    ints, _ = integer_points(pts)
    known = set()
    for u in probe_directions(len(pts[0])):
        vals = [sum(a * b for a, b in zip(u, p)) for p in ints]
        top = max(vals)
        if vals.count(top) == 1:
            known.add(vals.index(top))
    known_pts = [ints[i] for i in known]
    keep = []
    for i, v in enumerate(ints):
        if i in known:
            keep.append(pts[i])
        elif not _extreme_int(v, known_pts):
            continue
        elif _extreme_int(v, ints):
            keep.append(pts[i])
    return tuple(keep)


def minkowski_sum(A: VPolytope, B: VPolytope) -> VPolytope:
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    A = canonicalize(A)
    B = canonicalize(B)
    return canonicalize(VPolytope(tuple(add(a, b) for a, b in product(A.vertices, B.vertices))))


def minkowski_diff(A: VPolytope, B: VPolytope) -> VPolytope:
    """``A - B = {a - b}`` (the set difference of Minkowski type, not erosion)."""
    return minkowski_sum(A, -B)


def convex_union(polys: Sequence[VPolytope]) -> VPolytope:
    return canonicalize(VPolytope(tuple(v for P in polys for v in P.vertices)))


def joint_max_witness(a: Sequence, A: VPolytope, b: Sequence, B: VPolytope) -> Vec | None:
    """A direction that uniquely selects ``a`` in A and ``b`` in B, with margin one.

    Returns ``h`` with ``h·a >= h·a' + 1`` for every other vertex ``a'`` of A
    and likewise for B, or None.  By the Minkowski decomposition lemma such
    an ``h`` exists iff ``a + b`` is a vertex of ``A + B``.
    """
    a, b = vec(a), vec(b)
    A = canonicalize(A)
    B = canonicalize(B)
    if a not in A.vertices:
        raise ValueError("a is not an extreme point of A")
    if b not in B.vertices:
        raise ValueError("b is not an extreme point of B")
    return _witness(a, A.vertices, b, B.vertices)


def _witness(a: Vec, A: Sequence[Vec], b: Vec, B: Sequence[Vec]) -> Vec | None:
    rows = [sub(a, u) for u in A if u != a] + [sub(b, u) for u in B if u != b]
    return strict_cone_witness(rows, len(a))


@dataclass(frozen=True)
class Compatibility:
    compatible: bool
    violations: tuple  # (a, b) with a - b extreme in A - B but a + b not extreme in A + B

    def __bool__(self) -> bool:
        return self.compatible


def compatible(A: VPolytope, B: VPolytope) -> Compatibility:
    """Decide compatibility by enumerating vertex pairs of A and B."""
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    A = canonicalize(A)
    B = canonicalize(B)
    caps.check("brute", len(A.vertices) * len(B.vertices))
    negB = [neg(v) for v in B.vertices]
    bad = []
    for a in A.vertices:
        for b, nb in zip(B.vertices, negB):
            if _witness(a, A.vertices, nb, negB) is not None and _witness(a, A.vertices, b, B.vertices) is None:
                bad.append((a, b))
    return Compatibility(not bad, tuple(bad))


def tangent_cones_trivial(A: VPolytope, B: VPolytope) -> bool:
    """Tangent-cone form of compatibility, decided by simplex feasibility.

    For every pair with ``a - b`` extreme in ``A - B`` the cones
    ``T_A(a)`` and ``-T_B(b)`` may only share the origin.  Shared nonzero
    directions exist iff some nontrivial nonnegative combination of the
    edges ``a' - a`` and ``b' - b`` vanishes.
    """
    A = canonicalize(A)
    B = canonicalize(B)
    D = minkowski_diff(A, B)
    d = A.dim
    for a in A.vertices:
        for b in B.vertices:
            if sub(a, b) not in D.vertices:
                continue
            # an extreme a - b has exactly one decomposition
            edges = [sub(u, a) for u in A.vertices if u != a] + [sub(u, b) for u in B.vertices if u != b]
            if not edges:
                continue
            k = len(edges)
            eqs = [([e[t] for e in edges], 0) for t in range(d)]
            eqs.append(([1] * k, 1))
            ges = [([1 if j == i else 0 for j in range(k)], 0) for i in range(k)]
            if isinstance(lp_feasible(LinearSystem.build(k, eqs=eqs, ges=ges)), Feasible):
                return False
    return True


def par_basis(P: VPolytope) -> list[Vec]:
    v0 = P.vertices[0]
    return [sub(v, v0) for v in P.vertices[1:]]


def par_trivial_intersection(A: VPolytope, B: VPolytope) -> bool:
    """Transversality: the direction spaces of A and B meet only at 0."""
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    PA, PB = par_basis(A), par_basis(B)
    return rank(PA + PB) == rank(PA) + rank(PB)


def zonotope_vertices(Z: Zonotope) -> VPolytope:
    p = len(Z.generators)
    caps.check("zonotope", p)
    pts = []
    for signs in product((1, -1), repeat=p):
        v = Z.center
        for s, g in zip(signs, Z.generators):
            v = add(v, g) if s > 0 else sub(v, g)
        pts.append(v)
    return canonicalize(VPolytope(tuple(pts)))


def zonotope_transversal(Z1: Zonotope, Z2: Zonotope) -> bool:
    if len(Z1.center) != len(Z2.center):
        raise ValueError("dimension mismatch")
    G1, G2 = list(Z1.generators), list(Z2.generators)
    return rank(G1 + G2) == rank(G1) + rank(G2)


def hpoly_vertices(H: HPolyhedron) -> VPolytope:
    """Vertices of a bounded H-polyhedron by enumerating n-subsets of rows."""
    sys = H.system
    n = sys.nvars
    rows = list(sys.eqs) + list(sys.les)
    caps.check("subsets", comb(len(rows), n))
    if not lp_bounded_check(sys):
        raise ValueError("H-polyhedron is unbounded or empty")
    cand = []
    for idx in combinations(range(len(rows)), n):
        M = [rows[i][0] for i in idx]
        if rank(M) < n:
            continue
        x = tuple(solve_square(M, [rows[i][1] for i in idx]))
        if sys.satisfied_by(x):
            cand.append(x)
    if not cand:
        raise ValueError("H-polyhedron has no vertices")
    return canonicalize(VPolytope(tuple(cand)))


def lp_bounded_check(sys: LinearSystem) -> bool:
    """True iff the system is feasible and every coordinate is bounded."""
    for t in range(sys.nvars):
        for sgn in (1, -1):
            c = [0] * sys.nvars
            c[t] = sgn
            if not isinstance(lp_optimize(c, sys), Optimum):
                return False
    return True


def load_polytope(obj: dict) -> VPolytope:
    """Parse ``{"vertices": ...}``, ``{"hrep": ...}`` or ``{"zonotope": ...}``."""
    if "vertices" in obj:
        return canonicalize(VPolytope.of(obj["vertices"]))
    if "zonotope" in obj:
        z = obj["zonotope"]
        return zonotope_vertices(Zonotope.of(z["center"], z.get("generators", [])))
    if "hrep" in obj:
        h = obj["hrep"]
        A = h.get("A", [])
        b = h.get("b", [])
        Aeq = h.get("Aeq", [])
        beq = h.get("beq", [])
        n = len((A or Aeq)[0])
        sys = LinearSystem.build(n, eqs=list(zip(Aeq, beq)), les=list(zip(A, b)))
        return hpoly_vertices(HPolyhedron(sys))
    raise ValueError("polytope file needs 'vertices', 'hrep' or 'zonotope'")
