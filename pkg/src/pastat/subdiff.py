"""Convex subdifferentials of MC trees and brute-force Clarke/Frechet oracles."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import caps
from .exactsolve import (
    Feasible,
    Infeasible,
    LinearSystem,
    Optimum,
    Vec,
    add,
    dot,
    lp_feasible,
    lp_optimize,
    integer_points,
    min_norm_point,
    origin_in_hull_int,
    neg,
    norm_sq,
    strict_cone_witness,
    sub,
    vec,
    wolfe,
    zeros,
)
from .pafunc import (
    DcFunction,
    Leaf,
    MaxMinFunction,
    MaxNode,
    McFunction,
    Node,
    SumNode,
    derivative_tree,
    gradient_set,
    maxmin_derivative,
)
from .polytope import (
    probe_directions,
    VPolytope,
    canonicalize,
    convex_union,
    minkowski_diff,
    minkowski_sum,
    par_trivial_intersection,
)


# ---------------------------------------------------------------------------
# lifted H-representation

@dataclass(frozen=True)
class LiftedSubdiff:
    """``{g : exists t, (g, t) in system}``; the first ``dim`` variables are ``g``."""

    system: LinearSystem
    dim: int

    @property
    def nlift(self) -> int:
        return self.system.nvars - self.dim


def lifted_subdiff(h: McFunction, w: Sequence) -> LiftedSubdiff:
    """Lift ``∂h(w)`` with one weight per active Max child.

    Each Max node splits the weight of its parent among its active children,
    the root Max nodes carry weight one, and ``g`` collects ``t_leaf * x``.
    """
    tree = derivative_tree(h, w).root
    d = h.dim
    leaves: list[tuple[int, Vec]] = []
    eq_specs: list[tuple[dict[int, Fraction], Fraction]] = []
    counter = [0]

    def new_var() -> int:
        counter[0] += 1
        return counter[0] - 1

    def visit_sum(node: SumNode, mass: int | None) -> None:
        for m in node.children:
            kids = []
            for c in m.children:
                t = new_var()
                kids.append(t)
                if isinstance(c, Leaf):
                    leaves.append((t, c.x))
                else:
                    visit_sum(c, t)
            row = {t: Fraction(1) for t in kids}
            if mass is None:
                eq_specs.append((row, Fraction(1)))
            else:
                row[mass] = Fraction(-1)
                eq_specs.append((row, Fraction(0)))

    visit_sum(tree, None)
    T = counter[0]
    n = d + T
    eqs = []
    for k in range(d):
        row = [Fraction(0)] * n
        row[k] = Fraction(1)
        for t, x in leaves:
            row[d + t] -= x[k]
        eqs.append((row, 0))
    for spec, rhs in eq_specs:
        row = [Fraction(0)] * n
        for t, c in spec.items():
            row[d + t] += c
        eqs.append((row, rhs))
    ges = []
    for t in range(T):
        row = [Fraction(0)] * n
        row[d + t] = Fraction(1)
        ges.append((row, 0))
    return LiftedSubdiff(LinearSystem.build(n, eqs=eqs, ges=ges), d)


def subdiff_contains(h: McFunction, w: Sequence, gvec: Sequence) -> bool:
    L = lifted_subdiff(h, w)
    gvec = vec(gvec)
    if len(gvec) != h.dim:
        raise ValueError("subgradient dimension mismatch")
    n = L.system.nvars
    fix = []
    for k in range(h.dim):
        row = [0] * n
        row[k] = 1
        fix.append((row, gvec[k]))
    return isinstance(lp_feasible(L.system.with_rows(eqs=fix)), Feasible)


def equality_set(P: LinearSystem) -> list[int]:
    """Indices of inequality rows that hold with equality on all of P."""
    if isinstance(lp_feasible(P), Infeasible):
        raise ValueError("equality set of an empty polyhedron")
    out = []
    for i, (a, b) in enumerate(P.les):
        res = lp_optimize(a, P)
        if isinstance(res, Optimum) and res.value == b:
            out.append(i)
    return out


def _par_rows(L: LiftedSubdiff) -> list[Vec]:
    """Linear rows whose common kernel is par(lift); project onto ``g`` for par(∂h)."""
    E = equality_set(L.system)
    return [a for a, _ in L.system.eqs] + [L.system.les[i][0] for i in E]


# ---------------------------------------------------------------------------
# vertex lists and distances

def _vertices(node: Node, dim: int) -> VPolytope:
    if isinstance(node, Leaf):
        return VPolytope((node.x,))
    parts = [_vertices(c, dim) for c in node.children]
    if isinstance(node, MaxNode):
        return convex_union(parts)
    acc = VPolytope((zeros(dim),))
    for P in parts:
        caps.check("brute", len(acc.vertices) * len(P.vertices))
        acc = minkowski_sum(acc, P)
    return acc


def subdiff_vertices(h: McFunction, w: Sequence) -> VPolytope:
    """Exact vertex list of ``∂h(w)`` built bottom-up over the active tree."""
    return _vertices(derivative_tree(h, w).root, h.dim)


def _support_argmin(node: Node, p: Vec, dim: int) -> Vec:
    """A vertex of the subdifferential (active tree) minimising ``p·v``."""
    if isinstance(node, Leaf):
        return node.x
    if isinstance(node, SumNode):
        acc = zeros(dim)
        for c in node.children:
            acc = add(acc, _support_argmin(c, p, dim))
        return acc
    best = None
    bv = None
    for c in node.children:
        v = _support_argmin(c, p, dim)
        t = dot(p, v)
        if best is None or t < bv:
            best, bv = v, t
    return best


def dc_critical_dist_sq(f: DcFunction, w: Sequence, method: str = "support") -> Fraction:
    """Squared distance from 0 to ``∂h(w) - ∂g(w)``.

    ``support`` runs Wolfe's method with a linear oracle evaluated on the
    trees; ``vrep`` forms the Minkowski difference of the vertex lists.
    """
    if method == "vrep":
        D = minkowski_diff(subdiff_vertices(f.h, w), subdiff_vertices(f.g, w))
        return norm_sq(min_norm_point(D.vertices))
    if method != "support":
        raise ValueError(f"unknown method {method!r}")
    th = derivative_tree(f.h, w).root
    tg = derivative_tree(f.g, w).root
    d = f.dim

    def lmo(p: Vec) -> Vec:
        return sub(_support_argmin(th, p, d), _support_argmin(tg, neg(p), d))

    start = lmo(zeros(d))
    return norm_sq(wolfe(lmo, start).point)


def transversal_at(f: DcFunction, w: Sequence, method: str = "vrep") -> bool:
    """Whether ``par(∂h(w))`` and ``par(∂g(w))`` meet only at the origin."""
    if method == "vrep":
        return par_trivial_intersection(subdiff_vertices(f.h, w), subdiff_vertices(f.g, w))
    if method != "lprep":
        raise ValueError(f"unknown method {method!r}")
    Lh = lifted_subdiff(f.h, w)
    Lg = lifted_subdiff(f.g, w)
    d = f.dim
    nh, ng = Lh.nlift, Lg.nlift
    n = d + nh + ng
    eqs = []
    for a in _par_rows(Lh):
        eqs.append((list(a[:d]) + list(a[d:]) + [0] * ng, 0))
    for a in _par_rows(Lg):
        eqs.append((list(a[:d]) + [0] * nh + list(a[d:]), 0))
    for i in range(d):
        row = [0] * n
        row[i] = 1
        if isinstance(lp_feasible(LinearSystem.build(n, eqs=eqs, ges=[(row, 1)])), Feasible):
            return False
    return True


# ---------------------------------------------------------------------------
# brute-force Clarke subdifferential via essential activity

@dataclass(frozen=True)
class ActivePiece:
    gradient: Vec
    witness: Vec  # direction on whose neighbourhood this piece is the selection


def _disjunctive_cone(base: list[Vec], groups: list[list[Vec]], dim: int) -> Vec | None:
    """Find ``d`` with ``r·d >= 1`` on ``base`` and on one row of every group.

    Depth-first branch and bound: at each node the groups violated by the
    current witness are examined, a node dies as soon as one of them has no
    row compatible with the rows already fixed, and otherwise the group with
    the fewest compatible rows is branched on.
    """
    witness: dict[frozenset, Vec | None] = {}
    dead: set[frozenset] = set()  # row sets already shown to admit no solution

    def finish(d: Vec) -> Vec | None:
        factor = Fraction(1)
        for grp in groups:
            best = max(dot(r, d) for r in grp)
            if best <= 0:
                return None
            if best < 1:
                factor = max(factor, 1 / best)
        return tuple(factor * x for x in d)

    def solve(rows: list[Vec], d: Vec) -> Vec | None:
        done = finish(d)
        if done is not None:
            return done
        choice = None
        for grp in groups:
            if max(dot(r, d) for r in grp) > 0:
                continue
            kids = []
            for r in grp:
                key = frozenset(rows + [r])
                if key in dead:
                    continue
                if key not in witness:
                    witness[key] = strict_cone_witness(rows + [r], dim)
                if witness[key] is not None:
                    kids.append((r, witness[key]))
            if not kids:
                dead.add(frozenset(rows))
                return None
            if choice is None or len(kids) < len(choice):
                choice = kids
        for r, wit in choice:
            res = solve(rows + [r], wit)
            if res is not None:
                return res
        dead.add(frozenset(rows))
        return None

    d0 = strict_cone_witness(base, dim)
    if d0 is None:
        return None
    return solve(list(base), d0)


def _dc_active(f: DcFunction, w: Sequence) -> list[ActivePiece]:
    H = gradient_set(derivative_tree(f.h, w))
    G = gradient_set(derivative_tree(f.g, w))
    d = f.dim

    def cells(S: list[Vec]) -> list[tuple[Vec, list[Vec]]]:
        out = []
        for a in S:
            rows = [sub(a, u) for u in S if u != a]
            if strict_cone_witness(rows, d) is not None:
                out.append((a, rows))
        return out

    CH, CG = cells(H), cells(G)
    caps.check("brute", len(CH) * len(CG))
    found = []
    for a, ra in CH:
        for b, rb in CG:
            wit = strict_cone_witness(ra + rb, d)
            if wit is not None:
                found.append(ActivePiece(sub(a, b), wit))
    return found


def _reduced_groups(fd: MaxMinFunction) -> list[list[Vec]]:
    """Groups of ``f'(w; ·)`` cut down to what determines the function.

    The min over a group only depends on the extreme points of its hull,
    and a group whose hull contains another group's hull never strictly
    exceeds that group, so it can be dropped from the max.
    """
    raw = [list(dict.fromkeys(fd.pieces[j][0] for j in g)) for g in fd.groups]
    groups = [list(canonicalize(VPolytope(tuple(g))).vertices) for g in raw]
    groups = list(dict.fromkeys(tuple(g) for g in groups))
    flat = list(dict.fromkeys(x for g in groups for x in g))
    ints, _ = integer_points(flat)
    pos = {x: i for i, x in enumerate(flat)}
    ig = [[ints[pos[x]] for x in g] for g in groups]
    probes = probe_directions(fd.dim)
    support = [[max(sum(a * b for a, b in zip(u, x)) for x in g) for u in probes] for g in ig]

    def covers(i: int, j: int) -> bool:
        # conv(group i) contains conv(group j)
        if any(sj > si for si, sj in zip(support[i], support[j])):
            return False
        A = ig[i]
        return all(b in A or origin_in_hull_int([tuple(p - q for p, q in zip(a, b)) for a in A]) for b in ig[j])

    keep = []
    for i, A in enumerate(groups):
        if not any(j != i and covers(i, j) for j in range(len(groups))):
            keep.append(list(A))
    return keep


def _generic_selection(groups: list[list[tuple[int, ...]]], d: Sequence[int]) -> tuple[int, ...] | None:
    """The integer-scaled gradient selected on a neighbourhood of ``d``, if it is affine there."""
    mins = []
    for g in groups:
        vals = sorted(sum(a * b for a, b in zip(x, d)) for x in g)
        lo = vals[0]
        unique = len(vals) == 1 or lo < vals[1]
        arg = next(x for x in g if sum(a * b for a, b in zip(x, d)) == lo)
        mins.append((lo, arg, unique))
    top = max(m[0] for m in mins)
    cand = {m[1] for m in mins if m[0] == top and m[2]}
    if len(cand) != 1:
        return None
    (G,) = cand
    for g, (v, _, _) in zip(groups, mins):
        if v == top and G not in g:
            return None
    return G


def _sample_directions(dim: int, count: int) -> list[tuple[int, ...]]:
    rng = random.Random(0)
    span = 1 << 20
    return [tuple(rng.randint(-span, span) for _ in range(dim)) for _ in range(count)]


def _sampled_active(groups: list[list[Vec]], d: int) -> dict[Vec, Vec]:
    """Gradients selected around random integer directions, each with its direction."""
    flat = list(dict.fromkeys(x for g in groups for x in g))
    ints, _ = integer_points(flat)
    back = dict(zip(ints, flat))
    igroups = [[ints[flat.index(x)] for x in g] for g in groups]
    found: dict[Vec, Vec] = {}
    for u in _sample_directions(d, 16 * d):
        G = _generic_selection(igroups, u)
        if G is not None and back[G] not in found:
            found[back[G]] = vec(u)
    return found


def _maxmin_active(f: MaxMinFunction, w: Sequence, hull_only: bool = False) -> list[ActivePiece]:
    """Essentially active gradients of ``f'(w; ·)`` with witnesses.

    With ``hull_only`` a candidate already inside the hull of the gradients
    found so far is not searched; the hull, which is all the Clarke
    subdifferential needs, is unaffected.
    """
    fd = maxmin_derivative(f, w)
    d = f.dim
    groups = _reduced_groups(fd)
    universe = list(dict.fromkeys(x for g in groups for x in g))
    caps.check("brute", len(universe) * len(groups))
    found = _sampled_active(groups, d)
    for G in universe:
        if G in found:
            continue
        if hull_only and strict_cone_witness([sub(a, G) for a in found], d) is None:
            continue
        wit = _active_witness(G, groups, d)
        if wit is not None:
            found[G] = wit
    return [ActivePiece(G, wit) for G, wit in found.items()]


def _active_witness(G: Vec, groups: list[list[Vec]], d: int) -> Vec | None:
    """A direction on whose neighbourhood ``G`` is the selected gradient, or None."""
    others = [[sub(G, x) for x in g] for g in groups if G not in g]
    for g in groups:
        if G not in g:
            continue
        base = [sub(x, G) for x in g if x != G]
        wit = _disjunctive_cone(base, others, d)
        if wit is not None:
            return wit
    return None


def _maxmin_dist_sq(f: MaxMinFunction, w: Sequence) -> Fraction:
    """Squared Clarke distance, searching only gradients that could shrink it.

    With ``p`` the min-norm point of the gradients certified so far, a
    gradient ``G`` can lower the distance only if ``p·G < |p|^2``; such
    candidates are tested cheapest-first and the loop ends when none is
    essentially active.
    """
    fd = maxmin_derivative(f, w)
    d = f.dim
    groups = _reduced_groups(fd)
    universe = list(dict.fromkeys(x for g in groups for x in g))
    caps.check("brute", len(universe) * len(groups))
    found = _sampled_active(groups, d)
    if not found:
        return norm_sq(min_norm_point([p.gradient for p in _maxmin_active(f, w)]))
    rejected: set[Vec] = set()
    while True:
        p = min_norm_point(list(found))
        r = norm_sq(p)
        if r == 0:
            return r
        cand = sorted(
            (G for G in universe if G not in found and G not in rejected and dot(p, G) < r),
            key=lambda G: dot(p, G),
        )
        for G in cand:
            wit = _active_witness(G, groups, d)
            if wit is None:
                rejected.add(G)
            else:
                found[G] = wit
                break
        else:
            return r


def essentially_active(f: DcFunction | MaxMinFunction, w: Sequence) -> list[ActivePiece]:
    """Gradients of ``f'(w; ·)`` selected on an open cone, each with a witness."""
    if isinstance(f, McFunction):
        f = DcFunction(f, McFunction.make(Leaf(zeros(f.dim)), f.dim))
    if isinstance(f, DcFunction):
        return _dc_active(f, w)
    return _maxmin_active(f, w)


def clarke_subdiff_brute(f: DcFunction | MaxMinFunction, w: Sequence) -> VPolytope:
    """Clarke subdifferential as the hull of essentially active gradients."""
    if isinstance(f, MaxMinFunction):
        act = _maxmin_active(f, w, hull_only=True)
    else:
        act = essentially_active(f, w)
    return canonicalize(VPolytope(tuple(p.gradient for p in act)))


def clarke_dist_sq(f: DcFunction | MaxMinFunction, w: Sequence) -> Fraction:
    if isinstance(f, MaxMinFunction):
        return _maxmin_dist_sq(f, w)
    return norm_sq(min_norm_point(clarke_subdiff_brute(f, w).vertices))


# ---------------------------------------------------------------------------
# Frechet stationarity

@dataclass(frozen=True)
class FrechetResult:
    stationary: bool
    descent: Vec | None = None  # direction with f'(w; d) < 0 when not stationary

    def __bool__(self) -> bool:
        return self.stationary


def frechet_stationary(f: DcFunction | MaxMinFunction, w: Sequence) -> FrechetResult:
    """Whether 0 is a Frechet subgradient, i.e. ``f'(w; ·) >= 0``."""
    if isinstance(f, McFunction):
        f = DcFunction(f, McFunction.make(Leaf(zeros(f.dim)), f.dim))
    d = f.dim
    if isinstance(f, DcFunction):
        Vg = subdiff_vertices(f.g, w)
        Vh = None
        for b in Vg.vertices:
            if subdiff_contains(f.h, w, b):
                continue
            if Vh is None:
                Vh = subdiff_vertices(f.h, w)
            wit = strict_cone_witness([sub(b, a) for a in Vh.vertices], d)
            return FrechetResult(False, wit)
        return FrechetResult(True)
    fd = maxmin_derivative(f, w)
    groups = [list(dict.fromkeys(neg(fd.pieces[j][0]) for j in g)) for g in fd.groups]
    wit = _disjunctive_cone([], groups, d)
    if wit is None:
        return FrechetResult(True)
    return FrechetResult(False, wit)


def frechet_dist_sq(f: DcFunction, w: Sequence) -> Fraction | None:
    """Squared distance from 0 to the Frechet subdifferential; None when it is empty.

    For DC input the Frechet subdifferential is the intersection of the
    translates ``∂h(w) - b`` over the vertices ``b`` of ``∂g(w)``.  Wolfe's
    method runs with a simplex-based linear oracle over that intersection.
    """
    Vg = subdiff_vertices(f.g, w).vertices
    L = lifted_subdiff(f.h, w)
    d = f.dim
    T = L.nlift
    n = d + len(Vg) * T
    eqs = []
    les = []
    for k, b in enumerate(Vg):
        off = d + k * T
        for a, rhs in L.system.eqs:
            row = [Fraction(0)] * n
            for i in range(d):
                row[i] = a[i]
            for j in range(T):
                row[off + j] = a[d + j]
            eqs.append((row, rhs - dot(a[:d], b)))
        for a, rhs in L.system.les:
            row = [Fraction(0)] * n
            for j in range(T):
                row[off + j] = a[d + j]
            les.append((row, rhs))
    sys = LinearSystem.build(n, eqs=eqs, les=les)
    first = lp_feasible(sys)
    if isinstance(first, Infeasible):
        return None

    def lmo(p: Vec) -> Vec:
        res = lp_optimize(list(p) + [0] * (n - d), sys)
        assert isinstance(res, Optimum)
        return res.point[:d]

    return norm_sq(wolfe(lmo, first.point[:d]).point)
