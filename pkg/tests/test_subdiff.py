import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import rand_dc, rand_mc, rand_point
from pastat.exactsolve import (
    Feasible,
    LinearSystem,
    Optimum,
    dot,
    lp_feasible,
    lp_optimize,
    min_norm_point,
    norm_sq,
)
from pastat.hardgen import Cnf3, ParMaxInstance, gen_dcc, gen_dcf, gen_maxmin_3sat, gen_maxmin_3sat_clarke
from pastat.pafunc import DcFunction, McFunction, dir_deriv, leaf, mx, sm, zero_fn
from pastat.polytope import VPolytope, canonicalize, minkowski_diff
from pastat.subdiff import (
    clarke_dist_sq,
    clarke_subdiff_brute,
    dc_critical_dist_sq,
    equality_set,
    essentially_active,
    frechet_dist_sq,
    frechet_stationary,
    lifted_subdiff,
    subdiff_contains,
    subdiff_vertices,
    transversal_at,
)

seeds = st.integers(0, 2**32 - 1)
relu = McFunction.make(mx(leaf([1]), leaf([0])))
relu_neg = McFunction.make(mx(leaf([-1]), leaf([0])))
abs_ = McFunction.make(mx(leaf([1]), leaf([-1])))
f2 = DcFunction(relu, relu_neg)
E4 = [tuple(1 if k == i else 0 for k in range(4)) for i in range(4)]
comp_h = McFunction.make(mx(*(leaf(v) for v in [(0, 0, 0, 0)] + E4)), 4)
comp_g = McFunction.make(mx(leaf((1, 1, -1, -1)), leaf((0, 0, 0, 0))), 4)


def V(*pts):
    return canonicalize(VPolytope.of(pts))


def lifted_range(h, w, k=0):
    """[min, max] of coordinate k over the projection of the lifted system."""
    L = lifted_subdiff(h, w)
    c = [0] * L.system.nvars
    c[k] = 1
    lo = lp_optimize(c, L.system)
    c[k] = -1
    hi = lp_optimize(c, L.system)
    return lo.value, -hi.value


def in_hull_lp(v, pts):
    n = len(pts)
    eqs = [([p[t] for p in pts], v[t]) for t in range(len(v))] + [([1] * n, 1)]
    ges = [([1 if j == i else 0 for j in range(n)], 0) for i in range(n)]
    return isinstance(lp_feasible(LinearSystem.build(n, eqs=eqs, ges=ges)), Feasible)


# --- lifted representation -------------------------------------------------

def test_lifted_examples():
    assert lifted_range(abs_, [0]) == (-1, 1)
    assert lifted_range(relu, [1]) == (1, 1)
    hF = gen_dcf(ParMaxInstance.of(2, 2, [[1, 0]])).h  # |d|_inf
    V_ = subdiff_vertices(hF, [0, 0])
    assert V_ == V((1, 0), (-1, 0), (0, 1), (0, -1))
    for k in range(2):
        assert lifted_range(hF, [0, 0], k) == (-1, 1)


def test_subdiff_contains_examples():
    assert subdiff_contains(abs_, [0], [F(1, 2)])
    assert not subdiff_contains(abs_, [0], [2])
    hC = gen_dcc(ParMaxInstance.of(2, 2, [[1, 0]])).h
    assert subdiff_contains(hC, [0, 0], [0, 0])
    with pytest.raises(ValueError):
        subdiff_contains(abs_, [0], [0, 0])


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 3))
def test_vertices_equal_projection_of_lift(seed, d):
    rng = random.Random(seed)
    h = rand_mc(rng, d)
    w = rand_point(rng, d)
    verts = subdiff_vertices(h, w).vertices
    for v in verts:
        assert subdiff_contains(h, w, v)
    L = lifted_subdiff(h, w)
    for _ in range(3):
        c = [F(rng.randint(-5, 5)) for _ in range(d)] + [0] * L.nlift
        res = lp_optimize(c, L.system)
        assert isinstance(res, Optimum)
        g = res.point[:d]
        assert in_hull_lp(g, verts)
        assert res.value == min(dot(c[:d], v) for v in verts)


def test_subdiff_vertices_examples():
    assert subdiff_vertices(abs_, [0]).vertices == ((-1,), (1,))
    h = McFunction.make(sm(mx(leaf([1]), leaf([0])), mx(leaf([-1]), leaf([0]))))
    assert subdiff_vertices(h, [0]).vertices == ((-1,), (1,))
    assert subdiff_vertices(comp_h, [0] * 4) == V((0, 0, 0, 0), *E4)
    assert subdiff_vertices(comp_g, [0] * 4) == V((0, 0, 0, 0), (1, 1, -1, -1))


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 3))
def test_support_function_consistency(seed, d):
    rng = random.Random(seed)
    h = rand_mc(rng, d)
    w, u = rand_point(rng, d), rand_point(rng, d)
    assert dir_deriv(h, w, u) == max(dot(u, v) for v in subdiff_vertices(h, w).vertices)


# --- equality sets ---------------------------------------------------------

def test_equality_set_examples():
    assert equality_set(LinearSystem.build(1, les=[([1], 0), ([-1], 0)])) == [0, 1]
    assert equality_set(LinearSystem.build(1, les=[([1], 1)])) == []
    with pytest.raises(ValueError):
        equality_set(LinearSystem.build(1, les=[([1], 0), ([-1], -1)]))


def test_equality_set_of_lifted_abs():
    L = lifted_subdiff(abs_, [0])
    # weights sum to one and are nonnegative, neither weight is forced to zero
    assert len(L.system.eqs) == 2 and equality_set(L.system) == []
    pinned = L.system.with_rows(ges=[([1] + [0] * L.nlift, 1)])
    assert equality_set(pinned) == [1, 2]  # g = 1 forces the second weight to 0


# --- DC-critical distance and transversality -------------------------------

def test_dc_critical_examples():
    assert dc_critical_dist_sq(f2, [0]) == 0
    assert dc_critical_dist_sq(DcFunction(abs_, zero_fn(1)), [0]) == 0
    assert dc_critical_dist_sq(DcFunction(McFunction.make(leaf([1])), zero_fn(1)), [0]) == 1
    with pytest.raises(ValueError):
        dc_critical_dist_sq(f2, [0], method="other")


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_dc_critical_routes_agree(seed):
    rng = random.Random(seed)
    f = rand_dc(rng)
    w = rand_point(rng, f.dim)
    assert dc_critical_dist_sq(f, w, "support") == dc_critical_dist_sq(f, w, "vrep")


def test_transversal_examples():
    h = McFunction.make(mx(leaf([1, 0]), leaf([-1, 0])))
    g = McFunction.make(mx(leaf([0, 1]), leaf([0, -1])))
    for method in ("vrep", "lprep"):
        assert transversal_at(DcFunction(h, g), [0, 0], method)
        assert not transversal_at(DcFunction(abs_, abs_), [0], method)
        assert not transversal_at(DcFunction(comp_h, comp_g), [0] * 4, method)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_transversal_routes_agree(seed):
    rng = random.Random(seed)
    f = rand_dc(rng)
    w = rand_point(rng, f.dim)
    assert transversal_at(f, w, "vrep") == transversal_at(f, w, "lprep")


# --- Clarke and Frechet oracles --------------------------------------------

def test_clarke_brute_examples():
    kink = DcFunction(McFunction.make(mx(leaf([2]), leaf([0]))), relu)
    assert clarke_subdiff_brute(kink, [0]).vertices == ((0,), (1,))
    assert clarke_subdiff_brute(f2, [0]).vertices == ((1,),)
    unsat = Cnf3.of(1, [(1, 1, 1), (-1, -1, -1)])
    assert clarke_subdiff_brute(gen_maxmin_3sat_clarke(unsat), [0]).vertices == ((F(1, 2),),)
    assert clarke_dist_sq(gen_maxmin_3sat_clarke(unsat), [0]) == F(1, 4)


def test_essentially_active_witnesses_select_their_piece():
    kink = DcFunction(McFunction.make(mx(leaf([2]), leaf([0]))), relu)
    for p in essentially_active(kink, [0]):
        t = F(1, 1000)
        quotient = (kink([t * x for x in p.witness]) - kink([0])) / t
        assert quotient == dot(p.gradient, p.witness)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_weak_sum_rule(seed):
    rng = random.Random(seed)
    f = rand_dc(rng)
    w = rand_point(rng, f.dim)
    C = clarke_subdiff_brute(f, w)
    D = minkowski_diff(subdiff_vertices(f.h, w), subdiff_vertices(f.g, w))
    for v in C.vertices:
        assert in_hull_lp(v, D.vertices)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_clarke_support_bounds_directional_derivative(seed):
    rng = random.Random(seed)
    f = rand_dc(rng)
    w, u = rand_point(rng, f.dim), rand_point(rng, f.dim)
    top = max(dot(u, v) for v in clarke_subdiff_brute(f, w).vertices)
    assert top >= dir_deriv(f, w, u)
    convex = DcFunction(f.h, zero_fn(f.dim))
    assert max(dot(u, v) for v in clarke_subdiff_brute(convex, w).vertices) == dir_deriv(convex, w, u)


def test_frechet_examples():
    assert frechet_stationary(DcFunction(abs_, zero_fn(1)), [0])
    res = frechet_stationary(f2, [0])
    assert not res and res.descent is not None and res.descent[0] < 0
    f = gen_dcf(ParMaxInstance.of(2, 1, [[1, 1]]))  # r = 0 < 2 = max l1 norm
    res = frechet_stationary(f, [0, 0])
    assert not res and dir_deriv(f, [0, 0], res.descent) < 0


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_frechet_implies_clarke(seed):
    rng = random.Random(seed)
    f = rand_dc(rng)
    w = rand_point(rng, f.dim)
    res = frechet_stationary(f, w)
    if res:
        assert in_hull_lp((0,) * f.dim, clarke_subdiff_brute(f, w).vertices)
        assert frechet_dist_sq(f, w) == 0
    else:
        assert dir_deriv(f, w, res.descent) < 0
        dist = frechet_dist_sq(f, w)
        assert dist is None or dist > 0


def test_frechet_distance_of_convex_matches_subdifferential():
    h = McFunction.make(mx(leaf([1]), leaf([F(1, 3)])))
    assert frechet_dist_sq(DcFunction(h, zero_fn(1)), [0]) == F(1, 9)
    assert frechet_dist_sq(f2, [0]) == 1
    assert frechet_dist_sq(DcFunction(zero_fn(1), abs_), [0]) is None


@pytest.mark.parametrize("clauses", [[(1, 2, 2)], [(1, -2, 2), (-1, -1, 2)], [(1, 1, 1), (-1, -1, -1)]])
def test_maxmin_distance_routes_agree(clauses):
    f = gen_maxmin_3sat_clarke(Cnf3.of(2, clauses))
    C = clarke_subdiff_brute(f, [0, 0])
    assert clarke_dist_sq(f, [0, 0]) == norm_sq(min_norm_point(C.vertices))


def test_maxmin_frechet_on_unsatisfiable_formula():
    unsat = Cnf3.of(1, [(1, 1, 1), (-1, -1, -1)])
    assert frechet_stationary(gen_maxmin_3sat(unsat), [0])
    sat = Cnf3.of(1, [(1, 1, 1)])
    res = frechet_stationary(gen_maxmin_3sat(sat), [0])
    assert not res and dir_deriv(gen_maxmin_3sat(sat), [0], res.descent) < 0


def test_clarke_of_mc_input_is_its_subdifferential():
    h = McFunction.make(sm(mx(leaf([1, 0]), leaf([0, 1])), mx(leaf([0, 0]), leaf([1, 1]))))
    assert clarke_subdiff_brute(DcFunction(h, zero_fn(2)), [0, 0]) == subdiff_vertices(h, [0, 0])
