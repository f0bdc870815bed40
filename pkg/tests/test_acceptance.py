"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the summary lines.
Tolerances are pinned here: every comparison is exact, and the time
budgets below are the only slack.
"""

from __future__ import annotations

import random
import time
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, permutations, product

from helpers import rand_dc, rand_leaf, rand_point
from pastat.apps import LabeledDataset, general_position, relu2_qualification
from pastat.butterfly import iteration_bound, rnd, rst
from pastat.exactsolve import Infeasible, norm_sq, sub, vec
from pastat.hardgen import Cnf3, gen_dcf, gen_maxmin_3sat_clarke, random_parmax
from pastat.pafunc import INF, DcFunction, MaxNode, McFunction, SumNode, delta_sep, leaf, norm_upper
from pastat.polytope import (
    VPolytope,
    Zonotope,
    canonicalize,
    compatible,
    minkowski_diff,
    zonotope_transversal,
    zonotope_vertices,
)
from pastat.sgm import SgmConfig, run
from pastat.subdiff import clarke_dist_sq, clarke_subdiff_brute, frechet_stationary, subdiff_vertices, transversal_at

# pinned budgets, seconds
BUDGET_FIXTURE = 1.0
BUDGET_DC_EQUIV = 60.0
BUDGET_3SAT = 120.0

# pinned sample sizes
N_DC_EQUIV = 200
N_ZONOTOPE = 200
N_PARMAX = 200
N_NET = 100
N_TERMINATION = 100
N_QUAL = 100


def report(n: int, name: str, ok: bool, detail: str = "") -> None:
    print(f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))


def V(*pts) -> VPolytope:
    return canonicalize(VPolytope.of(pts))


def relu(x, scale=1) -> MaxNode:
    return MaxNode((leaf([scale * v for v in x]), leaf([0] * len(x))))


# ---------------------------------------------------------------------------

def test_criterion_01_sum_rule_failure():
    t0 = time.perf_counter()
    h = McFunction.make(SumNode((relu([1], 2),)), 1)
    g = McFunction.make(SumNode((relu([1]),)), 1)
    f = DcFunction(h, g)
    clarke = clarke_subdiff_brute(f, [0])
    Vh, Vg = subdiff_vertices(h, [0]), subdiff_vertices(g, [0])
    diff = canonicalize(minkowski_diff(Vh, Vg))
    comp = compatible(Vh, Vg).compatible
    elapsed = time.perf_counter() - t0
    ok = clarke == V([0], [1]) and diff == V([-1], [2]) and comp is False and elapsed < BUDGET_FIXTURE
    report(1, "sum-rule failure fixture", ok, f"{elapsed:.3f}s")
    assert clarke == V([0], [1])
    assert diff == V([-1], [2])
    assert comp is False
    assert elapsed < BUDGET_FIXTURE


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_02_worked_polytopes():
    e = [tuple(1 if k == i else 0 for k in range(4)) for i in range(4)]
    y = (1, 1, -1, -1)
    simplex = V((0, 0, 0, 0), *e)
    seg = V((0, 0, 0, 0), y)

    comp2, t1 = _timed(lambda: compatible(V((0, 0), (1, 0)), V((0, 0), (0, 1))))
    incomp, t2 = _timed(lambda: compatible(V((0, 0), (-1, -1), (1, -1)), V((0, 0), (0, Fraction(-1, 2)))))
    comp4, t3 = _timed(lambda: compatible(simplex, seg))

    h = McFunction.make(MaxNode(tuple(leaf(v) for v in [(0, 0, 0, 0)] + e)), 4)
    g = McFunction.make(relu(y), 4)
    f = DcFunction(h, g)

    def subd_pair():
        Vh, Vg = subdiff_vertices(h, [0] * 4), subdiff_vertices(g, [0] * 4)
        return Vh, Vg, compatible(Vh, Vg).compatible, transversal_at(f, [0] * 4)

    (Vh, Vg, c_subd, t_subd), t4 = _timed(subd_pair)
    violation = ((Fraction(0), Fraction(0)), (Fraction(0), Fraction(-1, 2)))
    ok = (
        comp2.compatible and not incomp.compatible and violation in incomp.violations and comp4.compatible
        and Vh == simplex and Vg == seg and c_subd and not t_subd
        and max(t1, t2, t3, t4) < BUDGET_FIXTURE
    )
    report(2, "worked polytope examples", ok, f"max {max(t1, t2, t3, t4):.3f}s")
    assert comp2.compatible
    assert not incomp.compatible and violation in incomp.violations
    assert comp4.compatible
    assert Vh == simplex and Vg == seg
    assert c_subd is True and t_subd is False
    assert max(t1, t2, t3, t4) < BUDGET_FIXTURE


def test_criterion_03_compatibility_iff_exact_sum_rule():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    mismatches = []
    compat_count = 0
    for _ in range(N_DC_EQUIV):
        f = rand_dc(rng)
        w = [0] * f.dim
        Vh, Vg = subdiff_vertices(f.h, w), subdiff_vertices(f.g, w)
        c = compatible(Vh, Vg).compatible
        exact = clarke_subdiff_brute(f, w) == canonicalize(minkowski_diff(Vh, Vg))
        compat_count += c
        if c != exact:
            mismatches.append(f)
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < BUDGET_DC_EQUIV
    report(3, "compatible <=> Clarke = dh - dg", ok,
           f"{N_DC_EQUIV} instances, {compat_count} compatible, {len(mismatches)} mismatches, {elapsed:.1f}s")
    assert not mismatches
    assert 0 < compat_count < N_DC_EQUIV
    assert elapsed < BUDGET_DC_EQUIV


def test_criterion_04_zonotope_converse():
    rng = random.Random(7)
    mismatches = 0
    both = [0, 0]
    for _ in range(N_ZONOTOPE):
        d = rng.randint(1, 4)

        def zono():
            k = rng.randint(0, 3)
            return Zonotope.of([0] * d, [[rng.randint(-2, 2) for _ in range(d)] for _ in range(k)])

        Z1, Z2 = zono(), zono()
        c = compatible(zonotope_vertices(Z1), zonotope_vertices(Z2)).compatible
        t = zonotope_transversal(Z1, Z2)
        both[c] += 1
        mismatches += c != t
    ok = mismatches == 0
    report(4, "zonotopes: compatible <=> transversal", ok,
           f"{N_ZONOTOPE} pairs, {both[1]} compatible, {mismatches} mismatches")
    assert mismatches == 0
    assert both[0] > 0 and both[1] > 0


def _all_cnfs(m: int):
    lits = [s * v for v in range(1, m + 1) for s in (1, -1)]
    clauses = list(combinations_with_replacement(sorted(lits, key=lambda l: (abs(l), -l)), 3))
    for k in (1, 2, 3):
        yield from combinations(clauses, k)


def _canonical(m: int, cnf: tuple) -> tuple:
    """Orbit representative under the maps that keep the Clarke distance of f_C.

    Flipping the polarity of any variable and permuting variables 2..m move
    f_C by an orthogonal change of coordinates (flipping variable 1 also
    negates the argument), so satisfiability and distance are shared.
    """
    best = None
    for perm in permutations(range(2, m + 1)):
        relabel = {1: 1, **{v: p for v, p in zip(range(2, m + 1), perm)}}
        for signs in product((1, -1), repeat=m):
            img = tuple(sorted(
                tuple(sorted((signs[abs(l) - 1] * relabel[abs(l)] * (1 if l > 0 else -1) for l in c)))
                for c in cnf
            ))
            if best is None or img < best:
                best = img
    return best


def test_criterion_05_3sat_ground_truth():
    t0 = time.perf_counter()
    cache: dict = {}
    total = 0
    mismatches = []
    bad_dist = []
    for m in (1, 2, 3):
        for cnf in _all_cnfs(m):
            total += 1
            key = (m, _canonical(m, cnf))
            if key not in cache:
                f = gen_maxmin_3sat_clarke(Cnf3.of(m, key[1]))
                cache[key] = clarke_dist_sq(f, [0] * m)
            d2 = cache[key]
            sat = Cnf3.of(m, cnf).satisfiable()
            if sat != (d2 == 0):
                mismatches.append((m, cnf, d2))
            if not sat and d2 != Fraction(1, 4):
                bad_dist.append((m, cnf, d2))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and not bad_dist and elapsed < BUDGET_3SAT
    report(5, "3SAT: satisfiable <=> 0 in Clarke(f_C, 0); unsat dist^2 = 1/4", ok,
           f"{total} CNFs, {len(cache)} orbit representatives, {len(mismatches) + len(bad_dist)} failures, "
           f"{elapsed:.1f}s")
    assert not mismatches
    assert not bad_dist
    assert elapsed < BUDGET_3SAT


def test_criterion_06_parmax_ground_truth():
    rng = random.Random(11)
    mismatches = 0
    yes = 0
    for _ in range(N_PARMAX):
        n = rng.randint(1, 4)
        m = rng.randint(1, min(3, n))
        inst = random_parmax(n, m, rng)
        stationary = frechet_stationary(gen_dcf(inst), [0] * n).stationary
        brute_no = inst.max_l1() < inst.alpha
        yes += not brute_no
        mismatches += stationary != brute_no
    ok = mismatches == 0
    report(6, "PAR-MAX: Frechet stationary <=> max l1 < alpha", ok,
           f"{N_PARMAX} instances, {yes} yes-instances, {mismatches} mismatches")
    assert mismatches == 0
    assert 0 < yes < N_PARMAX


def _kinked_dc(rng: random.Random):
    """Random DC pair with several pieces tied at a random reference point."""
    d = rng.randint(1, 3)
    w_star = rand_point(rng, d)
    pool = list(range(-3, 4))

    def mc():
        shape = rng.choice([(2,), (3,), (2, 2), (3, 2), (2, 1)])
        return McFunction.make(
            SumNode(tuple(MaxNode(tuple(rand_leaf(rng, d, w_star, pool) for _ in range(k))) for k in shape)), d
        )

    return DcFunction(mc(), mc()), w_star


def _perturb(rng: random.Random, w, radius: Fraction):
    """A rational point within ``radius`` of ``w``."""
    v = [rng.randint(-5, 5) for _ in w]
    if not any(v):
        return tuple(w)
    s = radius * Fraction(rng.randint(1, 8), 8) / norm_upper(vec(v))
    return tuple(a + s * b for a, b in zip(w, v))


def test_criterion_07_net_capture():
    rng = random.Random(5)
    failures = []
    for _ in range(N_NET):
        f, w_star = _kinked_dc(rng)
        ds = delta_sep(f, w_star)
        cap = Fraction(1) if ds == INF else min(Fraction(1), 2 * ds)
        delta = cap * Fraction(rng.randint(1, 4), 4)
        w = _perturb(rng, w_star, delta)
        assert norm_sq(sub(w, w_star)) <= delta * delta
        wh = rnd(f, w, delta)
        if isinstance(wh, Infeasible):
            failures.append((f, w_star, w, delta, "infeasible"))
            continue
        if norm_sq(sub(wh, w)) > delta * delta:
            failures.append((f, w_star, w, delta, "too far"))
            continue
        if clarke_subdiff_brute(f, wh) != clarke_subdiff_brute(f, w_star):
            failures.append((f, w_star, w, delta, "subdifferential differs"))
    ok = not failures
    report(7, "net capture: Clarke(rnd(w)) = Clarke(w*)", ok, f"{N_NET} fixtures, {len(failures)} failures")
    assert not failures


def test_criterion_08_finite_termination():
    rng = random.Random(8)
    moved = []
    over = []
    for i in range(N_TERMINATION):
        f, w_star = _kinked_dc(rng)
        w = w_star if i % 2 == 0 else _perturb(rng, w_star, Fraction(1, 2))
        ds = delta_sep(f, w)
        delta = Fraction(1) if ds == INF else 2 * ds * Fraction(rng.randint(1, 4), 4)
        if rnd(f, w, delta) != tuple(w):
            moved.append((f, w, delta))
        big = Fraction(rng.randint(1, 8), rng.randint(1, 8))
        v = rst(f, w, Fraction(rng.randint(0, 2), 4), big, oracle="dc-critical")
        if v.iterations > iteration_bound(big, ds):
            over.append((f, w, big, v.iterations))
    ok = not moved and not over
    report(8, "finite termination: rnd fixes w; RST within iteration bound", ok,
           f"{N_TERMINATION} points, {len(moved)} moved, {len(over)} over bound")
    assert not moved
    assert not over


def test_criterion_09_stopping_rule():
    absx = DcFunction(McFunction.make(MaxNode((leaf([1]), leaf([-1]))), 1), McFunction.make(leaf([0]), 1))
    cfg = SgmConfig(step=Fraction(1, 4), eps=0, delta=Fraction(1, 10), max_iter=100)
    tr = run(absx, [1], cfg)
    halted = tr.certificate == (Fraction(0),) and tr.halted_at is not None and tr.halted_at <= 16

    slope = DcFunction(McFunction.make(leaf([1]), 1), McFunction.make(leaf([0]), 1))
    tr2 = run(slope, [0], cfg)
    never = tr2.certificate is None and len(tr2.checks) == 101 and all(v.verdict != "true" for _, v in tr2.checks)
    ok = halted and never
    report(9, "stopping rule: |x| halts with 0, affine never certifies", ok,
           f"|x| halted at {tr.halted_at}, affine checks {len(tr2.checks)}")
    assert halted
    assert never


def test_criterion_10_qualification_chain():
    d1 = LabeledDataset.of([(0, 2, 0, 1), (2, 0, 2, 1), (1, 1, 1, 1), (1, 0, -1, 1)])
    r1 = relu2_qualification(d1, [((0, 0, 0, 0), 1)], [1, 1, 1, -1])
    d2 = LabeledDataset.of([(0, -2, 1), (0, -1, 1), (1, 0, 1), (0, 1, 1)])
    r2 = relu2_qualification(d2, [((1, 1, -1), 1)], [1, 1, 1, -1])
    fixtures_ok = (r1.span_condition and not r1.surjectivity) and (r2.surjectivity and not r2.general_position)

    rng = random.Random(10)
    broken = 0
    seen = {"gp": 0, "surj": 0, "span": 0}
    for _ in range(N_QUAL):
        d = rng.randint(1, 3)
        n = rng.randint(d + 1, d + 4)
        feats = [[rng.randint(-2, 2) for _ in range(d)] for _ in range(n)]
        data = LabeledDataset.augment(feats)
        units = []
        for _ in range(rng.randint(1, 2)):
            wt = [rng.randint(-2, 2) for _ in range(d)]
            if not any(wt):
                wt[0] = 1
            # put the kink through one data point so index sets are non-empty
            anchor = rng.choice(feats)
            b = -sum(a * c for a, c in zip(wt, anchor))
            units.append((wt + [b], rng.choice([1, -1, 2])))
        p = [rng.choice([-1, 1, 2, Fraction(1, 2)]) for _ in range(n)]
        rep = relu2_qualification(data, units, p)
        gp = general_position(feats)
        seen["gp"] += gp
        seen["surj"] += bool(rep.surjectivity)
        seen["span"] += rep.span_condition
        if (gp and not rep.surjectivity) or (rep.surjectivity and not rep.span_condition):
            broken += 1
    ok = fixtures_ok and broken == 0
    report(10, "qualification chain GP => surjectivity => span", ok,
           f"fixtures {'ok' if fixtures_ok else 'wrong'}, {N_QUAL} random datasets, {broken} violations, counts {seen}")
    assert fixtures_ok
    assert broken == 0
