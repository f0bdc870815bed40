"""Exact rational linear algebra and optimisation.

Everything here works on ``fractions.Fraction`` values and never rounds.
The simplex method runs on an integer tableau with fraction-free (Bareiss
style) pivoting, which keeps every entry an integer and avoids the gcd
traffic of a Fraction tableau.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Callable, Iterable, Sequence

Q = Fraction
Vec = tuple  # tuple[Fraction, ...]


# ---------------------------------------------------------------------------
# scalars and vectors

def q(x) -> Fraction:
    """Parse an int, Fraction, ``"p/q"`` string or decimal literal exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {x!r}") from exc
    if isinstance(x, float):
        # floats only reach us through permissive callers; go through repr so
        # 0.1 means 1/10 rather than its binary expansion
        return Fraction(repr(x))
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def vec(xs: Iterable) -> Vec:
    return tuple(q(x) for x in xs)


def zeros(n: int) -> Vec:
    return (Fraction(0),) * n


def unit(n: int, i: int, scale=1) -> Vec:
    return tuple(Fraction(scale) if k == i else Fraction(0) for k in range(n))


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def add(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vec:
    return tuple(x + y for x, y in zip(a, b))


def sub(a: Sequence[Fraction], b: Sequence[Fraction]) -> Vec:
    return tuple(x - y for x, y in zip(a, b))


def scale(c, a: Sequence[Fraction]) -> Vec:
    return tuple(c * x for x in a)


def neg(a: Sequence[Fraction]) -> Vec:
    return tuple(-x for x in a)


def norm_sq(a: Sequence[Fraction]) -> Fraction:
    return dot(a, a)


def fmt(x: Fraction) -> str:
    """Serialise a rational as ``"p/q"`` or a bare integer string."""
    x = q(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _int_row(row: Sequence[Fraction]) -> list[int]:
    den = 1
    for x in row:
        den = lcm(den, x.denominator)
    return [x.numerator * (den // x.denominator) for x in row]


# ---------------------------------------------------------------------------
# rank and small dense solves

def rank(M: Sequence[Sequence]) -> int:
    """Exact rank by fraction-free Gaussian elimination."""
    rows = [_int_row(vec(r)) for r in M]
    rows = [r for r in rows if any(r)]
    if not rows:
        return 0
    ncols = len(rows[0])
    if any(len(r) != ncols for r in rows):
        raise ValueError("ragged matrix")
    m = len(rows)
    r = 0
    prev = 1
    for c in range(ncols):
        piv = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        p = rows[r][c]
        pr = rows[r]
        for i in range(r + 1, m):
            ri = rows[i]
            f = ri[c]
            for j in range(c + 1, ncols):
                ri[j] = (p * ri[j] - f * pr[j]) // prev
            ri[c] = 0
        prev = p
        r += 1
        if r == m:
            break
    return r


def span_intersection_trivial(A: Sequence[Sequence], B: Sequence[Sequence]) -> bool:
    """True iff span(rows A) and span(rows B) meet only at the origin."""
    A = [vec(r) for r in A]
    B = [vec(r) for r in B]
    dims = {len(r) for r in A + B}
    if len(dims) > 1:
        raise ValueError("dimension mismatch between row sets")
    return rank(A + B) == rank(A) + rank(B)


def solve_square(M: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction]:
    """Solve a nonsingular square system by Gauss-Jordan elimination."""
    n = len(M)
    aug = [list(vec(M[i])) + [q(rhs[i])] for i in range(n)]
    for c in range(n):
        piv = next((i for i in range(c, n) if aug[i][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        aug[c], aug[piv] = aug[piv], aug[c]
        p = aug[c][c]
        rowc = [x / p for x in aug[c]]
        aug[c] = rowc
        for i in range(n):
            if i != c and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], rowc)]
    return [aug[i][n] for i in range(n)]


def independent_rows(rows: Sequence[Sequence[Fraction]]) -> list[int]:
    """Indices of a maximal linearly independent subset, greedy in order."""
    keep: list[int] = []
    basis: list[Vec] = []
    for i, r in enumerate(rows):
        if rank(basis + [tuple(r)]) > len(basis):
            basis.append(tuple(r))
            keep.append(i)
    return keep


# ---------------------------------------------------------------------------
# linear systems and LP

@dataclass(frozen=True)
class LinearSystem:
    """Rows ``a·x = b`` (``eqs``) and ``a·x <= b`` (``les``) over free variables."""

    nvars: int
    eqs: tuple = ()
    les: tuple = ()

    @staticmethod
    def build(nvars: int, eqs=(), les=(), ges=()) -> "LinearSystem":
        def norm(rows):
            out = []
            for a, b in rows:
                a = vec(a)
                if len(a) != nvars:
                    raise ValueError(f"row has {len(a)} coefficients, expected {nvars}")
                out.append((a, q(b)))
            return out

        le = norm(les) + [(neg(a), -b) for a, b in norm(ges)]
        return LinearSystem(nvars, tuple(norm(eqs)), tuple(le))

    def with_rows(self, eqs=(), les=(), ges=()) -> "LinearSystem":
        extra = LinearSystem.build(self.nvars, eqs, les, ges)
        return LinearSystem(self.nvars, self.eqs + extra.eqs, self.les + extra.les)

    def satisfied_by(self, x: Sequence[Fraction]) -> bool:
        return all(dot(a, x) == b for a, b in self.eqs) and all(dot(a, x) <= b for a, b in self.les)


@dataclass(frozen=True)
class Feasible:
    point: Vec


@dataclass(frozen=True)
class Infeasible:
    """Farkas certificate: ``y_eq`` free, ``y_le >= 0``, ``y^T A = 0`` and ``y^T b < 0``."""

    y_eq: Vec = ()
    y_le: Vec = ()

    def __bool__(self) -> bool:  # an infeasibility flag reads as falsy
        return False


@dataclass(frozen=True)
class Optimum:
    point: Vec
    value: Fraction


@dataclass(frozen=True)
class Unbounded:
    point: Vec
    ray: Vec


def check_farkas(sys: LinearSystem, cert: Infeasible) -> bool:
    if any(y < 0 for y in cert.y_le):
        return False
    comb = [Fraction(0)] * sys.nvars
    rhs = Fraction(0)
    for y, (a, b) in list(zip(cert.y_eq, sys.eqs)) + list(zip(cert.y_le, sys.les)):
        if y:
            for k in range(sys.nvars):
                comb[k] += y * a[k]
            rhs += y * b
    return all(c == 0 for c in comb) and rhs < 0


class _Tableau:
    """Integer simplex tableau in standard form ``A x = b, x >= 0``.

    Entries stored in ``T`` are the true tableau values times ``den``.
    """

    def __init__(self, rows: list[list[int]], rhs: list[int], ncols: int):
        m = len(rows)
        self.m = m
        self.n = ncols + m  # structural columns then one artificial per row
        self.first_art = ncols
        self.T = [rows[i] + [1 if k == i else 0 for k in range(m)] + [rhs[i]] for i in range(m)]
        self.basis = [ncols + i for i in range(m)]
        self.den = 1
        obj = [0] * (self.n + 1)
        for i in range(m):
            row = self.T[i]
            for j in range(ncols):
                obj[j] -= row[j]
            obj[self.n] -= row[self.n]
        self.obj = obj

    def pivot(self, r: int, c: int) -> None:
        T = self.T
        pr = T[r]
        p = pr[c]
        den = self.den
        width = self.n + 1
        for i in range(self.m):
            if i == r:
                continue
            row = T[i]
            f = row[c]
            if f == 0:
                if p != den:
                    T[i] = [(p * x) // den for x in row]
                continue
            T[i] = [(p * row[j] - f * pr[j]) // den for j in range(width)]
        f = self.obj[c]
        o = self.obj
        self.obj = [(p * o[j] - f * pr[j]) // den for j in range(width)]
        self.den = p
        self.basis[r] = c
        if p < 0:
            self.T = [[-x for x in row] for row in self.T]
            self.obj = [-x for x in self.obj]
            self.den = -p

    def run(self, allowed: Callable[[int], bool]) -> str:
        """Bland's rule minimisation; returns 'optimal' or 'unbounded:<col>'."""
        T = self.T
        while True:
            T = self.T
            c = next((j for j in range(self.n) if self.obj[j] < 0 and allowed(j)), None)
            if c is None:
                return "optimal"
            best = None
            for i in range(self.m):
                a = T[i][c]
                if a > 0:
                    num = T[i][self.n]
                    if best is None:
                        best = i
                        continue
                    bn, ba = T[best][self.n], T[best][c]
                    lhs, rhs_ = num * ba, bn * a
                    if lhs < rhs_ or (lhs == rhs_ and self.basis[i] < self.basis[best]):
                        best = i
            if best is None:
                return f"unbounded:{c}"
            self.pivot(best, c)

    def values(self) -> list[Fraction]:
        x = [Fraction(0)] * self.n
        for i, b in enumerate(self.basis):
            x[b] = Fraction(self.T[i][self.n], self.den)
        return x


class _StdForm:
    """Translate a LinearSystem (free variables) into ``A x = b, x >= 0``."""

    def __init__(self, sys: LinearSystem):
        self.sys = sys
        n = sys.nvars
        nle = len(sys.les)
        self.ncols = 2 * n + nle
        rows: list[list[int]] = []
        rhs: list[int] = []
        self.sigma: list[int] = []
        self.lam: list[int] = []
        all_rows = [(a, b, None) for a, b in sys.eqs] + [(a, b, k) for k, (a, b) in enumerate(sys.les)]
        for a, b, slack in all_rows:
            full = list(a) + [-x for x in a] + [Fraction(0)] * nle
            if slack is not None:
                full[2 * n + slack] = Fraction(1)
            full.append(b)
            sigma = -1 if b < 0 else 1
            ints = _int_row(full)
            den = 1
            for x in full:
                den = lcm(den, x.denominator)
            ints = [sigma * v for v in ints]
            rows.append(ints[:-1])
            rhs.append(ints[-1])
            self.sigma.append(sigma)
            self.lam.append(den)
        self.tab = _Tableau(rows, rhs, self.ncols)

    def phase1(self) -> Infeasible | None:
        tab = self.tab
        tab.run(lambda j: True)
        if tab.obj[tab.n] != 0:
            # dual multipliers y_i = 1 - reduced cost of artificial i
            u = []
            for i in range(tab.m):
                y = 1 - Fraction(tab.obj[tab.first_art + i], tab.den)
                u.append(-(y * self.sigma[i] * self.lam[i]))
            ne = len(self.sys.eqs)
            cert = Infeasible(tuple(u[:ne]), tuple(u[ne:]))
            assert check_farkas(self.sys, cert), "internal error: bad Farkas certificate"
            return cert
        # drive zero-level artificials out of the basis where possible
        for r in range(tab.m):
            if tab.basis[r] >= tab.first_art:
                c = next((j for j in range(tab.first_art) if tab.T[r][j] != 0), None)
                if c is not None:
                    tab.pivot(r, c)
        return None

    def point(self) -> Vec:
        x = self.tab.values()
        n = self.sys.nvars
        return tuple(x[k] - x[n + k] for k in range(n))

    def set_objective(self, c: Sequence[Fraction]) -> None:
        tab = self.tab
        n = self.sys.nvars
        full = list(c) + [-x for x in c] + [Fraction(0)] * (tab.n - 2 * n)
        ints = _int_row(full + [Fraction(0)])[:-1]
        obj = [v * tab.den for v in ints] + [0]
        for i, b in enumerate(tab.basis):
            cb = ints[b]
            if cb:
                row = tab.T[i]
                for j in range(tab.n + 1):
                    obj[j] -= cb * row[j]
        tab.obj = obj


def lp_feasible(sys: LinearSystem) -> Feasible | Infeasible:
    """Find a basic feasible point or return an exact Farkas certificate."""
    std = _StdForm(sys)
    cert = std.phase1()
    if cert is not None:
        return cert
    x = std.point()
    assert sys.satisfied_by(x)
    return Feasible(x)


def lp_optimize(obj: Sequence, sys: LinearSystem) -> Optimum | Infeasible | Unbounded:
    """Minimise ``obj·x`` over the system with Bland's rule."""
    c = vec(obj)
    if len(c) != sys.nvars:
        raise ValueError("objective dimension mismatch")
    std = _StdForm(sys)
    cert = std.phase1()
    if cert is not None:
        return cert
    std.set_objective(c)
    tab = std.tab
    status = tab.run(lambda j: j < tab.first_art)
    x = std.point()
    if status.startswith("unbounded"):
        col = int(status.split(":")[1])
        direction = [Fraction(0)] * tab.n
        direction[col] = Fraction(1)
        for i, b in enumerate(tab.basis):
            direction[b] = -Fraction(tab.T[i][col], tab.den)
        n = sys.nvars
        ray = tuple(direction[k] - direction[n + k] for k in range(n))
        return Unbounded(x, ray)
    return Optimum(x, dot(c, x))


# ---------------------------------------------------------------------------
# minimum-norm points (Wolfe)

def _affine_minimizer(S: list[Vec]) -> list[Fraction]:
    """Weights (summing to one) of the min-norm point of aff(S)."""
    k = len(S)
    if k == 1:
        return [Fraction(1)]
    s0 = S[0]
    D = [sub(s, s0) for s in S[1:]]
    G = [[dot(D[i], D[j]) for j in range(k - 1)] for i in range(k - 1)]
    rhs = [-dot(D[i], s0) for i in range(k - 1)]
    alpha = solve_square(G, rhs)
    return [1 - sum(alpha, Fraction(0))] + alpha


@dataclass(frozen=True)
class MinNorm:
    point: Vec
    support: tuple  # atoms with positive weight
    weights: tuple


def wolfe(lmo: Callable[[Vec], Vec], start: Vec, max_iter: int = 100_000) -> MinNorm:
    """Wolfe's min-norm-point method driven by a linear minimisation oracle.

    ``lmo(p)`` must return a point of the set minimising ``p·v``.  The set
    is the convex hull of the finitely many points the oracle can return.
    """
    S = [tuple(start)]
    lam = [Fraction(1)]
    x = S[0]
    for _ in range(max_iter):
        v = tuple(lmo(x))
        xx = dot(x, x)
        if dot(x, v) >= xx:
            return MinNorm(x, tuple(S), tuple(lam))
        if v in S:
            raise RuntimeError("min-norm oracle returned a corral point without progress")
        S.append(v)
        lam.append(Fraction(0))
        while True:
            mu = _affine_minimizer(S)
            if all(m > 0 for m in mu):
                lam = mu
                break
            theta = min(lam[i] / (lam[i] - mu[i]) for i in range(len(S)) if mu[i] <= 0)
            lam = [(1 - theta) * lam[i] + theta * mu[i] for i in range(len(S))]
            keep = [i for i in range(len(S)) if lam[i] > 0]
            S = [S[i] for i in keep]
            lam = [lam[i] for i in keep]
        dim = len(x)
        x = tuple(sum((lam[i] * S[i][t] for i in range(len(S))), Fraction(0)) for t in range(dim))
    raise RuntimeError("min-norm iteration limit reached")


def _argmin_dot(points: Sequence[Vec]) -> Callable[[Vec], Vec]:
    def lmo(p: Vec) -> Vec:
        best = points[0]
        bv = dot(p, best)
        for v in points[1:]:
            t = dot(p, v)
            if t < bv:
                best, bv = v, t
        return best

    return lmo


def min_norm_point(points: Sequence[Sequence]) -> Vec:
    """Exact Euclidean min-norm point of conv(points)."""
    pts = [vec(p) for p in points]
    if not pts:
        raise ValueError("min-norm point of an empty polytope")
    return min_norm_detail(pts).point


def min_norm_detail(points: Sequence[Vec]) -> MinNorm:
    """Wolfe's method on an explicit point list, run on integer coordinates.

    The points are scaled by a common denominator first; the min-norm point
    scales along with them, and integer dot products are much cheaper than
    Fraction ones.
    """
    pts = list(dict.fromkeys(tuple(p) for p in points))
    P, den = integer_points(pts)
    S, lam = _wolfe_int(P)
    dim = len(P[0])
    X, D = _combine(P, S, lam)
    point = tuple(Fraction(X[t], D * den) for t in range(dim))
    return MinNorm(point, tuple(pts[i] for i in S), tuple(lam))


def integer_points(points: Sequence[Sequence[Fraction]]) -> tuple[list[tuple[int, ...]], int]:
    """Points scaled by their common denominator, and that denominator."""
    den = 1
    for p in points:
        for x in p:
            den = lcm(den, x.denominator)
    return [tuple(x.numerator * (den // x.denominator) for x in p) for p in points], den


def origin_in_hull_int(P: Sequence[tuple[int, ...]]) -> bool:
    """Whether 0 lies in the convex hull of integer points."""
    S, lam = _wolfe_int(list(P))
    X, _ = _combine(list(P), S, lam)
    return not any(X)


def _affine_minimizer_int(S: list[tuple[int, ...]]) -> list[Fraction]:
    """Integer-data version of ``_affine_minimizer`` using fraction-free elimination."""
    k = len(S)
    if k == 1:
        return [Fraction(1)]
    s0 = S[0]
    D = [[a - b for a, b in zip(s, s0)] for s in S[1:]]
    n = k - 1
    M = [[sum(x * y for x, y in zip(D[i], D[j])) for j in range(n)] + [-sum(x * y for x, y in zip(D[i], s0))]
         for i in range(n)]
    prev = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        M[c], M[piv] = M[piv], M[c]
        p = M[c][c]
        for i in range(c + 1, n):
            f = M[i][c]
            M[i] = [(p * M[i][j] - f * M[c][j]) // prev for j in range(n + 1)]
        prev = p
    alpha = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = Fraction(M[i][n]) - sum((M[i][j] * alpha[j] for j in range(i + 1, n)), Fraction(0))
        alpha[i] = acc / M[i][i]
    return [1 - sum(alpha, Fraction(0))] + alpha


def _combine(P: list[tuple[int, ...]], S: list[int], lam: list[Fraction]) -> tuple[list[int], int]:
    D = 1
    for m in lam:
        D = lcm(D, m.denominator)
    dim = len(P[0])
    X = [0] * dim
    for i, m in zip(S, lam):
        c = m.numerator * (D // m.denominator)
        row = P[i]
        for t in range(dim):
            X[t] += c * row[t]
    return X, D


def _wolfe_int(P: list[tuple[int, ...]], max_iter: int = 100_000) -> tuple[list[int], list[Fraction]]:
    start = min(range(len(P)), key=lambda i: sum(v * v for v in P[i]))
    S = [start]
    lam = [Fraction(1)]
    for _ in range(max_iter):
        X, D = _combine(P, S, lam)
        xx = sum(v * v for v in X)
        best, bv = None, None
        for i, row in enumerate(P):
            t = sum(a * b for a, b in zip(X, row))
            if bv is None or t < bv:
                best, bv = i, t
        if bv * D >= xx:
            return S, lam
        if best in S:
            raise RuntimeError("min-norm oracle returned a corral point without progress")
        S.append(best)
        lam.append(Fraction(0))
        while True:
            mu = _affine_minimizer_int([P[i] for i in S])
            if all(m > 0 for m in mu):
                lam = mu
                break
            theta = min(lam[i] / (lam[i] - mu[i]) for i in range(len(S)) if mu[i] <= 0)
            lam = [(1 - theta) * lam[i] + theta * mu[i] for i in range(len(S))]
            keep = [i for i in range(len(S)) if lam[i] > 0]
            S = [S[i] for i in keep]
            lam = [lam[i] for i in keep]
    raise RuntimeError("min-norm iteration limit reached")


def strict_cone_witness(rows: Sequence[Vec], dim: int) -> Vec | None:
    """Solve ``r·d >= 1`` for every row ``r``, or return None.

    By Gordan's alternative the system is solvable iff 0 is not in the
    convex hull of the rows.  When it is not, the min-norm point ``p``
    satisfies ``r·p >= |p|^2`` for every row, so ``p/|p|^2`` is a witness.
    """
    if not rows:
        return zeros(dim)
    p = min_norm_detail(list(rows)).point
    pp = dot(p, p)
    if pp == 0:
        return None
    return tuple(x / pp for x in p)


# ---------------------------------------------------------------------------
# projection onto a polyhedron (primal active-set QP)

def project_point(P: LinearSystem, w: Sequence, max_iter: int = 10_000) -> Vec | Infeasible:
    """Exact Euclidean projection of ``w`` onto ``P`` or an Infeasible flag."""
    w = vec(w)
    n = P.nvars
    if len(w) != n:
        raise ValueError("point dimension mismatch")
    if P.satisfied_by(w):
        return w
    start = lp_feasible(P)
    if isinstance(start, Infeasible):
        return start
    x = start.point
    eq_rows = [a for a, _ in P.eqs]
    work_eq = [eq_rows[i] for i in independent_rows(eq_rows)]
    work: list[int] = []  # active inequality indices, kept independent of the rest
    les = P.les
    for _ in range(max_iter):
        A = work_eq + [les[i][0] for i in work]
        r = sub(w, x)
        if A:
            G = [[dot(a, b) for b in A] for a in A]
            y = solve_square(G, [dot(a, r) for a in A])
            p = sub(r, tuple(sum((y[k] * A[k][t] for k in range(len(A))), Fraction(0)) for t in range(n)))
        else:
            y = []
            p = r
        if all(c == 0 for c in p):
            mult = y[len(work_eq):]
            neg_idx = [k for k, m in enumerate(mult) if m < 0]
            if not neg_idx:
                return x
            worst = min(neg_idx, key=lambda k: (mult[k], work[k]))
            work.pop(worst)
            continue
        alpha = Fraction(1)
        block = None
        for i, (a, b) in enumerate(les):
            if i in work:
                continue
            ap = dot(a, p)
            if ap > 0:
                t = (b - dot(a, x)) / ap
                if t < alpha or (t == alpha and block is not None and i < block):
                    alpha, block = t, i
        x = add(x, scale(alpha, p))
        if block is not None:
            work.append(block)
    raise RuntimeError("active-set iteration limit reached")
