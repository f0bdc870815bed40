"""Instance generators tying stationarity verdicts to combinatorial problems.

Two families are produced:

* from a sign-maximisation instance (vectors ``y_i`` in ``{-1,0,1}^n`` and a
  threshold ``alpha``) a DC pair whose Frechet stationarity at 0 fails
  exactly when some signed sum ``sum_i e_i y_i`` has l1 norm ``>= alpha``,
  plus a seesaw variant whose Clarke distance at 0 is 0 or 1/2;
* from a 3-CNF a Max-Min function ``f_F`` and its Clarke variant ``f_C``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

from . import caps
from .exactsolve import Vec, add, neg, rank, scale, unit, vec, zeros
from .pafunc import DcFunction, Leaf, MaxMinFunction, MaxNode, McFunction, SumNode, leaf


# ---------------------------------------------------------------------------
# CNF

@dataclass(frozen=True)
class Cnf3:
    """Clauses of exactly three nonzero literals; ``-k`` negates variable ``k`` (1-based)."""

    nvars: int
    clauses: tuple

    @staticmethod
    def of(nvars: int, clauses: Iterable[Sequence[int]]) -> "Cnf3":
        cs = tuple(tuple(int(l) for l in c) for c in clauses)
        if nvars < 1:
            raise ValueError("need at least one variable")
        if not cs:
            raise ValueError("need at least one clause")
        for c in cs:
            if len(c) != 3:
                raise ValueError(f"clause {c} does not have exactly 3 literals")
            if any(l == 0 or abs(l) > nvars for l in c):
                raise ValueError(f"literal out of range in clause {c}")
        return Cnf3(nvars, cs)

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        return all(any(assignment[abs(l) - 1] == (l > 0) for l in c) for c in self.clauses)

    def satisfying_assignment(self) -> tuple | None:
        """First satisfying assignment in truth-table order, or None."""
        caps.check("sat_vars", self.nvars)
        for bits in product((False, True), repeat=self.nvars):
            if self.satisfied_by(bits):
                return bits
        return None

    def satisfiable(self) -> bool:
        return self.satisfying_assignment() is not None

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.nvars} {len(self.clauses)}"]
        lines += [" ".join(str(l) for l in c) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> Cnf3:
    nvars = None
    lits: list[int] = []
    clauses = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line: {line!r}")
            nvars = int(parts[2])
            continue
        for tok in line.split():
            v = int(tok)
            if v == 0:
                clauses.append(lits)
                lits = []
            else:
                lits.append(v)
    if lits:
        clauses.append(lits)
    if nvars is None:
        raise ValueError("missing 'p cnf' line")
    return Cnf3.of(nvars, clauses)


def literal_vectors(cnf: Cnf3) -> list[Vec]:
    """``y`` vectors: ``e_k`` for literal ``x_k`` and ``-e_k`` for its negation, clause by clause."""
    return [unit(cnf.nvars, abs(l) - 1, 1 if l > 0 else -1) for c in cnf.clauses for l in c]


def _dedup(xs):
    return list(dict.fromkeys(xs))


def _clause_pieces(ys: Sequence[Vec], d: int) -> list[Vec]:
    """Gradients of ``-sum_{j in S} y_j`` over all subsets S (deduplicated)."""
    out = []
    for mask in product((0, 1), repeat=len(ys)):
        g = zeros(d)
        for bit, y in zip(mask, ys):
            if bit:
                g = add(g, y)
        out.append(neg(g))
    return _dedup(out)


def _maxmin_from_groups(groups: list[list[tuple[Vec, Fraction]]], d: int) -> MaxMinFunction:
    pieces: dict[tuple, int] = {}
    idx_groups = []
    for grp in groups:
        ids = []
        for p in grp:
            if p not in pieces:
                pieces[p] = len(pieces)
            ids.append(pieces[p])
        idx_groups.append(_dedup(ids))
    return MaxMinFunction.make(list(pieces), idx_groups, d)


def _ff_groups(cnf: Cnf3) -> list[list[Vec]]:
    ys = literal_vectors(cnf)
    m = cnf.nvars
    return [_clause_pieces(ys[3 * i: 3 * i + 3], m) for i in range(len(cnf.clauses))]


def gen_maxmin_3sat(cnf: Cnf3) -> MaxMinFunction:
    """``f_F(d) = max_i -sum_j max(d·y_ij, 0)`` written as max over clauses of min over subset sums."""
    groups = [[(g, Fraction(0)) for g in grp] for grp in _ff_groups(cnf)]
    return _maxmin_from_groups(groups, cnf.nvars)


def gen_maxmin_3sat_clarke(cnf: Cnf3) -> MaxMinFunction:
    """``f_C(d) = max(d1/2 + f_F(d) + f_F(-d), min(d1, 0))`` in Max-Min form.

    A sum of two Max-Min functions is the max over group pairs of the min
    over pairwise piece sums; ``f_F(-d)`` uses the negated gradients.
    """
    m = cnf.nvars
    half = unit(m, 0, Fraction(1, 2))
    # f_F gradients are integer vectors; hashing ints is much cheaper than Fractions
    G = [[tuple(int(x) for x in g) for g in grp] for grp in _ff_groups(cnf)]
    groups = []
    for gi in G:
        for gj in G:
            diffs = _dedup(tuple(x - y for x, y in zip(a, b)) for a in gi for b in gj)
            groups.append([(add(half, x), Fraction(0)) for x in diffs])
    groups.append([(unit(m, 0), Fraction(0)), (zeros(m), Fraction(0))])
    return _maxmin_from_groups(groups, m)


def random_cnf(nvars: int, nclauses: int, rng: random.Random) -> Cnf3:
    clauses = []
    for _ in range(nclauses):
        clauses.append([rng.choice((1, -1)) * rng.randint(1, nvars) for _ in range(3)])
    return Cnf3.of(nvars, clauses)


# ---------------------------------------------------------------------------
# sign maximisation and its DC encodings

@dataclass(frozen=True)
class ParMaxInstance:
    """Linearly independent ``y_1..y_m`` in ``{-1,0,1}^n`` and a positive integer ``alpha``."""

    n: int
    alpha: int
    ys: tuple

    @staticmethod
    def of(n: int, alpha: int, ys: Sequence[Sequence[int]]) -> "ParMaxInstance":
        Y = tuple(vec(y) for y in ys)
        if alpha < 1:
            raise ValueError("alpha must be a positive integer")
        if not Y or len(Y) > n:
            raise ValueError("need 1 <= m <= n vectors")
        if any(len(y) != n or any(v not in (-1, 0, 1) for v in y) for y in Y):
            raise ValueError("vectors must lie in {-1,0,1}^n")
        if rank(Y) != len(Y):
            raise ValueError("vectors must be linearly independent")
        return ParMaxInstance(n, int(alpha), Y)

    @property
    def m(self) -> int:
        return len(self.ys)

    def max_l1(self) -> Fraction:
        """``max`` over sign patterns of ``|sum_i e_i y_i|_1``."""
        best = Fraction(0)
        for signs in product((1, -1), repeat=self.m):
            s = zeros(self.n)
            for e, y in zip(signs, self.ys):
                s = add(s, scale(e, y))
            best = max(best, sum(abs(v) for v in s))
        return best

    def yes(self) -> bool:
        """Whether some sign pattern reaches l1 norm ``alpha``."""
        return self.max_l1() >= self.alpha


def _inf_norm_max(n: int, r: int) -> MaxNode:
    return MaxNode(tuple(leaf(unit(n, i, s * r)) for i in range(n) for s in (1, -1)))


def _abs_sum(ys: Sequence[Vec]) -> SumNode:
    return SumNode(tuple(MaxNode((Leaf(y), Leaf(neg(y)))) for y in ys))


def gen_dcf(inst: ParMaxInstance) -> DcFunction:
    """``h_F = r|d|_inf`` and ``g_F = max(h_F, sum_i |d·y_i|)`` with ``r = alpha - 1``."""
    n, r = inst.n, inst.alpha - 1
    h = McFunction.make(SumNode((_inf_norm_max(n, r),)), n)
    g = McFunction.make(
        SumNode((MaxNode((SumNode((_inf_norm_max(n, r),)), _abs_sum(inst.ys))),)), n
    )
    return DcFunction(h, g)


def gen_dcc(inst: ParMaxInstance) -> DcFunction:
    """Seesaw pair ``h_C = d1/2 + max(h_F + |d1|/2, g_F)`` and ``g_C = g_F + |d1|/2``."""
    n, r = inst.n, inst.alpha - 1
    half = unit(n, 0, Fraction(1, 2))
    abs_half = MaxNode((Leaf(half), Leaf(neg(half))))
    h = McFunction.make(
        SumNode((
            MaxNode((Leaf(half),)),
            MaxNode((
                SumNode((_inf_norm_max(n, r), abs_half)),
                SumNode((_inf_norm_max(n, r),)),
                _abs_sum(inst.ys),
            )),
        )),
        n,
    )
    g = McFunction.make(
        SumNode((
            MaxNode((SumNode((_inf_norm_max(n, r),)), _abs_sum(inst.ys))),
            abs_half,
        )),
        n,
    )
    return DcFunction(h, g)


def random_parmax(n: int, m: int, rng: random.Random, alpha: int | None = None) -> ParMaxInstance:
    """Random instance with independent ``y`` vectors; ``alpha`` defaults to a value near the optimum."""
    while True:
        ys = [[rng.choice((-1, 0, 1)) for _ in range(n)] for _ in range(m)]
        if rank(ys) == m:
            break
    probe = ParMaxInstance(n, 1, tuple(vec(y) for y in ys))
    if alpha is None:
        best = int(probe.max_l1())
        alpha = max(1, best + rng.choice((-1, 0, 1)))
    return ParMaxInstance.of(n, alpha, ys)
