"""Robust near-approximate stationarity test.

The test projects ``w`` onto a polyhedral "net" built from the active
pattern of ``h`` and ``g`` at scale ``delta``, asks an exact oracle about
the projected point, and halves ``delta`` until the separation radius of
``w`` guarantees that no nearby stationary point was missed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import caps
from .exactsolve import Infeasible, LinearSystem, Vec, add, dot, fmt, norm_sq, project_point, q, sub, vec, zeros
from .pafunc import INF, DcFunction, Leaf, Node, SumNode, delta_sep, lipschitz_R
from .polytope import compatible
from .subdiff import (
    clarke_dist_sq,
    dc_critical_dist_sq,
    frechet_dist_sq,
    frechet_stationary,
    subdiff_vertices,
    transversal_at,
)

ORACLES = ("dc-critical", "clarke-sum-rule", "clarke-brute", "frechet-brute")


# ---------------------------------------------------------------------------
# net polyhedron

@dataclass(frozen=True)
class ApproxActiveSets:
    """Active child indices of every Max node at scale ``delta``, keyed by tree path."""

    h: dict
    g: dict


@dataclass(frozen=True)
class NetPolyhedron:
    system: LinearSystem
    active: ApproxActiveSets


def _emit(root: SumNode, w: Vec, slack: Fraction, eqs: list, les: list, active: dict) -> None:
    """Append net rows for every Max node of one tree.

    Each node's affine expression (gradient, offset) is valid on the region
    cut out by the rows already emitted for its descendants.
    """
    d = len(w)

    def visit(node: Node, path: tuple) -> tuple[Fraction, Vec, Fraction]:
        # (value at w, affine expression on the constrained region)
        if isinstance(node, Leaf):
            return dot(node.x, w) + node.a, node.x, node.a
        parts = [visit(c, path + (i,)) for i, c in enumerate(node.children)]
        if isinstance(node, SumNode):
            val = sum((p[0] for p in parts), Fraction(0))
            x = zeros(d)
            a = Fraction(0)
            for _, px, pa in parts:
                x = add(x, px)
                a += pa
            return val, x, a
        top = max(p[0] for p in parts)
        I = [i for i, p in enumerate(parts) if p[0] >= top - 3 * slack]
        active[path] = tuple(I)
        first = parts[I[0]]
        for i in I[1:]:
            eqs.append((sub(parts[i][1], first[1]), first[2] - parts[i][2]))
        for i in I:
            # x·z + a >= top - 2 R delta
            les.append((tuple(-v for v in parts[i][1]), parts[i][2] - top + 2 * slack))
        for i, p in enumerate(parts):
            if i not in I:
                les.append((p[1], top - 4 * slack - p[2]))
        return top, first[1], first[2]

    visit(root, ())


def build_net(f: DcFunction, w: Sequence, delta) -> NetPolyhedron:
    """The polyhedron of points sharing the active pattern read off at ``w`` and scale ``delta``."""
    w = vec(w)
    delta = q(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if len(w) != f.dim:
        raise ValueError("point dimension mismatch")
    slack = lipschitz_R(f) * delta
    eqs: list = []
    les: list = []
    ah: dict = {}
    ag: dict = {}
    _emit(f.h.root, w, slack, eqs, les, ah)
    _emit(f.g.root, w, slack, eqs, les, ag)
    sys = LinearSystem.build(f.dim, eqs=[e for e in eqs if any(e[0]) or e[1] != 0], les=les)
    return NetPolyhedron(sys, ApproxActiveSets(ah, ag))


def rnd(f: DcFunction, w: Sequence, delta) -> Vec | Infeasible:
    """Exact Euclidean projection of ``w`` onto the net, or Infeasible."""
    return project_point(build_net(f, w, delta).system, vec(w))


# ---------------------------------------------------------------------------
# exact oracles

@dataclass(frozen=True)
class Refused:
    reason: str

    def __bool__(self) -> bool:
        return False


def _sq(eps: Fraction) -> Fraction:
    return eps * eps


def oracle_dispatch(kind: str, f: DcFunction, w: Sequence, eps) -> bool | Refused:
    """Decide ``dist(0, S(w)) <= eps`` for the stationarity notion ``kind``."""
    eps = q(eps)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    w = vec(w)
    try:
        if kind == "dc-critical":
            return dc_critical_dist_sq(f, w) <= _sq(eps)
        if kind == "clarke-sum-rule":
            if not transversal_at(f, w):
                Vh = subdiff_vertices(f.h, w)
                Vg = subdiff_vertices(f.g, w)
                if not compatible(Vh, Vg):
                    return Refused("subdifferentials are neither transversal nor compatible")
            return dc_critical_dist_sq(f, w) <= _sq(eps)
        if kind == "clarke-brute":
            return clarke_dist_sq(f, w) <= _sq(eps)
        if kind == "frechet-brute":
            if eps == 0:
                return frechet_stationary(f, w).stationary
            dist = frechet_dist_sq(f, w)
            return dist is not None and dist <= _sq(eps)
    except caps.CapExceeded as exc:
        return Refused(str(exc))
    raise ValueError(f"unknown oracle {kind!r}; expected one of {', '.join(ORACLES)}")


# ---------------------------------------------------------------------------
# the loop

def ceil_abs_log2(x: Fraction) -> int:
    """``ceil(|log2 x|)`` for rational ``x > 0``, computed without floats."""
    x = q(x)
    if x <= 0:
        raise ValueError("log of a nonpositive number")
    p, r = x.numerator, x.denominator
    e = p.bit_length() - r.bit_length()  # floor(log2 x) is e or e - 1
    if (p << max(-e, 0)) < (r << max(e, 0)):
        e -= 1
    exact = (p << max(-e, 0)) == (r << max(e, 0))
    if e >= 0:
        return e if exact else e + 1
    return -e


def iteration_bound(delta, dsep) -> int:
    """``1 + ceil|log2 delta| + ceil|log2 delta_sep|``; the second term is 0 for infinite radius."""
    extra = 0 if dsep == INF else ceil_abs_log2(dsep)
    return 1 + ceil_abs_log2(q(delta)) + extra


@dataclass(frozen=True)
class RstStep:
    k: int
    delta_k: Fraction
    feasible: bool
    point: Vec | None
    dist_sq: Fraction | None  # squared distance from w to the projection
    oracle: object  # True, False, Refused, or None when not consulted


@dataclass(frozen=True)
class RstVerdict:
    verdict: str  # "true", "false" or "refused"
    certificate: Vec | None = None
    reason: str | None = None
    delta_sep: object = None
    trace: tuple = field(default=())

    def __bool__(self) -> bool:
        return self.verdict == "true"

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_json(self) -> dict:
        out: dict = {"verdict": self.verdict}
        if self.certificate is not None:
            out["certificate"] = [fmt(v) for v in self.certificate]
        if self.reason is not None:
            out["reason"] = self.reason
        out["delta_sep"] = "inf" if self.delta_sep == INF else fmt(self.delta_sep)
        out["trace"] = [
            {
                "k": s.k,
                "delta_k": fmt(s.delta_k),
                "feasible": s.feasible,
                "point": None if s.point is None else [fmt(v) for v in s.point],
                "dist_sq": None if s.dist_sq is None else fmt(s.dist_sq),
                "oracle": s.oracle if isinstance(s.oracle, (bool, type(None))) else "refused",
            }
            for s in self.trace
        ]
        return out


def rst(f: DcFunction, w: Sequence, eps, delta, oracle: str = "clarke-brute") -> RstVerdict:
    """Decide whether some point within ``delta`` of ``w`` is ``eps``-stationary.

    A True verdict carries the certificate; False asserts that no
    ``eps``-stationary point lies within ``min(delta, delta_sep(w))``.
    A refusal from the oracle ends the run as "refused".
    """
    w = vec(w)
    eps, delta = q(eps), q(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    dsep = delta_sep(f, w)
    trace = []
    k = 0
    while True:
        dk = delta / (1 << k)
        wh = rnd(f, w, dk)
        if isinstance(wh, Infeasible):
            trace.append(RstStep(k, dk, False, None, None, None))
        else:
            dist = norm_sq(sub(wh, w))
            verdict = None
            if dist <= delta * delta:
                verdict = oracle_dispatch(oracle, f, wh, eps)
            trace.append(RstStep(k, dk, True, wh, dist, verdict))
            if isinstance(verdict, Refused):
                return RstVerdict("refused", reason=verdict.reason, delta_sep=dsep, trace=tuple(trace))
            if verdict is True:
                return RstVerdict("true", certificate=wh, delta_sep=dsep, trace=tuple(trace))
        k += 1
        if dsep == INF or delta / (1 << (k + 2)) <= dsep:
            return RstVerdict("false", delta_sep=dsep, trace=tuple(trace))
