"""Front-ends for structured learning objectives with piecewise affine parts.

Covers the ramp-loss SVM, partial linearization of a smooth outer loss
around DC inner maps, and the qualification conditions for two-layer
ReLU networks (general position, surjectivity and the span condition).
Indices reported in index sets are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Sequence

from . import caps
from .exactsolve import Vec, dot, q, rank, scale, span_intersection_trivial, vec, zeros
from .pafunc import DcFunction, Leaf, MaxNode, McFunction, Node, SumNode, leaf
from .polytope import VPolytope, canonicalize, minkowski_sum


@dataclass(frozen=True)
class LabeledDataset:
    """Augmented points ``(x_i, 1)`` with labels or regression targets."""

    points: tuple
    labels: tuple

    @staticmethod
    def of(points: Sequence[Sequence], labels: Sequence = ()) -> "LabeledDataset":
        pts = tuple(vec(p) for p in points)
        if not pts:
            raise ValueError("dataset is empty")
        if len({len(p) for p in pts}) != 1:
            raise ValueError("points have inconsistent dimensions")
        labs = tuple(q(y) for y in labels)
        if labs and len(labs) != len(pts):
            raise ValueError("one label per point is required")
        return LabeledDataset(pts, labs)

    @staticmethod
    def augment(features: Sequence[Sequence], labels: Sequence = ()) -> "LabeledDataset":
        """Append a constant 1 to every feature vector."""
        return LabeledDataset.of([list(x) + [1] for x in features], labels)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    @property
    def features(self) -> list[Vec]:
        """Points with the trailing augmentation coordinate dropped."""
        return [p[:-1] for p in self.points]


@dataclass(frozen=True)
class QualificationReport:
    """Which regularity conditions hold; ``None`` means not evaluated."""

    span_condition: bool
    surjectivity: bool | None = None
    general_position: bool | None = None
    index_sets: dict = field(default_factory=dict)

    @property
    def strongest(self) -> str | None:
        """The strongest condition that holds, in implication order."""
        if self.general_position:
            return "general-position"
        if self.surjectivity:
            return "surjectivity"
        if self.span_condition:
            return "span-condition"
        return None

    def to_json(self) -> dict:
        return {
            "general_position": self.general_position,
            "surjectivity": self.surjectivity,
            "span_condition": self.span_condition,
            "strongest": self.strongest,
            "index_sets": {k: list(v) for k, v in self.index_sets.items()},
        }


# ---------------------------------------------------------------------------
# tree helpers

def _scale_node(c: Fraction, node: Node) -> Node:
    if isinstance(node, Leaf):
        return Leaf(scale(c, node.x), c * node.a)
    kids = tuple(_scale_node(c, k) for k in node.children)
    return MaxNode(kids) if isinstance(node, MaxNode) else SumNode(kids)


def _sum_mc(terms: list[tuple[Fraction, McFunction]], dim: int) -> McFunction:
    """``sum c_i f_i`` for positive ``c_i``; the zero function when empty."""
    kids = [m for c, f in terms for m in _scale_node(c, f.root).children]
    if not kids:
        kids = [MaxNode((leaf(zeros(dim)),))]
    return McFunction.make(SumNode(tuple(kids)), dim)


def _independent(rows: Sequence[Vec]) -> bool:
    return rank(rows) == len(rows)


# ---------------------------------------------------------------------------
# general position

def general_position(points: Sequence[Sequence]) -> bool:
    """No ``d+1`` of the points lie on one affine hyperplane of R^d.

    With ``n <= d`` points the whole set must be affinely independent,
    so duplicates are never in general position.
    """
    pts = [vec(p) for p in points]
    if not pts:
        return True
    d = len(pts[0])
    k = min(len(pts), d + 1)
    caps.check("subsets", comb(len(pts), k))
    lifted = [p + (Fraction(1),) for p in pts]
    return all(_independent(s) for s in combinations(lifted, k))


# ---------------------------------------------------------------------------
# ramp-loss SVM

def svm_pa_part(data: LabeledDataset, rho, w: Sequence) -> tuple[DcFunction, QualificationReport]:
    """DC pair ``sum max(1 - y x·w/rho, 0) - sum max(-y x·w/rho, 0)`` and its span condition at ``w``."""
    rho = q(rho)
    if rho <= 0:
        raise ValueError("rho must be positive")
    if len(data.labels) != len(data.points):
        raise ValueError("every point needs a label")
    if any(y not in (1, -1) for y in data.labels):
        raise ValueError("labels must be +1 or -1")
    w = vec(w)
    if len(w) != data.dim:
        raise ValueError("point dimension mismatch")
    d = data.dim
    hs, gs, I1, I2 = [], [], [], []
    for i, (x, y) in enumerate(zip(data.points, data.labels)):
        s = scale(-y / rho, x)
        hs.append(MaxNode((leaf(s, 1), leaf(zeros(d)))))
        gs.append(MaxNode((leaf(s), leaf(zeros(d)))))
        m = y * dot(x, w)
        if m == rho:
            I1.append(i)
        if m == 0:
            I2.append(i)
    f = DcFunction(McFunction.make(SumNode(tuple(hs)), d), McFunction.make(SumNode(tuple(gs)), d))
    A = [data.points[i] for i in I1]
    B = [data.points[j] for j in I2]
    report = QualificationReport(
        span_condition=span_intersection_trivial(A, B),
        surjectivity=_independent(A + B),
        index_sets={"I1": tuple(I1), "I2": tuple(I2)},
    )
    return f, report


# ---------------------------------------------------------------------------
# partial linearization

def partial_linearize(p: Sequence, inner: Sequence[DcFunction]) -> DcFunction:
    """``sum_i p_i (h_i - g_i)`` as one DC pair.

    A negative ``p_i`` moves ``|p_i| g_i`` into the convex part and
    ``|p_i| h_i`` into the subtracted part, so both stay convex.
    """
    p = [q(v) for v in p]
    if len(p) != len(inner) or not inner:
        raise ValueError("need one coefficient per inner function")
    dim = inner[0].dim
    if any(f.dim != dim for f in inner):
        raise ValueError("inner functions must share the input dimension")
    H, G = [], []
    for c, f in zip(p, inner):
        if c > 0:
            H.append((c, f.h))
            G.append((c, f.g))
        elif c < 0:
            H.append((-c, f.g))
            G.append((-c, f.h))
    return DcFunction(_sum_mc(H, dim), _sum_mc(G, dim))


def par_inner(points: Sequence[Sequence], m1: int, m2: int) -> list[DcFunction]:
    """Inner maps ``theta -> max_j a_j·x_i - max_k b_k·x_i`` on ``theta = (a_1..a_m1, b_1..b_m2)``."""
    pts = [vec(x) for x in points]
    if m1 < 1 or m2 < 1:
        raise ValueError("need at least one piece on each side")
    d = len(pts[0])
    D = d * (m1 + m2)

    def block(x: Vec, slot: int) -> Vec:
        out = [Fraction(0)] * D
        out[slot * d:(slot + 1) * d] = x
        return tuple(out)

    out = []
    for x in pts:
        h = McFunction.make(MaxNode(tuple(Leaf(block(x, j)) for j in range(m1))), D)
        g = McFunction.make(MaxNode(tuple(Leaf(block(x, m1 + k)) for k in range(m2))), D)
        out.append(DcFunction(h, g))
    return out


# ---------------------------------------------------------------------------
# two-layer ReLU networks

def _relu(x: Vec) -> DcFunction:
    d = len(x)
    return DcFunction(McFunction.make(MaxNode((Leaf(x), leaf(zeros(d)))), d), McFunction.make(leaf(zeros(d)), d))


def relu2_unit(data: LabeledDataset, w_k: Sequence, u_k, p: Sequence) -> DcFunction:
    """``w -> u_k sum_i p_i max(w·x_i, 0)``, the linearized loss seen by one hidden unit."""
    u_k = q(u_k)
    return partial_linearize([u_k * q(v) for v in p], [_relu(x) for x in data.points])


def relu2_formula_subdiff(data: LabeledDataset, w_k: Sequence, u_k, p: Sequence) -> VPolytope:
    """``u_k sum_i p_i x_i ∂max(·,0)(w_k·x_i)`` as a canonical V-polytope."""
    w_k = vec(w_k)
    u_k = q(u_k)
    acc = VPolytope.of([zeros(data.dim)])
    for x, pi in zip(data.points, p):
        v = scale(u_k * q(pi), x)
        t = dot(w_k, x)
        if t > 0:
            acc = acc.translate(v)
        elif t == 0 and any(v):
            acc = canonicalize(minkowski_sum(acc, VPolytope.of([zeros(data.dim), v])))
    return canonicalize(acc)


def _signed_kinks(data: LabeledDataset, w_k: Vec, u_k: Fraction, p: Sequence[Fraction]) -> tuple[list[int], list[int]]:
    plus, minus = [], []
    for i, (x, pi) in enumerate(zip(data.points, p)):
        if dot(w_k, x) != 0:
            continue
        s = u_k * pi
        if s > 0:
            plus.append(i)
        elif s < 0:
            minus.append(i)
    return plus, minus


def relu2_qualification(data: LabeledDataset, params: Sequence[tuple[Sequence, object]], p: Sequence) -> QualificationReport:
    """Span, surjectivity and general-position conditions for hidden units ``(w_k, u_k)``.

    ``p`` holds the loss derivatives at the network outputs, one per point.
    """
    p = [q(v) for v in p]
    if len(p) != len(data.points):
        raise ValueError("need one loss derivative per point")
    span_ok = True
    surj_ok = True
    sets: dict = {}
    for k, (w_k, u_k) in enumerate(params):
        w_k = vec(w_k)
        if len(w_k) != data.dim:
            raise ValueError(f"unit {k} weight dimension mismatch")
        plus, minus = _signed_kinks(data, w_k, q(u_k), p)
        sets[f"I{k}+"] = tuple(plus)
        sets[f"I{k}-"] = tuple(minus)
        A = [data.points[i] for i in plus]
        B = [data.points[i] for i in minus]
        span_ok = span_ok and span_intersection_trivial(A, B)
        surj_ok = surj_ok and _independent(A + B)
    return QualificationReport(
        span_condition=span_ok,
        surjectivity=surj_ok,
        general_position=general_position(data.features),
        index_sets=sets,
    )


def load_dataset(obj: dict) -> LabeledDataset:
    """Parse ``{"points": [...], "labels": [...]}``; ``"augment": true`` appends the constant 1."""
    if "points" not in obj:
        raise ValueError("dataset file needs 'points'")
    labels = obj.get("labels", [])
    if obj.get("augment"):
        return LabeledDataset.augment(obj["points"], labels)
    return LabeledDataset.of(obj["points"], labels)
