"""Piecewise affine functions: multi-composite trees, Max-Min form, DC pairs.

A multi-composite (MC) tree alternates Sum and Max layers and ends in
affine leaves ``x·w + a``.  The root is always a Sum node and every leaf
sits below the same number of Max layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import isqrt
from typing import Iterator, Sequence, Union

from . import caps
from .exactsolve import Vec, add, dot, fmt, q, vec, zeros

INF = math.inf


# ---------------------------------------------------------------------------
# tree nodes

@dataclass(frozen=True)
class Leaf:
    x: Vec
    a: Fraction = Fraction(0)


@dataclass(frozen=True)
class MaxNode:
    children: tuple  # Leaf or SumNode


@dataclass(frozen=True)
class SumNode:
    children: tuple  # MaxNode


Node = Union[Leaf, MaxNode, SumNode]


def leaf(x: Sequence, a=0) -> Leaf:
    return Leaf(vec(x), q(a))


def mx(*children: Node) -> MaxNode:
    return MaxNode(tuple(children))


def sm(*children: Node) -> SumNode:
    return SumNode(tuple(children))


def _depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    if isinstance(node, MaxNode):
        return 1 + max(_depth(c) for c in node.children)
    return max(_depth(c) for c in node.children)


def _pad_max(node: MaxNode, target: int) -> MaxNode:
    if target == 1:
        if not all(isinstance(c, Leaf) for c in node.children):
            raise ValueError("cannot shorten a subtree")
        return node
    kids = []
    for c in node.children:
        if isinstance(c, Leaf):
            c = SumNode((MaxNode((c,)),))
        kids.append(_pad_sum(c, target - 1))
    return MaxNode(tuple(kids))


def _pad_sum(node: SumNode, target: int) -> SumNode:
    return SumNode(tuple(_pad_max(c, target) for c in node.children))


def _as_root(node: Node) -> SumNode:
    if isinstance(node, Leaf):
        return SumNode((MaxNode((node,)),))
    if isinstance(node, MaxNode):
        return SumNode((node,))
    return node


def _check(node: Node, dim: int) -> None:
    if isinstance(node, Leaf):
        if len(node.x) != dim:
            raise ValueError(f"leaf has dimension {len(node.x)}, expected {dim}")
        return
    if not node.children:
        raise ValueError("Sum and Max nodes need at least one child")
    if isinstance(node, SumNode):
        if not all(isinstance(c, MaxNode) for c in node.children):
            raise ValueError("Sum node children must be Max nodes")
    else:
        if not all(isinstance(c, (Leaf, SumNode)) for c in node.children):
            raise ValueError("Max node children must be leaves or Sum nodes")
    for c in node.children:
        _check(c, dim)


@dataclass(frozen=True)
class McFunction:
    """Convex PA function given by an n-MC tree over R^dim."""

    dim: int
    root: SumNode

    @staticmethod
    def make(tree: Node, dim: int | None = None) -> "McFunction":
        """Wrap and pad ``tree`` so that it satisfies the n-MC shape."""
        root = _as_root(tree)
        if dim is None:
            dim = len(next(_leaves(root)).x)
        _check(root, dim)
        depth = _depth(root)
        return McFunction(dim, _pad_sum(root, depth))

    @property
    def depth(self) -> int:
        return _depth(self.root)

    def __call__(self, w: Sequence) -> Fraction:
        return eval_fn(self, w)


def _leaves(node: Node) -> Iterator[Leaf]:
    if isinstance(node, Leaf):
        yield node
    else:
        for c in node.children:
            yield from _leaves(c)


def affine(x: Sequence, a=0) -> McFunction:
    return McFunction.make(leaf(x, a))


def zero_fn(dim: int) -> McFunction:
    return affine(zeros(dim))


@dataclass(frozen=True)
class DcFunction:
    h: McFunction
    g: McFunction

    def __post_init__(self):
        if self.h.dim != self.g.dim:
            raise ValueError("h and g must share the input dimension")

    @property
    def dim(self) -> int:
        return self.h.dim

    def __call__(self, w: Sequence) -> Fraction:
        return eval_fn(self, w)


@dataclass(frozen=True)
class MaxMinFunction:
    """``max_i min_{j in groups[i]} x_j·w + a_j``."""

    dim: int
    pieces: tuple  # of (Vec, Fraction)
    groups: tuple  # of tuple[int, ...]

    @staticmethod
    def make(pieces: Sequence, groups: Sequence[Sequence[int]], dim: int | None = None) -> "MaxMinFunction":
        ps = tuple((vec(x), q(a)) for x, a in pieces)
        if not ps:
            raise ValueError("need at least one piece")
        if dim is None:
            dim = len(ps[0][0])
        if any(len(x) != dim for x, _ in ps):
            raise ValueError("piece dimension mismatch")
        gs = tuple(tuple(int(j) for j in g) for g in groups)
        if not gs or any(not g for g in gs):
            raise ValueError("every group must be non-empty")
        if any(j < 0 or j >= len(ps) for g in gs for j in g):
            raise ValueError("group index out of range")
        return MaxMinFunction(dim, ps, gs)

    def __call__(self, w: Sequence) -> Fraction:
        return eval_fn(self, w)


PaFunction = Union[McFunction, DcFunction, MaxMinFunction]


# ---------------------------------------------------------------------------
# evaluation and value tables

def _check_dim(f: PaFunction, w: Sequence) -> Vec:
    w = vec(w)
    if len(w) != f.dim:
        raise ValueError(f"point has dimension {len(w)}, function expects {f.dim}")
    return w


def _val(node: Node, w: Vec) -> Fraction:
    if isinstance(node, Leaf):
        return dot(node.x, w) + node.a
    if isinstance(node, MaxNode):
        return max(_val(c, w) for c in node.children)
    return sum((_val(c, w) for c in node.children), Fraction(0))


def _group_values(f: MaxMinFunction, w: Vec) -> tuple[list[Fraction], list[Fraction]]:
    pv = [dot(x, w) + a for x, a in f.pieces]
    gv = [min(pv[j] for j in g) for g in f.groups]
    return pv, gv


def eval_fn(f: PaFunction, w: Sequence) -> Fraction:
    w = _check_dim(f, w)
    if isinstance(f, McFunction):
        return _val(f.root, w)
    if isinstance(f, DcFunction):
        return _val(f.h.root, w) - _val(f.g.root, w)
    _, gv = _group_values(f, w)
    return max(gv)


def value_table(h: McFunction, w: Sequence) -> dict[tuple, Fraction]:
    """Every node value at ``w`` keyed by its child-index path from the root."""
    w = _check_dim(h, w)
    out: dict[tuple, Fraction] = {}

    def walk(node: Node, path: tuple) -> Fraction:
        if isinstance(node, Leaf):
            v = dot(node.x, w) + node.a
        else:
            vals = [walk(c, path + (i,)) for i, c in enumerate(node.children)]
            v = max(vals) if isinstance(node, MaxNode) else sum(vals, Fraction(0))
        out[path] = v
        return v

    walk(h.root, ())
    return out


# ---------------------------------------------------------------------------
# directional derivatives

def _dd(node: Node, w: Vec, d: Vec) -> tuple[Fraction, Fraction]:
    if isinstance(node, Leaf):
        return dot(node.x, w) + node.a, dot(node.x, d)
    parts = [_dd(c, w, d) for c in node.children]
    if isinstance(node, SumNode):
        return sum((p[0] for p in parts), Fraction(0)), sum((p[1] for p in parts), Fraction(0))
    top = max(p[0] for p in parts)
    return top, max(p[1] for p in parts if p[0] == top)


def maxmin_derivative(f: MaxMinFunction, w: Sequence) -> MaxMinFunction:
    """The positively homogeneous function ``f'(w; ·)`` in Max-Min form."""
    w = _check_dim(f, w)
    pv, gv = _group_values(f, w)
    top = max(gv)
    groups = [tuple(j for j in g if pv[j] == gv[i]) for i, g in enumerate(f.groups) if gv[i] == top]
    used = sorted({j for g in groups for j in g})
    remap = {j: k for k, j in enumerate(used)}
    pieces = [(f.pieces[j][0], Fraction(0)) for j in used]
    return MaxMinFunction.make(pieces, [[remap[j] for j in g] for g in groups], f.dim)


def dir_deriv(f: PaFunction, w: Sequence, d: Sequence) -> Fraction:
    """Exact one-sided directional derivative ``f'(w; d)``."""
    w = _check_dim(f, w)
    d = _check_dim(f, d)
    if isinstance(f, McFunction):
        return _dd(f.root, w, d)[1]
    if isinstance(f, DcFunction):
        return _dd(f.h.root, w, d)[1] - _dd(f.g.root, w, d)[1]
    fd = maxmin_derivative(f, w)
    return eval_fn(fd, d)


def _restrict(node: Node, w: Vec) -> tuple[Fraction, Node]:
    if isinstance(node, Leaf):
        return dot(node.x, w) + node.a, Leaf(node.x, Fraction(0))
    parts = [_restrict(c, w) for c in node.children]
    if isinstance(node, SumNode):
        return sum((p[0] for p in parts), Fraction(0)), SumNode(tuple(p[1] for p in parts))
    top = max(p[0] for p in parts)
    return top, MaxNode(tuple(p[1] for p in parts if p[0] == top))


def derivative_tree(h: McFunction, w: Sequence) -> McFunction:
    """The MC tree of ``h'(w; ·)``: inactive children pruned, offsets zeroed."""
    w = _check_dim(h, w)
    return McFunction(h.dim, _restrict(h.root, w)[1])


# ---------------------------------------------------------------------------
# flattening into affine selection pieces

def _count(node: Node) -> int:
    if isinstance(node, Leaf):
        return 1
    if isinstance(node, MaxNode):
        return sum(_count(c) for c in node.children)
    out = 1
    for c in node.children:
        out *= _count(c)
    return out


def _flat(node: Node) -> list[tuple[Vec, Fraction]]:
    if isinstance(node, Leaf):
        return [(node.x, node.a)]
    if isinstance(node, MaxNode):
        return [p for c in node.children for p in _flat(c)]
    acc = [(zeros(len(next(_leaves(node)).x)), Fraction(0))]
    for c in node.children:
        acc = [(add(x, y), a + b) for (x, a), (y, b) in product(acc, _flat(c))]
    return acc


def piece_count(f: PaFunction) -> int:
    if isinstance(f, McFunction):
        return _count(f.root)
    if isinstance(f, DcFunction):
        return _count(f.h.root) * _count(f.g.root)
    return len(f.pieces)


def flatten_pieces(f: PaFunction) -> list[tuple[Vec, Fraction]]:
    """All affine selection pieces, obtained by distributing sums over maxima.

    For a DC pair the pieces are the differences ``p_i - q_j`` of the pieces
    of ``h`` and ``g``.
    """
    caps.check("flatten", piece_count(f))
    if isinstance(f, McFunction):
        return _flat(f.root)
    if isinstance(f, DcFunction):
        H = _flat(f.h.root)
        G = _flat(f.g.root)
        return [(tuple(x - y for x, y in zip(p, r)), a - b) for (p, a), (r, b) in product(H, G)]
    return list(f.pieces)


def gradient_set(h: McFunction) -> list[Vec]:
    """Distinct gradients of the flattened pieces, deduplicated layer by layer."""

    def walk(node: Node) -> list[Vec]:
        if isinstance(node, Leaf):
            return [node.x]
        if isinstance(node, MaxNode):
            out: dict[Vec, None] = {}
            for c in node.children:
                for g in walk(c):
                    out.setdefault(g, None)
            return list(out)
        acc = [zeros(h.dim)]
        for c in node.children:
            sub_ = walk(c)
            caps.check("flatten", len(acc) * len(sub_))
            acc = list(dict.fromkeys(add(x, y) for x in acc for y in sub_))
        return acc

    return walk(h.root)


# ---------------------------------------------------------------------------
# Lipschitz aggregate and separation radius

def norm_upper(x: Sequence[Fraction]) -> Fraction:
    """Rational ``q`` with ``q^2 >= |x|^2`` and ``q <= |x| + 2^-32``; exact when possible."""
    s = dot(x, x)
    p, r = s.numerator, s.denominator
    sp, sr = isqrt(p), isqrt(r)
    if sp * sp == p and sr * sr == r:
        return Fraction(sp, sr)
    target = -((-p << 64) // r)  # ceil(s * 2^64)
    k = isqrt(target)
    if k * k < target:
        k += 1
    return Fraction(k, 1 << 32)


def _norm_aggregate(node: Node) -> Fraction:
    if isinstance(node, Leaf):
        return norm_upper(node.x)
    vals = [_norm_aggregate(c) for c in node.children]
    return max(vals) if isinstance(node, MaxNode) else sum(vals, Fraction(0))


def lipschitz_R(f: DcFunction | McFunction) -> Fraction:
    """Upper bound on the Lipschitz constants of ``h`` and ``g`` from leaf norms."""
    if isinstance(f, McFunction):
        return _norm_aggregate(f.root)
    return max(_norm_aggregate(f.h.root), _norm_aggregate(f.g.root))


def _min_gap(node: Node, w: Vec) -> tuple[Fraction, float | Fraction]:
    """(value, smallest strictly positive parent-child gap in the subtree)."""
    if isinstance(node, Leaf):
        return dot(node.x, w) + node.a, INF
    parts = [_min_gap(c, w) for c in node.children]
    best = min((p[1] for p in parts), default=INF)
    if isinstance(node, SumNode):
        return sum((p[0] for p in parts), Fraction(0)), best
    top = max(p[0] for p in parts)
    for v, _ in parts:
        if v != top:
            best = min(best, top - v)
    return top, best


def gap(h: McFunction, w: Sequence) -> float | Fraction:
    """Smallest strictly positive Max-node gap at ``w``; ``INF`` when all children tie."""
    w = _check_dim(h, w)
    return _min_gap(h.root, w)[1]


def delta_sep(f: DcFunction, w: Sequence) -> float | Fraction:
    """Separation radius ``min(gap_h, gap_g) / (12 R)``; may be ``INF``."""
    g_min = min(gap(f.h, w), gap(f.g, w))
    R = lipschitz_R(f)
    if g_min == INF or R == 0:
        return INF
    return g_min / (12 * R)


# ---------------------------------------------------------------------------
# JSON

def _node_to_json(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": {"x": [fmt(v) for v in node.x], "a": fmt(node.a)}}
    key = "max" if isinstance(node, MaxNode) else "sum"
    return {key: [_node_to_json(c) for c in node.children]}


def _node_from_json(obj) -> Node:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"malformed tree node: {obj!r}")
    (key, val), = obj.items()
    if key == "leaf":
        return leaf(val["x"], val.get("a", 0))
    if key in ("sum", "max"):
        if not isinstance(val, list):
            raise ValueError(f"{key} node needs a list of children")
        kids = [_node_from_json(c) for c in val]
        if key == "max":
            return MaxNode(tuple(kids))
        return SumNode(tuple(k if isinstance(k, MaxNode) else MaxNode((k,)) for k in kids))
    raise ValueError(f"unknown node type {key!r}")


def to_json(f: PaFunction) -> dict:
    if isinstance(f, McFunction):
        return {"kind": "mc", "dim": f.dim, "tree": _node_to_json(f.root)}
    if isinstance(f, DcFunction):
        return {"kind": "dc", "dim": f.dim, "h": _node_to_json(f.h.root), "g": _node_to_json(f.g.root)}
    return {
        "kind": "maxmin",
        "dim": f.dim,
        "pieces": [{"x": [fmt(v) for v in x], "a": fmt(a)} for x, a in f.pieces],
        "groups": [list(g) for g in f.groups],
    }


def from_json(obj: dict) -> PaFunction:
    kind = obj.get("kind")
    dim = obj.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("function file needs a positive integer 'dim'")
    if kind == "mc":
        return McFunction.make(_node_from_json(obj["tree"]), dim)
    if kind == "dc":
        h = McFunction.make(_node_from_json(obj["h"]), dim)
        g = McFunction.make(_node_from_json(obj["g"]), dim)
        return DcFunction(h, g)
    if kind == "maxmin":
        pieces = [(p["x"], p.get("a", 0)) for p in obj["pieces"]]
        return MaxMinFunction.make(pieces, obj["groups"], dim)
    raise ValueError(f"unknown function kind {kind!r}")


def as_dc(f: PaFunction) -> DcFunction:
    if isinstance(f, DcFunction):
        return f
    if isinstance(f, McFunction):
        return DcFunction(f, zero_fn(f.dim))
    raise TypeError("a Max-Min function has no DC tree form here")
