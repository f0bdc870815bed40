"""Random fixture builders shared by the test modules."""

from __future__ import annotations

import random
from fractions import Fraction

from pastat.exactsolve import dot, vec
from pastat.pafunc import DcFunction, Leaf, MaxNode, McFunction, SumNode

HALVES = [Fraction(k, 2) for k in range(-6, 7)]

# Max-node sizes of a Sum root; the flattened piece count is the product
SHAPES = [(1,), (2,), (3,), (4,), (5,), (6,), (2, 2), (2, 3), (3, 2), (2, 1), (1, 2, 3), (2, 1, 1)]


def rand_grad(rng: random.Random, d: int, pool=HALVES) -> tuple:
    return tuple(rng.choice(pool) for _ in range(d))


def rand_leaf(rng: random.Random, d: int, at=None, pool=HALVES) -> Leaf:
    """A leaf active at ``at`` (offset chosen so it passes through the base value), or slightly off."""
    x = rand_grad(rng, d, pool)
    at = at if at is not None else (Fraction(0),) * d
    shift = rng.choice([0, 0, 0, 0, -1, Fraction(-1, 2)])
    return Leaf(x, -dot(x, vec(at)) + shift)


def rand_mc(rng: random.Random, d: int, at=None, pool=HALVES, nested: bool = True) -> McFunction:
    """Convex tree with at most 6 flattened pieces, mostly active at ``at``."""
    if nested and rng.random() < 0.2:
        # 2-MC: max(sum(max(a, b), c), e) has 3 pieces
        inner = SumNode((MaxNode((rand_leaf(rng, d, at, pool), rand_leaf(rng, d, at, pool))),
                         MaxNode((rand_leaf(rng, d, at, pool),))))
        root = SumNode((MaxNode((inner, SumNode((MaxNode((rand_leaf(rng, d, at, pool),)),)))),))
        return McFunction.make(root, d)
    shape = rng.choice(SHAPES)
    root = SumNode(tuple(MaxNode(tuple(rand_leaf(rng, d, at, pool) for _ in range(k))) for k in shape))
    return McFunction.make(root, d)


def rand_dc(rng: random.Random, d: int | None = None, at=None, pool=HALVES) -> DcFunction:
    d = d or rng.randint(1, 3)
    return DcFunction(rand_mc(rng, d, at, pool), rand_mc(rng, d, at, pool))


def rand_point(rng: random.Random, d: int, den: int = 4, span: int = 4) -> tuple:
    return tuple(Fraction(rng.randint(-span * den, span * den), den) for _ in range(d))
