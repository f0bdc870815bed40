"""Subgradient method on DC functions with a finite stopping rule.

Every ``period`` iterations the robust test is run at the current iterate;
the method stops at the first True verdict and returns its certificate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Sequence

from .butterfly import ORACLES, RstVerdict, rst
from .exactsolve import Vec, dot, fmt, q, scale, sub, vec, zeros
from .pafunc import DcFunction, Leaf, McFunction, Node, SumNode

SCHEDULES = ("constant", "inv", "inv-sqrt")


def _sqrt_upper(n: int, bits: int = 32) -> Fraction:
    """Rational ``s >= sqrt(n)`` within ``2^-bits``; exact for perfect squares."""
    r = isqrt(n)
    if r * r == n:
        return Fraction(r)
    k = isqrt(n << (2 * bits))
    return Fraction(k + 1, 1 << bits)


@dataclass(frozen=True)
class SgmConfig:
    step: Fraction = Fraction(1, 4)
    schedule: str = "constant"
    max_iter: int = 100
    eps: Fraction = Fraction(0)
    delta: Fraction = Fraction(1, 10)
    oracle: str = "clarke-brute"
    period: int = 1

    def __post_init__(self):
        object.__setattr__(self, "step", q(self.step))
        object.__setattr__(self, "eps", q(self.eps))
        object.__setattr__(self, "delta", q(self.delta))
        if self.step <= 0 or self.delta <= 0 or self.eps < 0:
            raise ValueError("step and delta must be positive, eps nonnegative")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.oracle not in ORACLES:
            raise ValueError(f"oracle must be one of {ORACLES}")
        if self.period < 1 or self.max_iter < 0:
            raise ValueError("period must be >= 1 and max_iter >= 0")

    def step_at(self, k: int) -> Fraction:
        """Step size for iteration ``k`` (counted from 1)."""
        if self.schedule == "constant":
            return self.step
        if self.schedule == "inv":
            return self.step / k
        # rounded up square root keeps the step rational and never larger than base/sqrt(k)
        return self.step / _sqrt_upper(k)


def _value_slope(node: Node, w: Vec, u: Vec) -> tuple[Fraction, Fraction]:
    """Value at ``w`` and one-sided slope along ``u``."""
    if isinstance(node, Leaf):
        return dot(node.x, w) + node.a, dot(node.x, u)
    parts = [_value_slope(c, w, u) for c in node.children]
    if isinstance(node, SumNode):
        return sum((p[0] for p in parts), Fraction(0)), sum((p[1] for p in parts), Fraction(0))
    return max(parts)


def _pick(node: Node, w: Vec, u: Vec, d: int) -> Vec:
    if isinstance(node, Leaf):
        return node.x
    if isinstance(node, SumNode):
        acc = zeros(d)
        for c in node.children:
            acc = tuple(a + b for a, b in zip(acc, _pick(c, w, u, d)))
        return acc
    parts = [_value_slope(c, w, u) for c in node.children]
    best = max(parts)
    return _pick(node.children[parts.index(best)], w, u, d)


def subgradient(h: McFunction, w: Sequence) -> Vec:
    """Gradient of an active leaf chain of ``h`` at ``w``.

    Ties among active children go to the largest slope along the all-ones
    direction, then to the lowest index, so the pick is the gradient of the
    piece selected just past ``w`` in that direction when it is unique.
    """
    w = vec(w)
    return _pick(h.root, w, (Fraction(1),) * h.dim, h.dim)


def pick_subgradient(f: DcFunction, w: Sequence) -> Vec:
    """``s_h - s_g`` with both parts chosen by the same tie-break."""
    return sub(subgradient(f.h, w), subgradient(f.g, w))


@dataclass(frozen=True)
class SgmTrace:
    iterates: tuple
    subgradients: tuple
    checks: tuple  # (iteration, RstVerdict)
    certificate: Vec | None = None
    halted_at: int | None = None

    def jsonl(self) -> str:
        checks = dict(self.checks)
        lines = []
        for k, w in enumerate(self.iterates):
            rec: dict = {"k": k, "w": [fmt(v) for v in w]}
            if k < len(self.subgradients):
                rec["subgradient"] = [fmt(v) for v in self.subgradients[k]]
            if k in checks:
                v: RstVerdict = checks[k]
                rec["rst"] = v.verdict
                if v.certificate is not None:
                    rec["certificate"] = [fmt(x) for x in v.certificate]
            lines.append(json.dumps(rec))
        return "\n".join(lines)


def run(f: DcFunction, w0: Sequence, cfg: SgmConfig) -> SgmTrace:
    """Iterate ``w <- w - t_k s_k`` and stop at the first certified point."""
    w = vec(w0)
    if len(w) != f.dim:
        raise ValueError("starting point dimension mismatch")
    iterates = [w]
    grads = []
    checks = []
    k = 0
    while True:
        if k % cfg.period == 0:
            verdict = rst(f, w, cfg.eps, cfg.delta, cfg.oracle)
            checks.append((k, verdict))
            if verdict.verdict == "true":
                return SgmTrace(tuple(iterates), tuple(grads), tuple(checks), verdict.certificate, k)
        if k >= cfg.max_iter:
            return SgmTrace(tuple(iterates), tuple(grads), tuple(checks))
        s = pick_subgradient(f, w)
        grads.append(s)
        w = sub(w, scale(cfg.step_at(k + 1), s))
        iterates.append(w)
        k += 1
