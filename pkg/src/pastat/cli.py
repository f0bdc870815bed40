"""``pa-stat`` command line.

Exit codes: 0 when a verdict was computed (whatever it is), 2 on bad
input, 3 when an enumeration cap was hit or the oracle refused.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from typing import Sequence

from . import caps
from .apps import load_dataset, relu2_qualification, svm_pa_part
from .butterfly import ORACLES, oracle_dispatch, rst
from .exactsolve import fmt, q, vec
from .hardgen import (
    ParMaxInstance,
    gen_dcc,
    gen_dcf,
    gen_maxmin_3sat,
    gen_maxmin_3sat_clarke,
    parse_dimacs,
    random_cnf,
    random_parmax,
)
from .pafunc import INF, DcFunction, MaxMinFunction, as_dc, delta_sep, dir_deriv, eval_fn, from_json, to_json
from .polytope import canonicalize, compatible, load_polytope, minkowski_diff, par_trivial_intersection
from .sgm import SCHEDULES, SgmConfig, run
from .subdiff import (
    clarke_dist_sq,
    clarke_subdiff_brute,
    dc_critical_dist_sq,
    frechet_dist_sq,
    frechet_stationary,
    subdiff_vertices,
    transversal_at,
)

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 2, 3


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# input helpers

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _read_json(path: str) -> dict:
    text = _read_text(path)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(obj, dict):
        raise InputError(f"{path} must hold a JSON object")
    return obj


def _load_fn(path: str):
    try:
        return from_json(_read_json(path))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed function file {path}: {exc}") from exc


def _parse_vector(text: str, dim: int | None = None) -> tuple:
    """``"1/2,0"``, ``"[1, 2]"`` or a single scalar broadcast to ``dim``."""
    s = text.strip()
    if s.startswith("["):
        try:
            items = json.loads(s)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed vector {text!r}") from exc
        items = [str(v) for v in items]
    else:
        items = [t for t in s.split(",") if t.strip()]
    if not items:
        raise InputError("empty vector")
    try:
        v = vec(items)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    if dim is not None:
        if len(v) == 1 and dim > 1:
            v = v * dim
        if len(v) != dim:
            raise InputError(f"dimension mismatch: expected {dim} coordinates, got {len(v)}")
    return v


def _rational(text: str) -> Fraction:
    try:
        return q(text)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc


def _vlist(vs) -> list:
    return [[fmt(x) for x in v] for v in vs]


def _dc(f, what: str) -> DcFunction:
    if isinstance(f, MaxMinFunction):
        raise InputError(f"{what} needs a DC or convex tree function, not Max-Min")
    return as_dc(f)


# ---------------------------------------------------------------------------
# output

def _emit(args, payload: dict, human: str | None = None) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(human if human is not None else "\n".join(f"{k}: {_plain(v)}" for k, v in payload.items()))


def _plain(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_plain(x) for x in v) + "]"
    if v is True:
        return "true"
    if v is False:
        return "false"
    return str(v)


# ---------------------------------------------------------------------------
# commands

def cmd_eval(args) -> int:
    f = _load_fn(args.fn)
    w = _parse_vector(args.point, f.dim)
    v = fmt(eval_fn(f, w))
    _emit(args, {"value": v}, v)
    return EXIT_OK


def cmd_dirderiv(args) -> int:
    f = _load_fn(args.fn)
    w = _parse_vector(args.point, f.dim)
    d = _parse_vector(args.dir, f.dim)
    v = fmt(dir_deriv(f, w, d))
    _emit(args, {"dirderiv": v}, v)
    return EXIT_OK


def _subdiff(f, w, kind: str):
    if kind == "clarke":
        return clarke_subdiff_brute(f if isinstance(f, MaxMinFunction) else as_dc(f), w)
    g = _dc(f, f"--kind {kind}")
    if kind == "convex":
        if isinstance(f, DcFunction):
            raise InputError("--kind convex needs a convex (mc) function")
        return subdiff_vertices(g.h, w)
    return minkowski_diff(subdiff_vertices(g.h, w), subdiff_vertices(g.g, w))


def cmd_subdiff(args) -> int:
    f = _load_fn(args.fn)
    w = _parse_vector(args.point, f.dim)
    P = _subdiff(f, w, args.kind)
    verts = _vlist(canonicalize(P).vertices)
    _emit(args, {"kind": args.kind, "vertices": verts})
    return EXIT_OK


def cmd_dist(args) -> int:
    f = _load_fn(args.fn)
    w = _parse_vector(args.point, f.dim)
    if args.kind == "clarke":
        d2 = clarke_dist_sq(f if isinstance(f, MaxMinFunction) else as_dc(f), w)
    elif args.kind == "dc-critical":
        d2 = dc_critical_dist_sq(_dc(f, "dc-critical distance"), w)
    else:
        d2 = frechet_dist_sq(_dc(f, "Frechet distance"), w)
        if d2 is None:
            _emit(args, {"kind": args.kind, "dist_sq": None, "empty": True}, "empty subdifferential")
            return EXIT_OK
    _emit(args, {"kind": args.kind, "dist_sq": fmt(d2)}, fmt(d2))
    return EXIT_OK


def cmd_test_exact(args) -> int:
    f = _load_fn(args.fn)
    w = _parse_vector(args.point, f.dim)
    eps = _rational(args.eps)
    if args.oracle == "frechet-brute" and isinstance(f, MaxMinFunction):
        res = frechet_stationary(f, w).stationary if eps == 0 else None
        if res is None:
            raise InputError("frechet-brute with eps > 0 needs a DC function")
    elif isinstance(f, MaxMinFunction) and args.oracle == "clarke-brute":
        res = clarke_dist_sq(f, w) <= eps * eps
    else:
        res = oracle_dispatch(args.oracle, _dc(f, f"oracle {args.oracle}"), w, eps)
    if res is True or res is False:
        _emit(args, {"verdict": "true" if res else "false"})
        return EXIT_OK
    _emit(args, {"verdict": "refused", "reason": res.reason})
    return EXIT_CAP


def cmd_test_robust(args) -> int:
    f = _dc(_load_fn(args.fn), "test-robust")
    w = _parse_vector(args.point, f.dim)
    v = rst(f, w, _rational(args.eps), _rational(args.delta), args.oracle)
    out = v.to_json()
    if not args.trace:
        out.pop("trace")
    if args.json:
        print(json.dumps(out))
    else:
        lines = [f"verdict: {v.verdict}"]
        if v.certificate is not None:
            lines.append("certificate: " + _plain([fmt(x) for x in v.certificate]))
        if v.reason:
            lines.append(f"reason: {v.reason}")
        lines.append(f"delta_sep: {out['delta_sep']}")
        lines.append(f"iterations: {v.iterations}")
        print("\n".join(lines))
    return EXIT_CAP if v.verdict == "refused" else EXIT_OK


def _polys(args):
    try:
        A = load_polytope(_read_json(args.a))
        B = load_polytope(_read_json(args.b))
    except (KeyError, TypeError, IndexError) as exc:
        raise InputError(f"malformed polytope file: {exc}") from exc
    if A.dim != B.dim:
        raise InputError(f"dimension mismatch: {A.dim} vs {B.dim}")
    return A, B


def cmd_check_compat(args) -> int:
    A, B = _polys(args)
    c = compatible(A, B)
    _emit(args, {"compatible": c.compatible, "violations": [_vlist(pair) for pair in c.violations]})
    return EXIT_OK


def cmd_check_transversal(args) -> int:
    if args.fn:
        f = _dc(_load_fn(args.fn), "check-transversal")
        if args.point is None:
            raise InputError("--fn needs --point")
        t = transversal_at(f, _parse_vector(args.point, f.dim))
    else:
        if not (args.a and args.b):
            raise InputError("give either --fn/--point or --a/--b")
        A, B = _polys(args)
        t = par_trivial_intersection(A, B)
    _emit(args, {"transversal": t})
    return EXIT_OK


def cmd_delta_sep(args) -> int:
    f = _dc(_load_fn(args.fn), "delta-sep")
    w = _parse_vector(args.point, f.dim)
    r = delta_sep(f, w)
    s = "inf" if r == INF else fmt(r)
    _emit(args, {"delta_sep": s}, s)
    return EXIT_OK


def cmd_gen_3sat(args) -> int:
    if args.cnf:
        cnf = parse_dimacs(_read_text(args.cnf))
    else:
        if args.vars is None or args.clauses is None:
            raise InputError("give --cnf or both --vars and --clauses")
        cnf = random_cnf(args.vars, args.clauses, random.Random(args.seed))
    if args.form == "dimacs":
        sys.stdout.write(cnf.to_dimacs())
        return EXIT_OK
    f = gen_maxmin_3sat(cnf) if args.form == "maxmin" else gen_maxmin_3sat_clarke(cnf)
    print(json.dumps(to_json(f)))
    return EXIT_OK


def cmd_gen_parmax(args) -> int:
    if args.instance:
        obj = _read_json(args.instance)
        try:
            inst = ParMaxInstance.of(obj["n"], obj["alpha"], obj["ys"])
        except KeyError as exc:
            raise InputError(f"instance file misses {exc}") from exc
    else:
        if args.n is None or args.m is None:
            raise InputError("give --instance or both --n and --m")
        inst = random_parmax(args.n, args.m, random.Random(args.seed), args.alpha)
    if args.form == "instance":
        payload = {"n": inst.n, "alpha": inst.alpha, "ys": [[int(v) for v in y] for y in inst.ys], "yes": inst.yes()}
        print(json.dumps(payload))
        return EXIT_OK
    f = gen_dcf(inst) if args.form == "dcf" else gen_dcc(inst)
    print(json.dumps(to_json(f)))
    return EXIT_OK


def cmd_run_sgm(args) -> int:
    f = _dc(_load_fn(args.fn), "run-sgm")
    w0 = _parse_vector(args.w0, f.dim)
    cfg = SgmConfig(
        step=_rational(args.step),
        schedule=args.schedule,
        max_iter=args.max_iter,
        eps=_rational(args.eps),
        delta=_rational(args.delta),
        oracle=args.oracle,
        period=args.period,
    )
    tr = run(f, w0, cfg)
    if args.json:
        print(tr.jsonl())
    else:
        if tr.certificate is not None:
            print(f"halted at iteration {tr.halted_at}; certificate {_plain([fmt(x) for x in tr.certificate])}")
        else:
            print(f"no certificate after {len(tr.iterates) - 1} iterations")
    return EXIT_OK


def cmd_check_qualification(args) -> int:
    data = load_dataset(_read_json(args.data))
    if args.model == "svm":
        if args.rho is None or args.point is None:
            raise InputError("svm needs --rho and --point")
        _, rep = svm_pa_part(data, _rational(args.rho), _parse_vector(args.point, data.dim))
    else:
        if not args.params:
            raise InputError("relu2 needs --params")
        obj = _read_json(args.params)
        try:
            units = [(u["w"], u["u"]) for u in obj["units"]]
            p = obj["p"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"params file needs 'units' with 'w','u' and 'p': {exc}") from exc
        rep = relu2_qualification(data, units, p)
    _emit(args, rep.to_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pa-stat", description="Exact stationarity tests for piecewise affine functions.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.set_defaults(func=fn)
        return sp

    def fn_point(sp, point=True):
        sp.add_argument("--fn", default="-", help="function JSON file, '-' for stdin")
        if point:
            sp.add_argument("--point", required=True, help="point as 'a,b,..' or a scalar broadcast to all coordinates")

    sp = add("eval", cmd_eval, "evaluate f at a point")
    fn_point(sp)
    sp = add("dirderiv", cmd_dirderiv, "directional derivative f'(w; d)")
    fn_point(sp)
    sp.add_argument("--dir", required=True)
    sp = add("subdiff", cmd_subdiff, "vertices of a subdifferential")
    fn_point(sp)
    sp.add_argument("--kind", choices=("clarke", "convex", "dc"), default="clarke")
    sp = add("dist", cmd_dist, "squared distance from 0 to a subdifferential")
    fn_point(sp)
    sp.add_argument("--kind", choices=("clarke", "dc-critical", "frechet"), default="clarke")
    sp = add("test-exact", cmd_test_exact, "exact eps-stationarity test at a point")
    fn_point(sp)
    sp.add_argument("--eps", default="0")
    sp.add_argument("--oracle", choices=ORACLES, default="clarke-brute")
    sp = add("test-robust", cmd_test_robust, "robust near-stationarity test")
    fn_point(sp)
    sp.add_argument("--eps", default="0")
    sp.add_argument("--delta", required=True)
    sp.add_argument("--oracle", choices=ORACLES, default="clarke-brute")
    sp.add_argument("--trace", action="store_true", help="include the per-iteration trace")
    sp = add("check-compat", cmd_check_compat, "compatibility of two polytopes")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp = add("check-transversal", cmd_check_transversal, "transversality of two polytopes or of ∂h, ∂g at a point")
    sp.add_argument("--a")
    sp.add_argument("--b")
    sp.add_argument("--fn")
    sp.add_argument("--point")
    sp = add("delta-sep", cmd_delta_sep, "separation radius at a point")
    fn_point(sp)
    sp = add("gen-3sat", cmd_gen_3sat, "Max-Min function from a 3-CNF")
    sp.add_argument("--cnf", help="DIMACS file, '-' for stdin")
    sp.add_argument("--vars", type=int)
    sp.add_argument("--clauses", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--form", choices=("maxmin", "maxmin-clarke", "dimacs"), default="maxmin-clarke")
    sp = add("gen-parmax", cmd_gen_parmax, "DC pair from a sign-maximisation instance")
    sp.add_argument("--instance", help="JSON file with n, alpha, ys")
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--alpha", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--form", choices=("dcf", "dcc", "instance"), default="dcf")
    sp = add("run-sgm", cmd_run_sgm, "subgradient method with the robust stopping rule")
    fn_point(sp, point=False)
    sp.add_argument("--w0", required=True)
    sp.add_argument("--step", default="1/4")
    sp.add_argument("--schedule", choices=SCHEDULES, default="constant")
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("--eps", default="0")
    sp.add_argument("--delta", default="1/10")
    sp.add_argument("--oracle", choices=ORACLES, default="clarke-brute")
    sp.add_argument("--period", type=int, default=1)
    sp = add("check-qualification", cmd_check_qualification, "sum-rule qualification for SVM or two-layer ReLU data")
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", choices=("svm", "relu2"), default="relu2")
    sp.add_argument("--rho")
    sp.add_argument("--point")
    sp.add_argument("--params", help="JSON with units [{w, u}] and loss derivatives p")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except caps.CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InputError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
