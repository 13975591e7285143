"""Command-line front end.

    k3twistor forms classify|isotropic-census
    k3twistor twistor fiber|census|lift
    k3twistor crystal build|verify|twist|tate|compare
    k3twistor suite

Artifacts (subspaces, crystals) travel as JSON on stdin/stdout so commands
compose with pipes.  Exit codes: 0 pass, 1 failed check, 2 usage or input
error, 3 precision error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
import time

from . import gfield as gf
from .charspace import CharError, CharSubspace, artin_invariant, random_strictly_characteristic, with_artin
from .crystal import (CrystalError, TateModel, compare_tate, crystal_from_char, crystal_from_json,
                      ext_ns, is_transcendental, mukai_extend, bfield_sample, scaled_gram_control,
                      tate_model, tate_module, twist, unimodular_control, verify_k3)
from .padic import PrecisionError
from .quadspace import (BudgetExceeded, QuadError, QuadSpace, build_standard, classify,
                        isotropic_count, isotropic_formula, witt_index)
from .twistor import TwistorError, fiber_group, lift_K_B, line_census, artin_of_lift

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_PRECISION = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --- I/O ---

def _read_input(args):
    if args.input:
        with open(args.input) as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    if not text.strip():
        raise UsageError("expected a JSON artifact on stdin or via --in")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON input: {exc}") from exc
    return d.get("artifact", d) if isinstance(d, dict) else d


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, list) and all(not isinstance(x, (dict, list)) for x in obj):
        out.append((prefix, " ".join(map(str, obj))))
    elif isinstance(obj, list):
        for i, x in enumerate(obj):
            _flatten(f"{prefix}.{i}", x, out)
    else:
        out.append((prefix, obj))


def _emit(args, report: dict):
    if args.format == "csv":
        rows = []
        _flatten("", {k: v for k, v in report.items() if k != "artifact"}, rows)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(args, command, statement, results, passed, artifact=None):
    cfg = {k: getattr(args, k) for k in ("p", "sigma0", "sigma", "m", "N", "seed", "budget", "kind", "extra")
           if getattr(args, k, None) is not None}
    rep = {"command": command, "config": cfg, "statement": statement,
           "results": results, "pass": bool(passed)}
    if artifact is not None:
        rep["artifact"] = artifact
    return rep


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + n for n in missing))


# --- forms ---

def cmd_forms(args):
    if args.sub == "classify":
        if _piped(args):
            Q = QuadSpace.from_json(_read_input(args))
        else:
            _need(args, "p", "sigma0")
            Q = build_standard(args.p, args.sigma0, args.kind or "nonneutral")
        if Q.dim % 2:
            raise UsageError(f"odd-dimension: Gram has dimension {Q.dim}")
        res = {"dim": Q.dim, "classification": classify(Q), "witt_index": witt_index(Q)}
        return _report(args, "forms classify", "classification of non-degenerate forms over F_p",
                       res, True)
    _need(args, "p", "sigma0")
    Q = build_standard(args.p, args.sigma0 + 1, "nonneutral")
    count = isotropic_count(Q, args.budget)
    formula = isotropic_formula(args.p, args.sigma0)
    res = {"dim": Q.dim, "count": count, "formula": formula, "match": count == formula}
    return _report(args, "forms isotropic-census",
                   "nonzero isotropic vectors in the non-neutral space of dimension 2 sigma0 + 2",
                   res, count == formula)


# --- twistor ---

def _piped(args) -> bool:
    return bool(args.input) or (args.p is None and not sys.stdin.isatty())


def _char_from_args(args) -> CharSubspace:
    if _piped(args):
        return CharSubspace.from_json(_read_input(args))
    _need(args, "p", "sigma0", "m")
    V = build_standard(args.p, args.sigma0, "nonneutral")
    sigma = args.sigma if args.sigma is not None else 1
    return with_artin(V, args.m, sigma, args.seed)


def cmd_twistor(args):
    K = _char_from_args(args)
    if args.sub == "fiber":
        G = fiber_group(K)
        res = G.to_json()
        res["expected_fp_dim"] = K.m + K.sigma0 - G.sigma
        res["expected_components"] = K.V.p ** (K.sigma0 - G.sigma)
        ok = G.fp_dim == res["expected_fp_dim"] and G.components == res["expected_components"]
        return _report(args, "twistor fiber",
                       "fiber of the projection is a line times (Z/p)^(sigma0 - sigma)", res, ok,
                       artifact=K.to_json())
    if args.sub == "census":
        rep = line_census(K, budget=args.budget)
        return _report(args, "twistor census",
                       "special points per twistor line and incidence with rational isotropic vectors",
                       rep.to_json(), rep.passed())
    G = fiber_group(K)
    reps = G.coset_reps(args.budget)
    B = next(itertools.islice(reps, args.index, None), None)
    if B is None:
        raise UsageError(f"fiber has fewer than {args.index + 1} points")
    Kt = lift_K_B(K, B, G.ctx)
    la = artin_of_lift(K, B, G.ctx, base_sigma=G.sigma, Kt=Kt)
    res = {"B": gf.matrix_to_json(K.F, [B])[0], "artin": la.sigma, "base_sigma": G.sigma,
           "consistent": la.consistent}
    return _report(args, "twistor lift", "the lift K(B) is characteristic with invariant sigma or sigma + 1",
                   res, la.consistent, artifact=Kt.to_json())


# --- crystal ---

def _build_crystal(args):
    _need(args, "p", "sigma0", "m")
    N = 6 if args.N is None else args.N
    T = tate_model(args.p, args.sigma0, extra=args.extra or 0, N=N)
    if N < 3:
        raise PrecisionError(f"precision N={N} is below the required 3", N)
    K = random_strictly_characteristic(T.T0, args.m, args.seed)
    H = crystal_from_char(K, T, N)
    if args.control == "unimodular":
        H = unimodular_control(args.p, args.m, H.n, N)
    elif args.control == "scaled-gram":
        H = scaled_gram_control(H)
    return H


def cmd_crystal(args):
    if args.sub == "build":
        H = _build_crystal(args)
        res = {"rank": H.n, "ledger": H.ledger, "kind": H.kind}
        return _report(args, "crystal build", "crystal attached to a strictly characteristic subspace",
                       res, True, artifact=H.to_json())
    H = crystal_from_json(_read_input(args))
    if args.sub == "verify":
        rep = verify_k3(H)
        return _report(args, "crystal verify", "K3 crystal axioms and full Tate rank",
                       rep.to_json(), rep.passed(), artifact=H.to_json())
    if args.sub == "tate":
        TM = tate_module(H)
        res = TM.to_json()
        base = H.model.sigma0 if H.model else None
        res["model_sigma0"] = base
        return _report(args, "crystal tate", "Artin invariant as half the discriminant valuation of the Tate module",
                       res, TM.disc_valuation % 2 == 0, artifact=H.to_json())
    if args.sub == "twist":
        base = H.base if H.kind == "mukai" else H
        Ht = H if H.kind == "mukai" else mukai_extend(H)
        kind = args.kind or "transcendental"
        B = bfield_sample(base, kind, args.seed)
        X = twist(Ht, B)
        rep = verify_k3(X)
        TM = tate_module(X)
        res = {"bfield": B.to_json(), "transcendental": is_transcendental(base, B),
               "ledger": X.ledger, "denom_exp": X.emb.d, "axioms": rep.to_json(),
               "artin": TM.artin, "base_artin": tate_module(base).artin}
        return _report(args, "crystal twist", "twisted Mukai crystal is a K3 crystal",
                       res, rep.passed(), artifact=X.to_json())
    # compare
    if H.kind != "mukai" or H.model is None:
        raise UsageError("compare expects a Mukai crystal (output of crystal twist)")
    T = H.model
    base = H.base
    case, t = "trivial", None
    trans = [B for B in H.bfields if is_transcendental(base, B)]
    if trans:
        case = "transcendental"
    elif H.bfields:
        case = "essentially-trivial"
        t = [sum(int(B.t[i]) for B in H.bfields) for i in range(T.rank)]
    ens = ext_ns(T.gram, case, T.p, t=t)
    cmp = compare_tate(ens, H)
    res = {"case": case, **cmp.to_json()}
    return _report(args, "crystal compare",
                   "extended Neron-Severi lattice tensored with Z_p is the Tate module of the twist",
                   res, cmp.equal)


# --- suite ---

def cmd_suite(args):
    """Quick versions of the headline checks; exits nonzero iff one fails."""
    checks = {}
    for p, s0 in [(3, 1), (3, 2), (5, 1)]:
        Q = build_standard(p, s0 + 1)
        checks[f"isotropic_count_p{p}_s{s0}"] = isotropic_count(Q) == isotropic_formula(p, s0)
    V = build_standard(3, 2)
    K = with_artin(V, 4, 1, seed=1)
    checks["line_census_p3_s2_m4"] = line_census(K).passed()
    T = tate_model(3, 1, N=8)
    H = crystal_from_char(random_strictly_characteristic(T.T0, 4, 1), T)
    checks["crystal_axioms"] = verify_k3(H).passed()
    checks["crystal_disc"] = tate_module(H).disc_valuation == 2
    X = twist(mukai_extend(H), bfield_sample(H, "transcendental", 1))
    checks["transcendental_twist_axioms"] = verify_k3(X).passed()
    checks["transcendental_twist_disc"] = tate_module(X).disc_valuation == 4
    ok = all(checks.values())
    return _report(args, "suite", "quick run of the headline checks", checks, ok)


# --- entry point ---

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=int)
    common.add_argument("--sigma0", type=int)
    common.add_argument("--sigma", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--N", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=10 ** 6)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--in", dest="input")
    common.add_argument("--out")
    common.add_argument("--kind")
    common.add_argument("--extra", type=int)
    common.add_argument("--index", type=int, default=0, help="fiber point index for twistor lift")
    common.add_argument("--control", choices=["unimodular", "scaled-gram"])
    common.add_argument("--timing", action="store_true", help="add wall-clock time to the report")

    ap = argparse.ArgumentParser(prog="k3twistor", description="Supersingular K3 twistor computations.")
    top = ap.add_subparsers(dest="cmd", required=True)
    for name, subs in [("forms", ["classify", "isotropic-census"]),
                       ("twistor", ["fiber", "census", "lift"]),
                       ("crystal", ["build", "verify", "twist", "tate", "compare"])]:
        p = top.add_parser(name)
        sp = p.add_subparsers(dest="sub", required=True)
        for s in subs:
            sp.add_parser(s, parents=[common])
    top.add_parser("suite", parents=[common])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"forms": cmd_forms, "twistor": cmd_twistor, "crystal": cmd_crystal,
               "suite": cmd_suite}[args.cmd]
    t0 = time.perf_counter()
    try:
        rep = handler(args)
    except PrecisionError as exc:
        print(f"precision error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (UsageError, BudgetExceeded, QuadError, CharError, CrystalError, TwistorError,
            ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.timing:
        rep["seconds"] = round(time.perf_counter() - t0, 3)
    _emit(args, rep)
    return EXIT_PASS if rep["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
