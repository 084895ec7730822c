"""Command line interface: ``tileforge <subcommand> ...``.

Exit codes: 0 when every checked property holds, 1 when a property fails
(a witness is written next to the report), 2 on usage or input errors.
Reports are JSON with sorted keys and embed the tool version, the
configuration and the RNG seed, so reruns with the same arguments produce
identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boxes import TilingCheckError
from .cm_conditions import cm_report, standard_complement
from .crt_lattice import CrtFrame, project_many, read_lattice_text, write_lattice_text
from .cuboid_lab import fiber_combination_solve, phi_M_divides_via_cuboids
from .cyclic_core import SizeCapError, WeightedCyclicSet, poly_divides
from .keller_props import (
    ckp_check_set, hypothesis_profile, ikp1_check, ikp1_scan_large, ikp2_check, splitting_report,
)
from .search_oracles import ckp_exhaustive, survey
from .szabo_periodize import (
    build_counterexample, ingest_seed, read_box_tiling, slice_rectangles, write_counterexample,
    write_slice_csv,
)
from .tiling_checks import METHODS, verify_tiling

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _workers(args) -> int:
    if args.workers is not None:
        n = args.workers
    else:
        n = int(os.environ.get("TILEFORGE_THREADS", "1"))
    if n < 1:
        raise UsageError("worker count must be positive")
    return n


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, body: dict, witness=None) -> None:
    report = {"tool": "tileforge", "version": __version__, "config": _config(args),
              "rng_seed": getattr(args, "rng_seed", None), **body}
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    if witness is not None:
        path = Path(args.report).with_suffix(".witness.json") if args.report else Path("witness.json")
        if args.witness:
            path = Path(args.witness)
        path.write_text(json.dumps(witness, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_tiling(path) -> tuple[list[int], list[int], int]:
    data = _load_json(path)
    try:
        return [int(x) for x in data["A"]], [int(x) for x in data["B"]], int(data["modulus"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: expected keys modulus, A, B") from exc


def _load_set(path, modulus=None) -> WeightedCyclicSet:
    data = _load_json(path)
    if modulus is not None:
        data = {**data, "modulus": modulus}
    if "modulus" not in data:
        raise UsageError(f"{path}: no modulus given")
    try:
        return WeightedCyclicSet.from_json(data)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    A, B, M = _load_tiling(args.tiling)
    methods = tuple(args.methods.split(",")) if args.methods else METHODS
    cert = verify_tiling(A, B, M, methods)
    body = {"tiling": cert.to_json()}
    _emit(args, body, None if cert.verdict else cert.witness)
    return EXIT_OK if cert.verdict else EXIT_VIOLATION


def cmd_keller(args) -> int:
    A, B, M = _load_tiling(args.tiling)
    w1 = ikp1_check(A, B, M)
    w2a, w2b = ikp2_check(A, M), ikp2_check(B, M)
    body = {
        "ikp1": None if w1 is None else {"side": w1.side, "direction": w1.direction, "pair": list(w1.pair)},
        "ikp2_A": None if w2a is None else {"base": w2a.base, "direction": w2a.direction},
        "ikp2_B": None if w2b is None else {"base": w2b.base, "direction": w2b.direction},
        "ckp_A": ckp_check_set(A, M).status,
        "ckp_B": ckp_check_set(B, M).status,
        "profile": hypothesis_profile(A, B, M).to_json(),
    }
    if verify_tiling(A, B, M, ("sands",)).verdict:
        d = len(body["profile"]["primes"])
        body["splitting"] = {str(i): splitting_report(A, B, M, i).case for i in range(1, d + 1)}
    failed = w1 is None or (w2a is None and w2b is None)
    _emit(args, body, {"A": A, "B": B, "modulus": M} if failed else None)
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_cuboid(args) -> int:
    S = _load_set(args.set, args.modulus)
    v = phi_M_divides_via_cuboids(S)
    body = {"divisible": v.divisible,
            "polynomial_check": poly_divides(S, S.modulus) if S.modulus > 1 else v.divisible}
    wit = None
    if not v.divisible:
        c = v.witness
        wit = {"anchor": c.anchor, "offsets": list(c.offsets), "value": v.value}
        body["witness"] = wit
    _emit(args, body, wit)
    return EXIT_OK if v.divisible else EXIT_VIOLATION


def cmd_fiber(args) -> int:
    S = _load_set(args.set, args.modulus)
    sol = fiber_combination_solve(S)
    if sol is None:
        _emit(args, {"solvable": False}, {"set": S.to_json()})
        return EXIT_VIOLATION
    body = {"solvable": True, "nonnegative": sol.nonnegative, "repair_failed": sol.repair_failed,
            "coefficients": [P.to_json() for P in sol.coefficients]}
    _emit(args, body)
    return EXIT_OK


def cmd_convert(args) -> int:
    if args.lift:
        S = _load_set(args.input, args.modulus)
        frame = CrtFrame.for_modulus(S.modulus)
        out = args.output or "lattice.txt"
        write_lattice_text(out, frame, frame.lift(S.elements()))
        _emit(args, {"lifted": len(S), "output": str(out)})
    else:
        frame, vecs = read_lattice_text(args.input)
        res = sorted(int(x) for x in project_many(vecs, frame))
        out = args.output or "residues.json"
        Path(out).write_text(json.dumps({"modulus": frame.modulus, "elements": res}) + "\n")
        _emit(args, {"projected": len(res), "distinct": len(set(res)), "output": str(out)})
    return EXIT_OK


def cmd_cm(args) -> int:
    S = _load_set(args.set, args.modulus)
    rep = cm_report(S, S.modulus)
    body = {"cm": rep.to_json()}
    if args.complement and rep.t1 and rep.t2:
        body["standard_complement"] = standard_complement(S, S.modulus).tolist()
    ok = rep.t1 and rep.t2
    _emit(args, body, None if ok else rep.to_json())
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_construct(args) -> int:
    primes = [int(p) for p in args.primes.split(",")]
    order = [int(x) for x in args.order.split(",")] if args.order else None
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    try:
        seed = ingest_seed(args.seed)
        ce = build_counterexample(primes, seed, samples=args.samples, rng_seed=args.rng_seed,
                                  stack_offset=args.stack_offset, order=order, pairs=args.pairs,
                                  allow_large=args.allow_large, log=log)
    except TilingCheckError as exc:
        _emit(args, {"status": "FAILED", "code": exc.code, "message": str(exc)},
              {"code": exc.code, "witness": exc.witness})
        return EXIT_VIOLATION
    out = Path(args.out)
    write_counterexample(out, ce, lattice_text=not args.no_lattice_text)
    body = {"status": "OK", "construction": ce.report}
    # a column of boxes is a fiber translate inside A
    column = next(((i, w) for i, w in ce.report["properties"]["columns"].items() if w is not None), None)
    body["ikp2_A"] = None if column is None else {"direction": int(column[0]), "lattice_vector": column[1]}
    if args.ikp1:
        body["ikp1_scan"] = [
            {"direction": v.direction, "prime": v.prime, "found": v.found, "witness": v.witness}
            for v in ikp1_scan_large(ce.tiling)
        ]
    _emit(args, body)
    return EXIT_OK


def cmd_survey(args) -> int:
    out = Path(args.out)
    with out.open("w") as fh:
        _, stats = survey(args.modulus, cap=args.cap, complement_cap=args.complement_cap,
                          t1_prune=not args.no_t1_prune, out=fh)
    body = {"survey": stats.to_json(), "rows_file": str(out)}
    bad = stats.ikp1_failures or stats.ikp2_failures
    _emit(args, body, body["survey"] if bad else None)
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_ckp(args) -> int:
    res = ckp_exhaustive(args.modulus)
    body = {"modulus": res.modulus, "status": res.status, "witness": res.witness,
            "candidates": res.candidates}
    _emit(args, body, {"witness": res.witness} if res.status == "VIOLATION" else None)
    return EXIT_VIOLATION if res.status == "VIOLATION" else EXIT_OK


def cmd_slice(args) -> int:
    T, _, _ = read_box_tiling(args.tiling)
    dims = tuple(int(x) - 1 for x in args.dims.split(","))
    if len(dims) != 2 or not all(0 <= x < T.d for x in dims):
        raise UsageError("--dims needs two directions between 1 and d")
    point = [int(x) for x in args.point.split(",")] if args.point else [0] * T.d
    if len(point) != T.d:
        raise UsageError("--point needs d coordinates")
    rows = slice_rectangles(T, dims, point)
    write_slice_csv(args.out, rows)
    _emit(args, {"rectangles": int(len(rows)), "output": str(args.out)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tileforge", description="Cyclic tilings, Keller properties and cube tilings.")
    p.add_argument("--version", action="version", version=f"tileforge {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", help="write the JSON report here instead of stdout")
    common.add_argument("--witness", help="where to write a witness on failure")
    common.add_argument("--workers", type=int, default=None,
                        help="worker count (falls back to TILEFORGE_THREADS; scans run in one process)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify", parents=[common], help="check that A + B = Z_M by three methods")
    s.add_argument("--tiling", required=True, help="JSON with modulus, A, B")
    s.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("keller", parents=[common], help="IKP1, IKP2, CKP, splitting and hypothesis profile")
    s.add_argument("--tiling", required=True)
    s.set_defaults(func=cmd_keller)

    s = sub.add_parser("cuboid-test", parents=[common], help="Phi_M divisibility by the cuboid sweep")
    s.add_argument("--set", required=True, help="JSON with elements or weights")
    s.add_argument("--modulus", type=int)
    s.set_defaults(func=cmd_cuboid)

    s = sub.add_parser("fiber-solve", parents=[common], help="write a set as a combination of fibers")
    s.add_argument("--set", required=True)
    s.add_argument("--modulus", type=int)
    s.set_defaults(func=cmd_fiber)

    s = sub.add_parser("convert", parents=[common], help="lift residues to CRT vectors or project back")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--lift", action="store_true")
    g.add_argument("--project", action="store_true")
    s.add_argument("--input", required=True)
    s.add_argument("--output")
    s.add_argument("--modulus", type=int)
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("cm", parents=[common], help="S_A, T1, T2 and the standard complement")
    s.add_argument("--set", required=True)
    s.add_argument("--modulus", type=int)
    s.add_argument("--complement", action="store_true")
    s.set_defaults(func=cmd_cm)

    s = sub.add_parser("construct", parents=[common], help="periodize a seed into a column-free cube tiling")
    s.add_argument("--primes", required=True, help="ascending distinct primes, comma separated")
    s.add_argument("--seed", required=True, help="seed tiling file")
    s.add_argument("--out", default="construct_out", help="output directory")
    s.add_argument("--samples", type=int, default=10**4, help="Monte-Carlo covering points")
    s.add_argument("--pairs", type=int, default=10**5, help="sampled pairs for the cube criterion")
    s.add_argument("--rng-seed", type=int, default=0)
    s.add_argument("--stack-offset", type=int, default=None,
                   help="layer offset along direction 1 in doubled units (default: half a box)")
    s.add_argument("--order", help="periodization order as a permutation of 1..d")
    s.add_argument("--allow-large", action="store_true", help="lift the 4 GiB memory cap")
    s.add_argument("--no-lattice-text", action="store_true", help="skip the text dump of the lattice vectors")
    s.add_argument("--ikp1", action="store_true", help="also run the large IKP1 scan")
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("survey", parents=[common], help="enumerate tilings of Z_M with property flags")
    s.add_argument("--modulus", type=int, required=True)
    s.add_argument("--out", default="rows.jsonl")
    s.add_argument("--cap", type=int, default=None, help="tiles per size")
    s.add_argument("--complement-cap", type=int, default=None, help="complements per tile")
    s.add_argument("--no-t1-prune", action="store_true")
    s.set_defaults(func=cmd_survey)

    s = sub.add_parser("ckp-search", parents=[common], help="exhaustive CKP search (M <= 40)")
    s.add_argument("--modulus", type=int, required=True)
    s.set_defaults(func=cmd_ckp)

    s = sub.add_parser("slice-dump", parents=[common], help="2-D slice of a box tiling as CSV")
    s.add_argument("--tiling", required=True, help="box tiling file (seed format)")
    s.add_argument("--dims", default="1,2")
    s.add_argument("--point", help="base point in doubled coordinates")
    s.add_argument("--out", default="slice.csv")
    s.set_defaults(func=cmd_slice)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        _workers(args)
        return args.func(args)
    except (UsageError, SizeCapError, OSError) as exc:
        print(f"tileforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TilingCheckError as exc:
        print(f"tileforge: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ValueError as exc:
        print(f"tileforge: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
