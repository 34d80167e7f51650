"""Command line entry point.

Exit status: 0 verdict true or success, 1 verdict false, 2 bad input or
model, 3 numerical warning under ``--strict`` or a witness that fails replay.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import io as lio
from .bench import DEFAULT_SIZES, bench_scaling, ring_template
from .descriptor import complete_controllability, complete_observability, regularity_check
from .errors import IllConditioned, LftNdsError
from .kcf import kcf
from .model import augment, dualize, rc_network
from .numeric import TolerancePolicy
from .placement import corollary1_check, minimal_sensor_search, theorem4_check, theorem4_dual_check
from .random_models import random_nds
from .verify import (WITNESS_TOL, output_kernel, pbh_oracle_detail, replay_witnesses, subsystem_reduced_pencil,
                     verify_controllability, verify_observability, witness_residual)

EXIT_OK, EXIT_FALSE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(z) -> str:
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


def _policy(args) -> TolerancePolicy:
    return TolerancePolicy(relative_eps=args.tol_eps, absolute_floor=args.tol_floor)


def _need_model(args):
    if not args.model:
        raise UsageError("--model is required for this command")
    return lio.load_model(args.model)


def _subsystem_index(args, m) -> int:
    i = args.subsystem
    if not 1 <= i <= m.N:
        raise UsageError(f"--subsystem must lie in 1..{m.N}")
    return i - 1


@contextmanager
def _collect_warnings(sink: list):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IllConditioned)
        yield
    sink.extend(str(w.message) for w in caught if issubclass(w.category, IllConditioned))


# ---------------------------------------------------------------- text renderers

def _text_verification(d: dict) -> str:
    lines = [f"{d['property']}: {'true' if d['verdict'] else 'false'} ({d['mode']})"]
    lam = d["lambda_set"]
    if lam == "all":
        lines.append("Lambda: all of C (whole-pencil test)")
    else:
        lines.append("Lambda: {" + ", ".join(_fmt(complex(*z)) for z in lam) + "}")
    for s in d["subsystems"]:
        desc = "output FCR, dropped" if s["output_fcr"] else " ".join(s["blocks"]) or "(empty)"
        lines.append(f"  subsystem {s['index'] + 1}: {desc}")
    for f in d["failures"]:
        lines.append(f"  fails at lambda = {_fmt(complex(*f['lambda']))}: rank {f['rank']} < {f['required']}")
    if "witness_replay" in d:
        lines.append("  witness replay residuals: " + ", ".join(f"{r:.3g}" for r in d["witness_replay"]))
    lines += [f"  warning: {w}" for w in d["warnings"]]
    return "\n".join(lines)


def _text_generic(d: dict) -> str:
    shown = {k: (v + 1 if k == "subsystem" else v) for k, v in d.items() if k != "schema_version"}
    return "\n".join(f"{k}: {v}" for k, v in shown.items())


# ---------------------------------------------------------------- commands

def _replay_saved(args, m) -> tuple[dict, int]:
    doc = lio._parse_json(Path(args.verify_witness).read_text(), args.verify_witness)
    target = dualize(m) if doc.get("property") == "controllability" else m
    residuals = []
    for f in doc.get("failures", []):
        lam = complex(*f["lambda"])
        raw = f["state_witness"]
        vec = np.array([complex(*x) if isinstance(x, list) else x for x in raw])
        residuals.append(witness_residual(target, lam, vec))
    ok = all(r <= WITNESS_TOL for r in residuals)
    out = {"schema_version": lio.SCHEMA_VERSION, "replayed": len(residuals), "residuals": residuals, "certified": ok}
    return out, EXIT_OK if ok else EXIT_NUMERIC


def cmd_check(args, notes: list):
    m = _need_model(args)
    if isinstance(args.verify_witness, str):
        return _replay_saved(args, m)
    fn = verify_controllability if args.command == "check-ctrl" else verify_observability
    with _collect_warnings(notes):
        rep = fn(m, _policy(args), threads=args.threads)
    d = lio.verification_to_dict(rep, include_timings=args.timings)
    code = EXIT_OK if rep.verdict else EXIT_FALSE
    if args.verify_witness:
        res = replay_witnesses(m, rep)
        d["witness_replay"] = res
        if any(r > WITNESS_TOL for r in res):
            code = EXIT_NUMERIC
    return d, code


def cmd_kcf(args, notes: list):
    m = _need_model(args)
    i = _subsystem_index(args, m)
    a = m.augmented[i]
    if args.dual:
        a = dualize(m).augmented[i]
    k = output_kernel(a, _policy(args))
    if k.is_output_fcr:
        return {"schema_version": lio.SCHEMA_VERSION, "subsystem": i, "output_fcr": True, "blocks": []}, EXIT_OK
    with _collect_warnings(notes):
        d = kcf(subsystem_reduced_pencil(a, k), _policy(args))
    out = {"subsystem": i, "output_fcr": False, **lio.kcf_to_dict(d, include_matrices=args.matrices)}
    return out, EXIT_OK


def cmd_place(args, notes: list):
    m = _need_model(args)
    i = _subsystem_index(args, m)
    a = augment(m.subsystems[i])
    pol = _policy(args)
    if args.search:
        if args.budget is None:
            raise UsageError("--search needs --budget")
        res = minimal_sensor_search(a, args.budget, pol, seed=args.seed)
        return {"schema_version": lio.SCHEMA_VERSION, "subsystem": i,
                "sets": [list(s) for s in res.sets], "notes": list(res.notes)}, EXIT_OK if res.sets else EXIT_FALSE
    if args.dual:
        diag = theorem4_dual_check(a, pol, seed=args.seed)
    elif args.positions:
        try:
            pos = [int(p) for p in args.positions.split(",") if p.strip()]
        except ValueError as exc:
            raise UsageError("--positions takes a comma-separated list of integers") from exc
        diag = corollary1_check(a, pos, pol, seed=args.seed)
    else:
        diag = theorem4_check(a, pol, seed=args.seed)
    d = {"subsystem": i, **lio.placement_to_dict(diag)}
    return d, EXIT_OK if diag.verdict else EXIT_FALSE


def cmd_descriptor(args, notes: list):
    m = _need_model(args)
    pol = _policy(args)
    if args.check == "regularity":
        ok = regularity_check(m, pol)
        return {"schema_version": lio.SCHEMA_VERSION, "regular": ok}, EXIT_OK if ok else EXIT_FALSE
    fn = complete_controllability if args.check == "controllability" else complete_observability
    with _collect_warnings(notes):
        rep = fn(m, pol, threads=args.threads)
    return lio.descriptor_to_dict(rep, args.timings), EXIT_OK if rep.verdict else EXIT_FALSE


def cmd_gen_rc(args, notes: list):
    rng = np.random.default_rng(args.seed)
    N = args.n
    if N < 1:
        raise UsageError("--n must be positive")
    if args.phi == "resistors":
        m = ring_template(N, rng, jitter=args.jitter, output=args.output)
    else:
        conns = [(i, (i + 1) % N, 1.0) for i in range(N)] if N > 1 else []
        m = rc_network(N, 1.0, 1.0, 1.0, 1.0, conns, output=args.output, scm=-np.eye(N))
    return lio.model_to_dict(m), EXIT_OK


def cmd_oracle_compare(args, notes: list):
    rng = np.random.default_rng(args.seed)
    pol = _policy(args)
    agree = disagree = excluded = 0
    mismatches = []
    for t in range(args.n):
        m = random_nds(rng, pol=pol)
        flagged: list = []
        with _collect_warnings(flagged):
            ro = verify_observability(m, pol, threads=args.threads)
            rc = verify_controllability(m, pol, threads=args.threads)
        po, ao = pbh_oracle_detail(m, pol)
        pc, ac = pbh_oracle_detail(m, pol, controllability=True)
        if flagged or ro.warnings or rc.warnings or ao or ac:
            excluded += 1
            continue
        if (ro.verdict, rc.verdict) == (po, pc):
            agree += 1
        else:
            disagree += 1
            mismatches.append(t)
    d = {"schema_version": lio.SCHEMA_VERSION, "instances": args.n, "agreements": agree,
         "disagreements": disagree, "excluded_ill_conditioned": excluded, "mismatched_draws": mismatches}
    return d, EXIT_OK if disagree == 0 else EXIT_FALSE


def cmd_bench(args, notes: list):
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else list(DEFAULT_SIZES)
    threads = args.threads if args.parallel else 1
    res = bench_scaling(sizes, seed=args.seed, repeats=args.repeats, threads=threads, pol=_policy(args))
    if args.format == "text":
        return res.to_csv(), EXIT_OK
    d = {"schema_version": lio.SCHEMA_VERSION,
         "rows": [{"N": r.N, "t_structured": r.t_structured, "t_lumped": r.t_lumped} for r in res.rows],
         "slope_structured": res.slope_structured, "slope_lumped": res.slope_lumped}
    return d, EXIT_OK


COMMANDS = {
    "check-obs": cmd_check, "check-ctrl": cmd_check, "kcf": cmd_kcf, "place": cmd_place,
    "descriptor": cmd_descriptor, "gen-rc": cmd_gen_rc, "oracle-compare": cmd_oracle_compare, "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file")
    common.add_argument("--tol-eps", type=float, default=1.0, help="multiplier on machine epsilon in rank thresholds")
    common.add_argument("--tol-floor", type=float, default=0.0, help="absolute floor for rank thresholds")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker threads for per-subsystem stages")
    common.add_argument("--strict", action="store_true", help="exit 3 on any numerical warning")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--out", help="write the report here instead of standard output")
    common.add_argument("--timings", action="store_true", help="include stage timings (breaks byte-identical output)")

    p = argparse.ArgumentParser(prog="lftnds", description="Observability and controllability of networked LFT systems.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("check-obs", "check-ctrl"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--verify-witness", nargs="?", const=True, default=False, metavar="REPORT",
                       help="replay failure witnesses; with a saved report, replay that report instead")
    s = sub.add_parser("kcf", parents=[common], help="Kronecker form of one subsystem's reduced pencil")
    s.add_argument("--subsystem", type=int, required=True, help="1-based subsystem index")
    s.add_argument("--dual", action="store_true", help="use the dual (controllability) side")
    s.add_argument("--matrices", action="store_true", help="include U and V")
    s = sub.add_parser("place", parents=[common], help="sensor placement conditions")
    s.add_argument("--subsystem", type=int, required=True, help="1-based subsystem index")
    s.add_argument("--positions", help="comma-separated 1-based state positions")
    s.add_argument("--search", action="store_true")
    s.add_argument("--budget", type=int)
    s.add_argument("--dual", action="store_true", help="actuator-side condition")
    s = sub.add_parser("descriptor", parents=[common])
    s.add_argument("--check", choices=("regularity", "observability", "controllability"), default="observability")
    s = sub.add_parser("gen-rc", parents=[common], help="write an op-amp RC ring network model")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--output", choices=("right", "left"), default="right", help="measured capacitor")
    s.add_argument("--phi", choices=("resistors", "neg-identity"), default="resistors")
    s.add_argument("--jitter", type=float, default=0.2)
    s = sub.add_parser("oracle-compare", parents=[common], help="structured verdicts against the lumped test")
    s.add_argument("--n", type=int, default=200)
    s = sub.add_parser("bench", parents=[common], help="scaling benchmark (CSV with --format text)")
    s.add_argument("--sizes", help=f"comma-separated N values (default {','.join(map(str, DEFAULT_SIZES))})")
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--parallel", action="store_true", help="let the structured path use --threads")
    return p


def _emit(payload, args):
    if isinstance(payload, str):
        text = payload
    elif args.format == "text":
        text = _text_verification(payload) if "mode" in payload else _text_generic(payload)
    else:
        text = lio.dumps(payload)
    text = text if text.endswith("\n") else text + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    notes: list = []
    try:
        payload, code = COMMANDS[args.command](args, notes)
    except (LftNdsError, UsageError, OSError) as exc:
        print(f"lftnds: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if notes and isinstance(payload, dict):
        payload.setdefault("warnings", [])
        payload["warnings"] = list(dict.fromkeys(list(payload["warnings"]) + notes))
    _emit(payload, args)
    if args.strict and (notes or (isinstance(payload, dict) and payload.get("warnings"))):
        return EXIT_NUMERIC
    return code


def main(argv=None):
    sys.exit(run(argv))
