"""Command-line front end over the bound, code, simulation and amplifier tools.

Subcommands produce JSON reports that embed a run manifest (command,
input hashes, seeds, parameters, tool version) and validate against the
schemas shipped in wiretapnet/schemas.  Exit codes separate results from
failures: 0 means a report was computed, even when it says infeasible or
lists violations; 2 means the inputs or parameters were unusable; 3
means a configured size cap refused the computation.  Wall time goes to
stderr so identical runs stay byte-identical.

Exact rationals appear as "p/q" strings; every float field is wrapped as
{"approx": true, "value": ..., "rel_tol": ...}.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__, amplifier, extractor
from .bounds import BoundQuery, inner_certificate, outer_bound
from .codes import parse_code, evaluate_code
from .entropy import SizeCapError
from .lp import OPTIMAL, PivotLimitError
from .network import parse_network
from .rationals import parse_rational
from .sims import (
    RvSystem,
    build_asymptotic_sim,
    build_zero_error_sim,
    run_asymptotic_sim,
    run_zero_error_sim,
)

FLOAT_REL_TOL = 1e-9

_CAP_ERRORS = (SizeCapError, extractor.SizeCapError, amplifier.SizeCapError, PivotLimitError)


def _rat(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def _mode(text: str) -> str:
    alias = {"zero": "zero_error", "zero_error": "zero_error", "asymptotic": "asymptotic"}
    if text not in alias:
        raise argparse.ArgumentTypeError("mode must be zero or asymptotic")
    return alias[text]


def _jobs(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("jobs must be >= 1")
    return n


def jsonify(value):
    """Recursively shape a value for the report JSON."""
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return {"approx": True, "value": value, "rel_tol": FLOAT_REL_TOL}
    if isinstance(value, dict):
        return {str(k): jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonify(v) for v in value]
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _hash_file(path: str) -> dict:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return {"path": path, "sha256": digest}


def _manifest(command: str, inputs: dict, params: dict, seeds: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "inputs": {name: _hash_file(path) for name, path in inputs.items()},
        "params": jsonify(params),
        "seeds": jsonify(seeds),
    }


def _write_report(report: dict, schema_name: str, out: str | None) -> None:
    schema_text = (
        resources.files("wiretapnet").joinpath(f"schemas/{schema_name}.json").read_text()
    )
    jsonschema.validate(report, json.loads(schema_text))
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _pairs(items, key=lambda k: str(k)):
    return {key(k): jsonify(v) for k, v in items}


def cmd_outer(args) -> int:
    net = parse_network(Path(args.network).read_text())
    weights = None
    if args.weights is not None:
        parts = [parse_rational(w) for w in args.weights.split(",")]
        srcs = sorted(net.sources)
        if len(parts) != len(srcs):
            raise ValueError(
                f"--weights lists {len(parts)} values for {len(srcs)} sources"
            )
        weights = dict(zip(srcs, parts))
    relax = None
    if args.relax is not None:
        parts = [parse_rational(w) for w in args.relax.split(",")]
        if len(parts) != 2:
            raise ValueError("--relax takes two comma-separated slacks: decode,secrecy")
        relax = (parts[0], parts[1])
    query = BoundQuery.make(net, args.mode, weights, relax)
    result = outer_bound(query)

    report = {
        "schema": "wiretapnet/outer/v1",
        "manifest": _manifest(
            "outer",
            {"network": args.network},
            {
                "mode": args.mode,
                "weights": dict(query.weights),
                "relax": None if query.relax is None else list(query.relax),
                "witness": bool(args.witness),
                "jobs": args.jobs,
            },
            {},
        ),
        "status": result.status,
        "value": jsonify(result.value),
        "relaxation": result.relaxation,
        "mode": result.mode,
        "relax": None
        if result.relax is None
        else {"decode": jsonify(result.relax[0]), "secrecy": jsonify(result.relax[1])},
        "ground_size": result.ground.n,
        "weights": _pairs(query.weights),
    }
    if args.witness:
        report["witness"] = (
            None
            if result.witness is None
            else {result.ground.describe(m): jsonify(v) for m, v in sorted(result.witness.items())}
        )
    _write_report(report, "outer", args.out)
    return 0


def _membership_json(rep) -> dict:
    return {
        "ok": rep.ok,
        "rows": len(rep.entries),
        "violations": [
            {"tag": e.tag, "rel": e.rel, "slack": jsonify(e.slack)} for e in rep.violations
        ],
    }


def cmd_check_code(args) -> int:
    net = parse_network(Path(args.network).read_text())
    code = parse_code(Path(args.code).read_text())
    evaluation = evaluate_code(net, code)
    cert = inner_certificate(evaluation.entropy, net, args.mode, args.scale)

    sandwich = None
    if args.outer is not None:
        cached = json.loads(Path(args.outer).read_text())
        outer_value = cached.get("value")
        weights = {s: parse_rational(w) for s, w in cached.get("weights", {}).items()}
        inner_value = sum(
            (weights.get(s, Fraction(0)) * r for s, r in cert.rate_point), Fraction(0)
        )
        if outer_value is None or cached.get("status") != OPTIMAL:
            sandwich = {
                "outer_value": None,
                "inner_value": jsonify(inner_value),
                "gap": None,
                "certified": False,
            }
        else:
            gap = parse_rational(outer_value) - inner_value
            sandwich = {
                "outer_value": outer_value,
                "inner_value": jsonify(inner_value),
                "gap": jsonify(gap),
                "certified": bool(cert.ok and gap == 0),
            }

    report = {
        "schema": "wiretapnet/check_code/v1",
        "manifest": _manifest(
            "check-code",
            {"network": args.network, "code": args.code}
            | ({"outer": args.outer} if args.outer else {}),
            {"mode": args.mode, "scale": args.scale, "jobs": args.jobs},
            {},
        ),
        "evaluation": {
            "errors": _pairs(evaluation.errors, key=lambda ts: f"{ts[0]}:{ts[1]}"),
            "leakage": _pairs(evaluation.leakage),
            "rate_realized": _pairs(evaluation.rate_realized),
            "rate_worst_case": _pairs(evaluation.rate_worst_case),
        },
        "certificate": {
            "mode": cert.mode,
            "scale": jsonify(cert.a),
            "ok": cert.ok,
            "rate_point": _pairs(cert.rate_point),
            "memberships": {name: _membership_json(rep) for name, rep in cert.memberships},
            "family4_slack": _pairs(cert.family4_slack),
        },
        "sandwich": sandwich,
    }
    _write_report(report, "check_code", args.out)
    return 0


def _load_rv(path: str) -> tuple[RvSystem, dict[str, str]]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("rv-system file must be a JSON object")
    allowed = {"network", "code", "a", "eps_k", "source_pmfs"}
    extra = set(raw) - allowed
    if extra:
        raise ValueError(f"rv-system file has unknown keys: {sorted(extra)}")
    for need in ("network", "code"):
        if need not in raw:
            raise ValueError(f"rv-system file misses key {need!r}")
    base = Path(path).parent
    net_path = str(base / raw["network"])
    code_path = str(base / raw["code"])
    net = parse_network(Path(net_path).read_text())
    code = parse_code(Path(code_path).read_text())
    pmfs = None
    if "source_pmfs" in raw:
        pmfs = {}
        for s, entries in raw["source_pmfs"].items():
            pmfs[s] = {(int(m), int(k)): parse_rational(p) for m, k, p in entries}
    rv = RvSystem.make(
        net,
        code,
        pmfs,
        a=parse_rational(raw.get("a", "1")),
        eps_k=parse_rational(raw.get("eps_k", "0")),
    )
    return rv, {"rv": path, "network": net_path, "code": code_path}


def _checks_json(checks) -> list:
    return [
        {
            "edge": c.edge,
            "used_bits": jsonify(c.used_bits),
            "budget_bits": jsonify(c.budget_bits),
            "ok": c.ok,
            "kind": c.kind,
        }
        for c in checks
    ]


def _leakage_json(entries) -> list:
    return [
        {
            "wiretap": e.wiretap,
            "total_bits": jsonify(e.total_bits),
            "per_symbol": jsonify(e.per_symbol),
            "bound_per_symbol": jsonify(e.bound_per_symbol),
            "within_bound": e.within_bound,
        }
        for e in entries
    ]


def _rates_json(entries) -> list:
    return [
        {
            "source": e.source,
            "rate_bits": jsonify(e.rate_bits),
            "analytic_lower_bound": jsonify(e.analytic_lower_bound),
            "bound_valid": e.bound_valid,
        }
        for e in entries
    ]


def cmd_simulate(args) -> int:
    rv, inputs = _load_rv(args.rv)
    run_mode = "exhaustive"
    if args.trials is not None:
        if args.seed is None:
            raise ValueError("--trials needs --seed for reproducibility")
        run_mode = "montecarlo"

    if args.mode == "zero_error":
        sim = build_zero_error_sim(rv, args.nt, args.eps)
        rep = run_zero_error_sim(sim, run_mode, args.trials, args.seed)
        body = {
            "mode": rep.mode,
            "trials": rep.trials,
            "seed": rep.seed,
            "n": rep.n,
            "delta": jsonify(rep.delta),
            "codebook_sizes": {
                s: {"messages": m, "keys": k} for s, m, k in rep.codebook_sizes
            },
            "p_atypical": _pairs(rep.p_atypical),
            "errors": _pairs(rep.errors, key=lambda ts: f"{ts[0]}:{ts[1]}"),
            "capacity": _checks_json(rep.capacity),
            "leakage": _leakage_json(rep.leakage),
            "rates": _rates_json(rep.rates),
            "notes": list(rep.notes),
        }
    else:
        sim = build_asymptotic_sim(rv, args.nt, args.eps)
        rep = run_asymptotic_sim(sim, run_mode, args.trials, args.seed)
        body = {
            "mode": rep.mode,
            "trials": rep.trials,
            "seed": rep.seed,
            "n": rep.n,
            "delta": jsonify(rep.delta),
            "eps_t": jsonify(rep.eps_t),
            "codebook_sizes": {
                s: {"messages": m, "keys": k} for s, m, k in rep.codebook_sizes
            },
            "alphabet_checks": _checks_json(rep.alphabet_checks),
            "errors": _pairs(rep.errors, key=lambda ts: f"{ts[0]}:{ts[1]}"),
            "sentinel_rate": _pairs(rep.sentinel_rate),
            "leakage": _leakage_json(rep.leakage),
            "rates": _rates_json(rep.rates),
            "notes": list(rep.notes),
        }

    report = {
        "schema": "wiretapnet/simulate/v1",
        "manifest": _manifest(
            "simulate",
            inputs,
            {
                "mode": args.mode,
                "nt": args.nt,
                "eps": args.eps,
                "trials": args.trials,
                "jobs": args.jobs,
            },
            {} if args.seed is None else {"seed": args.seed},
        ),
        "sim_mode": args.mode,
        "report": body,
    }
    _write_report(report, "simulate", args.out)
    return 0


def cmd_amplify(args) -> int:
    weak = amplifier.parse_weak_code(Path(args.weak).read_text())
    amp = amplifier.amplify(
        weak,
        args.L,
        delta1=args.delta1,
        delta2=args.delta2,
        eps2=args.eps2,
        lam="auto" if args.lam == "auto" else parse_rational(args.lam),
        seed=args.seed,
    )
    rep = amplifier.evaluate_amplified(
        amp,
        mode=args.mode,
        trials=args.trials,
        seed=args.eval_seed,
        seed_mode=args.seed_mode,
    )

    report = {
        "schema": "wiretapnet/amplify/v1",
        "manifest": _manifest(
            "amplify",
            {"weak": args.weak},
            {
                "L": args.L,
                "delta1": args.delta1,
                "delta2": args.delta2,
                "eps2": args.eps2,
                "lam": args.lam,
                "mode": args.mode,
                "seed_mode": args.seed_mode,
                "trials": args.trials,
                "jobs": args.jobs,
            },
            {"seed": args.seed}
            | ({} if args.eval_seed is None else {"eval_seed": args.eval_seed}),
        ),
        "weak": {
            "blocklength": weak.blocklength,
            "declared_eps": jsonify(weak.declared_eps),
            "messages": dict(weak.msg_sizes),
            "measured_error": _pairs(weak.measured_error, key=lambda ts: f"{ts[0]}:{ts[1]}"),
            "measured_leakage": _pairs(weak.measured_leakage),
        },
        "instance": {
            "L": amp.L,
            "lam": jsonify(amp.lam),
            "eps2": jsonify(amp.eps2),
            "delta1": jsonify(amp.delta1),
            "delta2": jsonify(amp.delta2),
            "master_seed": amp.master_seed,
            "plans": {
                p.source: {
                    "n1": p.n1,
                    "o_len": p.o_len,
                    "o_budget": jsonify(p.o_budget),
                    "eps3": jsonify(p.eps3),
                    "n3_target": jsonify(p.n3_target),
                    "n3": p.n3,
                    "n2": p.n2,
                    "seed_v": p.seed_v,
                    "delta1_actual": jsonify(p.delta1_actual),
                }
                for p in amp.plans
            },
            "typicality": {
                "p_star": jsonify(amp.p_star),
                "gamma": jsonify(amp.gamma),
                "tap_cells": amp.tap_cells,
            },
            "inflation": {
                "extra_uses_budget": jsonify(amp.extra_uses_budget),
                "extra_uses_actual": jsonify(amp.extra_uses_actual),
                "target": jsonify(amp.inflation_target),
                "within_budget": amp.within_budget,
                "within_actual": amp.within_actual,
            },
        },
        "evaluation": {
            "mode": rep.mode,
            "seed_mode": rep.seed_mode,
            "trials": rep.trials,
            "eval_seed": rep.eval_seed,
            "leakage": _pairs(rep.leakage),
            "leakage_ci": None
            if rep.leakage_ci is None
            else {name: [jsonify(lo), jsonify(hi)] for name, (lo, hi) in rep.leakage_ci},
            "dtv": _pairs(rep.dtv),
            "coupling_error": _pairs(rep.coupling_error),
            "pinsker": [
                {
                    "source": p.source,
                    "dtv": jsonify(p.dtv),
                    "kl_bits": jsonify(p.kl_bits),
                    "holds": p.holds,
                }
                for p in rep.pinsker
            ],
            "sw_failure": _pairs(rep.sw_failure, key=lambda ts: f"{ts[0]}:{ts[1]}"),
            "error_bound": _pairs(rep.error_bound, key=lambda ts: f"{ts[0]}:{ts[1]}"),
            "event_b": [
                {
                    "tap": c.tap,
                    "p_fail": jsonify(c.p_fail),
                    "bound_exponent": jsonify(c.bound_exponent),
                    "holds": c.holds,
                }
                for c in rep.event_b
            ],
            "event_b_union": jsonify(rep.event_b_union),
            "event_b_bound_holds": rep.event_b_bound_holds,
            "notes": list(rep.notes),
        },
    }
    _write_report(report, "amplify", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wiretapnet",
        description="Exact bounds, code checks, simulations and secrecy "
        "amplification for noiseless wiretap networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("outer", help="LP outer bound on the secure rate region")
    p.add_argument("--network", required=True, help="network JSON file")
    p.add_argument("--mode", type=_mode, default="zero_error", help="zero or asymptotic")
    p.add_argument("--weights", help="comma list of rationals, one per sorted source")
    p.add_argument("--relax", help="decode,secrecy slacks (asymptotic mode)")
    p.add_argument("--witness", action="store_true", help="include the LP witness vector")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--jobs", type=_jobs, default=1)
    p.set_defaults(func=cmd_outer)

    p = sub.add_parser("check-code", help="evaluate a code and certify achievability")
    p.add_argument("--network", required=True)
    p.add_argument("--code", required=True, help="code JSON file")
    p.add_argument("--mode", type=_mode, default="zero_error")
    p.add_argument("--scale", type=_rat, default=Fraction(1), help="certificate scale a")
    p.add_argument("--outer", help="cached outer report for the sandwich comparison")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--jobs", type=_jobs, default=1)
    p.set_defaults(func=cmd_check_code)

    p = sub.add_parser("simulate", help="run a variable- or fixed-length simulation")
    p.add_argument("--rv", required=True, help="rv-system JSON file")
    p.add_argument("--mode", type=_mode, default="zero_error")
    p.add_argument("--nt", required=True, type=int, help="outer blocklength")
    p.add_argument("--eps", type=_rat, default=Fraction(1), help="typicality tolerance")
    p.add_argument("--trials", type=int, help="sample instead of enumerating")
    p.add_argument("--seed", type=int, help="rng seed (required with --trials)")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--jobs", type=_jobs, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("amplify", help="amplify a weak code and evaluate it")
    p.add_argument("--weak", required=True, help="weak-code JSON file")
    p.add_argument("--L", required=True, type=int, help="number of repetitions")
    p.add_argument("--delta1", required=True, type=_rat, help="seed-rate budget")
    p.add_argument("--delta2", required=True, type=_rat, help="output-length slack")
    p.add_argument("--eps2", type=_rat, default=Fraction(1, 4), help="typicality slack")
    p.add_argument("--lam", default="auto", help="min-entropy drop slack or 'auto'")
    p.add_argument("--mode", choices=("exhaustive", "montecarlo"), default="exhaustive")
    p.add_argument("--seed", type=int, default=0, help="instance draw seed")
    p.add_argument("--trials", type=int, help="montecarlo sample count")
    p.add_argument("--eval-seed", type=int, help="montecarlo rng seed")
    p.add_argument(
        "--seed-mode",
        choices=("instance", "average"),
        default="instance",
        help="condition on the drawn extractor seed or average it out",
    )
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--jobs", type=_jobs, default=1)
    p.set_defaults(func=cmd_amplify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    try:
        return args.func(args)
    except _CAP_ERRORS as exc:
        print(f"size cap: {exc}", file=sys.stderr)
        return 3
    except (
        ValueError,
        OSError,
        amplifier.SizingError,
        amplifier.WeakCodeFormatError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        print(f"wall_time_s={time.monotonic() - t0:.3f}", file=sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
