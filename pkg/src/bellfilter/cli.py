"""Command-line front end: simulate, tomo-state, tomo-process, diagnose-repair.

Exit codes: 0 success, 2 bad input, 3 optimizer did not converge,
4 diagnosis refused.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .homsim import (
    DEFAULT_RATE_SCALE,
    PRESETS,
    FilterModel,
    expected_rates,
    model_superoperator,
    preset,
    read_count_record,
    simulate,
)
from .metrics import concurrence_matrix, linear_entropy_matrix
from .polarization import TOMOGRAPHIC_LABELS, Basis, TwoPhotonState, state_to_json, vectorize_matrix
from .superop import DiagnosisError, choi_to_kraus, superop_from_json, superop_to_json
from .tomography import UnderdeterminedError, bootstrap, holdout_fidelities, mle_process, mle_state
from .workflow import diagnose_repair

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_REFUSED = 4


class InputError(Exception):
    pass


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _labels(text: str | None) -> tuple:
    if not text:
        return ()
    return tuple(lab.strip() for lab in text.split(",") if lab.strip())


def _model_from_args(args) -> FilterModel:
    base = preset(args.preset) if args.preset else FilterModel()
    overrides = {
        "phi": args.phi,
        "visibility": args.visibility,
        "eta": args.eta,
        "eps_bs": args.eps_bs,
        "singlet_leak": args.singlet_leak,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(base, **overrides)


def cmd_simulate(args) -> int:
    model = _model_from_args(args)
    inputs = TOMOGRAPHIC_LABELS + _labels(args.holdout)
    record = simulate(model, args.rate_scale, args.seed, inputs)
    out = Path(args.out)
    record.to_csv(out)
    rates = expected_rates(model_superoperator(model), rate_scale=args.rate_scale, inputs=inputs)
    print(f"wrote {out} ({len(inputs)} inputs x 16 analyzers, seed {args.seed})")
    for lab, row, obs in zip(inputs, rates, record.counts):
        print(f"  {lab}: expected {row.sum():12.1f}  observed {obs.sum():10d}")
    return EXIT_OK


def _state_summary(rho: np.ndarray) -> dict:
    tr = float(np.trace(rho).real)
    if tr <= 0:
        return {"trace": 0.0, "rho": None, "concurrence": None, "linear_entropy": None}
    norm = rho / tr
    return {
        "trace": tr,
        "rho": state_to_json(TwoPhotonState(norm, check=False)),
        "concurrence": concurrence_matrix(norm),
        "linear_entropy": linear_entropy_matrix(norm),
    }


def cmd_tomo_state(args) -> int:
    record = read_count_record(args.counts)
    if args.input not in record.inputs:
        raise InputError(f"{args.counts} has no row for input {args.input}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = mle_state(record.row(args.input), record.rate_scale)
    out = {
        "input": args.input,
        "neg_log_likelihood": res.neg_log_likelihood,
        "iterations": res.iterations,
        "converged": res.converged,
        "warnings": [str(w.message) for w in caught],
    }
    out.update(_state_summary(res.rho_hat.matrix))
    _dump(out, Path(args.out))
    if args.plot_data and out["rho"] is not None:
        rho = res.rho_hat.matrix / out["trace"]
        lines = ["row,col,re,im"]
        lines += [f"{a},{b},{rho[i, j].real!r},{rho[i, j].imag!r}" for i, a in enumerate(("HH", "HV", "VH", "VV")) for j, b in enumerate(("HH", "HV", "VH", "VV"))]
        Path(args.plot_data).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if out["concurrence"] is not None:
        print(f"{args.input}: concurrence {out['concurrence']:.4f}, linear entropy {out['linear_entropy']:.4f}")
    for w in out["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_tomo_process(args) -> int:
    record = read_count_record(args.counts)
    res = mle_process(record)
    normalized = res.normalized().in_basis(Basis.BELL)
    kraus = choi_to_kraus(res.choi_hat)
    out = {
        "m_hat": superop_to_json(res.m_hat),
        "normalization": res.normalization,
        "m_normalized": superop_to_json(normalized),
        "choi": superop_to_json(res.choi_hat),
        "kraus_weights": kraus.weights.tolist(),
        "neg_log_likelihood": res.neg_log_likelihood,
        "iterations": res.iterations,
        "converged": res.converged,
        "rate_scale": record.rate_scale,
    }
    std = np.zeros((16, 16))
    if args.replicas:
        ens = bootstrap(record, args.replicas, args.seed)
        std = ens.std
        out["bootstrap"] = {
            "replicas": len(ens.replicas),
            "failed": ens.n_failed,
            "unreliable": ens.unreliable,
            "seed": ens.seed,
            "mean": ens.mean.tolist(),
            "std": ens.std.tolist(),
        }
    holdout = _labels(args.holdout)
    if holdout:
        missing = [lab for lab in holdout if lab not in record.inputs]
        if missing:
            raise InputError(f"counts file has no rows for held-out inputs {missing}")
        fids = holdout_fidelities(res, record, holdout)
        out["holdout"] = {"fidelity": fids, "min": min(fids.values())}
        for lab, f in fids.items():
            print(f"holdout {lab}: fidelity {f:.4f}")
    _dump(out, Path(args.out))
    if args.plot_data:
        lines = ["out_index,in_index,value,std"]
        lines += [f"{i + 1},{j + 1},{normalized.m[i, j]!r},{std[i, j]!r}" for i in range(16) for j in range(16)]
        Path(args.plot_data).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"M(1,1) = {normalized.m[0, 0]:.4f} (Bell basis, normalized); converged: {res.converged}")
    if out.get("bootstrap", {}).get("unreliable"):
        print("warning: more than 20% of bootstrap replicas failed", file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_diagnose_repair(args) -> int:
    data = json.loads(Path(args.process).read_text(encoding="utf-8"))
    if "m_hat" not in data:
        raise InputError(f"{args.process} is not a tomo-process result")
    e = superop_from_json(data["m_hat"])
    try:
        outcome = diagnose_repair(e)
    except DiagnosisError as err:
        weight = None if np.isnan(err.weight) else err.weight
        _dump({"refused": True, "reason": str(err), "span_weight": weight}, Path(args.out))
        print(f"diagnosis refused: {err}", file=sys.stderr)
        return EXIT_REFUSED
    out = {"refused": False}
    out.update(outcome.to_dict())
    _dump(out, Path(args.out))
    if args.plot_data:
        m = outcome.repaired.m
        lines = ["out_index,in_index,value"] + [f"{i + 1},{j + 1},{m[i, j]!r}" for i in range(16) for j in range(16)]
        Path(args.plot_data).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"diagnosed phi = {outcome.diagnosis.phi / np.pi:.4f} pi (span weight {outcome.diagnosis.weight:.4f})")
    print(outcome.report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellfilter", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file whose keys provide defaults for the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a 16x16 coincidence-count dataset")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--phi", type=float)
    p.add_argument("--visibility", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--eps-bs", type=float)
    p.add_argument("--singlet-leak", type=float)
    p.add_argument("--rate-scale", type=float, default=DEFAULT_RATE_SCALE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", help="extra input rows, e.g. LL,RR")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tomo-state", help="maximum-likelihood output state for one input row")
    p.add_argument("--counts", required=True)
    p.add_argument("--input", default="HV")
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_tomo_state)

    p = sub.add_parser("tomo-process", help="completely positive maximum-likelihood process")
    p.add_argument("--counts", required=True)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", help="held-out input rows to validate, e.g. LL,RR")
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_tomo_process)

    p = sub.add_parser("diagnose-repair", help="find the filter phase, repair and report")
    p.add_argument("--process", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_diagnose_repair)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise InputError(f"cannot read config {args.config}: {err}") from None
    defaults = {k.replace("-", "_"): v for k, v in config.items()}
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparsers.choices[args.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "rate_scale", 1.0) <= 0:
            raise InputError("--rate-scale must be positive")
        return args.func(args)
    except (InputError, UnderdeterminedError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
