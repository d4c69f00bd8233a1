"""Command line interface: ``qpwcheck run|attack|bounds|sweep|defaults``.

Exit codes: 0 accepted / success, 2 protocol aborted, 3 parameter or usage
error, 4 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import sys
import warnings

import numpy as np

from . import adversary
from .config import (
    ATTACK_KINDS,
    ConfigError,
    ExperimentConfig,
    apply_override,
    load_config,
    with_axis_value,
)
from .errors import DimensionCapError, ParameterError, PasswordRotationRequired
from .encoding import symmetric_state
from .protocol import SCHEMA_VERSION, run_protocol
from .qmath import DensityMatrix, outer, random_pure_state

EXIT_OK = 0
EXIT_ABORTED = 2
EXIT_PARAM = 3
EXIT_CAP = 4

log = logging.getLogger("qpwcheck")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which collides with "aborted"
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpwcheck", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. params.s=4 (repeatable)")
        p.add_argument("--seed", type=int, help="RNG seed (params.seed)")
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the generated_at field")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="run one authentication session, write the transcript"))
    p = sub.add_parser("attack", help="evaluate an attack strategy")
    common(p)
    p.add_argument("--kind", choices=list(ATTACK_KINDS))
    common(sub.add_parser("bounds", help="build R and check the replay bound"))
    p = sub.add_parser("sweep", help="sweep one parameter, write CSV rows")
    common(p)
    p.add_argument("--axis")
    p.add_argument("--values", help="comma separated values, e.g. 1,2,4,8")
    sub.add_parser("defaults", help="print the default config")
    return parser


def _resolve_config(args, experiment: str) -> ExperimentConfig:
    cfg = load_config(args.config)
    cfg.experiment = experiment
    if args.seed is not None:
        cfg.params.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.out is not None:
        cfg.output.path = args.out
    if args.format is not None:
        cfg.output.format = args.format
    elif experiment == "sweep" and args.config is None:
        cfg.output.format = "csv"
    if args.no_timestamp:
        cfg.output.timestamp = False
    if getattr(args, "kind", None):
        cfg.attack.kind = args.kind
    if getattr(args, "axis", None):
        cfg.sweep.axis = args.axis
    if getattr(args, "values", None) is not None:
        try:
            cfg.sweep.values = [int(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --values: {exc}") from exc
    for item in args.set:
        apply_override(cfg, item)
    return cfg.validate()


# ---------------------------------------------------------------- runners

def do_protocol_run(cfg: ExperimentConfig) -> tuple[dict, int]:
    params = cfg.protocol_params()
    alice, bob = cfg.passwords(params)
    tr = run_protocol(alice, bob, params)
    out = tr.to_dict()
    out["experiment"] = "protocol_run"
    return out, EXIT_OK if tr.accepted else EXIT_ABORTED


def _trial_state(cfg: ExperimentConfig, params) -> DensityMatrix:
    kind = cfg.attack.trial
    if kind == "phi0":
        return outer(symmetric_state(0, params.N, params.D))
    if kind == "mixed":
        return DensityMatrix.maximally_mixed(params.D)
    if kind == "random":
        return outer(random_pure_state(params.D, params.seed.generator(32)))
    state, _ = adversary.best_fixed_state_search(
        params, cfg.attack.candidates, sample=cfg.attack.sample)
    return state


def do_attack(cfg: ExperimentConfig) -> adversary.AttackReport:
    params = cfg.protocol_params()
    a = cfg.attack
    if a.kind == "fixed_state":
        trial = _trial_state(cfg, params)
        if a.engine == "protocol":
            return adversary.protocol_attack_sessions(
                params, lambda: adversary.FixedStateProver(trial), cfg.trials,
                strategy="fixed_state", mean_fidelity=trial.trace() / params.D)
        return adversary.simulate_fixed_state_sessions(params, trial, cfg.trials)
    if a.kind == "naive_replay":
        return adversary.naive_replay_success(params, cfg.trials, force_collision=a.force_collision)
    return adversary.dictionary_attack_sim(params, a.B, a.c, cfg.trials)


def do_bounds(cfg: ExperimentConfig) -> dict:
    params = cfg.protocol_params()
    b = cfg.bounds
    r_op = adversary.build_R(params, b.c, b.mode, samples=b.samples)
    bound = adversary.replay_bound(r_op, params)
    r_max = bound / params.D**b.c
    inv_d = 1 / params.D
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": "bound_verify",
        "params": params.to_dict(),
        "c": b.c,
        "mode": b.mode,
        "dim": r_op.dim,
        "tuples": r_op.tuples,
        "R_max": r_max,
        "R_max_ideal": 1 / params.D ** (b.c + 1),
        "bound": bound,
        "one_over_D": inv_d,
        "deviation": bound - inv_d,
        "relative_deviation": (bound - inv_d) / inv_d,
        "stderr": r_op.stderr,
        "regime_valid": b.c * params.encoding.d <= params.regime_ratio * params.encoding.n,
    }


BOUND_CSV_FIELDS = ["schema_version", "experiment", "D", "n", "m", "c", "mode", "tuples",
                    "R_max", "R_max_ideal", "bound", "one_over_D", "deviation", "stderr",
                    "regime_valid"]

SWEEP_FIELDS = ["axis", "value"] + adversary.CSV_FIELDS


def _bounds_row(res: dict) -> dict:
    p = res["params"]
    row = {k: res.get(k) for k in BOUND_CSV_FIELDS}
    row.update(D=p["D"], n=p["n"], m=p["m"])
    return row


def do_sweep(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for i, value in enumerate(cfg.sweep.values):
        sub = with_axis_value(cfg, cfg.sweep.axis, value)
        # row seeds derive from the base seed and the row position
        sub.params.seed = (cfg.params.seed + 1_000_003 * i) % 2**64
        if cfg.sweep.experiment == "bound_verify":
            res = do_bounds(sub)
            p = res["params"]
            se = res["stderr"] or 0.0
            row = {
                "schema_version": SCHEMA_VERSION, "strategy": f"bound_{res['mode']}",
                "D": p["D"], "n": p["n"], "m": p["m"], "s": p["s"], "c": res["c"], "B": "",
                "trials": res["tuples"], "successes": "",
                "empirical": res["bound"], "stderr": se,
                "ci_low": res["bound"] - 1.959963984540054 * se,
                "ci_high": res["bound"] + 1.959963984540054 * se,
                "prediction": res["one_over_D"], "prediction_kind": "replay bound 1/D",
                "analytic_bound": res["one_over_D"], "bound_kind": "fidelity_upper",
                "per_round_rate": "", "per_round_stderr": "",
                "bound_respected": "", "regime_valid": res["regime_valid"],
            }
        else:
            row = do_attack(sub).csv_row()
        rows.append({"axis": cfg.sweep.axis, "value": value, **row})
    return rows


# ----------------------------------------------------------------- output

def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _emit(cfg: ExperimentConfig, payload, csv_rows=None, csv_fields=None) -> None:
    fmt = cfg.output.format
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=csv_fields, lineterminator="\n")
        writer.writeheader()
        for row in csv_rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in csv_fields})
        text = buf.getvalue()
    else:
        if isinstance(payload, dict) and cfg.output.timestamp:
            payload = {**payload, "generated_at": _timestamp()}
        text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    if cfg.output.path:
        with open(cfg.output.path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _show_warning(message, category, filename, lineno, file=None, line=None):
    log.warning("%s: %s", category.__name__, message)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"qpwcheck: error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "defaults":
        print(json.dumps(ExperimentConfig().to_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    experiment = {"run": "protocol_run", "attack": "attack_eval",
                  "bounds": "bound_verify", "sweep": "sweep"}[args.command]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = _show_warning
            cfg = _resolve_config(args, experiment)
            if experiment == "protocol_run":
                out, code = do_protocol_run(cfg)
                _emit(cfg, out, [], [])
                return code
            if experiment == "attack_eval":
                report = do_attack(cfg)
                payload = {**report.to_dict(), "experiment": "attack_eval"}
                _emit(cfg, payload, [report.csv_row()], adversary.CSV_FIELDS)
                if not report.regime_valid:
                    log.warning("c*d << n does not hold; the analytic bound may not apply")
                return EXIT_OK
            if experiment == "bound_verify":
                res = do_bounds(cfg)
                _emit(cfg, res, [_bounds_row(res)], BOUND_CSV_FIELDS)
                return EXIT_OK
            rows = do_sweep(cfg)
            _emit(cfg, {"schema_version": SCHEMA_VERSION, "experiment": "sweep",
                        "axis": cfg.sweep.axis, "rows": rows}, rows, SWEEP_FIELDS)
            return EXIT_OK
    except DimensionCapError as exc:
        print(f"qpwcheck: resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ParameterError, PasswordRotationRequired, ValueError) as exc:
        print(f"qpwcheck: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
