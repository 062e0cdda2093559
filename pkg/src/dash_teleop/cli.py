"""Command-line entry points: calibrate, simulate, retarget, evaluate, serve.

Every command is deterministic given its inputs and seed. Exit codes:
0 success, 1 validation failure, 2 I/O failure, 3 computation failure.
The DASH_CONFIG environment variable may point at the config file; the
--config flag overrides it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import calibration, evaluation, finger_sim, retargeting, service
from .errors import ComputationError, ValidationError
from .hand_model import FINGER_ORDER, FingerId, load_hand_versions

PROG = "dash-teleop"


def _resolve_config_path(args) -> str | None:
    return args.config if args.config else os.environ.get("DASH_CONFIG") or None


def _load_retarget_config(args) -> retargeting.RetargetConfig:
    path = _resolve_config_path(args)
    if path is None:
        return retargeting.RetargetConfig()
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return service.retarget_config_from_dict(data.get("retarget", {}))


def _load_weight_map(args) -> dict:
    """Resolve per-finger weights from --weights or --hand-version."""
    if args.weights:
        with open(args.weights, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        records = data if isinstance(data, list) else [data]
        parsed = {}
        for rec in records:
            try:
                parsed[rec["version"]] = calibration.CalibrationWeights.from_wb(rec["w"], rec["b"])
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"bad weights record in {args.weights}: {exc}") from exc
        fit_names = {f"fit-{f.value}": f for f in FINGER_ORDER}
        if set(parsed) <= set(fit_names) and parsed:
            missing = [n for n in fit_names if n not in parsed]
            if missing:
                raise ValidationError(f"weights file missing fingers: {missing}")
            return {fit_names[n]: w for n, w in parsed.items()}
        if len(parsed) == 1:
            (weights,) = parsed.values()
            return {f: weights for f in FINGER_ORDER}
        if args.hand_version in parsed:
            return {f: parsed[args.hand_version] for f in FINGER_ORDER}
        raise ValidationError(
            f"weights file holds versions {sorted(parsed)}; pick one with --hand-version"
        )
    versions = load_hand_versions()
    if args.hand_version not in versions or versions[args.hand_version].weights is None:
        raise ValidationError(f"hand version {args.hand_version!r} has no calibration weights")
    return versions[args.hand_version].weights


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    datasets = calibration.read_dataset_csv(args.dataset)
    if not datasets:
        raise ValidationError(f"{args.dataset}: no samples found")
    reports = calibration.fit_all(datasets.values())
    calibration.write_fit_reports(reports, args.out)
    print(f"{'finger':>8}  {'n':>6}  {'rmse0':>12}  {'rmse1':>12}  {'rmse2':>12}")
    for f in FINGER_ORDER:
        if f in reports:
            r = reports[f]
            print(
                f"{f.value:>8}  {r.sample_count:>6}  "
                f"{r.rmse[0]:>12.3e}  {r.rmse[1]:>12.3e}  {r.rmse[2]:>12.3e}"
            )
    print(f"wrote {args.out}")
    return 0


def cmd_simulate(args) -> int:
    if args.increment <= 0:
        raise ValidationError(f"--increment must be positive, got {args.increment}")
    geometry = finger_sim.load_geometry(args.geometry) if args.geometry else finger_sim.DEFAULT_GEOMETRY
    base_seed = args.seed if args.seed is not None else geometry.seed
    datasets = []
    for i, finger in enumerate(FINGER_ORDER):
        datasets.append(
            finger_sim.generate_dataset(
                geometry,
                increment_deg=args.increment,
                noise_sigma=args.noise,
                budget=args.budget,
                mode=args.mode,
                seed=base_seed + i,
                finger=finger,
            )
        )
    calibration.write_dataset_csv(datasets, args.out)
    total = sum(ds.count for ds in datasets)
    print(
        f"wrote {args.out}: {total} samples ({datasets[0].count} per finger), "
        f"mode={args.mode}, effective increment {datasets[0].increment_deg:.3f} deg, "
        f"noise sigma {args.noise}"
    )
    return 0


def cmd_retarget(args) -> int:
    weights = _load_weight_map(args)
    cfg = _load_retarget_config(args)
    state = retargeting.PipelineState()
    malformed = 0
    with open(args.glove_log, "r", encoding="utf-8") as fh, open(
        args.out, "w", encoding="utf-8"
    ) as out:
        for lineno, item in retargeting.iter_glove_log(fh):
            if isinstance(item, ValidationError):
                malformed += 1
                print(f"warning: {item}", file=sys.stderr)
                if args.strict:
                    raise item
                continue
            try:
                command = retargeting.process_frame(item, weights, state, cfg)
            except retargeting.FrameRejected as exc:
                print(f"warning: line {lineno}: {exc}", file=sys.stderr)
                if args.strict:
                    raise
                continue
            out.write(retargeting.command_to_json_line(command) + "\n")
    print(
        f"frames accepted {state.frames_accepted}, rejected {state.frames_rejected}, "
        f"malformed lines {malformed}, motor saturations {state.saturation_events}"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    path = args.trials or evaluation.reference_results_path()
    trials = evaluation.load_trials(path)
    table = evaluation.aggregate(trials, strict=args.strict)
    if args.format == "csv":
        if not args.out:
            raise ValidationError("--format csv requires -o/--out")
        evaluation.export_report_csv(table, args.out)
        print(f"wrote {args.out}")
    else:
        text = evaluation.format_report_text(table)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
            print(f"wrote {args.out}")
        else:
            print(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    cfg = service.load_session_config(_resolve_config_path(args))
    if args.hand_version:
        cfg.hand_version = args.hand_version
    if args.trials_file:
        cfg.trials_path = args.trials_file
    host, port = cfg.host_port
    if args.host:
        host = args.host
    if args.port:
        port = args.port
    app = service.create_app(cfg)
    print(f"serving hand {cfg.hand_version} on {host}:{port} (trials -> {cfg.trials_path})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Teleoperation stack for a tendon-driven soft hand",
    )
    parser.add_argument("--config", help="config file (overrides DASH_CONFIG)")
    parser.add_argument("--seed", type=int, help="seed for randomized operations")
    parser.add_argument("--strict", action="store_true", help="abort on recoverable input problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit calibration weights from a dataset CSV")
    p.add_argument("dataset", help="calibration CSV (finger,joints...,motors...)")
    p.add_argument("-o", "--out", default="fit_report.json", help="fit report output path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="generate a calibration dataset from the finger simulator")
    p.add_argument("--geometry", help="geometry JSON file (default: built-in geometry)")
    p.add_argument("--increment", type=float, default=3.0, help="sweep increment in degrees")
    p.add_argument("--noise", type=float, default=0.0, help="motor noise sigma")
    p.add_argument("--budget", type=int, default=1000, help="target samples per finger")
    p.add_argument("--mode", choices=("grid", "random"), default="grid")
    p.add_argument("-o", "--out", default="dataset.csv", help="dataset CSV output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("retarget", help="replay a glove log into a motor command log")
    p.add_argument("glove_log", help="JSON-lines glove frames")
    p.add_argument("--hand-version", default="v1", help="bundled hand version to drive")
    p.add_argument("--weights", help="weights JSON (bundle record or calibrate output)")
    p.add_argument("-o", "--out", default="commands.jsonl", help="command log output path")
    p.set_defaults(func=cmd_retarget)

    p = sub.add_parser("evaluate", help="aggregate a trial log into the success table")
    p.add_argument(
        "trials",
        nargs="?",
        help="JSON-lines trial log (default: bundled reference results)",
    )
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("-o", "--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the operator session service")
    p.add_argument("--host", help="bind host (overrides config)")
    p.add_argument("--port", type=int, help="bind port (overrides config)")
    p.add_argument("--hand-version", help="hand version to drive (overrides config)")
    p.add_argument("--trials-file", help="trial mark store path (overrides config)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
