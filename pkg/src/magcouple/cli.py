"""Command-line entry point: one subcommand per scenario.

    python -m magcouple calibrate --out runs/cal
    python -m magcouple static-trial --config static.cfg --out runs/static
    python -m magcouple human-trial --mode both --seed 3 --out runs/human
"""

from __future__ import annotations

import argparse
import sys

from .harness.config import ConfigError, TrialConfig, from_mapping, load_config
from .harness.scenarios import ScenarioResult, SettlingError, run_scenario

SUBCOMMANDS = {
    "static-trial": "static",
    "dynamic-trial": "dynamic",
    "human-trial": "human",
    "recovery-demo": "recovery",
    "tune": "tune",
    "calibrate": "calibrate",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magcouple",
                                     description="Magnetically coupled actuator simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "static-trial": "sweep hanging weights against a locked driver",
        "dynamic-trial": "peak offset over a speed x weight grid",
        "human-trial": "four-minute session with FULL and/or PARTIAL estimation",
        "recovery-demo": "resistive pulse with offset recovery on and off",
        "tune": "grid-search filter noise on simulated logs",
        "calibrate": "scale the coupling constant to the detachment weight",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="config file (key = value lines)")
        p.add_argument("--seed", type=int, help="override the trial seed")
        p.add_argument("--out", help="output directory (default: the config's output key)")
        p.add_argument("--mode", choices=("full", "partial", "both"), help="estimator modes to run")
    return parser


def resolve_config(args: argparse.Namespace) -> TrialConfig:
    scenario = SUBCOMMANDS[args.command]
    if args.config:
        cfg = load_config(args.config)
        if cfg.scenario != scenario:
            raise ConfigError(f"{args.config}: scenario is {cfg.scenario!r} but the command is {args.command!r}")
    else:
        cfg = from_mapping({"scenario": scenario})
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.out is not None:
        changes["output"] = args.out
    return cfg.with_(**changes) if changes else cfg


def _report(result: ScenarioResult) -> str:
    s = result.summary
    lines = [f"scenario: {result.scenario}"]
    if "detach_weight_kg" in s:
        lines.append(f"first detachment at {s['detach_weight_kg']} kg, held up to {s['max_held_weight_kg']} kg")
    if "rmse_cm" in s:
        for mode, row in s["rmse_cm"].items():
            lines.append(f"{mode:8s} RMSE bottom {row['bottom_cm']:.3f} cm  top {row['top_cm']:.3f} cm")
    if "recovery_held" in s:
        lines.append(f"recovery on held: {s['recovery_held']}; detached with recovery off: "
                     f"{s['detached_without_recovery']}")
    if "coupling_Kd" in s:
        lines.append(f"coupling_Kd = {s['coupling_Kd']:.6g}, peak force {s['peak_force_N']:.4g} N "
                     f"at {1000 * s['peak_offset_m']:.2f} mm")
    if "best_index" in s:
        lines.append(f"best grid point {s['best_index']} of {s['grid_size']}, score {s['score_cm']:.4f} cm")
    if "max_offset_m" in s:
        lines.append(f"max |offset| {1000 * s['max_offset_m']:.2f} mm")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = run_scenario(cfg)
    except (ConfigError, SettlingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    written = result.write(cfg.output)
    print(_report(result))
    print(f"wrote {len(written)} files to {cfg.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
