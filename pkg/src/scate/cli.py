"""Command-line entry point: run episodes, sweep seeds, run verification.

Exit codes: 0 success, 1 navigation/verification failure, 2 configuration
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .scenario_io import ScenarioError, parse_scenario
from .simulate import EpisodeLog, Scenario, run_episode
from .verify import run_all

EXIT_OK = 0
EXIT_NAV_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def _load_scenario(args) -> Scenario:
    scenario = parse_scenario(args.scenario)
    if getattr(args, "mode", None):
        scenario.mode = args.mode
        scenario.validate()
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
    return scenario


def _episode_paths(out_dir: Path, scenario: Scenario) -> tuple[Path, Path]:
    stem = f"{scenario.name}_{scenario.mode}_seed{scenario.seed}"
    return out_dir / f"{stem}.csv", out_dir / f"{stem}.json"


def _run_one(scenario: Scenario, out_dir: Path) -> tuple[EpisodeLog, bool]:
    log = run_episode(scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = _episode_paths(out_dir, scenario)
    log.to_csv(csv_path)
    log.write_json(json_path, scenario)
    ok = (
        not log.aborted
        and log.min_clearance() > 0.0
        and log.goal_reached(
            scenario.goal,
            scenario.safety.goal_pos_tol,
            float(np.deg2rad(scenario.safety.goal_att_tol_deg)),
        )
    )
    return log, ok


def cmd_run(args) -> int:
    scenario = _load_scenario(args)
    out_dir = Path(args.out)
    log, ok = _run_one(scenario, out_dir)
    print(f"scenario   : {scenario.name} ({scenario.mode}, seed {scenario.seed})")
    print(f"goal error : {log.terminal_position_error(scenario.goal):.4f} m, "
          f"{np.rad2deg(log.terminal_attitude_error(scenario.goal)):.2f} deg")
    print(f"clearance  : min {log.min_clearance():.4f} m")
    print(f"tracking   : rmse {log.tracking_rmse():.4f} m")
    print(f"planner    : median step {log.median_step_ms():.1f} ms, "
          f"{log.planner_failures} failures")
    csv_path, json_path = _episode_paths(out_dir, scenario)
    print(f"wrote      : {csv_path} {json_path}")
    print("result     : " + ("ok" if ok else "navigation failure"))
    return EXIT_OK if ok else EXIT_NAV_FAILURE


def cmd_sweep(args) -> int:
    scenario = _load_scenario(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_seed = scenario.seed
    rows = []
    all_ok = True
    for offset in range(args.runs):
        seed = base_seed + offset
        entry = {"seed": seed}
        for mode in ("reactive", "predictive"):
            sc = parse_scenario(args.scenario)
            sc.mode = mode
            sc.seed = seed
            sc.validate()
            log, ok = _run_one(sc, out_dir)
            all_ok = all_ok and ok
            entry[mode] = log
        rows.append(entry)

    table_path = out_dir / f"{scenario.name}_sweep.csv"
    with open(table_path, "w") as fh:
        fh.write(
            "seed,reactive_rmse,predictive_rmse,reactive_min_clearance,"
            "predictive_min_clearance,reactive_median_ms,predictive_median_ms\n"
        )
        for entry in rows:
            r, p = entry["reactive"], entry["predictive"]
            fh.write(
                f"{entry['seed']},{r.tracking_rmse():.6f},{p.tracking_rmse():.6f},"
                f"{r.min_clearance():.6f},{p.min_clearance():.6f},"
                f"{r.median_step_ms():.3f},{p.median_step_ms():.3f}\n"
            )
    print(f"{'seed':>6} {'rmse react':>11} {'rmse pred':>11} "
          f"{'clear react':>12} {'clear pred':>11}")
    for entry in rows:
        r, p = entry["reactive"], entry["predictive"]
        print(f"{entry['seed']:>6} {r.tracking_rmse():>11.4f} "
              f"{p.tracking_rmse():>11.4f} {r.min_clearance():>12.4f} "
              f"{p.min_clearance():>11.4f}")
    print(f"wrote {table_path}")
    return EXIT_OK if all_ok else EXIT_NAV_FAILURE


def cmd_verify(args) -> int:
    results = run_all(args.seed)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_NAV_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scate",
        description="Factor-graph trajectory optimization and closed-loop "
        "simulation for a planar spacecraft among moving obstacles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one episode from a scenario file")
    run_p.add_argument("--scenario", required=True, help="scenario TOML path")
    run_p.add_argument("--mode", choices=["reactive", "predictive"])
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", default="out", help="output directory")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser(
        "sweep", help="paired reactive/predictive episodes over seeds"
    )
    sweep_p.add_argument("--scenario", required=True)
    sweep_p.add_argument("--seed", type=int, help="base seed (default: scenario seed)")
    sweep_p.add_argument("--runs", type=int, default=5)
    sweep_p.add_argument("--out", default="out")
    sweep_p.set_defaults(func=cmd_sweep)

    verify_p = sub.add_parser("verify", help="run the verification suites")
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
