"""Closed-loop episodes: reactive vs predictive on the same obstacle script.

Runs the bundled crossing scenario in both modes with the same seed, prints
the paired comparison, and writes per-tick CSV logs ready for any plotting
tool (columns: t, truth state, applied control, plan sample, clearance).
"""

from pathlib import Path

from scate import parse_scenario, run_episode

HERE = Path(__file__).resolve().parent
SCENARIOS = HERE.parent / "scenarios"
OUT = Path("/tmp/scate_demo")
OUT.mkdir(parents=True, exist_ok=True)

logs = {}
for mode in ("reactive", "predictive"):
    scenario = parse_scenario(SCENARIOS / f"crossing_{mode}.toml")
    scenario.seed = 42
    print(f"running {scenario.name} [{mode}] seed {scenario.seed} ...")
    log = run_episode(scenario)
    logs[mode] = (scenario, log)
    csv_path = OUT / f"crossing_{mode}.csv"
    log.to_csv(csv_path)
    log.write_json(OUT / f"crossing_{mode}.json", scenario)
    print(f"  wrote {csv_path}")

print(f"\n{'':14}{'reactive':>12}{'predictive':>12}")
rows = [
    ("min clearance", lambda lg: f"{lg.min_clearance():.3f} m"),
    ("tracking rmse", lambda lg: f"{lg.tracking_rmse():.4f} m"),
    ("median step", lambda lg: f"{lg.median_step_ms():.0f} ms"),
]
for label, fmt in rows:
    r = fmt(logs["reactive"][1])
    p = fmt(logs["predictive"][1])
    print(f"{label:<14}{r:>12}{p:>12}")

for mode, (scenario, log) in logs.items():
    perr = log.terminal_position_error(scenario.goal)
    print(f"{mode}: terminal position error {perr:.3f} m, "
          f"{len(log.steps)} planner steps, "
          f"{sum(s.replaced for s in log.steps)} obstacle-factor replacements")

print("\nknowing the obstacle script ahead of time removes the per-step cost")
print("reassignment and keeps the reference steady while the obstacle passes.")
