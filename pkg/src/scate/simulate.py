"""Closed-loop episode execution: plant propagation at a fast rate, planner
re-solves at the support rate, scripted obstacle motion, noisy measurement
synthesis, tracking control, and logging.

The loop is lockstep and fully deterministic for a fixed seed: the plant
advances tick by tick, and every ``plant_rate / planner_rate`` ticks a
measurement bundle is synthesized at the current support index and the
planner re-solves. The plant reads the world only through the sampled
measurements; truth is touched solely by the propagation and the log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DEFAULT_INERTIA,
    DEFAULT_MASS,
    LtiModel,
    design_gain,
    propagate_plant,
    tracking_control,
)
from .factors import ControlLimits
from .geometry import wrap_angle
from .noise import NoiseModel  # noqa: F401  (re-exported for scenario users)
from .optimize import LmConfig
from .planner import (
    MeasurementBundle,
    NoiseSuite,
    PlannerProblem,
    ScatePlanner,
    StepReport,
    obstacle_field,
)
from .sdf import Bounds, SdfSequence, SphereModel, robot_spheres
from .variables import STATE_ANGLE_INDEX, obstacle as obstacle_key


@dataclass
class ObstacleScript:
    """Piecewise-linear obstacle path through (time, position) waypoints."""

    times: np.ndarray  # (K,), strictly increasing
    points: np.ndarray  # (K, 2)

    @classmethod
    def from_waypoints(cls, waypoints) -> "ObstacleScript":
        wp = np.asarray(waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 3:
            raise ValueError("waypoints must be rows of (t, x, y)")
        times = wp[:, 0]
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("waypoint times must be strictly increasing")
        return cls(times, wp[:, 1:])

    def position(self, t: float) -> np.ndarray:
        """Interpolated position; clamped outside the scripted interval."""
        if t <= self.times[0]:
            return self.points[0].copy()
        if t >= self.times[-1]:
            return self.points[-1].copy()
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        tau = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1.0 - tau) * self.points[k] + tau * self.points[k + 1]


def obstacle_position(script: ObstacleScript, t: float) -> np.ndarray:
    return script.position(t)


@dataclass
class WorkspaceCfg:
    x_min: float = 0.0
    x_max: float = 4.0
    y_min: float = 0.0
    y_max: float = 4.0
    cell: float = 0.02

    def bounds(self) -> Bounds:
        return Bounds(self.x_min, self.x_max, self.y_min, self.y_max)


@dataclass
class VehicleCfg:
    mass: float = DEFAULT_MASS
    inertia: float = DEFAULT_INERTIA
    # rows of (offset_x, offset_y, radius) in the body frame
    spheres: list = field(default_factory=lambda: [[0.0, 0.0, 0.35]])
    # plant-side multipliers exercising model mismatch
    plant_mass_scale: float = 1.0
    plant_inertia_scale: float = 1.0

    def sphere_model(self) -> SphereModel:
        arr = np.asarray(self.spheres, dtype=float)
        return SphereModel(arr[:, :2], arr[:, 2])


@dataclass
class LimitsCfg:
    force: float = 2.0
    torque: float = 0.5
    threshold_frac: float = 0.05

    def control_limits(self) -> ControlLimits:
        return ControlLimits.symmetric(
            [self.force, self.force, self.torque], self.threshold_frac
        )


@dataclass
class HorizonCfg:
    steps: int = 60
    dt: float = 1.0


@dataclass
class RatesCfg:
    plant_hz: float = 100.0
    planner_hz: float = 1.0


@dataclass
class ObstacleCfg:
    radius: float = 0.15
    waypoints: list = field(default_factory=lambda: [[0.0, 2.0, 2.0], [60.0, 2.0, 2.0]])

    def script(self) -> ObstacleScript:
        return ObstacleScript.from_waypoints(self.waypoints)


@dataclass
class NoiseCfg:
    fix_sigma: float = 1e-4
    dyn_sigma: float = 1e-3
    lim_sigma: float = 1e-2
    obs_sigma: float = 0.05
    meas_pos_sigma: float = 0.01
    meas_vel_sigma: float = 0.01
    meas_att_sigma: float = float(np.deg2rad(0.5))
    meas_rate_sigma: float = float(np.deg2rad(0.5))
    bearing_sigma: float = float(np.deg2rad(2.0))
    range_sigma: float = 0.02

    def suite(self) -> NoiseSuite:
        return NoiseSuite(
            fix=np.full(6, self.fix_sigma),
            dyn=np.full(6, self.dyn_sigma),
            lim=np.full(3, self.lim_sigma),
            obs_sigma=self.obs_sigma,
            meas_state=self.state_sigmas(),
            bearing_sigma=self.bearing_sigma,
            range_sigma=self.range_sigma,
        )

    def state_sigmas(self) -> np.ndarray:
        return np.array(
            [
                self.meas_pos_sigma,
                self.meas_vel_sigma,
                self.meas_pos_sigma,
                self.meas_vel_sigma,
                self.meas_att_sigma,
                self.meas_rate_sigma,
            ]
        )


@dataclass
class SafetyCfg:
    eps: float = 0.4
    goal_pos_tol: float = 0.1
    goal_att_tol_deg: float = 5.0


@dataclass
class Scenario:
    name: str = "scenario"
    seed: int = 0
    mode: str = "reactive"
    duration: float | None = None  # defaults to steps * dt
    start: list = field(
        default_factory=lambda: [0.5, 0.0, 0.5, 0.0, 0.0, 0.0]
    )
    goal: list = field(
        default_factory=lambda: [3.5, 0.0, 3.5, 0.0, float(np.pi / 4), 0.0]
    )
    workspace: WorkspaceCfg = field(default_factory=WorkspaceCfg)
    vehicle: VehicleCfg = field(default_factory=VehicleCfg)
    limits: LimitsCfg = field(default_factory=LimitsCfg)
    horizon: HorizonCfg = field(default_factory=HorizonCfg)
    rates: RatesCfg = field(default_factory=RatesCfg)
    obstacle: ObstacleCfg = field(default_factory=ObstacleCfg)
    noise: NoiseCfg = field(default_factory=NoiseCfg)
    safety: SafetyCfg = field(default_factory=SafetyCfg)

    def validate(self) -> None:
        if self.mode not in ("reactive", "predictive"):
            raise ValueError(f"mode must be reactive or predictive, got {self.mode!r}")
        if self.horizon.steps < 2:
            raise ValueError("horizon.steps must be at least 2")
        if self.rates.plant_hz < self.rates.planner_hz:
            raise ValueError("plant rate must be at least the planner rate")
        ratio = self.rates.plant_hz / self.rates.planner_hz
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("plant rate must be an integer multiple of planner rate")
        if abs(self.horizon.dt * self.rates.planner_hz - 1.0) > 1e-9:
            raise ValueError("support spacing dt must equal 1 / planner rate")
        bounds = self.workspace.bounds()
        if bounds.x_min >= bounds.x_max or bounds.y_min >= bounds.y_max:
            raise ValueError("workspace is empty")
        for label, s in (("start", self.start), ("goal", self.goal)):
            if len(s) != 6:
                raise ValueError(f"{label} state must have 6 components")
            if not (
                bounds.x_min <= s[0] <= bounds.x_max
                and bounds.y_min <= s[2] <= bounds.y_max
            ):
                raise ValueError(f"{label} position outside the workspace")
        script = np.asarray(self.obstacle.waypoints, dtype=float)
        if script.ndim != 2 or script.shape[1] != 3:
            raise ValueError("obstacle.waypoints must be rows of (t, x, y)")
        if np.any(np.diff(script[:, 0]) <= 0.0):
            raise ValueError("obstacle waypoint times must be strictly increasing")
        if np.any(script[:, 1] < bounds.x_min) or np.any(script[:, 1] > bounds.x_max):
            raise ValueError("obstacle waypoints outside the workspace")
        if np.any(script[:, 2] < bounds.y_min) or np.any(script[:, 2] > bounds.y_max):
            raise ValueError("obstacle waypoints outside the workspace")
        for attr in (
            "fix_sigma", "dyn_sigma", "lim_sigma", "obs_sigma", "meas_pos_sigma",
            "meas_vel_sigma", "meas_att_sigma", "meas_rate_sigma", "bearing_sigma",
            "range_sigma",
        ):
            if getattr(self.noise, attr) <= 0.0:
                raise ValueError(f"noise.{attr} must be positive")
        if self.safety.eps <= 0.0:
            raise ValueError("safety.eps must be positive")
        self.limits.control_limits()  # raises if the interior is empty
        self.vehicle.sphere_model()

    @property
    def episode_duration(self) -> float:
        full = self.horizon.steps * self.horizon.dt
        return full if self.duration is None else min(self.duration, full)

    def ticks_per_plan(self) -> int:
        return int(round(self.rates.plant_hz / self.rates.planner_hz))

    def build_problem(self) -> PlannerProblem:
        self.validate()
        model = LtiModel.planar(self.vehicle.mass, self.vehicle.inertia, self.horizon.dt)
        predicted = None
        if self.mode == "predictive":
            script = self.obstacle.script()
            fields = []
            base = PlannerProblem(
                model=model,
                x_start=self.start,
                x_goal=self.goal,
                horizon=self.horizon.steps,
                limits=self.limits.control_limits(),
                spheres=self.vehicle.sphere_model(),
                eps=self.safety.eps,
                obstacle_radius=self.obstacle.radius,
                workspace=self.workspace.bounds(),
                cell=self.workspace.cell,
                noises=self.noise.suite(),
                mode="reactive",
            )
            for k in range(self.horizon.steps + 1):
                fields.append(obstacle_field(base, script.position(k * self.horizon.dt)))
            predicted = SdfSequence(fields)
        return PlannerProblem(
            model=model,
            x_start=self.start,
            x_goal=self.goal,
            horizon=self.horizon.steps,
            limits=self.limits.control_limits(),
            spheres=self.vehicle.sphere_model(),
            eps=self.safety.eps,
            obstacle_radius=self.obstacle.radius,
            workspace=self.workspace.bounds(),
            cell=self.workspace.cell,
            noises=self.noise.suite(),
            mode=self.mode,
            predicted_fields=predicted,
            lm=LmConfig(),
        )


def sample_measurements(
    x_true: np.ndarray,
    l_true: np.ndarray,
    noises: NoiseSuite,
    rng: np.random.Generator,
    index: int,
) -> MeasurementBundle:
    """Noisy state plus bearing/range observation of the obstacle."""
    delta = l_true - np.array([x_true[0], x_true[2]])
    dist = float(np.hypot(*delta))
    if dist <= 1e-9:
        raise ValueError("robot and obstacle coincide; bearing undefined")
    z_state = x_true + rng.normal(0.0, 1.0, 6) * noises.meas_state
    z_state[STATE_ANGLE_INDEX] = wrap_angle(z_state[STATE_ANGLE_INDEX])
    z_bearing = wrap_angle(
        np.arctan2(delta[1], delta[0]) + rng.normal(0.0, noises.bearing_sigma)
    )
    z_range = max(0.0, dist + rng.normal(0.0, noises.range_sigma))
    return MeasurementBundle(index, z_state, float(z_bearing), float(z_range))


def clearance_profile(
    truth: np.ndarray,
    obstacle_positions: np.ndarray,
    spheres: SphereModel,
    obstacle_radius: float,
) -> np.ndarray:
    """Analytic per-tick clearance between the sphere body and the true
    obstacle disc (no grid involved)."""
    out = np.zeros(truth.shape[0])
    for t in range(truth.shape[0]):
        centers, _ = robot_spheres(truth[t], spheres)
        dists = np.hypot(
            centers[:, 0] - obstacle_positions[t, 0],
            centers[:, 1] - obstacle_positions[t, 1],
        )
        out[t] = float(np.min(dists - obstacle_radius - spheres.radii))
    return out


@dataclass
class StepRecord:
    index: int
    duration_ms: float
    iterations: int
    final_error: float
    converged: bool
    added: int
    removed: int
    replaced: int
    failed: bool
    l_hat: np.ndarray


CSV_COLUMNS = (
    "t,truth_x,truth_vx,truth_y,truth_vy,truth_psi,truth_psidot,"
    "u_fx,u_fy,u_tz,"
    "plan_x,plan_vx,plan_y,plan_vy,plan_psi,plan_psidot,"
    "planu_fx,planu_fy,planu_tz,clearance"
)


@dataclass
class EpisodeLog:
    scenario_name: str
    seed: int
    mode: str
    t: np.ndarray
    truth: np.ndarray
    controls: np.ndarray
    plan_states: np.ndarray
    plan_controls: np.ndarray
    clearance: np.ndarray
    obstacle_truth: np.ndarray
    steps: list[StepRecord]
    support_truth: np.ndarray  # truth at each planner step
    support_obstacle: np.ndarray  # true obstacle at each planner step
    final_solution: object  # MapSolution of the last planner step
    aborted: bool = False
    planner_failures: int = 0

    def min_clearance(self) -> float:
        return float(np.min(self.clearance))

    def terminal_position_error(self, goal) -> float:
        g = np.asarray(goal, dtype=float)
        xt = self.truth[-1]
        return float(np.hypot(xt[0] - g[0], xt[2] - g[2]))

    def terminal_attitude_error(self, goal) -> float:
        g = np.asarray(goal, dtype=float)
        return abs(wrap_angle(self.truth[-1][STATE_ANGLE_INDEX] - g[STATE_ANGLE_INDEX]))

    def tracking_rmse(self) -> float:
        """Position RMSE between the truth and the active plan sample."""
        dx = self.truth[:, 0] - self.plan_states[:, 0]
        dy = self.truth[:, 2] - self.plan_states[:, 2]
        return float(np.sqrt(np.mean(dx**2 + dy**2)))

    def goal_reached(self, goal, pos_tol: float, att_tol_rad: float) -> bool:
        return (
            self.terminal_position_error(goal) < pos_tol
            and self.terminal_attitude_error(goal) < att_tol_rad
        )

    def median_step_ms(self) -> float:
        return float(np.median([s.duration_ms for s in self.steps]))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(CSV_COLUMNS + "\n")
            for k in range(self.t.shape[0]):
                row = [
                    self.t[k], *self.truth[k], *self.controls[k],
                    *self.plan_states[k], *self.plan_controls[k],
                    self.clearance[k],
                ]
                fh.write(",".join(f"{float(v):.17g}" for v in row) + "\n")

    def sidecar(self, scenario: Scenario | None = None) -> dict:
        """JSON-ready summary; timing is isolated in its own section so the
        rest of the document is deterministic for a fixed seed."""
        doc = {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "mode": self.mode,
            "steps": [
                {
                    "index": s.index,
                    "iterations": s.iterations,
                    "final_error": float(s.final_error),
                    "converged": bool(s.converged),
                    "edits": {
                        "added": s.added,
                        "removed": s.removed,
                        "replaced": s.replaced,
                    },
                    "failed": bool(s.failed),
                    "l_hat": [float(v) for v in s.l_hat],
                }
                for s in self.steps
            ],
            "summary": {
                "min_clearance": self.min_clearance(),
                "aborted": bool(self.aborted),
                "planner_failures": int(self.planner_failures),
                "tracking_rmse": self.tracking_rmse(),
            },
            "timing": {
                "step_ms": [float(s.duration_ms) for s in self.steps],
            },
        }
        if scenario is not None:
            doc["summary"]["terminal_position_error"] = self.terminal_position_error(
                scenario.goal
            )
            doc["summary"]["terminal_attitude_error_deg"] = float(
                np.rad2deg(self.terminal_attitude_error(scenario.goal))
            )
            doc["summary"]["goal_reached"] = self.goal_reached(
                scenario.goal,
                scenario.safety.goal_pos_tol,
                float(np.deg2rad(scenario.safety.goal_att_tol_deg)),
            )
            doc["summary"]["collision_free"] = self.min_clearance() > 0.0
        return doc

    def write_json(self, path, scenario: Scenario | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.sidecar(scenario), fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_episode(scenario: Scenario) -> EpisodeLog:
    """Execute one closed-loop episode and log every plant tick."""
    scenario.validate()
    problem = scenario.build_problem()
    planner = ScatePlanner(problem)

    dt_plant = 1.0 / scenario.rates.plant_hz
    plant = LtiModel.planar(
        scenario.vehicle.mass * scenario.vehicle.plant_mass_scale,
        scenario.vehicle.inertia * scenario.vehicle.plant_inertia_scale,
        dt_plant,
    )
    gain = design_gain(problem.model.a, problem.model.b)
    limits = problem.limits
    script = scenario.obstacle.script()
    spheres = problem.spheres
    rng = np.random.default_rng(scenario.seed)

    ticks_per_plan = scenario.ticks_per_plan()
    total_ticks = min(
        int(round(scenario.episode_duration * scenario.rates.plant_hz)),
        scenario.horizon.steps * ticks_per_plan,
    )

    n_rows = total_ticks + 1
    t_arr = np.zeros(n_rows)
    truth = np.zeros((n_rows, 6))
    controls = np.zeros((n_rows, 3))
    plan_states = np.zeros((n_rows, 6))
    plan_controls = np.zeros((n_rows, 3))
    clearance = np.zeros(n_rows)
    obstacle_truth = np.zeros((n_rows, 2))
    steps: list[StepRecord] = []
    support_truth: list[np.ndarray] = []
    support_obstacle: list[np.ndarray] = []

    x = np.asarray(scenario.start, dtype=float).copy()
    snapshot = planner.plan()
    aborted = False
    rows = 0

    for k in range(total_ticks + 1):
        t = k * dt_plant
        l_true = script.position(t)
        bundle = None
        if k % ticks_per_plan == 0:
            i = k // ticks_per_plan
            if i <= scenario.horizon.steps:
                bundle = sample_measurements(x, l_true, problem.noises, rng, i)
                report: StepReport = planner.step(bundle)
                sol = report.solution
                steps.append(
                    StepRecord(
                        index=i,
                        duration_ms=report.duration_ms,
                        iterations=sol.stats.iters,
                        final_error=sol.stats.final_error,
                        converged=sol.stats.converged,
                        added=report.added,
                        removed=report.removed,
                        replaced=report.replaced,
                        failed=report.failed,
                        l_hat=sol.values.get(obstacle_key(i)).copy(),
                    )
                )
                support_truth.append(x.copy())
                support_obstacle.append(l_true.copy())
                if i < scenario.horizon.steps:
                    snapshot = planner.plan()
        if bundle is None:
            z_state = x + rng.normal(0.0, 1.0, 6) * problem.noises.meas_state
            z_state[STATE_ANGLE_INDEX] = wrap_angle(z_state[STATE_ANGLE_INDEX])
        else:
            z_state = bundle.z_state

        x_ref, u_ref = snapshot.sample(t)
        u = tracking_control(gain, z_state, x_ref, u_ref)
        u = np.clip(u, limits.lower, limits.upper)

        centers, _ = robot_spheres(x, spheres)
        dists = np.hypot(centers[:, 0] - l_true[0], centers[:, 1] - l_true[1])
        clear = float(np.min(dists - scenario.obstacle.radius - spheres.radii))

        t_arr[rows] = t
        truth[rows] = x
        controls[rows] = u
        plan_states[rows] = x_ref
        plan_controls[rows] = u_ref
        clearance[rows] = clear
        obstacle_truth[rows] = l_true
        rows += 1

        if k < total_ticks:
            x = propagate_plant(x, u, plant)
            if not np.all(np.isfinite(x)):
                aborted = True
                break

    return EpisodeLog(
        scenario_name=scenario.name,
        seed=scenario.seed,
        mode=scenario.mode,
        t=t_arr[:rows],
        truth=truth[:rows],
        controls=controls[:rows],
        plan_states=plan_states[:rows],
        plan_controls=plan_controls[:rows],
        clearance=clearance[:rows],
        obstacle_truth=obstacle_truth[:rows],
        steps=steps,
        support_truth=np.array(support_truth),
        support_obstacle=np.array(support_obstacle),
        final_solution=planner.solution,
        aborted=aborted,
        planner_failures=planner.failures,
    )
