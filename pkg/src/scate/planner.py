"""Online factor-graph planner: initial graph construction, per-step edits,
and warm-started re-optimization.

The solution container holds estimates for timesteps at or below the split
index and plans for the rest. Each step folds in a state measurement and a
bearing/range observation of the obstacle, retires the factors belonging to
the timestep just passed, reassigns future obstacle costs (reactive mode
only), and re-optimizes from the previous solution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .factors import (
    BearingRangeFactor,
    BearingRangeMeas,
    ControlLimitFactor,
    ControlLimits,
    DynamicsFactor,
    ObstacleFactor,
    PriorFactor,
)
from .geometry import wrap_angle
from .graph import Add, FactorGraph, Remove, Replace
from .dynamics import LtiModel
from .noise import NoiseModel
from .optimize import LmConfig, LmResult, OptimizationError, optimize_lm
from .sdf import (
    Bounds,
    Circle,
    PredictiveFields,
    ReactiveFields,
    Sdf,
    SdfSequence,
    SphereModel,
)
from .variables import STATE_ANGLE_INDEX, Values, control, obstacle, state


@dataclass
class NoiseSuite:
    """Per-factor noise magnitudes (standard deviations)."""

    fix: np.ndarray = field(default_factory=lambda: np.full(6, 1e-4))
    dyn: np.ndarray = field(default_factory=lambda: np.full(6, 1e-3))
    lim: np.ndarray = field(default_factory=lambda: np.full(3, 1e-2))
    obs_sigma: float = 0.05
    meas_state: np.ndarray = field(
        default_factory=lambda: np.array(
            [0.01, 0.01, 0.01, 0.01, np.deg2rad(0.5), np.deg2rad(0.5)]
        )
    )
    bearing_sigma: float = np.deg2rad(2.0)
    range_sigma: float = 0.02


@dataclass
class PlannerProblem:
    model: LtiModel
    x_start: np.ndarray
    x_goal: np.ndarray
    horizon: int  # N support intervals; N+1 support states
    limits: ControlLimits
    spheres: SphereModel
    eps: float
    obstacle_radius: float
    workspace: Bounds
    cell: float
    noises: NoiseSuite = field(default_factory=NoiseSuite)
    mode: str = "reactive"  # "reactive" | "predictive"
    predicted_fields: SdfSequence | None = None
    lm: LmConfig = field(default_factory=LmConfig)

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2 steps")
        if self.mode not in ("reactive", "predictive"):
            raise ValueError(f"unknown planning mode {self.mode!r}")
        if self.mode == "predictive":
            if self.predicted_fields is None:
                raise ValueError("predictive mode needs a field sequence")
            if len(self.predicted_fields) != self.horizon + 1:
                raise ValueError("field sequence must cover every support step")
        self.x_start = np.asarray(self.x_start, dtype=float)
        self.x_goal = np.asarray(self.x_goal, dtype=float)

    @property
    def dt(self) -> float:
        return self.model.dt


@dataclass
class MapSolution:
    """Joint MAP assignment with the estimate/plan split at ``split_index``."""

    values: Values
    split_index: int  # -1 before the first measurement step
    stats: LmResult

    def planned_states(self, horizon: int) -> np.ndarray:
        return np.array(
            [self.values.get(state(k)) for k in range(self.split_index + 1, horizon + 1)]
        )

    def planned_controls(self, horizon: int) -> np.ndarray:
        lo = max(self.split_index, 0)
        return np.array([self.values.get(control(k)) for k in range(lo, horizon)])

    def estimated_states(self) -> np.ndarray:
        return np.array(
            [self.values.get(state(k)) for k in range(self.split_index + 1)]
        )

    def estimated_obstacles(self) -> np.ndarray:
        return np.array(
            [self.values.get(obstacle(k)) for k in range(self.split_index + 1)]
        )


@dataclass(frozen=True)
class MeasurementBundle:
    index: int
    z_state: np.ndarray
    z_bearing: float
    z_range: float

    def __post_init__(self):
        if self.z_range < 0.0:
            raise ValueError("range measurement must be nonnegative")


@dataclass
class StepReport:
    solution: MapSolution
    added: int
    removed: int
    replaced: int
    duration_ms: float
    failed: bool = False


@dataclass
class PlanSnapshot:
    """Immutable sample-able view of the remaining plan.

    States cover support indices ``base_index..N`` (the entry at the base
    index anchors interpolation inside the current interval); controls cover
    ``base_index..N-1`` and are held zero-order between supports.
    """

    base_index: int
    dt: float
    states: np.ndarray  # (N - base + 1, 6)
    controls: np.ndarray  # (N - base, 3)

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        n_last = self.base_index + self.states.shape[0] - 1
        k = int(np.floor(t / self.dt))
        k = min(max(k, self.base_index), n_last - 1)
        if t >= n_last * self.dt:
            return self.states[-1].copy(), np.zeros(3)
        tau = t / self.dt - k
        a = self.states[k - self.base_index]
        b = self.states[k - self.base_index + 1]
        x = (1.0 - tau) * a + tau * b
        x[STATE_ANGLE_INDEX] = wrap_angle(
            a[STATE_ANGLE_INDEX]
            + tau * wrap_angle(b[STATE_ANGLE_INDEX] - a[STATE_ANGLE_INDEX])
        )
        u = self.controls[k - self.base_index].copy()
        return x, u


def initial_guess(problem: PlannerProblem) -> Values:
    """Straight-line state interpolation (shortest-arc heading), zero controls."""
    n = problem.horizon
    values = Values()
    x0, xg = problem.x_start, problem.x_goal
    dpsi = wrap_angle(xg[STATE_ANGLE_INDEX] - x0[STATE_ANGLE_INDEX])
    for i in range(n + 1):
        alpha = i / n
        xi = (1.0 - alpha) * x0 + alpha * xg
        xi[STATE_ANGLE_INDEX] = x0[STATE_ANGLE_INDEX] + alpha * dpsi
        values.set(state(i), xi)
    for i in range(n):
        values.set(control(i), np.zeros(3))
    return values


@dataclass
class GraphIds:
    start: int
    goal: int
    dyn: list[int]
    lim: list[int]
    obs: list[int]


def empty_workspace_field(problem: PlannerProblem) -> Sdf:
    return Sdf.build([], problem.workspace, problem.cell)


def obstacle_field(problem: PlannerProblem, position) -> Sdf:
    circle = Circle((float(position[0]), float(position[1])), problem.obstacle_radius)
    return Sdf.build([circle], problem.workspace, problem.cell)


def _obstacle_factor(problem: PlannerProblem, k: int, field_k: Sdf) -> ObstacleFactor:
    return ObstacleFactor(
        state(k),
        field_k,
        problem.spheres,
        problem.eps,
        NoiseModel.isotropic(problem.spheres.count, problem.noises.obs_sigma),
    )


def build_initial_graph(problem: PlannerProblem) -> tuple[FactorGraph, GraphIds]:
    """Start/goal anchors, per-interval dynamics and control limits, and one
    obstacle factor per support state (empty-workspace fields in reactive
    mode, the predicted sequence in predictive mode)."""
    n = problem.horizon
    noises = problem.noises
    fix_noise = NoiseModel.diagonal(noises.fix)
    dyn_noise = NoiseModel.diagonal(noises.dyn)
    lim_noise = NoiseModel.diagonal(noises.lim)

    graph = FactorGraph()
    ids = GraphIds(
        start=graph.add(PriorFactor(state(0), problem.x_start, fix_noise, tag="start")),
        goal=graph.add(PriorFactor(state(n), problem.x_goal, fix_noise, tag="goal")),
        dyn=[],
        lim=[],
        obs=[],
    )
    for i in range(n):
        ids.dyn.append(
            graph.add(
                DynamicsFactor(
                    state(i + 1), state(i), control(i),
                    problem.model.f_x, problem.model.f_u, dyn_noise,
                )
            )
        )
        ids.lim.append(
            graph.add(ControlLimitFactor(control(i), problem.limits, lim_noise))
        )
    if problem.mode == "reactive":
        empty = empty_workspace_field(problem)
        fields = ReactiveFields(empty)
    else:
        fields = PredictiveFields(problem.predicted_fields)
    from .sdf import sdf_for_step

    for i in range(n + 1):
        ids.obs.append(graph.add(_obstacle_factor(problem, i, sdf_for_step(fields, i))))
    return graph, ids


def back_project_obstacle(z_state, z_bearing: float, z_range: float) -> np.ndarray:
    """Measured obstacle position: robot position measurement displaced by the
    measured range along the measured bearing."""
    return np.array(
        [
            z_state[0] + z_range * np.cos(z_bearing),
            z_state[2] + z_range * np.sin(z_bearing),
        ]
    )


class ScatePlanner:
    """Runs the online loop over one episode's factor graph."""

    def __init__(self, problem: PlannerProblem):
        self.problem = problem
        self.graph, self.ids = build_initial_graph(problem)
        guess = initial_guess(problem)
        result = optimize_lm(self.graph, guess, problem.lm)
        self.solution = MapSolution(result.values, -1, result)
        self.meas_ids: list[tuple[int, int]] = []
        self.failures = 0

    @property
    def horizon(self) -> int:
        return self.problem.horizon

    def step(self, meas: MeasurementBundle) -> StepReport:
        t0 = time.perf_counter()
        i = self.solution.split_index + 1
        if i > self.horizon:
            raise ValueError("episode complete: all support steps processed")
        if meas.index != i:
            raise ValueError(f"expected measurement for step {i}, got {meas.index}")
        problem = self.problem
        noises = problem.noises

        edits = [
            Add(
                PriorFactor(
                    state(i),
                    meas.z_state,
                    NoiseModel.diagonal(noises.meas_state),
                    tag="state_meas",
                )
            ),
            Add(
                BearingRangeFactor(
                    state(i),
                    obstacle(i),
                    BearingRangeMeas(
                        meas.z_bearing,
                        meas.z_range,
                        noises.bearing_sigma,
                        noises.range_sigma,
                    ),
                )
            ),
        ]
        removed = 0
        if i == 0:
            edits.append(Remove(self.ids.start))
            removed += 1
        if i == self.horizon:
            edits.append(Remove(self.ids.goal))
            removed += 1
        if i < self.horizon:
            edits.append(Remove(self.ids.lim[i]))
            removed += 1
        edits.append(Remove(self.ids.obs[i]))
        removed += 1

        l_meas = back_project_obstacle(meas.z_state, meas.z_bearing, meas.z_range)
        replaced = 0
        if problem.mode == "reactive":
            field_i = obstacle_field(problem, l_meas)
            for k in range(i + 1, self.horizon + 1):
                edits.append(
                    Replace(self.ids.obs[k], _obstacle_factor(problem, k, field_i))
                )
                replaced += 1

        added_ids = self.graph.apply_edits(edits)
        self.meas_ids.append((added_ids[0], added_ids[1]))

        warm = self.solution.values.copy()
        warm.set(obstacle(i), l_meas)
        failed = False
        try:
            result = optimize_lm(self.graph, warm, problem.lm)
        except OptimizationError as exc:
            # keep the last good iterate and carry on with the episode
            result = LmResult(exc.last_values, 0, np.inf, False)
            failed = True
            self.failures += 1
        self.solution = MapSolution(result.values, i, result)
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        return StepReport(self.solution, len(added_ids), removed, replaced,
                          elapsed_ms, failed)

    def plan(self) -> PlanSnapshot:
        """Snapshot of the remaining reference trajectory and controls."""
        i = self.solution.split_index
        if i >= self.horizon:
            raise ValueError("episode complete: no plan remains")
        base = max(i, 0)
        states = np.array(
            [self.solution.values.get(state(k)) for k in range(base, self.horizon + 1)]
        )
        controls = np.array(
            [self.solution.values.get(control(k)) for k in range(base, self.horizon)]
        )
        return PlanSnapshot(base, self.problem.dt, states, controls)
