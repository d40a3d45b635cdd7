"""Factor-graph trajectory optimization and closed-loop simulation for a
planar spacecraft navigating among moving obstacles.

The library couples MAP trajectory optimization over a factor graph (states,
controls, and obstacle positions jointly) with an online replanning loop:
past variables are pinned by measurements while future variables carry the
plan, in both reactive (obstacle assumed static at its last measured
location) and predictive (scripted obstacle trajectory known in advance)
modes.
"""

from .dynamics import (
    LtiModel,
    design_gain,
    discretize_lti,
    is_hurwitz,
    planar_model,
    propagate_plant,
    tracking_control,
)
from .factors import (
    BearingRangeFactor,
    BearingRangeMeas,
    ControlLimitFactor,
    ControlLimits,
    DynamicsFactor,
    ObstacleFactor,
    PriorFactor,
)
from .graph import Add, Factor, FactorGraph, GraphEditError, Remove, Replace
from .linear import (
    LinearSystem,
    LinearizationError,
    SingularSystemError,
    compute_ordering,
    linearize,
    solve_linear,
)
from .noise import NoiseModel
from .optimize import LmConfig, LmResult, OptimizationError, optimize_lm
from .planner import (
    MapSolution,
    MeasurementBundle,
    NoiseSuite,
    PlanSnapshot,
    PlannerProblem,
    ScatePlanner,
    back_project_obstacle,
    build_initial_graph,
    initial_guess,
)
from .scenario_io import (
    ScenarioError,
    parse_scenario,
    parse_scenario_text,
    serialize_scenario,
    write_scenario,
)
from .sdf import (
    Bounds,
    Circle,
    PredictiveFields,
    ReactiveFields,
    Sdf,
    SdfSequence,
    SphereModel,
    hinge_cost,
    robot_spheres,
    sdf_for_step,
)
from .simulate import (
    EpisodeLog,
    ObstacleScript,
    Scenario,
    clearance_profile,
    obstacle_position,
    run_episode,
    sample_measurements,
)
from .variables import Kind, Values, VariableKey, control, obstacle, state

__version__ = "0.1.0"
