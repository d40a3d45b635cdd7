"""Concrete factors: priors, bearing/range, LTI dynamics, control limits,
and the SDF obstacle cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle
from .graph import Factor
from .noise import NoiseModel
from .sdf import Sdf, SphereModel, hinge_cost, robot_spheres
from .variables import CONTROL_DIM, STATE_DIM, Values, VariableKey


class PriorFactor(Factor):
    """Gaussian prior pulling one variable toward a target vector.

    Used for the start/goal anchors and for direct state measurements; angle
    components of the residual are wrapped so the pull never goes the long
    way around.
    """

    def __init__(self, key: VariableKey, target, noise: NoiseModel, tag: str = "prior"):
        target = np.array(target, dtype=float).reshape(key.dim)
        for j in key.angle_indices:
            target[j] = wrap_angle(target[j])
        if noise.dim != key.dim:
            raise ValueError("noise dimension must match variable dimension")
        self.keys = (key,)
        self.target = target
        self.noise = noise
        self.tag = tag

    def residual(self, values: Values) -> np.ndarray:
        r = values.get(self.keys[0]) - self.target
        for j in self.keys[0].angle_indices:
            r[j] = wrap_angle(r[j])
        return r

    def jacobians(self, values: Values) -> list[np.ndarray]:
        return [np.eye(self.keys[0].dim)]


@dataclass(frozen=True)
class BearingRangeMeas:
    bearing: float  # rad, world-frame angle to the obstacle, in (-pi, pi]
    range: float  # m, >= 0
    bearing_sigma: float
    range_sigma: float

    def __post_init__(self):
        if self.range < 0.0:
            raise ValueError("range measurement must be nonnegative")
        object.__setattr__(self, "bearing", wrap_angle(self.bearing))


class BearingRangeFactor(Factor):
    """Joint bearing/range observation tying a state to an obstacle variable.

    Predicted bearing is atan2 of the world-frame displacement; predicted
    range is the norm of the displacement expressed in the body frame, which
    equals the Euclidean distance (rotation preserves norms), so the range
    residual does not depend on heading.
    """

    tag = "bearing_range"

    def __init__(self, state_key: VariableKey, obstacle_key: VariableKey,
                 meas: BearingRangeMeas):
        self.keys = (state_key, obstacle_key)
        self.meas = meas
        self.noise = NoiseModel.diagonal([meas.bearing_sigma, meas.range_sigma])

    def _displacement(self, values: Values) -> np.ndarray:
        x = values.get(self.keys[0])
        l = values.get(self.keys[1])
        delta = np.array([l[0] - x[0], l[1] - x[2]])
        if np.hypot(*delta) <= 1e-9:
            raise ValueError("bearing undefined: robot and obstacle coincide")
        return delta

    def residual(self, values: Values) -> np.ndarray:
        dx, dy = self._displacement(values)
        r_theta = wrap_angle(np.arctan2(dy, dx) - self.meas.bearing)
        r_range = np.hypot(dx, dy) - self.meas.range
        return np.array([r_theta, r_range])

    def jacobians(self, values: Values) -> list[np.ndarray]:
        dx, dy = self._displacement(values)
        d2 = dx * dx + dy * dy
        d = np.sqrt(d2)
        jx = np.zeros((2, STATE_DIM))
        jl = np.zeros((2, 2))
        # bearing row: d atan2 / d delta = (-dy, dx) / d^2
        jx[0, 0] = dy / d2
        jx[0, 2] = -dx / d2
        jl[0, 0] = -dy / d2
        jl[0, 1] = dx / d2
        # range row: d ||delta|| / d delta = delta / d
        jx[1, 0] = -dx / d
        jx[1, 2] = -dy / d
        jl[1, 0] = dx / d
        jl[1, 1] = dy / d
        return [jx, jl]


class DynamicsFactor(Factor):
    """Discrete LTI transition constraint x_{i+1} = F_x x_i + F_u u_i."""

    tag = "dynamics"

    def __init__(self, next_key: VariableKey, state_key: VariableKey,
                 control_key: VariableKey, f_x: np.ndarray, f_u: np.ndarray,
                 noise: NoiseModel):
        self.keys = (next_key, state_key, control_key)
        self.f_x = np.asarray(f_x, dtype=float)
        self.f_u = np.asarray(f_u, dtype=float)
        self.noise = noise

    def residual(self, values: Values) -> np.ndarray:
        x_next = values.get(self.keys[0])
        x = values.get(self.keys[1])
        u = values.get(self.keys[2])
        return x_next - self.f_x @ x - self.f_u @ u

    def jacobians(self, values: Values) -> list[np.ndarray]:
        return [np.eye(STATE_DIM), -self.f_x, -self.f_u]


@dataclass(frozen=True)
class ControlLimits:
    lower: np.ndarray  # (m,)
    upper: np.ndarray  # (m,)
    threshold: np.ndarray  # (m,)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        ths = np.asarray(self.threshold, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "threshold", ths)
        if np.any(lo + ths >= hi - ths):
            raise ValueError("control limit interior is empty")

    @classmethod
    def symmetric(cls, magnitudes, threshold_frac: float = 0.05) -> "ControlLimits":
        mag = np.asarray(magnitudes, dtype=float)
        return cls(-mag, mag, threshold_frac * mag)


class ControlLimitFactor(Factor):
    """Hinge penalty activating within a threshold band of each control limit.

    Per component: below lower+ths the residual grows downward with slope
    -1, above upper-ths it grows upward with slope +1, and it is zero in the
    interior. The kink subgradients are -0.5 / +0.5.
    """

    tag = "control_limit"

    def __init__(self, control_key: VariableKey, limits: ControlLimits,
                 noise: NoiseModel):
        self.keys = (control_key,)
        self.limits = limits
        self.noise = noise

    def residual(self, values: Values) -> np.ndarray:
        u = values.get(self.keys[0])
        lo = self.limits.lower + self.limits.threshold
        hi = self.limits.upper - self.limits.threshold
        r = np.zeros(CONTROL_DIM)
        below = u < lo
        above = u > hi
        r[below] = lo[below] - u[below]
        r[above] = u[above] - hi[above]
        return r

    def jacobians(self, values: Values) -> list[np.ndarray]:
        u = values.get(self.keys[0])
        lo = self.limits.lower + self.limits.threshold
        hi = self.limits.upper - self.limits.threshold
        slope = np.zeros(CONTROL_DIM)
        slope[u < lo] = -1.0
        slope[u > hi] = 1.0
        slope[u == lo] = -0.5
        slope[u == hi] = 0.5
        return [np.diag(slope)]


class ObstacleFactor(Factor):
    """Hinge collision cost over every body sphere against one field.

    Residual component j is the hinge of the field clearance of sphere j
    (field distance at the sphere center minus the sphere radius); the
    Jacobian chains the hinge slope through the bilinear field gradient and
    the sphere placement.
    """

    tag = "obstacle"

    def __init__(self, state_key: VariableKey, field: Sdf, spheres: SphereModel,
                 eps: float, noise: NoiseModel):
        if eps <= 0.0:
            raise ValueError("safety distance must be positive")
        if noise.dim != spheres.count:
            raise ValueError("noise dimension must match sphere count")
        self.keys = (state_key,)
        self.field = field
        self.spheres = spheres
        self.eps = eps
        self.noise = noise

    def residual(self, values: Values) -> np.ndarray:
        x = values.get(self.keys[0])
        centers, _ = robot_spheres(x, self.spheres)
        r = np.zeros(self.spheres.count)
        for j in range(self.spheres.count):
            d, _ = self.field.query(centers[j])
            r[j], _ = hinge_cost(d - self.spheres.radii[j], self.eps)
        return r

    def jacobians(self, values: Values) -> list[np.ndarray]:
        x = values.get(self.keys[0])
        centers, cjac = robot_spheres(x, self.spheres)
        jac = np.zeros((self.spheres.count, STATE_DIM))
        for j in range(self.spheres.count):
            d, grad = self.field.query(centers[j])
            _, slope = hinge_cost(d - self.spheres.radii[j], self.eps)
            if slope == 0.0:
                continue
            dpose = slope * grad @ cjac[j]  # (3,) w.r.t. (x, y, psi)
            jac[j, 0] = dpose[0]
            jac[j, 2] = dpose[1]
            jac[j, 4] = dpose[2]
        return [jac]
