"""Planar spacecraft model, LTI discretization, tracking gain, and
plant propagation.

State convention: [x, vx, y, vy, psi, psidot]; control [fx, fy, tau_z].
Translation follows Newton's law per axis, attitude is a single-axis
rotational double integrator, so the continuous A matrix is nilpotent and
all discretizations are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.signal import place_poles

from .geometry import wrap_angle
from .variables import CONTROL_DIM, STATE_ANGLE_INDEX, STATE_DIM

DEFAULT_MASS = 10.0
DEFAULT_INERTIA = 1.0
# decoupled closed-loop pole defaults: translation axes, then rotation
DEFAULT_POLES = (-0.8, -1.2, -0.8, -1.2, -1.0, -1.5)


def planar_model(mass: float, inertia: float) -> tuple[np.ndarray, np.ndarray]:
    """Continuous (A, B) for planar force/torque-driven rigid-body motion."""
    if mass <= 0.0 or inertia <= 0.0:
        raise ValueError("mass and inertia must be positive")
    a = np.zeros((STATE_DIM, STATE_DIM))
    a[0, 1] = 1.0
    a[2, 3] = 1.0
    a[4, 5] = 1.0
    b = np.zeros((STATE_DIM, CONTROL_DIM))
    b[1, 0] = 1.0 / mass
    b[3, 1] = 1.0 / mass
    b[5, 2] = 1.0 / inertia
    return a, b


def discretize_lti(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization via the augmented exponential.

    exp([[A, B], [0, 0]] dt) carries e^{A dt} in the upper-left block and the
    control integral in the upper-right block.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n = a.shape[0]
    m = b.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = a
    aug[:n, n:] = b
    phi = expm(aug * dt)
    f_x = phi[:n, :n]
    f_u = phi[:n, n:]
    if not (np.all(np.isfinite(f_x)) and np.all(np.isfinite(f_u))):
        raise ValueError("discretization produced non-finite entries")
    return f_x, f_u


@dataclass(frozen=True)
class LtiModel:
    a: np.ndarray
    b: np.ndarray
    dt: float
    f_x: np.ndarray
    f_u: np.ndarray
    mass: float
    inertia: float

    @classmethod
    def planar(cls, mass: float, inertia: float, dt: float) -> "LtiModel":
        a, b = planar_model(mass, inertia)
        f_x, f_u = discretize_lti(a, b, dt)
        return cls(a, b, dt, f_x, f_u, mass, inertia)


def is_hurwitz(a: np.ndarray) -> bool:
    return bool(np.max(np.real(np.linalg.eigvals(a))) < 0.0)


def design_gain(
    a: np.ndarray,
    b: np.ndarray,
    poles=None,
    q: np.ndarray | None = None,
    r: np.ndarray | None = None,
) -> np.ndarray:
    """Feedback K with A - B K Hurwitz, by pole placement or LQR weights."""
    if q is not None or r is not None:
        from scipy.linalg import solve_continuous_are

        q = np.asarray(q, dtype=float)
        r = np.asarray(r, dtype=float)
        p = solve_continuous_are(a, b, q, r)
        k = np.linalg.solve(r, b.T @ p)
    else:
        if poles is None:
            poles = DEFAULT_POLES
        k = place_poles(a, b, np.asarray(poles, dtype=float)).gain_matrix
    if not is_hurwitz(a - b @ k):
        raise ValueError("designed gain does not stabilize the closed loop")
    return k


def tracking_control(
    k: np.ndarray, x: np.ndarray, x_ref: np.ndarray, u_ref: np.ndarray
) -> np.ndarray:
    """Plan-following law u = u_ref - K (x - x_ref), heading error wrapped."""
    err = x - x_ref
    err[STATE_ANGLE_INDEX] = wrap_angle(err[STATE_ANGLE_INDEX])
    return u_ref - k @ err


def propagate_plant(x: np.ndarray, u: np.ndarray, model: LtiModel) -> np.ndarray:
    """One exact discrete step of the plant; heading re-wrapped."""
    x_next = model.f_x @ x + model.f_u @ u
    x_next[STATE_ANGLE_INDEX] = wrap_angle(x_next[STATE_ANGLE_INDEX])
    return x_next
