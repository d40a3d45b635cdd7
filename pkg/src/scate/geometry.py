"""Planar angle and rotation helpers shared across the library."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap an angle (scalar or array) to the interval (-pi, pi]."""
    if isinstance(a, float) or np.ndim(a) == 0:
        w = (float(a) + math.pi) % TWO_PI - math.pi
        # mod lands in [-pi, pi); move the closed end to +pi
        return math.pi if w == -math.pi else w
    w = np.mod(np.asarray(a, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def rot2d(psi: float) -> np.ndarray:
    """2x2 rotation matrix for heading angle psi."""
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s], [s, c]])


def drot2d_dpsi(psi: float) -> np.ndarray:
    """Derivative of rot2d with respect to psi."""
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[-s, -c], [c, -s]])
