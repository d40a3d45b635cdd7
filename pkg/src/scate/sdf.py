"""Signed distance fields, hinge collision cost, and the sphere robot model.

Fields are regular grids of distances to the nearest obstacle surface
(negative inside). Queries interpolate bilinearly and return the analytic
gradient of the interpolation patch. A per-timestep sequence of fields
encodes a predicted obstacle trajectory for preemptive cost assignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import drot2d_dpsi, rot2d
from .variables import STATE_ANGLE_INDEX


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class Bounds:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.x_max - self.x_min, self.y_max - self.y_min))


class Sdf:
    """Discretized signed distance field on a regular grid.

    ``data[ix, iy]`` holds the distance at node ``origin + (ix, iy) * cell``.
    """

    def __init__(self, origin, cell: float, data: np.ndarray, source=()):
        self.origin = np.asarray(origin, dtype=float)
        self.cell = float(cell)
        self.data = np.asarray(data, dtype=float)
        self.nx, self.ny = self.data.shape
        self.source = tuple(source)

    @classmethod
    def build(cls, obstacles: list[Circle], bounds: Bounds, cell: float) -> "Sdf":
        """Analytic circle-union field; empty obstacle lists give a large
        positive sentinel (ten workspace diagonals) so the cost is zero
        everywhere."""
        if cell <= 0.0:
            raise ValueError("cell size must be positive")
        nx = int(round((bounds.x_max - bounds.x_min) / cell)) + 1
        ny = int(round((bounds.y_max - bounds.y_min) / cell)) + 1
        xs = bounds.x_min + cell * np.arange(nx)
        ys = bounds.y_min + cell * np.arange(ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        if obstacles:
            data = np.full((nx, ny), np.inf)
            for circ in obstacles:
                d = np.hypot(gx - circ.center[0], gy - circ.center[1]) - circ.radius
                data = np.minimum(data, d)
        else:
            data = np.full((nx, ny), 10.0 * bounds.diagonal)
        return cls((bounds.x_min, bounds.y_min), cell, data, source=obstacles)

    def _extent(self) -> np.ndarray:
        return self.origin + self.cell * np.array([self.nx - 1, self.ny - 1])

    def query(self, point) -> tuple[float, np.ndarray]:
        """Bilinear distance and gradient at ``point``.

        Out-of-bounds points clamp to the grid boundary; the boundary value
        plus the Euclidean distance to the boundary is returned so the field
        keeps growing (and the hinge cost stays zero) far away.
        """
        p = np.asarray(point, dtype=float)
        hi = self._extent()
        pc = np.minimum(np.maximum(p, self.origin), hi)
        outward = p - pc
        dist_out = float(np.hypot(*outward))

        f = (pc - self.origin) / self.cell
        ix = min(int(f[0]), self.nx - 2) if self.nx > 1 else 0
        iy = min(int(f[1]), self.ny - 2) if self.ny > 1 else 0
        tx = f[0] - ix
        ty = f[1] - iy
        v00 = self.data[ix, iy]
        v10 = self.data[ix + 1, iy] if self.nx > 1 else v00
        v01 = self.data[ix, iy + 1] if self.ny > 1 else v00
        v11 = self.data[ix + 1, iy + 1] if self.nx > 1 and self.ny > 1 else v00
        value = (
            v00 * (1 - tx) * (1 - ty)
            + v10 * tx * (1 - ty)
            + v01 * (1 - tx) * ty
            + v11 * tx * ty
        )
        grad = np.array(
            [
                ((v10 - v00) * (1 - ty) + (v11 - v01) * ty) / self.cell,
                ((v01 - v00) * (1 - tx) + (v11 - v10) * tx) / self.cell,
            ]
        )
        if dist_out > 0.0:
            clamped = outward != 0.0
            grad = np.where(clamped, outward / dist_out, grad)
            value = value + dist_out
        return float(value), grad

    def to_csv(self, path) -> None:
        """Row-major grid dump with a geometry header for plotting."""
        with open(path, "w") as fh:
            fh.write(
                f"# origin_x={float(self.origin[0]):.17g} "
                f"origin_y={float(self.origin[1]):.17g} "
                f"cell={self.cell:.17g} nx={self.nx} ny={self.ny}\n"
            )
            for ix in range(self.nx):
                fh.write(",".join(f"{v:.17g}" for v in self.data[ix]) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Sdf":
        with open(path) as fh:
            header = fh.readline().lstrip("# ").split()
            meta = dict(item.split("=") for item in header)
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        sdf = cls(
            (float(meta["origin_x"]), float(meta["origin_y"])),
            float(meta["cell"]),
            data,
        )
        assert sdf.nx == int(meta["nx"]) and sdf.ny == int(meta["ny"])
        return sdf


class SdfSequence:
    """One field per support timestep, sharing grid geometry."""

    def __init__(self, fields: list[Sdf]):
        if not fields:
            raise ValueError("sequence needs at least one field")
        first = fields[0]
        for f in fields[1:]:
            if (
                f.cell != first.cell
                or f.nx != first.nx
                or f.ny != first.ny
                or not np.array_equal(f.origin, first.origin)
            ):
                raise ValueError("inconsistent grid geometry across sequence")
        self.fields = list(fields)

    def __len__(self) -> int:
        return len(self.fields)

    def __getitem__(self, k: int) -> Sdf:
        return self.fields[k]


@dataclass(frozen=True)
class ReactiveFields:
    """A single current field applies to every future timestep."""

    current: Sdf


@dataclass(frozen=True)
class PredictiveFields:
    """Per-timestep fields precomputed from a known obstacle trajectory."""

    sequence: SdfSequence


def sdf_for_step(mode, k: int) -> Sdf:
    """Field used by the obstacle factor at support step k."""
    if isinstance(mode, ReactiveFields):
        return mode.current
    if isinstance(mode, PredictiveFields):
        if not 0 <= k < len(mode.sequence):
            raise IndexError(f"step {k} outside sequence of {len(mode.sequence)}")
        return mode.sequence[k]
    raise TypeError(f"unsupported mode {mode!r}")


def hinge_cost(d: float, eps: float) -> tuple[float, float]:
    """Piecewise-linear safety cost of a signed clearance d.

    Active only inside the danger band d <= eps; the subgradient at the kink
    d == eps is -0.5.
    """
    if d < eps:
        return eps - d, -1.0
    if d > eps:
        return 0.0, 0.0
    return 0.0, -0.5


class SphereModel:
    """Collision spheres rigidly attached to the body frame."""

    def __init__(self, offsets, radii):
        self.offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
        self.radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if self.offsets.shape != (self.radii.shape[0], 2):
            raise ValueError("offsets must be (M, 2) matching radii")
        if np.any(self.radii <= 0.0):
            raise ValueError("sphere radii must be positive")

    @property
    def count(self) -> int:
        return self.radii.shape[0]

    @classmethod
    def single(cls, radius: float) -> "SphereModel":
        return cls([[0.0, 0.0]], [radius])


def robot_spheres(x: np.ndarray, model: SphereModel) -> tuple[np.ndarray, np.ndarray]:
    """World-frame sphere centers for a state, plus d(center)/d(x, y, psi).

    Returns ``centers`` of shape (M, 2) and ``jac`` of shape (M, 2, 3) where
    columns are derivatives w.r.t. planar position and heading.
    """
    p = np.array([x[0], x[2]])
    psi = x[STATE_ANGLE_INDEX]
    rot = rot2d(psi)
    drot = drot2d_dpsi(psi)
    centers = p[None, :] + model.offsets @ rot.T
    jac = np.zeros((model.count, 2, 3))
    jac[:, 0, 0] = 1.0
    jac[:, 1, 1] = 1.0
    jac[:, :, 2] = model.offsets @ drot.T
    return centers, jac
