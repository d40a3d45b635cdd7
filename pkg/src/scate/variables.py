"""Variable keys and the Values container holding a joint assignment.

Three variable families exist in a trajectory graph: states x_i (dim 6,
heading wrapped), controls u_i (dim 3) and obstacle positions l_i (dim 2).
A (kind, index) pair identifies each variable uniquely.
"""

from __future__ import annotations

import enum
from typing import Iterator, NamedTuple

import numpy as np

from .geometry import wrap_angle

STATE_DIM = 6
CONTROL_DIM = 3
OBSTACLE_DIM = 2

# index of the heading angle inside a state vector [x, vx, y, vy, psi, psidot]
STATE_ANGLE_INDEX = 4


class Kind(enum.IntEnum):
    STATE = 0
    CONTROL = 1
    OBSTACLE = 2


_DIMS = {Kind.STATE: STATE_DIM, Kind.CONTROL: CONTROL_DIM, Kind.OBSTACLE: OBSTACLE_DIM}
_NAMES = {Kind.STATE: "x", Kind.CONTROL: "u", Kind.OBSTACLE: "l"}


class VariableKey(NamedTuple):
    kind: Kind
    index: int

    @property
    def dim(self) -> int:
        return _DIMS[self.kind]

    @property
    def angle_indices(self) -> tuple[int, ...]:
        return (STATE_ANGLE_INDEX,) if self.kind == Kind.STATE else ()

    def __repr__(self) -> str:
        return f"{_NAMES[self.kind]}{self.index}"


def state(i: int) -> VariableKey:
    return VariableKey(Kind.STATE, i)


def control(i: int) -> VariableKey:
    return VariableKey(Kind.CONTROL, i)


def obstacle(i: int) -> VariableKey:
    return VariableKey(Kind.OBSTACLE, i)


def sort_key(key: VariableKey) -> tuple[int, int]:
    """Natural order: by timestep, states before controls before obstacles."""
    return (key.index, int(key.kind))


class Values:
    """Mapping from VariableKey to its current vector value.

    Angle components are kept wrapped to (-pi, pi] on every write, so the
    stored assignment always satisfies the state-space conventions.
    """

    def __init__(self, entries: dict[VariableKey, np.ndarray] | None = None):
        self._entries: dict[VariableKey, np.ndarray] = {}
        if entries:
            for key, vec in entries.items():
                self.set(key, vec)

    def set(self, key: VariableKey, vec) -> None:
        v = np.array(vec, dtype=float).reshape(key.dim)
        for j in key.angle_indices:
            v[j] = wrap_angle(v[j])
        self._entries[key] = v

    def get(self, key: VariableKey) -> np.ndarray:
        try:
            return self._entries[key]
        except KeyError:
            raise KeyError(f"values has no entry for variable {key!r}") from None

    def __contains__(self, key: VariableKey) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def keys(self) -> Iterator[VariableKey]:
        return iter(self._entries)

    def items(self):
        return self._entries.items()

    def copy(self) -> "Values":
        out = Values()
        out._entries = {k: v.copy() for k, v in self._entries.items()}
        return out

    def retracted(self, deltas: dict[VariableKey, np.ndarray]) -> "Values":
        """Return a copy advanced by per-key increments (angles re-wrapped)."""
        out = self.copy()
        for key, d in deltas.items():
            out.set(key, out.get(key) + d)
        return out
