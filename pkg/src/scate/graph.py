"""Factor graph container with stable factor ids and atomic edits.

The graph is a bipartite structure: factors reference variables through
ordered key lists. Ids stay stable across edits so an online planner can
remove or swap factors it created many steps earlier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .noise import NoiseModel
from .variables import Values, VariableKey


class Factor:
    """Residual + Jacobian block definition attached to a set of variables.

    Subclasses set ``tag`` (a short name identifying the factor family),
    ``keys`` (ordered variable keys) and ``noise``, and implement
    ``residual``/``jacobians``. Factors are immutable after construction.
    """

    tag: str = "factor"
    keys: tuple[VariableKey, ...]
    noise: NoiseModel

    def residual(self, values: Values) -> np.ndarray:
        raise NotImplementedError

    def jacobians(self, values: Values) -> list[np.ndarray]:
        """Unwhitened residual Jacobians, one (dim x key.dim) block per key."""
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return self.noise.dim

    def whitened(self, values: Values) -> tuple[np.ndarray, list[np.ndarray]]:
        r = self.noise.whiten(self.residual(values))
        jacs = [self.noise.whiten_jacobian(j) for j in self.jacobians(values)]
        return r, jacs

    def error(self, values: Values) -> float:
        r = self.noise.whiten(self.residual(values))
        return 0.5 * float(r @ r)


@dataclass(frozen=True)
class Add:
    factor: Factor


@dataclass(frozen=True)
class Remove:
    factor_id: int


@dataclass(frozen=True)
class Replace:
    factor_id: int
    factor: Factor


Edit = Add | Remove | Replace


class GraphEditError(KeyError):
    """An edit referenced an unknown factor id; the graph was left unchanged."""


class FactorGraph:
    def __init__(self) -> None:
        self._factors: dict[int, Factor] = {}
        self._next_id = 0
        # variables persist once referenced, even if their factor degree
        # later drops to zero (the optimizer keeps them frozen)
        self._variables: set[VariableKey] = set()

    def __len__(self) -> int:
        return len(self._factors)

    def __contains__(self, factor_id: int) -> bool:
        return factor_id in self._factors

    def factor(self, factor_id: int) -> Factor:
        return self._factors[factor_id]

    def items(self):
        return self._factors.items()

    @property
    def variables(self) -> set[VariableKey]:
        return set(self._variables)

    def factors_with_tag(self, tag: str) -> list[int]:
        return [fid for fid, f in self._factors.items() if f.tag == tag]

    def add(self, factor: Factor) -> int:
        fid = self._next_id
        self._next_id += 1
        self._factors[fid] = factor
        self._variables.update(factor.keys)
        return fid

    def remove(self, factor_id: int) -> None:
        if factor_id not in self._factors:
            raise GraphEditError(f"unknown factor id {factor_id}")
        del self._factors[factor_id]

    def replace(self, factor_id: int, factor: Factor) -> None:
        if factor_id not in self._factors:
            raise GraphEditError(f"unknown factor id {factor_id}")
        self._factors[factor_id] = factor
        self._variables.update(factor.keys)

    def apply_edits(self, edits: Iterable[Edit]) -> list[int]:
        """Apply edits atomically in order; returns the ids of added factors.

        All Remove/Replace ids are validated against the edit sequence before
        anything mutates, so an unknown id rejects the whole batch.
        """
        edits = list(edits)
        live = set(self._factors)
        fresh = 0
        for e in edits:
            if isinstance(e, Add):
                fresh += 1  # ids of in-batch adds are not knowable to callers
            elif isinstance(e, Remove):
                if e.factor_id not in live:
                    raise GraphEditError(f"unknown factor id {e.factor_id}")
                live.discard(e.factor_id)
            elif isinstance(e, Replace):
                if e.factor_id not in live:
                    raise GraphEditError(f"unknown factor id {e.factor_id}")
            else:
                raise TypeError(f"unsupported edit {e!r}")
        added: list[int] = []
        for e in edits:
            if isinstance(e, Add):
                added.append(self.add(e.factor))
            elif isinstance(e, Remove):
                self.remove(e.factor_id)
            else:
                self.replace(e.factor_id, e.factor)
        return added

    def total_error(self, values: Values) -> float:
        """Sum of half squared whitened residuals over all factors."""
        return sum(f.error(values) for f in self._factors.values())
