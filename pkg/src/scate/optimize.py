"""Levenberg-Marquardt MAP optimization over a factor graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import FactorGraph
from .linear import SingularSystemError, compute_ordering, linearize, solve_linear
from .variables import Values, VariableKey


@dataclass
class LmConfig:
    max_iters: int = 100
    # starting damping is kept tiny so a purely linear graph is solved by a
    # single (effectively Gauss-Newton) step; rejections scale it up fast
    lambda_init: float = 1e-10
    lambda_scale: float = 10.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    lambda_max: float = 1e10
    ordering: str = "amd"


@dataclass
class LmResult:
    values: Values
    iters: int
    final_error: float
    converged: bool
    initial_error: float = 0.0
    errors: list[float] = field(default_factory=list)


class OptimizationError(RuntimeError):
    def __init__(self, message: str, last_values: Values):
        super().__init__(message)
        self.last_values = last_values


_STEP_TOL = 1e-12
_GRAD_TOL = 1e-12


def optimize_lm(
    graph: FactorGraph, initial: Values, config: LmConfig | None = None
) -> LmResult:
    """Minimize the total graph error starting from ``initial``.

    Classic accept/reject damping loop: a rejected step reuses the current
    linearization with damping scaled up, so retries cost one sparse solve
    each. The accepted error sequence is monotone by construction.
    """
    cfg = config or LmConfig()
    for key in graph.variables:
        if key not in initial:
            raise KeyError(f"initial values missing variable {key!r}")

    values = initial.copy()
    error = graph.total_error(values)
    if not np.isfinite(error):
        raise OptimizationError("non-finite error at initial values", values)

    ordering = compute_ordering(graph, cfg.ordering)
    lam = cfg.lambda_init
    iters = 0
    converged = error < cfg.abs_tol
    errors = [error]

    while not converged and iters < cfg.max_iters:
        try:
            system = linearize(graph, values, ordering)
        except Exception as exc:
            raise OptimizationError(str(exc), values) from exc

        if system.gradient_inf_norm() < _GRAD_TOL * (1.0 + error):
            converged = True
            break

        accepted = False
        while lam <= cfg.lambda_max:
            try:
                delta = solve_linear(system, damping=lam)
            except SingularSystemError:
                lam *= cfg.lambda_scale
                continue
            step_norm = max(
                (float(np.max(np.abs(d))) for d in delta.values()), default=0.0
            )
            if step_norm < _STEP_TOL:
                converged = True
                accepted = True
                break
            candidate = values.retracted(delta)
            cand_error = graph.total_error(candidate)
            if np.isfinite(cand_error) and cand_error < error:
                decrease = (error - cand_error) / max(error, 1e-300)
                values, error = candidate, cand_error
                errors.append(error)
                iters += 1
                accepted = True
                lam = max(lam / cfg.lambda_scale, 1e-14)
                if error < cfg.abs_tol or decrease < cfg.rel_tol:
                    converged = True
                break
            lam *= cfg.lambda_scale
        if not accepted:
            break  # damping exhausted without an acceptable step

    return LmResult(values, iters, error, converged, errors[0], errors)
