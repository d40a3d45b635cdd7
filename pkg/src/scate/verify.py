"""Self-contained verification suites: finite-difference Jacobian checks for
every factor family, dense-oracle equivalence of the sparse solver,
discretization and hinge identities, and gain stability.

These run both from the test suite and from the command line, and they are
deliberately independent of the code paths they check: Jacobians are compared
against central differences, and the sparse solve against a dense stacked
least-squares build of the same damped objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import design_gain, discretize_lti, is_hurwitz, planar_model
from .factors import (
    BearingRangeFactor,
    BearingRangeMeas,
    ControlLimitFactor,
    ControlLimits,
    DynamicsFactor,
    ObstacleFactor,
    PriorFactor,
)
from .graph import Factor, FactorGraph
from .linear import compute_ordering, linearize
from .noise import NoiseModel
from .optimize import LmConfig, optimize_lm
from .sdf import Bounds, Circle, Sdf, SphereModel, hinge_cost
from .variables import Values, control, state, obstacle


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}" + (f": {self.detail}" if self.detail else "")


def fd_jacobians(factor: Factor, values: Values, step: float = 1e-6) -> list[np.ndarray]:
    """Central-difference Jacobians of the unwhitened residual."""
    out = []
    for key in factor.keys:
        base = values.get(key).copy()
        jac = np.zeros((factor.dim, key.dim))
        for j in range(key.dim):
            for sign in (+1.0, -1.0):
                v = values.copy()
                pert = base.copy()
                pert[j] += sign * step
                v._entries[key] = pert  # bypass wrapping so the probe is exact
                r = factor.residual(v)
                jac[:, j] += sign * r / (2.0 * step)
        out.append(jac)
    return out


def jacobian_deviation(factor: Factor, values: Values) -> float:
    """Worst relative deviation between analytic and FD Jacobians."""
    analytic = factor.jacobians(values)
    numeric = fd_jacobians(factor, values)
    worst = 0.0
    for ja, jn in zip(analytic, numeric):
        scale = max(1.0, float(np.max(np.abs(jn), initial=0.0)))
        worst = max(worst, float(np.max(np.abs(ja - jn), initial=0.0)) / scale)
    return worst


def check_factor_jacobian(
    factor: Factor, values: Values, rel_tol: float = 1e-5, label: str | None = None
) -> CheckResult:
    """Compare analytic and finite-difference Jacobians for one factor."""
    name = label or f"jacobian[{factor.tag}]"
    worst = jacobian_deviation(factor, values)
    return CheckResult(
        name, worst < rel_tol, f"max relative deviation {worst:.2e}"
    )


def _sample_prior(rng: np.random.Generator):
    key = state(int(rng.integers(0, 10)))
    target = rng.uniform(-2.0, 2.0, 6)
    values = Values({key: target + rng.uniform(-1.0, 1.0, 6)})
    return PriorFactor(key, target, NoiseModel.diagonal(rng.uniform(0.1, 1.0, 6))), values


def _sample_bearing_range(rng: np.random.Generator):
    x = rng.uniform(-2.0, 2.0, 6)
    x[4] = rng.uniform(-2.5, 2.5)
    direction = rng.uniform(-np.pi, np.pi)
    dist = rng.uniform(0.3, 3.0)
    l = np.array([x[0] + dist * np.cos(direction), x[2] + dist * np.sin(direction)])
    # keep the wrapped bearing residual away from its +-pi seam
    meas = BearingRangeMeas(
        direction + rng.uniform(-1.0, 1.0),
        max(0.0, dist + rng.uniform(-0.2, 0.2)),
        0.02,
        0.02,
    )
    values = Values({state(0): x, obstacle(0): l})
    return BearingRangeFactor(state(0), obstacle(0), meas), values


def _sample_dynamics(rng: np.random.Generator):
    a, b = planar_model(rng.uniform(1.0, 20.0), rng.uniform(0.2, 5.0))
    f_x, f_u = discretize_lti(a, b, rng.uniform(0.1, 2.0))
    values = Values(
        {
            state(1): rng.uniform(-2.0, 2.0, 6),
            state(0): rng.uniform(-2.0, 2.0, 6),
            control(0): rng.uniform(-2.0, 2.0, 3),
        }
    )
    factor = DynamicsFactor(
        state(1), state(0), control(0), f_x, f_u, NoiseModel.isotropic(6, 1e-3)
    )
    return factor, values


def _sample_control_limit(rng: np.random.Generator):
    limits = ControlLimits.symmetric(np.array([2.0, 2.0, 0.5]), 0.05)
    lo = limits.lower + limits.threshold
    hi = limits.upper - limits.threshold
    while True:
        u = rng.uniform(limits.lower * 1.5, limits.upper * 1.5)
        if np.all(np.minimum(np.abs(u - lo), np.abs(u - hi)) > 1e-3):
            break
    values = Values({control(0): u})
    return ControlLimitFactor(control(0), limits, NoiseModel.isotropic(3, 1e-2)), values


def _sample_obstacle(rng: np.random.Generator):
    cell = 0.02
    field = Sdf.build(
        [Circle((2.0, 2.0), 0.3)], Bounds(0.0, 4.0, 0.0, 4.0), cell
    )
    spheres = SphereModel([[0.0, 0.0], [0.25, 0.1]], [0.3, 0.15])
    eps = 0.4
    while True:
        x = np.zeros(6)
        if rng.random() < 0.5:
            # place the body inside the danger band so the hinge is active
            angle = rng.uniform(-np.pi, np.pi)
            dist = rng.uniform(0.4, 1.2)
            x[0] = 2.0 + dist * np.cos(angle)
            x[2] = 2.0 + dist * np.sin(angle)
        else:
            x[0] = rng.uniform(0.5, 3.5)
            x[2] = rng.uniform(0.5, 3.5)
        x[4] = rng.uniform(-2.5, 2.5)
        values = Values({state(0): x})
        from .sdf import robot_spheres

        centers, _ = robot_spheres(x, spheres)
        ok = True
        for c, radius in zip(centers, spheres.radii):
            frac = (c - field.origin) / cell
            # keep probes off the bilinear patch boundaries and the hinge kink
            if np.any(np.abs(frac - np.round(frac)) * cell < 1e-4):
                ok = False
                break
            d, _ = field.query(c)
            if abs((d - radius) - eps) < 1e-3:
                ok = False
                break
        if ok:
            break
    factor = ObstacleFactor(
        state(0), field, spheres, eps, NoiseModel.isotropic(spheres.count, 0.05)
    )
    return factor, values


FACTOR_SAMPLERS: dict[str, Callable] = {
    "prior": _sample_prior,
    "bearing_range": _sample_bearing_range,
    "dynamics": _sample_dynamics,
    "control_limit": _sample_control_limit,
    "obstacle": _sample_obstacle,
}


def check_jacobian_suite(seed: int = 0, samples: int = 100) -> list[CheckResult]:
    """FD-check every factor family at ``samples`` random points each, and
    assert the hinge-kink subgradients exactly."""
    rng = np.random.default_rng(seed)
    results = []
    for tag, sampler in FACTOR_SAMPLERS.items():
        worst = 0.0
        for _ in range(samples):
            factor, values = sampler(rng)
            worst = max(worst, jacobian_deviation(factor, values))
        results.append(
            CheckResult(
                f"jacobian[{tag}]",
                worst < 1e-5,
                f"max relative deviation {worst:.2e} over {samples} samples",
            )
        )

    limits = ControlLimits.symmetric(np.array([2.0, 2.0, 0.5]), 0.05)
    factor = ControlLimitFactor(control(0), limits, NoiseModel.isotropic(3, 1.0))
    at_lower = Values({control(0): limits.lower + limits.threshold})
    at_upper = Values({control(0): limits.upper - limits.threshold})
    jl = np.diag(factor.jacobians(at_lower)[0])
    ju = np.diag(factor.jacobians(at_upper)[0])
    kink_ok = np.allclose(jl, -0.5) and np.allclose(ju, 0.5)
    results.append(
        CheckResult(
            "kink[control_limit]", bool(kink_ok), "subgradients -0.5/+0.5 at kinks"
        )
    )
    _, slope = hinge_cost(0.4, 0.4)
    results.append(
        CheckResult("kink[hinge]", slope == -0.5, f"slope at d=eps is {slope}")
    )
    return results


def dense_stacked_system(graph: FactorGraph, values: Values, ordering):
    """Dense whitened Jacobian and residual assembled directly, factor by
    factor, with none of the sparse machinery involved."""
    offsets = {}
    dim = 0
    for key in ordering:
        offsets[key] = dim
        dim += key.dim
    rows = sum(f.dim for _, f in graph.items())
    jmat = np.zeros((rows, dim))
    r = np.zeros(rows)
    row = 0
    for _, factor in graph.items():
        res, jacs = factor.whitened(values)
        m = res.shape[0]
        r[row : row + m] = res
        for key, jac in zip(factor.keys, jacs):
            c = offsets[key]
            jmat[row : row + m, c : c + key.dim] = jac
        row += m
    return jmat, r, offsets


def dense_damped_step(jmat: np.ndarray, r: np.ndarray, damping: float) -> np.ndarray:
    """QR/lstsq solution of the damped objective
    ||J delta + r||^2 + damping * ||sqrt(diag(J^T J)) delta||^2."""
    d = np.sum(jmat * jmat, axis=0)
    d = np.where(d > 0.0, d, 1.0)
    aug = np.vstack([jmat, np.diag(np.sqrt(damping * d))])
    rhs = np.concatenate([-r, np.zeros(jmat.shape[1])])
    delta, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    return delta


def _endpoint_graph(n: int) -> tuple[FactorGraph, Values]:
    """Start/goal/dynamics/limits graph with a straight-line initial guess.

    Limits are wide enough that every hinge stays inactive over the whole
    solve, which keeps the graph exactly linear."""
    from .dynamics import LtiModel

    model = LtiModel.planar(10.0, 1.0, 1.0)
    x_start = np.array([0.5, 0.0, 0.5, 0.0, 0.0, 0.0])
    x_goal = np.array([3.5, 0.0, 3.5, 0.0, 0.5, 0.0])
    fix = NoiseModel.isotropic(6, 1e-4)
    dyn = NoiseModel.isotropic(6, 1e-3)
    lim = NoiseModel.isotropic(3, 1e-2)
    limits = ControlLimits.symmetric(np.array([200.0, 200.0, 50.0]), 0.05)
    graph = FactorGraph()
    graph.add(PriorFactor(state(0), x_start, fix, tag="start"))
    graph.add(PriorFactor(state(n), x_goal, fix, tag="goal"))
    for i in range(n):
        graph.add(
            DynamicsFactor(state(i + 1), state(i), control(i), model.f_x, model.f_u, dyn)
        )
        graph.add(ControlLimitFactor(control(i), limits, lim))
    values = Values()
    for i in range(n + 1):
        alpha = i / n
        values.set(state(i), (1 - alpha) * x_start + alpha * x_goal)
    for i in range(n):
        values.set(control(i), np.zeros(3))
    return graph, values


def check_dense_equivalence(horizons=(2, 3, 5)) -> list[CheckResult]:
    """Sparse LM on obstacle-free endpoint graphs must land on the dense
    damped-least-squares solution in one accepted iteration.

    These graphs carry no control-effort cost, so for N > 2 the objective has
    a 3(N-2)-dimensional flat nullspace and float64 cannot pin a zero-cost
    direction tighter than roundoff over the tiny damping. The solutions are
    therefore compared on the determined subspace (the row space of J), where
    every minimizer coincides; the achieved error is compared as well.
    """
    results = []
    cfg = LmConfig()
    for n in horizons:
        graph, init = _endpoint_graph(n)
        result = optimize_lm(graph, init, cfg)
        ordering = compute_ordering(graph, cfg.ordering)
        jmat, r, offsets = dense_stacked_system(graph, init, ordering)
        delta = dense_damped_step(jmat, r, cfg.lambda_init)

        got = np.zeros(jmat.shape[1])
        dense_val = np.zeros(jmat.shape[1])
        for key, off in offsets.items():
            got[off : off + key.dim] = result.values.get(key)
            dense_val[off : off + key.dim] = init.get(key) + delta[off : off + key.dim]
        _, svals, vt = np.linalg.svd(jmat, full_matrices=False)
        rank = int(np.sum(svals > svals[0] * 1e-10))
        row_space = vt[:rank]
        diff = got - dense_val
        determined = row_space.T @ (row_space @ diff)
        deviation = float(np.max(np.abs(determined))) / max(
            1.0, float(np.max(np.abs(dense_val)))
        )
        dense_error = 0.5 * float(np.linalg.norm(jmat @ delta + r) ** 2)
        error_gap = abs(result.final_error - dense_error) / max(1.0, dense_error)
        ok = (
            deviation < 1e-8
            and error_gap < 1e-8
            and result.iters == 1
            and result.converged
        )
        results.append(
            CheckResult(
                f"dense_equivalence[N={n}]",
                bool(ok),
                f"deviation {deviation:.2e}, error gap {error_gap:.2e}, "
                f"iters {result.iters}",
            )
        )
    return results


def check_hinge_properties() -> list[CheckResult]:
    eps = 0.4
    checks = [
        hinge_cost(0.0, eps) == (eps, -1.0),
        hinge_cost(eps, eps) == (0.0, -0.5),
        hinge_cost(2 * eps, eps) == (0.0, 0.0),
    ]
    gap = abs(hinge_cost(eps - 1e-9, eps)[0] - hinge_cost(eps + 1e-9, eps)[0])
    checks.append(gap < 1e-8)
    support_ok = hinge_cost(eps + 1e-12, eps)[0] == 0.0 and hinge_cost(
        eps - 1e-12, eps
    )[0] > 0.0
    checks.append(support_ok)
    return [
        CheckResult(
            "hinge_properties", all(checks), "branch values, continuity, support"
        )
    ]


def check_discretization(seed: int = 0, trials: int = 20) -> list[CheckResult]:
    results = []
    a, b = planar_model(10.0, 1.0)
    dt = 1.0
    f_x, f_u = discretize_lti(a, b, dt)
    # nilpotent closed forms: e^{A dt} = I + A dt, integral = (I dt + A dt^2/2) B
    exact_fx = np.eye(6) + a * dt
    exact_fu = (np.eye(6) * dt + a * dt * dt / 2.0) @ b
    ok = np.max(np.abs(f_x - exact_fx)) < 1e-12 and np.max(np.abs(f_u - exact_fu)) < 1e-12
    results.append(CheckResult("discretization_closed_form", bool(ok)))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(trials):
        n, m = 4, 2
        if trial % 2 == 0:
            raw = rng.normal(size=(n, n))
            shift = np.max(np.real(np.linalg.eigvals(raw))) + 0.5
            a_t = raw - shift * np.eye(n)
        else:
            a_t = np.triu(rng.normal(size=(n, n)), k=1)
        b_t = rng.normal(size=(n, m))
        dt_t = rng.uniform(0.1, 2.0)
        fx_full, fu_full = discretize_lti(a_t, b_t, dt_t)
        fx_half, fu_half = discretize_lti(a_t, b_t, dt_t / 2.0)
        worst = max(worst, float(np.max(np.abs(fx_half @ fx_half - fx_full))))
        worst = max(worst, float(np.max(np.abs(fx_half @ fu_half + fu_half - fu_full))))
    results.append(
        CheckResult("discretization_semigroup", worst < 1e-10, f"max gap {worst:.2e}")
    )
    return results


def check_gain_stability() -> list[CheckResult]:
    a, b = planar_model(10.0, 1.0)
    k = design_gain(a, b)
    ok = is_hurwitz(a - b @ k) and not is_hurwitz(a - b @ np.zeros_like(k))
    k_lqr = design_gain(a, b, q=np.eye(6), r=np.eye(3))
    ok = ok and is_hurwitz(a - b @ k_lqr)
    return [CheckResult("gain_hurwitz", bool(ok))]


def run_all(seed: int = 0) -> list[CheckResult]:
    results = []
    results += check_jacobian_suite(seed)
    results += check_dense_equivalence()
    results += check_hinge_properties()
    results += check_discretization(seed)
    results += check_gain_stability()
    return results
