import numpy as np
import pytest

from scate.dynamics import LtiModel, discretize_lti, planar_model
from scate.factors import (
    BearingRangeFactor,
    BearingRangeMeas,
    ControlLimitFactor,
    ControlLimits,
    DynamicsFactor,
    ObstacleFactor,
    PriorFactor,
)
from scate.noise import NoiseModel
from scate.sdf import Bounds, Circle, Sdf, SphereModel
from scate.variables import Values, control, obstacle, state
from scate.verify import FACTOR_SAMPLERS, jacobian_deviation


# --- prior -----------------------------------------------------------------

def test_prior_zero_at_target():
    f = PriorFactor(state(0), np.arange(6.0) - 2.0, NoiseModel.isotropic(6, 1.0))
    v = Values({state(0): np.arange(6.0) - 2.0})
    assert np.allclose(f.residual(v), 0.0)


def test_prior_heading_residual_wraps():
    # wrap(3.1 - (-3.1)) = 6.2 - 2*pi, not 6.2
    target = np.zeros(6)
    target[4] = -3.1
    f = PriorFactor(state(0), target, NoiseModel.isotropic(6, 1.0))
    v = Values({state(0): [0, 0, 0, 0, 3.1, 0]})
    r = f.residual(v)
    assert r[4] == pytest.approx(6.2 - 2 * np.pi, abs=1e-12)
    assert abs(r[4]) < 0.1


def test_start_prior_contributes_zero_at_start():
    x_start = np.array([0.5, 0.0, 0.5, 0.0, 0.2, 0.0])
    f = PriorFactor(state(0), x_start, NoiseModel.isotropic(6, 1e-4), tag="start")
    v = Values({state(0): x_start})
    assert f.error(v) == 0.0


# --- bearing / range ---------------------------------------------------------

def _br(bearing, rng_m):
    return BearingRangeMeas(bearing, rng_m, 0.05, 0.02)


def test_bearing_range_exact_measurement():
    f = BearingRangeFactor(state(0), obstacle(0), _br(np.pi / 4, np.sqrt(2.0)))
    for psi in (0.0, 1.1, -2.0):
        v = Values({state(0): [0, 0, 0, 0, psi, 0], obstacle(0): [1.0, 1.0]})
        assert np.allclose(f.residual(v), 0.0, atol=1e-15)


def test_bearing_range_range_offset():
    f = BearingRangeFactor(state(0), obstacle(0), _br(0.0, 1.0))
    v = Values({state(0): np.zeros(6), obstacle(0): [2.0, 0.0]})
    r = f.residual(v)
    assert r[0] == pytest.approx(0.0, abs=1e-15)
    assert r[1] == pytest.approx(1.0, abs=1e-15)


def test_range_invariant_under_heading():
    # the body-frame displacement norm equals the euclidean distance
    rng = np.random.default_rng(4)
    f = BearingRangeFactor(state(0), obstacle(0), _br(0.3, 1.7))
    base = rng.normal(size=6)
    l = base[[0, 2]] + np.array([0.9, -1.1])
    r_ref = None
    for _ in range(20):
        x = base.copy()
        x[4] = rng.uniform(-np.pi, np.pi)
        v = Values({state(0): x, obstacle(0): l})
        r = f.residual(v)[1]
        if r_ref is None:
            r_ref = r
        assert abs(r - r_ref) < 1e-12


def test_bearing_undefined_at_coincidence():
    f = BearingRangeFactor(state(0), obstacle(0), _br(0.0, 1.0))
    v = Values({state(0): np.zeros(6), obstacle(0): [0.0, 0.0]})
    with pytest.raises(ValueError, match="coincide"):
        f.residual(v)


def test_invalid_measurement_rejected():
    with pytest.raises(ValueError):
        BearingRangeMeas(0.0, -1.0, 0.1, 0.1)


# --- dynamics ----------------------------------------------------------------

def test_dynamics_zero_on_exact_transition():
    model = LtiModel.planar(3.0, 0.7, 0.8)
    f = DynamicsFactor(state(1), state(0), control(0), model.f_x, model.f_u,
                       NoiseModel.isotropic(6, 1e-3))
    rng = np.random.default_rng(8)
    x = rng.normal(size=6)
    u = rng.normal(size=3)
    v = Values({state(0): x, control(0): u, state(1): model.f_x @ x + model.f_u @ u})
    assert np.allclose(f.residual(v), 0.0, atol=1e-15)


def test_dynamics_unit_residual():
    model = LtiModel.planar(1.0, 1.0, 1.0)
    f = DynamicsFactor(state(1), state(0), control(0), model.f_x, model.f_u,
                       NoiseModel.isotropic(6, 1.0))
    e1 = np.zeros(6)
    e1[0] = 1.0
    v = Values({state(0): np.zeros(6), control(0): np.zeros(3), state(1): e1})
    assert np.array_equal(f.residual(v), e1)


def test_double_integrator_axis_block():
    # m=1, dt=1: position/velocity block must satisfy x_next = (1, 1) for
    # x = (0, 1), u = 0 (F_x block [[1, 1], [0, 1]] from the nilpotent series)
    model = LtiModel.planar(1.0, 1.0, 1.0)
    f = DynamicsFactor(state(1), state(0), control(0), model.f_x, model.f_u,
                       NoiseModel.isotropic(6, 1.0))
    x = np.zeros(6)
    x[1] = 1.0  # unit x-velocity
    x_next = np.zeros(6)
    x_next[0] = 1.0
    x_next[1] = 1.0
    v = Values({state(0): x, control(0): np.zeros(3), state(1): x_next})
    assert np.allclose(f.residual(v), 0.0, atol=1e-15)


def test_dynamics_residual_is_affine():
    model = LtiModel.planar(2.0, 0.4, 0.5)
    f = DynamicsFactor(state(1), state(0), control(0), model.f_x, model.f_u,
                       NoiseModel.isotropic(6, 1.0))
    rng = np.random.default_rng(11)

    def sample():
        return Values({state(0): rng.uniform(-1, 1, 6),
                       control(0): rng.uniform(-1, 1, 3),
                       state(1): rng.uniform(-1, 1, 6)})

    for _ in range(20):
        va, vb = sample(), sample()
        lam = rng.uniform(0.0, 1.0)
        mix = Values({k: lam * va.get(k) + (1 - lam) * vb.get(k) for k in va.keys()})
        expect = lam * f.residual(va) + (1 - lam) * f.residual(vb)
        assert np.max(np.abs(f.residual(mix) - expect)) < 1e-12


# --- control limits ----------------------------------------------------------

def _limits():
    return ControlLimits(np.array([-1.0, -1.0, -1.0]),
                         np.array([1.0, 1.0, 1.0]),
                         np.array([0.1, 0.1, 0.1]))


def test_limit_zero_inside():
    f = ControlLimitFactor(control(0), _limits(), NoiseModel.isotropic(3, 1.0))
    v = Values({control(0): [0.0, 0.5, -0.85]})
    assert np.array_equal(f.residual(v), np.zeros(3))


def test_limit_upper_branch():
    # u+ = 1, ths = 0.1, u = 1.05: residual 1.05 - 1 + 0.1 = 0.15
    f = ControlLimitFactor(control(0), _limits(), NoiseModel.isotropic(3, 1.0))
    v = Values({control(0): [1.05, 0.0, 0.0]})
    r = f.residual(v)
    assert r[0] == pytest.approx(0.15, abs=1e-15)
    assert r[1] == r[2] == 0.0


def test_limit_lower_branch():
    # u- = -1, ths = 0.1, u = -1.2: residual -1 + 0.1 - (-1.2) = 0.3
    f = ControlLimitFactor(control(0), _limits(), NoiseModel.isotropic(3, 1.0))
    v = Values({control(0): [-1.2, 0.0, 0.0]})
    assert f.residual(v)[0] == pytest.approx(0.3, abs=1e-15)


def test_limit_continuity_across_branches():
    f = ControlLimitFactor(control(0), _limits(), NoiseModel.isotropic(3, 1.0))
    for kink in (-0.9, 0.9):
        lo = Values({control(0): [kink - 1e-9, 0, 0]})
        hi = Values({control(0): [kink + 1e-9, 0, 0]})
        jump = abs(f.residual(lo)[0] - f.residual(hi)[0])
        assert jump < 1e-8


def test_limit_kink_subgradients():
    f = ControlLimitFactor(control(0), _limits(), NoiseModel.isotropic(3, 1.0))
    jac = f.jacobians(Values({control(0): [-0.9, 0.9, 0.0]}))[0]
    assert jac[0, 0] == -0.5
    assert jac[1, 1] == 0.5
    assert jac[2, 2] == 0.0


def test_infeasible_limits_rejected():
    with pytest.raises(ValueError):
        ControlLimits(np.array([-0.1]), np.array([0.1]), np.array([0.2]))


# --- obstacle ----------------------------------------------------------------

@pytest.fixture(scope="module")
def circle_field():
    return Sdf.build([Circle((2.0, 2.0), 0.3)], Bounds(0.0, 4.0, 0.0, 4.0), 0.02)


def _obstacle_factor(field, spheres, eps=0.4):
    return ObstacleFactor(state(0), field, spheres, eps,
                          NoiseModel.isotropic(spheres.count, 0.05))


def test_obstacle_zero_when_clear(circle_field):
    f = _obstacle_factor(circle_field, SphereModel.single(0.35))
    v = Values({state(0): [0.5, 0, 0.5, 0, 0.3, 0]})
    assert np.array_equal(f.residual(v), np.zeros(1))


def test_obstacle_cost_at_zero_clearance(circle_field):
    # sphere center placed where field distance equals the sphere radius:
    # clearance 0, hinge cost = eps (grid-aligned so interpolation is exact)
    spheres = SphereModel.single(0.3)
    f = _obstacle_factor(circle_field, spheres, eps=0.4)
    v = Values({state(0): [2.0, 0, 2.6, 0, 0.0, 0]})  # D = 0.6 - 0.3 = 0.3
    r = f.residual(v)
    assert r[0] == pytest.approx(0.4, abs=1e-12)


def test_obstacle_matches_analytic_circle_cost(circle_field):
    # oracle: for a single circle, cost = -(d - r_obs - r_sphere) + eps inside
    # the danger zone, with d the center distance
    spheres = SphereModel.single(0.35)
    eps = 0.4
    f = _obstacle_factor(circle_field, spheres, eps)
    rng = np.random.default_rng(9)
    checked = 0
    while checked < 50:
        ang = rng.uniform(-np.pi, np.pi)
        d = rng.uniform(0.7, 1.0)  # inside the danger zone
        x = np.zeros(6)
        x[0] = 2.0 + d * np.cos(ang)
        x[2] = 2.0 + d * np.sin(ang)
        v = Values({state(0): x})
        expected = -(d - 0.3 - 0.35) + eps
        got = f.residual(v)[0]
        assert got == pytest.approx(expected, abs=1e-3)
        checked += 1


def test_obstacle_support_is_compact(circle_field):
    # zero cost anywhere the true clearance exceeds eps, at any resolution
    spheres = SphereModel.single(0.35)
    f = _obstacle_factor(circle_field, spheres, eps=0.4)
    rng = np.random.default_rng(10)
    for _ in range(200):
        ang = rng.uniform(-np.pi, np.pi)
        d = rng.uniform(1.05 + 1e-6, 2.0)  # clearance = d - 0.65 > 0.4
        x = np.zeros(6)
        x[0] = 2.0 + d * np.cos(ang)
        x[2] = 2.0 + d * np.sin(ang)
        if not (0 <= x[0] <= 4 and 0 <= x[2] <= 4):
            continue
        v = Values({state(0): x})
        assert f.residual(v)[0] == 0.0


def test_obstacle_multi_sphere_dimensions(circle_field):
    spheres = SphereModel([[0.0, 0.0], [0.3, 0.0], [-0.3, 0.0]], [0.2, 0.2, 0.2])
    f = _obstacle_factor(circle_field, spheres)
    v = Values({state(0): [2.0, 0, 1.2, 0, 0.5, 0]})
    assert f.residual(v).shape == (3,)
    assert f.jacobians(v)[0].shape == (3, 6)


# --- cross-cutting -----------------------------------------------------------

def test_error_equals_half_mahalanobis_norm():
    # every factor family: error contribution is 0.5 * r^T Sigma^-1 r
    rng = np.random.default_rng(12)
    for tag, sampler in FACTOR_SAMPLERS.items():
        factor, values = sampler(rng)
        r = factor.residual(values)
        manual = 0.5 * float(r @ np.linalg.solve(factor.noise.covariance, r))
        assert factor.error(values) == pytest.approx(manual, rel=1e-12, abs=1e-15), tag


def test_all_factor_jacobians_match_finite_differences():
    # 100+ random points per factor family, away from hinge kinks
    rng = np.random.default_rng(13)
    for tag, sampler in FACTOR_SAMPLERS.items():
        worst = 0.0
        for _ in range(100):
            factor, values = sampler(rng)
            worst = max(worst, jacobian_deviation(factor, values))
        assert worst < 1e-5, f"{tag}: {worst}"
