import numpy as np
import pytest

from scate.sdf import (
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


def _circle_field(cell=0.02, radius=0.3):
    return Sdf.build([Circle((2.0, 2.0), radius)], Bounds(0, 4, 0, 4), cell)


def test_build_node_values():
    f = _circle_field()
    assert f.query((2.0, 2.0))[0] == pytest.approx(-0.3, abs=1e-15)
    assert f.query((2.0, 3.0))[0] == pytest.approx(0.7, abs=1e-12)


def test_build_matches_analytic_sdf_at_every_node():
    # construction is analytic: no propagation error anywhere on the grid
    f = _circle_field(cell=0.1)
    xs = f.origin[0] + f.cell * np.arange(f.nx)
    ys = f.origin[1] + f.cell * np.arange(f.ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    exact = np.hypot(gx - 2.0, gy - 2.0) - 0.3
    assert np.max(np.abs(f.data - exact)) == 0.0


def test_empty_workspace_sentinel():
    f = Sdf.build([], Bounds(0, 4, 0, 4), 0.1)
    diag = np.hypot(4.0, 4.0)
    assert np.all(f.data == 10.0 * diag)
    # hinge cost is identically zero on the sentinel
    assert hinge_cost(f.query((1.0, 3.0))[0] - 0.35, 0.4)[0] == 0.0


def test_lipschitz_with_grid_slack():
    f = _circle_field(cell=0.05)
    rng = np.random.default_rng(17)
    for _ in range(300):
        p = rng.uniform(0.0, 4.0, 2)
        q = rng.uniform(0.0, 4.0, 2)
        dp, _ = f.query(p)
        dq, _ = f.query(q)
        assert abs(dp - dq) <= np.linalg.norm(p - q) + 2 * f.cell


def test_query_interpolates_between_nodes():
    f = Sdf((0.0, 0.0), 1.0, np.array([[0.2, 0.0], [0.4, 0.0]]))
    val, _ = f.query((0.5, 0.0))
    assert val == pytest.approx(0.3, abs=1e-15)


def test_query_gradient_points_radially():
    f = _circle_field(cell=0.01)
    rng = np.random.default_rng(18)
    for _ in range(100):
        ang = rng.uniform(-np.pi, np.pi)
        d = rng.uniform(0.5, 1.5)
        p = np.array([2.0 + d * np.cos(ang), 2.0 + d * np.sin(ang)])
        _, grad = f.query(p)
        direction = np.arctan2(grad[1], grad[0])
        err = abs((direction - ang + np.pi) % (2 * np.pi) - np.pi)
        assert err < 1e-2


def test_query_error_bounded_by_cell():
    f = _circle_field(cell=0.01)
    rng = np.random.default_rng(19)
    pts = rng.uniform(0.05, 3.95, size=(1000, 2))
    worst = 0.0
    for p in pts:
        got, _ = f.query(p)
        exact = np.hypot(p[0] - 2.0, p[1] - 2.0) - 0.3
        worst = max(worst, abs(got - exact))
    assert worst < 0.01


def test_query_out_of_bounds_is_conservative():
    f = _circle_field()
    inside, _ = f.query((4.0, 2.0))
    outside, grad = f.query((5.0, 2.0))
    assert outside == pytest.approx(inside + 1.0, abs=1e-12)
    assert grad[0] == pytest.approx(1.0)  # outward unit component
    # far away the cost is zero regardless of the grid
    assert hinge_cost(f.query((40.0, 40.0))[0], 0.4)[0] == 0.0


def test_hinge_branches():
    eps = 0.4
    assert hinge_cost(0.0, eps) == (0.4, -1.0)
    assert hinge_cost(eps, eps) == (0.0, -0.5)
    assert hinge_cost(2 * eps, eps) == (0.0, 0.0)


def test_hinge_continuity_and_support():
    eps = 0.4
    assert abs(hinge_cost(eps - 1e-9, eps)[0] - hinge_cost(eps + 1e-9, eps)[0]) < 1e-8
    assert hinge_cost(eps - 1e-12, eps)[0] > 0.0
    assert hinge_cost(eps + 1e-12, eps)[0] == 0.0
    assert hinge_cost(-5.0, eps)[0] == 5.0 + eps


def test_robot_spheres_identity_offset():
    model = SphereModel.single(0.35)
    for psi in (0.0, 1.0, -2.5):
        x = np.array([1.0, 0, 2.0, 0, psi, 0])
        centers, _ = robot_spheres(x, model)
        assert np.allclose(centers[0], [1.0, 2.0])


def test_robot_spheres_quarter_turn():
    model = SphereModel([[1.0, 0.0]], [0.2])
    x = np.array([1.0, 0, 2.0, 0, np.pi / 2, 0])
    centers, _ = robot_spheres(x, model)
    assert np.allclose(centers[0], [1.0, 3.0], atol=1e-15)


def test_robot_spheres_jacobian_matches_fd():
    model = SphereModel([[0.4, -0.1], [0.0, 0.3]], [0.2, 0.1])
    rng = np.random.default_rng(20)
    for _ in range(50):
        x = rng.normal(size=6)
        centers, jac = robot_spheres(x, model)
        h = 1e-6
        for col, idx in enumerate((0, 2, 4)):
            xp, xm = x.copy(), x.copy()
            xp[idx] += h
            xm[idx] -= h
            fd = (robot_spheres(xp, model)[0] - robot_spheres(xm, model)[0]) / (2 * h)
            assert np.max(np.abs(jac[:, :, col] - fd)) < 1e-6


def test_sphere_model_validation():
    with pytest.raises(ValueError):
        SphereModel([[0.0, 0.0]], [-0.1])
    with pytest.raises(ValueError):
        SphereModel([[0.0, 0.0, 0.0]], [0.1])


def test_sdf_for_step_reactive_same_identity():
    f = _circle_field(cell=0.1)
    mode = ReactiveFields(f)
    assert sdf_for_step(mode, 0) is f
    assert sdf_for_step(mode, 7) is f


def test_sdf_for_step_predictive_indexes_sequence():
    fields = [
        Sdf.build([Circle((1.0 + 0.1 * k, 2.0), 0.2)], Bounds(0, 4, 0, 4), 0.1)
        for k in range(5)
    ]
    seq = SdfSequence(fields)
    mode = PredictiveFields(seq)
    assert sdf_for_step(mode, 0) is fields[0]
    assert sdf_for_step(mode, 4) is fields[4]
    with pytest.raises(IndexError):
        sdf_for_step(mode, 5)


def test_sequence_of_constant_fields_is_degenerate():
    f = _circle_field(cell=0.1)
    seq = SdfSequence([f, f, f])
    for k in range(3):
        assert sdf_for_step(PredictiveFields(seq), k) is f


def test_sequence_rejects_mixed_geometry():
    a = _circle_field(cell=0.1)
    b = _circle_field(cell=0.2)
    with pytest.raises(ValueError):
        SdfSequence([a, b])


def test_csv_round_trip(tmp_path):
    f = _circle_field(cell=0.25)
    path = tmp_path / "field.csv"
    f.to_csv(path)
    g = Sdf.from_csv(path)
    assert g.cell == f.cell
    assert np.array_equal(g.origin, f.origin)
    assert np.array_equal(g.data, f.data)
