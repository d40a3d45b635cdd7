import numpy as np
import pytest

from scate.geometry import wrap_angle
from scate.variables import Kind, Values, control, obstacle, sort_key, state


def test_wrap_angle_basics():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)  # closed end is +pi
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    # 6.2 rad wraps just below zero: 6.2 - 2*pi
    assert wrap_angle(6.2) == pytest.approx(6.2 - 2 * np.pi, abs=1e-15)


def test_wrap_angle_array():
    a = np.array([0.1, 2 * np.pi + 0.1, -7.0])
    w = wrap_angle(a)
    assert np.allclose(w, [0.1, 0.1, -7.0 + 2 * np.pi])
    assert np.all(w > -np.pi) and np.all(w <= np.pi)


def test_key_dims_and_uniqueness():
    assert state(3).dim == 6
    assert control(3).dim == 3
    assert obstacle(3).dim == 2
    assert state(3) != control(3)
    assert len({state(0), state(0), control(0)}) == 2


def test_sort_key_orders_by_timestep_then_kind():
    keys = [obstacle(1), state(2), control(0), state(0)]
    ordered = sorted(keys, key=sort_key)
    assert ordered == [state(0), control(0), obstacle(1), state(2)]
    assert [int(k.kind) for k in ordered][:2] == [Kind.STATE, Kind.CONTROL]


def test_values_wraps_state_angle_on_set():
    v = Values()
    v.set(state(0), [0.0, 0.0, 0.0, 0.0, 4.0, 0.0])
    assert v.get(state(0))[4] == pytest.approx(4.0 - 2 * np.pi)
    v.set(obstacle(0), [4.0, 4.0])  # no angle components
    assert np.array_equal(v.get(obstacle(0)), [4.0, 4.0])


def test_values_missing_key_names_the_key():
    v = Values()
    with pytest.raises(KeyError, match="x3"):
        v.get(state(3))


def test_retracted_rewraps_and_preserves_original():
    v = Values({state(0): [0.0, 0.0, 0.0, 0.0, 3.0, 0.0]})
    out = v.retracted({state(0): np.array([1.0, 0, 0, 0, 0.5, 0])})
    assert out.get(state(0))[0] == 1.0
    assert out.get(state(0))[4] == pytest.approx(3.5 - 2 * np.pi)
    assert v.get(state(0))[0] == 0.0  # original untouched
