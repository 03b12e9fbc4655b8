import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jsmoco.geometry import (
    AcquisitionPlan,
    MotionParams,
    cartesian_coords,
    make_plan,
    rotate_coords,
    translation_phase,
    wrap_angle,
)

angles = st.floats(-10.0, 10.0, allow_nan=False)
shifts = st.tuples(st.floats(-20, 20), st.floats(-20, 20))


def test_cartesian_coords_centering():
    c = cartesian_coords(4, 4).reshape(4, 4, 2)
    assert np.allclose(c[2, 2], (0.0, 0.0))
    assert np.allclose(c[2, 3], (np.pi / 2, 0.0))
    c2 = cartesian_coords(2, 2)
    assert set(np.round(c2[:, 0], 12)) == {round(-np.pi, 12), 0.0}
    assert set(np.round(c2[:, 1], 12)) == {round(-np.pi, 12), 0.0}


def test_rotate_examples():
    p = np.random.default_rng(0).normal(size=(10, 2))
    assert np.allclose(rotate_coords(p, 0.0), p)
    assert np.allclose(rotate_coords([[1.0, 0.0]], np.pi / 2), [[0.0, 1.0]])
    with pytest.raises(ValueError):
        rotate_coords(p, np.inf)


@settings(max_examples=50, deadline=None)
@given(angles)
def test_rotation_isometry_and_inverse(theta):
    p = np.random.default_rng(1).normal(size=(20, 2))
    q = rotate_coords(p, theta)
    assert np.allclose(np.linalg.norm(q, axis=1), np.linalg.norm(p, axis=1), atol=1e-12)
    assert np.allclose(rotate_coords(q, -theta), p, atol=1e-12)


def test_translation_phase_examples():
    p = cartesian_coords(8, 8)
    assert np.allclose(translation_phase(p, (0, 0)), 1.0)
    assert np.isclose(translation_phase([[np.pi, 0.0]], (1, 0))[0], -1.0)


@settings(max_examples=50, deadline=None)
@given(shifts, shifts)
def test_translation_phase_group_property(t1, t2):
    p = cartesian_coords(8, 8)
    a = translation_phase(p, t1) * translation_phase(p, t2)
    b = translation_phase(p, np.add(t1, t2))
    assert np.allclose(np.abs(translation_phase(p, t1)), 1.0, atol=1e-12)
    assert np.allclose(a, b, atol=1e-9)


def test_integer_translation_is_circular_shift():
    x = np.random.default_rng(2).normal(size=(8, 8))
    k = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(x)))
    phase = translation_phase(cartesian_coords(8, 8), (2, 1)).reshape(8, 8)
    shifted = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k * phase))).real
    assert np.allclose(shifted, np.roll(x, (1, 2), axis=(0, 1)), atol=1e-12)


def test_plan_examples():
    plan = make_plan(8, 8, 2, 2)
    assert plan.acquired_lines.size == 4
    assert {3, 4} <= set(plan.acquired_lines.tolist())
    plan = make_plan(8, 8, 1, 0, num_shots=4)
    sizes = [sum(1 for v in plan.shot_of_line.values() if v == j) for j in range(4)]
    assert sizes == [2, 2, 2, 2]
    assert make_plan(384, 8, 4.8, 8).acquired_lines.size == 80


def test_plan_orderings():
    seq = make_plan(16, 4, 1, 0, num_shots=4, ordering="sequential")
    assert [seq.shot_of_line[r] for r in range(4)] == [0, 0, 0, 0]
    inter = make_plan(16, 4, 1, 0, num_shots=4, ordering="interleaved")
    assert [inter.shot_of_line[r] for r in range(4)] == [0, 1, 2, 3]


def test_plan_partition_and_determinism():
    a = make_plan(32, 16, 2.5, 4, "random", num_shots=3, seed=5)
    b = make_plan(32, 16, 2.5, 4, "random", num_shots=3, seed=5)
    assert np.array_equal(a.acquired_lines, b.acquired_lines)
    assert a.shot_of_line == b.shot_of_line
    idx = np.concatenate([np.arange(a.num_samples)[s] for s in a.shot_slices])
    assert np.array_equal(idx, np.arange(a.num_samples))
    assert a.num_samples == a.acquired_lines.size * 16
    assert np.array_equal(a.mask.sum(axis=1) > 0, np.isin(np.arange(32), a.acquired_lines))


def test_plan_header_roundtrip():
    a = make_plan(32, 16, 2, 4, num_shots=4, ordering="interleaved")
    b = AcquisitionPlan.from_header(a.header())
    assert np.array_equal(a.coords, b.coords)
    assert a.shot_slices == b.shot_slices


def test_plan_errors():
    with pytest.raises(ValueError):
        make_plan(8, 8, 2, 4)
    with pytest.raises(ValueError):
        make_plan(8, 8, 2, 0, num_shots=5)
    with pytest.raises(ValueError):
        make_plan(8, 8, 0.5, 0)


def test_motion_params_validation_and_wrap():
    m = MotionParams([3 * np.pi], [[1, 2]])
    assert np.isclose(m.rotations[0], np.pi)
    assert np.isclose(wrap_angle(-np.pi), np.pi)
    with pytest.raises(ValueError):
        MotionParams([0.0, 1.0], [[0, 0]])
    with pytest.raises(ValueError):
        MotionParams([np.nan], [[0, 0]])


def test_gauge_fixed_removes_global_transform():
    m = MotionParams.from_array(np.random.default_rng(3).normal(size=(4, 3)) * [0.1, 2, 2])
    g = m.compose_global(0.3, (1.5, -2.0))
    assert np.allclose(m.gauge_fixed().as_array(), g.gauge_fixed().as_array(), atol=1e-12)
    assert np.allclose(m.gauge_fixed().as_array()[0], 0.0)
