import numpy as np
import pytest
from hypothesis import given, strategies as st

from ph_eq.box import ManifoldBox, face_points, grid_points, halton, interior_points, verify_inward


class TestBox:
    def test_invalid(self):
        with pytest.raises(ValueError):
            ManifoldBox([0, 1], [1, 1])
        with pytest.raises(ValueError):
            ManifoldBox([0], [1, 2])

    def test_geometry(self):
        box = ManifoldBox([0, 1], [2, 3])
        np.testing.assert_allclose(box.center, [1, 2])
        np.testing.assert_allclose(box.width, [2, 2])
        assert box.contains([0, 3]) and not box.contains([0, 3.1])
        assert box.contains([0, 3.1], slack=0.2)

    def test_grid_cell_centred(self):
        pts = grid_points(ManifoldBox.cube(0, 1, 2), 2)
        np.testing.assert_allclose(pts, [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])
        np.testing.assert_allclose(grid_points(ManifoldBox.cube(0, 1, 2), 1), [[0.5, 0.5]])


@given(st.integers(1, 6), st.integers(1, 40))
def test_face_points_lie_on_face(n, samples):
    box = ManifoldBox(np.zeros(n), np.arange(1, n + 1, dtype=float))
    for i in range(n):
        for side, value in (("lower", box.lower[i]), ("upper", box.upper[i])):
            pts = face_points(box, i, side, samples)
            assert np.all(pts[:, i] == value)
            assert all(box.contains(p) for p in pts)


def test_face_points_include_corners():
    box = ManifoldBox.cube(0, 1, 3)
    pts = face_points(box, 0, "lower", 4)
    corners = {(0.0, a, b) for a in (0.0, 1.0) for b in (0.0, 1.0)}
    assert corners <= {tuple(p) for p in pts}


def test_halton_deterministic():
    np.testing.assert_array_equal(halton(10, 3), halton(10, 3))
    assert np.all((halton(50, 2) >= 0) & (halton(50, 2) < 1))


def test_interior_points_inside():
    box = ManifoldBox([0.1, 0.2], [0.3, 0.9])
    pts = interior_points(box, 100)
    assert all(box.contains(p) for p in pts)


def test_verify_inward_on_contraction():
    box = ManifoldBox.cube(-1, 1, 3)
    rep = verify_inward(lambda x: -x, box)
    assert rep.passed and rep.worst_margin == pytest.approx(1.0)


def test_verify_inward_on_expansion():
    rep = verify_inward(lambda x: x, ManifoldBox.cube(-1, 1, 2))
    assert not rep.passed
    assert len(rep.failures()) == 4
    assert rep.to_dict()["passed"] is False
