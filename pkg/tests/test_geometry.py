import numpy as np
import pytest

from urdforge.geometry import (
    face_corners,
    face_point,
    matrix_to_rpy,
    rpy_matrix,
    transform_matrix,
    matrix_to_transform,
    tree_depth,
    world_poses,
)
from urdforge.scene import BBox3, Transform


@pytest.mark.parametrize("rpy", [(0.1, -0.4, 2.0), (0.0, 0.0, 0.0), (-3.0, 1.2, -1.0)])
def test_rpy_round_trip(rpy):
    R = rpy_matrix(rpy)
    assert np.allclose(R @ R.T, np.eye(3))
    assert np.allclose(matrix_to_rpy(R), rpy)


def test_transform_matrix_round_trip():
    t = Transform((1.0, -2.0, 0.5), (0.2, 0.3, -0.4))
    back = matrix_to_transform(transform_matrix(t))
    assert np.allclose(back.xyz, t.xyz)
    assert np.allclose(back.rpy, t.rpy)


def test_face_point_corners():
    b = BBox3((0.25, 0.0, 0.5), (0.5, 1.0, 1.0))
    # (u, v) = (0, 0) is the top-left of the front face seen from outside
    assert face_point(b, 0.0, 0.0) == pytest.approx((0.5, -0.5, 1.0))
    assert face_point(b, 1.0, 1.0) == pytest.approx((0.5, 0.5, 0.0))
    corners = face_corners(b)
    assert corners.shape == (4, 3)
    assert np.allclose(corners[:, 0], 0.5)


def test_world_pose_of_part_composes(cabinet_scene):
    poses = world_poses(cabinet_scene)
    drawer = cabinet_scene.objects[1]
    assert np.allclose(poses[1], poses[0] @ transform_matrix(drawer.origin))


def test_tree_depth(cabinet_scene):
    assert tree_depth(cabinet_scene) == [0, 1, 1, 2, 2]
