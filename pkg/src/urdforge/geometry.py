"""Frame math: rpy rotations, room root frames, world poses, face coordinates.

Face coordinates (u, v) are normalized over a node's front face as seen
from in front of it: u runs left to right (local +y), v runs top to bottom
(local -z), both in [0, 1].
"""

from __future__ import annotations

import math

import numpy as np

from .scene import BBox3, ObjectNode, Room, SceneDescriptor, Transform


def rpy_matrix(rpy) -> np.ndarray:
    """URDF convention: R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def matrix_to_rpy(R: np.ndarray) -> tuple[float, float, float]:
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    if abs(R[2, 0]) < 1 - 1e-12:
        roll = math.atan2(R[2, 1], R[2, 2])
        yaw = math.atan2(R[1, 0], R[0, 0])
    else:
        roll = 0.0
        yaw = math.atan2(-R[0, 1], R[1, 1])
    return roll, pitch, yaw


def transform_matrix(t: Transform) -> np.ndarray:
    M = np.eye(4)
    M[:3, :3] = rpy_matrix(t.rpy)
    M[:3, 3] = t.xyz
    return M


def matrix_to_transform(M: np.ndarray) -> Transform:
    return Transform(tuple(M[:3, 3]), matrix_to_rpy(M[:3, :3]))


def _wall_yaw(wall: str) -> float:
    # frame x axis = inward wall normal
    return {"wall_0": -math.pi / 2, "wall_1": math.pi, "wall_2": math.pi / 2, "wall_3": 0.0}[wall]


def root_frame(root: str, room: Room) -> np.ndarray:
    """World pose of a room root.

    Walls: x = inward normal, y = along the wall to the right when facing it
    from inside, z = up; origin at the wall's left end on the floor. The room
    is centered on the world origin. Floor: world frame. Ceiling: world frame
    lifted to the ceiling and flipped so z points down into the room.
    """
    M = np.eye(4)
    if root == "floor":
        return M
    if root == "ceiling":
        M[:3, :3] = rpy_matrix((math.pi, 0.0, 0.0))
        M[2, 3] = room.height
        return M
    yaw = _wall_yaw(root)
    R = rpy_matrix((0.0, 0.0, yaw))
    normal = R[:, 0]
    along = R[:, 1]
    half = {"wall_0": room.depth, "wall_1": room.width, "wall_2": room.depth, "wall_3": room.width}[root] / 2
    center = -normal * half
    M[:3, :3] = R
    M[:3, 3] = center - along * room.wall_length(root) / 2
    return M


def world_poses(scene: SceneDescriptor) -> list[np.ndarray]:
    """World pose (4x4) of every node frame at the zero joint configuration."""
    poses: list[np.ndarray] = []
    for node in scene.objects:
        if node.parent.root is not None:
            base = root_frame(node.parent.root, scene.room)
        else:
            base = poses[node.parent.object]
        poses.append(base @ transform_matrix(node.origin))
    return poses


def face_point(bbox: BBox3, u: float, v: float) -> tuple[float, float, float]:
    """Local coordinates of face point (u, v) on the front face of ``bbox``."""
    cx, cy, cz = bbox.center
    _, w, h = bbox.size
    return (cx + bbox.size[0] / 2, cy - w / 2 + u * w, cz + h / 2 - v * h)


def face_corners(bbox: BBox3) -> np.ndarray:
    """Front-face corners in local coordinates: TL, BL, BR, TR (4x3)."""
    return np.array([face_point(bbox, u, v) for u, v in ((0, 0), (0, 1), (1, 1), (1, 0))])


def tree_depth(scene: SceneDescriptor) -> list[int]:
    depth: list[int] = []
    for node in scene.objects:
        depth.append(0 if node.parent.object is None else depth[node.parent.object] + 1)
    return depth


# ---------------------------------------------------------------------------
# parent-relative 2D regions of non-part objects


def object_region(node: ObjectNode, scene: SceneDescriptor) -> tuple[float, float, float, float]:
    """Normalized (x1, y1, x2, y2) of an object on its parent's surface.

    Wall parents: u along the wall length, v from ceiling (0) to floor (1).
    Floor/ceiling parents: top-down footprint, u along world x, v along -y.
    Object parents: the object's footprint on the parent's front face.
    """
    size = node.bbox.size
    c = node.bbox.center
    ox, oy, oz = node.origin.xyz
    room = scene.room
    p = node.parent
    if p.root in ("wall_0", "wall_1", "wall_2", "wall_3"):
        L, H = room.wall_length(p.root), room.height
        along = oy + c[1]
        bottom = oz + c[2] - size[2] / 2
        return (
            (along - size[1] / 2) / L,
            (H - (bottom + size[2])) / H,
            (along + size[1] / 2) / L,
            (H - bottom) / H,
        )
    if p.root in ("floor", "ceiling"):
        x, y = ox + c[0], oy + c[1]
        W, D = room.width, room.depth
        return (
            (x - size[0] / 2 + W / 2) / W,
            (D / 2 - (y + size[1] / 2)) / D,
            (x + size[0] / 2 + W / 2) / W,
            (D / 2 - (y - size[1] / 2)) / D,
        )
    parent = scene.objects[p.object].bbox
    _, pw, ph = parent.size
    left = parent.center[1] - pw / 2
    top = parent.center[2] + ph / 2
    y1 = oy + c[1] - size[1] / 2
    y2 = oy + c[1] + size[1] / 2
    z1 = oz + c[2] - size[2] / 2
    z2 = oz + c[2] + size[2] / 2
    return ((y1 - left) / pw, (top - z2) / ph, (y2 - left) / pw, (top - z1) / ph)


def place_object(region, depth: float, parent_ref, room: Room, parent_bbox: BBox3 | None = None):
    """Inverse of :func:`object_region`: (origin, bbox) for an object of given depth.

    Object frames sit at the back-bottom-center of the object, so the bbox
    center is (depth/2, 0, height/2).
    """
    x1, y1, x2, y2 = region
    root = parent_ref.root
    if root in ("wall_0", "wall_1", "wall_2", "wall_3"):
        L, H = room.wall_length(root), room.height
        w, h = (x2 - x1) * L, (y2 - y1) * H
        along = (x1 + x2) / 2 * L
        bottom = H * (1 - y2)
        return Transform((0.0, along, bottom)), BBox3((depth / 2, 0.0, h / 2), (depth, w, h))
    if root in ("floor", "ceiling"):
        W, D = room.width, room.depth
        sx, sy = (x2 - x1) * W, (y2 - y1) * D
        x = (x1 + x2) / 2 * W - W / 2
        y = D / 2 - (y1 + y2) / 2 * D
        return Transform((x - sx / 2, y, 0.0)), BBox3((sx / 2, 0.0, depth / 2), (sx, sy, depth))
    assert parent_bbox is not None
    _, pw, ph = parent_bbox.size
    left = parent_bbox.center[1] - pw / 2
    top = parent_bbox.center[2] + ph / 2
    w, h = (x2 - x1) * pw, (y2 - y1) * ph
    y = left + (x1 + x2) / 2 * pw
    z = top - y2 * ph
    return Transform((parent_bbox.front, y, z)), BBox3((depth / 2, 0.0, h / 2), (depth, w, h))
