import pytest

from urdforge.procgen import GenConfig, sample_object
from urdforge.scene import (
    BBox3,
    ClassLabel,
    JointSpec,
    ObjectNode,
    ParentRef,
    Room,
    SceneDescriptor,
    Transform,
)
from urdforge.urdf import build_part


def cabinet_node(size=(0.5, 0.8, 0.9), node_id=0):
    d, w, h = size
    return ObjectNode(
        id=node_id,
        cls=ClassLabel.CABINET,
        bbox=BBox3((d / 2, 0.0, h / 2), size),
        origin=Transform((0.0, 1.0, 0.0)),
        parent=ParentRef.to_root("wall_0"),
        joint=JointSpec.fixed(),
    )


def two_drawer_cabinet():
    """Cabinet with two stacked drawers, each with a handle (5 nodes)."""
    cab = cabinet_node()
    top = build_part(1, ClassLabel.DRAWER, cab, (0.0, 0.0, 1.0, 0.5))
    bottom = build_part(2, ClassLabel.DRAWER, cab, (0.0, 0.5, 1.0, 1.0))
    h1 = build_part(3, ClassLabel.HANDLE, top, (0.5, 0.3, 0.5, 0.3))
    h2 = build_part(4, ClassLabel.HANDLE, bottom, (0.5, 0.3, 0.5, 0.3))
    return SceneDescriptor((cab, top, bottom, h1, h2), completeness="object_partial", room=Room())


@pytest.fixture
def cabinet_scene():
    return two_drawer_cabinet()


@pytest.fixture
def config():
    return GenConfig()


@pytest.fixture
def object_scene(config):
    return sample_object("cabinet", config, 7)
