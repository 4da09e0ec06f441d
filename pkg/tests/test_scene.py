import json

import pytest

from urdforge.errors import InvalidSceneError, UnknownIdError
from urdforge.procgen import GenConfig, sample_kitchen
from urdforge.scene import (
    BBox3,
    ClassLabel,
    DatasetManifest,
    JointSpec,
    ManifestEntry,
    ObjectNode,
    ParentRef,
    SceneDescriptor,
    Transform,
    descendants,
    dumps,
    ensure_valid,
    loads,
    manifest_from_dict,
    manifest_to_dict,
    scenes_equal,
    strip_parts,
    subtree,
    topological_order,
    validate,
)

from conftest import cabinet_node, two_drawer_cabinet


def _chain():
    a = cabinet_node()
    b = ObjectNode(1, ClassLabel.DRAWER, BBox3((-0.1, 0, 0), (0.2, 0.5, 0.3)), Transform((0.5, 0, 0.4)),
                   ParentRef.to_object(0), JointSpec("prismatic", (1, 0, 0), 0, 0.4), face_region=(0, 0, 1, 0.5))
    c = ObjectNode(2, ClassLabel.HANDLE, BBox3((0.01, 0, 0), (0.02, 0.1, 0.02)), Transform((0, 0, 0)),
                   ParentRef.to_object(1), JointSpec.fixed(), face_region=(0.5, 0.5, 0.5, 0.5))
    return SceneDescriptor((a, b, c), completeness="object_partial")


def test_empty_scene_is_valid():
    assert validate(SceneDescriptor()) == []


def test_generated_cabinet_valid(cabinet_scene):
    assert validate(cabinet_scene) == []


def test_chain_topological_order():
    assert topological_order(_chain()) == [0, 1, 2]


def test_forward_parent_reference_rejected():
    s = _chain()
    bad = list(s.objects)
    bad[1] = ObjectNode(1, bad[1].cls, bad[1].bbox, bad[1].origin, ParentRef.to_object(2), bad[1].joint,
                        face_region=bad[1].face_region)
    scene = SceneDescriptor(tuple(bad), completeness="object_partial")
    assert validate(scene)
    with pytest.raises(InvalidSceneError):
        ensure_valid(scene)


def test_point_region_must_be_mirrored():
    s = _chain()
    nodes = list(s.objects)
    h = nodes[2]
    nodes[2] = ObjectNode(2, h.cls, h.bbox, h.origin, h.parent, h.joint, face_region=(0.4, 0.5, 0.6, 0.5))
    rules = [v.rule for v in validate(SceneDescriptor(tuple(nodes), completeness="object_partial"))]
    assert rules == ["point-region-mirrored"]


def test_negative_size_rejected():
    node = cabinet_node(size=(0.5, -0.1, 0.9))
    assert validate(SceneDescriptor((node,)))


def test_subtree_of_cabinet_with_two_drawers():
    scene = two_drawer_cabinet()
    sub = subtree(scene, 0)
    assert len(sub.objects) == 5
    assert descendants(scene, 1) == [1, 3]


def test_subtree_of_leaf():
    sub = subtree(two_drawer_cabinet(), 4)
    assert len(sub.objects) == 1
    assert sub.objects[0].id == 0


def test_subtree_unknown_id():
    with pytest.raises(UnknownIdError):
        subtree(two_drawer_cabinet(), 99)


def test_strip_parts_keeps_objects(cabinet_scene):
    stripped = strip_parts(cabinet_scene)
    assert [n.cls for n in stripped.objects] == [ClassLabel.CABINET]
    assert stripped.completeness == "scene_partial"


def test_json_round_trip(object_scene):
    text = dumps(object_scene)
    again = loads(text)
    assert scenes_equal(object_scene, again, tol=0.0)
    assert dumps(again) == text
    json.loads(text)


def test_scenes_equal_tolerance(cabinet_scene):
    nodes = list(cabinet_scene.objects)
    b = nodes[0].bbox
    nodes[0] = ObjectNode(0, nodes[0].cls, BBox3(b.center, (b.size[0] + 1e-12, b.size[1], b.size[2])),
                          nodes[0].origin, nodes[0].parent, nodes[0].joint)
    other = SceneDescriptor(tuple(nodes), completeness="object_partial")
    assert scenes_equal(cabinet_scene, other)
    assert not scenes_equal(cabinet_scene, other, tol=0.0)


def test_manifest_kind_checks_completeness(cabinet_scene):
    with pytest.raises(ValueError):
        ManifestEntry(None, cabinet_scene, "scene_pair")
    with pytest.raises(ValueError):
        ManifestEntry(None, cabinet_scene, "bogus")


def test_manifest_round_trip(cabinet_scene):
    m = DatasetManifest([ManifestEntry("a.png", cabinet_scene, "object_pair")])
    d = manifest_to_dict(m)
    back = manifest_from_dict(json.loads(json.dumps(d)))
    assert len(back) == 1
    assert back.entries[0].image_path == "a.png"
    assert scenes_equal(back.entries[0].scene, cabinet_scene)


def test_subtree_closure():
    scene = sample_kitchen(GenConfig(scene_type="kitchen"), 12)
    for i in range(len(scene.objects)):
        assert validate(subtree(scene, i)) == []
