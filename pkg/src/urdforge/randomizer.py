"""Topology-preserving perturbations of a base scene.

Nothing here changes which nodes exist, their classes, their parents or
their joint kinds. Geometry swaps only touch ``mesh_ref``, handle jitter
only moves grip points within their owner's face, and rescaling stretches
a whole subtree by per-axis factors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .errors import EmptyLibraryError, MissingClassAssetsError, ZeroExtentError
from .rng import Rng
from .scene import BBox3, ClassLabel, SceneDescriptor, Transform, descendants
from .urdf import build_part

FRAME_KEY = "cabinet_frame"
DOOR_KEY = "door"
DOOR_CLASSES = frozenset(
    {ClassLabel.LEFT_DOOR, ClassLabel.RIGHT_DOOR, ClassLabel.OVEN_DOOR, ClassLabel.DOWN_DOOR, ClassLabel.CIRCLE_DOOR}
)
DEFAULT_JITTER = 0.05

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Asset:
    mesh_ref: str
    extents: Vec3


class AssetLibrary:
    """Mesh identifiers grouped by part class.

    Besides the part class names, two group keys are accepted: ``door`` is a
    pool shared by every door class (a class-specific list wins when both
    exist) and ``cabinet_frame`` holds cabinet bodies.
    """

    def __init__(self, assets: dict[str, Sequence[Asset]]):
        for key in assets:
            if key not in (FRAME_KEY, DOOR_KEY):
                try:
                    ok = ClassLabel(key).is_part
                except ValueError:
                    ok = False
                if not ok:
                    raise ValueError(f"asset key {key!r} is neither a part class nor a group")
        self.assets = {k: tuple(v) for k, v in assets.items()}

    def for_class(self, cls: ClassLabel) -> tuple[Asset, ...]:
        if cls is ClassLabel.CABINET:
            return self.assets.get(FRAME_KEY, ())
        pool = self.assets.get(cls.value, ())
        if not pool and cls in DOOR_CLASSES:
            pool = self.assets.get(DOOR_KEY, ())
        return pool

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.assets.items()}

    def to_dict(self) -> dict:
        return {k: [{"mesh_ref": a.mesh_ref, "extents": list(a.extents)} for a in v] for k, v in self.assets.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "AssetLibrary":
        return cls({k: [Asset(a["mesh_ref"], tuple(float(x) for x in a["extents"])) for a in v] for k, v in d.items()})

    @classmethod
    def from_json(cls, path) -> "AssetLibrary":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def preset(cls, name: str = "partnet") -> "AssetLibrary":
        path = resources.files("urdforge") / "presets" / f"assets-{name}.json"
        if not path.is_file():
            raise ValueError(f"unknown asset preset {name!r}")
        return cls.from_dict(json.loads(path.read_text()))


def randomize_geometry(
    scene: SceneDescriptor, library: AssetLibrary, seed: int
) -> tuple[SceneDescriptor, dict[int, Vec3]]:
    """Swap every part mesh (and cabinet frame, when frames are listed) for a same-class draw.

    Returns the new scene and, per swapped node, the per-axis factor that
    stretches the asset's native extents onto the node's bbox.
    """
    rng = Rng(seed)
    missing = sorted({n.cls.value for n in scene.objects if n.cls.is_part and not library.for_class(n.cls)})
    if missing:
        raise MissingClassAssetsError(f"no assets for part classes: {', '.join(missing)}")
    nodes = []
    factors: dict[int, Vec3] = {}
    for node in scene.objects:
        pool = library.for_class(node.cls)
        if node.cls.is_part or (node.cls is ClassLabel.CABINET and pool):
            asset = rng.choice(pool)
            factors[node.id] = tuple(s / e for s, e in zip(node.bbox.size, asset.extents))
            node = replace(node, mesh_ref=asset.mesh_ref)
        nodes.append(node)
    return replace(scene, objects=tuple(nodes)), factors


def jitter_handles(scene: SceneDescriptor, max_offset: float = DEFAULT_JITTER, seed: int = 0) -> SceneDescriptor:
    """Slide each handle and knob across its owner's face by up to ``max_offset`` per axis."""
    if not 0.0 <= max_offset < 0.5:
        raise ValueError("max_offset must lie in [0, 0.5)")
    if max_offset == 0.0:
        return scene
    rng = Rng(seed)
    nodes = list(scene.objects)
    for i, node in enumerate(nodes):
        if not (node.cls.is_point and node.face_region is not None and node.parent.object is not None):
            continue
        u, v = node.face_region[0], node.face_region[1]
        u = min(1.0, max(0.0, u + rng.uniform(-max_offset, max_offset)))
        v = min(1.0, max(0.0, v + rng.uniform(-max_offset, max_offset)))
        moved = build_part(node.id, node.cls, nodes[node.parent.object], (u, v, u, v), node.mesh_ref)
        nodes[i] = replace(moved, joint=node.joint)
    return replace(scene, objects=tuple(nodes))


def _scale_bbox(b: BBox3, f: Vec3) -> BBox3:
    return BBox3(tuple(c * k for c, k in zip(b.center, f)), tuple(s * k for s, k in zip(b.size, f)))


def rescale_by(scene: SceneDescriptor, factors: Vec3, index: Optional[int] = None) -> SceneDescriptor:
    """Stretch the subtree rooted at ``index`` by per-axis ``factors``.

    The subtree root keeps its attachment pose; descendant origins scale with
    it. Prismatic travel scales by the stretch along the joint axis and
    revolute limits are left alone.
    """
    if index is None:
        index = _root_object(scene)
    if any(not (math.isfinite(k) and k > 0) for k in factors):
        raise ZeroExtentError(f"scale factors must be positive, got {factors}")
    members = descendants(scene, index)
    nodes = list(scene.objects)
    for i in members:
        node = nodes[i]
        origin = node.origin
        if i != index:
            origin = Transform(tuple(x * k for x, k in zip(origin.xyz, factors)), origin.rpy)
        joint = node.joint
        if joint.kind == "prismatic":
            stretch = math.sqrt(sum((a * k) ** 2 for a, k in zip(joint.axis, factors)))
            joint = replace(joint, lower=joint.lower * stretch, upper=joint.upper * stretch)
        nodes[i] = replace(node, bbox=_scale_bbox(node.bbox, factors), origin=origin, joint=joint)
    return replace(scene, objects=tuple(nodes))


def rescale_to_depth(scene: SceneDescriptor, extents: Sequence[float], index: Optional[int] = None) -> SceneDescriptor:
    """Resize an object so its bbox matches ``extents`` (meters, local x/y/z) measured from depth."""
    if index is None:
        index = _root_object(scene)
    if len(extents) != 3 or any(not (math.isfinite(e) and e > 0) for e in extents):
        raise ZeroExtentError(f"observed extents must be three positive numbers, got {tuple(extents)}")
    size = scene.objects[index].bbox.size
    return rescale_by(scene, tuple(e / s for e, s in zip(extents, size)), index)


def _root_object(scene: SceneDescriptor) -> int:
    roots = [n.id for n in scene.objects if n.parent.root is not None]
    if len(roots) != 1:
        raise ValueError(f"scene has {len(roots)} root-attached objects; pass an explicit index")
    return roots[0]


def assign_textures(scene: SceneDescriptor, textures: Sequence[str], seed: int) -> dict[int, str]:
    """Uniform, seeded texture choice for every node."""
    if not textures:
        raise EmptyLibraryError("texture library is empty")
    rng = Rng(seed)
    return {node.id: rng.choice(textures) for node in scene.objects}
