"""Kinematic scene representation, validation and traversal.

A scene is an ordered list of :class:`ObjectNode`. Every node hangs either
off one of six implicit room roots (four walls, floor, ceiling) or off an
earlier node, so the list order is already a topological order.

Frames: world is right-handed, z-up, meters. A node's ``bbox`` lives in the
node's own frame; ``origin`` places that frame relative to the parent frame.
Object frames use x = outward front normal, y = viewer's right when facing
the front, z = up.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import InvalidSceneError, UnknownIdError

SCENE_VERSION = 1

Vec3 = tuple[float, float, float]


class ClassLabel(str, Enum):
    # object categories
    CABINET = "cabinet"
    OVEN = "oven"
    DISHWASHER = "dishwasher"
    FRIDGE = "fridge"
    WASHER = "washer"
    OVEN_FAN = "oven_fan"
    SHELF = "shelf"
    MICROWAVE = "microwave"
    TOILET = "toilet"
    DESK = "desk"
    LAPTOP = "laptop"
    CHAIR = "chair"
    # part categories
    DRAWER = "drawer"
    LEFT_DOOR = "left_door"
    RIGHT_DOOR = "right_door"
    OVEN_DOOR = "oven_door"
    DOWN_DOOR = "down_door"
    CIRCLE_DOOR = "circle_door"
    HANDLE = "handle"
    KNOB = "knob"

    @property
    def is_part(self) -> bool:
        return self in PART_CLASSES

    @property
    def is_object(self) -> bool:
        return self in OBJECT_CLASSES

    @property
    def is_point(self) -> bool:
        """Handles and knobs are located by their center only."""
        return self in (ClassLabel.HANDLE, ClassLabel.KNOB)

    def __str__(self) -> str:
        return self.value


OBJECT_CLASSES = frozenset(
    ClassLabel(v)
    for v in (
        "cabinet", "oven", "dishwasher", "fridge", "washer", "oven_fan",
        "shelf", "microwave", "toilet", "desk", "laptop", "chair",
    )
)
PART_CLASSES = frozenset(
    ClassLabel(v)
    for v in (
        "drawer", "left_door", "right_door", "oven_door", "down_door",
        "circle_door", "handle", "knob",
    )
)
# Stable order used for class-score vectors in raw predictions.
CLASS_ORDER: tuple[ClassLabel, ...] = tuple(ClassLabel)

ROOTS: tuple[str, ...] = ("wall_0", "wall_1", "wall_2", "wall_3", "floor", "ceiling")
WALLS: tuple[str, ...] = ROOTS[:4]

JOINT_KINDS = ("fixed", "prismatic", "revolute")
COMPLETENESS = ("full", "scene_partial", "object_partial")


def _vec3(v: Iterable[float]) -> Vec3:
    t = tuple(float(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"expected 3 components, got {len(t)}")
    return t  # type: ignore[return-value]


@dataclass(frozen=True)
class BBox3:
    center: Vec3
    size: Vec3

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center))
        object.__setattr__(self, "size", _vec3(self.size))

    @property
    def front(self) -> float:
        """Local x coordinate of the front face."""
        return self.center[0] + self.size[0] / 2


@dataclass(frozen=True)
class Transform:
    xyz: Vec3 = (0.0, 0.0, 0.0)
    rpy: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "xyz", _vec3(self.xyz))
        object.__setattr__(self, "rpy", _vec3(self.rpy))


@dataclass(frozen=True)
class JointSpec:
    kind: str
    axis: Vec3 = (1.0, 0.0, 0.0)
    lower: float = 0.0
    upper: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "axis", _vec3(self.axis))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @classmethod
    def fixed(cls) -> "JointSpec":
        return cls("fixed")


@dataclass(frozen=True)
class ParentRef:
    root: Optional[str] = None
    object: Optional[int] = None

    @classmethod
    def to_root(cls, name: str) -> "ParentRef":
        return cls(root=name)

    @classmethod
    def to_object(cls, index: int) -> "ParentRef":
        return cls(object=int(index))

    @property
    def is_root(self) -> bool:
        return self.root is not None

    def __str__(self) -> str:
        return self.root if self.root is not None else f"object:{self.object}"


@dataclass(frozen=True)
class ObjectNode:
    id: int
    cls: ClassLabel
    bbox: BBox3
    origin: Transform
    parent: ParentRef
    joint: JointSpec
    mesh_ref: Optional[str] = None
    face_region: Optional[tuple[float, float, float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "cls", ClassLabel(self.cls))
        if self.face_region is not None:
            region = tuple(float(x) for x in self.face_region)
            if len(region) != 4:
                raise ValueError("face_region needs 4 values")
            object.__setattr__(self, "face_region", region)


@dataclass(frozen=True)
class Room:
    """Room extents in meters; walls 0/2 span ``width``, walls 1/3 span ``depth``."""

    width: float = 4.0
    depth: float = 4.0
    height: float = 2.7

    def wall_length(self, wall: str) -> float:
        return self.width if wall in ("wall_0", "wall_2") else self.depth


@dataclass(frozen=True)
class SceneDescriptor:
    objects: tuple[ObjectNode, ...] = ()
    completeness: str = "full"
    version: int = SCENE_VERSION
    room: Room = field(default_factory=Room)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def __len__(self) -> int:
        return len(self.objects)

    def children(self, index: int) -> list[int]:
        return [n.id for n in self.objects if n.parent.object == index]


@dataclass(frozen=True)
class Violation:
    node: Optional[int]
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        where = "scene" if self.node is None else f"node {self.node}"
        return f"{where}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


_KIND_COMPLETENESS = {"scene_pair": ("scene_partial",), "object_pair": ("object_partial", "full")}


@dataclass(frozen=True)
class ManifestEntry:
    image_path: Optional[str]
    scene: SceneDescriptor
    kind: str

    def __post_init__(self):
        allowed = _KIND_COMPLETENESS.get(self.kind)
        if allowed is None:
            raise ValueError(f"unknown manifest kind {self.kind!r}")
        if self.scene.completeness not in allowed:
            raise ValueError(f"kind {self.kind} cannot hold a {self.scene.completeness} scene")


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)


# ---------------------------------------------------------------------------
# validation


def _finite(values: Iterable[float]) -> bool:
    return all(math.isfinite(v) for v in values)


def _check_node(node: ObjectNode, index: int, n: int) -> list[Violation]:
    out = []

    def bad(rule, detail=""):
        out.append(Violation(index, rule, detail))

    if node.id != index:
        bad("id-matches-position", f"id {node.id} at position {index}")

    p = node.parent
    if (p.root is None) == (p.object is None):
        bad("parent-exactly-one", "parent must name a root or an object")
    elif p.root is not None:
        if p.root not in ROOTS:
            bad("root-name-valid", p.root)
    else:
        if not 0 <= p.object < n:
            bad("parent-exists", f"object:{p.object}")
        if p.object >= index:
            bad("parent-precedes-child", f"object:{p.object}")

    if not _finite(node.bbox.center + node.bbox.size):
        bad("bbox-finite")
    elif any(s <= 0 for s in node.bbox.size):
        bad("bbox-positive-size", str(node.bbox.size))

    if not _finite(node.origin.xyz + node.origin.rpy):
        bad("transform-finite")
    elif any(abs(a) > math.pi for a in node.origin.rpy):
        bad("rpy-range", str(node.origin.rpy))

    j = node.joint
    if j.kind not in JOINT_KINDS:
        bad("joint-kind-valid", j.kind)
    if not _finite(j.axis + (j.lower, j.upper)):
        bad("joint-finite")
    else:
        if j.lower > j.upper:
            bad("joint-limits-ordered", f"{j.lower} > {j.upper}")
        if j.kind in ("prismatic", "revolute"):
            norm = math.sqrt(sum(a * a for a in j.axis))
            if abs(norm - 1.0) > 1e-9:
                bad("joint-axis-unit", f"|axis| = {norm}")

    r = node.face_region
    if r is not None:
        if not node.cls.is_part:
            bad("face-region-part-only")
        elif not _finite(r) or any(v < 0 or v > 1 for v in r):
            bad("face-region-bounds", str(r))
        elif node.cls.is_point:
            if r[0] != r[2] or r[1] != r[3]:
                bad("point-region-mirrored", str(r))
        elif not (r[0] < r[2] and r[1] < r[3]):
            bad("face-region-ordered", str(r))
    return out


def validate(scene: SceneDescriptor) -> list[Violation]:
    """Return every invariant violation; an empty list means the scene is valid."""
    out: list[Violation] = []
    if scene.version != SCENE_VERSION:
        out.append(Violation(None, "version-supported", str(scene.version)))
    if scene.completeness not in COMPLETENESS:
        out.append(Violation(None, "completeness-valid", str(scene.completeness)))
    n = len(scene.objects)
    for i, node in enumerate(scene.objects):
        out.extend(_check_node(node, i, n))

    if scene.completeness == "scene_partial":
        for node in scene.objects:
            if node.cls.is_part:
                out.append(Violation(node.id, "scene-partial-no-parts"))
    elif scene.completeness == "object_partial":
        count = sum(1 for node in scene.objects if not node.cls.is_part)
        if count != 1:
            out.append(Violation(None, "object-partial-single-object", f"{count} objects"))
    return out


def ensure_valid(scene: SceneDescriptor) -> None:
    violations = validate(scene)
    if violations:
        raise InvalidSceneError(violations)


def topological_order(scene: SceneDescriptor) -> list[int]:
    """Node ids with every parent before its children; ties in id order."""
    ensure_valid(scene)
    n = len(scene.objects)
    pending = [0] * n
    kids: list[list[int]] = [[] for _ in range(n)]
    for node in scene.objects:
        if node.parent.object is not None:
            pending[node.id] = 1
            kids[node.parent.object].append(node.id)
    ready = [i for i in range(n) if pending[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for c in kids[i]:
            pending[c] -= 1
            if pending[c] == 0:
                heapq.heappush(ready, c)
    return order


def descendants(scene: SceneDescriptor, index: int) -> list[int]:
    """``index`` followed by all of its descendants, in id order."""
    if not 0 <= index < len(scene.objects):
        raise UnknownIdError(index)
    inside = {index}
    for node in scene.objects[index + 1:]:
        if node.parent.object in inside:
            inside.add(node.id)
    return sorted(inside)


def reindex(scene: SceneDescriptor, keep: Sequence[int], **changes) -> SceneDescriptor:
    """Keep the listed node ids (ascending), renumbering ids and parent refs.

    Nodes whose object parent is dropped are re-attached to ``wall_0``.
    """
    mapping = {old: new for new, old in enumerate(keep)}
    nodes = []
    for old in keep:
        node = scene.objects[old]
        parent = node.parent
        if parent.object is not None:
            parent = (
                ParentRef.to_object(mapping[parent.object])
                if parent.object in mapping
                else ParentRef.to_root("wall_0")
            )
        nodes.append(replace(node, id=mapping[old], parent=parent))
    return replace(scene, objects=tuple(nodes), **changes)


def subtree(scene: SceneDescriptor, index: int) -> SceneDescriptor:
    keep = descendants(scene, index)
    if scene.completeness == "scene_partial":
        completeness = "scene_partial"
    else:
        n_objects = sum(1 for i in keep if not scene.objects[i].cls.is_part)
        completeness = "object_partial" if n_objects == 1 else "full"
    out = reindex(scene, keep, completeness=completeness)
    head = replace(out.objects[0], parent=ParentRef.to_root("wall_0"))
    return replace(out, objects=(head,) + out.objects[1:])


def strip_parts(scene: SceneDescriptor) -> SceneDescriptor:
    """High-level view of a scene: non-part objects only (completeness scene_partial)."""
    keep = [n.id for n in scene.objects if not n.cls.is_part]
    return reindex(scene, keep, completeness="scene_partial")


# ---------------------------------------------------------------------------
# equality with float tolerance


def _close(a: float, b: float, tol: float) -> bool:
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def _close_all(a: Sequence[float], b: Sequence[float], tol: float) -> bool:
    return len(a) == len(b) and all(_close(x, y, tol) for x, y in zip(a, b))


def nodes_equal(a: ObjectNode, b: ObjectNode, tol: float = 1e-9) -> bool:
    if (a.id, a.cls, a.parent, a.mesh_ref, a.joint.kind) != (
        b.id, b.cls, b.parent, b.mesh_ref, b.joint.kind
    ):
        return False
    if (a.face_region is None) != (b.face_region is None):
        return False
    if a.face_region is not None and not _close_all(a.face_region, b.face_region, tol):
        return False
    if a.joint.kind != "fixed":
        ja, jb = a.joint, b.joint
        if not _close_all(ja.axis + (ja.lower, ja.upper), jb.axis + (jb.lower, jb.upper), tol):
            return False
    return (
        _close_all(a.bbox.center + a.bbox.size, b.bbox.center + b.bbox.size, tol)
        and _close_all(a.origin.xyz + a.origin.rpy, b.origin.xyz + b.origin.rpy, tol)
    )


def scenes_equal(a: SceneDescriptor, b: SceneDescriptor, tol: float = 1e-9) -> bool:
    """Field-wise equality; floats compared with ``tol`` (relative or absolute).

    Axis and limits of fixed joints are ignored since they carry no meaning.
    """
    ra, rb = a.room, b.room
    return (
        a.version == b.version
        and a.completeness == b.completeness
        and _close_all((ra.width, ra.depth, ra.height), (rb.width, rb.depth, rb.height), tol)
        and len(a.objects) == len(b.objects)
        and all(nodes_equal(x, y, tol) for x, y in zip(a.objects, b.objects))
    )


# ---------------------------------------------------------------------------
# JSON


def node_to_dict(node: ObjectNode) -> dict:
    d = {
        "id": node.id,
        "class": node.cls.value,
        "bbox": {"center": list(node.bbox.center), "size": list(node.bbox.size)},
        "origin": {"xyz": list(node.origin.xyz), "rpy": list(node.origin.rpy)},
        "parent": {"root": node.parent.root}
        if node.parent.root is not None
        else {"object": node.parent.object},
        "joint": {
            "kind": node.joint.kind,
            "axis": list(node.joint.axis),
            "lower": node.joint.lower,
            "upper": node.joint.upper,
        },
    }
    if node.mesh_ref is not None:
        d["mesh_ref"] = node.mesh_ref
    if node.face_region is not None:
        d["face_region"] = list(node.face_region)
    return d


def node_from_dict(d: dict) -> ObjectNode:
    parent = d["parent"]
    if "root" in parent:
        pref = ParentRef.to_root(parent["root"])
    else:
        pref = ParentRef.to_object(parent["object"])
    j = d["joint"]
    return ObjectNode(
        id=int(d["id"]),
        cls=ClassLabel(d["class"]),
        bbox=BBox3(d["bbox"]["center"], d["bbox"]["size"]),
        origin=Transform(d["origin"]["xyz"], d["origin"]["rpy"]),
        parent=pref,
        joint=JointSpec(j["kind"], j.get("axis", (1.0, 0.0, 0.0)), j.get("lower", 0.0), j.get("upper", 0.0)),
        mesh_ref=d.get("mesh_ref"),
        face_region=d.get("face_region"),
    )


def scene_to_dict(scene: SceneDescriptor) -> dict:
    r = scene.room
    return {
        "version": scene.version,
        "completeness": scene.completeness,
        "room": {"width": r.width, "depth": r.depth, "height": r.height},
        "objects": [node_to_dict(n) for n in scene.objects],
    }


def scene_from_dict(d: dict) -> SceneDescriptor:
    room = d.get("room") or {}
    return SceneDescriptor(
        objects=tuple(node_from_dict(o) for o in d.get("objects", [])),
        completeness=d.get("completeness", "full"),
        version=int(d.get("version", SCENE_VERSION)),
        room=Room(**{k: float(v) for k, v in room.items()}),
    )


def dumps(scene: SceneDescriptor) -> str:
    """Canonical JSON text (fixed key order, shortest round-trip floats)."""
    return json.dumps(scene_to_dict(scene), indent=2) + "\n"


def loads(text: str) -> SceneDescriptor:
    return scene_from_dict(json.loads(text))


def manifest_to_dict(manifest: DatasetManifest, scene_paths: Optional[Sequence[str]] = None) -> dict:
    """Manifest JSON; scenes are inlined unless per-entry file paths are given."""
    entries = []
    for i, e in enumerate(manifest.entries):
        item: dict = {"image": e.image_path, "kind": e.kind}
        if scene_paths is not None:
            item["scene"] = scene_paths[i]
        else:
            item["scene"] = scene_to_dict(e.scene)
        entries.append(item)
    return {"version": SCENE_VERSION, "entries": entries}


def manifest_from_dict(d: dict, load_scene=None) -> DatasetManifest:
    entries = []
    for item in d.get("entries", []):
        raw = item["scene"]
        scene = load_scene(raw) if isinstance(raw, str) else scene_from_dict(raw)
        entries.append(ManifestEntry(item.get("image"), scene, item["kind"]))
    return DatasetManifest(tuple(entries))
