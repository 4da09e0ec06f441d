"""URDF emission/parsing and the part-class -> joint inference table.

Emitted URDF is canonical: fixed element and attribute order, links and
joints named ``link_{id}`` / ``joint_{id}``, floats written with Python's
shortest round-trip repr so ``from_urdf(to_urdf(s))`` is exact.

Scene metadata the URDF subset has no slot for (class label, face region,
completeness, room) rides along as extra attributes on ``<link>`` and
``<robot>``; generic URDF readers ignore them.
"""

from __future__ import annotations

import math
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from typing import Optional
from xml.sax.saxutils import quoteattr

from .errors import (
    CyclicJointsError,
    DanglingParentError,
    MalformedXmlError,
    NonPartClassError,
    UnsupportedJointTypeError,
)
from .geometry import face_point
from .scene import (
    ROOTS,
    BBox3,
    ClassLabel,
    JointSpec,
    ObjectNode,
    ParentRef,
    Room,
    SceneDescriptor,
    Transform,
    ensure_valid,
)

DOOR_THICKNESS = 0.02
DRAWER_DEPTH_FRACTION = 0.9
HANDLE_LENGTH = 0.12
HANDLE_SECTION = 0.02
KNOB_DIAMETER = 0.04
GRIP_DEPTH = 0.03

VERTICAL_DOORS = (ClassLabel.LEFT_DOOR, ClassLabel.RIGHT_DOOR, ClassLabel.CIRCLE_DOOR)


@dataclass(frozen=True)
class JointLimits:
    """Travel of inferred joints; the defaults are plausible values, not measured ones."""

    prismatic_fraction: float = 0.8  # of the parent's depth
    revolute: float = math.pi / 2


@dataclass(frozen=True)
class JointRule:
    kind: str
    axis: tuple[float, float, float]
    anchor: str  # where on the face region the joint sits


# Axes are expressed in the parent frame (x = front normal, y = right, z = up);
# a positive joint value always moves the part outward.
JOINT_TABLE: dict[ClassLabel, JointRule] = {
    ClassLabel.DRAWER: JointRule("prismatic", (1.0, 0.0, 0.0), "center"),
    ClassLabel.LEFT_DOOR: JointRule("revolute", (0.0, 0.0, -1.0), "left_edge"),
    ClassLabel.RIGHT_DOOR: JointRule("revolute", (0.0, 0.0, 1.0), "right_edge"),
    ClassLabel.OVEN_DOOR: JointRule("revolute", (0.0, 1.0, 0.0), "bottom_edge"),
    ClassLabel.DOWN_DOOR: JointRule("revolute", (0.0, 1.0, 0.0), "bottom_edge"),
    ClassLabel.CIRCLE_DOOR: JointRule("revolute", (0.0, 0.0, -1.0), "left_edge"),
    ClassLabel.HANDLE: JointRule("fixed", (1.0, 0.0, 0.0), "center"),
    ClassLabel.KNOB: JointRule("fixed", (1.0, 0.0, 0.0), "center"),
}

_ANCHOR_UV = {
    "center": lambda r: ((r[0] + r[2]) / 2, (r[1] + r[3]) / 2),
    "left_edge": lambda r: (r[0], (r[1] + r[3]) / 2),
    "right_edge": lambda r: (r[2], (r[1] + r[3]) / 2),
    "bottom_edge": lambda r: ((r[0] + r[2]) / 2, r[3]),
}


def infer_joint(
    part_class, parent_bbox: BBox3, face_region, limits: JointLimits = JointLimits()
) -> tuple[JointSpec, Transform]:
    """Joint and joint-origin anchor (in the parent frame) for a part on a face region."""
    cls = ClassLabel(part_class)
    rule = JOINT_TABLE.get(cls)
    if rule is None:
        raise NonPartClassError(f"{cls.value} is not a part class")
    u, v = _ANCHOR_UV[rule.anchor](face_region)
    anchor = Transform(face_point(parent_bbox, u, v))
    if rule.kind == "fixed":
        return JointSpec.fixed(), anchor
    if rule.kind == "prismatic":
        upper = limits.prismatic_fraction * parent_bbox.size[0]
    else:
        upper = limits.revolute
    return JointSpec(rule.kind, rule.axis, 0.0, upper), anchor


def part_bbox(part_class, parent_bbox: BBox3, face_region, parent_class=None) -> BBox3:
    """Box of a part in its own (joint) frame, sized from the face region.

    Part front faces are flush with the parent's front face (local x = 0).
    """
    cls = ClassLabel(part_class)
    pd, pw, ph = parent_bbox.size
    x1, y1, x2, y2 = face_region
    rw, rh = (x2 - x1) * pw, (y2 - y1) * ph
    t = min(DOOR_THICKNESS, 0.5 * pd)
    if cls is ClassLabel.DRAWER:
        d = DRAWER_DEPTH_FRACTION * pd
        return BBox3((-d / 2, 0.0, 0.0), (d, rw, rh))
    if cls in (ClassLabel.LEFT_DOOR, ClassLabel.CIRCLE_DOOR):
        return BBox3((-t / 2, rw / 2, 0.0), (t, rw, rh))
    if cls is ClassLabel.RIGHT_DOOR:
        return BBox3((-t / 2, -rw / 2, 0.0), (t, rw, rh))
    if cls in (ClassLabel.OVEN_DOOR, ClassLabel.DOWN_DOOR):
        return BBox3((-t / 2, 0.0, rh / 2), (t, rw, rh))
    if cls is ClassLabel.HANDLE:
        vertical = parent_class is not None and ClassLabel(parent_class) in VERTICAL_DOORS
        if vertical:
            size = (GRIP_DEPTH, HANDLE_SECTION, min(HANDLE_LENGTH, 0.4 * ph))
        else:
            size = (GRIP_DEPTH, min(HANDLE_LENGTH, 0.4 * pw), HANDLE_SECTION)
        return BBox3((GRIP_DEPTH / 2, 0.0, 0.0), size)
    if cls is ClassLabel.KNOB:
        k = min(KNOB_DIAMETER, 0.3 * min(pw, ph))
        return BBox3((GRIP_DEPTH / 2, 0.0, 0.0), (GRIP_DEPTH, k, k))
    raise NonPartClassError(f"{cls.value} is not a part class")


def build_part(
    node_id: int,
    part_class,
    parent: ObjectNode,
    face_region,
    mesh_ref: Optional[str] = None,
    limits: JointLimits = JointLimits(),
) -> ObjectNode:
    """Construct a part node whose geometry follows entirely from its face region."""
    joint, anchor = infer_joint(part_class, parent.bbox, face_region, limits)
    bbox = part_bbox(part_class, parent.bbox, face_region, parent.cls)
    return ObjectNode(
        id=node_id,
        cls=ClassLabel(part_class),
        bbox=bbox,
        origin=anchor,
        parent=ParentRef.to_object(parent.id),
        joint=joint,
        mesh_ref=mesh_ref,
        face_region=tuple(face_region),
    )


def rebuild_parts(scene: SceneDescriptor, limits: JointLimits = JointLimits()) -> SceneDescriptor:
    """Recompute every part's geometry from its face region, parents first."""
    nodes: list[ObjectNode] = []
    for node in scene.objects:
        if node.cls.is_part and node.face_region is not None and node.parent.object is not None:
            parent = nodes[node.parent.object]
            node = build_part(node.id, node.cls, parent, node.face_region, node.mesh_ref, limits)
        nodes.append(node)
    return replace(scene, objects=tuple(nodes))


# ---------------------------------------------------------------------------
# emission


def _f(x: float) -> str:
    return repr(float(x))


def _v(values) -> str:
    return " ".join(_f(x) for x in values)


def to_urdf(scene: SceneDescriptor, name: str = "scene") -> str:
    ensure_valid(scene)
    room = scene.room
    lines = [
        '<?xml version="1.0" encoding="utf-8"?>',
        f'<robot name={quoteattr(name)} version="{scene.version}" '
        f'completeness="{scene.completeness}" room="{_v((room.width, room.depth, room.height))}">',
    ]
    used = {n.parent.root for n in scene.objects if n.parent.root is not None}
    for root in ROOTS:
        if root in used:
            lines.append(f'  <link name="{root}"/>')
    for node in scene.objects:
        attrs = f'name="link_{node.id}" class="{node.cls.value}"'
        if node.face_region is not None:
            attrs += f' face_region="{_v(node.face_region)}"'
        lines.append(f"  <link {attrs}>")
        box = f'<box size="{_v(node.bbox.size)}"/>'
        geometry = box if node.mesh_ref is None else f"<mesh filename={quoteattr(node.mesh_ref)}/>"
        origin = f'<origin xyz="{_v(node.bbox.center)}" rpy="0.0 0.0 0.0"/>'
        lines.append(f"    <visual>{origin}<geometry>{geometry}</geometry></visual>")
        lines.append(f"    <collision>{origin}<geometry>{box}</geometry></collision>")
        lines.append("  </link>")
    for node in scene.objects:
        parent = node.parent.root if node.parent.root is not None else f"link_{node.parent.object}"
        j = node.joint
        lines.append(f'  <joint name="joint_{node.id}" type="{j.kind}">')
        lines.append(f'    <parent link="{parent}"/>')
        lines.append(f'    <child link="link_{node.id}"/>')
        lines.append(f'    <origin xyz="{_v(node.origin.xyz)}" rpy="{_v(node.origin.rpy)}"/>')
        if j.kind != "fixed":
            lines.append(f'    <axis xyz="{_v(j.axis)}"/>')
            lines.append(f'    <limit lower="{_f(j.lower)}" upper="{_f(j.upper)}"/>')
        lines.append("  </joint>")
    lines.append("</robot>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing

_KNOWN = {
    "robot", "link", "joint", "origin", "axis", "limit", "parent", "child",
    "visual", "collision", "geometry", "box", "mesh",
}
_SUPPORTED_JOINTS = ("fixed", "prismatic", "revolute")


def _floats(text: Optional[str], n: int, what: str) -> tuple[float, ...]:
    if text is None:
        raise MalformedXmlError(f"missing {what}")
    try:
        vals = tuple(float(x) for x in text.split())
    except ValueError as exc:
        raise MalformedXmlError(f"bad number in {what}: {text!r}") from exc
    if len(vals) != n:
        raise MalformedXmlError(f"{what} needs {n} values, got {len(vals)}")
    return vals


def _origin(el: Optional[ET.Element]) -> Transform:
    if el is None:
        return Transform()
    xyz = _floats(el.get("xyz", "0 0 0"), 3, "origin xyz")
    rpy = _floats(el.get("rpy", "0 0 0"), 3, "origin rpy")
    return Transform(xyz, rpy)


def _link_index(name: str) -> Optional[int]:
    if name.startswith("link_") and name[5:].isdigit():
        return int(name[5:])
    return None


def from_urdf(xml: str) -> SceneDescriptor:
    if "<!DOCTYPE" in xml or "<!ENTITY" in xml:
        raise MalformedXmlError("DTDs and entity declarations are not accepted")
    try:
        robot = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise MalformedXmlError(str(exc)) from exc
    if robot.tag != "robot":
        raise MalformedXmlError(f"root element is <{robot.tag}>, expected <robot>")

    for el in robot.iter():
        if el.tag not in _KNOWN:
            warnings.warn(f"ignoring unknown URDF element <{el.tag}>", stacklevel=2)

    room = Room()
    if robot.get("room"):
        room = Room(*_floats(robot.get("room"), 3, "robot room"))
    version = int(robot.get("version", "1"))
    completeness = robot.get("completeness", "full")

    links: dict[str, ET.Element] = {}
    for link in robot.findall("link"):
        name = link.get("name")
        if not name:
            raise MalformedXmlError("link without a name")
        if name in links:
            raise MalformedXmlError(f"duplicate link {name}")
        links[name] = link

    parent_of: dict[str, tuple[str, ET.Element]] = {}
    for joint in robot.findall("joint"):
        kind = joint.get("type")
        if kind not in _SUPPORTED_JOINTS:
            raise UnsupportedJointTypeError(f"joint {joint.get('name')!r} has type {kind!r}")
        p, c = joint.find("parent"), joint.find("child")
        if p is None or c is None or not p.get("link") or not c.get("link"):
            raise MalformedXmlError(f"joint {joint.get('name')!r} lacks parent/child")
        child = c.get("link")
        if child in parent_of:
            raise MalformedXmlError(f"link {child} has two parent joints")
        parent_of[child] = (p.get("link"), joint)

    for child, (parent, _) in parent_of.items():
        if parent not in links:
            raise DanglingParentError(f"joint parent link {parent!r} is not defined")
        if child not in links:
            raise DanglingParentError(f"joint child link {child!r} is not defined")

    for start in parent_of:
        seen = {start}
        cur = start
        while cur in parent_of:
            cur = parent_of[cur][0]
            if cur in seen:
                raise CyclicJointsError(f"joint cycle through {cur!r}")
            seen.add(cur)

    node_links = sorted((idx, name) for name in links if (idx := _link_index(name)) is not None)
    if [i for i, _ in node_links] != list(range(len(node_links))):
        raise MalformedXmlError("link ids must be contiguous link_0..link_{n-1}")

    nodes = []
    for idx, name in node_links:
        link = links[name]
        if name not in parent_of:
            raise DanglingParentError(f"{name} has no parent joint")
        parent_name, joint = parent_of[name]
        if parent_name in ROOTS:
            pref = ParentRef.to_root(parent_name)
        elif _link_index(parent_name) is not None:
            pref = ParentRef.to_object(_link_index(parent_name))
        else:
            raise DanglingParentError(f"parent link {parent_name!r} is neither a room root nor a node")

        geom = link.find("collision/geometry/box")
        geom_origin = link.find("collision/origin")
        if geom is None:
            geom = link.find("visual/geometry/box")
            geom_origin = link.find("visual/origin")
        if geom is None:
            raise MalformedXmlError(f"{name} has no box geometry")
        bbox = BBox3(_origin(geom_origin).xyz, _floats(geom.get("size"), 3, "box size"))
        mesh = link.find("visual/geometry/mesh")

        kind = joint.get("type")
        if kind == "fixed":
            spec = JointSpec.fixed()
        else:
            axis_el = joint.find("axis")
            axis = _floats(axis_el.get("xyz") if axis_el is not None else "1 0 0", 3, "axis")
            lim = joint.find("limit")
            lower = float(lim.get("lower", 0.0)) if lim is not None else 0.0
            upper = float(lim.get("upper", 0.0)) if lim is not None else 0.0
            spec = JointSpec(kind, axis, lower, upper)

        region = link.get("face_region")
        try:
            cls = ClassLabel(link.get("class", "cabinet"))
        except ValueError as exc:
            raise MalformedXmlError(f"{name} has unknown class {link.get('class')!r}") from exc
        nodes.append(
            ObjectNode(
                id=idx,
                cls=cls,
                bbox=bbox,
                origin=_origin(joint.find("origin")),
                parent=pref,
                joint=spec,
                mesh_ref=mesh.get("filename") if mesh is not None else None,
                face_region=_floats(region, 4, "face_region") if region else None,
            )
        )
    return SceneDescriptor(tuple(nodes), completeness=completeness, version=version, room=room)
