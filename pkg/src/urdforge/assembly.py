"""Turn raw network-style predictions into a valid scene.

Raw prediction JSON, version 1::

    {
      "version": 1,
      "room": {"width": 4.0, "depth": 4.0, "height": 2.7},      # optional
      "global": {
        "root_embeddings": [[...] x 6],     # wall_0..3, floor, ceiling
        "boxes": [
          {"box": [x1, y1, x2, y2],         # normalized image coordinates
           "confidence": 0.93,              # optional, default 1
           "class_scores": [...],           # one score per class, CLASS_ORDER
           "bins": [b1, b2, b3, b4],        # parent-relative, 12 bins
           "parent_embedding": [...],
           "child_embedding": [...]}
        ]
      },
      "objects": [                          # aligned with global boxes
        {"class_scores": [...],
         "root_embedding": [...],           # stands for the object itself
         "depth": 0.55,                     # optional, meters
         "parts": [ box entries as above, boxes in the object's crop;
                    handles and knobs carry 2 bins (u, v) ]}
      ]
    }

Global bins locate an object on its parent: along-wall and top-down
fractions for walls, a footprint for floor and ceiling, the front face for
object parents. Part bins are face coordinates on the parent part or object.
The object class is taken from the part-level scores; the global scores only
drive duplicate removal.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidSceneError, OutOfRangeError, PredictionFormatError
from .geometry import object_region, place_object
from .procgen import DEFAULT_SIZES
from .scene import (
    CLASS_ORDER,
    ROOTS,
    ClassLabel,
    JointSpec,
    ObjectNode,
    ParentRef,
    Room,
    SceneDescriptor,
    descendants,
    reindex,
    validate,
)
from .urdf import build_part

log = logging.getLogger(__name__)

BINS = 12
PREDICTION_VERSION = 1
DEDUP_IOU = 0.7
SHRINK_STEP = 0.95
SHRINK_ITERS = 32
OVERLAP_EPS = 1e-6
POINT_HALF = 0.01  # half-size of a synthetic handle/knob box, crop units

Vec = tuple[float, ...]
Rect = tuple[float, float, float, float]


def quantize(v: float, bins: int = BINS) -> int:
    if not 0.0 <= v <= 1.0:
        raise OutOfRangeError(f"value {v} outside [0, 1]")
    return min(int(math.floor(v * bins)), bins - 1)


def dequantize(b: int, bins: int = BINS) -> float:
    if not 0 <= b < bins:
        raise OutOfRangeError(f"bin {b} outside [0, {bins - 1}]")
    return (b + 0.5) / bins


def _dequantize_span(b1: int, b2: int, bins: int = BINS) -> tuple[float, float]:
    lo, hi = dequantize(b1, bins), dequantize(b2, bins)
    if hi <= lo:
        # both edges fell in one bin: keep the middle half of that bin
        c = (lo + hi) / 2
        lo, hi = c - 0.25 / bins, c + 0.25 / bins
    return lo, hi


@dataclass(frozen=True)
class Box2:
    x1: float
    y1: float
    x2: float
    y2: float
    confidence: float = 1.0
    cls: Optional[ClassLabel] = None

    def __post_init__(self):
        if not (0.0 <= self.x1 < self.x2 <= 1.0 and 0.0 <= self.y1 < self.y2 <= 1.0):
            raise ValueError(f"box ({self.x1}, {self.y1}, {self.x2}, {self.y2}) is not a normalized rectangle")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def coords(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def iou(a, b) -> float:
    """Intersection over union of two (x1, y1, x2, y2) rectangles."""
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union if union > 0 else 0.0


def dedup_indices(boxes: Sequence[Box2], iou_threshold: float = DEDUP_IOU) -> list[int]:
    """Indices kept by greedy same-class suppression, in descending confidence."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in (0, 1]")
    order = sorted(range(len(boxes)), key=lambda i: -boxes[i].confidence)
    kept: list[int] = []
    for i in order:
        if all(
            boxes[k].cls != boxes[i].cls or iou(boxes[k].coords, boxes[i].coords) <= iou_threshold for k in kept
        ):
            kept.append(i)
    return kept


def dedup_boxes(boxes: Sequence[Box2], iou_threshold: float = DEDUP_IOU) -> list[Box2]:
    return [boxes[i] for i in dedup_indices(boxes, iou_threshold)]


def relationship_scores(parent_embs, child_embs) -> np.ndarray:
    """Score matrix with one row per candidate parent and one column per child."""
    P = np.asarray(parent_embs, dtype=float)
    C = np.asarray(child_embs, dtype=float)
    if P.ndim != 2 or C.ndim != 2:
        if C.size == 0 and P.ndim == 2:
            return np.zeros((P.shape[0], 0))
        raise DimensionMismatchError("embeddings must be 2D arrays")
    if P.shape[1] != C.shape[1]:
        raise DimensionMismatchError(f"parent dim {P.shape[1]} != child dim {C.shape[1]}")
    return P @ C.T


def decode_relationships(parent_embs, child_embs, n_roots: int = len(ROOTS)) -> tuple[list[int], int]:
    """Row index of the chosen parent for every child, plus the number of redirects.

    Rows ``0..n_roots-1`` are roots; row ``n_roots + j`` is child ``j``.
    Each child takes its row-argmax (ties to the lowest row). A choice that
    is the child itself or a later child is replaced by the best valid row.
    """
    parent_embs = list(parent_embs)
    child_embs = list(child_embs)
    n = len(child_embs)
    if len(parent_embs) != n_roots + n:
        raise DimensionMismatchError(f"expected {n_roots + n} parent embeddings, got {len(parent_embs)}")
    if n == 0:
        return [], 0
    S = relationship_scores(parent_embs, child_embs)
    if not np.all(np.isfinite(S)):
        raise PredictionFormatError("relationship scores must be finite")
    rows: list[int] = []
    redirects = 0
    for c in range(n):
        col = S[:, c]
        best = int(np.argmax(np.where(np.arange(len(col)) == n_roots + c, -np.inf, col)))
        if best >= n_roots + c:
            best = int(np.argmax(col[: n_roots + c]))
            redirects += 1
        rows.append(best)
    return rows, redirects


# ---------------------------------------------------------------------------
# raw prediction containers


@dataclass(frozen=True)
class BoxPrediction:
    box: tuple[float, float, float, float]
    class_scores: Vec
    bins: tuple[int, ...]
    parent_embedding: Vec
    child_embedding: Vec
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {
            "box": list(self.box),
            "confidence": self.confidence,
            "class_scores": list(self.class_scores),
            "bins": list(self.bins),
            "parent_embedding": list(self.parent_embedding),
            "child_embedding": list(self.child_embedding),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoxPrediction":
        try:
            return cls(
                box=tuple(float(x) for x in d["box"]),
                class_scores=tuple(float(x) for x in d["class_scores"]),
                bins=tuple(int(b) for b in d["bins"]),
                parent_embedding=tuple(float(x) for x in d["parent_embedding"]),
                child_embedding=tuple(float(x) for x in d["child_embedding"]),
                confidence=float(d.get("confidence", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PredictionFormatError(f"bad box entry: {exc}") from exc


@dataclass(frozen=True)
class ObjectPrediction:
    class_scores: Vec
    root_embedding: Vec
    parts: tuple[BoxPrediction, ...] = ()
    depth: Optional[float] = None

    def to_dict(self) -> dict:
        d = {
            "class_scores": list(self.class_scores),
            "root_embedding": list(self.root_embedding),
            "parts": [p.to_dict() for p in self.parts],
        }
        if self.depth is not None:
            d["depth"] = self.depth
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectPrediction":
        try:
            return cls(
                class_scores=tuple(float(x) for x in d["class_scores"]),
                root_embedding=tuple(float(x) for x in d["root_embedding"]),
                parts=tuple(BoxPrediction.from_dict(p) for p in d.get("parts", [])),
                depth=None if d.get("depth") is None else float(d["depth"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PredictionFormatError(f"bad object entry: {exc}") from exc


@dataclass(frozen=True)
class RawPrediction:
    root_embeddings: tuple[Vec, ...]
    boxes: tuple[BoxPrediction, ...] = ()
    objects: tuple[ObjectPrediction, ...] = ()
    room: Optional[Room] = None
    version: int = PREDICTION_VERSION

    def check(self) -> None:
        if self.version != PREDICTION_VERSION:
            raise PredictionFormatError(f"unsupported prediction version {self.version}")
        if len(self.root_embeddings) != len(ROOTS):
            raise PredictionFormatError(f"expected {len(ROOTS)} root embeddings, got {len(self.root_embeddings)}")
        if len(self.objects) != len(self.boxes):
            raise PredictionFormatError(f"{len(self.boxes)} global boxes but {len(self.objects)} object entries")
        dim = len(self.root_embeddings[0])
        for e in self.root_embeddings:
            _check_vec(e, dim, "root embedding")
        for b in self.boxes:
            _check_box(b, dim, point_ok=False)
        for o in self.objects:
            _check_vec(o.class_scores, len(CLASS_ORDER), "class scores")
            _check_vec(o.root_embedding, len(o.root_embedding) or 1, "object root embedding")
            pdim = len(o.root_embedding)
            for p in o.parts:
                _check_box(p, pdim, point_ok=True)
            if o.depth is not None and not (math.isfinite(o.depth) and o.depth > 0):
                raise PredictionFormatError(f"object depth must be positive, got {o.depth}")

    def to_dict(self) -> dict:
        d: dict = {"version": self.version}
        if self.room is not None:
            d["room"] = {"width": self.room.width, "depth": self.room.depth, "height": self.room.height}
        d["global"] = {
            "root_embeddings": [list(e) for e in self.root_embeddings],
            "boxes": [b.to_dict() for b in self.boxes],
        }
        d["objects"] = [o.to_dict() for o in self.objects]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RawPrediction":
        try:
            g = d["global"]
            room = d.get("room")
            pred = cls(
                root_embeddings=tuple(tuple(float(x) for x in e) for e in g["root_embeddings"]),
                boxes=tuple(BoxPrediction.from_dict(b) for b in g.get("boxes", [])),
                objects=tuple(ObjectPrediction.from_dict(o) for o in d.get("objects", [])),
                room=None if room is None else Room(**{k: float(v) for k, v in room.items()}),
                version=int(d.get("version", PREDICTION_VERSION)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, PredictionFormatError):
                raise
            raise PredictionFormatError(f"malformed raw prediction: {exc}") from exc
        pred.check()
        return pred

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RawPrediction":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise PredictionFormatError(str(exc)) from exc


def _check_vec(v: Sequence[float], dim: int, what: str) -> None:
    if len(v) != dim:
        raise DimensionMismatchError(f"{what} has length {len(v)}, expected {dim}")
    if not all(math.isfinite(x) for x in v):
        raise PredictionFormatError(f"{what} has non-finite entries")


def _check_box(b: BoxPrediction, dim: int, point_ok: bool) -> None:
    _check_vec(b.parent_embedding, dim, "parent embedding")
    _check_vec(b.child_embedding, dim, "child embedding")
    _check_vec(b.class_scores, len(CLASS_ORDER), "class scores")
    if len(b.bins) not in ((2, 4) if point_ok else (4,)):
        raise PredictionFormatError(f"box carries {len(b.bins)} bins")
    if any(not 0 <= x < BINS for x in b.bins):
        raise PredictionFormatError(f"bins {b.bins} outside [0, {BINS - 1}]")
    try:
        Box2(*b.box, confidence=b.confidence)
    except ValueError as exc:
        raise PredictionFormatError(str(exc)) from exc


# ---------------------------------------------------------------------------
# decoding


def _argmax_class(scores: Sequence[float], allowed) -> ClassLabel:
    best, best_score = None, -math.inf
    for cls, s in zip(CLASS_ORDER, scores):
        if cls in allowed and s > best_score:
            best, best_score = cls, s
    return best


def _region_from_bins(bins: Sequence[int]) -> tuple[float, float, float, float]:
    if len(bins) == 2:
        u, v = dequantize(bins[0]), dequantize(bins[1])
        return (u, v, u, v)
    x1, x2 = _dequantize_span(bins[0], bins[2])
    y1, y2 = _dequantize_span(bins[1], bins[3])
    return (x1, y1, x2, y2)


def _default_depth(cls: ClassLabel) -> float:
    lo, hi = DEFAULT_SIZES[cls.value]["depth"]
    return (lo + hi) / 2


def _is_full_region(r) -> bool:
    return r is not None and r[2] > r[0] and r[3] > r[1]


def _overlap_area(a, b) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    return iw * ih if iw > 0 and ih > 0 else 0.0


def _shrink(r, k: float):
    cx, cy = (r[0] + r[2]) / 2, (r[1] + r[3]) / 2
    hw, hh = (r[2] - r[0]) / 2 * k, (r[3] - r[1]) / 2 * k
    return (cx - hw, cy - hh, cx + hw, cy + hh)


def resolve_collisions(scene: SceneDescriptor) -> tuple[SceneDescriptor, list[str]]:
    """Make sibling part regions disjoint by shrinking later siblings, dropping the hopeless ones."""
    scene, messages, _ = _resolve(scene)
    return scene, messages


def _resolve(scene: SceneDescriptor) -> tuple[SceneDescriptor, list[str], list[int]]:
    regions = {n.id: n.face_region for n in scene.objects}
    siblings: dict[int, list[int]] = {}
    for n in scene.objects:
        if n.cls.is_part and n.parent.object is not None and _is_full_region(n.face_region):
            siblings.setdefault(n.parent.object, []).append(n.id)
    changed: set[int] = set()
    dropped: set[int] = set()
    messages: list[str] = []
    for parent, ids in siblings.items():
        kept: list[int] = []
        for j in ids:
            r = regions[j]
            steps = 0
            while steps < SHRINK_ITERS and any(_overlap_area(regions[i], r) > OVERLAP_EPS for i in kept):
                r = _shrink(r, SHRINK_STEP)
                steps += 1
            if any(_overlap_area(regions[i], r) > OVERLAP_EPS for i in kept):
                msg = f"node {j} ({scene.objects[j].cls.value}) still overlaps a sibling after {SHRINK_ITERS} shrinks; dropped"
                log.warning(msg)
                messages.append(msg)
                dropped.update(descendants(scene, j))
                continue
            if steps:
                messages.append(f"node {j} shrunk {steps} times")
                regions[j] = r
                changed.add(j)
            kept.append(j)
    keep = [i for i in range(len(scene.objects)) if i not in dropped]
    if not changed and not dropped:
        return scene, messages, keep
    nodes = list(scene.objects)
    dirty: set[int] = set()
    for j in changed:
        dirty.update(descendants(scene, j))
    for i, node in enumerate(nodes):
        if i in dirty and i not in dropped:
            parent = nodes[node.parent.object]
            rebuilt = build_part(node.id, node.cls, parent, regions[i], node.mesh_ref)
            nodes[i] = rebuilt
    scene = replace(scene, objects=tuple(nodes))
    if dropped:
        scene = reindex(scene, keep)
    return scene, messages, keep


def decode_scene(pred: RawPrediction, iou_threshold: float = DEDUP_IOU) -> SceneDescriptor:
    """Nested decode: objects from the global predictions, then each object's parts."""
    return decode_with_boxes(pred, iou_threshold)[0]


def decode_with_boxes(pred: RawPrediction, iou_threshold: float = DEDUP_IOU) -> tuple[SceneDescriptor, list[Rect]]:
    """Like ``decode_scene``, also returning each node's detected image box (part boxes leave their crop)."""
    pred.check()
    room = pred.room or Room()
    gboxes = [
        Box2(*b.box, confidence=b.confidence, cls=_argmax_class(b.class_scores, _OBJECTS)) for b in pred.boxes
    ]
    keep = dedup_indices(gboxes, iou_threshold)
    parent_rows, _ = decode_relationships(
        list(pred.root_embeddings) + [pred.boxes[i].parent_embedding for i in keep],
        [pred.boxes[i].child_embedding for i in keep],
    )
    nodes: list[ObjectNode] = []
    image: list[Rect] = []
    node_of: list[int] = []
    for j, gi in enumerate(keep):
        box = pred.boxes[gi]
        obj = pred.objects[gi]
        cls = _argmax_class(obj.class_scores, _OBJECTS)
        row = parent_rows[j]
        region = _region_from_bins(box.bins)
        depth = obj.depth if obj.depth is not None else _default_depth(cls)
        if row < len(ROOTS):
            ref, parent_bbox = ParentRef.to_root(ROOTS[row]), None
        else:
            pid = node_of[row - len(ROOTS)]
            ref, parent_bbox = ParentRef.to_object(pid), nodes[pid].bbox
        origin, bbox = place_object(region, depth, ref, room, parent_bbox)
        obj_id = len(nodes)
        node_of.append(obj_id)
        nodes.append(ObjectNode(obj_id, cls, bbox, origin, ref, JointSpec.fixed()))
        image.append(tuple(box.box))
        parts, crops = _decode_parts(obj, nodes[obj_id], iou_threshold)
        nodes += parts
        image += [_uncrop(box.box, c) for c in crops]
    n_objects = len(keep)
    completeness = "object_partial" if n_objects == 1 else "full"
    scene = SceneDescriptor(tuple(nodes), completeness=completeness, room=room)
    scene, _, kept = _resolve(scene)
    violations = validate(scene)
    if violations:
        raise InvalidSceneError(violations)
    return scene, [image[i] for i in kept]


def _uncrop(outer, inner) -> Rect:
    ox1, oy1, ox2, oy2 = outer
    w, h = ox2 - ox1, oy2 - oy1
    return (ox1 + inner[0] * w, oy1 + inner[1] * h, ox1 + inner[2] * w, oy1 + inner[3] * h)


_OBJECTS = frozenset(c for c in CLASS_ORDER if c.is_object)
_PARTS = frozenset(c for c in CLASS_ORDER if c.is_part)


def _decode_parts(
    obj: ObjectPrediction, owner: ObjectNode, iou_threshold: float
) -> tuple[list[ObjectNode], list[Rect]]:
    parts = obj.parts
    boxes = [Box2(*p.box, confidence=p.confidence, cls=_argmax_class(p.class_scores, _PARTS)) for p in parts]
    keep = dedup_indices(boxes, iou_threshold)
    rows, _ = decode_relationships(
        [obj.root_embedding] + [parts[i].parent_embedding for i in keep],
        [parts[i].child_embedding for i in keep],
        n_roots=1,
    )
    out: list[ObjectNode] = []
    base = owner.id + 1
    for j, pi in enumerate(keep):
        cls = boxes[pi].cls
        region = _region_from_bins(parts[pi].bins)
        if cls.is_point and len(parts[pi].bins) == 4:
            u, v = (region[0] + region[2]) / 2, (region[1] + region[3]) / 2
            region = (u, v, u, v)
        elif not cls.is_point and len(parts[pi].bins) == 2:
            raise PredictionFormatError(f"{cls.value} needs 4 bins, got 2")
        parent = owner if rows[j] == 0 else out[rows[j] - 1]
        out.append(build_part(base + j, cls, parent, region))
    return out, [tuple(parts[i].box) for i in keep]


# ---------------------------------------------------------------------------
# lossless synthetic encoding (test oracle and demo input)


def _one_hot(cls: ClassLabel) -> Vec:
    return tuple(1.0 if c is cls else 0.0 for c in CLASS_ORDER)


def _basis(i: int, dim: int) -> Vec:
    return tuple(1.0 if k == i else 0.0 for k in range(dim))


def _node_region(node: ObjectNode, scene: SceneDescriptor):
    if node.cls.is_part:
        return node.face_region
    return object_region(node, scene)


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _bins_of(region, point: bool) -> tuple[int, ...]:
    r = tuple(_clip01(x) for x in region)
    if point:
        return (quantize(r[0]), quantize(r[1]))
    return tuple(quantize(x) for x in r)


def _sub_box(outer, region, point: bool):
    ox1, oy1, ox2, oy2 = outer
    w, h = ox2 - ox1, oy2 - oy1
    r = tuple(_clip01(x) for x in region)
    if point:
        cx, cy = ox1 + r[0] * w, oy1 + r[1] * h
        return (
            max(0.0, cx - POINT_HALF),
            max(0.0, cy - POINT_HALF),
            min(1.0, cx + POINT_HALF),
            min(1.0, cy + POINT_HALF),
        )
    return (ox1 + r[0] * w, oy1 + r[1] * h, ox1 + r[2] * w, oy1 + r[3] * h)


def encode_scene(scene: SceneDescriptor) -> RawPrediction:
    """Raw predictions a perfect model would emit for ``scene``.

    Image boxes are synthetic: the room is unrolled into six side-by-side
    panels (four walls, floor, ceiling) and every part box lives in its
    object's crop. Embeddings are one-hot so each child scores 1 against
    its true parent and 0 elsewhere.
    """
    objects = [n for n in scene.objects if not n.cls.is_part]
    index_of = {n.id: k for k, n in enumerate(objects)}
    n = len(objects)
    dim = len(ROOTS) + n
    roots = tuple(_basis(k, dim) for k in range(len(ROOTS)))
    boxes: list[BoxPrediction] = []
    objs: list[ObjectPrediction] = []
    image_box: dict[int, tuple] = {}
    for k, node in enumerate(objects):
        region = object_region(node, scene)
        if node.parent.root is not None:
            row = ROOTS.index(node.parent.root)
            r = tuple(_clip01(x) for x in region)
            box = ((row + r[0]) / len(ROOTS), r[1], (row + r[2]) / len(ROOTS), r[3])
        else:
            row = len(ROOTS) + index_of[node.parent.object]
            box = _sub_box(image_box[node.parent.object], region, False)
        image_box[node.id] = box
        boxes.append(
            BoxPrediction(
                box=box,
                class_scores=_one_hot(node.cls),
                bins=_bins_of(region, False),
                parent_embedding=_basis(len(ROOTS) + k, dim),
                child_embedding=_basis(row, dim),
            )
        )
        objs.append(_encode_parts(node, scene))
    return RawPrediction(root_embeddings=roots, boxes=tuple(boxes), objects=tuple(objs), room=scene.room)


def _own_parts(scene: SceneDescriptor, owner: int) -> list[int]:
    """Parts hanging off ``owner`` through part links only (not parts of objects stacked on it)."""
    owned = {owner}
    for i in descendants(scene, owner)[1:]:
        node = scene.objects[i]
        if node.cls.is_part and node.parent.object in owned:
            owned.add(i)
    return sorted(owned - {owner})


def _encode_parts(owner: ObjectNode, scene: SceneDescriptor) -> ObjectPrediction:
    parts = [scene.objects[i] for i in _own_parts(scene, owner.id)]
    local = {p.id: k for k, p in enumerate(parts)}
    dim = 1 + len(parts)
    crop: dict[int, tuple] = {owner.id: (0.0, 0.0, 1.0, 1.0)}
    out: list[BoxPrediction] = []
    for k, p in enumerate(parts):
        row = 0 if p.parent.object == owner.id else 1 + local[p.parent.object]
        point = p.cls.is_point
        box = _sub_box(crop[p.parent.object], p.face_region, point)
        crop[p.id] = box
        out.append(
            BoxPrediction(
                box=box,
                class_scores=_one_hot(p.cls),
                bins=_bins_of(p.face_region, point),
                parent_embedding=_basis(1 + k, dim),
                child_embedding=_basis(row, dim),
            )
        )
    return ObjectPrediction(
        class_scores=_one_hot(owner.cls),
        root_embedding=_basis(0, dim),
        parts=tuple(out),
        depth=owner.bbox.size[0],
    )


def scene_image_boxes(scene: SceneDescriptor) -> list[Rect]:
    """Image box of every node under the synthetic layout used by ``encode_scene``."""
    pred = encode_scene(scene)
    out: list[Optional[Rect]] = [None] * len(scene.objects)
    objects = [n for n in scene.objects if not n.cls.is_part]
    for node, box, obj in zip(objects, pred.boxes, pred.objects):
        out[node.id] = tuple(box.box)
        for i, p in zip(_own_parts(scene, node.id), obj.parts):
            out[i] = _uncrop(box.box, p.box)
    return out


def node_regions(scene: SceneDescriptor) -> list[tuple[float, float, float, float]]:
    """Parent-relative normalized region of every node (what the bins encode)."""
    return [_node_region(n, scene) for n in scene.objects]
