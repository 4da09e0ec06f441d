"""Seeded procedural sampling of articulated objects and kitchen scenes.

All randomness flows from a single splitmix64 seed per scene. Dataset entry
``i`` uses ``child_seed(seed, i)``, so any slice of a dataset can be
regenerated on its own and workers never share state.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import CategoryNotObjectError, ConfigError, PackingInfeasibleError
from .rng import Rng, child_seed
from .scene import (
    WALLS,
    BBox3,
    ClassLabel,
    DatasetManifest,
    JointSpec,
    ManifestEntry,
    ObjectNode,
    ParentRef,
    Room,
    SceneDescriptor,
    Transform,
    strip_parts,
)
from .urdf import build_part

# (width, depth, height, elevation) ranges in meters; elevation is the
# height of the object's bottom above the floor.
DEFAULT_SIZES: dict[str, dict[str, list[float]]] = {
    "cabinet": {"width": [0.3, 1.2], "depth": [0.35, 0.6], "height": [0.5, 1.0], "elevation": [0.0, 0.0]},
    "oven": {"width": [0.55, 0.8], "depth": [0.55, 0.65], "height": [0.8, 0.95], "elevation": [0.0, 0.0]},
    "dishwasher": {"width": [0.55, 0.62], "depth": [0.55, 0.62], "height": [0.8, 0.9], "elevation": [0.0, 0.0]},
    "fridge": {"width": [0.6, 0.95], "depth": [0.6, 0.8], "height": [1.5, 2.0], "elevation": [0.0, 0.0]},
    "washer": {"width": [0.55, 0.65], "depth": [0.5, 0.65], "height": [0.8, 0.9], "elevation": [0.0, 0.0]},
    "oven_fan": {"width": [0.6, 0.9], "depth": [0.3, 0.5], "height": [0.3, 0.6], "elevation": [1.45, 1.65]},
    "shelf": {"width": [0.5, 1.2], "depth": [0.2, 0.35], "height": [0.3, 0.8], "elevation": [1.2, 1.6]},
    "microwave": {"width": [0.45, 0.6], "depth": [0.35, 0.45], "height": [0.25, 0.35], "elevation": [0.9, 1.2]},
    "toilet": {"width": [0.35, 0.45], "depth": [0.6, 0.75], "height": [0.7, 0.85], "elevation": [0.0, 0.0]},
    "desk": {"width": [1.0, 1.6], "depth": [0.5, 0.8], "height": [0.72, 0.78], "elevation": [0.0, 0.0]},
    "laptop": {"width": [0.3, 0.4], "depth": [0.2, 0.28], "height": [0.2, 0.28], "elevation": [0.72, 0.78]},
    "chair": {"width": [0.4, 0.55], "depth": [0.45, 0.6], "height": [0.8, 1.0], "elevation": [0.0, 0.0]},
}

DEFAULT_ROOM = {"width": [3.0, 6.0], "depth": [3.0, 6.0], "height": [2.5, 3.0]}

UPPER_CABINET_ELEVATION = (1.4, 1.6)
UPPER_CABINET_HEIGHT = (0.5, 0.9)


@dataclass
class GenConfig:
    scene_type: str = "object"  # "object" or "kitchen"
    kind: str = "object_pair"
    category_weights: dict[str, float] = field(
        default_factory=lambda: {c: 1.0 for c in ("cabinet", "oven", "dishwasher", "fridge", "washer", "oven_fan", "shelf")}
    )
    composition: Optional[dict[str, int]] = None
    max_rows: int = 4
    max_cols: int = 4
    split_prob: float = 0.5
    drawer_prob: float = 0.5
    handle_prob: float = 0.8  # handle rather than knob on a drawer or door
    knob_prob: float = 0.5  # appliance control knobs present
    wall_mount_prob: float = 0.3  # kitchen cabinets hung on the wall
    kitchen_count: tuple[int, int] = (5, 15)
    sizes: dict[str, dict[str, list[float]]] = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_SIZES)))
    room: dict[str, list[float]] = field(default_factory=lambda: dict(DEFAULT_ROOM))
    seed: int = 0
    default_n: int = 1000

    def __post_init__(self):
        self.kitchen_count = tuple(int(x) for x in self.kitchen_count)
        self.check()

    def check(self) -> None:
        if self.scene_type not in ("object", "kitchen"):
            raise ConfigError(f"scene_type must be 'object' or 'kitchen', got {self.scene_type!r}")
        if self.kind not in ("object_pair", "scene_pair"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        weights = self.category_weights
        if not weights or any(w < 0 for w in weights.values()) or sum(weights.values()) <= 0:
            raise ConfigError("category weights must be non-negative with a positive sum")
        cats = list(weights) + list(self.composition or {})
        for c in cats:
            try:
                label = ClassLabel(c)
            except ValueError:
                raise ConfigError(f"unknown category {c!r}") from None
            if not label.is_object:
                raise ConfigError(f"{c!r} is not an object category")
            if c not in self.sizes:
                raise ConfigError(f"no size ranges for {c!r}")
        if self.composition is not None and (
            any(v < 0 for v in self.composition.values()) or sum(self.composition.values()) <= 0
        ):
            raise ConfigError("composition counts must be non-negative with a positive sum")
        for name in ("split_prob", "drawer_prob", "handle_prob", "knob_prob", "wall_mount_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if self.max_rows < 1 or self.max_cols < 1:
            raise ConfigError("grid limits must be at least 1x1")
        lo, hi = self.kitchen_count
        if not 1 <= lo <= hi:
            raise ConfigError(f"kitchen_count range {self.kitchen_count} is empty")
        ranges = [(f"room.{k}", v) for k, v in self.room.items()]
        for cat, spec in self.sizes.items():
            ranges += [(f"sizes.{cat}.{k}", v) for k, v in spec.items()]
        for name, (lo, hi) in ranges:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ConfigError(f"range {name} = [{lo}, {hi}] is empty")
        for cat, spec in self.sizes.items():
            if min(spec["width"][0], spec["depth"][0], spec["height"][0]) <= 0:
                raise ConfigError(f"sizes for {cat!r} must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "sizes" in d:
            sizes = json.loads(json.dumps(DEFAULT_SIZES))
            for cat, spec in d["sizes"].items():
                sizes.setdefault(cat, {}).update(spec)
            d["sizes"] = sizes
        if "room" in d:
            d["room"] = {**DEFAULT_ROOM, **d["room"]}
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "GenConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)


def preset_names() -> list[str]:
    root = resources.files("urdforge") / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json") and not p.name.startswith("assets"))


def load_preset(name: str) -> GenConfig:
    path = resources.files("urdforge") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return GenConfig.from_dict(json.loads(path.read_text()))


# ---------------------------------------------------------------------------
# sampling helpers


def _sample_room(rng: Rng, config: GenConfig) -> Room:
    r = config.room
    return Room(rng.uniform(*r["width"]), rng.uniform(*r["depth"]), rng.uniform(*r["height"]))


def _sample_size(rng: Rng, config: GenConfig, cat: ClassLabel) -> tuple[float, float, float, float]:
    spec = config.sizes[cat.value]
    return (
        rng.uniform(*spec["width"]),
        rng.uniform(*spec["depth"]),
        rng.uniform(*spec["height"]),
        rng.uniform(*spec["elevation"]),
    )


def _lattice(rng: Rng, n: int) -> list[float]:
    """n cells of unequal width covering [0, 1]; every cell at least 1/(2n-1) wide."""
    weights = [rng.uniform(1.0, 2.0) for _ in range(n)]
    total = sum(weights)
    lines = [0.0]
    acc = 0.0
    for w in weights[:-1]:
        acc += w
        lines.append(acc / total)
    lines.append(1.0)
    return lines


def _grid_cells(rng: Rng, config: GenConfig) -> list[tuple[float, float, float, float]]:
    """Recursive row/column split of the front face over a jittered lattice."""
    xs = _lattice(rng, config.max_cols)
    ys = _lattice(rng, config.max_rows)
    cells = []

    def split(r0, r1, c0, c1):
        options = []
        if r1 - r0 > 1:
            options.append("row")
        if c1 - c0 > 1:
            options.append("col")
        if options and rng.chance(config.split_prob):
            if rng.choice(options) == "row":
                k = rng.randint(r0 + 1, r1 - 1)
                split(r0, k, c0, c1)
                split(k, r1, c0, c1)
            else:
                k = rng.randint(c0 + 1, c1 - 1)
                split(r0, r1, c0, k)
                split(r0, r1, k, c1)
        else:
            cells.append((xs[c0], ys[r0], xs[c1], ys[r1]))

    split(0, config.max_rows, 0, config.max_cols)
    return cells


# handle positions in the owning part's face coordinates
_GRIP_UV = {
    ClassLabel.DRAWER: (0.5, 0.2),
    ClassLabel.LEFT_DOOR: (0.85, 0.5),
    ClassLabel.RIGHT_DOOR: (0.15, 0.5),
    ClassLabel.OVEN_DOOR: (0.5, 0.1),
    ClassLabel.DOWN_DOOR: (0.5, 0.1),
}


class _PartPlan:
    """Accumulates (class, region, parent) triples; parent -1 is the object itself."""

    def __init__(self):
        self.items: list[tuple[ClassLabel, tuple, int]] = []

    def add(self, cls: ClassLabel, region, parent: int = -1) -> int:
        self.items.append((cls, tuple(region), parent))
        return len(self.items) - 1

    def grip(self, rng: Rng, config: GenConfig, part: int, cls: ClassLabel) -> None:
        u, v = _GRIP_UV[cls]
        grip = ClassLabel.HANDLE if rng.chance(config.handle_prob) else ClassLabel.KNOB
        self.add(grip, (u, v, u, v), part)


def _door_cell(rng: Rng, config: GenConfig, plan: _PartPlan, cell) -> None:
    x1, y1, x2, y2 = cell
    if x2 - x1 >= 0.25 and rng.chance(0.5):
        mid = (x1 + x2) / 2
        for cls, region in ((ClassLabel.LEFT_DOOR, (x1, y1, mid, y2)), (ClassLabel.RIGHT_DOOR, (mid, y1, x2, y2))):
            plan.grip(rng, config, plan.add(cls, region), cls)
    else:
        cls = ClassLabel.LEFT_DOOR if rng.chance(0.5) else ClassLabel.RIGHT_DOOR
        plan.grip(rng, config, plan.add(cls, cell), cls)


def _plan_parts(cat: ClassLabel, rng: Rng, config: GenConfig) -> _PartPlan:
    plan = _PartPlan()
    C = ClassLabel
    if cat is C.CABINET:
        for cell in _grid_cells(rng, config):
            if rng.chance(config.drawer_prob):
                plan.grip(rng, config, plan.add(C.DRAWER, cell), C.DRAWER)
            else:
                _door_cell(rng, config, plan, cell)
    elif cat is C.DESK:
        left = rng.uniform(0.6, 0.75)
        count = rng.randint(1, min(3, config.max_rows))
        ys = _lattice(rng, count)
        for i in range(count):
            plan.grip(rng, config, plan.add(C.DRAWER, (left, ys[i], 1.0, ys[i + 1])), C.DRAWER)
    elif cat is C.OVEN:
        top = rng.uniform(0.2, 0.3)
        plan.grip(rng, config, plan.add(C.OVEN_DOOR, (0.0, top, 1.0, 1.0)), C.OVEN_DOOR)
        if rng.chance(config.knob_prob):
            n = rng.randint(2, 4)
            for k in range(n):
                u = (k + 1) / (n + 1)
                plan.add(C.KNOB, (u, top / 2, u, top / 2))
    elif cat is C.DISHWASHER:
        top = rng.uniform(0.05, 0.15)
        plan.grip(rng, config, plan.add(C.DOWN_DOOR, (0.0, top, 1.0, 1.0)), C.DOWN_DOOR)
    elif cat is C.WASHER:
        side = min(0.9, rng.uniform(0.55, 0.7))
        cy = rng.uniform(0.5, 0.6)
        # washer fronts are taller than wide, so a round door spans less of v
        plan.add(C.CIRCLE_DOOR, (0.5 - side / 2, cy - side * 0.4, 0.5 + side / 2, cy + side * 0.4))
        if rng.chance(config.knob_prob):
            plan.add(C.KNOB, (0.2, 0.08, 0.2, 0.08))
    elif cat is C.FRIDGE:
        layout = rng.below(3)
        if layout == 0:
            cls = C.LEFT_DOOR if rng.chance(0.5) else C.RIGHT_DOOR
            plan.grip(rng, config, plan.add(cls, (0.0, 0.0, 1.0, 1.0)), cls)
        elif layout == 1:
            split = rng.uniform(0.25, 0.4)
            for region in ((0.0, 0.0, 1.0, split), (0.0, split, 1.0, 1.0)):
                cls = C.LEFT_DOOR if rng.chance(0.5) else C.RIGHT_DOOR
                plan.grip(rng, config, plan.add(cls, region), cls)
        else:
            _door_cell(rng, config, plan, (0.0, 0.0, 1.0, 1.0))
    elif cat is C.MICROWAVE:
        f = rng.uniform(0.65, 0.75)
        plan.grip(rng, config, plan.add(C.LEFT_DOOR, (0.0, 0.0, f, 1.0)), C.LEFT_DOOR)
        if rng.chance(config.knob_prob):
            u = (f + 1.0) / 2
            plan.add(C.KNOB, (u, 0.3, u, 0.3))
    elif cat is C.LAPTOP:
        plan.add(C.OVEN_DOOR, (0.02, 0.02, 0.98, 0.98))
    # oven_fan, shelf, toilet, chair: rigid, no parts
    return plan


def _build_object(
    node_id: int,
    cat: ClassLabel,
    size: tuple[float, float, float],
    parent: ParentRef,
    origin: Transform,
    rng: Rng,
    config: GenConfig,
) -> list[ObjectNode]:
    w, d, h = size
    root = ObjectNode(
        id=node_id,
        cls=cat,
        bbox=BBox3((d / 2, 0.0, h / 2), (d, w, h)),
        origin=origin,
        parent=parent,
        joint=JointSpec.fixed(),
    )
    nodes = [root]
    for cls, region, owner in _plan_parts(cat, rng, config).items:
        owner_node = root if owner < 0 else nodes[owner + 1]
        nodes.append(build_part(node_id + len(nodes), cls, owner_node, region))
    return nodes


def sample_object(category, config: GenConfig, seed: int) -> SceneDescriptor:
    """One articulated object hung on ``wall_0`` together with all its parts."""
    try:
        cat = ClassLabel(category)
    except ValueError:
        raise CategoryNotObjectError(f"unknown category {category!r}") from None
    if not cat.is_object:
        raise CategoryNotObjectError(f"{cat.value} is not an object category")
    rng = Rng(seed)
    room = _sample_room(rng, config)
    w, d, h, e = _sample_size(rng, config, cat)
    e = max(0.0, min(e, room.height - h))
    L = room.wall_length("wall_0")
    along = rng.uniform(w / 2, L - w / 2) if L > w else L / 2
    nodes = _build_object(0, cat, (w, d, h), ParentRef.to_root("wall_0"), Transform((0.0, along, e)), rng, config)
    return SceneDescriptor(tuple(nodes), completeness="object_partial", room=room)


def _pack(rng: Rng, widths: Sequence[float], lengths: Sequence[float]) -> Optional[list[int]]:
    free = list(lengths)
    order = list(range(len(widths)))
    rng.shuffle(order)
    walls = [0] * len(widths)
    for i in order:
        fits = [k for k in range(len(free)) if free[k] >= widths[i]]
        if not fits:
            return None
        k = rng.choice(fits)
        walls[i] = k
        free[k] -= widths[i]
    return walls


def _pack_worst_fit(widths: Sequence[float], lengths: Sequence[float]) -> Optional[list[int]]:
    free = list(lengths)
    walls = [0] * len(widths)
    for i in sorted(range(len(widths)), key=lambda i: (-widths[i], i)):
        k = max(range(len(free)), key=lambda k: (free[k], -k))
        if free[k] < widths[i]:
            return None
        walls[i] = k
        free[k] -= widths[i]
    return walls


def sample_kitchen(config: GenConfig, seed: int) -> SceneDescriptor:
    """A room with objects packed along its four walls (no footprint overlaps per wall)."""
    rng = Rng(seed)
    lo, hi = config.kitchen_count
    count = rng.randint(lo, hi)
    names = list(config.category_weights)
    weights = [config.category_weights[c] for c in names]
    cats = [ClassLabel(names[rng.weighted_index(weights)]) for _ in range(count)]

    sizes = []
    for cat in cats:
        w, d, h, e = _sample_size(rng, config, cat)
        if cat is ClassLabel.CABINET and rng.chance(config.wall_mount_prob):
            e = rng.uniform(*UPPER_CABINET_ELEVATION)
            h = min(h, rng.uniform(*UPPER_CABINET_HEIGHT))
        sizes.append((w, d, h, e))

    room = _sample_room(rng, config)
    widths = [s[0] for s in sizes]
    need = sum(widths) + 4 * max(widths)
    have = 2 * (room.width + room.depth)
    if need > have:
        cap = 2 * (config.room["width"][1] + config.room["depth"][1])
        if need > cap:
            raise PackingInfeasibleError(
                f"{count} objects need {need:.2f} m of wall but the largest room offers {cap:.2f} m"
            )
        f = need / have
        room = Room(room.width * f, room.depth * f, room.height)
    lengths = [room.wall_length(w) for w in WALLS]
    walls = _pack(rng, widths, lengths) or _pack_worst_fit(widths, lengths)
    if walls is None:
        raise PackingInfeasibleError(f"cannot pack {count} objects onto walls of {lengths}")

    along = [0.0] * count
    for k in range(4):
        members = [i for i in range(count) if walls[i] == k]
        rng.shuffle(members)
        slack = lengths[k] - sum(widths[i] for i in members)
        gaps = [rng.random() + 1e-3 for _ in range(len(members) + 1)]
        scale = slack / sum(gaps)
        pos = 0.0
        for i, g in zip(members, gaps):
            pos += g * scale
            along[i] = pos + widths[i] / 2
            pos += widths[i]

    nodes: list[ObjectNode] = []
    for i, cat in enumerate(cats):
        w, d, h, e = sizes[i]
        e = max(0.0, min(e, room.height - h))
        origin = Transform((0.0, along[i], e))
        nodes += _build_object(len(nodes), cat, (w, d, h), ParentRef.to_root(WALLS[walls[i]]), origin, rng, config)
    return SceneDescriptor(tuple(nodes), completeness="full", room=room)


# ---------------------------------------------------------------------------
# datasets


def apportion(composition: dict[str, int], n: int) -> dict[str, int]:
    """Scale exact category counts to ``n`` entries (largest remainder, ties by listing order)."""
    total = sum(composition.values())
    quotas = {c: v * n / total for c, v in composition.items()}
    counts = {c: int(math.floor(q)) for c, q in quotas.items()}
    left = n - sum(counts.values())
    order = sorted(composition, key=lambda c: (-(quotas[c] - counts[c]), list(composition).index(c)))
    for c in order[:left]:
        counts[c] += 1
    return counts


def scaled_composition(composition: dict[str, int], fraction: float) -> dict[str, int]:
    """Per-category counts scaled by ``fraction``, rounded, never below one."""
    return {c: max(1, int(math.floor(v * fraction + 0.5))) for c, v in composition.items() if v > 0}


def entry_category(config: GenConfig, seed: int, index: int, n: int) -> ClassLabel:
    """Category of dataset entry ``index`` (object datasets only)."""
    if config.composition:
        counts = apportion(config.composition, n)
        acc = 0
        for cat, k in counts.items():
            acc += k
            if index < acc:
                return ClassLabel(cat)
        raise IndexError(index)
    names = list(config.category_weights)
    weights = [config.category_weights[c] for c in names]
    return ClassLabel(names[Rng(child_seed(seed, index)).weighted_index(weights)])


def entry_categories(n: int, config: GenConfig, seed: int) -> list[ClassLabel]:
    if config.composition:
        counts = apportion(config.composition, n)
        return [ClassLabel(c) for c, k in counts.items() for _ in range(k)]
    return [entry_category(config, seed, i, n) for i in range(n)]


def generate_entry(config: GenConfig, seed: int, index: int, n: int, kind: Optional[str] = None) -> ManifestEntry:
    kind = kind or config.kind
    entry_seed = child_seed(seed, index)
    if config.scene_type == "kitchen":
        scene = sample_kitchen(config, child_seed(entry_seed, 0))
    else:
        scene = sample_object(entry_category(config, seed, index, n), config, child_seed(entry_seed, 0))
    if kind == "scene_pair":
        scene = strip_parts(scene)
    return ManifestEntry(image_path=None, scene=scene, kind=kind)


def _entry_job(args):
    return generate_entry(*args)


def generate_dataset(
    n: int,
    config: GenConfig,
    seed: int,
    kind: Optional[str] = None,
    indices: Optional[Iterable[int]] = None,
    jobs: int = 1,
) -> DatasetManifest:
    """Entries for ``indices`` (default ``range(n)``) of an n-entry dataset."""
    if n < 0:
        raise ValueError("n must be non-negative")
    kind = kind or config.kind
    if kind not in ("object_pair", "scene_pair"):
        raise ConfigError(f"unknown dataset kind {kind!r}")
    idx = list(range(n) if indices is None else indices)
    args = [(config, seed, i, n, kind) for i in idx]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_entry_job, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        entries = [_entry_job(a) for a in args]
    return DatasetManifest(tuple(entries))
