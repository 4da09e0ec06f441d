"""Detection-style scoring of predicted scenes against labeled ground truth.

Predicted and ground-truth nodes are paired by optimal assignment on
``1 - IoU`` of their image boxes, separately for objects ("global") and
parts. Over the matched pairs we report class accuracy, parent accuracy and
the mean absolute difference of the 12-bin coordinates; precision and
recall count how many nodes found a partner.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .assembly import BINS, node_regions, quantize, scene_image_boxes
from .errors import IdMismatchError, NonFiniteCostError
from .scene import SceneDescriptor, scene_from_dict, scene_to_dict

MATCH_FLOOR = 0.05
STRATA = ("global", "parts")

Rect = tuple[float, float, float, float]


def iou2d(a: Sequence[float], b: Sequence[float]) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return min(1.0, inter / union) if union > 0 else 0.0


# ---------------------------------------------------------------------------
# assignment


def _solve(cost: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """Square min-cost assignment by shortest augmenting paths with potentials.

    Returns (col_of_row, u, v) where u and v are optimal dual potentials.
    """
    n = len(cost)
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row (1-based) matched to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = cost[i0 - 1]
            delta = INF
            j1 = 0
            ui0 = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _lexmin_tight(cost, col_of_row, u, v) -> list[int]:
    """Lexicographically smallest perfect matching on the tight edges of (u, v).

    Every optimal assignment is tight against any optimal dual, so this is
    the lexicographically smallest optimal assignment.
    """
    n = len(cost)
    scale = 1.0 + max((abs(x) for row in cost for x in row), default=0.0)
    eps = 1e-9 * scale
    tight = [[cost[i][j] - u[i] - v[j] <= eps for j in range(n)] for i in range(n)]
    col = list(col_of_row)
    row_of = [0] * n
    for i, j in enumerate(col):
        row_of[j] = i

    def reroute(r: int, target: int, fixed_upto: int, seen: set) -> bool:
        # give row r a new column so that column `target` ends up free for r's old slot
        for j in range(n):
            if tight[r][j] and j not in seen:
                seen.add(j)
                if j == target:
                    col[r] = j
                    row_of[j] = r
                    return True
                r2 = row_of[j]
                if r2 > fixed_upto and reroute(r2, target, fixed_upto, seen):
                    col[r] = j
                    row_of[j] = r
                    return True
        return False

    for i in range(n):
        for j in range(n):
            if not tight[i][j]:
                continue
            if col[i] == j:
                break
            snapshot = (list(col), list(row_of))
            freed = col[i]
            r = row_of[j]
            if r < i:
                continue
            col[i], row_of[j] = j, i
            if reroute(r, freed, i, {j}):
                break
            col[:], row_of[:] = snapshot
    return col


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost partial assignment of an m x n cost matrix.

    Returns min(m, n) (row, col) pairs sorted by row. Among optimal
    assignments the lexicographically smallest (by row, then column) wins.
    """
    rows = [list(map(float, r)) for r in cost]
    m = len(rows)
    n = len(rows[0]) if m else 0
    if any(len(r) != n for r in rows):
        raise ValueError("cost matrix rows differ in length")
    if any(not math.isfinite(x) for r in rows for x in r):
        raise NonFiniteCostError("cost matrix contains non-finite entries")
    if m == 0 or n == 0:
        return []
    k = max(m, n)
    square = [r + [0.0] * (k - n) for r in rows] + [[0.0] * k for _ in range(k - m)]
    col, u, v = _solve(square)
    plain_total = sum(square[i][col[i]] for i in range(k))
    lex = _lexmin_tight(square, col, u, v)
    if sorted(lex) == list(range(k)) and sum(square[i][lex[i]] for i in range(k)) <= plain_total:
        col = lex
    return [(i, col[i]) for i in range(m) if col[i] < n]


def assignment_cost(cost, pairs) -> float:
    return sum(float(cost[i][j]) for i, j in pairs)


# ---------------------------------------------------------------------------
# matching


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]
    false_positives: tuple[int, ...]
    false_negatives: tuple[int, ...]


def match_boxes(pred: Sequence[Rect], gt: Sequence[Rect], floor: float = MATCH_FLOOR) -> MatchResult:
    """Optimal pairing on 1 - IoU; pairs below the IoU floor count as misses."""
    if not pred or not gt:
        return MatchResult((), tuple(range(len(pred))), tuple(range(len(gt))))
    ious = [[iou2d(p, g) for g in gt] for p in pred]
    pairs = []
    for i, j in hungarian([[1.0 - x for x in row] for row in ious]):
        if ious[i][j] >= floor:
            pairs.append((i, j, ious[i][j]))
    used_p = {i for i, _, _ in pairs}
    used_g = {j for _, j, _ in pairs}
    return MatchResult(
        tuple(pairs),
        tuple(i for i in range(len(pred)) if i not in used_p),
        tuple(j for j in range(len(gt)) if j not in used_g),
    )


# ---------------------------------------------------------------------------
# metrics


def f1(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s == 0 else 2 * precision * recall / s


@dataclass
class StratumCounts:
    n_pred: int = 0
    n_gt: int = 0
    matched: int = 0
    class_ok: int = 0
    parent_ok: int = 0
    bin_err: int = 0
    bin_count: int = 0

    def add(self, other: "StratumCounts") -> None:
        for k in asdict(self):
            setattr(self, k, getattr(self, k) + getattr(other, k))

    def metrics(self) -> dict:
        precision = self.matched / self.n_pred if self.n_pred else 1.0
        recall = self.matched / self.n_gt if self.n_gt else 1.0
        return {
            "mesh_acc": self.class_ok / self.matched if self.matched else None,
            "parent_acc": self.parent_ok / self.matched if self.matched else None,
            "spatial_err": self.bin_err / self.bin_count if self.bin_count else None,
            "recall": recall,
            "precision": precision,
            "f1": f1(precision, recall),
        }


@dataclass
class EvalReport:
    counts: dict[str, StratumCounts] = field(default_factory=lambda: {s: StratumCounts() for s in STRATA})

    def __getitem__(self, stratum: str) -> dict:
        return self.counts[stratum].metrics()

    def merge(self, other: "EvalReport") -> None:
        for s in STRATA:
            self.counts[s].add(other.counts[s])

    def to_dict(self) -> dict:
        return {s: {"metrics": self[s], "counts": asdict(self.counts[s])} for s in STRATA}


@dataclass(frozen=True)
class LabeledScene:
    """A scene plus one image box per node (indexed by node id)."""

    scene: SceneDescriptor
    boxes: tuple[Rect, ...]

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(tuple(float(x) for x in b) for b in self.boxes))
        if len(self.boxes) != len(self.scene.objects):
            raise IdMismatchError(f"{len(self.boxes)} boxes for {len(self.scene.objects)} nodes")

    def to_dict(self) -> dict:
        return {"scene": scene_to_dict(self.scene), "boxes": [list(b) for b in self.boxes]}

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledScene":
        return cls(scene_from_dict(d["scene"]), tuple(d["boxes"]))

    @classmethod
    def loads(cls, text: str) -> "LabeledScene":
        return cls.from_dict(json.loads(text))


def node_bins(scene: SceneDescriptor) -> list[tuple[int, ...]]:
    """12-bin parent-relative coordinates per node; handles and knobs keep only their center."""
    out = []
    for node, r in zip(scene.objects, node_regions(scene)):
        r = tuple(min(1.0, max(0.0, x)) for x in r)
        if node.cls.is_point:
            out.append((quantize((r[0] + r[2]) / 2), quantize((r[1] + r[3]) / 2)))
        else:
            out.append(tuple(quantize(x) for x in r))
    return out


def _center_bins(b: tuple[int, ...]) -> tuple[int, ...]:
    if len(b) == 2:
        return b
    # center of the bin span, back in bin units
    return (min(BINS - 1, (b[0] + b[2] + 1) // 2), min(BINS - 1, (b[1] + b[3] + 1) // 2))


def _stratum_ids(scene: SceneDescriptor, stratum: str) -> list[int]:
    want_part = stratum == "parts"
    return [n.id for n in scene.objects if n.cls.is_part == want_part]


def evaluate(pred: LabeledScene, gt: LabeledScene, floor: float = MATCH_FLOOR) -> EvalReport:
    report = EvalReport()
    match: dict[int, int] = {}
    per_stratum: dict[str, list[tuple[int, int]]] = {}
    for s in STRATA:
        p_ids = _stratum_ids(pred.scene, s)
        g_ids = _stratum_ids(gt.scene, s)
        res = match_boxes([pred.boxes[i] for i in p_ids], [gt.boxes[j] for j in g_ids], floor)
        pairs = [(p_ids[a], g_ids[b]) for a, b, _ in res.pairs]
        per_stratum[s] = pairs
        match.update(pairs)
        c = report.counts[s]
        c.n_pred, c.n_gt, c.matched = len(p_ids), len(g_ids), len(pairs)

    p_bins = node_bins(pred.scene)
    g_bins = node_bins(gt.scene)
    for s in STRATA:
        c = report.counts[s]
        for pi, gi in per_stratum[s]:
            pn, gn = pred.scene.objects[pi], gt.scene.objects[gi]
            c.class_ok += pn.cls == gn.cls
            if pn.parent.root is not None or gn.parent.root is not None:
                c.parent_ok += pn.parent.root is not None and pn.parent.root == gn.parent.root
            else:
                c.parent_ok += match.get(pn.parent.object) == gn.parent.object
            pb, gb = p_bins[pi], g_bins[gi]
            if gn.cls.is_point or pn.cls.is_point:
                pb, gb = _center_bins(pb), _center_bins(gb)
            c.bin_err += sum(abs(a - b) for a, b in zip(pb, gb))
            c.bin_count += len(gb)
    return report


def evaluate_dataset(pairs: Sequence[tuple[LabeledScene, LabeledScene]], floor: float = MATCH_FLOOR) -> EvalReport:
    """Micro-averaged report: counts are pooled over all scenes before dividing."""
    total = EvalReport()
    for pred, gt in pairs:
        total.merge(evaluate(pred, gt, floor))
    return total


# ---------------------------------------------------------------------------
# synthetic image boxes and table output


def layout_boxes(scene: SceneDescriptor) -> tuple[Rect, ...]:
    """Deterministic stand-in image boxes: the room unrolled into six panels.

    Objects sit in their root's panel (or inside their parent object's box)
    and parts inside their object's box, exactly as ``encode_scene`` lays
    them out, so a lossless prediction scores perfectly.
    """
    return tuple(scene_image_boxes(scene))


def labeled(scene: SceneDescriptor) -> LabeledScene:
    return LabeledScene(scene, layout_boxes(scene))


_COLUMNS = (("mesh_acc", "Mesh Acc"), ("parent_acc", "Parent Acc"), ("spatial_err", "Spatial Err"),
            ("recall", "Recall"), ("precision", "Precision"))


def format_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Aligned text table: one row per method, global columns then part columns."""
    def cell(x: Optional[float]) -> str:
        return "-" if x is None else f"{x:.3f}"

    heads = [h for _, h in _COLUMNS]
    name_w = max([len("Method")] + [len(n) for n, _ in rows])
    widths = [max(len(h), 5) for h in heads]
    block = "  ".join(h.rjust(w) for h, w in zip(heads, widths))
    half = len(block)
    lines = [
        " " * name_w + " | " + "Global".center(half) + " | " + "Part".center(half),
        "Method".ljust(name_w) + " | " + block + " | " + block,
        "-" * (name_w + 6 + 2 * half),
    ]
    for name, rep in rows:
        cells = []
        for s in STRATA:
            m = rep[s]
            cells.append("  ".join(cell(m[k]).rjust(w) for (k, _), w in zip(_COLUMNS, widths)))
        lines.append(name.ljust(name_w) + " | " + cells[0] + " | " + cells[1])
    return "\n".join(lines) + "\n"
