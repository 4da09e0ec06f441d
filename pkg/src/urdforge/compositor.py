"""Image-side geometry for building training pairs.

Part faces are projected through a pinhole camera, texture tiles are
perspective-warped onto the resulting quads, and masks are emitted so an
external inpainting tool can blend seams and fill the background. No
generative model runs in this process.

Camera convention: x right, y down, z forward (OpenCV). Quads list their
corners as top-left, bottom-left, bottom-right, top-right of the face,
which is counter-clockwise as seen on screen.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import BehindCameraError, DegenerateConfigurationError, EmptyLibraryError
from .geometry import face_corners, matrix_to_transform, transform_matrix, tree_depth, world_poses
from .rng import Rng, child_seed
from .scene import BBox3, ManifestEntry, SceneDescriptor, Transform

MIN_DEPTH = 1e-6
BACKGROUND = (235, 235, 235, 255)
BODY = (150, 150, 150, 255)
GRIP = (40, 40, 40, 255)


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    pose: Transform  # world -> camera
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        M = transform_matrix(self.pose)
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return pts @ M[:3, :3].T + M[:3, 3]

    def project(self, points: np.ndarray) -> np.ndarray:
        """Pixel coordinates of world points; raises if any lies behind the camera."""
        pc = self.to_camera(points)
        if np.any(pc[:, 2] <= MIN_DEPTH):
            raise BehindCameraError(f"point at camera depth {pc[:, 2].min():.3g}")
        return np.stack([self.fx * pc[:, 0] / pc[:, 2] + self.cx, self.fy * pc[:, 1] / pc[:, 2] + self.cy], axis=1)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "pose": {"xyz": list(self.pose.xyz), "rpy": list(self.pose.rpy)},
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        pose = d["pose"]
        return cls(
            float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
            Transform(tuple(pose["xyz"]), tuple(pose.get("rpy", (0.0, 0.0, 0.0)))),
            int(d["width"]), int(d["height"]),
        )


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Transform:
    """World-to-camera pose for a camera at ``eye`` looking at ``target``."""
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-12:
        raise DegenerateConfigurationError("view direction parallel to up vector")
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    M = np.eye(4)
    M[:3, :3] = np.stack([x, y, z])
    M[:3, 3] = -M[:3, :3] @ eye
    return matrix_to_transform(M)


def frontal_camera(
    scene: SceneDescriptor,
    index: int = 0,
    width: int = 256,
    height: int = 256,
    fov_deg: float = 50.0,
    yaw: float = 0.0,
    pitch: float = 0.0,
    margin: float = 1.25,
) -> Camera:
    """Camera facing a node's front face, optionally swung by yaw/pitch (radians) about its center."""
    pose = world_poses(scene)[index]
    bbox = scene.objects[index].bbox
    corners = (pose @ np.c_[face_corners(bbox), np.ones(4)].T).T[:, :3]
    center = corners.mean(axis=0)
    normal = pose[:3, 0]
    side = pose[:3, 1]
    up = pose[:3, 2]
    f = (min(width, height) / 2) / math.tan(math.radians(fov_deg) / 2)
    extent = max(bbox.size[1], bbox.size[2]) * margin
    dist = extent / 2 * f / (min(width, height) / 2) + 0.1
    d = normal * math.cos(yaw) * math.cos(pitch) + side * math.sin(yaw) * math.cos(pitch) + up * math.sin(pitch)
    eye = center + d * dist
    return Camera(f, f, width / 2, height / 2, look_at(eye, center, up=tuple(up)), width, height)


# ---------------------------------------------------------------------------
# quads and homographies


def _cross2(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_cross(p1, p2, p3, p4) -> bool:
    d1, d2 = _cross2(p3, p4, p1), _cross2(p3, p4, p2)
    d3, d4 = _cross2(p1, p2, p3), _cross2(p1, p2, p4)
    return d1 * d2 < 0 and d3 * d4 < 0


@dataclass(frozen=True)
class Quad2:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) != 4:
            raise ValueError("a quad has four corners")
        if abs(self.signed_area) <= 1e-12:
            raise ValueError("quad has zero area")
        if _segments_cross(pts[0], pts[1], pts[2], pts[3]) or _segments_cross(pts[1], pts[2], pts[3], pts[0]):
            raise ValueError("quad is self-intersecting")

    @property
    def signed_area(self) -> float:
        """Shoelace area in image coordinates; negative means counter-clockwise on screen."""
        p = self.points
        return 0.5 * sum(p[i][0] * p[(i + 1) % 4][1] - p[(i + 1) % 4][0] * p[i][1] for i in range(4))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def ccw(self) -> bool:
        return self.signed_area < 0

    def contains(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Even-odd test with boundary points counted inside."""
        inside = np.zeros(xs.shape, dtype=bool)
        on_edge = np.zeros(xs.shape, dtype=bool)
        p = self.points
        for i in range(4):
            (x1, y1), (x2, y2) = p[i], p[(i + 1) % 4]
            cond = (y1 > ys) != (y2 > ys)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
            inside ^= cond & (xs < xint)
            cross = (x2 - x1) * (ys - y1) - (y2 - y1) * (xs - x1)
            seg = math.hypot(x2 - x1, y2 - y1)
            within = (
                (np.minimum(x1, x2) - 1e-9 <= xs) & (xs <= np.maximum(x1, x2) + 1e-9)
                & (np.minimum(y1, y2) - 1e-9 <= ys) & (ys <= np.maximum(y1, y2) + 1e-9)
            )
            on_edge |= within & (np.abs(cross) <= 1e-9 * max(seg, 1.0))
        return inside | on_edge


def project_face(bbox: BBox3, pose: np.ndarray, camera: Camera) -> Quad2:
    """Project the front face of ``bbox`` (local frame with world pose ``pose``)."""
    local = np.c_[face_corners(bbox), np.ones(4)]
    world = (np.asarray(pose) @ local.T).T[:, :3]
    return Quad2(tuple(map(tuple, camera.project(world))))


@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray

    def __post_init__(self):
        H = np.array(self.matrix, dtype=float).reshape(3, 3)
        if abs(H[2, 2]) < 1e-15:
            raise DegenerateConfigurationError("h33 vanishes; cannot normalize")
        H = H / H[2, 2]
        if abs(np.linalg.det(H)) <= 1e-12:
            raise DegenerateConfigurationError("homography is singular")
        H.setflags(write=False)
        object.__setattr__(self, "matrix", H)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        h = np.c_[pts, np.ones(len(pts))] @ self.matrix.T
        return h[:, :2] / h[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


def _collinear(pts: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(pts).max()))
    for i in range(4):
        a, b, c = (pts[k] for k in range(4) if k != i)
        if abs(_cross2(a, b, c)) <= 1e-12 * scale * scale:
            return True
    return False


def _normalizer(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def homography_from_correspondences(src, dst) -> Homography:
    """Exact 4-point fit: h33 = 1 and the remaining 8 entries from an 8x8 linear solve.

    Both point sets are first moved to zero mean and unit scale for
    conditioning; the result maps ``src[i]`` onto ``dst[i]``.
    """
    src = np.asarray(src, dtype=float).reshape(4, 2)
    dst = np.asarray(dst, dtype=float).reshape(4, 2)
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise DegenerateConfigurationError("non-finite correspondence")
    if _collinear(src) or _collinear(dst):
        raise DegenerateConfigurationError("three of the four points are collinear")
    Ts, Td = _normalizer(src), _normalizer(dst)
    s = (np.c_[src, np.ones(4)] @ Ts.T)[:, :2]
    d = (np.c_[dst, np.ones(4)] @ Td.T)[:, :2]
    A = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(s, d)):
        A[2 * i] = (x, y, 1, 0, 0, 0, -x * u, -y * u)
        A[2 * i + 1] = (0, 0, 0, x, y, 1, -x * v, -y * v)
        b[2 * i], b[2 * i + 1] = u, v
    try:
        h = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfigurationError(str(exc)) from exc
    Hn = np.append(h, 1.0).reshape(3, 3)
    return Homography(np.linalg.inv(Td) @ Hn @ Ts)


# ---------------------------------------------------------------------------
# raster images


@dataclass(frozen=True, eq=False)
class RasterImage:
    """RGBA8 image; ``data`` has shape (height, width, 4)."""

    data: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.data, dtype=np.uint8)
        if a.ndim != 3 or a.shape[2] != 4 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"expected an (h, w, 4) array, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @classmethod
    def blank(cls, width: int, height: int, color=(0, 0, 0, 0)) -> "RasterImage":
        a = np.empty((height, width, 4), dtype=np.uint8)
        a[:] = color
        return cls(a)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> bytes:
        return self.data.tobytes()

    def __eq__(self, other):
        return isinstance(other, RasterImage) and np.array_equal(self.data, other.data)

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.data, "RGBA").save(buf, format="PNG", optimize=False)
        return buf.getvalue()

    @classmethod
    def from_png(cls, data: bytes) -> "RasterImage":
        return cls(np.asarray(Image.open(io.BytesIO(data)).convert("RGBA")))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_png())

    @classmethod
    def load(cls, path) -> "RasterImage":
        return cls.from_png(Path(path).read_bytes())


@dataclass(frozen=True)
class WarpStats:
    written: int
    clipped: int  # approximate count of quad pixels falling outside the target


def _pixel_grid(quad: Quad2, width: int, height: int):
    xs = [p[0] for p in quad.points]
    ys = [p[1] for p in quad.points]
    x0, x1 = max(0, int(math.floor(min(xs)))), min(width, int(math.ceil(max(xs))) + 1)
    y0, y1 = max(0, int(math.floor(min(ys)))), min(height, int(math.ceil(max(ys))) + 1)
    if x0 >= x1 or y0 >= y1:
        return None
    gy, gx = np.mgrid[y0:y1, x0:x1]
    cx, cy = gx + 0.5, gy + 0.5
    inside = quad.contains(cx, cy)
    return gx[inside], gy[inside], cx[inside], cy[inside]


def quad_mask(quad: Quad2, width: int, height: int) -> np.ndarray:
    """Pixels whose centers fall inside the quad."""
    mask = np.zeros((height, width), dtype=bool)
    grid = _pixel_grid(quad, width, height)
    if grid is not None:
        mask[grid[1], grid[0]] = True
    return mask


def _bilinear(tex: np.ndarray, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    h, w = tex.shape[:2]
    s = np.clip(s - 0.5, 0.0, w - 1.0)
    t = np.clip(t - 0.5, 0.0, h - 1.0)
    s0 = np.floor(s).astype(int)
    t0 = np.floor(t).astype(int)
    s1 = np.minimum(s0 + 1, w - 1)
    t1 = np.minimum(t0 + 1, h - 1)
    fs = (s - s0)[:, None]
    ft = (t - t0)[:, None]
    tex = tex.astype(float)
    top = tex[t0, s0] * (1 - fs) + tex[t0, s1] * fs
    bottom = tex[t1, s0] * (1 - fs) + tex[t1, s1] * fs
    return top * (1 - ft) + bottom * ft


def texture_corners(texture: RasterImage) -> np.ndarray:
    """Texture rectangle corners in quad order: TL, BL, BR, TR (pixel-edge coordinates)."""
    w, h = texture.width, texture.height
    return np.array([(0.0, 0.0), (0.0, h), (w, h), (w, 0.0)])


def warp_texture(texture: RasterImage, dst: Quad2, target: RasterImage) -> tuple[RasterImage, WarpStats]:
    """Paint ``texture`` onto ``dst`` inside a copy of ``target``."""
    H = homography_from_correspondences(texture_corners(texture), dst.points)
    Hinv = H.inverse()
    out = target.data.copy()
    grid = _pixel_grid(dst, target.width, target.height)
    written = 0
    if grid is not None:
        gx, gy, cx, cy = grid
        st = Hinv.apply(np.stack([cx, cy], axis=1))
        colors = _bilinear(texture.data, st[:, 0], st[:, 1])
        out[gy, gx] = np.clip(np.rint(colors), 0, 255).astype(np.uint8)
        written = len(gx)
    return RasterImage(out), WarpStats(written, max(0, int(round(dst.area)) - written))


def fill_quad(target: RasterImage, quad: Quad2, color) -> RasterImage:
    out = target.data.copy()
    out[quad_mask(quad, target.width, target.height)] = color
    return RasterImage(out)


# ---------------------------------------------------------------------------
# masks and compositing


@dataclass
class MaskSet:
    masks: dict[int, np.ndarray]  # node id -> bool (h, w)
    background: np.ndarray
    skipped: list[int] = field(default_factory=list)  # behind the camera or seen from behind


def _draw_order(scene: SceneDescriptor, camera: Camera) -> tuple[list[tuple[int, Quad2]], list[int]]:
    """Visible front faces in painter's order.

    Objects go far to near by face-centroid depth. Each object's parts
    follow it, shallower tree levels first, then far to near: a door face is
    coplanar with its body, so centroid depth alone cannot order them.
    """
    poses = world_poses(scene)
    depth = tree_depth(scene)
    owner: list[int] = []
    for node in scene.objects:
        owner.append(owner[node.parent.object] if node.cls.is_part else node.id)
    zs: dict[int, float] = {}
    quads: dict[int, Quad2] = {}
    skipped = []
    for node, pose in zip(scene.objects, poses):
        local = np.c_[face_corners(node.bbox), np.ones(4)]
        zs[node.id] = round(float(camera.to_camera((pose @ local.T).T[:, :3])[:, 2].mean()), 6)
        try:
            quad = project_face(node.bbox, pose, camera)
        except (BehindCameraError, ValueError):
            skipped.append(node.id)
            continue
        if not quad.ccw:
            skipped.append(node.id)
            continue
        quads[node.id] = quad
    keys = {
        i: (-zs[owner[i]], owner[i], depth[i], -zs[i], i) for i in quads
    }
    order = sorted(quads, key=keys.__getitem__)
    return [(i, quads[i]) for i in order], skipped


def emit_masks(scene: SceneDescriptor, camera: Camera) -> MaskSet:
    """One mask per visible node face after occlusion, plus the uncovered background."""
    label = np.full((camera.height, camera.width), -1, dtype=int)
    order, skipped = _draw_order(scene, camera)
    for node_id, quad in order:
        label[quad_mask(quad, camera.width, camera.height)] = node_id
    masks = {node_id: label == node_id for node_id, _ in order}
    return MaskSet(masks, label == -1, skipped)


def mask_image(mask: np.ndarray) -> RasterImage:
    a = np.zeros(mask.shape + (4,), dtype=np.uint8)
    a[mask] = (255, 255, 255, 255)
    a[~mask] = (0, 0, 0, 255)
    return RasterImage(a)


@dataclass(frozen=True)
class TextureLibrary:
    names: tuple[str, ...]
    images: tuple[RasterImage, ...]

    def __post_init__(self):
        if len(self.names) != len(self.images):
            raise ValueError("names and images differ in length")

    def __len__(self) -> int:
        return len(self.images)

    @classmethod
    def from_dir(cls, path) -> "TextureLibrary":
        files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".png")
        return cls(tuple(p.stem for p in files), tuple(RasterImage.load(p) for p in files))


def _procedural_texture(seed: int, size: int) -> RasterImage:
    rng = np.random.default_rng(seed)
    base = rng.uniform(60, 220, size=3)
    tint = rng.uniform(-40, 40, size=3)
    freq = rng.uniform(2, 12)
    angle = rng.uniform(0, math.pi)
    y, x = np.mgrid[0:size, 0:size] / size
    grain = np.sin((x * math.cos(angle) + y * math.sin(angle)) * freq * 2 * math.pi + rng.uniform(0, 6.3))
    noise = rng.normal(0, 6, size=(size, size, 1))
    rgb = base + grain[..., None] * tint + noise
    a = np.empty((size, size, 4), dtype=np.uint8)
    a[..., :3] = np.clip(np.rint(rgb), 0, 255)
    a[..., 3] = 255
    return RasterImage(a)


def texture_preset(name: str = "initial-100", size: int = 64) -> TextureLibrary:
    """Built-in procedural stand-ins for a seed set of texture photos."""
    if name != "initial-100":
        raise ValueError(f"unknown texture preset {name!r}")
    names = tuple(f"texture_{i:03d}" for i in range(100))
    return TextureLibrary(names, tuple(_procedural_texture(child_seed(100, i) & 0xFFFFFFFF, size) for i in range(100)))


def composite_object_image(
    scene: SceneDescriptor, camera: Camera, textures: TextureLibrary, seed: int
) -> tuple[RasterImage, ManifestEntry, dict[int, str]]:
    """Flat body, one seeded texture per door/drawer, dark grips.

    Returns the image, its manifest entry and the texture chosen per part.
    """
    if scene.completeness != "object_partial":
        raise ValueError("compositing needs an object_partial scene")
    if len(textures) == 0:
        raise EmptyLibraryError("texture library is empty")
    rng = Rng(seed)
    choice = {n.id: rng.below(len(textures)) for n in scene.objects if n.cls.is_part and not n.cls.is_point}
    image = RasterImage.blank(camera.width, camera.height, BACKGROUND)
    order, _ = _draw_order(scene, camera)
    for node_id, quad in order:
        node = scene.objects[node_id]
        if node_id in choice:
            image, _ = warp_texture(textures.images[choice[node_id]], quad, image)
        elif node.cls.is_point:
            image = fill_quad(image, quad, GRIP)
        else:
            image = fill_quad(image, quad, BODY)
    used = {i: textures.names[k] for i, k in choice.items()}
    return image, ManifestEntry(None, scene, "object_pair"), used


def inpaint_job(image_path: str, mask_path: str, prompt: str) -> dict:
    """Job record for an external inpainting tool."""
    return {"image": str(image_path), "mask": str(mask_path), "prompt": prompt}


def write_inpaint_jobs(path, jobs: Sequence[dict]) -> None:
    Path(path).write_text(json.dumps({"version": 1, "jobs": list(jobs)}, indent=1) + "\n")


def boundary_mask(scene: SceneDescriptor, camera: Camera, width_px: int = 2) -> np.ndarray:
    """Pixels near part seams and the background, the region to hand to an inpainter."""
    ms = emit_masks(scene, camera)
    label = np.full((camera.height, camera.width), -1, dtype=int)
    for nid, m in ms.masks.items():
        label[m] = nid
    edge = np.zeros_like(ms.background)
    edge[:, 1:] |= label[:, 1:] != label[:, :-1]
    edge[1:, :] |= label[1:, :] != label[:-1, :]
    grown = edge.copy()
    for _ in range(max(0, width_px - 1)):
        g = grown.copy()
        g[1:] |= grown[:-1]
        g[:-1] |= grown[1:]
        g[:, 1:] |= grown[:, :-1]
        g[:, :-1] |= grown[:, 1:]
        grown = g
    return grown | ms.background
