import numpy as np
import pytest

from urdforge.compositor import (
    Camera,
    Homography,
    Quad2,
    RasterImage,
    TextureLibrary,
    boundary_mask,
    composite_object_image,
    emit_masks,
    frontal_camera,
    homography_from_correspondences,
    project_face,
    quad_mask,
    texture_corners,
    texture_preset,
    warp_texture,
)
from urdforge.errors import BehindCameraError, DegenerateConfigurationError, EmptyLibraryError
from urdforge.procgen import GenConfig, sample_object
from urdforge.scene import BBox3, SceneDescriptor, Transform

cv2 = pytest.importorskip("cv2")

# local x -> world -z (towards the camera), y -> world x, z -> world -y
FACING = np.array([[0, 1, 0, 0], [0, 0, -1, 0], [-1, 0, 0, 1.0], [0, 0, 0, 1]], dtype=float)


def _camera(w=100, h=100):
    return Camera(100.0, 100.0, 50.0, 50.0, Transform(), w, h)


def test_pinhole_unit_square():
    quad = project_face(BBox3((-0.05, 0.0, 0.0), (0.1, 1.0, 1.0)), FACING, _camera())
    pts = np.array(quad.points)
    assert pts.min(axis=0) == pytest.approx((0.0, 0.0))
    assert pts.max(axis=0) == pytest.approx((100.0, 100.0))
    assert pts.mean(axis=0) == pytest.approx((50.0, 50.0))
    assert quad.area == pytest.approx(10000.0)
    assert quad.ccw


def test_behind_camera():
    with pytest.raises(BehindCameraError):
        _camera().project(np.array([[0.0, 0.0, -1.0]]))


def test_identity_homography():
    src = [(0, 0), (0, 1), (1, 1), (1, 0)]
    H = homography_from_correspondences(src, src)
    assert np.allclose(H.matrix, np.eye(3), atol=1e-12)


def test_collinear_points_rejected():
    with pytest.raises(DegenerateConfigurationError):
        homography_from_correspondences([(0, 0), (1, 1), (2, 2), (3, 3)], [(0, 0), (0, 1), (1, 1), (1, 0)])


@pytest.mark.parametrize("seed", range(25))
def test_homography_agrees_with_opencv(seed):
    rng = np.random.default_rng(seed)
    src = np.array([(0, 0), (0, 1), (1, 1), (1, 0)], dtype=float)
    dst = src * rng.uniform(50, 200) + rng.uniform(-20, 20, size=(4, 2))
    ours = homography_from_correspondences(src, dst).matrix
    ref = cv2.getPerspectiveTransform(src.astype(np.float32), dst.astype(np.float32))
    assert np.allclose(ours / ours[2, 2], ref / ref[2, 2], rtol=1e-4, atol=1e-4)


def test_homography_inverse():
    H = Homography(np.array([[2.0, 0.1, 3.0], [0.0, 1.5, -1.0], [0.001, 0.002, 1.0]]))
    pts = np.array([[0.3, 0.7], [10.0, -4.0]])
    assert np.allclose(H.inverse().apply(H.apply(pts)), pts)


def _checker(w, h):
    a = np.zeros((h, w, 4), dtype=np.uint8)
    y, x = np.mgrid[0:h, 0:w]
    a[..., 0] = (x * 7 + y * 3) % 256
    a[..., 1] = (x * y) % 256
    a[..., 2] = 255 * ((x // 4 + y // 4) % 2)
    a[..., 3] = 255
    return RasterImage(a)


def test_identity_warp_copies_texture():
    tex = _checker(32, 24)
    quad = Quad2(tuple(map(tuple, texture_corners(tex))))
    out, stats = warp_texture(tex, quad, RasterImage.blank(32, 24))
    assert np.array_equal(out.data, tex.data)
    assert stats.written == 32 * 24 and stats.clipped == 0


def test_png_round_trip(tmp_path):
    img = _checker(9, 5)
    img.save(tmp_path / "x.png")
    assert np.array_equal(RasterImage.load(tmp_path / "x.png").data, img.data)


def test_empty_scene_background():
    ms = emit_masks(SceneDescriptor(), _camera())
    assert ms.masks == {}
    assert ms.background.all()


def test_masks_partition_image():
    scene = sample_object("cabinet", GenConfig(), 4)
    cam = frontal_camera(scene, width=96, height=96)
    ms = emit_masks(scene, cam)
    total = ms.background.astype(int)
    for m in ms.masks.values():
        total += m
    assert (total == 1).all()
    # every part is visible from straight ahead
    for n in scene.objects:
        if n.cls.is_part:
            assert ms.masks[n.id].any(), n
    assert boundary_mask(scene, cam).shape == (96, 96)


def test_single_texture_composite():
    scene = sample_object("dishwasher", GenConfig(handle_prob=0.0, knob_prob=0.0), 2)
    tex = _checker(16, 16)
    lib = TextureLibrary(("only",), (tex,))
    cam = frontal_camera(scene, width=80, height=80)
    image, entry, used = composite_object_image(scene, cam, lib, 0)
    assert set(used.values()) == {"only"}
    assert entry.kind == "object_pair"
    door = next(i for i in used)
    colours = {tuple(c) for c in image.data[emit_masks(scene, cam).masks[door]]}
    assert len(colours) > 4


def test_composite_deterministic_and_needs_textures():
    scene = sample_object("cabinet", GenConfig(), 11)
    cam = frontal_camera(scene, width=64, height=64)
    lib = texture_preset(size=16)
    a, _, _ = composite_object_image(scene, cam, lib, 5)
    b, _, _ = composite_object_image(scene, cam, lib, 5)
    assert a.to_png() == b.to_png()
    with pytest.raises(EmptyLibraryError):
        composite_object_image(scene, cam, TextureLibrary((), ()), 0)


@pytest.mark.parametrize("seed", range(20))
def test_fit_apply_refit_fixpoint(seed):
    rng = np.random.default_rng(seed)
    src = rng.uniform(0, 1, size=(4, 2)) + np.array([(0, 0), (0, 2), (2, 2), (2, 0)])
    dst = rng.uniform(0, 50, size=(4, 2)) + np.array([(0, 0), (0, 100), (100, 100), (100, 0)])
    H = homography_from_correspondences(src, dst)
    again = homography_from_correspondences(src, H.apply(src))
    assert np.allclose(again.matrix, H.matrix, atol=1e-6)


def test_warp_leaves_outside_untouched():
    target = _checker(40, 40)
    quad = Quad2(((10.0, 8.0), (12.0, 30.0), (31.0, 27.0), (28.0, 11.0)))
    out, _ = warp_texture(_checker(8, 8), quad, target)
    outside = ~quad_mask(quad, 40, 40)
    assert np.array_equal(out.data[outside], target.data[outside])


@pytest.mark.parametrize("s", [0.5, 2.0, 7.0])
def test_projection_scale_equivariance(s):
    bbox = BBox3((-0.05, 0.1, 0.2), (0.1, 1.2, 0.8))
    pose = FACING.copy()
    pose[:3, 3] = (0.3, -0.2, 2.0)
    scaled_pose = pose.copy()
    scaled_pose[:3, 3] *= s
    scaled = BBox3(tuple(c * s for c in bbox.center), tuple(v * s for v in bbox.size))
    a = np.array(project_face(bbox, pose, _camera()).points)
    b = np.array(project_face(scaled, scaled_pose, _camera()).points)
    assert np.allclose(a, b, atol=1e-9)
