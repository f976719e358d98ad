from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uvforge.camera import Perspective, Viewpoint
from uvforge.errors import DimensionMismatch
from uvforge.geometry import load_mesh, load_mesh_text
from uvforge.raster import DepthMap, RgbImage, render_textured
from uvforge.uvspace import (
    PositionMap,
    TextureAtlas,
    UvGeometry,
    UvMask,
    backproject,
    dilate_seams,
    fuse,
    rasterize_chart_coverage,
    rasterize_position_map,
    write_position_map_png,
)
from uvforge import pngio

FIXTURES = Path(__file__).parent / "fixtures"

CUBE_ISLAND_FACES = {
    "front": (0, 1),
    "back": (2, 3),
    "right": (4, 5),
    "top": (6, 7),
    "left": (8, 9),
    "bottom": (10, 11),
}


def front_camera() -> Viewpoint:
    return Viewpoint(
        eye=np.array([0.0, 0.0, 2.2]),
        target=np.zeros(3),
        up=np.array([0.0, 1.0, 0.0]),
        projection=Perspective(50.0),
        label="front",
    )


def island_mask(geometry: UvGeometry, name: str) -> np.ndarray:
    a, b = CUBE_ISLAND_FACES[name]
    return (geometry.face_index == a) | (geometry.face_index == b)


def test_chart_coverage_quad_full():
    mesh = load_mesh(FIXTURES / "quad.obj")
    mask = rasterize_chart_coverage(mesh, 64)
    assert mask.values.all()


def test_chart_coverage_cube_matches_analytic_area():
    mesh = load_mesh(FIXTURES / "cube.obj")
    mask = rasterize_chart_coverage(mesh, 512)
    frac = mask.values.mean()
    assert abs(frac - 6 * (18 / 64) ** 2) < 0.01


def test_chart_coverage_respects_island_gaps():
    mesh = load_mesh(FIXTURES / "cube.obj")
    geometry = UvGeometry.build(mesh, 512)
    # gap columns between islands must stay empty
    assert not geometry.chart[:, 161:175].any()
    assert not geometry.chart[:8, :].any()


def test_position_map_cube_corner():
    mesh = load_mesh(FIXTURES / "cube.obj")
    pm = rasterize_position_map(mesh, 512)
    corner = np.array([-0.5, -0.5, -0.5])
    target_uv = None
    cuv = mesh.corner_uvs()
    cpos = mesh.corner_positions()
    for f in range(mesh.face_count):
        for c in range(3):
            if np.allclose(cpos[f, c], corner):
                target_uv = cuv[f, c]
                break
        if target_uv is not None:
            break
    assert target_uv is not None
    ys, xs = np.nonzero(pm.coverage)
    centers = np.stack([xs + 0.5, ys + 0.5], axis=1)
    nearest = np.argmin(np.sum((centers - target_uv * 512) ** 2, axis=1))
    value = pm.values[ys[nearest], xs[nearest]]
    assert np.max(np.abs(value - [0.0, 0.0, 0.0])) < 0.01


def test_position_map_front_face_center():
    mesh = load_mesh(FIXTURES / "cube.obj")
    geometry = UvGeometry.build(mesh, 512)
    pm = rasterize_position_map(mesh, 512, geometry=geometry)
    front = island_mask(geometry, "front")
    ys, xs = np.nonzero(front)
    cy, cx = int(np.mean(ys)), int(np.mean(xs))
    assert np.max(np.abs(pm.values[cy, cx] - [0.5, 0.5, 1.0])) < 0.01


def test_position_map_background_zero():
    mesh = load_mesh(FIXTURES / "cube.obj")
    pm = rasterize_position_map(mesh, 256)
    assert not pm.coverage[0, 0]
    assert np.all(pm.values[~pm.coverage] == 0.0)
    covered = pm.values[pm.coverage]
    assert covered.min() >= 0.0 and covered.max() <= 1.0


def test_position_map_adjacent_texels_lipschitz():
    mesh = load_mesh(FIXTURES / "cube.obj")
    geometry = UvGeometry.build(mesh, 512)
    pm = rasterize_position_map(mesh, 512, geometry=geometry)
    island = geometry.face_index // 2
    island[~geometry.chart] = -1
    # a cube face spans 1.0 world units across 144 texels at this resolution
    bound = 2.0 / 144 + 1e-5
    for axis in (0, 1):
        a = pm.values if axis == 0 else np.swapaxes(pm.values, 0, 1)
        isl = island if axis == 0 else island.T
        same = (isl[:-1, :] == isl[1:, :]) & (isl[:-1, :] >= 0)
        diffs = np.abs(a[:-1] - a[1:])[same]
        assert diffs.size > 0
        assert float(diffs.max()) <= bound


def test_uv_geometry_deterministic():
    mesh = load_mesh(FIXTURES / "cube.obj")
    a = UvGeometry.build(mesh, 256)
    b = UvGeometry.build(mesh, 256)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert np.array_equal(a.face_index, b.face_index)


def test_backproject_round_trip_quad():
    mesh = load_mesh(FIXTURES / "quad.obj")
    res = 64
    atlas = TextureAtlas(np.full((res, res, 3), [0.1, 0.8, 0.2], dtype=np.float32))
    colored = UvMask(np.ones((res, res), dtype=bool))
    cam = front_camera()
    rgb, _, depth = render_textured(mesh, atlas, colored, cam, (512, 512))
    out_atlas, out_mask = backproject(mesh, rgb, cam, depth, res)
    assert out_mask.values.any()
    got = out_atlas.values[out_mask.values]
    assert np.max(np.abs(got - np.float32([0.1, 0.8, 0.2]))) <= 2 / 255


def test_backproject_facing_rejects_back_island():
    mesh = load_mesh(FIXTURES / "cube.obj")
    geometry = UvGeometry.build(mesh, 256)
    palette = np.linspace(0.1, 0.9, 18, dtype=np.float32).reshape(6, 3)
    values = np.zeros((256, 256, 3), dtype=np.float32)
    for k, name in enumerate(CUBE_ISLAND_FACES):
        values[island_mask(geometry, name)] = palette[k]
    atlas = TextureAtlas(values)
    colored = UvMask(geometry.chart.copy())
    cam = front_camera()
    rgb, _, depth = render_textured(mesh, atlas, colored, cam, (512, 512))
    _, mask = backproject(mesh, rgb, cam, depth, 256, geometry=geometry)

    front = island_mask(geometry, "front")
    assert not np.any(mask.values & ~front)
    assert mask.values[front].mean() > 0.9


def test_backproject_validity_subset_of_chart():
    mesh = load_mesh(FIXTURES / "cube.obj")
    geometry = UvGeometry.build(mesh, 128)
    cam = front_camera()
    atlas = TextureAtlas(np.full((128, 128, 3), 0.5, dtype=np.float32))
    rgb, _, depth = render_textured(
        mesh, atlas, UvMask(geometry.chart.copy()), cam, (256, 256)
    )
    _, mask = backproject(mesh, rgb, cam, depth, 128, geometry=geometry)
    assert not np.any(mask.values & ~geometry.chart)


def test_backproject_depth_test_rejects_occluded():
    # two stacked quads with separate islands; the rear one is fully hidden
    text = (
        "v -0.45 -0.45 0.25\nv 0.45 -0.45 0.25\nv 0.45 0.45 0.25\nv -0.45 0.45 0.25\n"
        "v -0.45 -0.45 -0.25\nv 0.45 -0.45 -0.25\nv 0.45 0.45 -0.25\nv -0.45 0.45 -0.25\n"
        "vt 0 0\nvt 0.4 0\nvt 0.4 0.4\nvt 0 0.4\n"
        "vt 0.6 0.6\nvt 1 0.6\nvt 1 1\nvt 0.6 1\n"
        "f 1/1 2/2 3/3 4/4\n"
        "f 5/5 6/6 7/7 8/8\n"
    )
    mesh = load_mesh_text(text)
    geometry = UvGeometry.build(mesh, 128)
    cam = front_camera()
    atlas = TextureAtlas(np.full((128, 128, 3), 0.7, dtype=np.float32))
    rgb, _, depth = render_textured(
        mesh, atlas, UvMask(geometry.chart.copy()), cam, (512, 512)
    )
    _, mask = backproject(mesh, rgb, cam, depth, 128, geometry=geometry)
    near_island = (geometry.face_index == 0) | (geometry.face_index == 1)
    far_island = (geometry.face_index == 2) | (geometry.face_index == 3)
    assert mask.values[near_island].mean() > 0.9
    assert not mask.values[far_island].any()


def test_backproject_dimension_mismatch():
    mesh = load_mesh(FIXTURES / "quad.obj")
    image = RgbImage(np.zeros((64, 64, 3), dtype=np.float32))
    depth = DepthMap(values=np.full((32, 32), np.inf), coverage=np.zeros((32, 32), bool))
    with pytest.raises(DimensionMismatch):
        backproject(mesh, image, front_camera(), depth, 64)


def random_pair(rng, res=32):
    atlas = TextureAtlas(rng.random((res, res, 3), dtype=np.float32))
    mask = UvMask(rng.random((res, res)) < 0.5)
    return atlas, mask


def test_fuse_prev_dominates():
    rng = np.random.default_rng(0)
    prev_a, _ = random_pair(rng)
    new_a, new_m = random_pair(rng)
    ones = UvMask(np.ones((32, 32), dtype=bool))
    out_a, out_m = fuse(prev_a, ones, new_a, new_m)
    assert np.array_equal(out_a.values, prev_a.values)
    assert out_m.values.all()


def test_fuse_empty_prev_passthrough():
    rng = np.random.default_rng(1)
    prev_a, _ = random_pair(rng)
    new_a, _ = random_pair(rng)
    zeros = UvMask(np.zeros((32, 32), dtype=bool))
    ones = UvMask(np.ones((32, 32), dtype=bool))
    out_a, out_m = fuse(prev_a, zeros, new_a, ones)
    assert np.array_equal(out_a.values, new_a.values)
    assert out_m.values.all()


def test_fuse_disjoint_union():
    res = 16
    left = np.zeros((res, res), dtype=bool)
    left[:, : res // 2] = True
    a = TextureAtlas(np.full((res, res, 3), 0.25, dtype=np.float32))
    b = TextureAtlas(np.full((res, res, 3), 0.75, dtype=np.float32))
    out_a, out_m = fuse(a, UvMask(left), b, UvMask(~left))
    assert out_m.values.all()
    assert np.all(out_a.values[:, : res // 2] == 0.25)
    assert np.all(out_a.values[:, res // 2 :] == 0.75)


def test_fuse_dimension_mismatch():
    a = TextureAtlas(np.zeros((16, 16, 3), dtype=np.float32))
    b = TextureAtlas(np.zeros((32, 32, 3), dtype=np.float32))
    m16 = UvMask(np.zeros((16, 16), dtype=bool))
    m32 = UvMask(np.zeros((32, 32), dtype=bool))
    with pytest.raises(DimensionMismatch):
        fuse(a, m16, b, m32)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_fuse_algebra_properties(seed):
    rng = np.random.default_rng(seed)
    a1, m1 = random_pair(rng, 16)
    a2, m2 = random_pair(rng, 16)
    a3, m3 = random_pair(rng, 16)

    # idempotence
    same_a, same_m = fuse(a1, m1, a1, m1)
    assert np.array_equal(same_a.values, np.where(m1.values[:, :, None], a1.values, 0))
    assert np.array_equal(same_m.values, m1.values)

    # mask never shrinks
    _, grown = fuse(a1, m1, a2, m2)
    assert np.all(grown.values >= m1.values)

    # fold order equals any bracketing
    left_a, left_m = fuse(*fuse(a1, m1, a2, m2), a3, m3)
    right_in_a, right_in_m = fuse(a2, m2, a3, m3)
    right_a, right_m = fuse(a1, m1, right_in_a, right_in_m)
    assert np.array_equal(left_a.values, right_a.values)
    assert np.array_equal(left_m.values, right_m.values)


def dilate_oracle(vals, mask, radius):
    """Exhaustive nearest-colored-texel scan, ties by row-major order."""
    out = vals.copy()
    h, w = mask.shape
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                continue
            done = False
            for d in range(1, radius + 1):
                for sy in range(y - d, y + d + 1):
                    for sx in range(x - d, x + d + 1):
                        if max(abs(sy - y), abs(sx - x)) != d:
                            continue
                        if 0 <= sy < h and 0 <= sx < w and mask[sy, sx]:
                            out[y, x] = vals[sy, sx]
                            done = True
                            break
                    if done:
                        break
                if done:
                    break
    return out


def test_dilate_radius_zero_identity():
    rng = np.random.default_rng(5)
    atlas, mask = random_pair(rng, 16)
    out = dilate_seams(atlas, mask, 0)
    assert np.array_equal(out.values, atlas.values)


def test_dilate_fully_colored_unchanged():
    rng = np.random.default_rng(6)
    atlas = TextureAtlas(rng.random((16, 16, 3), dtype=np.float32))
    out = dilate_seams(atlas, UvMask(np.ones((16, 16), dtype=bool)), 3)
    assert np.array_equal(out.values, atlas.values)


def test_dilate_single_texel_fills_block():
    vals = np.zeros((9, 9, 3), dtype=np.float32)
    mask = np.zeros((9, 9), dtype=bool)
    vals[4, 4] = [0.2, 0.4, 0.6]
    mask[4, 4] = True
    out = dilate_seams(TextureAtlas(vals), UvMask(mask), 2)
    block = out.values[2:7, 2:7]
    assert np.all(block == np.float32([0.2, 0.4, 0.6]))
    outside = out.values.copy()
    outside[2:7, 2:7] = 0
    assert np.all(outside == 0.0)


def test_dilate_matches_bruteforce_oracle():
    rng = np.random.default_rng(11)
    for _ in range(5):
        vals = rng.random((24, 24, 3)).astype(np.float32)
        mask = rng.random((24, 24)) < 0.08
        got = dilate_seams(TextureAtlas(vals), UvMask(mask), 3)
        want = dilate_oracle(vals, mask, 3)
        assert np.array_equal(got.values, want)


def test_dilate_does_not_modify_inputs():
    rng = np.random.default_rng(12)
    vals = rng.random((16, 16, 3)).astype(np.float32)
    mask = rng.random((16, 16)) < 0.2
    atlas = TextureAtlas(vals.copy())
    mask_obj = UvMask(mask.copy())
    dilate_seams(atlas, mask_obj, 2)
    assert np.array_equal(atlas.values, vals)
    assert np.array_equal(mask_obj.values, mask)


def test_position_map_png_round_trip(tmp_path):
    mesh = load_mesh(FIXTURES / "cube.obj")
    pm = rasterize_position_map(mesh, 128)
    path = tmp_path / "pos.png"
    write_position_map_png(pm, path)
    back = pngio.decode(path.read_bytes())
    assert back.shape == (128, 128, 3)
    assert np.max(np.abs(back - pm.values)) <= 0.5 / 65535 + 1e-6


def test_atlas_validation():
    with pytest.raises(ValueError):
        TextureAtlas(np.full((8, 8, 3), 1.5, dtype=np.float32))
    with pytest.raises(DimensionMismatch):
        TextureAtlas(np.zeros((8, 8), dtype=np.float32))


def test_position_map_type_invariants():
    values = np.zeros((4, 4, 3), dtype=np.float32)
    coverage = np.zeros((4, 4), dtype=bool)
    pm = PositionMap(values=values, coverage=coverage)
    assert pm.values.shape == (4, 4, 3)
