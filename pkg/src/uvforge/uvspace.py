"""UV-domain operations: back-projection, fusion, position maps and seams.

Texel centers live at (x + 0.5) / resolution in UV coordinates, matching the
nearest-texel sampling used when rendering. Back-projection validates each
chart texel with a facing test, an image-bounds test and a depth comparison
against the rendered z-buffer before sampling the view image bilinearly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import pngio
from .camera import Viewpoint, project_points
from .errors import DimensionMismatch
from .geometry import Mesh
from .raster import DepthMap, RgbImage, triangle_fragments

COS_THRESHOLD = 0.1
DEPTH_EPSILON = 1e-3


@dataclass(frozen=True, eq=False)
class TextureAtlas:
    """RGB texture in UV space, float32 channels in [0, 1]."""

    values: np.ndarray  # (H, W, 3)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatch("atlas must have shape (H, W, 3)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("atlas contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("atlas channels must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @classmethod
    def empty(cls, resolution: int) -> "TextureAtlas":
        return cls(np.zeros((resolution, resolution, 3), dtype=np.float32))

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class UvMask:
    """Binary per-texel mask paired with an atlas."""

    values: np.ndarray  # (H, W) bool

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise DimensionMismatch("mask must have shape (H, W)")
        object.__setattr__(self, "values", arr.astype(bool))

    @classmethod
    def empty(cls, resolution: int) -> "UvMask":
        return cls(np.zeros((resolution, resolution), dtype=bool))

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class PositionMap:
    """UV-space image of normalized 3D surface coordinates in [0, 1]^3."""

    values: np.ndarray    # (H, W, 3) float32
    coverage: np.ndarray  # (H, W) bool


@dataclass(frozen=True, eq=False)
class UvGeometry:
    """Per-texel face assignment, 3D position and normal for chart texels.

    Building this is the expensive part of every UV-space operation, so it
    can be computed once and passed to backproject/rasterize_position_map.
    """

    face_index: np.ndarray  # (H, W) int32, -1 outside all charts
    positions: np.ndarray   # (H, W, 3) float32, mesh coordinates
    normals: np.ndarray     # (H, W, 3) float32, unit face normals
    chart: np.ndarray       # (H, W) bool

    @classmethod
    def build(cls, mesh: Mesh, resolution: int) -> "UvGeometry":
        res = int(resolution)
        face_index = np.full((res, res), -1, dtype=np.int32)
        positions = np.zeros((res, res, 3), dtype=np.float64)
        normals = np.zeros((res, res, 3), dtype=np.float64)
        corner_uv = mesh.corner_uvs() * res
        corner_pos = mesh.corner_positions()
        face_normals = mesh.face_normals()
        for f in range(corner_uv.shape[0]):
            ys, xs, lam = triangle_fragments(corner_uv[f], res, res)
            if ys.size == 0:
                continue
            # first face to claim a texel keeps it (overlaps are atlas bugs)
            fresh = face_index[ys, xs] < 0
            if not fresh.all():
                ys, xs, lam = ys[fresh], xs[fresh], lam[fresh]
                if ys.size == 0:
                    continue
            face_index[ys, xs] = f
            positions[ys, xs] = lam @ corner_pos[f]
            normals[ys, xs] = face_normals[f]
        return cls(
            face_index=face_index,
            positions=positions.astype(np.float32),
            normals=normals.astype(np.float32),
            chart=face_index >= 0,
        )


def rasterize_chart_coverage(
    mesh: Mesh, resolution: int, geometry: UvGeometry | None = None
) -> UvMask:
    """Texels whose centers fall inside any face's UV triangle."""
    geometry = geometry or UvGeometry.build(mesh, resolution)
    return UvMask(geometry.chart.copy())


def rasterize_position_map(
    mesh: Mesh, resolution: int, geometry: UvGeometry | None = None
) -> PositionMap:
    """Map chart texels to their 3D point, [-0.5, 0.5]^3 -> [0, 1]^3.

    The mesh is expected to be normalized to the unit cube; values are
    clipped so float noise cannot leave the declared range.
    """
    geometry = geometry or UvGeometry.build(mesh, resolution)
    values = np.clip(geometry.positions + 0.5, 0.0, 1.0)
    values[~geometry.chart] = 0.0
    return PositionMap(values=values.astype(np.float32), coverage=geometry.chart.copy())


def backproject(
    mesh: Mesh,
    image: RgbImage,
    view: Viewpoint,
    depth: DepthMap,
    resolution: int,
    cos_threshold: float = COS_THRESHOLD,
    depth_epsilon: float = DEPTH_EPSILON,
    geometry: UvGeometry | None = None,
) -> tuple[TextureAtlas, UvMask]:
    """Transfer view-image colors onto atlas texels visible in that view.

    A chart texel is valid when its face normal points toward the eye
    (cos >= cos_threshold), its projection lands inside the image, and its
    projected depth agrees with the z-buffer within depth_epsilon. Valid
    texels sample the image bilinearly; the depth lookup uses the nearest
    pixel because filtering depth across silhouettes breaks the test.
    """
    if image.values.shape[:2] != depth.values.shape:
        raise DimensionMismatch("image and depth dimensions differ")
    geometry = geometry or UvGeometry.build(mesh, resolution)
    res = int(resolution)
    atlas = np.zeros((res, res, 3), dtype=np.float32)
    mask = np.zeros((res, res), dtype=bool)

    tys, txs = np.nonzero(geometry.chart)
    if tys.size == 0:
        return TextureAtlas(atlas), UvMask(mask)
    points = geometry.positions[tys, txs].astype(np.float64)
    norms = geometry.normals[tys, txs].astype(np.float64)

    to_eye = view.eye - points
    dist = np.linalg.norm(to_eye, axis=1)
    facing = np.einsum("ij,ij->i", norms, to_eye / dist[:, None]) >= cos_threshold

    img_h, img_w = depth.values.shape
    pixels, tex_depth, _ = project_points(view, points, (img_w, img_h))
    px, py = pixels[:, 0], pixels[:, 1]
    in_image = (
        (tex_depth > 0)
        & (px >= 0.0)
        & (px < img_w)
        & (py >= 0.0)
        & (py < img_h)
    )

    ix = np.clip(np.floor(px).astype(np.int64), 0, img_w - 1)
    iy = np.clip(np.floor(py).astype(np.int64), 0, img_h - 1)
    depth_at = depth.values[iy, ix]
    depth_ok = np.abs(tex_depth - depth_at) <= depth_epsilon

    valid = facing & in_image & depth_ok
    if valid.any():
        colors = _bilinear(image.values, px[valid], py[valid])
        atlas[tys[valid], txs[valid]] = colors
        mask[tys[valid], txs[valid]] = True
    return TextureAtlas(atlas), UvMask(mask)


def fuse(
    prev_atlas: TextureAtlas,
    prev_mask: UvMask,
    new_atlas: TextureAtlas,
    new_mask: UvMask,
) -> tuple[TextureAtlas, UvMask]:
    """Keep texels colored by previous views; fill the rest from the new view.

    Output values are copied, never blended, so fusion is exact: prev where
    prev_mask, else new where new_mask, else zero, with the union mask.
    """
    shape = prev_atlas.values.shape[:2]
    for other in (prev_mask.values, new_atlas.values[:, :, 0], new_mask.values):
        if other.shape[:2] != shape:
            raise DimensionMismatch("fuse inputs must share dimensions")
    keep = prev_mask.values[:, :, None]
    take = new_mask.values[:, :, None]
    out = np.where(keep, prev_atlas.values, np.where(take, new_atlas.values, 0.0))
    return (
        TextureAtlas(out.astype(np.float32)),
        UvMask(prev_mask.values | new_mask.values),
    )


def dilate_seams(atlas: TextureAtlas, mask: UvMask, radius: int) -> TextureAtlas:
    """Bleed colored texels outward so downstream filtering does not pick
    up background at chart borders.

    Every uncolored texel within `radius` (Chebyshev) of a colored texel
    takes the color of its nearest colored texel; ties break by scan order.
    Colored texels and the mask itself are untouched.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    result = atlas.values.copy()
    if radius == 0:
        return TextureAtlas(result)
    filled = mask.values.copy()
    for dy, dx in _ring_offsets(radius):
        src_mask = _shifted(mask.values, dy, dx)
        newly = ~filled & src_mask
        if newly.any():
            result[newly] = _shifted(atlas.values, dy, dx)[newly]
            filled |= newly
    return TextureAtlas(result)


def write_atlas_png(atlas: TextureAtlas, path: str | os.PathLike) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(pngio.encode_rgb8(atlas.values))


def write_mask_png(mask: UvMask, path: str | os.PathLike) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(pngio.encode_mask(mask.values))


def write_position_map_png(position_map: PositionMap, path: str | os.PathLike) -> None:
    """16-bit PNG so coordinate precision survives the trip to disk."""
    with open(os.fspath(path), "wb") as fh:
        fh.write(pngio.encode_rgb16(position_map.values))


def _bilinear(values: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Sample (H, W, 3) values at continuous pixel coordinates, edge-clamped.

    Pixel centers sit at half-integer coordinates, so the sample point maps
    to the value grid with a half-pixel shift before interpolation.
    """
    h, w = values.shape[:2]
    qx = px - 0.5
    qy = py - 0.5
    x0 = np.floor(qx).astype(np.int64)
    y0 = np.floor(qy).astype(np.int64)
    fx = (qx - x0)[:, None]
    fy = (qy - y0)[:, None]
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    v00 = values[y0c, x0c].astype(np.float64)
    v01 = values[y0c, x1c].astype(np.float64)
    v10 = values[y1c, x0c].astype(np.float64)
    v11 = values[y1c, x1c].astype(np.float64)
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    out = top * (1.0 - fy) + bot * fy
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _ring_offsets(radius: int) -> list[tuple[int, int]]:
    """Offsets ordered by Chebyshev distance then (dy, dx).

    This order makes first-write-wins equal to "nearest colored texel,
    ties broken by scan order".
    """
    offsets: list[tuple[int, int]] = []
    for d in range(1, radius + 1):
        for dy in range(-d, d + 1):
            for dx in range(-d, d + 1):
                if max(abs(dy), abs(dx)) == d:
                    offsets.append((dy, dx))
    return offsets


def _shifted(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """out[y, x] = arr[y + dy, x + dx], zero/False where that falls outside."""
    h, w = arr.shape[:2]
    out = np.zeros_like(arr)
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = arr[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    return out
