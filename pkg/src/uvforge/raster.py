"""Software rasterizer: depth maps, textured renders and view masks.

Rendering samples pixel centers at (x + 0.5, y + 0.5) with a top-left fill
rule, interpolates with perspective correction, clips against the near plane
and resolves the z-buffer by depth then face order. All of it is plain numpy
so identical inputs give bit-identical buffers.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import pngio
from .camera import Orthographic, Perspective, Viewpoint
from .errors import DimensionMismatch
from .geometry import Mesh

if TYPE_CHECKING:
    from .uvspace import TextureAtlas, UvMask

SENTINEL_DEPTH = np.inf


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel view-space depth; uncovered pixels hold the inf sentinel."""

    values: np.ndarray    # (H, W) float64
    coverage: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.values.shape != self.coverage.shape or self.values.ndim != 2:
            raise DimensionMismatch("depth values and coverage must share (H, W)")

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class RgbImage:
    """RGB image with float32 channels in [0, 1]."""

    values: np.ndarray  # (H, W, 3)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatch("RGB image must have shape (H, W, 3)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("RGB image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("RGB channels must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class ViewMasks:
    coverage: np.ndarray   # (H, W) bool, mesh silhouette
    uncolored: np.ndarray  # (H, W) bool, covered and sampling an uncolored texel

    def __post_init__(self):
        if np.any(self.uncolored & ~self.coverage):
            raise ValueError("uncolored mask must be a subset of coverage")


SNAP = 256  # subpixel grid: vertices snap to 1/256 pixel before coverage


def triangle_fragments(
    tri: np.ndarray, width: int, height: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel centers covered by a 2D triangle under the top-left fill rule.

    tri is (3, 2) continuous pixel coordinates with y growing downward.
    Returns (ys, xs, lam); lam holds screen-space barycentrics ordered like
    the input vertices. Vertices snap to a 1/256-pixel grid and the edge
    functions are evaluated in integers, so triangles sharing an edge make
    exactly complementary coverage decisions: no cracks, no double hits.
    """
    empty = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty((0, 3)))
    arr = np.asarray(tri, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        return empty
    fp = np.rint(arr * SNAP).astype(np.int64)
    v0, v1, v2 = fp
    area2 = int((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0]))
    if area2 == 0:
        return empty
    swapped = area2 < 0
    if swapped:
        v1, v2 = v2, v1
        area2 = -area2

    half = SNAP // 2
    xs_min, ys_min = fp.min(axis=0)
    xs_max, ys_max = fp.max(axis=0)
    x0 = max(0, math.ceil((xs_min - half) / SNAP))
    x1 = min(width - 1, math.floor((xs_max - half) / SNAP))
    y0 = max(0, math.ceil((ys_min - half) / SNAP))
    y1 = min(height - 1, math.floor((ys_max - half) / SNAP))
    if x1 < x0 or y1 < y0:
        return empty

    px = np.arange(x0, x1 + 1, dtype=np.int64)[None, :] * SNAP + half
    py = np.arange(y0, y1 + 1, dtype=np.int64)[:, None] * SNAP + half

    def edge(a, b):
        w = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
        dy = b[1] - a[1]
        dx = b[0] - a[0]
        top_left = (dy == 0 and dx > 0) or dy < 0
        return w, (w > 0) | ((w == 0) & top_left)

    w0, ok0 = edge(v1, v2)
    w1, ok1 = edge(v2, v0)
    w2, ok2 = edge(v0, v1)
    accept = ok0 & ok1 & ok2
    if not accept.any():
        return empty
    iy, ix = np.nonzero(accept)
    lam = np.stack([w0[iy, ix], w1[iy, ix], w2[iy, ix]], axis=1) / float(area2)
    if swapped:
        lam = lam[:, [0, 2, 1]]
    return iy + y0, ix + x0, lam


def render_depth(
    mesh: Mesh, view: Viewpoint, resolution: tuple[int, int]
) -> DepthMap:
    """Z-buffered depth render of the mesh from a viewpoint."""
    depth_buf, face_buf, _ = _rasterize_view(mesh, view, resolution)
    return DepthMap(values=depth_buf, coverage=face_buf >= 0)


def render_textured(
    mesh: Mesh,
    atlas: "TextureAtlas",
    colored: "UvMask",
    view: Viewpoint,
    resolution: tuple[int, int],
) -> tuple[RgbImage, ViewMasks, DepthMap]:
    """Render the mesh with nearest-texel atlas sampling.

    Returns the partial RGB render, the coverage/uncolored masks and the
    depth map. A covered pixel is uncolored when the texel it samples has
    colored=0; bilinear filtering is deliberately not used here because it
    would blend uncolored texels into colored pixels.
    """
    atlas_vals = atlas.values
    colored_vals = colored.values
    if atlas_vals.shape[:2] != colored_vals.shape[:2]:
        raise DimensionMismatch("atlas and colored mask dimensions differ")
    width, height = int(resolution[0]), int(resolution[1])
    depth_buf, face_buf, bary_buf = _rasterize_view(mesh, view, resolution)
    coverage = face_buf >= 0

    rgb = np.zeros((height, width, 3), dtype=np.float32)
    uncolored = np.zeros((height, width), dtype=bool)
    ys, xs = np.nonzero(coverage)
    if ys.size:
        ah, aw = atlas_vals.shape[:2]
        bary = bary_buf[ys, xs]
        corner_uv = mesh.corner_uvs()[face_buf[ys, xs]]
        uv = np.einsum("nc,nck->nk", bary, corner_uv)
        tx = np.clip(np.floor(uv[:, 0] * aw).astype(np.int64), 0, aw - 1)
        ty = np.clip(np.floor(uv[:, 1] * ah).astype(np.int64), 0, ah - 1)
        rgb[ys, xs] = atlas_vals[ty, tx]
        uncolored[ys, xs] = ~colored_vals[ty, tx]

    masks = ViewMasks(coverage=coverage, uncolored=uncolored)
    return RgbImage(rgb), masks, DepthMap(values=depth_buf, coverage=coverage)


def normalize_depth_for_conditioning(depth: DepthMap) -> RgbImage:
    """Map covered depths to [0, 1] with nearer = brighter, background 0.

    Uses (d_max - d) / (d_max - d_min) over covered pixels; a constant-depth
    cover maps to 1. Replicated to three channels for image-typed backends.
    """
    out = np.zeros(depth.values.shape, dtype=np.float32)
    cov = depth.coverage
    if cov.any():
        vals = depth.values[cov]
        d_min = float(vals.min())
        d_max = float(vals.max())
        if d_max > d_min:
            out[cov] = ((d_max - depth.values[cov]) / (d_max - d_min)).astype(np.float32)
        else:
            out[cov] = 1.0
    return RgbImage(np.repeat(out[:, :, None], 3, axis=2))


def write_depth_png(depth: DepthMap, path: str | os.PathLike) -> None:
    """Debug writer: normalized depth as 16-bit grayscale."""
    gray = normalize_depth_for_conditioning(depth).values[:, :, 0]
    with open(os.fspath(path), "wb") as fh:
        fh.write(pngio.encode_gray16(gray))


def write_rgb_png(image: RgbImage, path: str | os.PathLike) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(pngio.encode_rgb8(image.values))


def write_mask_png(mask: np.ndarray, path: str | os.PathLike) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(pngio.encode_mask(mask))


def _rasterize_view(
    mesh: Mesh, view: Viewpoint, resolution: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shared kernel: returns (depth, face index, original-face barycentrics).

    Faces are processed in order with a strict depth test, so equal depths
    resolve to the lowest face index. Triangles are clipped against the near
    plane carrying their original barycentrics as attributes, and fragments
    beyond the far plane are discarded.
    """
    width, height = int(resolution[0]), int(resolution[1])
    if width <= 0 or height <= 0:
        raise ValueError("resolution must be positive")
    depth_buf = np.full((height, width), SENTINEL_DEPTH, dtype=np.float64)
    face_buf = np.full((height, width), -1, dtype=np.int32)
    bary_buf = np.zeros((height, width, 3), dtype=np.float64)

    corners = mesh.corner_positions()
    right, true_up, forward = view.basis()
    rel = corners - view.eye
    xc = rel @ right
    yc = rel @ true_up
    dc = rel @ forward

    aspect = width / height
    persp = isinstance(view.projection, Perspective)
    if persp:
        tan_half = math.tan(math.radians(view.projection.fov_deg) / 2.0)
        fx = 0.5 * width / (tan_half * aspect)
        fy = 0.5 * height / tan_half
    else:
        assert isinstance(view.projection, Orthographic)
        fx = 0.5 * width / (view.projection.half_extent * aspect)
        fy = 0.5 * height / view.projection.half_extent

    near, far = view.near, view.far
    identity = np.eye(3)

    for f in range(corners.shape[0]):
        if persp and np.all(dc[f] < near):
            continue
        if persp and np.any(dc[f] < near):
            poly = _clip_near(xc[f], yc[f], dc[f], near)
            if poly.shape[0] < 3:
                continue
        else:
            poly = np.column_stack([xc[f], yc[f], dc[f], identity])
        if persp:
            pxs = 0.5 * width + fx * (poly[:, 0] / poly[:, 2])
            pys = 0.5 * height - fy * (poly[:, 1] / poly[:, 2])
        else:
            pxs = 0.5 * width + fx * poly[:, 0]
            pys = 0.5 * height - fy * poly[:, 1]

        for i in range(1, poly.shape[0] - 1):
            idx = (0, i, i + 1)
            tri = np.column_stack([pxs[list(idx)], pys[list(idx)]])
            ys, xs, lam = triangle_fragments(tri, width, height)
            if ys.size == 0:
                continue
            d_sub = poly[list(idx), 2]
            b_sub = poly[list(idx), 3:6]
            if persp:
                inv_d = 1.0 / d_sub
                denom = lam @ inv_d
                frag_d = 1.0 / denom
                frag_b = (lam * inv_d) @ b_sub / denom[:, None]
            else:
                frag_d = lam @ d_sub
                frag_b = lam @ b_sub
            keep = (frag_d >= near * (1.0 - 1e-9)) & (frag_d <= far * (1.0 + 1e-9))
            if not keep.all():
                ys, xs, frag_d, frag_b = ys[keep], xs[keep], frag_d[keep], frag_b[keep]
                if ys.size == 0:
                    continue
            frag_d = np.clip(frag_d, near, far)
            win = frag_d < depth_buf[ys, xs]
            if not win.any():
                continue
            ys, xs, frag_d, frag_b = ys[win], xs[win], frag_d[win], frag_b[win]
            depth_buf[ys, xs] = frag_d
            face_buf[ys, xs] = f
            bary_buf[ys, xs] = frag_b

    return depth_buf, face_buf, bary_buf


def _clip_near(
    xc: np.ndarray, yc: np.ndarray, dc: np.ndarray, near: float
) -> np.ndarray:
    """Sutherland-Hodgman clip of one triangle against depth >= near.

    Rows are (x_c, y_c, depth, b0, b1, b2) where b are barycentrics of the
    original triangle; intersection vertices interpolate all attributes.
    """
    identity = np.eye(3)
    verts = [np.array([xc[i], yc[i], dc[i], *identity[i]]) for i in range(3)]
    out: list[np.ndarray] = []
    for i in range(3):
        a, b = verts[i], verts[(i + 1) % 3]
        a_in, b_in = a[2] >= near, b[2] >= near
        if a_in:
            out.append(a)
        if a_in != b_in:
            t = (near - a[2]) / (b[2] - a[2])
            cut = a + t * (b - a)
            cut[2] = near
            out.append(cut)
    if not out:
        return np.empty((0, 6))
    return np.stack(out)
