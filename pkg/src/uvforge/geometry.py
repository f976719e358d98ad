"""Wavefront OBJ loading and mesh bookkeeping.

Supported subset: v, vt, vn and f (v/vt and v/vt/vn corner forms) plus
comments; faces with more than three corners are fan-triangulated on load.
Texture coordinates are mandatory because every downstream stage paints into
a UV atlas. The v coordinate of each UV is flipped on load so that (0, 0)
names the top-left texel of the texture image; this module is the single
place that convention is set, and write_mesh undoes it on the way out.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateBounds, EmptyMesh, MissingUV, ParseError

log = logging.getLogger(__name__)

_AREA_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulated surface with per-corner UV coordinates.

    faces[k, c] holds (vertex index, uv index, normal index) for corner c of
    triangle k; every index is validated against its array on load. Arrays
    are marked read-only so a loaded mesh can be shared freely.
    """

    vertices: np.ndarray  # (V, 3) float64
    uvs: np.ndarray       # (U, 2) float64, image convention (v grows downward)
    normals: np.ndarray   # (N, 3) float64 unit vectors
    faces: np.ndarray     # (F, 3, 3) int32
    dropped_degenerate: int = 0

    def __post_init__(self):
        for arr in (self.vertices, self.uvs, self.normals, self.faces):
            arr.setflags(write=False)

    @property
    def vertex_count(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def face_count(self) -> int:
        return int(self.faces.shape[0])

    def corner_positions(self) -> np.ndarray:
        """3D positions per face corner, shape (F, 3, 3)."""
        return self.vertices[self.faces[:, :, 0]]

    def corner_uvs(self) -> np.ndarray:
        """UV coordinates per face corner, shape (F, 3, 2)."""
        return self.uvs[self.faces[:, :, 1]]

    def face_normals(self) -> np.ndarray:
        """Unit geometric normal per face (right-hand rule over corner order)."""
        p = self.corner_positions()
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        length = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.maximum(length, 1e-30)


@dataclass(frozen=True)
class MeshReport:
    vertices: int
    faces: int
    charts: int
    dropped_degenerate: int
    bounds_min: tuple[float, float, float]
    bounds_max: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices,
            "faces": self.faces,
            "charts": self.charts,
            "dropped_degenerate": self.dropped_degenerate,
            "bounds_min": list(self.bounds_min),
            "bounds_max": list(self.bounds_max),
        }


def load_mesh(path: str | os.PathLike) -> Mesh:
    """Load and validate a mesh from a Wavefront OBJ file.

    Raises FileNotFoundError, ParseError, MissingUV or EmptyMesh. See the
    module docstring for the supported subset.
    """
    with open(os.fspath(path), "r", encoding="utf-8") as fh:
        return load_mesh_text(fh.read())


def load_mesh_text(text: str) -> Mesh:
    """Parse OBJ source text into a validated Mesh."""
    vertices: list[list[float]] = []
    uvs: list[list[float]] = []
    normals: list[list[float]] = []
    tris: list[list[tuple[int, int, int]]] = []
    ignored = 0
    objects = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split()
        if head == "v":
            vertices.append(_floats(rest, 3, lineno))
        elif head == "vt":
            uvs.append(_floats(rest, 2, lineno))
        elif head == "vn":
            normals.append(_floats(rest, 3, lineno))
        elif head == "f":
            if len(rest) < 3:
                raise ParseError("face needs at least 3 corners", lineno)
            poly = [
                _corner(tok, len(vertices), len(uvs), len(normals), lineno)
                for tok in rest
            ]
            for i in range(1, len(poly) - 1):
                tris.append([poly[0], poly[i], poly[i + 1]])
        elif head == "o":
            objects += 1
            if objects > 1 and tris:
                log.warning("multiple objects in OBJ input; keeping the first")
                break
        else:
            ignored += 1

    if ignored:
        log.debug("ignored %d unsupported OBJ directives", ignored)
    if not tris:
        raise EmptyMesh("no faces")

    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    uv_arr = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
    uv_arr[:, 1] = 1.0 - uv_arr[:, 1]
    if normals:
        nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        nrm = nrm / np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-30)
    else:
        nrm = np.zeros((0, 3), dtype=np.float64)
    faces = np.asarray(tris, dtype=np.int64)

    faces, nrm = _fill_missing_normals(verts, faces, nrm)

    corners = verts[faces[:, :, 0]]
    area2 = np.linalg.norm(
        np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]),
        axis=1,
    )
    keep = area2 > _AREA_EPS
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        log.debug("dropped %d degenerate faces", dropped)
    faces = faces[keep]
    if faces.shape[0] == 0:
        raise EmptyMesh("no faces left after dropping degenerates")

    return Mesh(
        vertices=verts,
        uvs=uv_arr,
        normals=nrm,
        faces=faces.astype(np.int32),
        dropped_degenerate=dropped,
    )


def normalize_to_unit(mesh: Mesh) -> Mesh:
    """Center the bounding box on the origin and scale its longest axis to 1.

    The result lies inside [-0.5, 0.5]^3 with at least one axis spanning the
    full range; UVs and normals are unchanged. Idempotent up to float noise.
    """
    if mesh.vertex_count == 0:
        raise DegenerateBounds("mesh has no vertices")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise DegenerateBounds("zero extent on all axes")
    center = (lo + hi) * 0.5
    return replace(mesh, vertices=(mesh.vertices - center) / extent)


def inspect(mesh: Mesh) -> MeshReport:
    """Summarize counts, UV chart count and bounds for a mesh."""
    if mesh.vertex_count:
        lo = mesh.vertices.min(axis=0)
        hi = mesh.vertices.max(axis=0)
    else:
        lo = hi = np.zeros(3)
    return MeshReport(
        vertices=mesh.vertex_count,
        faces=mesh.face_count,
        charts=_chart_count(mesh),
        dropped_degenerate=mesh.dropped_degenerate,
        bounds_min=tuple(float(x) for x in lo),
        bounds_max=tuple(float(x) for x in hi),
    )


def write_mesh(mesh: Mesh, path: str | os.PathLike) -> None:
    """Debug OBJ writer; inverse of load_mesh for the supported fields."""
    out = ["# written by uvforge"]
    for x, y, z in mesh.vertices:
        out.append(f"v {x:.10g} {y:.10g} {z:.10g}")
    for u, v in mesh.uvs:
        out.append(f"vt {u:.10g} {1.0 - v:.10g}")
    for x, y, z in mesh.normals:
        out.append(f"vn {x:.10g} {y:.10g} {z:.10g}")
    for tri in mesh.faces:
        corner = " ".join(f"{c[0] + 1}/{c[1] + 1}/{c[2] + 1}" for c in tri)
        out.append(f"f {corner}")
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def _fill_missing_normals(
    verts: np.ndarray, faces: np.ndarray, nrm: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Assign computed geometric normals to corners lacking a vn reference."""
    missing = faces[:, :, 2] < 0
    face_ids = np.unique(np.nonzero(missing)[0])
    if face_ids.size == 0:
        return faces, nrm
    p = verts[faces[face_ids, :, 0]]
    geo = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    geo = geo / np.maximum(np.linalg.norm(geo, axis=1, keepdims=True), 1e-30)
    base = nrm.shape[0]
    for offset, fi in enumerate(face_ids):
        faces[fi, missing[fi], 2] = base + offset
    return faces, np.vstack([nrm, geo])


def _chart_count(mesh: Mesh) -> int:
    """Connected components of the uv-index graph induced by faces."""
    parent = list(range(mesh.uvs.shape[0]))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for tri in mesh.faces[:, :, 1]:
        root = find(int(tri[0]))
        for other in tri[1:]:
            parent[find(int(other))] = root
    used = np.unique(mesh.faces[:, :, 1])
    return len({find(int(i)) for i in used})


def _floats(tokens: list[str], count: int, lineno: int) -> list[float]:
    if len(tokens) < count:
        raise ParseError(f"expected {count} numbers, got {len(tokens)}", lineno)
    try:
        values = [float(tok) for tok in tokens[:count]]
    except ValueError:
        raise ParseError(f"bad number in {tokens[:count]!r}", lineno) from None
    if not all(math.isfinite(v) for v in values):
        raise ParseError("non-finite coordinate", lineno)
    return values


def _corner(
    token: str, nv: int, nt: int, nn: int, lineno: int
) -> tuple[int, int, int]:
    parts = token.split("/")
    if len(parts) > 3:
        raise ParseError(f"bad face corner {token!r}", lineno)
    if len(parts) == 1 or parts[1] == "":
        raise MissingUV(f"line {lineno}: face corner {token!r} has no texture coordinate")
    ni_token = parts[2] if len(parts) == 3 else ""
    try:
        vi = int(parts[0])
        ti = int(parts[1])
        ni = int(ni_token) if ni_token else None
    except ValueError:
        raise ParseError(f"bad face corner {token!r}", lineno) from None
    return (
        _resolve(vi, nv, "vertex", lineno),
        _resolve(ti, nt, "uv", lineno),
        _resolve(ni, nn, "normal", lineno) if ni is not None else -1,
    )


def _resolve(value: int, count: int, what: str, lineno: int) -> int:
    if value == 0:
        raise ParseError(f"{what} index 0 (OBJ indices are 1-based)", lineno)
    idx = count + value if value < 0 else value - 1
    if not 0 <= idx < count:
        raise ParseError(f"{what} index {value} out of range", lineno)
    return idx
