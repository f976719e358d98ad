"""Two-stage texture generation: multi-view coarse painting, UV-space refinement.

The coarse stage walks the viewpoint schedule. The first iteration generates
from depth alone; every later iteration renders the partially textured mesh,
asks the backend to inpaint the uncolored pixels, and back-projects the
result onto the atlas. Fusion never overwrites texels colored by an earlier
view. The refinement stage fills the remaining chart holes directly in UV
space, runs an enhancement pass over the whole atlas, and pads chart borders
so mipmapping does not bleed background into the surface.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .camera import Viewpoint, schedule_viewpoints
from .errors import EmptySchedule
from .geometry import Mesh, load_mesh, normalize_to_unit
from .raster import (
    DepthMap,
    RgbImage,
    normalize_depth_for_conditioning,
    render_depth,
    render_textured,
    write_depth_png,
    write_mask_png,
    write_rgb_png,
)
from .sampler import (
    Backend,
    Condition,
    SampleRequest,
    compose_grid,
    http_backend,
    mock_backend,
    sample,
    split_grid,
)
from .uvspace import (
    PositionMap,
    TextureAtlas,
    UvGeometry,
    UvMask,
    backproject,
    dilate_seams,
    fuse,
    rasterize_position_map,
    write_atlas_png,
    write_position_map_png,
)
from .uvspace import write_mask_png as write_uv_mask_png

log = logging.getLogger(__name__)

_ALLOWED_TOTALS = (2, 4, 6, 8)


def _power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PipelineConfig:
    atlas_resolution: int = 2048
    view_resolution: int = 512
    total_viewpoints: int = 6
    viewpoints_per_iteration: int = 2
    coarse_strength: float = 1.0
    refine_strength: float = 0.75
    use_position_map: bool = True
    seed: int = 0
    dilation_radius: int = 3
    backend: str = "mock"
    endpoint: str | None = None

    def __post_init__(self):
        if not _power_of_two(self.atlas_resolution):
            raise ValueError("atlas_resolution must be a power of two")
        if not _power_of_two(self.view_resolution):
            raise ValueError("view_resolution must be a power of two")
        if self.total_viewpoints not in _ALLOWED_TOTALS:
            raise ValueError(f"total_viewpoints must be one of {_ALLOWED_TOTALS}")
        if self.viewpoints_per_iteration not in (1, 2):
            raise ValueError("viewpoints_per_iteration must be 1 or 2")
        for name in ("coarse_strength", "refine_strength"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")
        if self.backend not in ("mock", "http"):
            raise ValueError("backend must be 'mock' or 'http'")
        if self.backend == "http" and not self.endpoint:
            raise ValueError("http backend requires an endpoint")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ViewRecord:
    label: str
    iteration: int
    kind: str
    seed: int
    strength: float
    colored_before: float
    colored_after: float


@dataclass
class RefineRecord:
    kind: str
    seed: int
    strength: float
    control: str | None
    uncolored_after: float


@dataclass
class StageTrace:
    views: list[ViewRecord] = field(default_factory=list)
    refinements: list[RefineRecord] = field(default_factory=list)
    requests: int = 0
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            "views": [asdict(r) for r in self.views],
            "refinements": [asdict(r) for r in self.refinements],
            "requests": self.requests,
            "elapsed": self.elapsed,
        }


def make_backend(config: PipelineConfig) -> Backend:
    if config.backend == "http":
        return http_backend(config.endpoint)
    return mock_backend(palette_seed=config.seed)


def run_coarse(
    mesh: Mesh,
    condition: Condition,
    backend: Backend,
    config: PipelineConfig,
    geometry: UvGeometry | None = None,
    debug_dir: str | os.PathLike | None = None,
) -> tuple[TextureAtlas, UvMask, StageTrace]:
    """Progressively paint the atlas from the scheduled viewpoints.

    Iteration 0 generates from the depth conditioning alone; later
    iterations inpaint the uncolored pixels of a render of the current
    atlas. Each view's image is back-projected and fused in schedule order.
    """
    start = time.perf_counter()
    resolution = config.atlas_resolution
    if geometry is None:
        geometry = UvGeometry.build(mesh, resolution)
    chart_texels = max(1, int(geometry.chart.sum()))

    schedule = schedule_viewpoints(config.total_viewpoints, config.viewpoints_per_iteration)
    if not schedule.iterations:
        raise EmptySchedule("viewpoint schedule is empty")

    atlas = TextureAtlas.empty(resolution)
    colored = UvMask.empty(resolution)
    trace = StageTrace()
    size = (config.view_resolution, config.view_resolution)

    for iteration, group in enumerate(schedule.iterations):
        seed = config.seed + iteration
        depths: list[DepthMap] = []
        controls: list[RgbImage] = []
        renders: list[RgbImage] = []
        keeps: list[np.ndarray] = []
        for view in group:
            if iteration == 0:
                depth = render_depth(mesh, view, size)
            else:
                image, masks, depth = render_textured(mesh, atlas, colored, view, size)
                renders.append(image)
                keeps.append(masks.coverage & ~masks.uncolored)
            depths.append(depth)
            controls.append(normalize_depth_for_conditioning(depth))

        grid = len(group) == 2
        control = compose_grid((controls[0], controls[1])) if grid else controls[0]
        if iteration == 0:
            request = SampleRequest(
                kind="generate",
                condition=condition,
                width=control.width,
                height=control.height,
                seed=seed,
                strength=config.coarse_strength,
                control_image=control,
            )
        else:
            init = compose_grid((renders[0], renders[1])) if grid else renders[0]
            keep = np.concatenate(keeps, axis=1) if grid else keeps[0]
            request = SampleRequest(
                kind="inpaint",
                condition=condition,
                width=init.width,
                height=init.height,
                seed=seed,
                strength=config.coarse_strength,
                init_image=init,
                keep_mask=keep,
                control_image=control,
            )
        response = sample(backend, request)
        trace.requests += 1
        halves = split_grid(response.image) if grid else (response.image,)

        for view, depth, half in zip(group, depths, halves):
            before = int(colored.values.sum()) / chart_texels
            patch, valid = backproject(mesh, half, view, depth, resolution, geometry=geometry)
            atlas, colored = fuse(atlas, colored, patch, valid)
            after = int(colored.values.sum()) / chart_texels
            trace.views.append(ViewRecord(
                label=view.label,
                iteration=iteration,
                kind=request.kind,
                seed=seed,
                strength=request.strength,
                colored_before=before,
                colored_after=after,
            ))
            log.debug("view %s: colored %.4f -> %.4f", view.label, before, after)

        if debug_dir is not None:
            _dump_iteration(debug_dir, iteration, group, depths, halves, request)

    trace.elapsed = time.perf_counter() - start
    return atlas, colored, trace


def run_refine(
    mesh: Mesh,
    coarse: TextureAtlas,
    colored: UvMask,
    condition: Condition,
    backend: Backend,
    config: PipelineConfig,
    geometry: UvGeometry | None = None,
) -> tuple[TextureAtlas, StageTrace]:
    """Fill chart holes in UV space, enhance, and pad chart borders.

    The UV inpainting request keeps exactly the texels the coarse stage
    colored, so the backend paints every hole (and the background) from
    real surface colors; kept texels survive bit-exactly through the wire
    keep contract, so refinement can only add.
    """
    start = time.perf_counter()
    resolution = config.atlas_resolution
    if coarse.values.shape[0] != resolution:
        raise ValueError("coarse atlas does not match config.atlas_resolution")
    if geometry is None:
        geometry = UvGeometry.build(mesh, resolution)
    trace = StageTrace()

    position = rasterize_position_map(mesh, resolution, geometry=geometry)
    control = RgbImage(position.values) if config.use_position_map else None
    chart = geometry.chart
    chart_texels = max(1, int(chart.sum()))

    keep = colored.values.copy()
    request = SampleRequest(
        kind="uv_inpaint",
        condition=condition,
        width=resolution,
        height=resolution,
        seed=config.seed + 1000,
        strength=config.refine_strength,
        init_image=RgbImage(coarse.values),
        keep_mask=keep,
        control_image=control,
    )
    response = sample(backend, request)
    trace.requests += 1
    values = response.image.values
    painted = colored.values | ~request.keep_mask
    uncolored_after = int((chart & ~painted).sum()) / chart_texels
    trace.refinements.append(RefineRecord(
        kind="uv_inpaint",
        seed=request.seed,
        strength=request.strength,
        control=request.control_kind,
        uncolored_after=uncolored_after,
    ))

    request = SampleRequest(
        kind="uv_hd",
        condition=condition,
        width=resolution,
        height=resolution,
        seed=config.seed + 1001,
        strength=config.refine_strength,
        init_image=RgbImage(values),
        control_image=control,
    )
    response = sample(backend, request)
    trace.requests += 1
    trace.refinements.append(RefineRecord(
        kind="uv_hd",
        seed=request.seed,
        strength=request.strength,
        control=request.control_kind,
        uncolored_after=uncolored_after,
    ))

    final = dilate_seams(
        TextureAtlas(response.image.values), UvMask(chart.copy()), config.dilation_radius
    )
    trace.elapsed = time.perf_counter() - start
    return final, trace


def run_mesh(
    mesh: Mesh,
    condition: Condition,
    config: PipelineConfig,
    debug_dir: str | os.PathLike | None = None,
) -> tuple[TextureAtlas, PositionMap, UvMask, StageTrace]:
    """Texture an already loaded, normalized mesh. No file output."""
    start = time.perf_counter()
    backend = make_backend(config)
    geometry = UvGeometry.build(mesh, config.atlas_resolution)

    atlas, colored, coarse_trace = run_coarse(
        mesh, condition, backend, config, geometry=geometry, debug_dir=debug_dir
    )
    final, refine_trace = run_refine(
        mesh, atlas, colored, condition, backend, config, geometry=geometry
    )
    position = rasterize_position_map(mesh, config.atlas_resolution, geometry=geometry)

    trace = StageTrace(
        views=coarse_trace.views,
        refinements=refine_trace.refinements,
        requests=coarse_trace.requests + refine_trace.requests,
        elapsed=time.perf_counter() - start,
    )
    return final, position, colored, trace


def run(
    mesh_path: str | os.PathLike,
    condition: Condition,
    config: PipelineConfig,
    out_dir: str | os.PathLike | None = None,
    debug: bool = False,
) -> tuple[TextureAtlas, PositionMap, StageTrace]:
    """Load, normalize, texture. Writes artifacts when out_dir is given."""
    mesh = normalize_to_unit(load_mesh(mesh_path))

    debug_dir = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        if debug:
            debug_dir = os.path.join(out_dir, "debug")
            os.makedirs(debug_dir, exist_ok=True)

    final, position, colored, trace = run_mesh(mesh, condition, config, debug_dir=debug_dir)

    if out_dir is not None:
        write_atlas_png(final, os.path.join(out_dir, "texture.png"))
        write_uv_mask_png(colored, os.path.join(out_dir, "colored_mask.png"))
        write_position_map_png(position, os.path.join(out_dir, "position_map.png"))
        payload = {"config": config.to_dict(), **trace.to_dict()}
        with open(os.path.join(out_dir, "trace.json"), "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)

    return final, position, trace


def _dump_iteration(
    debug_dir: str | os.PathLike,
    iteration: int,
    group: tuple[Viewpoint, ...],
    depths: list[DepthMap],
    halves: tuple[RgbImage, ...],
    request: SampleRequest,
) -> None:
    for view, depth, half in zip(group, depths, halves):
        stem = os.path.join(str(debug_dir), f"iter{iteration}_{view.label}")
        write_depth_png(depth, stem + "_depth.png")
        write_rgb_png(half, stem + "_sample.png")
    if request.keep_mask is not None:
        path = os.path.join(str(debug_dir), f"iter{iteration}_keep.png")
        write_mask_png(request.keep_mask, path)
