"""FastAPI app and the operation functions behind each endpoint.

The *_operation functions hold the actual logic and raise domain errors;
the route handlers translate those into HTTP status codes. The CLI calls
the operation functions in-process, so local runs need no server.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__, pngio
from ..camera import named_viewpoint, orbit_viewpoint
from ..errors import BackendError, MeshError
from ..geometry import inspect, load_mesh_text, normalize_to_unit
from ..pipeline import run_mesh
from ..raster import RgbImage, normalize_depth_for_conditioning, render_depth, render_textured
from ..sampler import Condition
from ..uvspace import TextureAtlas, UvMask, rasterize_position_map
from .schemas import (
    DepthParams,
    DepthResult,
    HealthResult,
    InspectParams,
    InspectResult,
    PosmapParams,
    PosmapResult,
    PreviewParams,
    PreviewResult,
    TextureParams,
    TextureResult,
)

app = FastAPI(title="uvforge", version=__version__)


def _decode_image(b64: str) -> RgbImage:
    values = pngio.decode(pngio.from_b64(b64))
    if values.ndim == 2:
        values = np.repeat(values[:, :, None], 3, axis=2)
    return RgbImage(np.clip(values, 0.0, 1.0))


def texture_operation(params: TextureParams) -> TextureResult:
    mesh = normalize_to_unit(load_mesh_text(params.mesh_obj))
    reference = (
        _decode_image(params.reference_image_b64)
        if params.reference_image_b64 is not None
        else None
    )
    condition = Condition(
        prompt=params.prompt,
        reference_image=reference,
        negative_prompt=params.negative_prompt,
    )
    config = params.config.to_config()
    final, position, colored, trace = run_mesh(mesh, condition, config)
    return TextureResult(
        texture_b64=pngio.to_b64(pngio.encode_rgb8(final.values)),
        colored_mask_b64=pngio.to_b64(pngio.encode_mask(colored.values)),
        position_map_b64=pngio.to_b64(pngio.encode_rgb16(position.values)),
        trace={"config": config.to_dict(), **trace.to_dict()},
    )


def preview_operation(params: PreviewParams) -> PreviewResult:
    mesh = normalize_to_unit(load_mesh_text(params.mesh_obj))
    atlas_values = _decode_image(params.texture_b64).values
    atlas = TextureAtlas(atlas_values)
    colored = UvMask(np.ones(atlas_values.shape[:2], dtype=bool))
    size = (params.resolution, params.resolution)

    images = []
    for i in range(params.views):
        view = orbit_viewpoint(360.0 * i / params.views, params.elevation_deg)
        image, _, _ = render_textured(mesh, atlas, colored, view, size)
        images.append(pngio.to_b64(pngio.encode_rgb8(image.values)))
    return PreviewResult(images_b64=images)


def depth_operation(params: DepthParams) -> DepthResult:
    mesh = normalize_to_unit(load_mesh_text(params.mesh_obj))
    view = named_viewpoint(params.view)
    depth = render_depth(mesh, view, (params.resolution, params.resolution))
    gray = normalize_depth_for_conditioning(depth).values[:, :, 0]
    return DepthResult(depth_b64=pngio.to_b64(pngio.encode_gray16(gray)))


def posmap_operation(params: PosmapParams) -> PosmapResult:
    mesh = normalize_to_unit(load_mesh_text(params.mesh_obj))
    position = rasterize_position_map(mesh, params.resolution)
    return PosmapResult(
        position_map_b64=pngio.to_b64(pngio.encode_rgb16(position.values))
    )


def inspect_operation(params: InspectParams) -> InspectResult:
    report = inspect(load_mesh_text(params.mesh_obj))
    return InspectResult(**report.to_dict())


@contextmanager
def _translate_errors():
    try:
        yield
    except (MeshError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except BackendError as exc:
        raise HTTPException(status_code=502, detail=str(exc)) from exc


@app.get("/v1/health", response_model=HealthResult)
def health() -> HealthResult:
    return HealthResult(status="ok", version=__version__)


@app.post("/v1/texture", response_model=TextureResult)
def texture(params: TextureParams) -> TextureResult:
    with _translate_errors():
        return texture_operation(params)


@app.post("/v1/preview", response_model=PreviewResult)
def preview(params: PreviewParams) -> PreviewResult:
    with _translate_errors():
        return preview_operation(params)


@app.post("/v1/depth", response_model=DepthResult)
def depth(params: DepthParams) -> DepthResult:
    with _translate_errors():
        return depth_operation(params)


@app.post("/v1/posmap", response_model=PosmapResult)
def posmap(params: PosmapParams) -> PosmapResult:
    with _translate_errors():
        return posmap_operation(params)


@app.post("/v1/inspect", response_model=InspectResult)
def inspect_mesh(params: InspectParams) -> InspectResult:
    with _translate_errors():
        return inspect_operation(params)
