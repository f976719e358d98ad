"""Request/response models for the HTTP service.

Meshes travel as OBJ source text, images as base64 PNG. Config overrides
mirror PipelineConfig field for field; unknown keys are rejected so typos
fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..pipeline import PipelineConfig


class ConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

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

    def to_config(self) -> PipelineConfig:
        return PipelineConfig(**self.model_dump())


class TextureParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mesh_obj: str
    prompt: str | None = None
    negative_prompt: str | None = None
    reference_image_b64: str | None = None
    config: ConfigModel = Field(default_factory=ConfigModel)


class TextureResult(BaseModel):
    texture_b64: str
    colored_mask_b64: str
    position_map_b64: str
    trace: dict


class PreviewParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mesh_obj: str
    texture_b64: str
    views: int = Field(default=20, ge=1, le=360)
    resolution: int = Field(default=512, ge=16, le=4096)
    elevation_deg: float = 15.0


class PreviewResult(BaseModel):
    images_b64: list[str]


class DepthParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mesh_obj: str
    view: str = "front"
    resolution: int = Field(default=512, ge=16, le=4096)


class DepthResult(BaseModel):
    depth_b64: str


class PosmapParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mesh_obj: str
    resolution: int = Field(default=512, ge=16, le=4096)


class PosmapResult(BaseModel):
    position_map_b64: str


class InspectParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mesh_obj: str


class InspectResult(BaseModel):
    vertices: int
    faces: int
    charts: int
    dropped_degenerate: int
    bounds_min: list[float]
    bounds_max: list[float]


class HealthResult(BaseModel):
    status: str
    version: str
