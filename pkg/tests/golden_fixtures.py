"""Deterministic fixture requests backing the committed wire-protocol goldens.

Everything here is pure arithmetic so the same bytes come out on every
machine. make_goldens.py serializes these; test_sampler.py compares against
the committed files; the adapter conformance suite replays the same files.
"""

from __future__ import annotations

import numpy as np

from uvforge.raster import RgbImage
from uvforge.sampler import Condition, SampleRequest


def pattern_image(width: int, height: int, phase: int = 0) -> RgbImage:
    """A deterministic color pattern quantized exactly to 8-bit levels."""
    idx = np.arange(height * width * 3).reshape(height, width, 3)
    return RgbImage(((idx * 37 + phase) % 256).astype(np.float32) / 255.0)


def gradient_control(width: int, height: int) -> RgbImage:
    """Vertical brightness ramp standing in for a depth/position rendering."""
    ramp = np.linspace(0.0, 1.0, height, dtype=np.float32)
    values = np.repeat(ramp[:, None, None], 3, axis=2)
    return RgbImage(np.broadcast_to(values, (height, width, 3)).copy())


def hole_mask(width: int, height: int) -> np.ndarray:
    """All-keep mask with a 2x2 hole just off center."""
    keep = np.ones((height, width), dtype=bool)
    keep[3:5, 3:5] = False
    return keep


def golden_request(kind: str) -> SampleRequest:
    if kind == "generate":
        return SampleRequest(
            kind="generate",
            condition=Condition(prompt="weathered bronze statue"),
            width=16,
            height=8,
            seed=7,
            strength=1.0,
            control_image=gradient_control(16, 8),
        )
    if kind == "inpaint":
        return SampleRequest(
            kind="inpaint",
            condition=Condition(prompt="weathered bronze statue",
                                negative_prompt="blurry"),
            width=16,
            height=8,
            seed=8,
            strength=1.0,
            init_image=pattern_image(16, 8),
            keep_mask=hole_mask(16, 8),
            control_image=gradient_control(16, 8),
        )
    if kind == "uv_inpaint":
        return SampleRequest(
            kind="uv_inpaint",
            condition=Condition(prompt="weathered bronze statue"),
            width=8,
            height=8,
            seed=1007,
            strength=0.75,
            init_image=pattern_image(8, 8),
            keep_mask=hole_mask(8, 8),
            control_image=gradient_control(8, 8),
        )
    if kind == "uv_hd":
        return SampleRequest(
            kind="uv_hd",
            condition=Condition(prompt="weathered bronze statue",
                                reference_image=pattern_image(8, 8, phase=101)),
            width=8,
            height=8,
            seed=1008,
            strength=0.75,
            init_image=pattern_image(8, 8, phase=53),
            control_image=gradient_control(8, 8),
        )
    raise ValueError(f"no golden fixture for kind {kind!r}")
