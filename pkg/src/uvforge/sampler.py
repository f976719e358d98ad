"""Conditional image generation interface with mock and HTTP backends.

Requests carry everything a backend needs: kind, conditioning, init image,
keep mask, control image, seed and strength. The engine owns two contracts
no backend is trusted with: response dimensions must match the request, and
for inpainting kinds every keep_mask=1 pixel is re-composited from the init
image bit-exactly.

Wire protocol "uvforge/1": HTTP POST {endpoint}/v1/sample with a canonical
JSON body (sorted keys, no spaces); images are base64 PNG. Responses are
{"image_b64": ..., "backend_id": ...}. Status 400 means malformed JSON, 422
a contract violation (with a message), 503 busy.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from typing import Protocol

import httpx
import numpy as np

from . import pngio
from .errors import (
    BackendRejected,
    BackendUnavailable,
    ContractViolation,
    DimensionMismatch,
    OddWidth,
    Timeout,
)
from .raster import RgbImage

KINDS = ("generate", "inpaint", "uv_inpaint", "uv_hd")
_CONTROL_KIND = {
    "generate": "depth",
    "inpaint": "depth",
    "uv_inpaint": "position",
    "uv_hd": "position",
}


@dataclass(frozen=True, eq=False)
class Condition:
    """Appearance conditioning: a text prompt, a reference image, or both."""

    prompt: str | None = None
    reference_image: RgbImage | None = None
    negative_prompt: str | None = None

    def __post_init__(self):
        if self.prompt is None and self.reference_image is None:
            raise ValueError("condition needs a prompt or a reference image")


@dataclass(frozen=True, eq=False)
class SampleRequest:
    kind: str
    condition: Condition
    width: int
    height: int
    seed: int
    strength: float
    init_image: RgbImage | None = None
    keep_mask: np.ndarray | None = None  # (H, W) bool, 1 = preserve pixel
    control_image: RgbImage | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown request kind {self.kind!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must lie in [0, 1]")
        if self.kind in ("inpaint", "uv_inpaint"):
            if self.init_image is None or self.keep_mask is None:
                raise ValueError(f"{self.kind} requires init_image and keep_mask")
        if self.kind == "uv_hd" and self.init_image is None:
            raise ValueError("uv_hd requires init_image")
        if self.keep_mask is not None:
            object.__setattr__(self, "keep_mask", np.asarray(self.keep_mask, dtype=bool))
        for name in ("init_image", "control_image"):
            image = getattr(self, name)
            if image is not None and (image.width, image.height) != (self.width, self.height):
                raise DimensionMismatch(f"{name} does not match request dimensions")
        if self.keep_mask is not None and self.keep_mask.shape != (self.height, self.width):
            raise DimensionMismatch("keep_mask does not match request dimensions")

    @property
    def control_kind(self) -> str | None:
        return _CONTROL_KIND[self.kind] if self.control_image is not None else None


@dataclass(frozen=True, eq=False)
class SampleResponse:
    image: RgbImage
    backend_id: str
    elapsed: float


class Backend(Protocol):
    def run(self, request: SampleRequest) -> tuple[RgbImage, str]: ...


def compose_grid(images: tuple[RgbImage, RgbImage]) -> RgbImage:
    """Concatenate two equally sized images horizontally, first on the left."""
    left, right = images
    if left.values.shape != right.values.shape:
        raise DimensionMismatch("grid halves must share dimensions")
    return RgbImage(np.concatenate([left.values, right.values], axis=1))


def split_grid(grid: RgbImage) -> tuple[RgbImage, RgbImage]:
    """Split a horizontally composed grid back into its two halves."""
    if grid.width % 2 != 0:
        raise OddWidth(f"grid width {grid.width} is not even")
    half = grid.width // 2
    return RgbImage(grid.values[:, :half].copy()), RgbImage(grid.values[:, half:].copy())


def sample(backend: Backend, request: SampleRequest) -> SampleResponse:
    """Run one request and enforce the dimension and keep contracts.

    Whatever the backend returns, keep_mask=1 pixels of inpainting kinds are
    overwritten with the init image so kept regions are preserved bit-exactly.
    """
    start = time.perf_counter()
    image, backend_id = backend.run(request)
    if (image.width, image.height) != (request.width, request.height):
        raise ContractViolation(
            f"backend returned {image.width}x{image.height}, "
            f"requested {request.width}x{request.height}"
        )
    if request.kind in ("inpaint", "uv_inpaint"):
        keep = request.keep_mask[:, :, None]
        image = RgbImage(np.where(keep, request.init_image.values, image.values))
    return SampleResponse(
        image=image, backend_id=backend_id, elapsed=time.perf_counter() - start
    )


# --- mock backend -----------------------------------------------------------


def mock_backend(palette_seed: int = 0) -> Backend:
    """Deterministic desk-scale stand-in for a diffusion backend.

    generate paints a smooth hue field (hue from a hash of prompt and seed)
    whose brightness follows the control image, so outputs stay geometrically
    correlated across views. uv_inpaint fills holes with the mean color of
    the nearest kept texels found by an expanding ring search; uv_hd is the
    identity.
    """
    return _MockBackend(palette_seed)


class _MockBackend:
    def __init__(self, palette_seed: int):
        self.palette_seed = int(palette_seed)

    def run(self, request: SampleRequest) -> tuple[RgbImage, str]:
        if request.kind == "generate":
            image = self._field(request)
        elif request.kind == "inpaint":
            field = self._field(request)
            keep = request.keep_mask[:, :, None]
            image = RgbImage(np.where(keep, request.init_image.values, field.values))
        elif request.kind == "uv_inpaint":
            image = self._ring_fill(request)
        else:  # uv_hd
            image = request.init_image
        return image, f"mock:{self.palette_seed}"

    def _hue(self, request: SampleRequest) -> float:
        prompt = request.condition.prompt or ""
        digest = hashlib.sha256(f"{prompt}\x1f{request.seed}".encode()).digest()
        return int.from_bytes(digest[:8], "big") / 2.0**64

    def _palette_color(self) -> np.ndarray:
        digest = hashlib.sha256(f"palette\x1f{self.palette_seed}".encode()).digest()
        hue = int.from_bytes(digest[:8], "big") / 2.0**64
        return _hsv_to_rgb(
            np.full((1, 1), hue, np.float32),
            np.full((1, 1), 0.55, np.float32),
            np.full((1, 1), 0.75, np.float32),
        )[0, 0]

    def _field(self, request: SampleRequest) -> RgbImage:
        h, w = request.height, request.width
        base = self._hue(request)
        xx = np.linspace(0.0, 1.0, w, dtype=np.float32)[None, :]
        yy = np.linspace(0.0, 1.0, h, dtype=np.float32)[:, None]
        hue = (base + 0.15 * xx + 0.1 * yy) % 1.0
        hue = np.broadcast_to(hue, (h, w)).astype(np.float32)
        sat = np.full((h, w), 0.55, dtype=np.float32)
        if request.control_image is not None:
            luma = request.control_image.values.mean(axis=2)
            val = (0.35 + 0.6 * luma).astype(np.float32)
        else:
            val = np.full((h, w), 0.75, dtype=np.float32)
        return RgbImage(_hsv_to_rgb(hue, sat, val))

    def _ring_fill(self, request: SampleRequest) -> RgbImage:
        keep = request.keep_mask
        init = request.init_image.values
        out = init.copy()
        h, w = keep.shape
        cap = int(np.ceil(np.hypot(h, w)))
        fallback = self._palette_color()
        holes = np.argwhere(~keep)
        for y, x in holes:
            radius = 1
            color = None
            while True:
                y0, y1 = max(0, y - radius), min(h, y + radius + 1)
                x0, x1 = max(0, x - radius), min(w, x + radius + 1)
                window = keep[y0:y1, x0:x1]
                if window.any():
                    # row-major selection keeps the mean bit-reproducible
                    picked = init[y0:y1, x0:x1][window]
                    color = np.mean(picked, axis=0)
                    break
                if radius >= cap:
                    break
                radius = min(radius * 2, cap)
            out[y, x] = fallback if color is None else color
        return RgbImage(out)


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV to RGB, float32 in [0, 1]."""
    i = np.floor(h * 6.0).astype(np.int64) % 6
    f = (h * 6.0) - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.clip(np.stack([r, g, b], axis=2), 0.0, 1.0).astype(np.float32)


# --- wire protocol ----------------------------------------------------------


def encode_request(request: SampleRequest) -> bytes:
    """Serialize a request to the canonical uvforge/1 JSON body.

    Canonical means sorted keys and no whitespace, so identical requests
    produce identical bytes. Depth controls travel as 8-bit PNG, position
    controls as 16-bit PNG to preserve coordinate precision.
    """
    cond = request.condition
    control_b64 = None
    if request.control_image is not None:
        if request.control_kind == "position":
            control_png = pngio.encode_rgb16(request.control_image.values)
        else:
            control_png = pngio.encode_rgb8(request.control_image.values)
        control_b64 = pngio.to_b64(control_png)
    payload = {
        "kind": request.kind,
        "prompt": cond.prompt,
        "negative_prompt": cond.negative_prompt,
        "reference_image_b64": _maybe_rgb8(cond.reference_image),
        "init_image_b64": _maybe_rgb8(request.init_image),
        "keep_mask_b64": (
            pngio.to_b64(pngio.encode_mask(request.keep_mask))
            if request.keep_mask is not None
            else None
        ),
        "control_image_b64": control_b64,
        "control_kind": request.control_kind,
        "seed": int(request.seed),
        "strength": float(request.strength),
        "width": int(request.width),
        "height": int(request.height),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def decode_response(body: bytes) -> tuple[RgbImage, str]:
    """Parse a uvforge/1 response body into an image and backend id."""
    try:
        payload = json.loads(body)
        image_b64 = payload["image_b64"]
        backend_id = str(payload.get("backend_id", ""))
    except (ValueError, KeyError, TypeError) as exc:
        raise ContractViolation(f"bad response body: {exc}") from exc
    try:
        decoded = pngio.decode(pngio.from_b64(image_b64))
    except Exception as exc:
        raise ContractViolation(f"response image does not decode: {exc}") from exc
    if decoded.ndim == 2:
        decoded = np.repeat(decoded[:, :, None], 3, axis=2)
    return RgbImage(np.clip(decoded, 0.0, 1.0)), backend_id


def _maybe_rgb8(image: RgbImage | None) -> str | None:
    if image is None:
        return None
    return pngio.to_b64(pngio.encode_rgb8(image.values))


# --- HTTP backend -----------------------------------------------------------


def http_backend(endpoint: str, timeout: float = 120.0, retries: int = 3) -> Backend:
    """Client for a uvforge/1 server; retries transport errors only."""
    return _HttpBackend(endpoint, timeout, retries)


class _HttpBackend:
    def __init__(self, endpoint: str, timeout: float, retries: int):
        self.url = endpoint.rstrip("/") + "/v1/sample"
        self.retries = max(1, int(retries))
        self._client = httpx.Client(timeout=timeout)

    def run(self, request: SampleRequest) -> tuple[RgbImage, str]:
        body = encode_request(request)
        last_error: Exception | None = None
        for _ in range(self.retries):
            try:
                response = self._client.post(
                    self.url, content=body, headers={"content-type": "application/json"}
                )
            except httpx.TimeoutException as exc:
                last_error = exc
                continue
            except httpx.TransportError as exc:
                last_error = exc
                continue
            return self._handle(response)
        if isinstance(last_error, httpx.TimeoutException):
            raise Timeout(f"no response after {self.retries} attempts") from last_error
        raise BackendUnavailable(str(last_error)) from last_error

    def _handle(self, response: httpx.Response) -> tuple[RgbImage, str]:
        if response.status_code == 200:
            return decode_response(response.content)
        if 400 <= response.status_code < 500:
            raise BackendRejected(_error_message(response))
        raise BackendUnavailable(
            f"backend returned status {response.status_code}"
        )


def _error_message(response: httpx.Response) -> str:
    try:
        payload = response.json()
        if isinstance(payload, dict) and "message" in payload:
            return str(payload["message"])
    except ValueError:
        pass
    return f"status {response.status_code}: {response.text[:200]}"
