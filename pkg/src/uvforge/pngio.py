"""PNG encoding/decoding used by the wire protocol and the debug writers.

All in-memory images are float arrays in [0, 1]; this module owns the
quantization to 8- or 16-bit PNG and back. Encoding is deterministic for a
given input, which the protocol golden files rely on.
"""

from __future__ import annotations

import base64

import cv2
import numpy as np

from .errors import UvforgeError


def encode_rgb8(values: np.ndarray) -> bytes:
    """Encode an (H, W, 3) float array in [0, 1] as an 8-bit RGB PNG."""
    arr = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    return _imencode(arr[..., ::-1])


def encode_gray8(values: np.ndarray) -> bytes:
    """Encode an (H, W) float array in [0, 1] as an 8-bit grayscale PNG."""
    arr = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    return _imencode(arr)


def encode_mask(mask: np.ndarray) -> bytes:
    """Encode a boolean (H, W) mask as an 8-bit PNG with values 0/255."""
    return _imencode(np.where(mask, 255, 0).astype(np.uint8))


def encode_gray16(values: np.ndarray) -> bytes:
    """Encode an (H, W) float array in [0, 1] as a 16-bit grayscale PNG."""
    arr = np.rint(np.clip(values, 0.0, 1.0) * 65535.0).astype(np.uint16)
    return _imencode(arr)


def encode_rgb16(values: np.ndarray) -> bytes:
    """Encode an (H, W, 3) float array in [0, 1] as a 16-bit RGB PNG."""
    arr = np.rint(np.clip(values, 0.0, 1.0) * 65535.0).astype(np.uint16)
    return _imencode(arr[..., ::-1])


def decode(data: bytes) -> np.ndarray:
    """Decode a PNG to float32 in [0, 1], shape (H, W) or (H, W, 3).

    Handles 8- and 16-bit depths; an alpha channel, if present, is dropped.
    """
    raw = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise UvforgeError("not a decodable PNG")
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    arr = raw.astype(np.float32) / scale
    if arr.ndim == 3:
        if arr.shape[2] == 4:
            arr = arr[..., :3]
        arr = arr[..., ::-1].copy()
    return arr


def to_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def from_b64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def _imencode(arr: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", arr)
    if not ok:
        raise UvforgeError("PNG encoding failed")
    return buf.tobytes()
