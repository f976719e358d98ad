"""Command line interface.

Commands run in-process by default; with --server they post to a running
service instead and write the returned artifacts, so the CLI stays a thin
client over the same operations. Exit codes: 0 success, 1 usage error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import httpx
import numpy as np

from . import __version__, pipeline, pngio
from .errors import UvforgeError
from .raster import RgbImage
from .sampler import Condition
from .service import schemas
from .service.app import (
    depth_operation,
    inspect_operation,
    posmap_operation,
    preview_operation,
)

log = logging.getLogger(__name__)

_REMOTE_TIMEOUT = 600.0


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> _Parser:
    parser = _Parser(prog="uvforge", description="Texture meshes from text or image prompts.")
    parser.add_argument("--version", action="version", version=f"uvforge {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    texture = commands.add_parser("texture", help="generate a texture atlas for a mesh")
    texture.add_argument("--mesh", required=True, help="path to a Wavefront OBJ file")
    texture.add_argument("--prompt", help="text appearance prompt")
    texture.add_argument("--image", help="reference image (PNG) as appearance prompt")
    texture.add_argument("--negative", help="negative text prompt")
    texture.add_argument("--out", default="out", help="output directory (default: out)")
    texture.add_argument("--config", help="JSON config file mirroring the pipeline fields")
    texture.add_argument("--backend", choices=["mock", "http"], help="generation backend")
    texture.add_argument("--endpoint", help="uvforge/1 backend endpoint "
                                            "(fallback: UVFORGE_ENDPOINT)")
    texture.add_argument("--seed", type=int, help="master random seed")
    texture.add_argument("--atlas-res", type=int, help="atlas resolution in texels")
    texture.add_argument("--view-res", type=int, help="render resolution per view")
    texture.add_argument("--views", type=int, help="total viewpoints (2, 4, 6 or 8)")
    texture.add_argument("--per-iter", type=int, choices=[1, 2],
                         help="viewpoints painted per iteration")
    texture.add_argument("--strength", type=float, help="coarse denoising strength")
    texture.add_argument("--refine-strength", type=float, help="refinement denoising strength")
    texture.add_argument("--dilation", type=int, help="seam dilation radius in texels")
    texture.add_argument("--no-position-map", action="store_true", default=None,
                         help="drop position-map conditioning in refinement")
    texture.add_argument("--debug", action="store_true", help="write per-iteration debug images")
    texture.add_argument("--server", help="run via a service instance at this URL")
    texture.set_defaults(func=cmd_texture, parser=texture)

    preview = commands.add_parser("preview", help="render turntable views of a textured mesh")
    preview.add_argument("--mesh", required=True)
    preview.add_argument("--texture", required=True, help="texture atlas PNG")
    preview.add_argument("--views", type=int, default=20, help="number of azimuth steps")
    preview.add_argument("--res", type=int, default=512, help="image resolution")
    preview.add_argument("--out", default="out", help="output directory")
    preview.add_argument("--server", help="run via a service instance at this URL")
    preview.set_defaults(func=cmd_preview, parser=preview)

    depth = commands.add_parser("depth", help="render a normalized depth map")
    depth.add_argument("--mesh", required=True)
    depth.add_argument("--view", default="front",
                       help="viewpoint label (front, back, right, left, top, bottom, ...)")
    depth.add_argument("--res", type=int, default=512)
    depth.add_argument("--out", default="depth.png", help="output PNG path")
    depth.add_argument("--server", help="run via a service instance at this URL")
    depth.set_defaults(func=cmd_depth, parser=depth)

    posmap = commands.add_parser("posmap", help="rasterize the UV position map")
    posmap.add_argument("--mesh", required=True)
    posmap.add_argument("--res", type=int, default=512)
    posmap.add_argument("--out", default="position_map.png", help="output PNG path")
    posmap.add_argument("--server", help="run via a service instance at this URL")
    posmap.set_defaults(func=cmd_posmap, parser=posmap)

    inspect_cmd = commands.add_parser("inspect", help="print mesh statistics")
    inspect_cmd.add_argument("--mesh", required=True)
    inspect_cmd.add_argument("--json", action="store_true", help="machine-readable output")
    inspect_cmd.add_argument("--server", help="run via a service instance at this URL")
    inspect_cmd.set_defaults(func=cmd_inspect, parser=inspect_cmd)

    return parser


def _build_config(args) -> pipeline.PipelineConfig:
    data = pipeline.PipelineConfig().to_dict()
    if args.config:
        with open(args.config) as handle:
            file_data = json.load(handle)
        if not isinstance(file_data, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(file_data) - set(data)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update(file_data)
    overrides = {
        "atlas_resolution": args.atlas_res,
        "view_resolution": args.view_res,
        "total_viewpoints": args.views,
        "viewpoints_per_iteration": args.per_iter,
        "coarse_strength": args.strength,
        "refine_strength": args.refine_strength,
        "seed": args.seed,
        "dilation_radius": args.dilation,
        "backend": args.backend,
        "endpoint": args.endpoint,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_position_map:
        data["use_position_map"] = False
    if not data.get("endpoint"):
        data["endpoint"] = os.environ.get("UVFORGE_ENDPOINT") or None
    return pipeline.PipelineConfig.from_dict(data)


def _post(server: str, path: str, payload: dict) -> dict:
    url = server.rstrip("/") + path
    response = httpx.post(url, json=payload, timeout=_REMOTE_TIMEOUT)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise UvforgeError(f"server returned {response.status_code}: {detail}")
    return response.json()


def _write_b64(b64: str, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pngio.from_b64(b64))


def cmd_texture(args) -> int:
    if not args.prompt and not args.image:
        args.parser.error("one of --prompt or --image is required")
    config = _build_config(args)
    out = Path(args.out)

    if args.server:
        if args.debug:
            args.parser.error("--debug is only available without --server")
        reference_b64 = None
        if args.image:
            reference_b64 = pngio.to_b64(Path(args.image).read_bytes())
        payload = schemas.TextureParams(
            mesh_obj=Path(args.mesh).read_text(),
            prompt=args.prompt,
            negative_prompt=args.negative,
            reference_image_b64=reference_b64,
            config=schemas.ConfigModel(**config.to_dict()),
        ).model_dump()
        body = _post(args.server, "/v1/texture", payload)
        _write_b64(body["texture_b64"], out / "texture.png")
        _write_b64(body["colored_mask_b64"], out / "colored_mask.png")
        _write_b64(body["position_map_b64"], out / "position_map.png")
        with open(out / "trace.json", "w") as handle:
            json.dump(body["trace"], handle, indent=2, sort_keys=True)
    else:
        reference = None
        if args.image:
            reference = _decode_reference(args.image)
        condition = Condition(
            prompt=args.prompt,
            reference_image=reference,
            negative_prompt=args.negative,
        )
        pipeline.run(args.mesh, condition, config, out_dir=out, debug=args.debug)

    print(f"texture written to {out / 'texture.png'}")
    return 0


def _decode_reference(path: str) -> RgbImage:
    values = pngio.decode(Path(path).read_bytes())
    if values.ndim == 2:
        values = np.repeat(values[:, :, None], 3, axis=2)
    return RgbImage(np.clip(values, 0.0, 1.0))


def cmd_preview(args) -> int:
    payload = schemas.PreviewParams(
        mesh_obj=Path(args.mesh).read_text(),
        texture_b64=pngio.to_b64(Path(args.texture).read_bytes()),
        views=args.views,
        resolution=args.res,
    )
    if args.server:
        body = _post(args.server, "/v1/preview", payload.model_dump())
        images = body["images_b64"]
    else:
        images = preview_operation(payload).images_b64
    out = Path(args.out)
    for i, b64 in enumerate(images):
        _write_b64(b64, out / f"preview_{i:03d}.png")
    print(f"{len(images)} preview images written to {out}")
    return 0


def cmd_depth(args) -> int:
    payload = schemas.DepthParams(
        mesh_obj=Path(args.mesh).read_text(), view=args.view, resolution=args.res
    )
    if args.server:
        body = _post(args.server, "/v1/depth", payload.model_dump())
        b64 = body["depth_b64"]
    else:
        b64 = depth_operation(payload).depth_b64
    _write_b64(b64, Path(args.out))
    print(f"depth map written to {args.out}")
    return 0


def cmd_posmap(args) -> int:
    payload = schemas.PosmapParams(
        mesh_obj=Path(args.mesh).read_text(), resolution=args.res
    )
    if args.server:
        body = _post(args.server, "/v1/posmap", payload.model_dump())
        b64 = body["position_map_b64"]
    else:
        b64 = posmap_operation(payload).position_map_b64
    _write_b64(b64, Path(args.out))
    print(f"position map written to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    payload = schemas.InspectParams(mesh_obj=Path(args.mesh).read_text())
    if args.server:
        report = _post(args.server, "/v1/inspect", payload.model_dump())
    else:
        report = inspect_operation(payload).model_dump()
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(f"vertices:  {report['vertices']}")
        print(f"faces:     {report['faces']}")
        print(f"charts:    {report['charts']}")
        print(f"degenerate dropped: {report['dropped_degenerate']}")
        lo = ", ".join(f"{v:.4g}" for v in report["bounds_min"])
        hi = ", ".join(f"{v:.4g}" for v in report["bounds_max"])
        print(f"bounds:    ({lo}) to ({hi})")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (UvforgeError, httpx.HTTPError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
