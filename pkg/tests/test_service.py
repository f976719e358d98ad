import numpy as np
import pytest
from fastapi.testclient import TestClient

from uvforge import pngio
from uvforge.service.app import app

from golden_fixtures import pattern_image

from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"

client = TestClient(app)


def cube_obj():
    return (FIXTURES / "cube.obj").read_text()


SMALL_CONFIG = {
    "atlas_resolution": 64,
    "view_resolution": 128,
    "total_viewpoints": 2,
    "seed": 5,
}


def test_health():
    response = client.get("/v1/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_texture_endpoint_returns_artifacts():
    response = client.post("/v1/texture", json={
        "mesh_obj": cube_obj(),
        "prompt": "mossy stone",
        "config": SMALL_CONFIG,
    })
    assert response.status_code == 200
    body = response.json()

    texture = pngio.decode(pngio.from_b64(body["texture_b64"]))
    assert texture.shape == (64, 64, 3)
    mask = pngio.decode(pngio.from_b64(body["colored_mask_b64"]))
    assert mask.shape == (64, 64)
    assert set(np.unique(mask)) <= {0.0, 1.0}
    position = pngio.decode(pngio.from_b64(body["position_map_b64"]))
    assert position.shape == (64, 64, 3)

    trace = body["trace"]
    assert trace["config"]["seed"] == 5
    assert trace["requests"] == 1 + 2
    assert len(trace["views"]) == 2


def test_texture_endpoint_is_deterministic():
    payload = {"mesh_obj": cube_obj(), "prompt": "mossy stone", "config": SMALL_CONFIG}
    first = client.post("/v1/texture", json=payload).json()
    second = client.post("/v1/texture", json=payload).json()
    assert first["texture_b64"] == second["texture_b64"]


def test_texture_endpoint_rejects_bad_mesh():
    response = client.post("/v1/texture", json={
        "mesh_obj": "v 0 0\nf 1 2 3\n",
        "prompt": "x",
    })
    assert response.status_code == 422
    assert "detail" in response.json()


def test_texture_endpoint_rejects_missing_condition():
    response = client.post("/v1/texture", json={"mesh_obj": cube_obj()})
    assert response.status_code == 422


def test_texture_endpoint_rejects_unknown_config_key():
    response = client.post("/v1/texture", json={
        "mesh_obj": cube_obj(),
        "prompt": "x",
        "config": {"atlas_size": 64},
    })
    assert response.status_code == 422


def test_preview_endpoint_counts_views():
    atlas = pattern_image(64, 64)
    response = client.post("/v1/preview", json={
        "mesh_obj": cube_obj(),
        "texture_b64": pngio.to_b64(pngio.encode_rgb8(atlas.values)),
        "views": 4,
        "resolution": 64,
    })
    assert response.status_code == 200
    images = response.json()["images_b64"]
    assert len(images) == 4
    for b64 in images:
        assert pngio.decode(pngio.from_b64(b64)).shape == (64, 64, 3)
    # the cube is visible from every orbit azimuth
    first = pngio.decode(pngio.from_b64(images[0]))
    assert first.max() > 0.0


def test_depth_endpoint_named_views():
    response = client.post("/v1/depth", json={
        "mesh_obj": cube_obj(),
        "view": "front",
        "resolution": 64,
    })
    assert response.status_code == 200
    depth = pngio.decode(pngio.from_b64(response.json()["depth_b64"]))
    assert depth.shape == (64, 64)
    assert depth.max() == 1.0  # flat front face renders at constant depth

    bad = client.post("/v1/depth", json={"mesh_obj": cube_obj(), "view": "sideways"})
    assert bad.status_code == 422


def test_posmap_endpoint():
    response = client.post("/v1/posmap", json={
        "mesh_obj": cube_obj(),
        "resolution": 64,
    })
    assert response.status_code == 200
    position = pngio.decode(pngio.from_b64(response.json()["position_map_b64"]))
    assert position.shape == (64, 64, 3)
    assert position.max() > 0.9  # corners of the unit cube reach the range limits


def test_inspect_endpoint():
    response = client.post("/v1/inspect", json={"mesh_obj": cube_obj()})
    assert response.status_code == 200
    body = response.json()
    assert body["vertices"] == 8
    assert body["faces"] == 12
    assert body["charts"] == 6
    assert body["dropped_degenerate"] == 0
    assert body["bounds_min"] == [-0.5, -0.5, -0.5]
    assert body["bounds_max"] == [0.5, 0.5, 0.5]


def test_unknown_request_field_is_rejected():
    response = client.post("/v1/inspect", json={"mesh_obj": cube_obj(), "extra": 1})
    assert response.status_code == 422
