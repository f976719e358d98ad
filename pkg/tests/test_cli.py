import json
import threading
import time
from pathlib import Path

import numpy as np
import pytest
import uvicorn

from uvforge import pngio
from uvforge.cli import main
from uvforge.service.app import app

FIXTURES = Path(__file__).parent / "fixtures"
CUBE = str(FIXTURES / "cube.obj")

SMALL = ["--atlas-res", "64", "--view-res", "128", "--views", "2"]


def test_texture_happy_path(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["texture", "--mesh", CUBE, "--prompt", "wooden crate",
                 "--backend", "mock", "--out", str(out), *SMALL])
    assert code == 0
    assert (out / "texture.png").exists()
    assert (out / "trace.json").exists()
    assert "texture written" in capsys.readouterr().out


def test_texture_debug_writes_iteration_images(tmp_path):
    out = tmp_path / "out"
    code = main(["texture", "--mesh", CUBE, "--prompt", "crate",
                 "--out", str(out), "--debug", *SMALL])
    assert code == 0
    debug_files = list((out / "debug").glob("*.png"))
    assert debug_files


def test_texture_requires_mesh(capsys):
    code = main(["texture", "--prompt", "crate"])
    assert code == 1
    err = capsys.readouterr().err
    assert "usage:" in err
    assert "--mesh" in err


def test_texture_requires_prompt_or_image(capsys):
    code = main(["texture", "--mesh", CUBE])
    assert code == 1
    assert "--prompt or --image" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    code = main(["texture", "--mesh", CUBE, "--prompt", "x", "--sharpen"])
    assert code == 1
    assert "usage:" in capsys.readouterr().err


def test_unknown_command_is_usage_error(capsys):
    assert main(["generate"]) == 1


def test_broken_mesh_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0\nf 1 2 3\n")
    code = main(["texture", "--mesh", str(bad), "--prompt", "x",
                 "--out", str(tmp_path / "out"), *SMALL])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_missing_mesh_file_is_runtime_error(tmp_path, capsys):
    code = main(["texture", "--mesh", str(tmp_path / "nope.obj"), "--prompt", "x"])
    assert code == 2


def test_config_file_layering(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({
        "seed": 9, "atlas_resolution": 64, "view_resolution": 128,
        "total_viewpoints": 2,
    }))
    out = tmp_path / "out"
    code = main(["texture", "--mesh", CUBE, "--prompt", "crate",
                 "--config", str(config_file), "--seed", "21", "--out", str(out)])
    assert code == 0
    effective = json.loads((out / "trace.json").read_text())["config"]
    assert effective["seed"] == 21            # flag beats file
    assert effective["atlas_resolution"] == 64  # file beats default
    assert effective["viewpoints_per_iteration"] == 2  # untouched default


def test_config_file_unknown_key_is_runtime_error(tmp_path, capsys):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"atlas_size": 64}))
    code = main(["texture", "--mesh", CUBE, "--prompt", "x",
                 "--config", str(config_file), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_endpoint_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("UVFORGE_ENDPOINT", "http://diffusion.internal:9090")
    out = tmp_path / "out"
    code = main(["texture", "--mesh", CUBE, "--prompt", "crate",
                 "--out", str(out), *SMALL])
    assert code == 0
    effective = json.loads((out / "trace.json").read_text())["config"]
    assert effective["endpoint"] == "http://diffusion.internal:9090"


def test_no_position_map_flag(tmp_path):
    out = tmp_path / "out"
    code = main(["texture", "--mesh", CUBE, "--prompt", "crate",
                 "--out", str(out), "--no-position-map", *SMALL])
    assert code == 0
    trace = json.loads((out / "trace.json").read_text())
    assert trace["config"]["use_position_map"] is False
    assert [r["control"] for r in trace["refinements"]] == [None, None]


def make_texture(tmp_path) -> Path:
    out = tmp_path / "tex"
    assert main(["texture", "--mesh", CUBE, "--prompt", "crate",
                 "--out", str(out), *SMALL]) == 0
    return out / "texture.png"


def test_preview_writes_numbered_images(tmp_path):
    texture = make_texture(tmp_path)
    out = tmp_path / "previews"
    code = main(["preview", "--mesh", CUBE, "--texture", str(texture),
                 "--views", "4", "--res", "64", "--out", str(out)])
    assert code == 0
    files = sorted(out.glob("preview_*.png"))
    assert [f.name for f in files] == [f"preview_{i:03d}.png" for i in range(4)]
    for f in files:
        assert pngio.decode(f.read_bytes()).shape == (64, 64, 3)


def test_depth_command(tmp_path):
    out = tmp_path / "depth.png"
    code = main(["depth", "--mesh", CUBE, "--view", "top", "--res", "64",
                 "--out", str(out)])
    assert code == 0
    depth = pngio.decode(out.read_bytes())
    assert depth.shape == (64, 64)
    assert depth.max() > 0.0


def test_depth_unknown_view_is_runtime_error(tmp_path, capsys):
    code = main(["depth", "--mesh", CUBE, "--view", "sideways",
                 "--out", str(tmp_path / "d.png")])
    assert code == 2
    assert "unknown viewpoint" in capsys.readouterr().err


def test_posmap_command(tmp_path):
    out = tmp_path / "pos.png"
    code = main(["posmap", "--mesh", CUBE, "--res", "64", "--out", str(out)])
    assert code == 0
    position = pngio.decode(out.read_bytes())
    assert position.shape == (64, 64, 3)


def test_inspect_command(capsys):
    assert main(["inspect", "--mesh", CUBE]) == 0
    out = capsys.readouterr().out
    assert "vertices:  8" in out
    assert "charts:    6" in out


def test_inspect_json(capsys):
    assert main(["inspect", "--mesh", CUBE, "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["faces"] == 12


# --- remote mode ------------------------------------------------------------


@pytest.fixture(scope="module")
def server_url():
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5.0)


def test_remote_texture_writes_same_artifacts(tmp_path, server_url):
    local = tmp_path / "local"
    remote = tmp_path / "remote"
    argv = ["texture", "--mesh", CUBE, "--prompt", "crate", "--seed", "4", *SMALL]
    assert main([*argv, "--out", str(local)]) == 0
    assert main([*argv, "--out", str(remote), "--server", server_url]) == 0

    for name in ("texture.png", "colored_mask.png", "position_map.png"):
        assert (remote / name).exists(), name
    local_tex = pngio.decode((local / "texture.png").read_bytes())
    remote_tex = pngio.decode((remote / "texture.png").read_bytes())
    assert np.array_equal(local_tex, remote_tex)

    trace = json.loads((remote / "trace.json").read_text())
    assert trace["config"]["seed"] == 4


def test_remote_inspect(server_url, capsys):
    assert main(["inspect", "--mesh", CUBE, "--json", "--server", server_url]) == 0
    assert json.loads(capsys.readouterr().out)["charts"] == 6


def test_remote_rejects_debug_flag(server_url, capsys):
    code = main(["texture", "--mesh", CUBE, "--prompt", "x", "--debug",
                 "--server", server_url])
    assert code == 1
    assert "--debug" in capsys.readouterr().err


def test_remote_server_down_is_runtime_error(tmp_path, capsys):
    code = main(["texture", "--mesh", CUBE, "--prompt", "x",
                 "--out", str(tmp_path / "out"), "--server", "http://127.0.0.1:9",
                 *SMALL])
    assert code == 2
    assert "error:" in capsys.readouterr().err
