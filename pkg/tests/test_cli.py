import json

import numpy as np
import pytest

from stylviz import imaging
from stylviz.cli import main

DOC = {
    "chart": {"kind": "bar", "data": [3, 1, 2]},
    "prompts": {"context": "snacks", "subPrompts": ["fries", "hamburgers", "cupcakes"],
                "background": "a picnic table"},
    "workflow": {"seed": 0},
    "backend": {"type": "mock"},
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture
def done(tmp_path):
    state = tmp_path / "run"
    assert main(["generate", "-c", write(tmp_path, DOC), "--state", str(state)]) == 0
    return state


def test_generate(done, tmp_path, capsys):
    img = imaging.read_png(done / "final.png")
    assert img.shape == (512, 512, 3)
    out = tmp_path / "copy.png"
    assert main(["generate", "-c", write(tmp_path, DOC), "--state", str(tmp_path / "r2"), "-o", str(out)]) == 0
    assert np.array_equal(imaging.read_png(out), img)


def test_generate_validation_error(tmp_path, capsys):
    bad = json.loads(json.dumps(DOC))
    bad["chart"] = {"kind": "pie", "data": [1, -2]}
    assert main(["generate", "-c", write(tmp_path, bad), "--state", str(tmp_path / "r")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValidationError"
    assert any(p["field"] == "chart.data[1].value" for p in err["problems"])


def test_generate_backend_error_keeps_partial_state(tmp_path, capsys):
    doc = json.loads(json.dumps(DOC))
    doc["backend"]["capabilities"] = ["txt2img", "img2img", "depth2img", "inpaint"]
    state = tmp_path / "r"
    assert main(["generate", "-c", write(tmp_path, doc), "--state", str(state)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["stage"] == "synth" and err["cause"] == "UnsupportedPipeline"
    assert (state / "sketch" / "sketch.png").exists()


def test_seed_override_equals_config_edit(tmp_path):
    assert main(["generate", "-c", write(tmp_path, DOC), "--state", str(tmp_path / "a"), "--seed", "5"]) == 0
    doc = json.loads(json.dumps(DOC))
    doc["workflow"]["seed"] = 5
    assert main(["generate", "-c", write(tmp_path, doc, "b.json"), "--state", str(tmp_path / "b")]) == 0
    assert np.array_equal(imaging.read_png(tmp_path / "a" / "final.png"),
                          imaging.read_png(tmp_path / "b" / "final.png"))


def test_regen_mark_is_local_and_versioned(done):
    before = imaging.read_png(done / "final.png")
    assert main(["regen", "--state", str(done), "--mark", "2"]) == 0
    after = imaging.read_png(done / "final_v1.png")
    region = imaging.dilate(imaging.read_mask(done / "masks" / "mark_2.png"), 4)
    assert np.array_equal(after[~region], before[~region])
    assert not np.array_equal(after[region], before[region])
    assert np.array_equal(imaging.read_png(done / "final.png"), before)
    assert main(["regen", "--state", str(done), "--background", "--prompt", "field of tulips"]) == 0
    v2 = imaging.read_png(done / "final_v2.png")
    marks = ~imaging.read_mask(done / "masks" / "mark_0.png")
    bg = np.ones(marks.shape, bool)
    for i in range(3):
        bg &= ~imaging.read_mask(done / "masks" / f"mark_{i}.png")
    assert np.array_equal(v2[~bg], after[~bg])


def test_regen_mask_and_errors(done, tmp_path, capsys):
    mask = np.zeros((512, 512), bool)
    mask[:64, :64] = True
    imaging.write_mask(tmp_path / "m.png", mask)
    assert main(["regen", "--state", str(done), "--mask", str(tmp_path / "m.png"), "--prompt", "sun",
                 "--strength", "0.2"]) == 0
    assert main(["regen", "--state", str(done), "--mark", "9"]) == 1
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "UnknownMark"


def test_inspect(done, tmp_path, capsys):
    capsys.readouterr()
    assert main(["inspect", "--state", str(done), "trace"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["stages"] == ["sketch", "synth", "refine"]
    assert main(["inspect", "--state", str(done), "final"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["checksum"] == imaging.checksum(imaging.read_png(done / "final.png"))
    assert main(["inspect", "--state", str(done), "plain"]) == 0
    assert len(json.loads(capsys.readouterr().out)["marks"]) == 3
    assert main(["inspect", "--state", str(tmp_path / "nowhere"), "sketch"]) == 1
    (done / "synth.png").unlink()
    assert main(["inspect", "--state", str(done), "synth"]) == 1
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "MissingStage"
