import json
import subprocess
import sys

import pytest

from urdforge.assembly import node_regions
from urdforge.cli import main
from urdforge.procgen import GenConfig, sample_object
from urdforge.scene import dumps, loads, validate


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_empty(tmp_path):
    assert main(["generate", "--n", "0", "--out", str(tmp_path / "d")]) == 0
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["entries"] == []


def test_generate_writes_valid_scenes(tmp_path):
    out = tmp_path / "d"
    assert main(["generate", "--n", "6", "--seed", "3", "--urdf", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["entries"]) == 6
    for e in manifest["entries"]:
        assert validate(loads((out / e["scene"]).read_text())) == []
    assert len(list((out / "urdf").iterdir())) == 6


def test_generate_rerun_identical(tmp_path):
    args = ["generate", "--n", "5", "--preset", "kitchen", "--seed", "9"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("URDFORGE_SEED", "9")
    main(["generate", "--n", "2", "--out", str(tmp_path / "env")])
    monkeypatch.delenv("URDFORGE_SEED")
    main(["generate", "--n", "2", "--seed", "9", "--out", str(tmp_path / "flag")])
    assert _tree(tmp_path / "env") == _tree(tmp_path / "flag")


def test_bad_seed_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("URDFORGE_SEED", "abc")
    assert main(["generate", "--n", "1", "--out", str(tmp_path / "x")]) == 3


def test_usage_error_exit_code(capsys):
    assert main(["generate", "--n", "nope", "--out", "x"]) == 3
    assert main(["frobnicate"]) == 3


def test_convert_round_trip(tmp_path):
    scene = sample_object("oven", GenConfig(), 2)
    src = tmp_path / "s.json"
    src.write_text(dumps(scene))
    assert main(["convert", str(src), "--out", str(tmp_path / "s.urdf")]) == 0
    assert main(["convert", str(tmp_path / "s.urdf"), "--out", str(tmp_path / "back.json")]) == 0
    assert (tmp_path / "back.json").read_text() == src.read_text()


def test_convert_directory(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    for i in range(3):
        (d / f"{i}.json").write_text(dumps(sample_object("cabinet", GenConfig(), i)))
    assert main(["convert", str(d), "--out", str(tmp_path / "out")]) == 0
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["0.urdf", "1.urdf", "2.urdf"]


def test_convert_unsupported_joint(tmp_path, capsys):
    bad = tmp_path / "bad.urdf"
    bad.write_text(
        '<robot name="r"><link name="wall_0"/><link name="link_0" class="cabinet"/>'
        '<joint name="j" type="continuous"><parent link="wall_0"/><child link="link_0"/></joint></robot>'
    )
    assert main(["convert", str(bad)]) == 4
    assert "continuous" in capsys.readouterr().err


def test_convert_missing_file(tmp_path):
    assert main(["convert", str(tmp_path / "nope.json")]) == 2


def test_randomize(tmp_path):
    src = tmp_path / "s.json"
    src.write_text(dumps(sample_object("cabinet", GenConfig(), 5)))
    assert main(["randomize", str(src), "--seeds", "20", "--out", str(tmp_path / "r")]) == 0
    files = sorted((tmp_path / "r").glob("0*.json"))
    assert len(files) == 20
    for f in files:
        assert validate(loads(f.read_text())) == []


def test_assemble_encode_decode(tmp_path):
    scene = sample_object("fridge", GenConfig(), 8)
    src = tmp_path / "s.json"
    src.write_text(dumps(scene))
    pred_dir = tmp_path / "pred"
    assert main(["assemble", str(src), "--encode", "--out", str(pred_dir / "s.json")]) == 0
    assert main(["assemble", str(pred_dir), "--out", str(tmp_path / "dec")]) == 0
    out = loads((tmp_path / "dec" / "s.scene.json").read_text())
    assert [n.cls for n in out.objects] == [n.cls for n in scene.objects]
    for a, b in zip(node_regions(scene), node_regions(out)):
        assert max(abs(x - y) for x, y in zip(a, b)) <= 1 / 24 + 1e-12
    assert (tmp_path / "dec" / "s.urdf").exists()


def test_assemble_then_evaluate_is_perfect(tmp_path, capsys):
    src = tmp_path / "s.json"
    src.write_text(dumps(sample_object("fridge", GenConfig(), 1)))
    main(["assemble", str(src), "--encode", "--out", str(tmp_path / "pred" / "s.json")])
    main(["assemble", str(tmp_path / "pred"), "--out", str(tmp_path / "dec")])
    capsys.readouterr()
    report = tmp_path / "r.json"
    assert main(["evaluate", "--pred", str(tmp_path / "dec" / "s.labeled.json"), "--gt", str(src),
                 "--out", str(report)]) == 0
    data = json.loads(report.read_text())
    for stratum in ("global", "parts"):
        m = data[stratum]["metrics"]
        assert (m["mesh_acc"], m["parent_acc"], m["spatial_err"], m["recall"], m["precision"]) == (1, 1, 0, 1, 1)


def test_assemble_bad_prediction(tmp_path):
    bad = tmp_path / "p.json"
    bad.write_text('{"version": 1, "global": {"root_embeddings": [], "boxes": [{"bins": [99]}]}}')
    assert main(["assemble", str(bad), "--out", str(tmp_path / "o")]) == 4


def test_evaluate_identical(tmp_path, capsys):
    src = tmp_path / "gt.json"
    src.write_text(dumps(sample_object("washer", GenConfig(), 1)))
    assert main(["evaluate", "--pred", str(src), "--gt", str(src), "--out", str(tmp_path / "r.json")]) == 0
    table = capsys.readouterr().out
    assert "1.000" in table
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["parts"]["metrics"]["recall"] == 1.0


def test_composite(tmp_path):
    gen = tmp_path / "g"
    main(["generate", "--n", "2", "--seed", "1", "--out", str(gen)])
    out = tmp_path / "c"
    assert main(["composite", str(gen / "manifest.json"), "--width", "48", "--height", "48", "--out", str(out)]) == 0
    assert len(list((out / "images").iterdir())) == 2
    jobs = json.loads((out / "inpaint_jobs.json").read_text())["jobs"]
    assert [j["mask"] for j in jobs] == ["masks/000000.png", "masks/000001.png"]


def test_composite_rejects_kitchens(tmp_path):
    gen = tmp_path / "g"
    main(["generate", "--n", "1", "--preset", "kitchen", "--out", str(gen)])
    assert main(["composite", str(gen / "manifest.json"), "--out", str(tmp_path / "c")]) == 5


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "urdforge", "generate", "--n", "1", "--out", str(tmp_path / "m")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "m" / "scenes" / "000000.json").exists()


@pytest.mark.parametrize("jobs", ["0", "-2"])
def test_bad_jobs(tmp_path, jobs):
    assert main(["generate", "--n", "1", "--jobs", jobs, "--out", str(tmp_path / "j")]) == 3
