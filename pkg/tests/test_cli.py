import json
import subprocess
import sys

import numpy as np
import pytest

from ductscan.cli import main
from ductscan.raster import BinaryImage, load_drawing, save_drawing
from ductscan.synthgen import DuctSpec, Layout, render

CANVAS = (2000, 1600)
REF = (300, 1300)


def _save(tmp_path, layout, name="d.png"):
    img, truth = render(layout)
    path = tmp_path / name
    save_drawing(img, path)
    (tmp_path / (path.stem + ".truth.json")).write_text(json.dumps(truth.to_dict()))
    return path, truth


def _tee_layout():
    # run along y = 800 split at x = 1000, branch down; ends stop 240 mm short of the node
    return Layout(
        ducts=[
            DuctSpec((480, 800), 0, 560, 400, 250),
            DuctSpec((1520, 800), 0, 560, 400, 250),
            DuctSpec((1000, 1270), 90, 460, 300, 200),
        ],
        reference_mm=REF,
        canvas_px=CANVAS,
    )


def _l_layout():
    # corner node at (1100, 400); ends stop 90 mm short of it
    return Layout(
        ducts=[DuctSpec((755, 400), 0, 510, 150, 100), DuctSpec((1100, 745), 90, 510, 150, 125)],
        reference_mm=REF,
        canvas_px=CANVAS,
    )


def _files(d):
    return sorted(p.name for p in d.iterdir())


def test_generate_writes_drawings_and_truth(tmp_path):
    out = tmp_path / "corpus"
    assert main(["generate", "--seed", "7", "--n", "5", "-o", str(out)]) == 0
    names = _files(out)
    assert sum(n.endswith(".png") for n in names) == 5
    assert sum(n.endswith(".truth.json") for n in names) == 5
    assert not any(n.endswith(".tmp") for n in names)


def test_generate_is_deterministic(tmp_path):
    for d in ("a", "b"):
        main(["generate", "--seed", "3", "--n", "2", "--canvas", "1600", "1600", "-o", str(tmp_path / d)])
    for name in _files(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generate_on_too_small_canvas_exits_1(tmp_path, capsys):
    assert main(["generate", "--canvas", "500", "500", "-o", str(tmp_path / "x")]) == 1
    assert "layout" in capsys.readouterr().err
    assert not (tmp_path / "x").exists() or _files(tmp_path / "x") == []


def test_generate_from_layout_file(tmp_path):
    lpath = tmp_path / "layout.json"
    lpath.write_text(json.dumps(_l_layout().to_dict()))
    assert main(["generate", "--layout", str(lpath), "-o", str(tmp_path / "out")]) == 0
    truth = json.loads((tmp_path / "out" / "drawing_0000.truth.json").read_text())
    assert len(truth["objects"]) == 3


def test_extract_three_ducts_and_tee(tmp_path):
    path, truth = _save(tmp_path, _tee_layout())
    assert truth.counts() == {"Duct": 3, "Tee": 1}
    out = tmp_path / "objects.json"
    assert main(["extract", str(path), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["objects"]) == 4
    assert sorted(o["kind"] for o in doc["objects"]) == ["Duct", "Duct", "Duct", "Tee"]
    assert doc["mm_per_px"] == pytest.approx(1.0, rel=0.01)
    for key in ("kind", "center_mm", "connections", "confidence"):
        assert all(key in o for o in doc["objects"])


def test_extract_blank_drawing_is_empty(tmp_path, capsys):
    path, _ = _save(tmp_path, Layout(reference_mm=REF, canvas_px=CANVAS))
    assert main(["extract", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["objects"] == []


def test_extract_without_triangle_exits_2(tmp_path, capsys):
    canvas = np.zeros((400, 400), dtype=bool)
    canvas[100:110, 50:350] = True
    path = tmp_path / "bar.png"
    save_drawing(BinaryImage(canvas), path)
    out = tmp_path / "o.json"
    assert main(["extract", str(path), "-o", str(out)]) == 2
    assert "calibrate" in capsys.readouterr().err
    assert not out.exists()


def test_extract_batch_with_workers(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    _save(src, _l_layout(), "l.png")
    _save(src, _tee_layout(), "t.png")
    out = tmp_path / "out"
    assert main(["extract", str(src / "l.png"), str(src / "t.png"), "-o", str(out), "--workers", "2"]) == 0
    assert _files(out) == ["l.objects.json", "t.objects.json"]
    assert len(json.loads((out / "t.objects.json").read_text())["objects"]) == 4


def _obj_stats(path):
    lines = path.read_text().splitlines()
    return (
        [ln.split()[1] for ln in lines if ln.startswith("g ")],
        sum(ln.startswith("v ") for ln in lines),
        sum(ln.startswith("f ") for ln in lines),
    )


def test_pipeline_l_layout_has_three_groups(tmp_path):
    path, _ = _save(tmp_path, _l_layout())
    obj = tmp_path / "scene.obj"
    assert main(["pipeline", str(path), "-o", str(obj), "--figures"]) == 0
    groups, _, _ = _obj_stats(obj)
    assert sorted(g.split("_")[0] for g in groups) == ["duct", "duct", "elbow"]
    objects = json.loads((tmp_path / "scene.objects.json").read_text())["objects"]
    assert len(groups) == len(objects)
    scene = json.loads((tmp_path / "scene.scene.json").read_text())
    assert len(scene["objects"]) == 3
    assert (tmp_path / "scene.overlay.png").stat().st_size > 0


def test_pipeline_single_duct_box(tmp_path):
    layout = Layout(ducts=[DuctSpec((1000, 600), 0, 800, 400, 250)], reference_mm=REF, canvas_px=CANVAS)
    path, _ = _save(tmp_path, layout)
    obj = tmp_path / "one.obj"
    assert main(["pipeline", str(path), "-o", str(obj)]) == 0
    assert _obj_stats(obj) == (["duct_0"], 8, 12)


def test_pipeline_corrupt_png_leaves_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"\x89PNG\r\n\x1a\n" + b"garbage" * 20)
    before = _files(tmp_path)
    assert main(["pipeline", str(bad), "-o", str(tmp_path / "x.obj")]) == 1
    assert _files(tmp_path) == before
    assert "bad.png" in capsys.readouterr().err


def test_model_from_objects(tmp_path):
    path, _ = _save(tmp_path, _tee_layout())
    objs = tmp_path / "o.json"
    main(["extract", str(path), "-o", str(objs)])
    obj = tmp_path / "m.obj"
    assert main(["model", str(objs), "-o", str(obj), "--z-mm", "3000"]) == 0
    groups, _, _ = _obj_stats(obj)
    assert len(groups) == 4
    zs = {float(ln.split()[3]) for ln in obj.read_text().splitlines() if ln.startswith("v ")}
    assert min(zs) < 3000 < max(zs)


def test_schema_error_names_field(tmp_path, capsys):
    doc = {"objects": [{"id": 0, "kind": "Pipe", "center_mm": [0, 0]}]}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["model", str(bad), "-o", str(tmp_path / "m.obj")]) == 1
    err = capsys.readouterr().err
    assert "$.objects[0].kind" in err
    assert not (tmp_path / "m.obj").exists()


def _eval(tmp_path, pred, truth, *extra):
    out = tmp_path / f"metrics{len(list(tmp_path.glob('metrics*.json')))}.json"
    assert main(["eval", "--pred", str(pred), "--truth", str(truth), "-o", str(out), *extra]) == 0
    return json.loads(out.read_text()), out


def test_eval_identical_is_perfect(tmp_path):
    path, truth = _save(tmp_path, _tee_layout())
    pred = tmp_path / "pred.objects.json"
    pred.write_text(json.dumps({"objects": [o.to_dict() for o in truth.objects]}))
    doc, out = _eval(tmp_path, pred, tmp_path / "d.truth.json")
    assert doc["overall"]["type"] == doc["overall"]["location"] == doc["overall"]["dimensions"] == 1.0
    assert out.with_suffix(".csv").exists() and out.with_suffix(".png").exists()


def test_eval_zero_tolerance_is_no_better(tmp_path):
    gen = tmp_path / "gen"
    main(["generate", "--seed", "5", "--n", "2", "--profile", "noisy", "-o", str(gen)])
    pred = tmp_path / "pred"
    main(["extract", *map(str, sorted(gen.glob("*.png"))), "-o", str(pred)])
    base, _ = _eval(tmp_path, pred, gen)
    tight, _ = _eval(tmp_path, pred, gen, "--loc-tol-mm", "0", "--dim-tol-rel", "0")
    assert base["drawings"] == 2
    assert tight["overall"]["location"] <= base["overall"]["location"]
    assert tight["overall"]["dimensions"] <= base["overall"]["dimensions"]


def test_config_precedence(tmp_path, capsys):
    path, _ = _save(tmp_path, _l_layout())
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mm_per_px": 2.0, "material": "galvanised steel"}))
    main(["extract", str(path), "--config", str(cfg)])
    doc = json.loads(capsys.readouterr().out)
    assert doc["mm_per_px"] == 2.0
    assert {o["material"] for o in doc["objects"]} == {"galvanised steel"}
    main(["extract", str(path), "--config", str(cfg), "--mm-per-px", "1.0"])
    assert json.loads(capsys.readouterr().out)["mm_per_px"] == 1.0
    main(["extract", str(path)])
    assert json.loads(capsys.readouterr().out)["mm_per_px"] == pytest.approx(1.0, rel=0.01)


def test_bad_config_is_exit_1(tmp_path, capsys):
    path, _ = _save(tmp_path, _l_layout())
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"z_mm": -5}))
    assert main(["extract", str(path), "--config", str(cfg)]) == 1
    assert "z_mm" in capsys.readouterr().err


def test_calibrate_reports_scale(tmp_path, capsys):
    layout = Layout(reference_mm=(600, 600), canvas_px=(1000, 1000), scale_mm_per_px=2.0)
    path, _ = _save(tmp_path, layout)
    assert main(["calibrate", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mm_per_px"] == pytest.approx(2.0, rel=0.01)
    assert doc["side_px"] == pytest.approx(250, abs=1.5)


def test_extract_is_deterministic(tmp_path):
    path, _ = _save(tmp_path, _tee_layout())
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["extract", str(path), "-o", str(a)])
    main(["extract", str(path), "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_png_round_trip(tmp_path):
    path, truth = _save(tmp_path, _l_layout())
    assert int(load_drawing(path).bits.sum()) == truth.ink_pixels


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "ductscan.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("generate", "extract", "model", "pipeline", "eval", "calibrate"):
        assert cmd in proc.stdout
