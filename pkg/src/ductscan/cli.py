"""Command-line entry point: ``ductscan <subcommand> ...``.

Exit codes: 0 success, 1 unreadable input or invalid document, 2 no usable
reference node. Set DUCTSCAN_LOG_LEVEL (DEBUG, INFO, WARNING, ...) to
control logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

from .calibrate import CalibrationError, compute_scale, find_reference
from .contour import trace_contours
from .evaluate import aggregate, match_and_score
from .model3d import ModelError, assemble_scene
from .objects import HvacObject
from .pipeline import PipelineConfig, StageError, extract
from .raster import DrawingError, load_drawing, save_drawing, validate_standard
from .schemas import SchemaError, validate
from .synthgen import PROFILES, GroundTruth, Layout, LayoutError, random_corpus, render

log = logging.getLogger("ductscan")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_REFERENCE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# atomic output


class Outputs:
    """Stage files in temporaries and move them into place together on commit."""

    def __init__(self):
        self._staged: list[tuple[str, Path]] = []

    def _stage(self, path: Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        os.close(fd)
        self._staged.append((tmp, path))
        return tmp

    def text(self, path, content: str) -> None:
        tmp = self._stage(path)
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(content)

    def json(self, path, doc) -> None:
        self.text(path, json.dumps(doc, indent=2) + "\n")

    def call(self, path, writer) -> None:
        """``writer(tmp_path)`` produces the file; the suffix is kept for format sniffing."""
        path = Path(path)
        tmp = self._stage(path)
        named = tmp + path.suffix
        os.replace(tmp, named)
        self._staged[-1] = (named, path)
        writer(named)

    def commit(self) -> list[Path]:
        done = []
        for tmp, final in self._staged:
            os.replace(tmp, final)
            done.append(final)
        self._staged.clear()
        return done

    def discard(self) -> None:
        for tmp, _ in self._staged:
            try:
                os.remove(tmp)
            except FileNotFoundError:
                pass
        self._staged.clear()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.discard()
        return False


# ---------------------------------------------------------------------------
# config


_CONFIG_FLAGS = {
    "threshold": float,
    "thick_threshold_mm": float,
    "proximity_factor": float,
    "collinear_deg": float,
    "loc_tol_mm": float,
    "dim_tol_rel": float,
    "z_mm": float,
    "snap_limit_mm": float,
    "seed": int,
    "plot_mm_per_px": float,
    "mm_per_px": float,
    "proximity_mm": float,
    "segments": int,
    "other_height_mm": float,
    "material": str,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration (flags > --config file > defaults)")
    g.add_argument("--config", type=Path, help="JSON file with PipelineConfig fields")
    for name, typ in _CONFIG_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    g.add_argument("--keep-thin", dest="remove_thin", action="store_false", default=None,
                   help="skip the morphological removal of thin strokes")


def _read_json(path: Path, schema: str | None = None):
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if schema is not None:
        try:
            validate(doc, schema)
        except SchemaError as exc:
            raise CliError(f"{path}: {exc}") from exc
    return doc


def build_config(args: argparse.Namespace) -> PipelineConfig:
    values = {}
    if getattr(args, "config", None) is not None:
        values.update(_read_json(args.config, "config"))
    for f in fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    try:
        return PipelineConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from exc


# ---------------------------------------------------------------------------
# shared steps


def _load(path: Path, config: PipelineConfig):
    try:
        return load_drawing(path, config.threshold)
    except DrawingError as exc:
        raise CliError(str(exc)) from exc


def _extract(path: Path, config: PipelineConfig):
    img = _load(path, config)
    for v in validate_standard(img):
        log.info("%s: %s", path, v)
    try:
        return img, extract(img, config)
    except StageError as exc:
        code = EXIT_REFERENCE if isinstance(exc.cause, CalibrationError) else EXIT_INPUT
        raise CliError(f"{path}: stage {exc}", code) from exc


def _objects_doc(path: Path, result) -> dict:
    return {"source": str(path), **result.to_dict()}


def _objects_from_doc(doc: dict) -> list[HvacObject]:
    return [HvacObject.from_dict(o) for o in doc["objects"]]


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    config = build_config(args)
    seed = args.seed if args.seed is not None else config.seed
    out = Path(args.out)
    with Outputs() as o:
        if args.layout is not None:
            try:
                layout = Layout.from_dict(_read_json(args.layout, "layout"))
                img, truth = render(layout)
            except (LayoutError, TypeError) as exc:
                raise CliError(f"{args.layout}: {exc}") from exc
            items = [(layout, img, truth)]
        else:
            try:
                items = random_corpus(seed, args.n, args.profile, tuple(args.canvas), args.scale)
            except ValueError as exc:
                raise CliError(str(exc)) from exc
        for k, (layout, img, truth) in enumerate(items):
            stem = out / f"{args.prefix}{k:04d}"
            o.call(stem.with_suffix(".png"), lambda p, img=img: save_drawing(img, p))
            o.json(_sidecar(stem, ".truth.json"), truth.to_dict())
            o.json(_sidecar(stem, ".layout.json"), layout.to_dict())
    print(f"wrote {len(items)} drawings to {out}")
    return EXIT_OK


def _extract_one(job):
    path, config, out_path, figure = job
    img, result = _extract(path, config)
    doc = _objects_doc(path, result)
    with Outputs() as o:
        if out_path is not None:
            o.json(out_path, doc)
        if figure is not None:
            from .report import overlay_figure

            o.call(figure, lambda p: overlay_figure(img, result.objects, result.mm_per_px, p))
    return doc


def _run_jobs(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_extract_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_extract_one, jobs))


def cmd_extract(args) -> int:
    config = build_config(args)
    drawings = [Path(d) for d in args.drawings]
    if len(drawings) == 1 and (args.out is None or Path(args.out).suffix == ".json"):
        out = Path(args.out) if args.out else None
        figure = Path(args.figure) if args.figure else (_sidecar(out, ".overlay.png") if out and args.figures else None)
        doc = _extract_one((drawings[0], config, out, figure))
        if out is None:
            print(json.dumps(doc, indent=2))
        return EXIT_OK
    out_dir = Path(args.out or ".")
    jobs = []
    for d in drawings:
        target = out_dir / (d.stem + ".objects.json")
        jobs.append((d, config, target, _sidecar(target, ".overlay.png") if args.figures else None))
    _run_jobs(jobs, args.workers)
    print(f"wrote {len(jobs)} object files to {out_dir}")
    return EXIT_OK


def _write_scene(objects, config: PipelineConfig, obj_path: Path, outputs: Outputs, extra=None):
    try:
        scene = assemble_scene(objects, config.z_mm, config.snap_limit_mm, config.segments, config.other_height_mm)
    except ModelError as exc:
        raise CliError(f"stage model: {exc}") from exc
    outputs.text(obj_path, scene.to_obj())
    outputs.json(_sidecar(obj_path, ".scene.json"), scene.to_dict(obj_path.name))
    return scene


def cmd_model(args) -> int:
    config = build_config(args)
    doc = _read_json(args.objects, "objects")
    out = Path(args.out)
    with Outputs() as o:
        scene = _write_scene(_objects_from_doc(doc), config, out, o)
    print(f"wrote {out} with {len(scene.meshes)} groups")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = build_config(args)
    out = Path(args.out)
    drawing = Path(args.drawing)
    img, result = _extract(drawing, config)
    with Outputs() as o:
        o.json(_sidecar(out, ".objects.json"), _objects_doc(drawing, result))
        scene = _write_scene(result.objects, config, out, o)
        if args.figures:
            from .report import overlay_figure

            o.call(_sidecar(out, ".overlay.png"), lambda p: overlay_figure(img, result.objects, result.mm_per_px, p))
    print(f"wrote {out} with {len(scene.meshes)} groups")
    return EXIT_OK


def _pairs(pred: Path, truth: Path) -> list[tuple[Path, Path]]:
    if pred.is_dir() != truth.is_dir():
        raise CliError("--pred and --truth must both be files or both be directories")
    if not pred.is_dir():
        return [(pred, truth)]
    pairs = []
    for t in sorted(truth.glob("*.truth.json")):
        stem = t.name[: -len(".truth.json")]
        p = pred / f"{stem}.objects.json"
        if not p.exists():
            raise CliError(f"no prediction {p} for {t}")
        pairs.append((p, t))
    if not pairs:
        raise CliError(f"no *.truth.json files in {truth}")
    return pairs


def cmd_eval(args) -> int:
    config = build_config(args)
    reports = []
    for p, t in _pairs(Path(args.pred), Path(args.truth)):
        pred = _objects_from_doc(_read_json(p, "objects"))
        truth = GroundTruth.from_dict(_read_json(t, "ground_truth"))
        reports.append(match_and_score(pred, truth, config.loc_tol_mm, config.dim_tol_rel))
    report = aggregate(reports)
    doc = {**report.to_dict(), "loc_tol_mm": config.loc_tol_mm, "dim_tol_rel": config.dim_tol_rel, "drawings": len(reports)}
    if args.out is None:
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    out = Path(args.out)
    with Outputs() as o:
        o.json(out, doc)
        o.text(out.with_suffix(".csv"), report.to_csv())
        if args.figures:
            from .report import accuracy_figure

            o.call(out.with_suffix(".png"), lambda path: accuracy_figure(report, path))
    print(report.to_csv(), end="")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = build_config(args)
    img = _load(Path(args.drawing), config)
    try:
        ref = find_reference(trace_contours(img))
    except CalibrationError as exc:
        raise CliError(f"{args.drawing}: {exc}", EXIT_REFERENCE) from exc
    scale = compute_scale(ref)
    doc = {
        "mm_per_px": scale,
        "side_px": ref.side_px,
        "vertices_mm": [[x * scale, y * scale] for x, y in ref.vertices],
        "centroid_mm": [c * scale for c in ref.centroid],
        "violations": validate_standard(img),
    }
    if args.out:
        with Outputs() as o:
            o.json(Path(args.out), doc)
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ductscan", description="2D HVAC raster drawings to 3D duct models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render synthetic drawings with ground truth")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--profile", choices=PROFILES, default="clean")
    p.add_argument("--canvas", type=int, nargs=2, default=(2000, 2000), metavar=("W", "H"))
    p.add_argument("--scale", type=float, default=1.0, help="drawing mm per pixel")
    p.add_argument("--layout", type=Path, help="render this layout JSON instead of random ones")
    p.add_argument("--prefix", default="drawing_")
    p.add_argument("-o", "--out", default=".", help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", help="detect objects in drawings, write objects JSON")
    p.add_argument("drawings", nargs="+")
    p.add_argument("-o", "--out", help="objects JSON (single drawing) or output directory")
    p.add_argument("--figure", help="overlay PNG for a single drawing")
    p.add_argument("--figures", action="store_true", help="write an overlay PNG beside each objects JSON")
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("model", help="objects JSON to OBJ + scene JSON")
    p.add_argument("objects", type=Path)
    p.add_argument("-o", "--out", required=True, help="OBJ path; the scene JSON is written beside it")
    _add_config_flags(p)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("pipeline", help="drawing to OBJ + scene JSON + objects JSON")
    p.add_argument("drawing")
    p.add_argument("-o", "--out", required=True, help="OBJ path")
    p.add_argument("--figures", action="store_true", help="also write a detection overlay PNG")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("eval", help="score objects JSON against ground truth")
    p.add_argument("--pred", required=True, help="objects JSON or directory of *.objects.json")
    p.add_argument("--truth", required=True, help="truth JSON or directory of *.truth.json")
    p.add_argument("-o", "--out", help="metrics JSON; CSV and bar chart PNG are written beside it")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="find the reference node and report the scale")
    p.add_argument("drawing")
    p.add_argument("-o", "--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("DUCTSCAN_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
