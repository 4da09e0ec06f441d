"""``urdforge`` command line.

Exit codes: 0 success, 2 I/O error, 3 configuration or usage error,
4 parse error, 5 validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import (
    ConfigError,
    InvalidSceneError,
    PredictionFormatError,
    UrdfParseError,
    UrdforgeError,
)

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_PARSE, EXIT_VALIDATION = 0, 2, 3, 4, 5
SEED_ENV = "URDFORGE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    """Order-preserving map, optionally over worker processes."""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(x) for x in items]


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# ---------------------------------------------------------------------------
# generate


def _load_config(args):
    from .procgen import GenConfig, load_preset

    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.config:
        return GenConfig.from_json(args.config)
    return load_preset(args.preset or "paper-objects")


def _generate_job(item):
    from .procgen import generate_entry
    from .scene import dumps

    config, seed, i, n, kind = item
    return dumps(generate_entry(config, seed, i, n, kind).scene)


def cmd_generate(args) -> int:
    config = _load_config(args)
    seed = _resolve_seed(args.seed)
    n = config.default_n if args.n is None else args.n
    if n < 0:
        raise ConfigError("--n must be non-negative")
    kind = args.kind or config.kind
    if kind not in ("object_pair", "scene_pair"):
        raise ConfigError(f"unknown kind {kind!r}")
    out = Path(args.out)
    texts = _map(_generate_job, [(config, seed, i, n, kind) for i in range(n)], args.jobs)
    entries = []
    for i, text in enumerate(texts):
        rel = f"scenes/{i:06d}.json"
        _atomic_write(out / rel, text)
        if args.urdf:
            from .scene import loads
            from .urdf import to_urdf

            _atomic_write(out / f"urdf/{i:06d}.urdf", to_urdf(loads(text), name=f"scene_{i:06d}"))
        entries.append({"image": None, "kind": kind, "scene": rel})
    _atomic_write(out / "manifest.json", _json_text({"version": 1, "seed": seed, "entries": entries}))
    _progress(f"generate: wrote {n} scenes to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# convert


def _convert_one(src: Path) -> tuple[str, str]:
    from .scene import dumps, ensure_valid, loads
    from .urdf import from_urdf, to_urdf

    text = src.read_text()
    if src.suffix == ".urdf":
        return ".json", dumps(from_urdf(text))
    try:
        scene = loads(text)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PredictionFormatError(f"{src}: not a scene JSON ({exc})") from exc
    ensure_valid(scene)
    return ".urdf", to_urdf(scene, name=src.stem)


def _convert_job(path: str):
    try:
        return _convert_one(Path(path))
    except UrdforgeError as exc:
        return exc


def cmd_convert(args) -> int:
    src = Path(args.input)
    if src.is_dir():
        files = sorted(p for p in src.iterdir() if p.suffix in (".json", ".urdf"))
        out = Path(args.out) if args.out else src
        results = _map(_convert_job, [str(p) for p in files], args.jobs)
        for p, res in zip(files, results):
            if isinstance(res, Exception):
                raise res
            suffix, text = res
            _atomic_write(out / (p.stem + suffix), text)
        _progress(f"convert: {len(files)} files -> {out}")
        return EXIT_OK
    if not src.exists():
        raise FileNotFoundError(src)
    suffix, text = _convert_one(src)
    dst = Path(args.out) if args.out else src.with_suffix(suffix)
    _atomic_write(dst, text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# composite


def _composite_job(item):
    from .compositor import boundary_mask, composite_object_image, frontal_camera, mask_image, texture_preset
    from .rng import Rng
    from .scene import loads

    scene_text, seed, width, height, textures = item
    scene = loads(scene_text)
    rng = Rng(seed)
    yaw = rng.uniform(-0.35, 0.35)
    pitch = rng.uniform(-0.15, 0.15)
    camera = frontal_camera(scene, width=width, height=height, yaw=yaw, pitch=pitch)
    lib = texture_preset() if textures is None else textures
    image, _, used = composite_object_image(scene, camera, lib, rng.next_u64())
    mask = mask_image(boundary_mask(scene, camera))
    return image.to_png(), mask.to_png(), camera.to_dict(), {str(k): v for k, v in used.items()}


def _read_manifest(path: Path) -> list[tuple[str, str, Path]]:
    """(scene text, kind, scene path) per entry of a generate manifest or a single scene."""
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        if "entries" in data:
            base = path.parent
            out = []
            for e in data["entries"]:
                p = base / e["scene"] if isinstance(e["scene"], str) else None
                text = p.read_text() if p else json.dumps(e["scene"])
                out.append((text, e["kind"], p))
            return out
        return [(path.read_text(), "object_pair", path)]
    raise ConfigError(f"{path}: expected a manifest or scene JSON")


def cmd_composite(args) -> int:
    from .compositor import TextureLibrary
    from .rng import child_seed
    from .scene import loads

    seed = _resolve_seed(args.seed)
    items = _read_manifest(Path(args.input))
    textures = TextureLibrary.from_dir(args.textures) if args.textures else None
    for k, (text, _, _) in enumerate(items):
        if loads(text).completeness != "object_partial":
            raise InvalidSceneError([f"entry {k}: compositing needs a single-object (object_partial) scene"])
    out = Path(args.out)
    work = [(text, child_seed(seed, k), args.width, args.height, textures) for k, (text, _, _) in enumerate(items)]
    results = _map(_composite_job, work, args.jobs)
    entries, jobs = [], []
    for k, ((text, kind, _), (png, mask, cam, used)) in enumerate(zip(items, results)):
        img_rel, mask_rel, scene_rel = f"images/{k:06d}.png", f"masks/{k:06d}.png", f"scenes/{k:06d}.json"
        _atomic_write(out / img_rel, png)
        _atomic_write(out / mask_rel, mask)
        _atomic_write(out / scene_rel, text)
        entries.append({"image": img_rel, "kind": "object_pair", "scene": scene_rel, "camera": cam, "textures": used})
        jobs.append({"image": img_rel, "mask": mask_rel, "prompt": args.prompt})
    _atomic_write(out / "manifest.json", _json_text({"version": 1, "seed": seed, "entries": entries}))
    if not args.skip_external:
        _atomic_write(out / "inpaint_jobs.json", _json_text({"version": 1, "jobs": jobs}))
    _progress(f"composite: {len(items)} images -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# randomize


def _randomize_job(item):
    from .randomizer import jitter_handles, randomize_geometry, rescale_to_depth
    from .scene import dumps, ensure_valid, loads

    scene_text, lib, seed, jitter, extents = item
    scene = loads(scene_text)
    scene, factors = randomize_geometry(scene, lib, seed)
    scene = jitter_handles(scene, jitter, seed ^ 0x5A5A)
    if extents:
        scene = rescale_to_depth(scene, extents)
    ensure_valid(scene)
    return dumps(scene), {str(k): list(v) for k, v in factors.items()}


def cmd_randomize(args) -> int:
    from .randomizer import AssetLibrary
    from .rng import child_seed
    from .scene import ensure_valid, loads

    seed = _resolve_seed(args.seed)
    text = Path(args.input).read_text()
    ensure_valid(loads(text))
    lib = AssetLibrary.from_json(args.assets) if args.assets else AssetLibrary.preset("partnet")
    if args.seeds < 0:
        raise ConfigError("--seeds must be non-negative")
    work = [(text, lib, child_seed(seed, k), args.jitter, args.extents) for k in range(args.seeds)]
    results = _map(_randomize_job, work, args.jobs)
    out = Path(args.out)
    log = []
    for k, (scene_text, factors) in enumerate(results):
        _atomic_write(out / f"{k:06d}.json", scene_text)
        log.append({"scene": f"{k:06d}.json", "rescale": factors})
    _atomic_write(out / "randomize_log.json", _json_text({"version": 1, "seed": seed, "entries": log}))
    _progress(f"randomize: {args.seeds} scenes -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# assemble


def _assemble_job(path: str):
    from .assembly import RawPrediction, decode_with_boxes
    from .evaluation import LabeledScene
    from .scene import dumps
    from .urdf import to_urdf

    try:
        scene, boxes = decode_with_boxes(RawPrediction.loads(Path(path).read_text()))
    except UrdforgeError as exc:
        return exc
    labeled = _json_text(LabeledScene(scene, boxes).to_dict())
    return dumps(scene), to_urdf(scene, name=Path(path).stem), labeled


def cmd_assemble(args) -> int:
    src = Path(args.input)
    out = Path(args.out)
    if args.encode:
        from .assembly import encode_scene
        from .scene import ensure_valid, loads

        scene = loads(src.read_text())
        ensure_valid(scene)
        _atomic_write(out, encode_scene(scene).dumps())
        return EXIT_OK
    files = sorted(p for p in src.iterdir() if p.suffix == ".json") if src.is_dir() else [src]
    if not src.exists():
        raise FileNotFoundError(src)
    results = _map(_assemble_job, [str(p) for p in files], args.jobs)
    for p, res in zip(files, results):
        if isinstance(res, Exception):
            raise res
        scene_text, urdf_text, labeled_text = res
        _atomic_write(out / f"{p.stem}.scene.json", scene_text)
        _atomic_write(out / f"{p.stem}.urdf", urdf_text)
        _atomic_write(out / f"{p.stem}.labeled.json", labeled_text)
    _progress(f"assemble: {len(files)} predictions -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def _load_labeled(path: Path):
    from .evaluation import LabeledScene, labeled
    from .scene import scene_from_dict

    try:
        data = json.loads(path.read_text())
        if "boxes" in data:
            return LabeledScene.from_dict(data)
        return labeled(scene_from_dict(data))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PredictionFormatError(f"{path}: {exc}") from exc


def _pairs(pred: Path, gt: Path) -> list[tuple[Path, Path]]:
    if pred.is_dir() != gt.is_dir():
        raise ConfigError("--pred and --gt must both be files or both be directories")
    if not pred.is_dir():
        return [(pred, gt)]
    names = sorted(p.name for p in gt.iterdir() if p.suffix == ".json")
    missing = [n for n in names if not (pred / n).exists()]
    if missing:
        raise FileNotFoundError(f"no prediction for {missing[0]} (and {len(missing) - 1} more)")
    return [(pred / n, gt / n) for n in names]


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate_dataset, format_table

    pairs = [(_load_labeled(p), _load_labeled(g)) for p, g in _pairs(Path(args.pred), Path(args.gt))]
    report = evaluate_dataset(pairs, floor=args.floor)
    table = format_table([(args.name, report)])
    sys.stdout.write(table)
    if args.out:
        _atomic_write(Path(args.out), _json_text({"scenes": len(pairs), **report.to_dict()}))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="urdforge", description="Procedural articulated scenes, URDF conversion and scene assembly.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help: str, out_required: bool = True):
        sp.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV}, else 0)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on this)")
        sp.add_argument("--out", required=out_required, help=out_help)

    g = sub.add_parser("generate", help="sample scenes into a dataset directory")
    common(g, "output directory")
    g.add_argument("--n", type=int, default=None, help="number of scenes (default: the preset's size)")
    g.add_argument("--kind", choices=("object_pair", "scene_pair"), default=None)
    g.add_argument("--config", help="GenConfig JSON file")
    g.add_argument("--preset", help="built-in config (paper-objects, kitchen, rebuttal-objects, eval-objects, eval-kitchens)")
    g.add_argument("--urdf", action="store_true", help="also write a URDF per scene")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("convert", help="scene JSON <-> URDF; a directory converts every file in it")
    c.add_argument("input")
    common(c, "output file or directory (default: next to the input)", out_required=False)
    c.set_defaults(func=cmd_convert)

    m = sub.add_parser("composite", help="render textured single-object images with inpainting masks")
    m.add_argument("input", help="manifest.json from generate, or one scene JSON")
    common(m, "output directory")
    m.add_argument("--textures", help="directory of PNG textures (default: built-in 100-texture set)")
    m.add_argument("--width", type=int, default=256)
    m.add_argument("--height", type=int, default=256)
    m.add_argument("--prompt", default="a photo of a kitchen cabinet", help="prompt written into inpaint jobs")
    m.add_argument("--skip-external", action="store_true", help="do not write the inpaint job file")
    m.set_defaults(func=cmd_composite)

    r = sub.add_parser("randomize", help="topology-preserving variants of one scene")
    r.add_argument("input", help="scene JSON")
    common(r, "output directory")
    r.add_argument("--seeds", type=int, default=1, help="number of variants")
    r.add_argument("--assets", help="AssetLibrary JSON (default: built-in partnet counts)")
    r.add_argument("--jitter", type=float, default=0.05, help="max handle offset, fraction of the face")
    r.add_argument("--extents", type=float, nargs=3, metavar=("X", "Y", "Z"), help="observed object size in meters")
    r.set_defaults(func=cmd_randomize)

    a = sub.add_parser("assemble", help="decode raw predictions into scene JSON, URDF and a labeled scene for evaluate")
    a.add_argument("input", help="raw prediction JSON or a directory of them")
    common(a, "output directory (with --encode: output file)")
    a.add_argument("--encode", action="store_true", help="instead write the lossless raw prediction of a scene")
    a.set_defaults(func=cmd_assemble)

    e = sub.add_parser("evaluate", help="score predictions against ground truth and print the table")
    e.add_argument("--pred", required=True, help="labeled scene JSON or directory")
    e.add_argument("--gt", required=True, help="labeled scene JSON or directory (matched by file name)")
    e.add_argument("--out", help="write the JSON report here")
    e.add_argument("--seed", type=int, default=None, help="accepted for uniformity; evaluation is deterministic")
    e.add_argument("--jobs", type=int, default=1, help="accepted for uniformity")
    e.add_argument("--floor", type=float, default=0.05, help="minimum IoU for a match")
    e.add_argument("--name", default="prediction", help="row label in the table")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"urdforge: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"urdforge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UrdfParseError, PredictionFormatError, json.JSONDecodeError) as exc:
        print(f"urdforge: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvalidSceneError, UrdforgeError, ValueError) as exc:
        print(f"urdforge: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"urdforge: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
