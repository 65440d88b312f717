"""Command line: ``stylviz generate | regen | inspect``.

Exit status is 0 on success, 1 for invalid input (config, mark id, stage)
and 2 for backend failures. Errors are also written to stderr as one JSON
object.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import shutil
import sys
from pathlib import Path

from . import configfile, imaging
from .backend import RecordingBackend
from .errors import BackendFailure, StageError, StylvizError, UnsupportedPipeline, ValidationError
from .refine import refine, regenerate_background, regenerate_mark, regenerate_region
from .workflow import RunState, run

EXIT_OK, EXIT_INVALID, EXIT_BACKEND = 0, 1, 2


def _error_payload(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, StageError):
        payload["stage"] = exc.stage
        payload["cause"] = type(exc.cause).__name__
        if exc.state is not None and exc.state.directory is not None:
            payload["state"] = str(exc.state.directory)
        exc = exc.cause
    if isinstance(exc, ValidationError):
        payload["problems"] = [{"field": f, "message": m} for f, m in exc.problems]
    return payload, exc


def _fail(exc):
    payload, cause = _error_payload(exc)
    print(json.dumps(payload), file=sys.stderr)
    return EXIT_BACKEND if isinstance(cause, (BackendFailure, UnsupportedPipeline)) else EXIT_INVALID


def _apply_overrides(loaded, args):
    cfg = loaded.workflow
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.trace:
        cfg = dataclasses.replace(cfg, trace=True)
    loaded.workflow = cfg
    if args.backend is not None:
        loaded.backend = dict(loaded.backend, type=args.backend)
    return loaded


def cmd_generate(args):
    loaded = _apply_overrides(configfile.load_config(args.config), args)
    backend = configfile.make_backend(loaded.backend)
    state_dir = Path(args.state)
    final, state = run(loaded.spec, loaded.prompts, loaded.workflow, backend, state_dir=state_dir,
                       backend_cfg=loaded.backend)
    out = Path(args.out) if args.out else state_dir / "final.png"
    if out.resolve() != (state_dir / "final.png").resolve():
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(state_dir / "final.png", out)
    print(json.dumps({"final": str(out), "state": str(state_dir), "checksum": imaging.checksum(final),
                      "recipe": state.recipe.to_dict()}))
    return EXIT_OK


def cmd_regen(args):
    state = RunState.load(args.state)
    if state.final is None:
        raise StageError("regen", ValidationError([("state", "run has no final image")]), state)
    backend_cfg = dict(state.backend_cfg)
    if args.backend is not None:
        backend_cfg["type"] = args.backend
    rec = RecordingBackend(configfile.make_backend(backend_cfg))
    rec.records.extend(state.records)
    cfg = state.config
    current = state.latest
    view = dataclasses.replace(state, final=current)
    with rec.stage("regen"):
        if args.mark is not None:
            out = regenerate_mark(view, args.mark, args.prompt, rec, cfg, args.strength)
        elif args.background:
            out = regenerate_background(view, args.prompt, rec, cfg, args.strength)
        else:
            region = imaging.read_mask(args.mask)
            out = regenerate_region(view, region, args.prompt, rec, cfg, args.strength)
        if cfg.refine_after_regen:
            out = refine(out, state.prompts, cfg, rec)
    path = state.next_version_path()
    imaging.write_png(path, out)
    state.versions.append(path.name)
    state.records = rec.records
    state.save_meta()
    print(json.dumps({"output": str(path), "checksum": imaging.checksum(out)}))
    return EXIT_OK


def cmd_inspect(args):
    state = RunState.load(args.state)
    path = state.stage_path(args.stage)
    info = {"stage": args.stage, "path": str(path)}
    if args.stage == "trace":
        records = [json.loads(line) for line in path.read_text().splitlines() if line]
        info["calls"] = len(records)
        info["stages"] = list(dict.fromkeys(r.get("stage") for r in records))
        info["records"] = records
    else:
        img = imaging.read_png(path)
        info["width"], info["height"] = img.shape[1], img.shape[0]
        info["checksum"] = imaging.checksum(img)
        if args.stage == "plain" and state.plain is not None:
            info["marks"] = [{"id": m.mark_id, "kind": m.kind, "label": m.label, "bbox": list(m.bbox)}
                             for m in state.plain.marks]
    print(json.dumps(info, indent=2))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="stylviz", description="Stylize plain charts with diffusion.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run the full pipeline from a config file")
    g.add_argument("-c", "--config", required=True)
    g.add_argument("-o", "--out", help="where to copy the final PNG (default: <state>/final.png)")
    g.add_argument("--state", default="run", help="run-state directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--backend", choices=["mock", "adapter"])
    g.add_argument("--trace", action="store_true", help="also record per-step DMP traces")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("regen", help="regenerate a mark, the background, or a masked region")
    r.add_argument("--state", required=True)
    target = r.add_mutually_exclusive_group(required=True)
    target.add_argument("--mark", type=int)
    target.add_argument("--background", action="store_true")
    target.add_argument("--mask", help="PNG mask of the region to regenerate")
    r.add_argument("--prompt")
    r.add_argument("--strength", type=float)
    r.add_argument("--backend", choices=["mock", "adapter"])
    r.set_defaults(func=cmd_regen)

    i = sub.add_parser("inspect", help="print an artifact's path and summary")
    i.add_argument("--state", required=True)
    i.add_argument("stage", choices=["plain", "sketch", "synth", "final", "trace"])
    i.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StylvizError as exc:
        return _fail(exc)
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
