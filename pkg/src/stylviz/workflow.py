"""End-to-end orchestration, run-state persistence and fidelity scoring.

A run directory looks like::

    config.json            config document (chart, prompts, workflow, backend)
    state.json             recipe, finished stages, checksums, output versions
    plain.png
    masks/mark_<id>.png    plain mark masks
    sketch/sketch.png, sketch/background.png, sketch/grid_<g>.png
    sketch/objects/mark_<id>.png, sketch/patches/mark_<id>.png
    sketch/masks/mark_<id>.png   placed sketch masks
    synth.png
    final.png, final_v1.png, ...
    trace.jsonl            one record per backend call
    dmp_trace.jsonl        one record per DMP step (when tracing is on)
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import configfile, imaging
from .backend import BackendDescriptor, RecordingBackend
from .chart import render_plain, validate_spec
from .errors import BackendFailure, MissingStage, StageError, StylvizError
from .recipe import RecipeSelection, select_recipe
from .refine import refine
from .sketch import SketchResult, run_sketch
from .synthesize import build_mask_sets, synthesize_dispatch

log = logging.getLogger(__name__)

STAGES = ("plain", "sketch", "synth", "final")


@dataclass(eq=False)
class RunState:
    spec: object
    prompts: object
    config: object
    recipe: RecipeSelection | None = None
    directory: Path | None = None
    backend_cfg: dict = field(default_factory=lambda: {"type": "mock"})
    descriptor: BackendDescriptor | None = None
    plain: object = None
    sketch: SketchResult | None = None
    synth: np.ndarray | None = None
    final: np.ndarray | None = None
    records: list = field(default_factory=list)
    dmp_trace: list = field(default_factory=list)
    ops: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    versions: list = field(default_factory=list)

    @property
    def latest(self):
        """The most recent output image (a regenerated version if any exist)."""
        if self.versions:
            return imaging.read_png(self.directory / self.versions[-1])
        return self.final

    def checksums(self):
        out = {}
        for name, img in (("plain", self.plain.image if self.plain is not None else None),
                          ("sketch", self.sketch.image if self.sketch is not None else None),
                          ("synth", self.synth), ("final", self.final)):
            if img is not None:
                out[name] = imaging.checksum(img)
        return out

    # -- persistence -----------------------------------------------------------

    def save(self):
        if self.directory is None:
            return self
        d = Path(self.directory)
        d.mkdir(parents=True, exist_ok=True)
        doc = configfile.document_from_parts(self.spec, self.prompts, self.config, self.backend_cfg)
        (d / "config.json").write_text(json.dumps(doc, indent=2))
        if self.plain is not None:
            imaging.write_png(d / "plain.png", self.plain.image)
            (d / "masks").mkdir(exist_ok=True)
            for m in self.plain.marks:
                imaging.write_mask(d / "masks" / f"mark_{m.mark_id}.png", m.mask)
        if self.sketch is not None:
            self._save_sketch(d / "sketch")
        if self.synth is not None:
            imaging.write_png(d / "synth.png", self.synth)
        if self.final is not None:
            imaging.write_png(d / "final.png", self.final)
        return self.save_meta()

    def save_meta(self):
        """Write only ``trace.jsonl``, ``dmp_trace.jsonl`` and ``state.json``."""
        d = Path(self.directory)
        with open(d / "trace.jsonl", "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")
        if self.dmp_trace:
            with open(d / "dmp_trace.jsonl", "w") as fh:
                for rec in self.dmp_trace:
                    fh.write(json.dumps({k: v for k, v in rec.items() if k != "latent"}) + "\n")
        meta = {
            "recipe": self.recipe.to_dict() if self.recipe else None,
            "stages": self.stages,
            "checksums": self.checksums(),
            "versions": self.versions,
            "ops": self.ops,
            "backend": self.descriptor.to_dict() if self.descriptor else None,
        }
        (d / "state.json").write_text(json.dumps(meta, indent=2))
        return self

    def _save_sketch(self, d):
        for sub in ("objects", "patches", "masks"):
            (d / sub).mkdir(parents=True, exist_ok=True)
        sk = self.sketch
        imaging.write_png(d / "sketch.png", sk.image)
        imaging.write_png(d / "background.png", sk.background)
        for g, img in sk.grids.items():
            imaging.write_png(d / f"grid_{g}.png", img)
        for mid, obj in sk.objects.items():
            imaging.write_png(d / "objects" / f"mark_{mid}.png", obj)
        for mid, patch in sk.patches.items():
            imaging.write_png(d / "patches" / f"mark_{mid}.png", patch)
        for mid, mask in sk.masks.items():
            imaging.write_mask(d / "masks" / f"mark_{mid}.png", mask)

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        if not (d / "config.json").exists():
            raise MissingStage(f"{d} is not a run directory (no config.json)")
        loaded = configfile.parse_document(json.loads((d / "config.json").read_text()))
        meta = json.loads((d / "state.json").read_text()) if (d / "state.json").exists() else {}
        state = cls(loaded.spec, loaded.prompts, loaded.workflow, directory=d, backend_cfg=loaded.backend)
        if meta.get("recipe"):
            state.recipe = RecipeSelection.from_dict(meta["recipe"])
        if meta.get("backend"):
            state.descriptor = BackendDescriptor.from_dict(meta["backend"])
        state.stages = list(meta.get("stages", []))
        state.versions = list(meta.get("versions", []))
        state.ops = list(meta.get("ops", []))
        if (d / "plain.png").exists():
            state.plain = render_plain(loaded.spec, seed=loaded.workflow.seed)
        if (d / "sketch" / "sketch.png").exists():
            state.sketch = _load_sketch(d / "sketch")
        if (d / "synth.png").exists():
            state.synth = imaging.read_png(d / "synth.png")
        if (d / "final.png").exists():
            state.final = imaging.read_png(d / "final.png")
        if (d / "trace.jsonl").exists():
            state.records = [json.loads(line) for line in (d / "trace.jsonl").read_text().splitlines() if line]
        return state

    def stage_path(self, stage):
        d = Path(self.directory)
        paths = {"plain": d / "plain.png", "sketch": d / "sketch" / "sketch.png", "synth": d / "synth.png",
                 "final": d / (self.versions[-1] if self.versions else "final.png"), "trace": d / "trace.jsonl"}
        if stage not in paths:
            raise MissingStage(f"unknown stage {stage!r}; choose from {sorted(paths)}")
        if not paths[stage].exists():
            raise MissingStage(f"stage {stage!r} has not been produced in {d}")
        return paths[stage]

    def next_version_path(self):
        d = Path(self.directory)
        n = 1
        while (d / f"final_v{n}.png").exists():
            n += 1
        return d / f"final_v{n}.png"


def _mark_files(d):
    out = {}
    if d.exists():
        for p in sorted(d.glob("mark_*.png")):
            out[int(p.stem.split("_")[1])] = p
    return out


def _load_sketch(d):
    image = imaging.read_png(d / "sketch.png")
    background = imaging.read_png(d / "background.png") if (d / "background.png").exists() else None
    masks = {mid: imaging.read_mask(p) for mid, p in _mark_files(d / "masks").items()}
    patches = {mid: imaging.read_png(p) for mid, p in _mark_files(d / "patches").items()}
    objects = {mid: imaging.read_png(p) for mid, p in _mark_files(d / "objects").items()}
    grids = {int(p.stem.split("_")[1]): imaging.read_png(p) for p in sorted(d.glob("grid_*.png"))}
    return SketchResult(image, masks, patches, background, grids, objects)


# -- running -----------------------------------------------------------------------

def _stage(state, name, fn):
    try:
        return fn()
    except StylvizError as exc:
        state.save()
        raise StageError(name, exc, state) from exc


def _synth_and_refine(state, rec):
    cfg = state.config
    with rec.stage("synth"):
        dmp_trace = [] if cfg.trace else None
        state.synth = _stage(state, "synth", lambda: synthesize_dispatch(
            state.recipe, state.sketch.image, state.plain, state.prompts, cfg, rec,
            sketch_masks=state.sketch.masks, ops=state.ops, trace=dmp_trace))
        state.dmp_trace = dmp_trace or []
    state.stages.append("synth")
    state.save()
    if state.recipe.refine:
        with rec.stage("refine"):
            state.final = _stage(state, "refine", lambda: refine(state.synth, state.prompts, cfg, rec))
        state.ops.append("refine")
    else:
        state.final = state.synth
    state.stages.append("final")
    return state.save()


def _attempt(spec, prompts, config, backend, state_dir, backend_cfg):
    state = RunState(spec, prompts, config, directory=Path(state_dir) if state_dir else None,
                     backend_cfg=backend_cfg or {"type": "mock"}, descriptor=backend.descriptor)
    rec = RecordingBackend(backend)
    state.records = rec.records
    state.plain = _stage(state, "plain", lambda: render_plain(spec, seed=config.seed))
    state.stages.append("plain")
    state.recipe = _stage(state, "plain", lambda: select_recipe(
        spec.kind, config.realism, config.recipe, n_groups=len(prompts.sub_prompts)))
    _stage(state, "plain", lambda: prompts.validate(state.plain))
    with rec.stage("sketch"):
        state.sketch = _stage(state, "sketch", lambda: run_sketch(state.plain, prompts, state.recipe, config, rec))
    state.stages.append("sketch")
    state.save()
    return _synth_and_refine(state, rec), rec


def run(spec, prompts, config, backend, state_dir=None, backend_cfg=None):
    """Plain render, sketch, synthesize and (if the recipe says so) refine.

    Returns ``(final_image, RunState)``. With ``config.retries > 1`` a
    backend failure restarts the run with the next seed. Stage failures
    raise :class:`StageError` carrying the partial, already persisted state.
    """
    config.validate()
    validate_spec(spec, backend.descriptor.latent_factor)
    prompts.validate()
    last = None
    for attempt in range(config.retries):
        cfg = dataclasses.replace(config, seed=config.seed + attempt)
        try:
            state, _ = _attempt(spec, prompts, cfg, backend, state_dir, backend_cfg)
            return state.final, state
        except StageError as exc:
            last = exc
            if not isinstance(exc.cause, BackendFailure) or attempt == config.retries - 1:
                raise
            log.warning("attempt %d failed (%s); retrying with seed %d", attempt + 1, exc, cfg.seed + 1)
    raise last


def resume(state_dir, backend):
    """Re-run synthesize and refine from a stored sketch snapshot."""
    state = RunState.load(state_dir)
    if state.sketch is None:
        raise MissingStage(f"no sketch snapshot in {state_dir}")
    if state.recipe is None:
        state.recipe = select_recipe(state.spec.kind, state.config.realism, state.config.recipe,
                                     n_groups=len(state.prompts.sub_prompts))
    state.plain = render_plain(state.spec, seed=state.config.seed)
    state.stages = [s for s in state.stages if s in ("plain", "sketch")]
    state.synth = state.final = None
    state.ops = []
    rec = RecordingBackend(backend)
    rec.records.extend(r for r in state.records if r.get("stage") == "sketch")
    state.records = rec.records
    _synth_and_refine(state, rec)
    return state.final, state


# -- fidelity ----------------------------------------------------------------------

def similarity(img, ref, region):
    """``clip(1 - rms(img - ref) / std(ref), 0, 1)`` over ``region``; 1.0 means identical."""
    a = imaging.rgb(img)[region]
    b = imaging.rgb(ref)[region]
    if a.size == 0:
        return float("nan")
    rms = float(np.sqrt(np.mean((a - b) ** 2)))
    if rms == 0.0:
        return 1.0
    spread = float(np.std(b))
    if spread == 0.0:
        return 0.0
    return float(np.clip(1.0 - rms / spread, 0.0, 1.0))


def _scoring_regions(plain, groups, factor):
    """Per mark: the latent cells the mark covers and its group owns, at pixel resolution."""
    labels = build_mask_sets(plain, groups, factor).plain
    out = {}
    for g in groups:
        for mid in g.mark_ids:
            cells = imaging.downsample_mask(plain.mark(mid).mask, factor) & (labels == g.index)
            region = imaging.upsample_mask(cells, factor)
            out[mid] = (g.index, region if region.any() else plain.mark(mid).mask)
    return out


def _references(groups, backend, seed, canvas):
    w, h = canvas
    return {g.index: backend.reference_image(g.prompt, seed, w, h) for g in groups}


def geometry_fidelity(final, plain, groups, backend, seed=0):
    """Per-mark similarity between ``final`` and the mark's own group reference pattern.

    Marks in groups with no marks simply do not appear in the result.
    """
    f = backend.descriptor.latent_factor
    refs = _references(groups, backend, seed, plain.canvas)
    return {mid: similarity(final, refs[g], region)
            for mid, (g, region) in _scoring_regions(plain, groups, f).items()}


def cross_group_similarity(final, plain, groups, backend, seed=0):
    """Per mark, the highest similarity to any *other* group's reference pattern."""
    f = backend.descriptor.latent_factor
    refs = _references(groups, backend, seed, plain.canvas)
    out = {}
    for mid, (g, region) in _scoring_regions(plain, groups, f).items():
        others = [similarity(final, refs[o], region) for o in refs if o != g]
        out[mid] = max(others) if others else 0.0
    return out
