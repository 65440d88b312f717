"""Sketch stage: pre-generate objects per mark group, fit them to marks, assemble.

Objects are RGBA arrays; a mark patch is an RGBA array the size of the
mark's bbox whose alpha never extends beyond the mark's own mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .backend import PipelineRequest
from .chart import MIN_MARK_PX
from .errors import CellOverflow, MissingPatch

TRANSFORMS = ("rescale", "cutout", "elongate", "stack", "tile_fill")
GRID_BACKGROUND = (255, 255, 255)


@dataclass(eq=False)
class GridLayout:
    grid_side: int
    cell: tuple
    placements: list
    canvas: tuple
    shapes: dict = field(default_factory=dict)  # mark_id -> (x, y, mask) in grid coordinates


@dataclass(eq=False)
class SketchResult:
    image: np.ndarray
    masks: dict
    patches: dict
    background: np.ndarray
    grids: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)


def _equal_bar_shape(inner_w, inner_h):
    w = max(int(round(inner_w * 0.5)), 1)
    return np.ones((inner_h, w), bool)


def build_grid(marks, cell=None, equalize=True, canvas=(512, 512), padding=0.12):
    """Lay marks out in an ``N x N`` grid, N = ceil(sqrt(len(marks))).

    Each mark's flat-colour shape is drawn centred in its cell. With
    ``equalize`` every shape is scaled to fill its cell (bars become identical
    rectangles); otherwise one shrink factor keeps relative sizes.
    """
    if not marks:
        raise ValueError("build_grid needs at least one mark")
    n = math.ceil(math.sqrt(len(marks)))
    W, H = canvas
    if cell is None:
        cell = (W // n, H // n)
    cw, ch = cell
    if n * cw > W or n * ch > H:
        raise CellOverflow(f"{n}x{n} cells of {cw}x{ch} exceed canvas {W}x{H}")
    inner_w = int(cw * (1 - 2 * padding))
    inner_h = int(ch * (1 - 2 * padding))

    crops = []
    for m in marks:
        x, y, w, h = m.bbox
        crops.append(m.mask[y:y + h, x:x + w])
    if not equalize:
        s = min(min(inner_w / c.shape[1], inner_h / c.shape[0]) for c in crops)

    image = imaging.solid(W, H, GRID_BACKGROUND)
    layout = GridLayout(n, (cw, ch), [], (W, H))
    for k, (m, crop) in enumerate(zip(marks, crops)):
        row, col = divmod(k, n)
        if equalize and m.kind == "bar":
            shape = _equal_bar_shape(inner_w, inner_h)
        else:
            scale = min(inner_w / crop.shape[1], inner_h / crop.shape[0]) if equalize else s
            shape = imaging.resize_mask(crop, max(int(round(crop.shape[1] * scale)), 1),
                                        max(int(round(crop.shape[0] * scale)), 1))
        sh, sw = shape.shape
        if sw < MIN_MARK_PX or sh < MIN_MARK_PX or sw > cw or sh > ch:
            raise CellOverflow(f"mark {m.mark_id} cannot be drawn as a {sw}x{sh} shape in a {cw}x{ch} cell")
        ox = col * cw + (cw - sw) // 2
        oy = row * ch + (ch - sh) // 2
        image[oy:oy + sh, ox:ox + sw][shape] = np.asarray(m.color) / 255.0
        layout.placements.append((m.mark_id, row, col))
        layout.shapes[m.mark_id] = (ox, oy, shape)
    return image, layout


def disassemble(generated, layout):
    """Cell-sized crops of a generated grid, keyed by mark id (empty cells skipped)."""
    cw, ch = layout.cell
    return {
        mid: np.array(generated[row * ch:(row + 1) * ch, col * cw:(col + 1) * cw])
        for mid, row, col in layout.placements
    }


def grid_objects(generated, layout):
    """RGBA objects cut from a generated grid along each mark's drawn shape."""
    out = {}
    for mid, (ox, oy, shape) in layout.shapes.items():
        sh, sw = shape.shape
        out[mid] = imaging.with_alpha(generated[oy:oy + sh, ox:ox + sw], shape.astype(np.float64))
    return out


def pregenerate_mark_group(plain, group_marks, sub_prompt, method, backend, config,
                           negative="", artifacts=None):
    """Generate one stylized object per mark of a group.

    ``grid_img2img`` returns shape-cut RGBA objects from the grid;
    ``direct_depth2img`` returns per-mark cut-outs of a restyled plain chart;
    ``freeform_txt2img`` returns the same canvas-sized image for every mark.
    Intermediate images are stored in ``artifacts`` when a dict is passed.
    """
    W, H = plain.canvas
    common = dict(negative_prompt=negative, guidance=config.guidance, steps=config.steps, seed=config.seed)
    if method == "grid_img2img":
        grid, layout = build_grid(group_marks, equalize=config.equalize_grid, canvas=(W, H),
                                  padding=config.grid_padding)
        generated = backend.run_image_pipeline(PipelineRequest(
            "img2img", prompt=sub_prompt, strength=config.strengths.sketch_img2img, init_image=grid, **common))
        if artifacts is not None:
            artifacts["grid"] = grid
            artifacts["generated"] = generated
            artifacts["layout"] = layout
        return grid_objects(generated, layout)
    if method == "direct_depth2img":
        depth = backend.depth_map(plain.image)
        generated = backend.run_image_pipeline(PipelineRequest(
            "depth2img", prompt=sub_prompt, strength=config.strengths.sketch_depth2img,
            init_image=plain.image, condition=depth, **common))
        if artifacts is not None:
            artifacts["generated"] = generated
        return {m.mark_id: imaging.cutout(generated, m.mask) for m in group_marks}
    if method == "freeform_txt2img":
        generated = backend.run_image_pipeline(PipelineRequest(
            "txt2img", prompt=sub_prompt, width=W, height=H, **common))
        if artifacts is not None:
            artifacts["generated"] = generated
        return {m.mark_id: generated for m in group_marks}
    raise ValueError(f"unknown pre-generation method {method!r}")


def default_transform(mark_kind, method, preferred=None):
    if preferred is not None:
        if preferred in ("elongate", "stack") and mark_kind != "bar":
            return "rescale" if method == "grid_img2img" else "cutout" if method == "freeform_txt2img" else "rescale"
        if preferred == "cutout" and method == "grid_img2img":
            return "rescale"
        return preferred
    if mark_kind == "bar":
        return "elongate"
    if method == "freeform_txt2img":
        return "cutout"
    return "rescale"


def _fit_width(obj, w):
    oh, ow = obj.shape[:2]
    return imaging.resize(obj, w, max(int(round(oh * w / ow)), 1))


def object_to_mark(obj, geom, transform, tile_size=64):
    """Turn a generated object into a patch the size of ``geom.bbox``.

    The patch alpha is binary and is intersected with the mark mask, so a
    patch can never paint outside the mark it encodes.
    """
    x, y, w, h = geom.bbox
    local = geom.mask[y:y + h, x:x + w]
    if obj.shape[-1] == 3:
        obj = imaging.with_alpha(obj, np.ones(obj.shape[:2]))

    if transform == "cutout":
        patch = imaging.cutout(obj, geom.mask)
    elif transform == "rescale":
        patch = imaging.resize(imaging.alpha_trim(obj), w, h)
    elif transform == "elongate":
        fitted = _fit_width(imaging.alpha_trim(obj), w)
        if fitted.shape[0] < h:
            patch = imaging.elongate(fitted, h, imaging.VERTICAL)
        else:
            patch = imaging.resize(fitted, w, h)
    elif transform == "stack":
        fitted = _fit_width(imaging.alpha_trim(obj), w)
        patch = imaging.stack_duplicate(fitted, h, imaging.VERTICAL)
    elif transform == "tile_fill":
        small = imaging.alpha_trim(obj)
        oh, ow = small.shape[:2]
        k = tile_size / max(oh, ow)
        small = imaging.resize(small, max(int(round(ow * k)), 1), max(int(round(oh * k)), 1))
        patch = imaging.tile_fill(small, geom.mask)[y:y + h, x:x + w]
    else:
        raise ValueError(f"unknown transform {transform!r}")

    opaque = (imaging.alpha(patch) >= 0.5) & local
    return imaging.with_alpha(patch, opaque.astype(np.float64))


def pregenerate_background(prompt, canvas, backend, config, negative=""):
    """Blurred, brightened txt2img background, or a gradient when there is no prompt."""
    W, H = canvas
    if not prompt:
        c1, c2 = config.background_colors
        return imaging.quantize(imaging.gradient_background(W, H, c1, c2, imaging.VERTICAL))
    generated = backend.run_image_pipeline(PipelineRequest(
        "txt2img", prompt=prompt, negative_prompt=negative, guidance=config.guidance,
        steps=config.steps, seed=config.seed, width=W, height=H))
    return imaging.quantize(imaging.blur_brighten(generated, config.blur_sigma, config.brighten))


def placed_mask(patch, geom, canvas_shape):
    x, y, w, h = geom.bbox
    out = np.zeros(canvas_shape, bool)
    out[y:y + h, x:x + w] = imaging.alpha(patch) >= 0.5
    return out


def assemble(background, mark_patches, plain):
    """Paste edge strokes (networks) and then every mark patch, in ascending mark id."""
    out = np.array(imaging.rgb(background), dtype=np.float64)
    if plain.edge_layer is not None:
        out = imaging.composite(out, plain.edge_layer, imaging.alpha(plain.edge_layer) >= 0.5)
    for m in sorted(plain.stylized_marks(), key=lambda g: g.mark_id):
        if m.mark_id not in mark_patches:
            raise MissingPatch(m.mark_id)
        patch = mark_patches[m.mark_id]
        out = imaging.composite(out, patch, imaging.alpha(patch) >= 0.5, m.anchor)
    return imaging.quantize(out)


def run_sketch(plain, prompts, recipe, config, backend):
    """Full sketch stage: per-group pre-generation, object-to-mark, background, assembly."""
    groups = prompts.groups(plain)
    objects, patches, grids = {}, {}, {}
    for group, method in zip(groups, recipe.pregen):
        marks = [plain.mark(mid) for mid in group.mark_ids]
        if not marks:
            continue
        artifacts = {}
        group_objects = pregenerate_mark_group(plain, marks, group.prompt, method, backend, config,
                                               negative=prompts.negative, artifacts=artifacts)
        if "grid" in artifacts:
            grids[group.index] = artifacts["generated"]
        for m in marks:
            obj = group_objects[m.mark_id]
            transform = default_transform(m.kind, method, config.transform)
            objects[m.mark_id] = obj
            patches[m.mark_id] = object_to_mark(obj, m, transform, config.tile_size)
    background = pregenerate_background(prompts.background, plain.canvas, backend, config,
                                        negative=prompts.negative)
    image = assemble(background, patches, plain)
    shape = plain.image.shape[:2]
    masks = {mid: placed_mask(p, plain.mark(mid), shape) for mid, p in patches.items()}
    return SketchResult(image, masks, patches, background, grids, objects)
