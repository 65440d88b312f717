"""Synthesize stage: smoothing, edge overlay, whole-image pipelines and DMP.

DMP (diffusion with multiple prompts) denoises the whole latent once per
sub-prompt group at every step and recombines the results through an
integer owner map, so each latent cell is written by exactly one source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import imaging
from .backend import PipelineRequest, executed_steps
from .errors import InvalidRecipe, NotANetwork

SKETCH, PLAIN = "sketch", "plain"


@dataclass(frozen=True)
class DmpSchedule:
    alpha: float
    beta: float
    steps: int
    groups: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0 or not 0.0 <= self.beta <= 1.0:
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.steps < 1 or self.groups < 1:
            raise ValueError("steps and groups must be >= 1")

    @property
    def total(self):
        """Executed steps T = round(alpha * N)."""
        return executed_steps(self.alpha, self.steps)

    @property
    def switch(self):
        """Last step that uses the sketch masks, floor(alpha * beta * N), capped at T."""
        return min(int(math.floor(self.alpha * self.beta * self.steps)), self.total)

    def noise_level(self, i):
        """Noise level of the background sketch latent at step ``i``."""
        return self.alpha * (self.total - i) / self.total


@dataclass(eq=False)
class MaskSetPair:
    """Latent-resolution owner maps; value ``K`` marks background cells."""

    sketch: np.ndarray
    plain: np.ndarray
    groups: int

    def group_masks(self, which):
        labels = self.sketch if which == SKETCH else self.plain
        return [labels == g for g in range(self.groups)]

    def background(self, which):
        labels = self.sketch if which == SKETCH else self.plain
        return labels == self.groups


def _owner_map(group_masks, shape):
    k = len(group_masks)
    labels = np.full(shape, k, dtype=np.int64)
    # lower group index wins where masks overlap
    for g in reversed(range(k)):
        labels[group_masks[g]] = g
    return labels


def build_mask_sets(plain, groups, factor, sketch_masks=None, dilation=1):
    """Owner maps for the sketch phase and the plain phase.

    Sketch masks come from the placed patch alpha of each mark (falling back
    to the plain mask), downsampled and dilated by ``dilation`` cells. With a
    single group that group owns the whole latent in both phases.
    """
    h, w = plain.image.shape[:2]
    shape = (h // factor, w // factor)
    k = len(groups)
    if k == 1:
        full = np.zeros(shape, dtype=np.int64)
        return MaskSetPair(full, full.copy(), 1)
    sketch_masks = sketch_masks or {}
    plain_sets, sketch_sets = [], []
    for g in groups:
        pm = np.zeros((h, w), bool)
        sm = np.zeros((h, w), bool)
        for mid in g.mark_ids:
            pm |= plain.mark(mid).mask
            sm |= sketch_masks.get(mid, plain.mark(mid).mask)
        plain_sets.append(imaging.downsample_mask(pm, factor))
        sketch_sets.append(imaging.dilate(imaging.downsample_mask(sm, factor), dilation))
    return MaskSetPair(_owner_map(sketch_sets, shape), _owner_map(plain_sets, shape), k)


def dmp_mask_set(i, schedule, masks):
    """Active owner map at step ``i``: sketch masks iff ``i <= switch``."""
    if not 1 <= i <= schedule.total:
        raise ValueError(f"step {i} outside 1..{schedule.total}")
    if i <= schedule.switch:
        return SKETCH, masks.sketch
    return PLAIN, masks.plain


def dmp_background_latent(i, schedule, group_latents, noised_sketch_latent_at):
    """Background latent and its source name at step ``i``.

    Up to the switch this is the sketch latent noised to the step-``i`` level;
    afterwards the group latents take turns, ``(i - switch - 1) mod K``.
    """
    if i <= schedule.switch:
        return noised_sketch_latent_at(i), SKETCH
    g = (i - schedule.switch - 1) % len(group_latents)
    return group_latents[g], f"group {g}"


def combine(group_latents, background, labels):
    """Pick each latent cell from the source its owner label names."""
    stack = np.stack(list(group_latents) + [background])
    idx = np.broadcast_to(labels[None, None], (1,) + stack.shape[1:])
    return np.take_along_axis(stack, idx, axis=0)[0]


def dmp(sketch, plain, groups, config, backend, sketch_masks=None, trace=None, strength=None,
        negative=""):
    """Masked multi-prompt diffusion over the sketch.

    ``groups`` is the ordered list of :class:`~stylviz.config.Group`.
    When ``trace`` is a list it receives one record per step with the
    active mask set, background source, per-group checksums and the
    combined latent.
    """
    backend.require("stepwise")
    alpha = config.strengths.synthesize if strength is None else strength
    schedule = DmpSchedule(alpha, config.beta, config.steps, len(groups))
    T = schedule.total
    if T == 0:
        return np.array(imaging.rgb(sketch), dtype=np.float64)
    f = backend.descriptor.latent_factor
    masks = build_mask_sets(plain, groups, f, sketch_masks, config.sketch_mask_dilation)

    encoded = backend.encode(sketch)
    depth = backend.depth_map(sketch)
    z = backend.add_noise(encoded, config.seed, alpha)

    def noised_at(i):
        return backend.add_noise(encoded, config.seed, schedule.noise_level(i))

    for i in range(1, T + 1):
        latents = [
            backend.denoise_step(z, g.prompt, negative, i, T, config.guidance, depth, config.seed)
            for g in groups
        ]
        which, labels = dmp_mask_set(i, schedule, masks)
        if (labels == len(groups)).any():
            bg, source = dmp_background_latent(i, schedule, latents, noised_at)
        else:
            bg, source = latents[0], "none"
        z = combine(latents, bg, labels)
        if trace is not None:
            trace.append({
                "step": i,
                "total": T,
                "switch": schedule.switch,
                "mask_set": which,
                "background": source,
                "checksums": [imaging.checksum(lt, latent=True) for lt in latents],
                "latent": z,
            })
    return backend.decode(z)


def smooth(sketch, prompt, backend, config, negative=""):
    """Low-strength img2img pass over the sketch."""
    return backend.run_image_pipeline(PipelineRequest(
        "img2img", prompt=prompt, negative_prompt=negative, strength=config.strengths.smooth,
        guidance=config.guidance, steps=config.steps, seed=config.seed, init_image=imaging.rgb(sketch)))


def overlay_edges(img, plain):
    """Re-paint the plain network's edge strokes over ``img``."""
    if plain.kind != "network" or plain.edge_layer is None:
        raise NotANetwork(f"edge overlay needs a network, got {plain.kind!r}")
    return imaging.composite(imaging.rgb(img), plain.edge_layer, imaging.alpha(plain.edge_layer) >= 0.5)


def synthesize_dispatch(recipe, sketch, plain, prompts, config, backend, sketch_masks=None,
                        ops=None, trace=None):
    """Run the synthesize variant named by ``recipe``.

    Only sequences module operations; ``ops`` (a list) receives their names
    in call order.
    """
    ops = ops if ops is not None else []
    prompt = prompts.full_prompt()
    common = dict(prompt=prompt, negative_prompt=prompts.negative, guidance=config.guidance,
                  steps=config.steps, seed=config.seed)
    s = config.strengths
    img = imaging.rgb(sketch)

    if recipe.smooth:
        ops.append("smooth")
        img = smooth(img, prompt, backend, config, prompts.negative)

    p = recipe.pipeline
    if p == "dmp":
        ops.append("dmp")
        return dmp(img, plain, prompts.groups(plain), config, backend, sketch_masks=sketch_masks,
                   trace=trace, negative=prompts.negative)
    if p == "img2img":
        ops.append("img2img")
        return backend.run_image_pipeline(PipelineRequest(
            "img2img", strength=s.synthesize_img2img, init_image=img, **common))
    if p == "controlnet_canny":
        ops.append("canny")
        edges = imaging.canny_edges(sketch, config.canny_low, config.canny_high)
        ops.append("controlnet_canny")
        return backend.run_image_pipeline(PipelineRequest(
            "controlnet_canny", strength=s.synthesize, init_image=img, condition=edges, **common))
    if p in ("depth2img_edge", "img2img_edge"):
        ops.append("overlay_edges")
        img = overlay_edges(img, plain)
        if p == "img2img_edge":
            ops.append("img2img")
            return backend.run_image_pipeline(PipelineRequest(
                "img2img", strength=s.synthesize_img2img, init_image=img, **common))
        ops.append("depth_map")
        depth = backend.depth_map(img)
        ops.append("depth2img")
        return backend.run_image_pipeline(PipelineRequest(
            "depth2img", strength=s.synthesize, init_image=img, condition=depth, **common))
    raise InvalidRecipe(f"unknown synthesize pipeline {p!r}")
