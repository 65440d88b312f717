"""Refine stage and mask-targeted post-processing.

The ``regenerate_*`` helpers take any object exposing ``final``, ``plain``
and ``prompts`` (normally a :class:`~stylviz.workflow.RunState`). Every one
of them is an inpaint call, so pixels outside the target mask come back
bit-identical.
"""

from __future__ import annotations

import numpy as np

from . import imaging
from .backend import PipelineRequest
from .chart import background_mask
from .errors import DimensionError, EmptyMask, RequiresPrompt, UnknownMark


def refine(img, prompts, config, backend, strength=None):
    """Low-strength depth2img over the whole image with the quality prompt appended."""
    img = imaging.rgb(img)
    return backend.run_image_pipeline(PipelineRequest(
        "depth2img", prompt=prompts.refine_prompt(), negative_prompt=prompts.negative,
        strength=config.strengths.refine if strength is None else strength,
        guidance=config.guidance, steps=config.steps, seed=config.seed,
        init_image=img, condition=backend.depth_map(img)))


def _inpaint(img, mask, prompt, negative, backend, config, strength):
    return backend.run_image_pipeline(PipelineRequest(
        "inpaint", prompt=prompt, negative_prompt=negative, strength=strength,
        guidance=config.guidance, steps=config.steps, seed=config.seed,
        init_image=imaging.rgb(img), mask=mask))


def mark_prompt(prompts, plain, mark_id):
    """The group prompt a mark was stylized with (the full prompt for network edges)."""
    binding = prompts.resolved_binding(plain)
    if mark_id in binding:
        return prompts.group_prompt(binding[mark_id])
    return prompts.full_prompt()


def regen_mark_mask(plain, mark_id, config):
    try:
        geom = plain.mark(mark_id)
    except KeyError:
        raise UnknownMark(mark_id) from None
    return imaging.dilate(geom.mask, config.regen_dilation)


def regenerate_mark(state, mark_id, prompt, backend, config, strength=None):
    """Inpaint one mark's dilated plain mask, reusing its sub-prompt when ``prompt`` is None."""
    mask = regen_mark_mask(state.plain, mark_id, config)
    if prompt is None:
        prompt = mark_prompt(state.prompts, state.plain, mark_id)
    s = config.strengths.inpaint if strength is None else strength
    return _inpaint(state.final, mask, prompt, state.prompts.negative, backend, config, s)


def regenerate_background(state, prompt, backend, config, strength=None):
    """Inpaint the background region with ``prompt`` or the stored background prompt."""
    prompt = prompt or state.prompts.background
    if not prompt:
        raise RequiresPrompt("no background prompt given and none stored with the run")
    mask = background_mask(state.plain)
    s = config.strengths.inpaint if strength is None else strength
    return _inpaint(state.final, mask, prompt, state.prompts.negative, backend, config, s)


def regenerate_region(state, region, prompt, backend, config, strength=None):
    """Inpaint an arbitrary canvas-sized region; ``strength`` supports low-strength repair.

    Without a ``prompt`` the full prompt of the run is used.
    """
    prompt = prompt or state.prompts.full_prompt()
    region = np.asarray(region, bool)
    if region.shape != state.final.shape[:2]:
        raise DimensionError(f"region {region.shape} does not match canvas {state.final.shape[:2]}")
    if not region.any():
        raise EmptyMask("regeneration region is empty")
    s = config.strengths.inpaint if strength is None else strength
    return _inpaint(state.final, region, prompt, state.prompts.negative, backend, config, s)
