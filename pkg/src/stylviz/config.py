"""Prompt model and workflow configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import ValidationError

DEFAULT_NEGATIVE = "low quality, normal quality, worst quality, poorly drawn, error, abstract, blurry"
DEFAULT_QUALITY = "high resolution realistic clear photograph, 4k"


@dataclass(frozen=True)
class Group:
    """Marks that share one sub-prompt."""

    index: int
    sub_prompt: str
    prompt: str
    mark_ids: tuple


@dataclass
class PromptSpec:
    """Context prompt, sub-prompts, and which mark each sub-prompt styles.

    ``binding`` maps mark id to sub-prompt index. Marks missing from it are
    bound cyclically (mark ``k`` of the stylized marks to ``k mod K``).
    """

    context: str
    sub_prompts: list
    binding: dict = field(default_factory=dict)
    background: str | None = None
    negative: str = DEFAULT_NEGATIVE
    quality: str = DEFAULT_QUALITY

    def group_prompt(self, index):
        return f"{self.context}, {self.sub_prompts[index]}"

    def full_prompt(self):
        return ", ".join([self.context, *self.sub_prompts])

    def refine_prompt(self):
        parts = [self.context, *self.sub_prompts]
        if self.background:
            parts.append(self.background)
        parts.append(self.quality)
        return ", ".join(parts)

    def resolved_binding(self, plain):
        out = {}
        for k, m in enumerate(plain.stylized_marks()):
            out[m.mark_id] = int(self.binding.get(m.mark_id, k % len(self.sub_prompts)))
        return out

    def groups(self, plain):
        binding = self.resolved_binding(plain)
        return [
            Group(g, sub, self.group_prompt(g), tuple(mid for mid, b in binding.items() if b == g))
            for g, sub in enumerate(self.sub_prompts)
        ]

    def validate(self, plain=None):
        problems = []
        if not self.context or not self.context.strip():
            problems.append(("prompts.context", "context prompt must be non-empty"))
        if not self.sub_prompts:
            problems.append(("prompts.subPrompts", "at least one sub-prompt is required"))
        for mid, idx in self.binding.items():
            if not 0 <= int(idx) < len(self.sub_prompts):
                problems.append((f"prompts.binding.{mid}", f"sub-prompt index {idx} out of range"))
        if plain is not None:
            known = {m.mark_id for m in plain.stylized_marks()}
            for mid in self.binding:
                if mid not in known:
                    problems.append((f"prompts.binding.{mid}", f"unknown mark id {mid}"))
        if problems:
            raise ValidationError(problems)
        return self


@dataclass
class Strengths:
    sketch_img2img: float = 0.82
    sketch_depth2img: float = 0.98
    smooth: float = 0.4
    synthesize_img2img: float = 0.4
    synthesize: float = 0.8
    refine: float = 0.30
    inpaint: float = 0.8
    repair: float = 0.2


@dataclass
class WorkflowConfig:
    seed: int = 0
    steps: int = 50
    guidance: float = 20.0
    strengths: Strengths = field(default_factory=Strengths)
    beta: float = 0.5
    realism: bool = True
    recipe: dict = field(default_factory=dict)
    canvas: tuple = (512, 512)
    trace: bool = False
    background_colors: tuple = ((255, 255, 255), (225, 225, 225))
    blur_sigma: float = 6.0
    brighten: float = 1.25
    grid_padding: float = 0.12
    equalize_grid: bool = True
    transform: str | None = None
    tile_size: int = 64
    sketch_mask_dilation: int = 1
    conservation_dilation: int = 2
    regen_dilation: int = 4
    canny_low: int = 100
    canny_high: int = 200
    retries: int = 1
    refine_after_regen: bool = False

    def validate(self):
        problems = []
        for name, value in dataclasses.asdict(self.strengths).items():
            if not 0.0 <= value <= 1.0:
                problems.append((f"workflow.strengths.{name}", f"strength {value} outside [0, 1]"))
        if not 0.0 <= self.beta <= 1.0:
            problems.append(("workflow.beta", f"beta {self.beta} outside [0, 1]"))
        if self.steps < 1:
            problems.append(("workflow.steps", "steps must be >= 1"))
        if self.guidance < 0:
            problems.append(("workflow.guidance", "guidance must be non-negative"))
        if self.retries < 1:
            problems.append(("workflow.retries", "retries must be >= 1"))
        if problems:
            raise ValidationError(problems)
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        strengths = Strengths(**d.pop("strengths", {}))
        if "canvas" in d:
            d["canvas"] = tuple(d["canvas"])
        if "background_colors" in d:
            d["background_colors"] = tuple(tuple(c) for c in d["background_colors"])
        return cls(strengths=strengths, **d)
