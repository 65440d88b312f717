"""Per-idiom workflow variants and their legality table."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidRecipe

PREGEN_METHODS = ("grid_img2img", "direct_depth2img", "freeform_txt2img")
SYNTH_PIPELINES = ("dmp", "img2img", "depth2img_edge", "img2img_edge", "controlnet_canny")

# (kind, realistic) -> legal synthesize pipelines; the first entry is the default.
PIPELINE_TABLE = {
    ("network", True): ("depth2img_edge", "controlnet_canny"),
    ("network", False): ("img2img_edge", "controlnet_canny"),
    ("bar", True): ("dmp", "img2img"),
    ("bar", False): ("img2img", "dmp"),
    ("pie", True): ("dmp", "img2img"),
    ("pie", False): ("img2img", "dmp"),
    ("area", True): ("dmp", "controlnet_canny"),
    ("area", False): ("dmp", "controlnet_canny"),
}
PREGEN_TABLE = {
    "network": ("grid_img2img",),
    "bar": ("grid_img2img",),
    "pie": ("direct_depth2img", "freeform_txt2img"),
    "area": ("direct_depth2img", "freeform_txt2img"),
}
SMOOTH = {"network": True, "bar": False, "pie": False, "area": False}
REFINE = {"network": False, "bar": True, "pie": True, "area": True}
OVERRIDE_KEYS = {"pipeline", "pregen", "smooth", "refine"}


@dataclass(frozen=True)
class RecipeSelection:
    kind: str
    realism: bool
    pregen: tuple
    smooth: bool
    pipeline: str
    refine: bool

    def to_dict(self):
        return {"kind": self.kind, "realism": self.realism, "pregen": list(self.pregen),
                "smooth": self.smooth, "pipeline": self.pipeline, "refine": self.refine}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], bool(d["realism"]), tuple(d["pregen"]), bool(d["smooth"]),
                   d["pipeline"], bool(d["refine"]))


def validate_recipe(recipe):
    key = (recipe.kind, bool(recipe.realism))
    if key not in PIPELINE_TABLE:
        raise InvalidRecipe(f"unknown chart kind {recipe.kind!r}")
    if recipe.pipeline not in PIPELINE_TABLE[key]:
        raise InvalidRecipe(
            f"pipeline {recipe.pipeline!r} is not legal for {recipe.kind} "
            f"({'realistic' if recipe.realism else 'non-realistic'}); "
            f"choose from {PIPELINE_TABLE[key]}"
        )
    if not recipe.pregen:
        raise InvalidRecipe("no pre-generation method")
    for m in recipe.pregen:
        if m not in PREGEN_TABLE[recipe.kind]:
            raise InvalidRecipe(f"pre-generation {m!r} is not legal for {recipe.kind}")
    if recipe.smooth != SMOOTH[recipe.kind]:
        raise InvalidRecipe(f"smoothing must be {'on' if SMOOTH[recipe.kind] else 'off'} for {recipe.kind}")
    if recipe.refine != REFINE[recipe.kind]:
        raise InvalidRecipe(f"refine must be {'on' if REFINE[recipe.kind] else 'off'} for {recipe.kind}")
    return recipe


def select_recipe(kind, realism=True, overrides=None, n_groups=1):
    """Default recipe for ``kind`` with optional overrides, validated against the table.

    ``overrides`` may set ``pipeline``, ``pregen`` (one method, or one per
    group), ``smooth`` and ``refine``.
    """
    overrides = dict(overrides or {})
    unknown = set(overrides) - OVERRIDE_KEYS
    if unknown:
        raise InvalidRecipe(f"unknown recipe override(s): {sorted(unknown)}")
    if kind not in SMOOTH:
        raise InvalidRecipe(f"unknown chart kind {kind!r}")
    pregen = overrides.get("pregen", PREGEN_TABLE[kind][0])
    if isinstance(pregen, str):
        pregen = (pregen,) * max(n_groups, 1)
    elif len(pregen) != n_groups:
        raise InvalidRecipe(f"expected {n_groups} pre-generation methods, got {len(pregen)}")
    recipe = RecipeSelection(
        kind=kind,
        realism=bool(realism),
        pregen=tuple(pregen),
        smooth=bool(overrides.get("smooth", SMOOTH[kind])),
        pipeline=overrides.get("pipeline", PIPELINE_TABLE[(kind, bool(realism))][0]),
        refine=bool(overrides.get("refine", REFINE[kind])),
    )
    return validate_recipe(recipe)
