"""Backend contract shared by the mock, the adapter and the call recorder."""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np

from .. import imaging
from ..errors import UnsupportedPipeline

PIPELINES = ("txt2img", "img2img", "depth2img", "inpaint", "controlnet_canny")
CAPABILITIES = frozenset(PIPELINES + ("stepwise",))


def executed_steps(strength, steps):
    """Number of denoising steps a pipeline runs at ``strength``: round(strength * steps), half up."""
    return int(math.floor(strength * steps + 0.5))


@dataclass(frozen=True)
class BackendDescriptor:
    capabilities: frozenset = CAPABILITIES
    latent_factor: int = 8
    latent_channels: int = 4
    scheduler_steps_max: int = 1000
    max_parallel: int = 1
    name: str = "backend"

    def __post_init__(self):
        unknown = set(self.capabilities) - CAPABILITIES
        if unknown:
            raise ValueError(f"unknown capabilities: {sorted(unknown)}")
        if "stepwise" in self.capabilities and not (self.latent_factor and self.latent_channels):
            raise ValueError("stepwise backends must declare latent_factor and latent_channels")

    def to_dict(self):
        return {
            "name": self.name,
            "capabilities": sorted(self.capabilities),
            "latent_factor": self.latent_factor,
            "latent_channels": self.latent_channels,
            "scheduler_steps_max": self.scheduler_steps_max,
            "max_parallel": self.max_parallel,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            capabilities=frozenset(d["capabilities"]),
            latent_factor=int(d["latent_factor"]),
            latent_channels=int(d["latent_channels"]),
            scheduler_steps_max=int(d.get("scheduler_steps_max", 1000)),
            max_parallel=int(d.get("max_parallel", 1)),
            name=d.get("name", "backend"),
        )


@dataclass(eq=False)
class PipelineRequest:
    """One whole-image generation call.

    ``condition`` is an edge mask for controlnet_canny or a depth map for
    depth2img; ``width``/``height`` size txt2img outputs.
    """

    kind: str
    prompt: str = ""
    negative_prompt: str = ""
    strength: float = 1.0
    guidance: float = 20.0
    steps: int = 50
    seed: int = 0
    init_image: np.ndarray | None = None
    mask: np.ndarray | None = None
    condition: np.ndarray | None = None
    width: int = 512
    height: int = 512
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.kind not in PIPELINES:
            raise UnsupportedPipeline(f"unknown pipeline {self.kind!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"strength {self.strength} outside [0, 1]")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.guidance < 0:
            raise ValueError("guidance must be non-negative")
        if self.kind in ("img2img", "depth2img", "inpaint", "controlnet_canny") and self.init_image is None:
            raise ValueError(f"{self.kind} requires init_image")
        if self.kind == "inpaint" and self.mask is None:
            raise ValueError("inpaint requires mask")
        if self.kind == "controlnet_canny" and self.condition is None:
            raise ValueError("controlnet_canny requires an edge condition")
        if self.mask is not None and self.init_image is not None and self.mask.shape != self.init_image.shape[:2]:
            raise ValueError("mask and init_image sizes differ")
        return self

    @property
    def size(self):
        if self.init_image is not None:
            return self.init_image.shape[1], self.init_image.shape[0]
        return self.width, self.height


class DiffusionBackend:
    """Interface every backend implements.

    Orchestration code only looks at ``descriptor.capabilities``; it never
    checks which concrete backend it is talking to.
    """

    descriptor: BackendDescriptor

    def supports(self, capability):
        return capability in self.descriptor.capabilities

    def require(self, capability):
        if not self.supports(capability):
            raise UnsupportedPipeline(f"backend {self.descriptor.name!r} lacks {capability!r}")

    def latent_shape(self, width, height):
        f = self.descriptor.latent_factor
        return (self.descriptor.latent_channels, height // f, width // f)

    def run_image_pipeline(self, req):
        raise NotImplementedError

    def encode(self, img):
        raise NotImplementedError

    def decode(self, z):
        raise NotImplementedError

    def add_noise(self, z, seed, level):
        raise NotImplementedError

    def denoise_step(self, z, prompt, negative, step_index, total_steps, guidance=20.0,
                     condition=None, seed=0):
        raise NotImplementedError

    def depth_map(self, img):
        raise NotImplementedError

    def reference_image(self, prompt, seed, width, height):
        """Image the backend converges to for ``prompt``; only known for test backends."""
        raise NotImplementedError(f"{type(self).__name__} has no reference patterns")


class RecordingBackend(DiffusionBackend):
    """Forwards every call to ``inner`` and keeps one trace record per call."""

    def __init__(self, inner):
        self.inner = inner
        self.records = []
        self.current_stage = None

    @property
    def descriptor(self):
        return self.inner.descriptor

    @contextlib.contextmanager
    def stage(self, name):
        prev, self.current_stage = self.current_stage, name
        try:
            yield self
        finally:
            self.current_stage = prev

    def _log(self, op, result, latent=False, **info):
        rec = {"index": len(self.records), "stage": self.current_stage, "op": op}
        rec.update(info)
        rec["checksum"] = imaging.checksum(result, latent=latent)
        self.records.append(rec)
        return result

    def run_image_pipeline(self, req):
        out = self.inner.run_image_pipeline(req)
        return self._log("pipeline", out, pipeline=req.kind, prompt=req.prompt, seed=req.seed,
                         strength=req.strength, steps=req.steps, guidance=req.guidance)

    def encode(self, img):
        return self._log("encode", self.inner.encode(img), latent=True)

    def decode(self, z):
        return self._log("decode", self.inner.decode(z))

    def add_noise(self, z, seed, level):
        return self._log("add_noise", self.inner.add_noise(z, seed, level), latent=True, seed=seed, strength=level)

    def denoise_step(self, z, prompt, negative, step_index, total_steps, guidance=20.0,
                     condition=None, seed=0):
        out = self.inner.denoise_step(z, prompt, negative, step_index, total_steps, guidance,
                                      condition, seed)
        return self._log("denoise_step", out, latent=True, prompt=prompt, seed=seed, step=step_index,
                         steps=total_steps, guidance=guidance)

    def depth_map(self, img):
        return self._log("depth_map", self.inner.depth_map(img), latent=True)

    def reference_image(self, prompt, seed, width, height):
        return self.inner.reference_image(prompt, seed, width, height)


def stepwise_pipeline(backend, init, prompt, strength, steps, seed=0, negative="", guidance=20.0,
                      condition=None, latents=None):
    """Single-prompt img2img built from step-level calls.

    Encodes ``init``, noises it to ``strength``, runs ``round(strength * steps)``
    denoising steps and decodes. Each intermediate latent is appended to
    ``latents`` when a list is given. Zero steps return ``init`` unchanged.
    """
    backend.require("stepwise")
    total = executed_steps(strength, steps)
    if total == 0:
        return np.array(init, dtype=np.float64)
    z = backend.add_noise(backend.encode(init), seed, strength)
    for i in range(1, total + 1):
        z = backend.denoise_step(z, prompt, negative, i, total, guidance, condition, seed)
        if latents is not None:
            latents.append(z)
    return backend.decode(z)
