"""Deterministic stand-in for a latent diffusion runtime.

Laws (all exact, all pure):

* ``encode``: per-block mean of RGB over ``f x f`` blocks; channel 3 (and any
  further channel) holds the mean of the RGB channels.
* ``decode``: nearest upsample of channels 0-2, clipped and snapped to 8 bit.
* ``add_noise``: ``(1 - level) * z + level * noise(seed)``.
* ``denoise_step``: ``z + (target(prompt, seed) - z) / (T - i + 1)``, so the
  final step lands on the prompt's target exactly.
* ``img2img``: the stepwise composition above (encode, add_noise at the
  strength, ``round(strength * N)`` steps, decode); zero steps return the
  input untouched.
* ``depth2img``, ``controlnet_canny``: ``lerp(init, target_image, s)`` with
  ``s = round(strength * N) / N``; ``inpaint`` does the same inside its mask
  and leaves every other pixel bit-identical.
* ``txt2img``: the target image.

Targets are smooth fields keyed by a SHA-256 of ``(prompt, seed)``.
Guidance, negative prompts and conditions are accepted and ignored.
"""

from __future__ import annotations

import functools
import hashlib

import numpy as np
from scipy import ndimage

from .. import imaging
from ..errors import UnsupportedPipeline
from .base import CAPABILITIES, BackendDescriptor, DiffusionBackend, executed_steps

TARGET_CELL = 4  # latent cells per control point of a target field


def _rng(*key):
    digest = hashlib.sha256("\x1f".join(str(k) for k in key).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


@functools.lru_cache(maxsize=256)
def _target(prompt, seed, shape):
    c, h, w = shape
    rng = _rng("target", prompt, seed)
    gh, gw = -(-h // TARGET_CELL) + 1, -(-w // TARGET_CELL) + 1
    coarse = rng.standard_normal((3, gh, gw))
    fine = np.stack([
        ndimage.zoom(ch, ((h + TARGET_CELL) / gh, (w + TARGET_CELL) / gw), order=1)[:h, :w]
        for ch in coarse
    ])
    fine = (fine - fine.mean(axis=(1, 2), keepdims=True)) / (fine.std(axis=(1, 2), keepdims=True) + 1e-12)
    rgb = np.clip(0.5 + 0.3 * fine, 0.0, 1.0)
    out = np.empty(shape)
    out[:3] = rgb
    out[3:] = rgb.mean(axis=0)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=64)
def _noise(seed, shape):
    out = _rng("noise", seed).standard_normal(shape) * 0.5 + 0.5
    out.setflags(write=False)
    return out


def mock_target_pattern(prompt, seed, shape=(4, 64, 64)):
    """Latent the mock converges to for ``(prompt, seed)``."""
    return _target(str(prompt), int(seed), tuple(int(s) for s in shape)).copy()


class MockBackend(DiffusionBackend):
    """Fully deterministic backend; see the module docstring for its laws.

    ``capabilities`` may be narrowed to exercise capability gates.
    """

    def __init__(self, capabilities=None, latent_factor=8, latent_channels=4):
        if latent_channels < 3:
            raise ValueError("the mock needs at least 3 latent channels")
        caps = frozenset(capabilities) if capabilities is not None else CAPABILITIES
        self.descriptor = BackendDescriptor(
            capabilities=caps, latent_factor=latent_factor,
            latent_channels=latent_channels, max_parallel=8, name="mock",
        )

    # -- laws without capability gating (used internally by img2img) --------------

    def _encode(self, img):
        f = self.descriptor.latent_factor
        h, w = img.shape[:2]
        if h % f or w % f:
            raise ValueError(f"image {w}x{h} is not a multiple of latent factor {f}")
        blocks = imaging.rgb(img).reshape(h // f, f, w // f, f, 3).mean(axis=(1, 3))
        z = np.empty((self.descriptor.latent_channels, h // f, w // f))
        z[:3] = np.moveaxis(blocks, -1, 0)
        z[3:] = z[:3].mean(axis=0)
        return z

    def _decode(self, z):
        f = self.descriptor.latent_factor
        img = np.moveaxis(np.asarray(z)[:3], 0, -1)
        img = np.repeat(np.repeat(img, f, axis=0), f, axis=1)
        return imaging.quantize(img)

    def _add_noise(self, z, seed, level):
        if not 0.0 <= level <= 1.0:
            raise ValueError(f"noise level {level} outside [0, 1]")
        if level == 0:
            return np.array(z, dtype=np.float64)
        eta = _noise(int(seed), tuple(np.shape(z)))
        return (1.0 - level) * np.asarray(z) + level * eta

    def _denoise(self, z, prompt, i, total, seed):
        if not 1 <= i <= total:
            raise ValueError(f"step index {i} outside 1..{total}")
        tgt = _target(str(prompt), int(seed), tuple(np.shape(z)))
        if i == total:
            return tgt.copy()
        return np.asarray(z) + (tgt - np.asarray(z)) / (total - i + 1)

    # -- public contract ---------------------------------------------------------

    def encode(self, img):
        self.require("stepwise")
        return self._encode(img)

    def decode(self, z):
        self.require("stepwise")
        return self._decode(z)

    def add_noise(self, z, seed, level):
        self.require("stepwise")
        return self._add_noise(z, seed, level)

    def denoise_step(self, z, prompt, negative, step_index, total_steps, guidance=20.0,
                     condition=None, seed=0):
        self.require("stepwise")
        return self._denoise(z, prompt, step_index, total_steps, seed)

    def depth_map(self, img):
        c = imaging.rgb(img)
        return np.clip(0.299 * c[..., 0] + 0.587 * c[..., 1] + 0.114 * c[..., 2], 0.0, 1.0)

    def target_latent(self, prompt, seed, width, height):
        return mock_target_pattern(prompt, seed, self.latent_shape(width, height))

    def reference_image(self, prompt, seed, width, height):
        return self._decode(self.target_latent(prompt, seed, width, height))

    def run_image_pipeline(self, req):
        req.validate()
        if req.kind not in self.descriptor.capabilities:
            raise UnsupportedPipeline(f"mock backend configured without {req.kind!r}")
        w, h = req.size
        if req.kind == "txt2img":
            return self.reference_image(req.prompt, req.seed, w, h)

        init = np.array(imaging.rgb(req.init_image), dtype=np.float64)
        steps = executed_steps(req.strength, req.steps)
        if steps == 0:
            return init
        if req.kind == "img2img":
            z = self._add_noise(self._encode(init), req.seed, req.strength)
            for i in range(1, steps + 1):
                z = self._denoise(z, req.prompt, i, steps, req.seed)
            return self._decode(z)

        s = steps / req.steps
        blended = imaging.quantize((1.0 - s) * init + s * self.reference_image(req.prompt, req.seed, w, h))
        if req.kind == "inpaint":
            out = init.copy()
            out[req.mask] = blended[req.mask]
            return out
        return blended
