"""Out-of-process backend adapter and its JSON wire format.

Messages are JSON objects ``{"op": ..., "seed": ..., ...}``. Images and masks
travel as base64 PNG; latents and depth maps as base64 little-endian float32
with an explicit shape. Every response echoes the request seed.

``handle_message`` is the server half: a runtime process can wrap any
:class:`DiffusionBackend` with it and expose it over HTTP.
"""

from __future__ import annotations

import base64
import json
import os
import urllib.error
import urllib.request

import numpy as np

from .. import errors, imaging
from .base import BackendDescriptor, DiffusionBackend, PipelineRequest

ENDPOINT_ENV = "VIZ2VIZ_BACKEND_ENDPOINT"


def encode_image(img):
    return {"png": base64.b64encode(imaging.png_bytes(img)).decode("ascii")}


def decode_image(obj):
    return imaging.from_png_bytes(base64.b64decode(obj["png"]))


def encode_mask(mask):
    return {"png": base64.b64encode(imaging.png_bytes(np.asarray(mask, bool))).decode("ascii")}


def decode_mask(obj):
    return imaging.from_png_bytes(base64.b64decode(obj["png"]), as_mask=True)


def encode_array(arr):
    arr = np.asarray(arr)
    data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return {"shape": list(arr.shape), "dtype": "<f4", "data": base64.b64encode(data).decode("ascii")}


def decode_array(obj):
    if obj.get("dtype", "<f4") != "<f4":
        raise ValueError(f"unsupported array dtype {obj['dtype']!r}")
    raw = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f4")
    return raw.reshape(obj["shape"]).astype(np.float64)


def request_to_message(req):
    msg = {
        "op": "run_image_pipeline",
        "kind": req.kind,
        "prompt": req.prompt,
        "negative_prompt": req.negative_prompt,
        "strength": req.strength,
        "guidance": req.guidance,
        "steps": req.steps,
        "seed": req.seed,
        "width": req.width,
        "height": req.height,
    }
    if req.init_image is not None:
        msg["init_image"] = encode_image(req.init_image)
    if req.mask is not None:
        msg["mask"] = encode_mask(req.mask)
    if req.condition is not None:
        cond = np.asarray(req.condition)
        msg["condition"] = encode_mask(cond) if cond.dtype == np.bool_ else encode_array(cond)
        msg["condition_type"] = "edges" if cond.dtype == np.bool_ else "depth"
    return msg


def message_to_request(msg):
    cond = None
    if "condition" in msg:
        cond = decode_mask(msg["condition"]) if msg.get("condition_type") == "edges" else decode_array(msg["condition"])
    return PipelineRequest(
        kind=msg["kind"],
        prompt=msg.get("prompt", ""),
        negative_prompt=msg.get("negative_prompt", ""),
        strength=float(msg.get("strength", 1.0)),
        guidance=float(msg.get("guidance", 20.0)),
        steps=int(msg.get("steps", 50)),
        seed=int(msg.get("seed", 0)),
        init_image=decode_image(msg["init_image"]) if "init_image" in msg else None,
        mask=decode_mask(msg["mask"]) if "mask" in msg else None,
        condition=cond,
        width=int(msg.get("width", 512)),
        height=int(msg.get("height", 512)),
    )


def handle_message(backend, msg):
    """Execute one wire message against ``backend`` and build the response."""
    op = msg.get("op")
    seed = msg.get("seed")
    try:
        if op == "describe":
            result = backend.descriptor.to_dict()
        elif op == "run_image_pipeline":
            result = encode_image(backend.run_image_pipeline(message_to_request(msg)))
        elif op == "encode":
            result = encode_array(backend.encode(decode_image(msg["image"])))
        elif op == "decode":
            result = encode_image(backend.decode(decode_array(msg["latent"])))
        elif op == "add_noise":
            result = encode_array(backend.add_noise(decode_array(msg["latent"]), int(seed), float(msg["level"])))
        elif op == "denoise_step":
            cond = decode_array(msg["condition"]) if "condition" in msg else None
            result = encode_array(backend.denoise_step(
                decode_array(msg["latent"]), msg["prompt"], msg.get("negative", ""),
                int(msg["step_index"]), int(msg["total_steps"]), float(msg.get("guidance", 20.0)),
                cond, int(seed),
            ))
        elif op == "depth_map":
            result = encode_array(backend.depth_map(decode_image(msg["image"])))
        else:
            return {"ok": False, "seed": seed, "error": {"type": "BadRequest", "message": f"unknown op {op!r}"}}
    except errors.StylvizError as exc:
        return {"ok": False, "seed": seed, "error": {"type": type(exc).__name__, "message": str(exc)}}
    except (KeyError, ValueError) as exc:
        return {"ok": False, "seed": seed, "error": {"type": "BadRequest", "message": str(exc)}}
    return {"ok": True, "seed": seed, "result": result}


class AdapterBackend(DiffusionBackend):
    """Client for a runtime speaking the wire format over HTTP POST.

    The endpoint comes from the argument or, when that is empty, from the
    ``VIZ2VIZ_BACKEND_ENDPOINT`` environment variable.
    """

    def __init__(self, endpoint=None, timeout=600.0):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not self.endpoint:
            raise errors.BackendFailure(f"no adapter endpoint configured (set {ENDPOINT_ENV})")
        self.timeout = timeout
        self._descriptor = None

    def _call(self, msg):
        body = json.dumps(msg).encode("utf-8")
        http_req = urllib.request.Request(self.endpoint, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(http_req, timeout=self.timeout) as resp:
                reply = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise errors.BackendFailure(f"adapter transport error: {exc}") from exc
        if reply.get("seed") != msg.get("seed"):
            raise errors.BackendFailure(f"adapter echoed seed {reply.get('seed')!r}, expected {msg.get('seed')!r}")
        if not reply.get("ok"):
            err = reply.get("error", {})
            if err.get("type") == "UnsupportedPipeline":
                raise errors.UnsupportedPipeline(err.get("message", ""))
            raise errors.BackendFailure(f"{err.get('type', 'Error')}: {err.get('message', '')}")
        return reply["result"]

    @property
    def descriptor(self):
        if self._descriptor is None:
            self._descriptor = BackendDescriptor.from_dict(self._call({"op": "describe", "seed": None}))
        return self._descriptor

    def run_image_pipeline(self, req):
        req.validate()
        return decode_image(self._call(request_to_message(req)))

    def encode(self, img):
        return decode_array(self._call({"op": "encode", "seed": None, "image": encode_image(img)}))

    def decode(self, z):
        return decode_image(self._call({"op": "decode", "seed": None, "latent": encode_array(z)}))

    def add_noise(self, z, seed, level):
        return decode_array(self._call({"op": "add_noise", "seed": int(seed), "level": float(level),
                                        "latent": encode_array(z)}))

    def denoise_step(self, z, prompt, negative, step_index, total_steps, guidance=20.0,
                     condition=None, seed=0):
        msg = {"op": "denoise_step", "seed": int(seed), "latent": encode_array(z), "prompt": prompt,
               "negative": negative, "step_index": int(step_index), "total_steps": int(total_steps),
               "guidance": float(guidance)}
        if condition is not None:
            msg["condition"] = encode_array(condition)
        return decode_array(self._call(msg))

    def depth_map(self, img):
        return decode_array(self._call({"op": "depth_map", "seed": None, "image": encode_image(img)}))
