"""Deterministic raster primitives.

Images are ``float64`` numpy arrays of shape ``(H, W, 3)`` or ``(H, W, 4)``
with values in ``[0, 1]``; masks are boolean arrays of shape ``(H, W)``.
Nothing here mutates its inputs.
"""

from __future__ import annotations

import hashlib
import math

import cv2
import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DegenerateObject, DimensionError, EmptyMask

VERTICAL = "vertical"
HORIZONTAL = "horizontal"


# -- conversion and IO ---------------------------------------------------------

def quantize(img):
    """Snap values onto the 8-bit grid (k / 255)."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def to_uint8(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(arr):
    return np.asarray(arr, dtype=np.float64) / 255.0


def checksum(arr, latent=False):
    """Short stable digest of an image (hashed as 8-bit) or a latent/float field."""
    arr = np.asarray(arr)
    if arr.dtype == np.bool_:
        data = arr.astype(np.uint8)
    elif not latent and arr.ndim == 3 and arr.shape[-1] in (3, 4):
        data = to_uint8(arr)
    else:
        data = arr.astype("<f8")
    h = hashlib.sha256(repr(data.shape).encode())
    h.update(np.ascontiguousarray(data).tobytes())
    return h.hexdigest()[:16]


def write_png(path, img):
    img = np.asarray(img)
    mode = "RGBA" if img.shape[-1] == 4 else "RGB"
    Image.fromarray(to_uint8(img), mode=mode).save(path)


def read_png(path):
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA"):
            im = im.convert("RGBA" if "A" in im.mode else "RGB")
        return from_uint8(np.array(im))


def write_mask(path, mask):
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def read_mask(path):
    with Image.open(path) as im:
        return np.array(im.convert("L")) >= 128


def png_bytes(img):
    import io

    buf = io.BytesIO()
    img = np.asarray(img)
    if img.ndim == 2:
        Image.fromarray(np.where(img, 255, 0).astype(np.uint8), mode="L").save(buf, format="PNG")
    else:
        mode = "RGBA" if img.shape[-1] == 4 else "RGB"
        Image.fromarray(to_uint8(img), mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data, as_mask=False):
    import io

    with Image.open(io.BytesIO(data)) as im:
        if as_mask:
            return np.array(im.convert("L")) >= 128
        if im.mode not in ("RGB", "RGBA"):
            im = im.convert("RGB")
        return from_uint8(np.array(im))


# -- helpers -------------------------------------------------------------------

def rgb(img):
    return np.asarray(img)[..., :3]


def alpha(img):
    img = np.asarray(img)
    if img.shape[-1] == 4:
        return img[..., 3]
    return np.ones(img.shape[:2])


def with_alpha(img, a):
    a = np.asarray(a, dtype=np.float64)
    return np.concatenate([rgb(img), a[..., None]], axis=-1)


def solid(w, h, color):
    """Uniform RGB image; ``color`` is an 8-bit triple."""
    out = np.empty((h, w, 3))
    out[:] = np.asarray(color, dtype=np.float64) / 255.0
    return out


def mask_bbox(mask):
    """Tight ``(x, y, w, h)`` box around the set pixels, or None if empty."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return (int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def dilate(mask, radius):
    """Euclidean dilation by ``radius`` pixels (0 returns a copy)."""
    if radius <= 0:
        return mask.copy()
    if not mask.any():
        return mask.copy()
    return ndimage.distance_transform_edt(~mask) <= radius


def resize(img, w, h):
    """Bilinear resize to ``w`` x ``h``."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape[1] == w and img.shape[0] == h:
        return img.copy()
    return cv2.resize(img, (int(w), int(h)), interpolation=cv2.INTER_LINEAR)


def resize_mask(mask, w, h):
    out = cv2.resize(mask.astype(np.uint8), (int(w), int(h)), interpolation=cv2.INTER_NEAREST)
    return out.astype(bool)


def alpha_trim(obj, threshold=0.5):
    """Crop an RGBA object to the bounding box of its opaque pixels."""
    box = mask_bbox(alpha(obj) >= threshold)
    if box is None:
        return obj[:0, :0].copy()
    x, y, w, h = box
    return obj[y:y + h, x:x + w].copy()


def _along(axis):
    if axis == VERTICAL:
        return 0
    if axis == HORIZONTAL:
        return 1
    raise ValueError(f"axis must be {VERTICAL!r} or {HORIZONTAL!r}, got {axis!r}")


# -- operations ------------------------------------------------------------------

def canny_edges(img, low=100, high=200):
    """Binary Canny edge map; thresholds on the 0-255 scale."""
    if low > high:
        raise ValueError("low threshold must not exceed high threshold")
    gray = cv2.cvtColor(to_uint8(rgb(img)), cv2.COLOR_RGB2GRAY)
    return cv2.Canny(gray, float(low), float(high)) > 0


def blur_brighten(img, sigma=6.0, factor=1.25):
    """Gaussian blur (edge-replicated) followed by a clamped brightness gain."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if factor < 1:
        raise ValueError("factor must be >= 1")
    out = np.array(rgb(img), dtype=np.float64)
    if sigma > 0:
        out = ndimage.gaussian_filter(out, sigma=(sigma, sigma, 0), mode="nearest")
    return np.minimum(out * factor, 1.0)


def gradient_background(w, h, c1, c2, axis=VERTICAL):
    """Linear gradient from ``c1`` to ``c2`` (8-bit triples)."""
    c1 = np.asarray(c1, dtype=np.float64) / 255.0
    c2 = np.asarray(c2, dtype=np.float64) / 255.0
    n = h if _along(axis) == 0 else w
    t = np.arange(n) / max(n - 1, 1)
    ramp = c1 + (c2 - c1) * t[:, None]
    if _along(axis) == 0:
        return np.broadcast_to(ramp[:, None, :], (h, w, 3)).copy()
    return np.broadcast_to(ramp[None, :, :], (h, w, 3)).copy()


def composite(base, patch, mask, origin=(0, 0), *, report=None):
    """Paste ``patch`` onto ``base`` where ``mask`` is set.

    ``origin`` is the (x, y) of the patch's top-left corner in ``base``.
    Parts falling outside ``base`` are dropped; if ``report`` is a dict its
    ``"clipped"`` entry receives the number of masked pixels dropped.
    """
    out = np.array(base, dtype=np.float64)
    ph, pw = mask.shape
    x0, y0 = int(origin[0]), int(origin[1])
    bh, bw = out.shape[:2]
    bx0, by0 = max(x0, 0), max(y0, 0)
    bx1, by1 = min(x0 + pw, bw), min(y0 + ph, bh)
    total = int(mask.sum())
    placed = 0
    if bx1 > bx0 and by1 > by0:
        sub = mask[by0 - y0:by1 - y0, bx0 - x0:bx1 - x0]
        src = np.asarray(patch)[by0 - y0:by1 - y0, bx0 - x0:bx1 - x0]
        region = out[by0:by1, bx0:bx1]
        c = min(region.shape[-1], src.shape[-1])
        region[sub, :c] = src[sub, :c]
        if region.shape[-1] == 4 and src.shape[-1] == 3:
            region[sub, 3] = 1.0
        placed = int(sub.sum())
    if report is not None:
        report["clipped"] = total - placed
    return out


def elongate(obj, target, axis=VERTICAL):
    """Stretch the middle third of an object so its extent becomes ``target``.

    The object is first trimmed to its opaque extent. Head and tail thirds
    (``extent // 3`` pixels each) are copied unchanged; only the body is
    resampled, bilinearly, along ``axis``.
    """
    ax = _along(axis)
    if obj.shape[-1] == 4:
        obj = alpha_trim(obj)
    extent = obj.shape[ax]
    if extent < 3:
        raise DegenerateObject(f"object extent {extent}px is below 3px along {axis}")
    if target < extent:
        raise ValueError(f"target {target} is shorter than object extent {extent}")
    third = extent // 3
    head = np.take(obj, range(0, third), axis=ax)
    body = np.take(obj, range(third, extent - third), axis=ax)
    tail = np.take(obj, range(extent - third, extent), axis=ax)
    body_len = int(target) - 2 * third
    if body_len != body.shape[ax]:
        if ax == 0:
            body = resize(body, body.shape[1], body_len)
        else:
            body = resize(body, body_len, body.shape[0])
    return np.concatenate([head, body, tail], axis=ax)


def stack_duplicate(obj, target, axis=VERTICAL):
    """Repeat an object ``ceil(target / extent)`` times along ``axis``.

    Vertical stacks grow upward from the bottom; horizontal stacks grow to
    the right. The far end is cropped so the result is exactly ``target``.
    """
    if target <= 0:
        raise ValueError("target must be positive")
    ax = _along(axis)
    extent = obj.shape[ax]
    m = math.ceil(target / extent)
    stacked = np.concatenate([obj] * m, axis=ax)
    if ax == 0:
        return stacked[stacked.shape[0] - int(target):].copy()
    return stacked[:, :int(target)].copy()


def tile_fill(obj, region):
    """Tile ``obj`` row-major over the bbox of ``region``; RGBA, canvas-sized."""
    box = mask_bbox(region)
    if box is None:
        raise EmptyMask("tile region is empty")
    x, y, w, h = box
    oh, ow = obj.shape[:2]
    reps = (math.ceil(h / oh), math.ceil(w / ow))
    tiled = np.tile(obj, (reps[0], reps[1], 1))[:h, :w]
    out = np.zeros(region.shape + (4,))
    out[y:y + h, x:x + w, :3] = rgb(tiled)
    a = alpha(tiled) * region[y:y + h, x:x + w]
    out[y:y + h, x:x + w, 3] = a
    return out


def cutout(img, mask):
    """RGBA crop of ``img`` to the bbox of ``mask`` with alpha = mask."""
    if img.shape[:2] != mask.shape:
        raise DimensionError(f"image {img.shape[:2]} and mask {mask.shape} differ")
    box = mask_bbox(mask)
    if box is None:
        raise EmptyMask("cut-out mask is empty")
    x, y, w, h = box
    return with_alpha(img[y:y + h, x:x + w], mask[y:y + h, x:x + w].astype(np.float64))


def block_coverage(mask, factor):
    h, w = mask.shape
    if factor < 1 or h % factor or w % factor:
        raise DimensionError(f"mask {w}x{h} is not divisible by factor {factor}")
    return mask.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def downsample_mask(mask, factor):
    """Block-reduce a mask; a block is set when its coverage is >= 0.5."""
    return block_coverage(mask, factor) >= 0.5


def upsample_mask(mask, factor):
    return np.repeat(np.repeat(mask, factor, axis=0), factor, axis=1)
