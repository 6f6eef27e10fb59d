"""Image and event-tensor corruptions at severities 1 (weakest) to 5 (strongest).

Static corruptions act on ``(C, H, W)`` images in ``[0, 1]`` before coding;
event corruptions act on sliced ``(T, C, H, W)`` spike tensors.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

from .core import Rng, check_image, check_spikes
from .texture import value_noise

# Severity tables, index 0 = severity 1.
GAUSSIAN_SIGMA = (0.08, 0.12, 0.18, 0.26, 0.38)
SALT_PEPPER_FRACTION = (0.03, 0.06, 0.09, 0.17, 0.27)
JPEG_QUALITY = (25, 18, 15, 10, 7)
DEFOCUS_RADIUS = (3, 4, 6, 8, 10)
FROST_BLEND = ((1, 0.4), (0.8, 0.6), (0.7, 0.7), (0.65, 0.7), (0.6, 0.75))
HOT_PIXEL_FRACTION = (0.03, 0.06, 0.09, 0.17, 0.27)
BACKGROUND_RATE = (0.08, 0.12, 0.18, 0.26, 0.38)

SEVERITY_TABLE = {
    "gaussian_noise": GAUSSIAN_SIGMA,
    "salt_pepper": SALT_PEPPER_FRACTION,
    "jpeg": JPEG_QUALITY,
    "defocus": DEFOCUS_RADIUS,
    "frost": FROST_BLEND,
    "hot_pixels": HOT_PIXEL_FRACTION,
    "background_activity": BACKGROUND_RATE,
}
STATIC_CORRUPTIONS = ("gaussian_noise", "salt_pepper", "jpeg", "defocus", "frost")
EVENT_CORRUPTIONS = ("hot_pixels", "background_activity")

# Standard JPEG luminance quantization table (ITU-T T.81, Annex K).
JPEG_LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


def severity_param(name: str, severity: int):
    if name not in SEVERITY_TABLE:
        raise ValueError(f"unknown corruption {name!r}")
    if severity not in (1, 2, 3, 4, 5):
        raise ValueError(f"severity must be an integer in 1..5, got {severity!r}")
    return SEVERITY_TABLE[name][severity - 1]


def _count(fraction: float, n: int) -> int:
    return int(np.floor(fraction * n + 0.5))


# ---------------------------------------------------------------------------
# Static images
# ---------------------------------------------------------------------------


def corrupt_gaussian(img, severity: int, rng: Rng) -> np.ndarray:
    img = check_image(img)
    sigma = severity_param("gaussian_noise", severity)
    return np.clip(img + rng.gen.normal(0.0, sigma, img.shape), 0.0, 1.0)


def salt_pepper(img, fraction: float, rng: Rng) -> np.ndarray:
    """Set exactly ``floor(fraction * H * W + 0.5)`` pixels (all channels) to 0 or 1 by a fair coin."""
    img = check_image(img)
    out = img.copy()
    _, h, w = img.shape
    n = _count(fraction, h * w)
    if n == 0:
        return out
    idx = rng.gen.choice(h * w, size=n, replace=False)
    values = rng.gen.integers(0, 2, size=n).astype(np.float64)
    out[:, idx // w, idx % w] = values
    return out


def corrupt_salt_pepper(img, severity: int, rng: Rng) -> np.ndarray:
    return salt_pepper(img, severity_param("salt_pepper", severity), rng)


def jpeg_quant_table(quality: int) -> np.ndarray:
    """IJG quality scaling of the luminance table."""
    if not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must be in 1..100, got {quality}")
    scale = 5000 / quality if quality < 50 else 200 - 2 * quality
    return np.clip(np.floor((JPEG_LUMA_TABLE * scale + 50) / 100), 1, 255)


def jpeg_roundtrip(img, quality: int) -> np.ndarray:
    """Luma-only JPEG: 8x8 DCT, quantize, dequantize, inverse DCT, back to 8 bits.

    Image sides are edge-padded to multiples of 8 and cropped afterwards.
    """
    img = check_image(img)
    q = jpeg_quant_table(quality)
    c, h, w = img.shape
    ph, pw = -h % 8, -w % 8
    x = np.pad(np.rint(img * 255.0), ((0, 0), (0, ph), (0, pw)), mode="edge") - 128.0
    H, W = x.shape[1:]
    blocks = x.reshape(c, H // 8, 8, W // 8, 8)
    coef = dctn(blocks, axes=(2, 4), norm="ortho")
    qshape = (1, 1, 8, 1, 8)
    coef = np.rint(coef / q.reshape(qshape)) * q.reshape(qshape)
    rec = idctn(coef, axes=(2, 4), norm="ortho").reshape(c, H, W) + 128.0
    rec = np.clip(np.rint(rec), 0, 255)[:, :h, :w]
    return rec / 255.0


def corrupt_jpeg(img, severity: int, rng: Rng | None = None) -> np.ndarray:
    return jpeg_roundtrip(img, severity_param("jpeg", severity))


def disk_kernel(radius: float) -> np.ndarray:
    """Aliased disk: a cell is inside if its centre lies within ``radius``; sums to 1."""
    r = int(np.ceil(radius))
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    k = (yy ** 2 + xx ** 2 <= radius ** 2).astype(np.float64)
    return k / k.sum()


def defocus(img, radius: float) -> np.ndarray:
    img = check_image(img)
    k = disk_kernel(radius)
    out = np.stack([ndimage.convolve(ch, k, mode="nearest") for ch in img])
    return np.clip(out, 0.0, 1.0)


def corrupt_defocus(img, severity: int, rng: Rng | None = None) -> np.ndarray:
    return defocus(img, severity_param("defocus", severity))


def frost_texture(rng: Rng, shape: tuple[int, int]) -> np.ndarray:
    """Procedural ice-crystal overlay in ``[0, 1]``.

    Ridged value noise gives a web of bright veins; a few randomly oriented
    streaks smeared along their direction give needle-like crystals.
    """
    h, w = shape
    n = value_noise(rng, shape, octaves=4, base_cells=max(2, min(h, w) // 8))
    ridge = 1.0 - np.abs(2.0 * n - 1.0)
    veins = np.clip((ridge - 0.55) / 0.45, 0.0, 1.0)
    streaks = np.zeros(shape)
    n_streaks = max(3, (h * w) // 128)
    g = rng.gen
    for _ in range(n_streaks):
        y0, x0 = g.uniform(0, h), g.uniform(0, w)
        angle = g.uniform(0, np.pi)
        length = g.uniform(0.1, 0.35) * max(h, w)
        t = np.linspace(0, length, int(4 * length) + 2)
        ys = np.clip(np.rint(y0 + t * np.sin(angle)), 0, h - 1).astype(int)
        xs = np.clip(np.rint(x0 + t * np.cos(angle)), 0, w - 1).astype(int)
        streaks[ys, xs] = np.maximum(streaks[ys, xs], g.uniform(0.6, 1.0))
    streaks = ndimage.gaussian_filter(streaks, 0.6)
    streaks /= max(streaks.max(), 1e-12)
    frost = np.clip(0.6 * veins + 0.4 * n + 0.6 * streaks, 0.0, None)
    return frost / max(frost.max(), 1e-12)


def frost(img, rho: float, omega: float, rng: Rng) -> np.ndarray:
    img = check_image(img)
    overlay = frost_texture(rng, img.shape[1:])
    return np.clip(rho * img + omega * overlay[None], 0.0, 1.0)


def corrupt_frost(img, severity: int, rng: Rng) -> np.ndarray:
    rho, omega = severity_param("frost", severity)
    return frost(img, rho, omega, rng)


# ---------------------------------------------------------------------------
# Event tensors
# ---------------------------------------------------------------------------


def hot_pixels(x, fraction: float, rng: Rng) -> np.ndarray:
    """Pin ``round(fraction * H * W)`` random pixels to 1 at every step and in every channel."""
    x = check_spikes(x)
    out = x.copy()
    _, _, h, w = x.shape
    n = _count(fraction, h * w)
    if n:
        idx = rng.gen.choice(h * w, size=n, replace=False)
        out[:, :, idx // w, idx % w] = 1
    return out


def corrupt_hot_pixels(x, severity: int, rng: Rng) -> np.ndarray:
    return hot_pixels(x, severity_param("hot_pixels", severity), rng)


def background_activity(x, lam: float, rng: Rng) -> np.ndarray:
    """OR in time-independent Poisson noise: an element fires if its Poisson(lam) draw is >= 1."""
    x = check_spikes(x)
    noise = rng.gen.poisson(lam, size=x.shape) >= 1
    return (x.astype(bool) | noise).astype(np.uint8)


def corrupt_background_activity(x, severity: int, rng: Rng) -> np.ndarray:
    return background_activity(x, severity_param("background_activity", severity), rng)


_APPLY = {
    "gaussian_noise": corrupt_gaussian,
    "salt_pepper": corrupt_salt_pepper,
    "jpeg": corrupt_jpeg,
    "defocus": corrupt_defocus,
    "frost": corrupt_frost,
    "hot_pixels": corrupt_hot_pixels,
    "background_activity": corrupt_background_activity,
}


def modality(name: str) -> str:
    if name in STATIC_CORRUPTIONS:
        return "static"
    if name in EVENT_CORRUPTIONS:
        return "event"
    raise ValueError(f"unknown corruption {name!r}")


def apply(name: str, x, severity: int, rng: Rng) -> np.ndarray:
    """Apply corruption ``name`` at ``severity`` to an image or spike tensor."""
    severity_param(name, severity)
    return _APPLY[name](x, severity, rng)
