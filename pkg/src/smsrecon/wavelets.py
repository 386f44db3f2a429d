"""Orthonormal 2-D Haar transform, periodic, packed quadrant layout.

Coefficients are stored in place of the image: after each level the
top-left quadrant holds the approximation and the remaining quadrants the
details, so a multi-level decomposition of an (H, W) array is again an
(H, W) array.  The transform is a product of rotations, hence exactly
orthonormal: norms are preserved and the inverse is the transpose.

Requires both trailing dimensions divisible by 2**levels.  Broadcasts over
leading axes and works for real or complex data.
"""

from __future__ import annotations

import numpy as np

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _check(shape: tuple[int, int], levels: int) -> None:
    h, w = shape
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(
            f"image shape {shape} not divisible by 2**{levels}; "
            "reduce the level count"
        )


def _analysis_step(block: np.ndarray) -> np.ndarray:
    a = (block[..., 0::2, :] + block[..., 1::2, :]) * _INV_SQRT2
    d = (block[..., 0::2, :] - block[..., 1::2, :]) * _INV_SQRT2
    block = np.concatenate([a, d], axis=-2)
    a = (block[..., :, 0::2] + block[..., :, 1::2]) * _INV_SQRT2
    d = (block[..., :, 0::2] - block[..., :, 1::2]) * _INV_SQRT2
    return np.concatenate([a, d], axis=-1)


def _synthesis_step(block: np.ndarray) -> np.ndarray:
    h, w = block.shape[-2:]
    a, d = block[..., :, : w // 2], block[..., :, w // 2 :]
    out = np.empty_like(block)
    out[..., :, 0::2] = (a + d) * _INV_SQRT2
    out[..., :, 1::2] = (a - d) * _INV_SQRT2
    a, d = out[..., : h // 2, :].copy(), out[..., h // 2 :, :].copy()
    out[..., 0::2, :] = (a + d) * _INV_SQRT2
    out[..., 1::2, :] = (a - d) * _INV_SQRT2
    return out


def dwt2(x: np.ndarray, levels: int = 3) -> np.ndarray:
    """Multi-level forward transform; same shape as the input."""
    _check(x.shape[-2:], levels)
    out = np.array(x, copy=True)
    h, w = x.shape[-2:]
    for _ in range(levels):
        out[..., :h, :w] = _analysis_step(out[..., :h, :w])
        h //= 2
        w //= 2
    return out


def idwt2(coeffs: np.ndarray, levels: int = 3) -> np.ndarray:
    """Exact inverse of dwt2."""
    _check(coeffs.shape[-2:], levels)
    out = np.array(coeffs, copy=True)
    hs = [coeffs.shape[-2] >> k for k in range(levels, 0, -1)]
    ws = [coeffs.shape[-1] >> k for k in range(levels, 0, -1)]
    for h, w in zip(hs, ws):
        out[..., : 2 * h, : 2 * w] = _synthesis_step(out[..., : 2 * h, : 2 * w])
    return out


def soft_threshold(x: np.ndarray, tau: float) -> np.ndarray:
    """Magnitude shrinkage; reduces to the usual signed rule for real x."""
    mag = np.abs(x)
    scale = np.maximum(mag - tau, 0.0) / np.where(mag > 0, mag, 1.0)
    return x * scale


def coarse_mask(shape: tuple[int, int], levels: int) -> np.ndarray:
    """Boolean mask selecting the coarsest approximation quadrant."""
    mask = np.zeros(shape, dtype=bool)
    mask[: shape[0] >> levels, : shape[1] >> levels] = True
    return mask
