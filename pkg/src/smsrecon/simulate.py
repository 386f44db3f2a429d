"""Synthetic ground truth and the physical multiband acquisition path.

The simulator builds complex ellipse phantoms with smooth phase, smooth
normalized coil maps, and collapses the coil-weighted slices the way the
scanner does: per-slice FFT, per-slice FOV-shift phase cycling along
phase-encode, slice summation, then in-plane decimation.  The collapsed
rows are embedded on the extended-readout k-space grid used by the
operator model, so the two paths agree to numerical precision on
noiseless data.

All randomness flows through an explicit seed; identical seeds give
bitwise-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops


@dataclass
class Ellipse:
    center: tuple[float, float]  # (y, x) in [-1, 1] normalized coords
    axes: tuple[float, float]  # (ay, ax) semi-axes, same units
    angle: float = 0.0  # degrees, counter-clockwise
    amplitude: complex = 1.0


@dataclass
class PhantomSpec:
    h: int
    w: int
    ellipses: list[Ellipse] | None = None  # None -> seeded random set
    phase_coeffs: list[float] | None = None  # [1, x, y, x^2, xy, y^2] basis
    seed: int = 0

    def __post_init__(self):
        if self.h < 16 or self.w < 16:
            raise ValueError("matrix size must be at least 16x16")


@dataclass
class AcquisitionSpec:
    mb: int = 1
    r: int = 1
    caipi: np.ndarray | None = None  # shift fractions, None -> s/MB
    acs_width: int = 0
    noise_sigma: float = 0.0
    calib_size: int = 64
    calib_gamma: float = 1.0  # contrast perturbation exponent for calibration
    r_offset: int = 0

    def __post_init__(self):
        if self.mb < 1 or self.r < 1:
            raise ValueError("MB and R must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")

    def shifts(self, w: int) -> np.ndarray:
        """Resolved shift fractions at phase-encode size w (whole pixels)."""
        if self.caipi is None:
            return ops.integer_pixel_caipi(self.mb, w)
        return ops.validate_caipi(self.caipi, self.mb)


def _grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    yy = (np.arange(h) - h // 2) / (h / 2)
    xx = (np.arange(w) - w // 2) / (w / 2)
    return np.meshgrid(yy, xx, indexing="ij")


def _random_ellipses(rng: np.random.Generator) -> list[Ellipse]:
    """A head-phantom-like random ellipse set: one big support ellipse plus
    a handful of interior structures with mixed-sign contrast."""
    els = [
        Ellipse(
            center=(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)),
            axes=(rng.uniform(0.75, 0.9), rng.uniform(0.6, 0.8)),
            angle=rng.uniform(-10, 10),
            amplitude=1.0,
        )
    ]
    for _ in range(int(rng.integers(5, 10))):
        els.append(
            Ellipse(
                center=(rng.uniform(-0.5, 0.5), rng.uniform(-0.45, 0.45)),
                axes=(rng.uniform(0.05, 0.35), rng.uniform(0.05, 0.3)),
                angle=rng.uniform(0, 180),
                amplitude=complex(rng.uniform(-0.6, 0.8)),
            )
        )
    return els


def make_phantom(spec: PhantomSpec) -> np.ndarray:
    """Rasterize the ellipse set and apply a smooth polynomial phase.

    Deterministic given the spec seed: a None ellipse list draws a random
    set from the seed, a None phase draws random low-order coefficients.
    """
    rng = np.random.default_rng(spec.seed)
    ellipses = spec.ellipses if spec.ellipses is not None else _random_ellipses(rng)
    yy, xx = _grid(spec.h, spec.w)
    img = np.zeros((spec.h, spec.w), dtype=np.complex128)
    for el in ellipses:
        ay, ax = el.axes
        if ay <= 0 or ax <= 0:
            raise ValueError(f"degenerate ellipse with axes {el.axes}")
        th = np.deg2rad(el.angle)
        yr = (yy - el.center[0]) * np.cos(th) - (xx - el.center[1]) * np.sin(th)
        xr = (yy - el.center[0]) * np.sin(th) + (xx - el.center[1]) * np.cos(th)
        inside = (yr / ay) ** 2 + (xr / ax) ** 2 <= 1.0
        img += el.amplitude * inside
    coeffs = spec.phase_coeffs
    if coeffs is None:
        coeffs = rng.uniform(-1.2, 1.2, size=6)
    basis = [np.ones_like(yy), xx, yy, xx**2, xx * yy, yy**2]
    phase = sum(c * b for c, b in zip(coeffs, basis))
    return img * np.exp(1j * phase)


def make_coil_maps(c: int, mb: int, h: int, w: int, seed: int = 0) -> np.ndarray:
    """Smooth complex coil maps, normalized to unit sum-of-squares per pixel.

    Gaussian lobes sit on the FOV perimeter with small seeded jitter per
    coil and slice; each coil carries a gentle linear phase.
    """
    if c < 1:
        raise ValueError("need at least one coil")
    rng = np.random.default_rng(seed)
    yy, xx = _grid(h, w)
    maps = np.empty((c, mb, h, w), dtype=np.complex128)
    for ci in range(c):
        for s in range(mb):
            theta = 2 * np.pi * ci / c + rng.uniform(-0.15, 0.15)
            rad = rng.uniform(1.1, 1.3)
            cy, cx = rad * np.sin(theta), rad * np.cos(theta)
            width = rng.uniform(0.8, 1.1)
            mag = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2)))
            ph = rng.uniform(-np.pi, np.pi) + rng.uniform(-0.5, 0.5) * xx + rng.uniform(-0.5, 0.5) * yy
            maps[ci, s] = mag * np.exp(1j * ph)
    norm = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0, keepdims=True))
    return maps / norm


def collapsed_row_map(mb: int, h: int) -> np.ndarray:
    """Extended-grid row index for each collapsed (per-slice) k-space row.

    Slice summation equals decimation of the extended readout: unshifted
    per-slice frequency q lands at unshifted extended frequency MB*q.  Both
    grids here are centered, hence the index arithmetic.
    """
    nr = mb * h
    q_c = np.arange(h)
    q = (q_c - h // 2) % h
    return (mb * q + nr // 2) % nr


def _embedding_phase(mb: int, h: int) -> np.ndarray:
    """Phase aligning per-slice-centered spectra with the extended-centered
    convention ((-1)^((MB-1) q) row parity for even H)."""
    q = (np.arange(h) - h // 2) % h
    return np.exp(2j * np.pi * q * ((mb * h) // 2 - h // 2) / h)


def simulate_sms(
    stack: np.ndarray,
    maps: np.ndarray,
    acq: AcquisitionSpec,
    seed: int = 0,
) -> ops.Measurement:
    """Collapse the slice stack along the physical acquisition path.

    Noiseless output matches the operator model's forward of the same
    stack to numerical precision; complex Gaussian noise of variance
    sigma^2 per sample is added at acquired points only.
    """
    c, mb, h, w = maps.shape
    if stack.shape != (mb, h, w):
        raise ValueError(f"stack {stack.shape} does not match maps {maps.shape}")
    if acq.mb != mb:
        raise ValueError(f"acquisition MB {acq.mb} != maps MB {mb}")
    shifts = acq.shifts(w)
    pixels = shifts * w
    if np.any(np.abs(pixels - np.round(pixels)) > 1e-9):
        raise ValueError(
            "caipi shifts must land on whole pixels at this matrix size for "
            "physical simulation; snap them (see integer_pixel_caipi)"
        )

    coil_imgs = maps * stack[None, :, :, :]
    spectra = ops.fft2c(coil_imgs)  # (C, MB, H, W), per-slice centered
    cols = np.arange(w) - w // 2
    phases = np.exp(-2j * np.pi * np.outer(shifts, cols))  # (MB, W)
    collapsed = np.einsum("csij,sj->cij", spectra, phases) / np.sqrt(mb)

    pattern = ops.make_pattern(
        mb, acq.r, (mb * h, w), r_offset=acq.r_offset, acs_width=acq.acs_width
    )
    y = np.zeros((c, mb * h, w), dtype=np.complex128)
    y[:, collapsed_row_map(mb, h), :] = collapsed * _embedding_phase(mb, h)[None, :, None]

    if acq.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((c, mb * h, w)) + 1j * rng.standard_normal((c, mb * h, w))
        y = y + acq.noise_sigma / np.sqrt(2.0) * noise
    return ops.Measurement(data=y, pattern=pattern, noise_sigma=acq.noise_sigma)


def simulate_calibration(
    stack: np.ndarray, maps: np.ndarray, size: int, gamma: float = 1.0
) -> np.ndarray:
    """Fully sampled central size x size k-space per slice and coil.

    Single-band (no slice collapse), the separate low-resolution scan used
    to fit interpolation kernels.  `gamma` optionally warps the magnitude
    (|x|**gamma) to emulate a calibration contrast different from the
    target scan.
    """
    c, mb, h, w = maps.shape
    if size > min(h, w):
        raise ValueError(f"calibration size {size} exceeds matrix {min(h, w)}")
    src = stack
    if gamma != 1.0:
        mag = np.abs(stack)
        src = np.where(mag > 0, mag**gamma * stack / np.where(mag > 0, mag, 1.0), 0.0)
    spectra = ops.fft2c(maps * src[None, :, :, :])
    r0, c0 = h // 2 - size // 2, w // 2 - size // 2
    return spectra[:, :, r0 : r0 + size, c0 : c0 + size].copy()
