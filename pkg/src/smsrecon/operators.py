"""Linear measurement model for multiband acquisitions.

The MB simultaneously excited slices are treated as one extended-FOV image,
concatenated along readout after their per-slice FOV shifts, so slice
collapse becomes uniform undersampling of the extended readout axis.  The
encoding factors as ``mask * FFT2 * coil_maps`` applied to that extended
image; the reorder (shift + concatenate) is unitary, which makes the adjoint
of the whole chain exact.

Array conventions used throughout the package:

* slice stacks are ``(MB, H, W)`` complex, readout first, phase-encode last;
* extended images are ``(MB*H, W)``;
* coil maps are ``(C, MB, H, W)``, extended per coil to ``(C, MB*H, W)``;
* k-space is centered (DC at index ``N // 2``) and FFTs are unitary both
  directions, so norm is preserved and adjoint == inverse for full sampling.

Decimation masks are anchored at the DC index on both axes: a point is
acquired when its centered index differs from ``N // 2`` by a multiple of
the decimation factor (plus a configurable offset).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# centered, unitary FFTs


def fft2c(x: np.ndarray) -> np.ndarray:
    """Centered unitary 2-D FFT over the last two axes."""
    x = np.fft.ifftshift(x, axes=(-2, -1))
    x = np.fft.fft2(x, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(x, axes=(-2, -1))


def ifft2c(x: np.ndarray) -> np.ndarray:
    """Centered unitary 2-D inverse FFT over the last two axes."""
    x = np.fft.ifftshift(x, axes=(-2, -1))
    x = np.fft.ifft2(x, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(x, axes=(-2, -1))


# ---------------------------------------------------------------------------
# FOV shifts and readout concatenation


def default_caipi(mb: int) -> np.ndarray:
    """Standard interleaved shift fractions s/MB for slice s."""
    return np.arange(mb) / mb


def integer_pixel_caipi(mb: int, w: int) -> np.ndarray:
    """Interleaved shifts snapped to whole pixels at phase-encode size w.

    Equals s/MB exactly whenever MB divides w.  Whole-pixel shifts keep the
    shift of a coil-weighted slice identical to the product of the shifted
    map and the shifted slice, which the extended-FOV factorization needs.
    """
    return np.round(w * np.arange(mb) / mb) / w


def validate_caipi(shifts, mb: int) -> np.ndarray:
    shifts = np.asarray(shifts, dtype=float)
    if shifts.ndim != 1 or shifts.size != mb:
        raise ValueError(f"caipi scheme length {shifts.size} != MB {mb}")
    if shifts[0] != 0.0:
        raise ValueError("first caipi shift fraction must be 0")
    if np.any((shifts < 0) | (shifts >= 1)):
        raise ValueError("caipi shift fractions must lie in [0, 1)")
    return shifts


def caipi_apply(stack: np.ndarray, shifts, inverse: bool = False) -> np.ndarray:
    """Circularly shift slice s by shifts[s]*W pixels along phase-encode.

    Implemented as a linear phase ramp on the slice's k-space, so fractional
    shifts are well defined and the inverse (conjugate ramp) is exact.
    Broadcasts over leading axes; the slice axis is -3.
    """
    mb = stack.shape[-3]
    shifts = validate_caipi(shifts, mb)
    w = stack.shape[-1]
    out = np.array(stack, dtype=np.complex128, copy=True)
    freqs = np.fft.fftfreq(w)
    for s in range(mb):
        delta = shifts[s] * w
        if delta == 0.0:
            continue
        phase = np.exp(-2j * np.pi * freqs * delta)
        if inverse:
            phase = np.conj(phase)
        spec = np.fft.fft(out[..., s, :, :], axis=-1)
        out[..., s, :, :] = np.fft.ifft(spec * phase, axis=-1)
    return out


def roc_concat(stack: np.ndarray) -> np.ndarray:
    """Concatenate slices along readout: (..., MB, H, W) -> (..., MB*H, W)."""
    mb, h, w = stack.shape[-3:]
    return np.ascontiguousarray(stack).reshape(stack.shape[:-3] + (mb * h, w))


def roc_split(ext: np.ndarray, mb: int) -> np.ndarray:
    """Exact inverse of roc_concat: (..., MB*H, W) -> (..., MB, H, W)."""
    nr, w = ext.shape[-2:]
    if nr % mb != 0:
        raise ValueError(f"extended readout length {nr} not divisible by MB {mb}")
    return np.ascontiguousarray(ext).reshape(ext.shape[:-2] + (mb, nr // mb, w))


def reorder_r(stack: np.ndarray, shifts) -> np.ndarray:
    """The unitary reorder: FOV shift then readout concatenation."""
    return roc_concat(caipi_apply(stack, shifts))


def reorder_r_adjoint(ext: np.ndarray, shifts) -> np.ndarray:
    """Adjoint (== inverse) of reorder_r: split then undo the shifts."""
    return caipi_apply(roc_split(ext, len(shifts)), shifts, inverse=True)


def extend_maps(maps: np.ndarray, shifts) -> np.ndarray:
    """Extended-FOV coil maps: the reorder applied to each coil's slice maps.

    The shift is applied to the maps because coil weighting physically
    happens on the unshifted anatomy; shifting image and maps together
    keeps the extended product equal to the shifted coil-weighted slice.
    """
    return reorder_r(maps, shifts)


# ---------------------------------------------------------------------------
# sampling patterns and measurements


@dataclass
class SamplingPattern:
    """Boolean k-space mask over the extended grid plus its generator params."""

    mask: np.ndarray  # (MB*H, W) bool
    mb: int = 1
    r: int = 1
    mb_offset: int = 0
    r_offset: int = 0
    acs_width: int = 0

    @property
    def true_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def updated(self, extra_mask: np.ndarray) -> "SamplingPattern":
        """Pattern with additional points marked acquired (LFE fill)."""
        return SamplingPattern(
            mask=self.mask | extra_mask,
            mb=self.mb,
            r=self.r,
            mb_offset=self.mb_offset,
            r_offset=self.r_offset,
            acs_width=self.acs_width,
        )


def make_pattern(
    mb: int,
    r: int,
    ext_shape: tuple[int, int],
    mb_offset: int = 0,
    r_offset: int = 0,
    acs_width: int = 0,
) -> SamplingPattern:
    """DC-anchored decimation mask: factor `mb` along the extended readout,
    factor `r` along phase-encode.  A nonzero ACS width keeps a central band
    of fully sampled phase-encode columns on the decimated rows (the only
    autocalibration region a collapsed acquisition can physically provide).
    """
    if mb < 1 or r < 1:
        raise ValueError("decimation factors must be >= 1")
    nr, w = ext_shape
    rows = (np.arange(nr) - nr // 2) % mb == mb_offset % mb
    cols = (np.arange(w) - w // 2) % r == r_offset % r
    if acs_width > 0:
        c0 = max(w // 2 - acs_width // 2, 0)
        cols = cols.copy()
        cols[c0 : c0 + acs_width] = True
    mask = rows[:, None] & cols[None, :]
    return SamplingPattern(
        mask=mask, mb=mb, r=r, mb_offset=mb_offset, r_offset=r_offset, acs_width=acs_width
    )


@dataclass
class Measurement:
    """Collapsed multi-coil k-space on the extended grid, zero where unsampled."""

    data: np.ndarray  # (C, MB*H, W) complex
    pattern: SamplingPattern
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.data.shape[-2:] != self.pattern.mask.shape:
            raise ValueError(
                f"measurement shape {self.data.shape} does not match "
                f"pattern {self.pattern.mask.shape}"
            )
        self.data = np.where(self.pattern.mask, self.data, 0.0)


# ---------------------------------------------------------------------------
# SENSE encoding on the extended image


def sense_forward(ext: np.ndarray, ext_maps: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per coil: mask * FFT2c(map * ext). Returns (C, MB*H, W)."""
    if ext.shape != ext_maps.shape[-2:]:
        raise ValueError(f"maps {ext_maps.shape} do not match image {ext.shape}")
    return fft2c(ext_maps * ext) * mask


def sense_adjoint(y: np.ndarray, ext_maps: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Adjoint of sense_forward: sum_c conj(map) * IFFT2c(mask * y)."""
    if y.shape != ext_maps.shape:
        raise ValueError(f"k-space {y.shape} does not match maps {ext_maps.shape}")
    return np.sum(np.conj(ext_maps) * ifft2c(y * mask), axis=0)


class SmsModel:
    """The full encoding A·R for one acquisition geometry.

    Bundles coil maps, FOV-shift scheme and sampling pattern, and exposes
    forward/adjoint both from slice stacks and from extended images.
    """

    def __init__(self, maps: np.ndarray, shifts, pattern: SamplingPattern):
        if maps.ndim != 4:
            raise ValueError("coil maps must be (C, MB, H, W)")
        c, mb, h, w = maps.shape
        self.maps = maps
        self.shifts = validate_caipi(shifts, mb)
        if pattern.mask.shape != (mb * h, w):
            raise ValueError(
                f"pattern {pattern.mask.shape} does not match extended grid {(mb * h, w)}"
            )
        self.pattern = pattern
        self.ext_maps = extend_maps(maps, self.shifts)

    @property
    def mb(self) -> int:
        return self.maps.shape[1]

    @property
    def num_coils(self) -> int:
        return self.maps.shape[0]

    @property
    def stack_shape(self) -> tuple[int, int, int]:
        return self.maps.shape[1:]

    @property
    def ext_shape(self) -> tuple[int, int]:
        return self.pattern.mask.shape

    def forward_ext(self, ext: np.ndarray) -> np.ndarray:
        return sense_forward(ext, self.ext_maps, self.pattern.mask)

    def adjoint_ext(self, y: np.ndarray) -> np.ndarray:
        return sense_adjoint(y, self.ext_maps, self.pattern.mask)

    def forward(self, stack: np.ndarray) -> np.ndarray:
        return self.forward_ext(reorder_r(stack, self.shifts))

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return reorder_r_adjoint(self.adjoint_ext(y), self.shifts)

    def with_pattern(self, pattern: SamplingPattern) -> "SmsModel":
        return SmsModel(self.maps, self.shifts, pattern)
