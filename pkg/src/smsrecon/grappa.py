"""K-space interpolation: kernel calibration, central-band fill, full fill.

Kernels are fit by sliding-window least squares on a fully sampled,
reordered (extended-FOV) calibration region and applied to the decimated
measurement grid.  Combined slice/in-plane decimation is handled as two
separable passes: first the extended-readout axis, whose kernels use
orthogonal taps strided by the in-plane factor so that only acquired
columns are sourced, then the phase-encode axis with unit-stride taps.
Fitting uses interior windows only; application gathers periodically
(k-space is circular under the DFT).

The central-band fill synthesizes missing points inside an s x s block
around DC and leaves every measured point bit-identical; the full fill
interpolates the entire grid (classical extended-readout interpolation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .errors import CalibrationError


@dataclass
class KernelGeometry:
    """Tap layout of one separable interpolation pass.

    axis: 0 interpolates along extended readout, 1 along phase-encode.
    factor: decimation factor bridged by the kernel.
    n_src: acquired lines sourced along the decimated axis.
    n_orth: taps along the orthogonal axis, spaced by orth_stride.
    """

    axis: int
    factor: int
    n_src: int = 4
    n_orth: int = 5
    orth_stride: int = 1

    def __post_init__(self):
        if self.axis not in (0, 1):
            raise ValueError("axis must be 0 (rows) or 1 (cols)")
        if self.factor < 1 or self.n_src < 1 or self.n_orth < 1 or self.orth_stride < 1:
            raise ValueError("kernel geometry values must be positive")

    @property
    def src_offsets(self) -> np.ndarray:
        return (np.arange(self.n_src) - (self.n_src // 2 - 1)) * self.factor

    @property
    def orth_offsets(self) -> np.ndarray:
        return (np.arange(self.n_orth) - self.n_orth // 2) * self.orth_stride


@dataclass
class GrappaKernel:
    """Least-squares interpolation weights for one geometry.

    weights[m - 1, c_tgt] holds the flattened (C_src, n_src, n_orth) weight
    set predicting target coil c_tgt at offset m from the acquired lattice.
    A factor-1 kernel has no weights and applies as a pass-through.
    """

    geometry: KernelGeometry
    weights: np.ndarray  # (factor - 1, C, C * n_src * n_orth) complex
    tikhonov: float = 0.0
    residual: float = 0.0

    @property
    def num_coils(self) -> int:
        return self.weights.shape[1] if self.weights.size else 0

    @property
    def is_passthrough(self) -> bool:
        return self.geometry.factor == 1


def reorder_calibration(calib: np.ndarray, shifts) -> np.ndarray:
    """Extended-FOV calibration k-space from per-slice calibration k-space.

    calib is (C, MB, n, n) fully sampled single-band data; the slices are
    FOV-shifted and concatenated exactly like the image model, then
    transformed back to k-space on the extended grid.
    """
    imgs = ops.ifft2c(calib)
    ext_imgs = ops.reorder_r(imgs, shifts)
    return ops.fft2c(ext_imgs)


def _oriented(arr: np.ndarray, axis: int) -> np.ndarray:
    """View with the decimated axis second-to-last (rows)."""
    return arr if axis == 0 else arr.swapaxes(-2, -1)


def calibrate_kernel(
    calib: np.ndarray, geometry: KernelGeometry, tikhonov: float = 1e-4
) -> GrappaKernel:
    """Fit interpolation weights on fully sampled calibration k-space.

    calib is (C, N1, N2) on the extended grid.  Solves, per missing offset
    and target coil, a least-squares system over all interior sliding
    windows, optionally ridge-stabilized by tikhonov times the mean
    diagonal of the normal matrix.  Raises CalibrationError when the
    system is underdetermined or singular.
    """
    if calib.ndim != 3:
        raise ValueError("calibration must be (C, N1, N2)")
    if geometry.factor == 1:
        return GrappaKernel(geometry=geometry, weights=np.zeros((0, calib.shape[0], 0), complex))

    data = _oriented(calib, geometry.axis)
    c, na, nb = data.shape
    offs_a = geometry.src_offsets
    offs_b = geometry.orth_offsets
    f = geometry.factor

    # windows slide on the DC-anchored decimation lattice so the fit-time
    # geometry matches apply-time geometry exactly
    ba = np.arange(max(0, -offs_a.min()), na - max(offs_a.max(), f - 1))
    ba = ba[(ba - na // 2) % f == 0]
    bb = np.arange(max(0, -offs_b.min()), nb - offs_b.max())
    n_win = ba.size * bb.size
    n_unknown = c * geometry.n_src * geometry.n_orth
    if n_win < n_unknown:
        raise CalibrationError(
            f"underdetermined fit: {n_win} windows for {n_unknown} unknowns"
        )

    rows = ba[:, None] + offs_a[None, :]  # (n_ba, n_src)
    cols = bb[:, None] + offs_b[None, :]  # (n_bb, n_orth)
    block = data[:, rows[:, None, :, None], cols[None, :, None, :]]
    sources = block.transpose(1, 2, 0, 3, 4).reshape(n_win, n_unknown)

    targets = np.empty((n_win, c * (f - 1)), dtype=complex)
    for m in range(1, f):
        t = data[:, (ba + m)[:, None], bb[None, :]]  # (C, n_ba, n_bb)
        targets[:, (m - 1) * c : m * c] = t.transpose(1, 2, 0).reshape(n_win, c)

    tnorm = np.linalg.norm(targets)
    if tikhonov > 0:
        gram = sources.conj().T @ sources
        mean_diag = np.real(np.trace(gram)) / n_unknown
        if mean_diag <= 0:
            raise CalibrationError("singular normal matrix: calibration has no energy")
        gram[np.diag_indices_from(gram)] += tikhonov * mean_diag
        try:
            sol = np.linalg.solve(gram, sources.conj().T @ targets)
        except np.linalg.LinAlgError as exc:
            raise CalibrationError(f"singular normal matrix: {exc}") from exc
    else:
        sol, _, rank, _ = np.linalg.lstsq(sources, targets, rcond=None)
        if rank < n_unknown:
            raise CalibrationError(
                f"rank-deficient fit: rank {rank} < {n_unknown} unknowns"
            )

    resid = np.linalg.norm(sources @ sol - targets) / tnorm if tnorm > 0 else 0.0
    weights = np.stack(
        [sol[:, (m - 1) * c : m * c].T for m in range(1, f)], axis=0
    )  # (f-1, C_tgt, n_unknown)
    return GrappaKernel(
        geometry=geometry, weights=weights, tikhonov=tikhonov, residual=float(resid)
    )


def _apply_kernel(
    data: np.ndarray,
    kernel: GrappaKernel,
    fill_mask: np.ndarray,
    anchor_a: int,
    anchor_b: int,
) -> None:
    """Interpolate the points flagged in fill_mask in place (periodic gather).

    data is (C, N1, N2) on the extended grid; anchors give the acquired
    lattice reference on each axis.  Sources are read from the current
    array content, so multi-pass callers must order their passes.
    """
    if kernel.is_passthrough or not fill_mask.any():
        return
    geo = kernel.geometry
    view = _oriented(data, geo.axis)
    mask = fill_mask if geo.axis == 0 else fill_mask.T
    anchor = anchor_a if geo.axis == 0 else anchor_b
    _, na, nb = view.shape
    offs_a = geo.src_offsets
    offs_b = geo.orth_offsets

    aa, bb = np.nonzero(mask)
    m_all = (aa - anchor) % geo.factor
    if (m_all == 0).any():
        raise ValueError("fill mask flags points on the acquired lattice")
    filled = np.empty((kernel.num_coils, aa.size), dtype=complex)
    for m in range(1, geo.factor):
        sel = m_all == m
        if not sel.any():
            continue
        base = aa[sel] - m
        rows = (base[:, None] + offs_a[None, :]) % na  # (npts, n_src)
        cols = (bb[sel][:, None] + offs_b[None, :]) % nb  # (npts, n_orth)
        block = view[:, rows[:, :, None], cols[:, None, :]]  # (C, npts, n_src, n_orth)
        feats = block.transpose(1, 0, 2, 3).reshape(sel.sum(), -1)
        filled[:, sel] = (feats @ kernel.weights[m - 1].T).T
    view[:, aa, bb] = filled


def _central_band(n: int, s: int) -> slice:
    return slice(n // 2 - s // 2, n // 2 - s // 2 + s)


@dataclass
class LfeResult:
    """Central-band filled measurement plus the set of synthesized points."""

    measurement: ops.Measurement
    filled_mask: np.ndarray


def lfe_fill(
    meas: ops.Measurement,
    row_kernel: GrappaKernel | None,
    col_kernel: GrappaKernel | None,
    s: int,
) -> LfeResult:
    """Synthesize the missing points of the central s x s k-space block.

    Measured points are preserved bit-exactly and nothing outside the
    block changes; the returned pattern marks filled points as acquired.
    Pass order: extended-readout rows first (computed on a scratch margin
    so the column pass has its row taps), then phase-encode columns.
    """
    pat = meas.pattern
    nr, w = pat.mask.shape
    if s < 0 or s > min(nr, w):
        raise ValueError(f"band size {s} outside [0, {min(nr, w)}]")
    _check_kernels(pat, row_kernel, col_kernel)
    if s == 0:
        return LfeResult(
            measurement=ops.Measurement(meas.data.copy(), pat, meas.noise_sigma),
            filled_mask=np.zeros_like(pat.mask),
        )

    anchor_r = nr // 2 + pat.mb_offset
    anchor_c = w // 2 + pat.r_offset
    acq_cols = (np.arange(w) - anchor_c) % pat.r == 0
    on_rows = (np.arange(nr) - anchor_r) % pat.mb == 0

    rows_band = _central_band(nr, s)
    cols_band = _central_band(w, s)
    block = np.zeros_like(pat.mask)
    block[rows_band, cols_band] = True

    scratch = meas.data.astype(complex).copy()
    if pat.mb > 1:
        margin = col_kernel.geometry.n_orth // 2 if col_kernel is not None else 0
        lo = max(rows_band.start - margin, 0)
        hi = min(rows_band.stop + margin, nr)
        pass1 = np.zeros_like(pat.mask)
        pass1[lo:hi, :] = ~pat.mask[lo:hi, :] & acq_cols[None, :] & ~on_rows[lo:hi, None]
        _apply_kernel(scratch, row_kernel, pass1, anchor_r, anchor_c)
    if pat.r > 1:
        pass2 = block & ~pat.mask & ~acq_cols[None, :]
        _apply_kernel(scratch, col_kernel, pass2, anchor_r, anchor_c)

    fill = block & ~pat.mask
    out = meas.data.copy()
    out[:, fill] = scratch[:, fill]
    return LfeResult(
        measurement=ops.Measurement(out, pat.updated(fill), meas.noise_sigma),
        filled_mask=fill,
    )


def _check_kernels(
    pat: ops.SamplingPattern,
    row_kernel: GrappaKernel | None,
    col_kernel: GrappaKernel | None,
) -> None:
    if pat.mb > 1:
        if row_kernel is None or row_kernel.is_passthrough:
            raise ValueError("pattern decimates rows but no row kernel given")
        if row_kernel.geometry.factor != pat.mb:
            raise ValueError(
                f"row kernel factor {row_kernel.geometry.factor} != pattern MB {pat.mb}"
            )
    if pat.r > 1:
        if col_kernel is None or col_kernel.is_passthrough:
            raise ValueError("pattern decimates columns but no column kernel given")
        if col_kernel.geometry.factor != pat.r:
            raise ValueError(
                f"column kernel factor {col_kernel.geometry.factor} != pattern R {pat.r}"
            )


def grappa_full(
    meas: ops.Measurement,
    row_kernel: GrappaKernel | None,
    col_kernel: GrappaKernel | None,
) -> np.ndarray:
    """Interpolate every missing point; returns fully sampled (C, N1, N2)."""
    pat = meas.pattern
    nr, w = pat.mask.shape
    _check_kernels(pat, row_kernel, col_kernel)
    anchor_r = nr // 2 + pat.mb_offset
    anchor_c = w // 2 + pat.r_offset
    acq_cols = (np.arange(w) - anchor_c) % pat.r == 0
    on_rows = (np.arange(nr) - anchor_r) % pat.mb == 0

    data = meas.data.astype(complex).copy()
    if pat.mb > 1:
        pass1 = ~pat.mask & acq_cols[None, :] & ~on_rows[:, None]
        _apply_kernel(data, row_kernel, pass1, anchor_r, anchor_c)
    if pat.r > 1:
        pass2 = ~pat.mask & ~acq_cols[None, :]
        _apply_kernel(data, col_kernel, pass2, anchor_r, anchor_c)
    return data


def rograppa_reconstruct(
    meas: ops.Measurement,
    maps: np.ndarray,
    shifts,
    row_kernel: GrappaKernel | None,
    col_kernel: GrappaKernel | None,
) -> np.ndarray:
    """Classical baseline: full interpolation, then coil-combined slices."""
    full = grappa_full(meas, row_kernel, col_kernel)
    ext_maps = ops.extend_maps(maps, shifts)
    full_mask = np.ones(meas.pattern.mask.shape, dtype=bool)
    ext = ops.sense_adjoint(full, ext_maps, full_mask)
    return ops.reorder_r_adjoint(ext, shifts)


def calibrate_for_pattern(
    calib_ext: np.ndarray,
    pattern: ops.SamplingPattern,
    n_src: int = 4,
    n_orth: int = 5,
    tikhonov: float = 1e-4,
) -> tuple[GrappaKernel | None, GrappaKernel | None]:
    """Fit the row (extended-readout) and column (phase-encode) kernels a
    pattern needs; factor-1 axes yield None (nothing to interpolate)."""
    row_kernel = None
    col_kernel = None
    if pattern.mb > 1:
        row_kernel = calibrate_kernel(
            calib_ext,
            KernelGeometry(
                axis=0, factor=pattern.mb, n_src=n_src, n_orth=n_orth, orth_stride=pattern.r
            ),
            tikhonov=tikhonov,
        )
    if pattern.r > 1:
        col_kernel = calibrate_kernel(
            calib_ext,
            KernelGeometry(axis=1, factor=pattern.r, n_src=n_src, n_orth=n_orth),
            tikhonov=tikhonov,
        )
    return row_kernel, col_kernel
