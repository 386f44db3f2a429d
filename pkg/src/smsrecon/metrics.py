"""Reconstruction quality measures: PSNR, SSIM, and temporal SNR.

All measures operate on magnitude content: complex inputs are reduced to
their modulus, real inputs are used as given (so signed test patterns
behave as expected).  Stack-level evaluation normalizes each reference
slice to unit peak and scales the test slice identically, which leaves
both measures invariant to global scaling and phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PSNR_CAP_DB = 99.0
TSNR_CAP = 1e6


def _as_real(x: np.ndarray) -> np.ndarray:
    return np.abs(x) if np.iscomplexobj(x) else np.asarray(x, dtype=float)


def psnr(ref: np.ndarray, test: np.ndarray) -> tuple[float, bool]:
    """10 log10(peak^2 / MSE) with peak = max |ref|.

    Returns (value_db, identical_flag); identical inputs report the
    99 dB cap with the flag set.
    """
    ref, test = _as_real(ref), _as_real(test)
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    peak = ref.max()
    if peak <= 0:
        raise ValueError("reference peak must be positive")
    mse = np.mean((ref - test) ** 2)
    if mse == 0:
        return PSNR_CAP_DB, True
    return min(float(10.0 * np.log10(peak**2 / mse)), PSNR_CAP_DB), False


def _gaussian_window(size: int = 7, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    g = np.exp(-0.5 * (np.arange(size) - half) ** 2 / sigma**2)
    win = np.outer(g, g)
    return win / win.sum()


def _local_means(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Valid-mode windowed means via sliding windows."""
    view = np.lib.stride_tricks.sliding_window_view(x, win.shape)
    return np.tensordot(view, win, axes=([-2, -1], [0, 1]))


def ssim(ref: np.ndarray, test: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local structural similarity, 7x7 Gaussian window (sigma 1.5),
    dynamic range set by the reference peak, valid-window average."""
    ref, test = _as_real(ref), _as_real(test)
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    win = _gaussian_window()
    if min(ref.shape) < win.shape[0]:
        raise ValueError("image smaller than the similarity window")
    dyn = ref.max()
    c1, c2 = (k1 * dyn) ** 2, (k2 * dyn) ** 2
    mu_x = _local_means(ref, win)
    mu_y = _local_means(test, win)
    xx = _local_means(ref * ref, win) - mu_x**2
    yy = _local_means(test * test, win) - mu_y**2
    xy = _local_means(ref * test, win) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def tsnr(frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-voxel temporal mean over temporal sample standard deviation.

    frames is (time, H, W) magnitude.  Voxels with zero deviation are
    capped at 1e6 (or defined as 0 when the mean is also zero); returns
    (map, flag_mask) where the mask marks capped/degenerate voxels.
    """
    frames = _as_real(frames)
    if frames.ndim != 3 or frames.shape[0] < 2:
        raise ValueError("need a (time, H, W) series with at least 2 frames")
    mean = frames.mean(axis=0)
    std = frames.std(axis=0, ddof=1)
    flags = std == 0
    out = np.empty_like(mean)
    ok = ~flags
    out[ok] = mean[ok] / std[ok]
    out[flags] = np.where(mean[flags] == 0, 0.0, TSNR_CAP)
    return out, flags


@dataclass
class MetricReport:
    """Per-slice scores plus aggregates, serializable for run reports."""

    psnr_db: list[float] = field(default_factory=list)
    ssim_score: list[float] = field(default_factory=list)
    identical: list[bool] = field(default_factory=list)
    tsnr_map: np.ndarray | None = None  # attached when a time series was given

    @property
    def psnr_mean(self) -> float:
        return float(np.mean(self.psnr_db))

    @property
    def ssim_mean(self) -> float:
        return float(np.mean(self.ssim_score))

    def to_dict(self) -> dict:
        out = {
            "psnr_db": self.psnr_db,
            "ssim": self.ssim_score,
            "identical": self.identical,
            "psnr_mean": self.psnr_mean,
            "psnr_std": float(np.std(self.psnr_db)),
            "ssim_mean": self.ssim_mean,
            "ssim_std": float(np.std(self.ssim_score)),
        }
        if self.tsnr_map is not None:
            out["tsnr_mean"] = float(np.mean(self.tsnr_map))
            out["tsnr_median"] = float(np.median(self.tsnr_map))
        return out


def evaluate_stacks(ref: np.ndarray, test: np.ndarray) -> MetricReport:
    """Slice-wise magnitude comparison with per-slice peak normalization."""
    if ref.ndim == 2:
        ref = ref[None]
    if test.ndim == 2:
        test = test[None]
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    report = MetricReport()
    for r_slice, t_slice in zip(ref, test):
        rmag, tmag = np.abs(r_slice), np.abs(t_slice)
        peak = rmag.max()
        if peak > 0:
            rmag, tmag = rmag / peak, tmag / peak
        value, same = psnr(rmag, tmag)
        report.psnr_db.append(value)
        report.identical.append(same)
        report.ssim_score.append(ssim(rmag, tmag))
    return report


def error_map(ref: np.ndarray, test: np.ndarray) -> np.ndarray:
    """8-bit magnitude-error image (shared per-stack scale) for figures."""
    err = np.abs(_as_real(ref) - _as_real(test))
    top = err.max()
    if top == 0:
        return np.zeros(err.shape, dtype=np.uint8)
    return np.round(255.0 * err / top).astype(np.uint8)
