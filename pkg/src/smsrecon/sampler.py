"""Reverse-diffusion reconstruction with k-space data consistency.

The loop alternates three moves: the denoiser's clean-image estimate, a
gradient-style consistency update in extended k-space, and re-noising to
the next (lower) noise level.  The state is the two-channel slice stack;
the consistency step routes through the unitary reorder so the denoiser
always sees single-slice images while the measurement constraint acts on
the extended-FOV encoding.

Before sampling, missing central k-space is optionally synthesized from a
calibration scan (kernel fit + central-band fill); the filled measurement
and its updated mask then drive the consistency term.  The final k-space
residual is always reported against the *original* measurement.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import diffusion as dif
from . import grappa
from . import operators as ops
from .config import ReconConfig
from .data_io import load_weights
from .errors import CalibrationError, ConfigError, NumericalError


def data_consistency(
    x0t_ext: np.ndarray, yprime: np.ndarray, model: ops.SmsModel, lam: float
) -> tuple[np.ndarray, float]:
    """x - lam * (AR)^H (AR x - y'); also returns the relative residual.

    Only sampled (or band-filled) locations contribute: the model's mask
    zeroes everything else before the adjoint.
    """
    if lam < 0:
        raise ValueError("guidance scale must be >= 0")
    resid = model.forward_ext(x0t_ext) - yprime
    ynorm = np.linalg.norm(yprime)
    rel = float(np.linalg.norm(resid) / ynorm) if ynorm > 0 else 0.0
    if lam == 0.0:
        return x0t_ext, rel
    return x0t_ext - lam * model.adjoint_ext(resid), rel


@dataclass
class Diagnostics:
    """Per-run record: step residuals, timings, and the echoed config."""

    timesteps: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    final_residual: float = 0.0
    lfe_filled: int = 0
    lfe_fallback: bool = False
    warnings: list[str] = field(default_factory=list)
    elapsed_s: float = 0.0
    config: dict = field(default_factory=dict)


def sampling_timesteps(T: int, steps: int) -> list[int]:
    """Descending step indices from T to 1, spaced as a cubic power curve.

    When steps < T the subset is denser at low noise levels, where
    consistency corrections persist instead of being re-noised away; the
    high-noise regime tolerates coarse striding.  steps == T gives every
    index.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps >= T:
        return list(range(T, 0, -1))
    targets = np.linspace(T ** (1.0 / 3.0), 1.0, steps) ** 3
    ts: list[int] = []
    prev = T + 1
    for i, x in enumerate(targets):
        v = min(int(round(x)), prev - 1)  # strictly decreasing
        v = max(v, steps - i)  # keep room to still reach 1
        ts.append(v)
        prev = v
    return ts


def build_denoiser(config: ReconConfig, sched: dif.NoiseSchedule) -> dif.EpsilonDenoiser:
    """Denoiser selected by the config; the analytic Gaussian prior is
    test-only and must be passed in explicitly."""
    if config.prior == "shrinkage":
        return dif.ShrinkageDenoiser(
            sched, scale=config.shrink_scale, levels=config.wavelet_levels
        )
    if config.prior == "cnn":
        if not config.weights:
            raise ConfigError("prior 'cnn' needs a weights file")
        manifest = load_weights(config.weights)
        sp = manifest.schedule
        if sp["T"] != sched.T or not np.isclose(sp["beta_0"], sched.betas[0]) or not np.isclose(
            sp["beta_T"], sched.betas[-1]
        ):
            raise ConfigError(
                f"weights schedule (T={sp['T']}, betas {sp['beta_0']}..{sp['beta_T']}) "
                f"does not match config schedule (T={sched.T})"
            )
        return dif.CnnDenoiser(manifest)
    raise ConfigError(f"no denoiser for prior {config.prior!r}")


def prepare_lfe(
    meas: ops.Measurement,
    calibration: np.ndarray | None,
    shifts: np.ndarray,
    config: ReconConfig,
    diag: Diagnostics,
) -> ops.Measurement:
    """Kernel calibration plus central-band fill, with a logged fallback to
    the raw measurement when calibration is missing or degenerate."""
    s = config.lfe_size
    if s == 0 or (meas.pattern.mb == 1 and meas.pattern.r == 1):
        return meas
    if calibration is None:
        diag.lfe_fallback = True
        diag.warnings.append("no calibration data; running with band fill disabled")
        return meas
    try:
        calib_ext = grappa.reorder_calibration(calibration, shifts)
        row_k, col_k = grappa.calibrate_for_pattern(
            calib_ext, meas.pattern, tikhonov=config.lfe_tikhonov
        )
        result = grappa.lfe_fill(meas, row_k, col_k, s)
    except CalibrationError as exc:
        diag.lfe_fallback = True
        diag.warnings.append(f"kernel calibration failed ({exc}); band fill disabled")
        return meas
    diag.lfe_filled = int(result.filled_mask.sum())
    return result.measurement


def roger_reconstruct(
    meas: ops.Measurement,
    maps: np.ndarray,
    calibration: np.ndarray | None,
    config: ReconConfig,
    denoiser: dif.EpsilonDenoiser | None = None,
    sched: dif.NoiseSchedule | None = None,
) -> tuple[np.ndarray, Diagnostics]:
    """Full reconstruction: band fill, then guided reverse sampling.

    Returns the complex slice stack and the run diagnostics.  Deterministic
    given (inputs, config, seed); raises NumericalError with the offending
    step if the state stops being finite.
    """
    t0 = time.perf_counter()
    c, mb, h, w = maps.shape
    shifts = config.resolved_caipi(mb, w)
    diag = Diagnostics(config=config.to_dict())

    yprime_meas = prepare_lfe(meas, calibration, shifts, config, diag)
    model = ops.SmsModel(maps, shifts, yprime_meas.pattern)
    yprime = yprime_meas.data

    if sched is None:
        sched = dif.make_schedule(config.T, config.beta_0, config.beta_T)
    if denoiser is None:
        denoiser = build_denoiser(config, sched)

    rng = np.random.default_rng(config.seed)
    x_t = dif.crandn_channels(rng, (mb, 2, h, w))
    ts = sampling_timesteps(sched.T, config.steps)

    x0_hat = np.zeros_like(x_t)
    for i, t in enumerate(ts):
        x0 = dif.predict_x0(x_t, t, denoiser, sched)
        ext = ops.reorder_r(dif.channels_to_complex(x0), shifts)
        corrected, rel = data_consistency(ext, yprime, model, config.lam)
        x0_hat = dif.complex_to_channels(ops.reorder_r_adjoint(corrected, shifts))
        diag.timesteps.append(t)
        diag.residuals.append(rel)
        if not np.isfinite(x0_hat).all():
            raise NumericalError(f"non-finite state at step t={t} (iteration {i})")
        t_next = ts[i + 1] if i + 1 < len(ts) else 0
        if config.variant == "deterministic":
            eps = denoiser.predict(x_t, t)
            x_t = dif.renoise(x0_hat, t_next, eps, sched)
        else:
            z = dif.crandn_channels(rng, x_t.shape)
            x_t = dif.renoise(x0_hat, t_next, z, sched)

    stack = dif.channels_to_complex(x0_hat)
    model_orig = ops.SmsModel(maps, shifts, meas.pattern)
    ynorm = np.linalg.norm(meas.data)
    diag.final_residual = (
        float(np.linalg.norm(model_orig.forward(stack) - meas.data) / ynorm)
        if ynorm > 0
        else 0.0
    )
    diag.elapsed_s = time.perf_counter() - t0
    return stack, diag


def run_report(diag: Diagnostics, metrics: dict | None = None) -> dict:
    """JSON-serializable run summary: residual curve, timing, config echo."""
    report = {
        "steps": len(diag.timesteps),
        "timesteps": diag.timesteps,
        "residuals": diag.residuals,
        "final_residual": diag.final_residual,
        "lfe_filled": diag.lfe_filled,
        "lfe_fallback": diag.lfe_fallback,
        "warnings": diag.warnings,
        "elapsed_s": diag.elapsed_s,
        "config": diag.config,
    }
    if metrics is not None:
        report["metrics"] = metrics
    return report
