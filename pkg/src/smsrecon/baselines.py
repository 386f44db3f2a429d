"""Classical reconstructions run through the same measurement model:
adjoint (zero-filled), conjugate-gradient least squares, and L1-wavelet
regularized least squares by monotone proximal gradient.

All solvers consume the same Measurement / coil-map types as the sampler;
there is no private preprocessing, so method comparisons are fair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from . import wavelets
from .errors import NumericalError


@dataclass
class IterativeSolveLog:
    """values[k] is the residual/objective after iteration k+1 (one entry
    per performed iteration); the starting point lives in initial_value."""

    values: list[float] = field(default_factory=list)
    iterations: int = 0
    stop_reason: str = ""
    initial_value: float = 0.0
    # conjugate-gradient quadratic objective 0.5 x^H G x - Re(b^H x); this is
    # the quantity CG decreases monotonically (the 2-norm residual is not)
    energy: list[float] = field(default_factory=list)
    initial_energy: float = 0.0

    def trace(self) -> list[float]:
        return [self.initial_value, *self.values]

    def energy_trace(self) -> list[float]:
        return [self.initial_energy, *self.energy]


def zero_filled(meas: ops.Measurement, maps: np.ndarray, shifts) -> np.ndarray:
    """Plain adjoint reconstruction."""
    model = ops.SmsModel(maps, shifts, meas.pattern)
    return model.adjoint(meas.data)


def cg_sense(
    meas: ops.Measurement,
    maps: np.ndarray,
    shifts,
    iters: int = 50,
    tol: float = 1e-9,
) -> tuple[np.ndarray, IterativeSolveLog]:
    """Conjugate gradient on the normal equations (AR)^H (AR) x = (AR)^H y.

    Starts from the adjoint image; the logged values are residual norms
    relative to the right-hand side, checked before each iteration (so an
    infinite tolerance returns the zero-iteration adjoint start).
    """
    if iters < 1:
        raise ValueError("need at least one permitted iteration")
    model = ops.SmsModel(maps, shifts, meas.pattern)
    b = model.adjoint(meas.data)
    bnorm = np.linalg.norm(b)
    log = IterativeSolveLog()
    if bnorm == 0:
        log.stop_reason = "zero right-hand side"
        return b, log

    def energy(x, r):
        # 0.5 x^H G x - Re(b^H x) rewritten with r = b - G x
        return float(-0.5 * np.real(np.vdot(x, b)) - 0.5 * np.real(np.vdot(x, r)))

    x = b.copy()
    r = b - model.adjoint(model.forward(x))
    p = r.copy()
    rs = np.real(np.vdot(r, r))
    log.initial_value = float(np.sqrt(rs) / bnorm)
    log.initial_energy = energy(x, r)
    for _ in range(iters):
        if log.trace()[-1] <= tol:
            log.stop_reason = "tolerance reached"
            return x, log
        gp = model.adjoint(model.forward(p))
        denom = np.real(np.vdot(p, gp))
        if denom <= 0:
            log.stop_reason = "stagnated (non-positive curvature)"
            return x, log
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * gp
        rs_new = np.real(np.vdot(r, r))
        if not np.isfinite(rs_new):
            raise NumericalError(f"cg diverged at iteration {log.iterations + 1}")
        log.iterations += 1
        log.values.append(float(np.sqrt(rs_new) / bnorm))
        log.energy.append(energy(x, r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    log.stop_reason = "tolerance reached" if log.trace()[-1] <= tol else "max iterations"
    return x, log


def l1_wavelet(
    meas: ops.Measurement,
    maps: np.ndarray,
    shifts,
    lam_w: float,
    iters: int = 100,
    step: float = 1.0,
    levels: int = 3,
) -> tuple[np.ndarray, IterativeSolveLog]:
    """Monotone proximal gradient for 0.5||AR x - y||^2 + lam_w ||W x||_1.

    W is the orthonormal Haar transform applied per slice, thresholding
    all coefficients.  Step 1 is non-expansive here because the encoding
    has unit-bounded spectrum (unitary FFT, normalized maps), which makes
    plain proximal steps monotone; a step that still increases the
    objective (floating-point edge) keeps the current iterate and stops.
    """
    if lam_w < 0:
        raise ValueError("regularization weight must be >= 0")
    model = ops.SmsModel(maps, shifts, meas.pattern)
    y = meas.data

    def objective(x: np.ndarray) -> float:
        fid = 0.5 * np.linalg.norm(model.forward(x) - y) ** 2
        l1 = np.sum(np.abs(wavelets.dwt2(x, levels)))
        return float(fid + lam_w * l1)

    x = model.adjoint(y)
    log = IterativeSolveLog(initial_value=objective(x))
    for _ in range(iters):
        grad = model.adjoint(model.forward(x) - y)
        v = x - step * grad
        if lam_w > 0:
            coeffs = wavelets.dwt2(v, levels)
            v = wavelets.idwt2(wavelets.soft_threshold(coeffs, lam_w * step), levels)
        value = objective(v)
        if not np.isfinite(value):
            raise NumericalError(f"objective diverged at iteration {log.iterations + 1}")
        if value > log.trace()[-1]:
            log.stop_reason = "stalled (no descent step)"
            return x, log
        x = v
        log.iterations += 1
        log.values.append(value)
    log.stop_reason = "max iterations"
    return x, log
