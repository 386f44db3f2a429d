"""Diffusion schedules, forward/reverse algebra, and epsilon denoisers.

Complex images travel through the denoisers as two real channels
(channel 0 real, channel 1 imaginary, axis -3); all diffusion algebra is
done on that representation.  Noise is complex-standard-normal per pixel:
each channel is drawn N(0, 1/2), so E|z|^2 == 1 in complex units.  One
seeded generator owned by the caller supplies all randomness.

Step indices follow the algorithmic convention t in [1, T], with t = 0
meaning "clean": alpha_bar(0) == 1 exactly, making the last reverse step
deterministic.  The stored arrays are 0-indexed, i.e. betas[0] is the
first step's beta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_io import WeightManifest
from . import wavelets


# ---------------------------------------------------------------------------
# channel representation and noise


def complex_to_channels(x: np.ndarray) -> np.ndarray:
    """(..., H, W) complex -> (..., 2, H, W) real."""
    return np.stack([x.real, x.imag], axis=-3)


def channels_to_complex(ch: np.ndarray) -> np.ndarray:
    """(..., 2, H, W) real -> (..., H, W) complex."""
    return ch[..., 0, :, :] + 1j * ch[..., 1, :, :]


def crandn_channels(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Complex standard normal in channel representation (var 1/2 per channel)."""
    return rng.standard_normal(shape) / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# noise schedule


@dataclass
class NoiseSchedule:
    """Linear beta schedule with its derived alpha / alpha-bar sequences."""

    T: int
    betas: np.ndarray  # (T,), betas[0] = beta at step 1
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        self.alphas = 1.0 - self.betas
        self.alpha_bars = np.cumprod(self.alphas)

    def beta(self, t: int) -> float:
        self._check(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check(t)
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        """Product of alphas up to step t; t = 0 gives the empty product 1."""
        if t == 0:
            return 1.0
        self._check(t)
        return float(self.alpha_bars[t - 1])

    def sigma2(self, t: int) -> float:
        """Reverse-posterior variance (1 - abar_{t-1}) / (1 - abar_t) * beta_t."""
        self._check(t)
        return (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)

    def _check(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ValueError(f"step {t} outside [1, {self.T}]")


def make_schedule(T: int, beta_0: float = 1e-4, beta_T: float = 0.02) -> NoiseSchedule:
    """Linear interpolation from beta_0 to beta_T over T steps."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0.0 < beta_0 <= beta_T < 1.0:
        raise ValueError(f"betas must satisfy 0 < beta_0 <= beta_T < 1, got {beta_0}, {beta_T}")
    return NoiseSchedule(T=T, betas=np.linspace(beta_0, beta_T, T))


# ---------------------------------------------------------------------------
# forward / reverse algebra (all elementwise on channel arrays)


def forward_noise(x0: np.ndarray, t: int, z: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) z."""
    if z.shape != x0.shape:
        raise ValueError(f"noise shape {z.shape} != image shape {x0.shape}")
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * z


def predict_x0(x_t: np.ndarray, t: int, denoiser, sched: NoiseSchedule) -> np.ndarray:
    """Denoised estimate (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)."""
    if t < 1:
        raise ValueError("predict_x0 needs t >= 1")
    eps = denoiser.predict(x_t, t)
    ab = sched.alpha_bar(t)
    return (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)


def renoise(x0_hat: np.ndarray, t_prev: int, z: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Jump back to noise level t_prev: sqrt(abar) x0_hat + sqrt(1-abar) z."""
    if z.shape != x0_hat.shape:
        raise ValueError(f"noise shape {z.shape} != image shape {x0_hat.shape}")
    ab = sched.alpha_bar(t_prev)
    return np.sqrt(ab) * x0_hat + np.sqrt(1.0 - ab) * z


def ddpm_step(
    x_t: np.ndarray, t: int, denoiser, z: np.ndarray, sched: NoiseSchedule
) -> np.ndarray:
    """One ancestral reverse step: posterior mean plus sigma_t z."""
    if z.shape != x_t.shape:
        raise ValueError(f"noise shape {z.shape} != image shape {x_t.shape}")
    eps = denoiser.predict(x_t, t)
    a = sched.alpha(t)
    ab = sched.alpha_bar(t)
    mu = (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps) / np.sqrt(a)
    return mu + np.sqrt(sched.sigma2(t)) * z


# ---------------------------------------------------------------------------
# denoisers


class EpsilonDenoiser:
    """Interface: predict the injected noise from x_t and the step index.

    predict takes a channel array (..., 2, H, W) and returns the same
    shape; implementations must be deterministic given (x_t, t).
    """

    def predict(self, x_t: np.ndarray, t: int) -> np.ndarray:
        raise NotImplementedError


class GaussianPriorDenoiser(EpsilonDenoiser):
    """Exact posterior-mean denoiser for a Gaussian prior x0 ~ CN(mu, sigma^2 I).

    Serves as an analytic oracle: its x0 estimate is the true MMSE
    estimator, so sampling with it can be checked against closed-form
    posteriors.  sigma is the complex standard deviation (E|x0-mu|^2 =
    sigma^2), matching the package noise convention.
    """

    def __init__(self, mu: np.ndarray, sigma: float, sched: NoiseSchedule):
        if np.iscomplexobj(mu):
            mu = complex_to_channels(mu)
        self.mu = mu
        self.sigma = float(sigma)
        self.sched = sched

    def x0_estimate(self, x_t: np.ndarray, t: int) -> np.ndarray:
        ab = self.sched.alpha_bar(t)
        s2 = self.sigma**2
        return (np.sqrt(ab) * s2 * x_t + (1.0 - ab) * self.mu) / (ab * s2 + (1.0 - ab))

    def predict(self, x_t: np.ndarray, t: int) -> np.ndarray:
        ab = self.sched.alpha_bar(t)
        return (x_t - np.sqrt(ab) * self.x0_estimate(x_t, t)) / np.sqrt(1.0 - ab)


class ShrinkageDenoiser(EpsilonDenoiser):
    """Trainless prior: wavelet soft-thresholding of the naive x0 estimate.

    Thresholds the orthonormal Haar coefficients of x_t / sqrt(abar) at
    scale * sqrt(1 - abar) / sqrt(abar) (the noise level of that naive
    estimate), jointly over the two channels so phase is preserved.
    scale = 0 makes the x0 mapping the identity estimator.

    The coarsest approximation quadrant is thresholded like every other
    band: exempting it (keep_coarse=True) lets early-step noise park there
    permanently, and on ill-conditioned accelerations that reservoir never
    drains and dominates the output.
    """

    def __init__(
        self,
        sched: NoiseSchedule,
        scale: float = 2.0,
        levels: int = 3,
        keep_coarse: bool = False,
    ):
        self.sched = sched
        self.scale = float(scale)
        self.levels = int(levels)
        self.keep_coarse = bool(keep_coarse)

    def x0_estimate(self, x_t: np.ndarray, t: int) -> np.ndarray:
        ab = self.sched.alpha_bar(t)
        naive = channels_to_complex(x_t) / np.sqrt(ab)
        if self.scale == 0.0:
            return complex_to_channels(naive)
        tau = self.scale * np.sqrt(1.0 - ab) / np.sqrt(ab)
        coeffs = wavelets.dwt2(naive, self.levels)
        shrunk = wavelets.soft_threshold(coeffs, tau)
        if self.keep_coarse:
            keep = wavelets.coarse_mask(naive.shape[-2:], self.levels)
            shrunk = np.where(keep, coeffs, shrunk)
        return complex_to_channels(wavelets.idwt2(shrunk, self.levels))

    def predict(self, x_t: np.ndarray, t: int) -> np.ndarray:
        ab = self.sched.alpha_bar(t)
        return (x_t - np.sqrt(ab) * self.x0_estimate(x_t, t)) / np.sqrt(1.0 - ab)


def sinusoidal_embedding(t: int, dim: int) -> np.ndarray:
    """Fixed sin/cos position code for the step index (float32, length dim)."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    args = float(t) * freqs
    return np.concatenate([np.sin(args), np.cos(args)]).astype(np.float32)


def _silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 same-size convolution (cross-correlation, zero padding) via im2col."""
    cin, h, wid = x.shape
    cout = w.shape[0]
    pad = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(pad, (3, 3), axis=(1, 2))
    feats = win.transpose(1, 2, 0, 3, 4).reshape(h * wid, cin * 9)
    out = feats @ w.reshape(cout, -1).T + b
    return np.ascontiguousarray(out.T).reshape(cout, h, wid)


class CnnDenoiser(EpsilonDenoiser):
    """Manifest-backed residual conv net with a sinusoidal step embedding.

    Two input/output channels (real and imaginary parts); hidden width and
    block count are read from the manifest layer table.  Forward:

        temb = fc2(silu(fc1(sin_embed(t))))
        h = conv_in(x)
        per block: h += conv2(silu(conv1(h) + proj(temb)))
        eps = conv_out(silu(h))

    Runs in float32 end to end so a float32 training framework reproduces
    the outputs to well under the 1e-4 parity tolerance.
    """

    ARCHITECTURE = "rescnn-t64"

    def __init__(self, manifest: WeightManifest):
        if not manifest.architecture.startswith(self.ARCHITECTURE):
            raise ValueError(
                f"unsupported architecture {manifest.architecture!r}; "
                f"expected {self.ARCHITECTURE}*"
            )
        self.manifest = manifest
        names = {spec.name for spec in manifest.layers}
        for required in ("conv_in", "conv_out", "time.fc1", "time.fc2"):
            if required not in names:
                raise ValueError(f"manifest missing layer {required!r}")
        self.n_blocks = sum(1 for n in names if n.endswith(".conv1"))
        self.emb_dim = manifest.layer("time.fc1")[0].shape[1]
        self.schedule_params = manifest.schedule

    def predict(self, x_t: np.ndarray, t: int) -> np.ndarray:
        x = np.asarray(x_t, dtype=np.float32)
        if x.ndim == 3:
            return self._forward_one(x, t)
        if x.ndim == 4:
            return np.stack([self._forward_one(img, t) for img in x])
        raise ValueError(f"expected (..., 2, H, W), got shape {x.shape}")

    def _forward_one(self, x: np.ndarray, t: int) -> np.ndarray:
        lay = self.manifest.layer
        emb = sinusoidal_embedding(t, self.emb_dim)
        w1, b1 = lay("time.fc1")
        w2, b2 = lay("time.fc2")
        temb = w2 @ _silu(w1 @ emb + b1) + b2
        h = _conv2d(x, *lay("conv_in"))
        for i in range(self.n_blocks):
            y = _conv2d(h, *lay(f"block{i}.conv1"))
            pw, pb = lay(f"block{i}.proj")
            y += (pw @ temb + pb)[:, None, None]
            y = _conv2d(_silu(y), *lay(f"block{i}.conv2"))
            h = h + y
        return _conv2d(_silu(h), *lay("conv_out"))
