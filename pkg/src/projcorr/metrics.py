"""Reconstruction-quality metrics and consistency diagnostics.

Besides MSE/PSNR/SSIM this module provides:

* ``nullspace_consistency`` -- ||A (out - A+ y)||^2, how far a reconstruction
  strays from "minimum-norm solution plus null-space component" form;
* ``range_residual``        -- ||A out - y||^2, raw measurement misfit;
* ``noise_bias_trace``      -- Tr(A+ S (A+)^T), the expected squared error a
  consistency-preserving reconstructor inherits from noise covariance S,
  with a Monte-Carlo estimator to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import correlate2d

from .errors import ParameterError, ShapeError, UnsupportedConfigError
from .noise import NoiseModel
from .operators import Geometry, SensingOperator
from .pinv import CgEngine, MaskEngine, PinvEngine, SpectralEngine, SvdEngine
from .rng import generator

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def mse(a, b) -> float:
    """Mean squared difference of two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ShapeError("mse operand length", a.size, b.size)
    d = a - b
    return float(d @ d) / a.size


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    if peak <= 0:
        raise ParameterError(f"psnr peak must be > 0, got {peak}")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def _ssim_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    d = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-0.5 * (d / SSIM_SIGMA) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def _as_image(a, geometry: Optional[Geometry]) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        if geometry is None:
            raise ParameterError("flat input needs an image geometry")
        a = geometry.reshape(a)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ParameterError(f"expected a 2-D or 3-D image, got ndim={a.ndim}")
    return a


def ssim(
    a,
    b,
    geometry: Optional[Geometry] = None,
    data_range: float = 1.0,
) -> float:
    """Mean local structural similarity over fully-interior windows.

    Uses the standard 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03;
    no padding: only windows entirely inside the image contribute.  Channels
    are averaged.
    """
    img_a = _as_image(a, geometry)
    img_b = _as_image(b, geometry)
    if img_a.shape != img_b.shape:
        raise ShapeError("ssim image shape", img_a.shape, img_b.shape)
    h, w, channels = img_a.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ParameterError(
            f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    window = _ssim_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    values = []
    for c in range(channels):
        x = img_a[:, :, c]
        y = img_b[:, :, c]
        mu_x = correlate2d(x, window, mode="valid")
        mu_y = correlate2d(y, window, mode="valid")
        var_x = correlate2d(x * x, window, mode="valid") - mu_x * mu_x
        var_y = correlate2d(y * y, window, mode="valid") - mu_y * mu_y
        cov = correlate2d(x * y, window, mode="valid") - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        values.append(np.mean(num / den))
    return float(np.mean(values))


def nullspace_consistency(engine: PinvEngine, y, out) -> float:
    """||A (out - A+ y)||^2: zero iff ``out`` keeps the measured component."""
    y = engine._check_measurement(y)
    out = engine._check_signal(out)
    r = engine.op.apply(out - engine.pinv_apply(y))
    return float(r @ r)


def range_residual(op: SensingOperator, y, out) -> float:
    """||A out - y||^2: raw measurement misfit of a reconstruction."""
    r = op.apply(out) - np.asarray(y, dtype=np.float64).ravel()
    return float(r @ r)


def _svd_trace(u: np.ndarray, s: np.ndarray, noise: NoiseModel) -> float:
    if s.size == 0:
        return 0.0
    if noise.form == "isotropic":
        return float(noise.sigma ** 2 * np.sum(1.0 / s ** 2))
    if noise.form == "diagonal":
        weights = (u * u * noise.variances[:, None]).sum(axis=0)
        return float(np.sum(weights / s ** 2))
    quad = np.einsum("ji,jk,ki->i", u, noise.covariance, u)
    return float(np.sum(quad / s ** 2))


def noise_bias_trace(engine: PinvEngine, noise: NoiseModel) -> float:
    """Tr(A+ S (A+)^T) computed from the engine's cached factorization."""
    noise.check_dim(engine.op.m)
    if noise.form == "none":
        return 0.0
    if isinstance(engine, SvdEngine):
        return _svd_trace(engine.u, engine.s, noise)
    if isinstance(engine, MaskEngine):
        if noise.form == "isotropic":
            return float(noise.sigma ** 2 * engine.op.m)
        if noise.form == "diagonal":
            return float(noise.variances.sum())
        return float(np.trace(noise.covariance))
    if isinstance(engine, SpectralEngine):
        g = engine.op.geometry
        inv_sq = np.sum(1.0 / np.abs(engine.op.transfer[engine.retained]) ** 2)
        if noise.form == "isotropic":
            return float(noise.sigma ** 2 * g.channels * inv_sq)
        if noise.form == "diagonal":
            return float(noise.variances.sum() * inv_sq / (g.height * g.width))
        raise UnsupportedConfigError(
            "dense noise covariance is not supported by the spectral engine"
        )
    if isinstance(engine, CgEngine):
        if not engine.op.materializable():
            raise UnsupportedConfigError(
                "noise trace needs a factorization; the operator is too large "
                "to materialize"
            )
        svd = getattr(engine, "_trace_svd", None)
        if svd is None:
            svd = SvdEngine(engine.op)
            setattr(engine, "_trace_svd", svd)
        return _svd_trace(svd.u, svd.s, noise)
    raise UnsupportedConfigError(f"noise trace unsupported for {engine!r}")


def monte_carlo_noise_error(
    engine: PinvEngine,
    op: SensingOperator,
    x,
    noise: NoiseModel,
    trials: int,
    seed: int,
) -> float:
    """Empirical mean squared error of a consistency-preserving reconstructor.

    Draws seeded noise, forms the reconstruction ``A+ (A x + n)`` plus the
    true null-space component of ``x``, and averages the squared error
    against ``x``; converges to ``noise_bias_trace`` as trials grow.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    x = engine._check_signal(x)
    if noise.form == "none":
        return 0.0
    draws = noise.sample(generator(seed), op.m, trials)
    # reconstruction error = A+ n plus the (round-off) residual of projecting x
    base = (
        engine.pinv_apply(op.apply(x))
        + engine.nullspace_projector_apply(x)
        - x
    )
    if op.materializable():
        pinv = engine.pinv_matrix()
        errors = pinv @ draws + base[:, None]
        return float(np.mean(np.sum(errors * errors, axis=0)))
    total = 0.0
    for t in range(trials):
        e = engine.pinv_apply(draws[:, t]) + base
        total += float(e @ e)
    return total / trials


@dataclass
class MetricsRecord:
    """Per-image metrics for one reconstruction method."""

    image_id: str
    method: str
    lam: Optional[float]
    mse: float
    psnr: float
    ssim: float
    nullspace_consistency: float
    range_residual: float


def evaluate_reconstruction(
    engine: PinvEngine,
    x_true,
    y,
    output,
    image_id: str,
    method: str,
    lam: Optional[float] = None,
) -> MetricsRecord:
    """Compute the full metrics row for one reconstruction."""
    x_true = np.asarray(x_true, dtype=np.float64).ravel()
    output = np.asarray(output, dtype=np.float64).ravel()
    return MetricsRecord(
        image_id=image_id,
        method=method,
        lam=lam,
        mse=mse(output, x_true),
        psnr=psnr(output, x_true),
        ssim=ssim(output, x_true, geometry=engine.op.geometry),
        nullspace_consistency=nullspace_consistency(engine, y, output),
        range_residual=range_residual(engine.op, y, output),
    )


def format_metric(value) -> str:
    """CSV cell: 6 significant digits, 'inf' for infinity, '' for missing."""
    if value is None:
        return ""
    v = float(value)
    if math.isinf(v):
        return "inf"
    return f"{v:.6g}"
