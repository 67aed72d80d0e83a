"""Wasserstein estimators, moments, L2 errors and log-log slope fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .randomness import RandomStream


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float  # RMS of the log-space residuals


def empirical_w2_1d(samples_a, samples_b) -> float:
    """Exact W2 between two equal-size empirical measures on the line (sorted pairing)."""
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size != b.size:
        raise ValueError(f"sample counts differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("need at least one sample")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def gaussian_w2_diag(mean_a, var_a, mean_b, var_b) -> float:
    """Closed-form W2 between Gaussians with diagonal covariances."""
    var_a = np.atleast_1d(np.asarray(var_a, dtype=float))
    var_b = np.atleast_1d(np.asarray(var_b, dtype=float))
    if np.any(var_a <= 0) or np.any(var_b <= 0):
        raise ValueError("variances must be positive")
    dm = np.atleast_1d(np.asarray(mean_a, dtype=float) - np.asarray(mean_b, dtype=float))
    return float(np.sqrt(np.sum(dm * dm) + np.sum((np.sqrt(var_a) - np.sqrt(var_b)) ** 2)))


def fit_loglog_slope(h_values, errors) -> SlopeFit:
    """Ordinary least squares of ``log(error)`` on ``log(h)``."""
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.ndim != 1:
        raise ValueError("h_values and errors must be 1-d and of equal length")
    if h.size < 3:
        raise ValueError(f"need at least 3 points, got {h.size}")
    if np.any(~(h > 0)) or np.any(~(e > 0)):
        raise ValueError("h values and errors must be strictly positive")
    lx, ly = np.log(h), np.log(e)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return SlopeFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def l2_error(pairs) -> float:
    """Root mean of ``|x_a - x_b|^2 + |v_a - v_b|^2`` over a sequence of state pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one pair")
    total = 0.0
    for a, b in pairs:
        dx = np.asarray(a[0], dtype=float) - np.asarray(b[0], dtype=float)
        dv = np.asarray(a[1], dtype=float) - np.asarray(b[1], dtype=float)
        total += float(np.sum(dx * dx) + np.sum(dv * dv))
    return float(np.sqrt(total / len(pairs)))


def l2_error_batched(a, b) -> float:
    """Same as :func:`l2_error` for two lane-batched states of shape ``(N, d)``."""
    dx = np.asarray(a[0], dtype=float) - np.asarray(b[0], dtype=float)
    dv = np.asarray(a[1], dtype=float) - np.asarray(b[1], dtype=float)
    sq = np.sum(dx * dx, axis=-1) + np.sum(dv * dv, axis=-1)
    if sq.size == 0:
        raise ValueError("need at least one pair")
    return float(np.sqrt(np.mean(sq)))


def sample_moments(samples) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate mean and unbiased variance of ``N >= 2`` vectors."""
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] < 2:
        raise ValueError(f"need at least 2 samples, got {s.shape[0]}")
    return s.mean(axis=0), s.var(axis=0, ddof=1)


def gaussian_quantiles(n: int, mean: float = 0.0, sd: float = 1.0) -> np.ndarray:
    """Inverse-CDF values at the plotting positions ``(i - 1/2)/n``."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    p = (np.arange(1, n + 1) - 0.5) / n
    return mean + sd * ndtri(p)


def quantile_w2(samples, mean, sd) -> float:
    """W2 estimate against a diagonal Gaussian via per-coordinate quantile matching.

    The coordinate distances are combined in quadrature.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (s.shape[1],))
    sd = np.broadcast_to(np.asarray(sd, dtype=float), (s.shape[1],))
    total = 0.0
    for j in range(s.shape[1]):
        total += empirical_w2_1d(s[:, j], gaussian_quantiles(s.shape[0], mean[j], sd[j])) ** 2
    return float(np.sqrt(total))


def noise_floor(stream: RandomStream, n: int, sd, reps: int = 5) -> tuple[float, float]:
    """Mean and standard deviation of the W2 distance between two independent
    ``n``-sample draws of the centred diagonal Gaussian with scales ``sd``.

    ``stream`` must be a single (unbatched) stream.
    """
    sd = np.atleast_1d(np.asarray(sd, dtype=float))
    values = []
    for _ in range(reps):
        a = stream.normal(n * sd.size).reshape(n, sd.size) * sd
        b = stream.normal(n * sd.size).reshape(n, sd.size) * sd
        values.append(
            np.sqrt(sum(empirical_w2_1d(a[:, j], b[:, j]) ** 2 for j in range(sd.size)))
        )
    values = np.asarray(values)
    spread = float(values.std(ddof=1)) if reps > 1 else 0.0
    return float(values.mean()), spread
