"""Photon-count synthesis and sinusoidal fringe fitting.

Turns analytic model rates into realistic counting data (Poisson statistics
with a counter-based deterministic generator) and recovers offset, period,
visibility and phase with a nonlinear least-squares sinusoid fit:

    y(x) = offset * (1 + V * sin(2*pi*x/period + phase))

The period makes the least-squares problem multimodal, so the fit is seeded
by a spectral estimate refined over a coarse period grid before the damped
Gauss-Newton polish.  Counts are weighted by the usual inverse-variance
heuristic 1/max(y, 1); analytic samples are weighted uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import ContractViolationError, InvalidParameterError, UndefinedVisibilityError

__all__ = [
    "FringeSamples",
    "FringeFit",
    "synthesize_counts",
    "fit_sinusoid",
    "visibility_from_extrema",
]

Y_KINDS = ("analytic-rate", "poisson-counts")


@dataclass(frozen=True)
class FringeSamples:
    """A fringe scan: coordinates (nm or s), nonnegative samples, and their kind."""

    x: np.ndarray
    y: np.ndarray
    y_kind: str = "analytic-rate"
    exposure: float | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
            raise InvalidParameterError("x and y must be 1-d sequences of equal length")
        if x.size < 8:
            raise InvalidParameterError(f"need at least 8 samples, got {x.size}")
        if np.any(np.diff(x) <= 0):
            raise InvalidParameterError("x must be strictly increasing")
        if np.any(y < 0):
            raise InvalidParameterError("samples must be nonnegative")
        if self.y_kind not in Y_KINDS:
            raise InvalidParameterError(f"y_kind must be one of {Y_KINDS}, got {self.y_kind!r}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class FringeFit:
    """Best-fit sinusoid parameters; ``visibility`` is amplitude/offset."""

    offset: float
    amplitude: float
    period: float
    phase: float
    visibility: float
    residual_rms: float
    converged: bool
    iterations: int


def _poisson_draw(seed: int, index: int, mean: float) -> int:
    # Philox is counter based: keying by (seed) and countering by (index)
    # gives an independent, reproducible, parallel-safe stream per point.
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))
    return int(gen.poisson(mean))


def synthesize_counts(rate_fn, x, scale: float, exposure: float, seed: int) -> FringeSamples:
    """Draw Poisson counts with mean scale * rate(x) * exposure at each point.

    ``rate_fn`` may be a callable over the scan coordinate or a precomputed
    array aligned with ``x``.  Identical seeds give bit-identical counts
    regardless of evaluation order.
    """
    x = np.asarray(x, dtype=float)
    if callable(rate_fn):
        rate = np.asarray([float(rate_fn(v)) for v in x])
    else:
        rate = np.asarray(rate_fn, dtype=float)
        if rate.shape != x.shape:
            raise InvalidParameterError("rate array must align with the x grid")
    means = scale * rate * exposure
    if np.any(means < 0):
        raise ContractViolationError("count synthesis requires nonnegative rates")
    counts = np.array(
        [_poisson_draw(int(seed), k, float(m)) for k, m in enumerate(means)], dtype=float
    )
    return FringeSamples(x=x, y=counts, y_kind="poisson-counts", exposure=exposure)


def _sinusoid_design(x: np.ndarray, period: float) -> np.ndarray:
    w = 2.0 * math.pi / period
    return np.column_stack([np.ones_like(x), np.sin(w * x), np.cos(w * x)])


def _coarse_period(x: np.ndarray, y: np.ndarray, weights: np.ndarray, hint: float | None) -> float:
    """Best period on a coarse grid around the spectral (or hinted) estimate."""
    span = x[-1] - x[0]
    if hint is not None and hint > 0:
        center = float(hint)
    else:
        dx = np.diff(x)
        if np.allclose(dx, dx[0], rtol=1e-6, atol=0.0):
            # dominant nonzero frequency of the detrended samples
            spec = np.abs(np.fft.rfft(y - y.mean()))
            freqs = np.fft.rfftfreq(len(x), d=float(dx[0]))
            k = int(np.argmax(spec[1:])) + 1
            center = 1.0 / freqs[k] if freqs[k] > 0 else span
        else:
            center = span / 2.0
    lo, hi = 0.5 * center, 2.0 * center
    hi = min(hi, 4.0 * span)
    best_t, best_sse = center, np.inf
    for trial in np.geomspace(lo, hi, 96):
        design = _sinusoid_design(x, trial) * weights[:, None]
        coef, *_ = np.linalg.lstsq(design, y * weights, rcond=None)
        sse = float(np.sum((design @ coef - y * weights) ** 2))
        if sse < best_sse:
            best_t, best_sse = float(trial), sse
    return best_t


def fit_sinusoid(samples: FringeSamples, period_hint: float | None = None) -> FringeFit:
    """Least-squares sinusoid fit of a fringe scan.

    The caller is responsible for data spanning at least ~1.5 periods; badly
    under-spanned scans come back with converged=False or wide residuals.
    """
    x, y = samples.x, samples.y
    if samples.y_kind == "poisson-counts":
        weights = 1.0 / np.sqrt(np.maximum(y, 1.0))
    else:
        weights = np.ones_like(y)

    period0 = _coarse_period(x, y, weights, period_hint)
    design = _sinusoid_design(x, period0) * weights[:, None]
    coef, *_ = np.linalg.lstsq(design, y * weights, rcond=None)
    p0 = np.array([coef[0], coef[1], coef[2], period0])

    def residuals(params):
        offset, a, b, period = params
        w = 2.0 * math.pi / period
        model = offset + a * np.sin(w * x) + b * np.cos(w * x)
        return (model - y) * weights

    span = x[-1] - x[0]
    result = least_squares(
        residuals,
        p0,
        method="trf",
        bounds=([-np.inf, -np.inf, -np.inf, 1e-9], [np.inf, np.inf, np.inf, 8.0 * span]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    offset, a, b, period = (float(v) for v in result.x)
    amplitude = math.hypot(a, b)
    phase = math.atan2(b, a) % (2.0 * math.pi) if amplitude > 0 else 0.0
    visibility = amplitude / offset if offset > 0 else 0.0
    w = 2.0 * math.pi / period
    model = offset + a * np.sin(w * x) + b * np.cos(w * x)
    residual_rms = float(np.sqrt(np.mean((model - y) ** 2)))
    converged = bool(result.success) and offset > 0.0 and period > 0.0
    return FringeFit(
        offset=offset,
        amplitude=amplitude,
        period=period,
        phase=phase,
        visibility=visibility,
        residual_rms=residual_rms,
        converged=converged,
        iterations=int(result.nfev),
    )


def visibility_from_extrema(samples: FringeSamples) -> float:
    """Model-free (max - min)/(max + min); needs a full period of coverage."""
    hi = float(np.max(samples.y))
    lo = float(np.min(samples.y))
    if hi + lo == 0.0:
        raise UndefinedVisibilityError("max + min of the samples is zero")
    return (hi - lo) / (hi + lo)
