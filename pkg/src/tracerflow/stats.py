"""Post-processing fits: power-law exponents, diffusivity limits, Psi decay."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import DispersionSeries, effective_diffusivity
from .errors import (
    ConfigError,
    InsufficientPoints,
    NonPositiveMoment,
    SignalTooWeak,
)


@dataclass(frozen=True)
class PowerLawFit:
    mu: float
    log_prefactor: float
    window: tuple
    r_squared: float
    stderr_mu: float
    n_points: int


@dataclass(frozen=True)
class DiffusivityLimit:
    converged: bool
    value: float | None
    stderr: float | None
    rel_drift: float
    t_stat: float
    window: tuple


@dataclass(frozen=True)
class PsiDecayFit:
    rate: float
    r_squared: float
    window: tuple
    n_points: int


def _ols(x: np.ndarray, y: np.ndarray):
    """Least squares y = a + b x; returns (b, a, r^2, stderr_b)."""
    n = len(x)
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise InsufficientPoints("fit window has no spread in the x variable")
    b = float(np.sum((x - xm) * (y - ym)) / sxx)
    a = ym - b * xm
    resid = y - (a + b * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    se_b = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else 0.0
    return b, a, r2, se_b


def default_window(series: DispersionSeries) -> tuple:
    """Last decade of the record grid; early transients would bias the fit."""
    t_max = float(series.times[-1])
    return (t_max / 10.0, t_max)


def power_law_fit(series: DispersionSeries, window: tuple | None = None) -> PowerLawFit:
    """OLS fit of log(trace of second moment) against log t inside window.

    The trace is fitted instead of a single component: isotropy makes the
    components equivalent and the trace halves the variance.
    """
    if window is None:
        window = default_window(series)
    t_lo, t_hi = float(window[0]), float(window[1])
    if not t_lo < t_hi:
        raise ConfigError(f"bad fit window ({t_lo}, {t_hi})")
    mask = (series.times >= t_lo * (1 - 1e-12)) & (series.times <= t_hi * (1 + 1e-12))
    if int(mask.sum()) < 3:
        raise InsufficientPoints(
            f"only {int(mask.sum())} record times inside window ({t_lo:g}, {t_hi:g})")
    m = series.moment_trace()[mask]
    if np.any(m <= 0):
        raise NonPositiveMoment("cannot log-fit non-positive moments")
    t = series.times[mask]
    b, a, r2, se_b = _ols(np.log(t), np.log(m))
    return PowerLawFit(mu=b, log_prefactor=a, window=(t_lo, t_hi),
                       r_squared=r2, stderr_mu=se_b, n_points=int(mask.sum()))


def diffusivity_limit(series: DispersionSeries, i: int = 0, j: int = 0) -> DiffusivityLimit:
    """Detect convergence of D_ij(t) over the trailing factor-2 in time.

    Converged requires both a small relative drift (< 5%) across the tail
    window and a drift within noise (t-statistic < 2 against the combined
    endpoint standard errors, a conservative scale since consecutive
    moments are positively correlated).
    """
    if len(series.times) < 8:
        raise InsufficientPoints("diffusivity_limit needs at least 8 record times")
    times, values, err = effective_diffusivity(series, i, j)
    if err is None:
        err = np.full_like(values, np.nan)
    t_hi = float(times[-1])
    t_lo = t_hi / 2.0
    mask = times >= t_lo * (1 - 1e-12)
    window = (t_lo, t_hi)
    if int(mask.sum()) < 3:
        return DiffusivityLimit(False, None, None, math.inf, math.inf, window)
    tw = times[mask]
    dw = values[mask]
    ew = err[mask]
    mean = float(np.mean(dw))
    if mean == 0.0:
        return DiffusivityLimit(False, None, None, math.inf, math.inf, window)
    slope, _, _, _ = _ols(tw, dw)
    drift = slope * (tw[-1] - tw[0])
    rel_drift = abs(drift) / abs(mean)
    noise_scale = math.sqrt(ew[0] ** 2 + ew[-1] ** 2)
    if math.isnan(noise_scale) or noise_scale == 0.0:
        t_stat = 0.0 if drift == 0.0 else math.inf
    else:
        t_stat = abs(drift) / noise_scale
    converged = rel_drift < 0.05 and t_stat < 2.0
    if not converged:
        return DiffusivityLimit(False, None, None, rel_drift, t_stat, window)
    stderr = float(np.mean(ew)) if not np.any(np.isnan(ew)) else None
    return DiffusivityLimit(True, mean, stderr, rel_drift, t_stat, window)


def psi_decay_fit(series: DispersionSeries) -> PsiDecayFit:
    """Exponential-decay rate of |E[Psi(t)]| (positive = decaying).

    Fits log|E[Psi]| against t over the record times where the signal
    exceeds 5x its standard error.  Requires the run to have tracked the
    stream function with a Psi(0) distinguishable from 0; in shared-field
    mode Psi(0) is the realization's fixed stream value at the origin.
    """
    if series.mean_stream is None:
        raise ConfigError("series has no mean_stream; rerun with track_stream")
    psi = np.asarray(series.mean_stream, dtype=float)
    if series.stream_stderr is not None:
        se = np.asarray(series.stream_stderr, dtype=float)
    else:
        # CSV round-trips drop the stream stderr; use the late-time RMS of
        # the (decayed) signal as a noise floor.
        tail = psi[series.times >= 0.75 * series.times[-1]]
        se = np.full_like(psi, float(np.sqrt(np.mean(tail**2))))
    psi0 = series.stream_initial
    se0 = series.stream_initial_stderr
    if psi0 is None:
        psi0, se0 = psi[0], se[0]
    if se0 is not None and abs(psi0) <= 3.0 * se0:
        raise SignalTooWeak(
            f"initial mean stream {psi0:.3g} is not 3 stderr away from 0")
    mask = np.abs(psi) > 5.0 * se
    if int(mask.sum()) < 3:
        raise SignalTooWeak(
            f"only {int(mask.sum())} record times have |E[Psi]| above 5 stderr")
    t = series.times[mask]
    b, _, r2, _ = _ols(t, np.log(np.abs(psi[mask])))
    return PsiDecayFit(rate=-b, r_squared=r2,
                       window=(float(t[0]), float(t[-1])), n_points=int(mask.sum()))
