"""Loschmidt-echo spectroscopy: energies from the Fourier transform of ``<psi(0)|psi(t)>``.

With ``S(t) = sum_k p_k exp(-i E_k t)`` the transform
``S_hat(w) = dt * sum_i S(t_i) exp(+i w t_i)`` peaks at ``w = E_k`` with height
close to ``p_k * N * dt``.  A rectangular window is used and the series is
zero-padded before the FFT; each peak is refined by a parabola through the
three bins around it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["Peak", "fourier_transform", "spectroscopy"]


@dataclass(frozen=True)
class Peak:
    frequency: float
    weight: float


def _check_times(overlaps, times):
    S = np.asarray(overlaps, dtype=complex)
    t = np.asarray(times, dtype=float)
    if S.ndim != 1 or S.shape != t.shape or S.size < 3:
        raise InvalidArgumentError("need at least 3 overlaps with matching times")
    steps = np.diff(t)
    dt = float(steps.mean())
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(dt)):
        raise InvalidArgumentError("times must form a uniform increasing grid")
    return S, t, dt


def _transform_at(S, t, dt, w):
    return dt * np.exp(1j * np.outer(np.atleast_1d(w), t)) @ S


def fourier_transform(overlaps, times, pad: int = 8, center: float = 0.0):
    """Zero-padded ``S_hat`` on frequencies in ``[center - pi/dt, center + pi/dt)``, ascending.

    Sampling at spacing ``dt`` only fixes frequencies modulo ``2 pi / dt``;
    ``center`` picks the window, e.g. ``<H>`` of the initial state.
    """
    S, t, dt = _check_times(overlaps, times)
    if int(pad) < 1:
        raise InvalidArgumentError("pad must be >= 1")
    if center:
        w, spectrum = fourier_transform(S * np.exp(1j * center * t), t, pad)
        return w + center, spectrum
    n_fft = int(pad) * S.size
    # sum_i S_i exp(+i w t_i) = exp(i w t_0) * n_fft * ifft(S)
    spectrum = n_fft * np.fft.ifft(S, n_fft)
    w = 2.0 * np.pi * np.fft.fftfreq(n_fft, d=dt)
    spectrum = dt * spectrum * np.exp(1j * w * t[0])
    order = np.argsort(w)
    return w[order], spectrum[order]


def spectroscopy(overlaps, times, pad: int = 8, rel_threshold: float = 0.1,
                 center: float = 0.0) -> list:
    """Peaks of ``|S_hat|^2`` sorted by decreasing weight.

    Parameters
    ----------
    overlaps : array of complex
        ``S(t_i) = <psi(0)|psi(t_i)>``.
    times : array of float
        Uniform grid, typically ``[0, T]``.
    pad : int
        Zero-padding factor.
    rel_threshold : float
        Local maxima of ``|S_hat|^2`` below this fraction of the global maximum
        are ignored.
    center : float
        Middle of the reported frequency window of width ``2 pi / dt``.

    Returns
    -------
    list of Peak
        ``weight`` is ``|S_hat(w*)| / (N dt)`` at the refined frequency ``w*``,
        which estimates the population of that eigenvalue.
    """
    S, t, dt = _check_times(overlaps, times)
    w, spec = fourier_transform(S, t, pad, center)
    power = np.abs(spec) ** 2
    if not power.max() > 0:
        return []
    left, right = np.roll(power, 1), np.roll(power, -1)
    cand = np.flatnonzero((power >= left) & (power > right)
                          & (power >= rel_threshold * power.max()))
    step = w[1] - w[0]
    peaks = []
    for k in cand:
        y0, y1, y2 = power[k - 1], power[k], power[(k + 1) % power.size]
        den = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        freq = float(w[k] + np.clip(shift, -0.5, 0.5) * step)
        weight = float(np.abs(_transform_at(S, t, dt, freq)[0]) / (S.size * dt))
        peaks.append(Peak(freq, weight))
    return sorted(peaks, key=lambda p: -p.weight)
