"""Monodromy matrices, Floquet multipliers/exponents and period detection."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .eigen import eigenvalues


class NoPeriodError(ValueError):
    """Fewer than two local maxima in the (smoothed) signal."""


def monodromy(matrices, dt: float = 1.0) -> np.ndarray:
    """Forward-Euler state transition ``Phi <- Phi + dt * A_t Phi`` starting from I."""
    matrices = [np.asarray(m, dtype=float) for m in matrices]
    if not matrices:
        raise ValueError("empty matrix sequence")
    n = matrices[0].shape[0]
    phi = np.eye(n)
    for a in matrices:
        phi = phi + dt * (a @ phi)
    return phi


@dataclass
class FloquetReport:
    t1: int
    t2: int
    dt: float
    monodromy: np.ndarray
    multipliers: list[complex]
    exponents: list[complex]

    @property
    def period(self) -> int:
        return self.t2 - self.t1

    def classify(self, tol: float = 1e-9) -> list[str]:
        """Per-exponent label: decay / growth / neutral, suffixed ``+oscillation`` if Im != 0."""
        labels = []
        for mu in self.exponents:
            if mu.real < -tol:
                kind = "decay"
            elif mu.real > tol:
                kind = "growth"
            else:
                kind = "neutral"
            if abs(mu.imag) > tol:
                kind += "+oscillation"
            labels.append(kind)
        return labels

    def to_dict(self) -> dict:
        def pair(v):
            return [v.real if math.isfinite(v.real) else "-inf", v.imag]
        return {
            "t1": self.t1, "t2": self.t2, "period": self.period, "dt": self.dt,
            "monodromy": self.monodromy.tolist(),
            "multipliers": [[v.real, v.imag] for v in self.multipliers],
            "exponents": [pair(v) for v in self.exponents],
            "classification": self.classify(),
        }


def floquet(matrices, dt: float = 1.0, t1: int = 0, t2: int | None = None) -> FloquetReport:
    """Floquet analysis of the matrices indexed ``t1 <= t < t2`` of ``matrices``.

    Exponents are ``log(lambda) / (T * dt)`` on the principal branch, ``T = t2 - t1``.
    A zero multiplier yields an exponent of ``-inf`` and a warning.
    """
    matrices = list(matrices)
    t2 = len(matrices) if t2 is None else t2
    if not 0 <= t1 < t2 <= len(matrices):
        raise ValueError(f"invalid window [{t1}, {t2}) for {len(matrices)} matrices")
    phi = monodromy(matrices[t1:t2], dt)
    period = t2 - t1
    mults = eigenvalues(phi)
    exps = []
    for lam in mults:
        if lam == 0:
            warnings.warn("zero Floquet multiplier; exponent reported as -inf", RuntimeWarning, stacklevel=2)
            exps.append(complex(-math.inf, 0.0))
        else:
            exps.append(cmath.log(lam) / (period * dt))
    return FloquetReport(t1, t2, dt, phi, mults, exps)


def moving_average(signal, window: int = 3) -> np.ndarray:
    """Centred moving average; the ends average over the available samples."""
    x = np.asarray(signal, dtype=float)
    kernel = np.ones(window)
    num = np.convolve(x, kernel, mode="same")
    den = np.convolve(np.ones_like(x), kernel, mode="same")
    return num / den


def local_maxima(x) -> np.ndarray:
    """Interior indices with ``x[i-1] < x[i] >= x[i+1]`` (plateaus report their first index)."""
    x = np.asarray(x, dtype=float)
    idx = []
    i = 1
    n = len(x)
    while i < n - 1:
        if x[i] > x[i - 1]:
            j = i
            while j < n - 1 and x[j + 1] == x[i]:
                j += 1
            if j < n - 1 and x[j + 1] < x[i]:
                idx.append(i)
            i = j + 1
        else:
            i += 1
    return np.array(idx, dtype=int)


def detect_period(signal, window: int = 3, which: str = "last", min_prominence: float = 0.0) -> tuple[int, int]:
    """Indices ``(t1, t2)`` of two consecutive local maxima of the smoothed signal.

    ``which`` picks the first or last such pair; ``last`` favours the steady
    state over an initial transient. Peaks whose height above the lower of the
    neighbouring troughs is below ``min_prominence`` are ignored.
    """
    x = np.asarray(signal, dtype=float)
    if len(x) < 3:
        raise ValueError("signal needs at least 3 samples")
    smooth = moving_average(x, window) if window > 1 else x
    peaks = local_maxima(smooth)
    if min_prominence > 0 and len(peaks):
        peaks = _prominent(smooth, peaks, min_prominence)
    if len(peaks) < 2:
        raise NoPeriodError(f"found {len(peaks)} local maxima; no period")
    if which == "first":
        return int(peaks[0]), int(peaks[1])
    if which == "last":
        return int(peaks[-2]), int(peaks[-1])
    raise ValueError(f"unknown selector {which!r}")


def _prominent(x, peaks, min_prominence):
    keep = []
    for p in peaks:
        left = x[:p + 1]
        right = x[p:]
        # lowest point between this peak and the nearest higher sample on each side
        higher_left = np.nonzero(left[:-1] > x[p])[0]
        lo_left = left[(higher_left[-1] if len(higher_left) else 0):].min()
        higher_right = np.nonzero(right[1:] > x[p])[0]
        lo_right = right[:(higher_right[0] + 2 if len(higher_right) else len(right))].min()
        if x[p] - max(lo_left, lo_right) >= min_prominence:
            keep.append(p)
    return np.array(keep, dtype=int)
