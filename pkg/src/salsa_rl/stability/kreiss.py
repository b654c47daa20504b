"""Kreiss constant of a locally stable dynamics matrix.

``standard`` mode estimates ``sup_{|z|>1} (|z| - 1) ||(zI - A)^{-1}||_2``, which
is at least 1 for every matrix (its limit as ``|z| -> inf``) and equals 1 for
normal matrices with spectrum in the closed unit disk.

``paper_literal`` evaluates ``(|z| - 1) / ||(A - zI)^{-1}||_2`` over the same
grid. That expression grows without bound in ``|z|``, so its value is only
meaningful relative to the grid (maximum at the outer radius).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .eigen import spectral_radius

MODES = ("standard", "paper_literal")
R_CAP_LOG = math.log(1e4)


class StabilityGateError(ValueError):
    """Kreiss analysis requested for a matrix with spectral radius >= 1."""


def resolvent_objective(a: np.ndarray, z: complex, mode: str = "standard") -> float:
    n = a.shape[0]
    r = abs(z)
    smin = np.linalg.svd(z * np.eye(n) - a, compute_uv=False)[-1]
    if mode == "standard":
        return math.inf if smin == 0.0 else (r - 1.0) / smin
    return (r - 1.0) * smin


def grid_objective(a: np.ndarray, radii, angles, mode: str = "standard") -> np.ndarray:
    """Objective on the polar grid, shape ``(len(radii), len(angles))``."""
    n = a.shape[0]
    zs = np.outer(radii, np.exp(1j * np.asarray(angles)))
    shifted = zs[..., None, None] * np.eye(n) - a
    smin = np.linalg.svd(shifted, compute_uv=False)[..., -1]
    r = np.abs(zs)
    if mode == "standard":
        with np.errstate(divide="ignore"):
            return np.where(smin > 0.0, (r - 1.0) / smin, np.inf)
    return (r - 1.0) * smin


def kreiss_grid(level: int = 0, r_max: float = 4.0, n_radii: int = 33, n_angles: int = 64):
    """Log-spaced radii in ``(1, r_max]`` and uniform angles.

    Grids are nested: every point of ``level`` also belongs to ``level + 1``.
    """
    factor = 2**level
    nr = (n_radii - 1) * factor + 1
    na = n_angles * factor
    # log-spacing of |z| - 1 from 1e-3 (r_max - 1) up to r_max - 1
    span = r_max - 1.0
    radii = 1.0 + span * np.logspace(-3, 0, nr)
    angles = 2.0 * np.pi * np.arange(na) / na
    return radii, angles


def kreiss_constant(a, mode: str = "standard", level: int = 0, refine: bool = True,
                    r_max: float = 4.0, n_radii: int = 33, n_angles: int = 64,
                    check_gate: bool = True) -> float:
    """Grid search followed by local Nelder-Mead refinement from the best grid points.

    The result never falls below the grid maximum (nor below 1 in ``standard``
    mode), so refinement can only raise the estimate.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    a = np.asarray(a, dtype=float)
    if check_gate:
        rho = spectral_radius(a)
        if rho >= 1.0:
            raise StabilityGateError(f"spectral radius {rho:.6g} >= 1; Kreiss analysis needs a stable matrix")
    radii, angles = kreiss_grid(level, r_max, n_radii, n_angles)
    values = grid_objective(a, radii, angles, mode)
    best = float(values.max())
    if mode == "standard":
        best = max(best, 1.0)
    if not refine or not math.isfinite(best):
        return float(best)
    flat = np.argsort(values, axis=None)[::-1][:3]
    for idx in flat:
        i, j = np.unravel_index(idx, values.shape)
        best = max(best, _refine(a, radii[i], angles[j], mode, r_max))
    return float(best)


def _refine(a, r0, th0, mode, r_max) -> float:
    # optimise in (log(|z| - 1), angle) so that |z| > 1 holds automatically
    def neg(x):
        if x[0] > R_CAP_LOG:
            return 0.0  # the |z| -> inf limit (1) is already part of the estimate
        r = 1.0 + math.exp(x[0])
        if mode == "paper_literal" and r > r_max:
            return 0.0
        val = resolvent_objective(a, r * complex(math.cos(x[1]), math.sin(x[1])), mode)
        return -val if math.isfinite(val) else -1e300

    x0 = np.array([math.log(r0 - 1.0), th0])
    res = minimize(neg, x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
    return max(-res.fun, -neg(x0))


@dataclass
class KreissStep:
    t: int
    rho: float
    normality_defect: float
    kreiss: float | None


@dataclass
class KreissReport:
    mode: str
    epsilon: float
    steps: list[KreissStep] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        """Kreiss values with NaN where the gate skipped the step."""
        return np.array([np.nan if s.kreiss is None else s.kreiss for s in self.steps])

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "epsilon": self.epsilon,
            "steps": [{"t": s.t, "rho": s.rho, "normality_defect": s.normality_defect, "kreiss": s.kreiss}
                      for s in self.steps],
        }


def normality_defect(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.linalg.norm(a @ a.T - a.T @ a, "fro"))


def kreiss_report(matrices, mode: str = "standard", epsilon: float = 1e-8, **kw) -> KreissReport:
    """Gate each step: Kreiss value only when ``rho < 1`` and the matrix is non-normal."""
    report = KreissReport(mode, epsilon)
    for t, a in enumerate(matrices):
        rho = spectral_radius(a)
        defect = normality_defect(a)
        value = None
        if rho < 1.0 and defect > epsilon:
            value = kreiss_constant(a, mode=mode, check_gate=False, **kw)
        report.steps.append(KreissStep(t, rho, defect, value))
    return report
