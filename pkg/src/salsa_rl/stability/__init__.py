"""Post-hoc stability diagnostics for sequences of dynamics matrices."""

from .contour import ContourGrid, stability_contour, time_sweep_field
from .eigen import EigenConvergenceError, eigenvalues, hessenberg, spectral_radius
from .floquet import FloquetReport, NoPeriodError, detect_period, floquet, monodromy
from .kreiss import KreissReport, StabilityGateError, kreiss_constant, kreiss_report, normality_defect
from .spectral import (
    STABLE_DAMPED_OSCILLATION, STABLE_NONOSCILLATORY, UNSTABLE, SpectralReport, classify, spectral_report,
    spectral_series,
)

__all__ = [
    "ContourGrid", "stability_contour", "time_sweep_field",
    "EigenConvergenceError", "eigenvalues", "hessenberg", "spectral_radius",
    "FloquetReport", "NoPeriodError", "detect_period", "floquet", "monodromy",
    "KreissReport", "StabilityGateError", "kreiss_constant", "kreiss_report", "normality_defect",
    "STABLE_DAMPED_OSCILLATION", "STABLE_NONOSCILLATORY", "UNSTABLE", "SpectralReport", "classify",
    "spectral_report", "spectral_series",
]
