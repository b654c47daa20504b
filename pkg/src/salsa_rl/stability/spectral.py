"""Per-step local stability classification from the eigenvalues of A_t."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import eigenvalues

IMAG_TOL = 1e-9

STABLE_NONOSCILLATORY = "stable_nonoscillatory"
STABLE_DAMPED_OSCILLATION = "stable_damped_oscillation"
UNSTABLE = "unstable"
CLASSES = (STABLE_NONOSCILLATORY, STABLE_DAMPED_OSCILLATION, UNSTABLE)


@dataclass
class SpectralReport:
    eigenvalues: list[complex]
    rho: float
    im_max: float
    classification: str
    strict: bool = False
    # eigenvalues of the one-step propagator I + A, kept for comparison only
    propagator_eigenvalues: list[complex] = field(default_factory=list, repr=False)

    @property
    def propagator_rho(self) -> float:
        return max((abs(v) for v in self.propagator_eigenvalues), default=0.0)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[v.real, v.imag] for v in self.eigenvalues],
            "rho": self.rho,
            "im_max": self.im_max,
            "classification": self.classification,
            "strict": self.strict,
            "propagator_eigenvalues": [[v.real, v.imag] for v in self.propagator_eigenvalues],
        }


def classify(rho: float, im_max: float, strict: bool = False, imag_tol: float = IMAG_TOL) -> str:
    """Three-way class; ``rho == 1`` counts as stable unless ``strict``."""
    unstable = rho >= 1.0 if strict else rho > 1.0
    if unstable:
        return UNSTABLE
    return STABLE_DAMPED_OSCILLATION if im_max > imag_tol else STABLE_NONOSCILLATORY


def spectral_report(a, strict: bool = False, imag_tol: float = IMAG_TOL) -> SpectralReport:
    a = np.asarray(a, dtype=float)
    eigs = eigenvalues(a)
    rho = max((abs(v) for v in eigs), default=0.0)
    im_max = max((abs(v.imag) for v in eigs), default=0.0)
    prop = eigenvalues(np.eye(len(a)) + a)
    return SpectralReport(eigs, rho, im_max, classify(rho, im_max, strict, imag_tol), strict, prop)


def rho_and_im(a) -> tuple[float, float]:
    """Spectral radius and largest |Im(lambda)| of one matrix."""
    eigs = eigenvalues(a)
    return max(abs(v) for v in eigs), max(abs(v.imag) for v in eigs)


def spectral_series(matrices) -> tuple[np.ndarray, np.ndarray]:
    """``(rho, im_max)`` arrays for a sequence of matrices."""
    pairs = [rho_and_im(m) for m in matrices]
    if not pairs:
        return np.zeros(0), np.zeros(0)
    rho, im = zip(*pairs)
    return np.array(rho), np.array(im)
