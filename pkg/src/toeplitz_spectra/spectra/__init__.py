"""Spectral sets, half-line kernels, finite sections and diagnostics."""
from .finite import (
    FiniteSpectrum,
    Quasimode,
    attraction_distance,
    finite_spectrum,
    local_radius,
    multiscale_eigenvalues,
    quasimode,
)
from .halfline import (
    ZeroModeCertificate,
    chiral_windings,
    halfline_kernel_dims,
    sector_roots,
    winding,
    winding_defect,
    winding_integral,
    zero_mode_certificate,
)
from .report import HypothesisReport, hypothesis_report
from .sets import (
    LambdaCloud,
    Outlier,
    SigmaSamples,
    SpectralSets,
    brillouin,
    gamma_find,
    lambda_scan,
    sigma_samples,
    spectral_sets,
)

__all__ = [
    "FiniteSpectrum", "Quasimode", "attraction_distance", "finite_spectrum", "local_radius",
    "multiscale_eigenvalues", "quasimode", "HypothesisReport", "hypothesis_report",
    "ZeroModeCertificate", "chiral_windings", "halfline_kernel_dims", "sector_roots", "winding",
    "winding_defect", "winding_integral", "zero_mode_certificate",
    "LambdaCloud", "Outlier", "SigmaSamples", "SpectralSets", "brillouin", "gamma_find",
    "lambda_scan", "sigma_samples", "spectral_sets",
]
