"""Spectral Galerkin solver for TM scattering from periodic dielectric gratings.

The periodized volume integral equation ``u - L_per(q grad u) = L_per(q grad u_i)``
is discretized in alpha-quasi-periodic trigonometric polynomials, applied
matrix-free with FFTs and solved with unpreconditioned GMRES.
"""

from tmgrating.spectral import (
    Discretization,
    GridValues,
    SpectralField,
    derivative_multiplier,
    embed,
    forward_dft,
    inverse_dft,
    restrict,
    sobolev_norm,
)
from tmgrating.kernel import (
    KernelSpectrum,
    WaveParameters,
    beta,
    check_wood,
    cutoff,
    cutoff_coeffs,
    kernel_coeff,
    smoothed_kernel_spectrum,
)
from tmgrating.contrast import (
    Blocks,
    BoundaryConstant,
    ContrastSpectrum,
    SeparableRect,
    SinusoidStrip,
    Strip,
    contrast_coeffs,
    contrast_grid_values,
)
from tmgrating.solver import (
    ProblemSetup,
    SolveReport,
    apply_L,
    apply_operator,
    assemble_rhs,
    build_setup,
    gmres_solve,
    incident_gradient_samples,
    multiply_contrast_gradient,
)
from tmgrating.analysis import (
    EnergyReport,
    RayleighData,
    energies,
    estimate_order,
    rayleigh_coeffs,
    rayleigh_data,
    relative_error,
)

__version__ = "0.1.0"
