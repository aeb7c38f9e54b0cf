"""Matrix-free discrete operator and GMRES solve.

The discrete equation on ``T_N`` is

    u_N - L_per(P_N(q grad u_N)) = L_per(P_N(q grad u_i)).

Products ``q d_l u_N`` are formed on the 3N grid, where the product of the
band-limited contrast ``q_2N`` with ``d_l u_N`` is resolved exactly; ``L_per``
is diagonal in the trigonometric basis.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from tmgrating.contrast import ContrastSpec, ContrastSpectrum, contrast_coeffs, contrast_grid_values
from tmgrating.kernel import KernelSpectrum, WaveParameters, check_wood, smoothed_kernel_spectrum
from tmgrating.spectral import (
    Discretization,
    GridValues,
    SpectralField,
    derivative_multipliers,
    embed,
    forward_dft,
    grid_nodes,
    inverse_dft,
    restrict,
)

log = logging.getLogger(__name__)

# Memory allowed for the Krylov basis before "full" GMRES falls back to restarts.
KRYLOV_MEMORY_BYTES = 1 << 30


@dataclass(frozen=True)
class ProblemSetup:
    """Everything needed to apply the discrete operator for one incident wave."""

    w: WaveParameters
    disc: Discretization
    qhat: ContrastSpectrum
    ksm: KernelSpectrum
    qgrid: np.ndarray = field(repr=False)

    def __post_init__(self):
        N = self.disc.N
        if self.qhat.M != 2 * N:
            raise ValueError(f"contrast coefficients must cover Z^2_{2 * N}, got Z^2_{self.qhat.M}")
        if self.ksm.disc != self.disc or self.ksm.alpha != self.w.alpha or self.ksm.k != self.w.k:
            raise ValueError("kernel spectrum built for a different discretization or wave")
        if self.qgrid.shape != (3 * N, 3 * N):
            raise ValueError("contrast grid must live on the 3N grid")

    @property
    def alpha(self) -> float:
        return self.w.alpha


def build_setup(
    w: WaveParameters,
    disc: Discretization,
    spec: ContrastSpec | None = None,
    qhat: ContrastSpectrum | None = None,
) -> ProblemSetup:
    """Precompute kernel spectrum and contrast data; refuses Wood's anomalies."""
    j1 = check_wood(w)
    if j1 is not None:
        raise ValueError(f"Wood's anomaly at order j1={j1}")
    if qhat is None:
        if spec is None:
            raise ValueError("need a contrast spec or its coefficients")
        qhat = contrast_coeffs(spec, 2 * disc.N, disc)
    ksm = smoothed_kernel_spectrum(disc, w)
    qgrid = contrast_grid_values(qhat, 3 * disc.N).values
    return ProblemSetup(w, disc, qhat, ksm, qgrid)


def incident_gradient_samples(
    w: WaveParameters, disc: Discretization, M: int, amplitude: complex = 1.0
) -> tuple[GridValues, GridValues]:
    """Exact samples of ``grad u_i`` on the M grid."""
    gdisc = disc.with_N(M)
    x1, x2 = grid_nodes(gdisc)
    d1, d2 = w.direction
    ui = amplitude * np.exp(1j * w.k * (d1 * x1 + d2 * x2))
    return (
        GridValues(gdisc, w.alpha, 1j * w.k * d1 * ui),
        GridValues(gdisc, w.alpha, 1j * w.k * d2 * ui),
    )


def _contrast_grid(qhat: ContrastSpectrum, M: int, qgrid: np.ndarray | None) -> np.ndarray:
    if qgrid is not None:
        return qgrid
    return contrast_grid_values(qhat, M).values


def multiply_contrast_gradient(
    u: SpectralField, qhat: ContrastSpectrum, qgrid: np.ndarray | None = None
) -> tuple[SpectralField, SpectralField]:
    """Coefficients of ``P_N(q d_1 u)`` and ``P_N(q d_2 u)`` via the 3N grid.

    ``qgrid`` may carry precomputed 3N-grid values of ``q_2N``.
    """
    N = u.N
    if qhat.M != 2 * N:
        raise ValueError(f"contrast must cover Z^2_{2 * N}, got Z^2_{qhat.M}")
    q = _contrast_grid(qhat, 3 * N, qgrid)
    w1, w2 = derivative_multipliers(N, u.alpha, u.disc.R)
    out = []
    for wl in (w1, w2):
        du = inverse_dft(embed(u.with_coeffs(wl * u.coeffs), 3 * N))
        prod = GridValues(du.disc, u.alpha, q * du.values)
        out.append(restrict(forward_dft(prod), N))
    return out[0], out[1]


def apply_L(f1: SpectralField, f2: SpectralField, ksm: KernelSpectrum) -> SpectralField:
    """Diagonal action of the periodized potential on a vector field."""
    if f1.N != f2.N or f1.N != ksm.disc.N:
        raise ValueError("fields and kernel spectrum must share the index set")
    w1, w2 = derivative_multipliers(f1.N, f1.alpha, f1.disc.R)
    scale = math.sqrt(4 * math.pi * f1.disc.R)
    return f1.with_coeffs(scale * ksm.coeffs * (w1 * f1.coeffs + w2 * f2.coeffs))


def apply_operator(u: SpectralField, setup: ProblemSetup) -> SpectralField:
    """``u - L_per(P_N(q grad u))``."""
    f1, f2 = multiply_contrast_gradient(u, setup.qhat, setup.qgrid)
    return u - apply_L(f1, f2, setup.ksm)


def assemble_rhs(setup: ProblemSetup, amplitude: complex = 1.0) -> SpectralField:
    """``L_per(P_N(q grad u_i))`` with the product formed on the 3N grid."""
    N = setup.disc.N
    g1, g2 = incident_gradient_samples(setup.w, setup.disc, 3 * N, amplitude)
    f = [
        restrict(forward_dft(GridValues(g.disc, g.alpha, setup.qgrid * g.values)), N)
        for g in (g1, g2)
    ]
    return apply_L(f[0], f[1], setup.ksm)


@dataclass
class SolveReport:
    solution: SpectralField
    iterations: int
    residual_history: list[float]
    wall_time: float
    rhs_norm: float
    converged: bool = True
    final_residual: float = 0.0


def as_linear_operator(setup: ProblemSetup) -> spla.LinearOperator:
    N = setup.disc.N
    template = SpectralField.zeros(setup.disc, setup.alpha)

    def matvec(x):
        u = template.with_coeffs(np.reshape(x, (N, N)))
        return apply_operator(u, setup).coeffs.ravel()

    return spla.LinearOperator((N * N, N * N), matvec=matvec, dtype=complex)


def gmres_solve(
    setup: ProblemSetup,
    tol: float = 1e-5,
    maxit: int = 500,
    restart: int | None = None,
    amplitude: complex = 1.0,
) -> SolveReport:
    """Solve the discrete equation with unpreconditioned GMRES from a zero start.

    Full GMRES unless ``restart`` is given or the Krylov basis would exceed
    ``KRYLOV_MEMORY_BYTES`` (the cycle length is then capped, and a note is
    logged). Stops once ``|r_k| / |r_0| <= tol``.
    Non-convergence is reported through ``converged=False``, not raised.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    t0 = time.perf_counter()
    rhs = assemble_rhs(setup, amplitude)
    b = rhs.coeffs.ravel()
    bnorm = float(np.linalg.norm(b))
    history = [1.0]
    if bnorm == 0:
        return SolveReport(rhs.with_coeffs(np.zeros_like(rhs.coeffs)), 0, history,
                           time.perf_counter() - t0, 0.0, True, 0.0)

    m = maxit if restart is None else min(restart, maxit)
    budget = max(20, KRYLOV_MEMORY_BYTES // (16 * b.size) - 1)
    if m > budget:
        log.info("Krylov basis capped at %d vectors (restarted GMRES)", budget)
        m = budget
    outer = max(1, math.ceil(maxit / m))
    A = as_linear_operator(setup)
    x, info = spla.gmres(
        A, b, x0=np.zeros_like(b), rtol=tol, atol=0.0, restart=m, maxiter=outer,
        callback=history.append, callback_type="pr_norm",
    )
    final = float(np.linalg.norm(b - A.matvec(x))) / bnorm
    sol = rhs.with_coeffs(np.reshape(x, rhs.coeffs.shape))
    report = SolveReport(sol, len(history) - 1, history, time.perf_counter() - t0, bnorm,
                         info == 0, final)
    if info != 0:
        log.warning("GMRES stopped after %d iterations at relative residual %.2e",
                    report.iterations, final)
    return report
