"""Rayleigh mode data, Wood's anomalies and the periodized kernel spectrum.

The x2-periodized Green's function ``K_h`` (half-height ``h``) is only ever
used through its Fourier coefficients, which are available in closed form.
Multiplying ``K_R`` by a C^3 cutoff ``chi`` that equals one on
``|x2| <= 2 rho`` gives the smoothed kernel ``K_sm`` whose coefficients are
the diagonal of the periodized volume potential.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from tmgrating.spectral import Discretization, indices, position

log = logging.getLogger(__name__)

# Relative tolerance for the m2-window of the kernel convolution.
KERNEL_RTOL = 1e-12
# Absolute tolerance for successive Simpson refinements of chi-hat.
CUTOFF_ATOL = 1e-12
MAX_CUTOFF_PANELS = 2**24
MAX_KERNEL_WINDOW = 2**18


@dataclass(frozen=True)
class WaveParameters:
    """Incident plane wave ``exp(i k (cos(theta) x1 - sin(theta) x2))``."""

    k: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0):
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if not (math.isfinite(self.theta) and 0 < self.theta < math.pi):
            raise ValueError(f"incidence angle must lie in (0, pi), got {self.theta}")

    @property
    def alpha(self) -> float:
        return self.k * math.cos(self.theta)

    @property
    def direction(self) -> tuple[float, float]:
        return math.cos(self.theta), -math.sin(self.theta)


def default_wood_tol(k: float) -> float:
    return 1e-10 * max(1.0, k * k)


def beta_values(j1, k: float, alpha: float) -> np.ndarray:
    """Vectorized ``beta_j = sqrt(k^2 - (j + alpha)^2)`` on the branch ``Im beta >= 0``."""
    d = k * k - (np.asarray(j1, dtype=float) + alpha) ** 2
    return np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))


def beta(j1: int, w: WaveParameters) -> complex:
    """Vertical wavenumber of Rayleigh mode ``j1``."""
    return complex(beta_values(j1, w.k, w.alpha))


def check_wood(w: WaveParameters, tol: float | None = None) -> int | None:
    """Return an order ``j1`` with ``|k^2 - (j1 + alpha)^2| <= tol``, else None.

    Only orders with ``|j1 + alpha| <= k + 1`` are scanned; if several are
    anomalous the one with the smallest ``|j1|`` (then the smaller ``j1``) is
    returned.
    """
    k, alpha = w.k, w.alpha
    if tol is None:
        tol = default_wood_tol(k)
    lo = math.floor(-k - 1 - alpha)
    hi = math.ceil(k + 1 - alpha)
    for j1 in sorted(range(lo, hi + 1), key=lambda j: (abs(j), j)):
        if abs(j1 + alpha) <= k + 1 and abs(k * k - (j1 + alpha) ** 2) <= tol:
            return j1
    return None


def kernel_coeffs(j1, j2, k: float, alpha: float, halfheight: float) -> np.ndarray:
    """Fourier coefficients of the ``2 h``-periodized kernel, vectorized.

    Inside ``|D| <= 1e-10 max(1, k^2)`` the removable singularity is replaced
    by its limit ``i / (4 |j2|) (h / pi)^(3/2)``.
    """
    h = halfheight
    j1, j2 = np.broadcast_arrays(np.asarray(j1), np.asarray(j2))
    lam = j2 * (np.pi / h)
    D = k * k - (j1 + alpha) ** 2 - lam**2
    b = beta_values(j1, k, alpha)
    # cos(j2 pi) exp(i b h) - 1 == expm1(i (b h - |j2| pi)) for integer j2
    num = np.expm1(1j * (b * h - np.abs(j2) * np.pi))
    resonant = np.abs(D) <= default_wood_tol(k)
    if np.any(resonant & (j2 == 0)):
        raise RuntimeError("resonant kernel coefficient with j2 = 0: Wood's anomaly leaked")
    safe_D = np.where(resonant, 1.0, D)
    out = num / safe_D / np.sqrt(4 * np.pi * h)
    if np.any(resonant):
        jr = np.where(resonant, np.abs(j2), 1)
        out = np.where(resonant, 1j / (4 * jr) * (h / np.pi) ** 1.5, out)
    return out


def kernel_coeff(j: tuple[int, int], k: float, alpha: float, halfheight: float) -> complex:
    """Single Fourier coefficient of the periodized kernel ``K_h``."""
    return complex(kernel_coeffs(j[0], j[1], k, alpha, halfheight))


def cutoff(x2, rho: float, R: float):
    """C^3 cutoff: 1 on ``|x2| <= 2 rho``, degree-7 smoothstep down to 0 at ``|x2| = R``.

    The function is 2R-periodic and even.
    """
    if not 2 * rho < R:
        raise ValueError(f"cutoff needs 2*rho < R, got rho={rho}, R={R}")
    x = np.asarray(x2, dtype=float)
    x = np.abs((x + R) % (2 * R) - R)
    # 1 - p(u) == p(1 - u) for the smoothstep; this form keeps the tail near R accurate
    v = 1.0 - np.clip((x - 2 * rho) / (R - 2 * rho), 0.0, 1.0)
    out = v**4 * (35 - 84 * v + 70 * v**2 - 20 * v**3)
    return float(out) if out.ndim == 0 else out


def _simpson_cutoff_coeffs(rho: float, R: float, jmax: int, panels: int) -> np.ndarray:
    # Composite Simpson on [-R, R] for a periodic integrand: (4 T_h - T_2h) / 3
    # with both trapezoid sums evaluated for all frequencies by one FFT each.
    x = -R + (2 * R / panels) * np.arange(panels)
    f = cutoff(x, rho, R)
    n = np.arange(-jmax, jmax + 1)
    sign = np.where(n % 2, -1.0, 1.0)  # exp(i n pi) from the shift x -> x + R

    def trap(vals, P):
        F = scipy.fft.fft(vals)
        return (2 * R / P) * sign * F[n % P]

    S = (4 * trap(f, panels) - trap(f[::2], panels // 2)) / 3
    return S.real / math.sqrt(4 * math.pi * R)


@functools.lru_cache(maxsize=32)
def _cutoff_coeffs_cached(rho: float, R: float, jmax: int) -> np.ndarray:
    panels = 1 << max(12, int(math.ceil(math.log2(16 * jmax + 16))))
    prev = _simpson_cutoff_coeffs(rho, R, jmax, panels)
    while True:
        panels *= 2
        if panels > MAX_CUTOFF_PANELS:
            raise RuntimeError(
                f"cutoff coefficients did not converge with {MAX_CUTOFF_PANELS} panels"
            )
        cur = _simpson_cutoff_coeffs(rho, R, jmax, panels)
        if np.max(np.abs(cur - prev)) <= CUTOFF_ATOL:
            cur.setflags(write=False)
            return cur
        prev = cur


def cutoff_coeffs(disc: Discretization, jmax: int) -> np.ndarray:
    """``chi^(j2) = (4 pi R)^(-1/2) int_{-R}^{R} exp(-i j2 pi x2 / R) chi(x2) dx2``.

    Returns a real array of length ``2 jmax + 1``; entry ``jmax + j2`` holds
    ``chi^(j2)``. Panels are doubled until successive values agree to 1e-12.
    """
    if jmax < disc.N:
        raise ValueError(f"jmax must be >= N, got jmax={jmax}, N={disc.N}")
    return _cutoff_coeffs_cached(float(disc.rho), float(disc.R), int(jmax))


@dataclass(frozen=True)
class KernelSpectrum:
    """Coefficients of the smoothed kernel on ``Z^2_N`` (natural order)."""

    disc: Discretization
    k: float
    alpha: float
    coeffs: np.ndarray = field(repr=False)
    window: int = 0

    def __getitem__(self, j: tuple[int, int]) -> complex:
        N = self.disc.N
        return complex(self.coeffs[position(j[0], N), position(j[1], N)])


def _window_sum(disc: Discretization, k: float, alpha: float, j1: np.ndarray,
                m2: np.ndarray, chi: np.ndarray, J: int) -> np.ndarray:
    j2 = indices(disc.N)
    KR = kernel_coeffs(j1[:, None], m2[None, :], k, alpha, disc.R)
    toeplitz = chi[J + j2[None, :] - m2[:, None]]
    return KR @ toeplitz


def smoothed_kernel_rows(disc: Discretization, w: WaveParameters, j1) -> tuple[np.ndarray, int]:
    """Rows ``K_sm^(j1, .)`` over ``j2`` in ``Z_N`` for the requested ``j1`` values.

    The m2-window ``|m2| <= M`` is doubled; each appended tail is summed
    directly and the loop stops once no entry changes by more than 1e-12
    relative. Returns the rows (natural j2 order) and the final window.
    """
    N, R = disc.N, disc.R
    j1 = np.atleast_1d(np.asarray(j1, dtype=int))
    k, alpha = float(w.k), float(w.alpha)
    if not disc.smooth_cutoff:
        return kernel_coeffs(j1[:, None], indices(N)[None, :], k, alpha, R), 0
    # chi-hat is a 1-D coefficient; the x1-integral of the 2-D product adds 2 pi.
    scale = 2 * np.pi / math.sqrt(4 * math.pi * R)
    M = max(N, 32)
    J = 8 * M + N
    chi = cutoff_coeffs(disc, J)
    total = _window_sum(disc, k, alpha, j1, np.arange(-M, M + 1), chi, J)
    while True:
        if 2 * M + N // 2 > J:
            J = 8 * M + N
            if J > MAX_KERNEL_WINDOW:
                raise RuntimeError(
                    f"kernel convolution tail did not converge by window {M}"
                )
            chi = cutoff_coeffs(disc, J)
        m2 = np.concatenate([np.arange(-2 * M, -M), np.arange(M + 1, 2 * M + 1)])
        tail = _window_sum(disc, k, alpha, j1, m2, chi, J)
        total = total + tail
        M *= 2
        rel = np.abs(tail) / np.maximum(np.abs(total), np.finfo(float).tiny)
        if np.max(rel) <= KERNEL_RTOL:
            return total * scale, M
        log.debug("kernel window %d: worst relative tail %.2e", M, np.max(rel))


@functools.lru_cache(maxsize=None)
def _warn_unsmoothed(R: float, rho: float) -> None:
    log.warning("kernel used without cutoff (R=%g, rho=%g): valid only while 2 rho <= R", R, rho)


@functools.lru_cache(maxsize=16)
def _spectrum_cached(disc: Discretization, w: WaveParameters):
    N = disc.N
    if not disc.smooth_cutoff:
        _warn_unsmoothed(disc.R, disc.rho)
    j1 = indices(N)
    rows, window = [], 0
    chunk = max(1, 2**22 // (N * max(N, 32)))
    for start in range(0, N, chunk):
        r, M = smoothed_kernel_rows(disc, w, j1[start:start + chunk])
        rows.append(r)
        window = max(window, M)
    coeffs = np.concatenate(rows, axis=0)
    coeffs.setflags(write=False)
    return coeffs, window


def smoothed_kernel_spectrum(disc: Discretization, w: WaveParameters) -> KernelSpectrum:
    """Coefficients ``K_sm^(j)`` for ``j`` in ``Z^2_N``.

    See :func:`smoothed_kernel_rows` for the truncation of the m2-sum.
    """
    j1 = check_wood(w)
    if j1 is not None:
        raise ValueError(f"Wood's anomaly at order j1={j1}: kernel coefficients undefined")
    coeffs, M = _spectrum_cached(disc, w)
    return KernelSpectrum(disc, w.k, w.alpha, coeffs, M)
