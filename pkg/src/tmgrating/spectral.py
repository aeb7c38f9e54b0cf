"""Index sets, the alpha-quasi-periodic DFT pair and Fourier-side utilities.

Basis functions on ``Omega_R = (-pi, pi) x (-R, R)`` are

    phi_j(x) = (4 pi R)^(-1/2) exp(i (j1 + alpha) x1 + i j2 pi x2 / R),

for ``j`` in ``Z^2_N = {-N/2 < j1, j2 <= N/2}``. They are orthonormal in
``L^2(Omega_R)``, so the Euclidean norm of a coefficient array is the
``L^2`` norm of the represented function.

Storage convention
------------------
Coefficient arrays are ``(N, N)`` complex arrays in FFT-natural order: array
position ``n`` along an axis holds index ``j = n`` for ``n <= N/2`` and
``j = n - N`` otherwise (see :func:`indices`). Grid values use the same
layout for the grid index ``l``, with nodes ``x(l) = (2 pi l1 / N, 2 R l2 / N)``.
All public functions that take or return an index speak ``Z^2_N`` values.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft


@dataclass(frozen=True)
class Discretization:
    """Truncation and box geometry.

    Parameters
    ----------
    N : int
        Even truncation parameter per dimension, ``N >= 4``.
    R : float
        Half-height of the computational box; the x2-period is ``2R``.
    rho : float
        Half-height of the contrast box; ``supp q`` lies in ``|x2| <= rho``.
    margin : float
        Relative safety margin in ``2 rho < R (1 - margin)``.
    smooth_cutoff : bool
        If False the kernel is not smoothed (cutoff taken as 1). This only
        requires ``2 rho <= R`` and covers contrasts that reach ``|x2| = R/2``.
    """

    N: int
    R: float
    rho: float
    margin: float = 0.0
    smooth_cutoff: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 4, got {self.N}")
        if not (np.isfinite(self.R) and self.R > 0):
            raise ValueError(f"R must be positive, got {self.R}")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not 0 <= self.margin < 1:
            raise ValueError(f"margin must lie in [0, 1), got {self.margin}")
        if self.smooth_cutoff:
            if not 2 * self.rho < self.R * (1 - self.margin):
                raise ValueError(
                    f"need 2*rho < R*(1 - margin); got rho={self.rho}, R={self.R}, "
                    f"margin={self.margin}"
                )
        elif not 2 * self.rho <= self.R:
            raise ValueError(f"need 2*rho <= R; got rho={self.rho}, R={self.R}")

    def with_N(self, N: int) -> "Discretization":
        return dataclasses.replace(self, N=N)

    @property
    def spacing(self) -> tuple[float, float]:
        """Grid spacing ``(2 pi / N, 2 R / N)``."""
        return 2 * np.pi / self.N, 2 * self.R / self.N


def _check_even(N: int) -> None:
    if int(N) != N or N < 2 or N % 2:
        raise ValueError(f"size must be an even positive integer, got {N}")


def indices(N: int) -> np.ndarray:
    """Signed indices in ``(-N/2, N/2]`` for the natural FFT positions ``0..N-1``."""
    _check_even(N)
    n = np.arange(N)
    return np.where(n <= N // 2, n, n - N)


def index_grid(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Broadcastable ``(j1, j2)`` index arrays of shape ``(N, 1)`` and ``(1, N)``."""
    j = indices(N)
    return j[:, None], j[None, :]


def position(j: int, N: int) -> int:
    """Array position of the signed index ``j`` in ``Z_N``."""
    if not -N // 2 < j <= N // 2:
        raise IndexError(f"index {j} outside Z_{N}")
    return j % N


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of an alpha-quasi-periodic, 2R-periodic function on ``Z^2_N``."""

    disc: Discretization
    alpha: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.disc.N, self.disc.N):
            raise ValueError(
                f"coefficient array has shape {c.shape}, expected {(self.disc.N,) * 2}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.disc.N

    @classmethod
    def zeros(cls, disc: Discretization, alpha: float) -> "SpectralField":
        return cls(disc, alpha, np.zeros((disc.N, disc.N), dtype=complex))

    @classmethod
    def unit(cls, disc: Discretization, alpha: float, j: tuple[int, int]) -> "SpectralField":
        c = np.zeros((disc.N, disc.N), dtype=complex)
        c[position(j[0], disc.N), position(j[1], disc.N)] = 1.0
        return cls(disc, alpha, c)

    def __getitem__(self, j: tuple[int, int]) -> complex:
        return complex(self.coeffs[position(j[0], self.N), position(j[1], self.N)])

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.disc, self.alpha, coeffs)

    def _check_compatible(self, other: "SpectralField") -> None:
        if other.N != self.N or other.disc.R != self.disc.R or other.alpha != self.alpha:
            raise ValueError("fields live on different index sets or bases")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return self.with_coeffs(scalar * self.coeffs)

    __rmul__ = __mul__

    def vdot(self, other: "SpectralField") -> complex:
        """Coefficient inner product ``sum conj(self) * other``."""
        self._check_compatible(other)
        return complex(np.vdot(self.coeffs, other.coeffs))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class GridValues:
    """Samples on the nodes ``x(l) = (2 pi l1 / N, 2 R l2 / N)``, ``l`` in ``Z^2_N``."""

    disc: Discretization
    alpha: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.disc.N, self.disc.N):
            raise ValueError(
                f"grid array has shape {v.shape}, expected {(self.disc.N,) * 2}"
            )
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.disc.N

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return grid_nodes(self.disc)


def grid_nodes(disc: Discretization) -> tuple[np.ndarray, np.ndarray]:
    """Node coordinates ``(x1, x2)`` as broadcastable ``(N, 1)``/``(1, N)`` arrays."""
    l1, l2 = index_grid(disc.N)
    h1, h2 = disc.spacing
    return l1 * h1, l2 * h2


def _alpha_twist(N: int, alpha: float) -> np.ndarray:
    l1 = indices(N)
    return np.exp(2j * np.pi * alpha * l1 / N)[:, None]


def forward_dft(g: GridValues) -> SpectralField:
    """alpha-quasi-periodic DFT from grid samples to coefficients on ``Z^2_N``.

    Exact for members of ``T_N``. The alpha phase is removed from the samples
    before a standard 2-D FFT.
    """
    N, R = g.N, g.disc.R
    twisted = g.values * np.conj(_alpha_twist(N, g.alpha))
    coeffs = scipy.fft.fft2(twisted) * (np.sqrt(4 * np.pi * R) / N**2)
    return SpectralField(g.disc, g.alpha, coeffs)


def inverse_dft(u: SpectralField) -> GridValues:
    """Evaluate the trigonometric polynomial ``u`` at the grid nodes."""
    N, R = u.N, u.disc.R
    values = scipy.fft.ifft2(u.coeffs) * (N**2 / np.sqrt(4 * np.pi * R))
    return GridValues(u.disc, u.alpha, values * _alpha_twist(N, u.alpha))


def _copy_block(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Copy coefficients of the smaller natural-order array into the larger one."""
    small = min(src.shape[0], dst.shape[0])
    pos = indices(small) % src.shape[0]
    tgt = indices(small) % dst.shape[0]
    dst[np.ix_(tgt, tgt)] = src[np.ix_(pos, pos)]
    return dst


def embed(u: SpectralField, M: int) -> SpectralField:
    """Zero-pad ``u`` from ``Z^2_N`` to ``Z^2_M`` (``M > N``)."""
    _check_even(M)
    if M <= u.N:
        raise ValueError(f"embed needs M > N, got M={M}, N={u.N}")
    out = np.zeros((M, M), dtype=complex)
    return SpectralField(u.disc.with_N(M), u.alpha, _copy_block(u.coeffs, out))


def restrict(u: SpectralField, M: int) -> SpectralField:
    """Keep the coefficients of ``u`` on ``Z^2_M`` (``M < N``)."""
    _check_even(M)
    if M >= u.N:
        raise ValueError(f"restrict needs M < N, got M={M}, N={u.N}")
    j = indices(M) % u.N
    return SpectralField(u.disc.with_N(M), u.alpha, u.coeffs[np.ix_(j, j)])


def resize(u: SpectralField, M: int) -> SpectralField:
    """Embed or restrict to ``Z^2_M``; identity if ``M == N``."""
    if M == u.N:
        return u
    return embed(u, M) if M > u.N else restrict(u, M)


def derivative_multiplier(j: tuple[int, int], alpha: float, R: float) -> tuple[complex, complex]:
    """Multipliers ``(i (j1 + alpha), i j2 pi / R)`` turning ``u^(j)`` into ``(d_l u)^(j)``."""
    return 1j * (j[0] + alpha), 1j * j[1] * np.pi / R


def derivative_multipliers(N: int, alpha: float, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`derivative_multiplier` over ``Z^2_N`` (broadcastable)."""
    j1, j2 = index_grid(N)
    return 1j * (j1 + alpha), 1j * j2 * (np.pi / R)


def sobolev_weights(N: int, s: float) -> np.ndarray:
    j1, j2 = index_grid(N)
    return (1.0 + j1**2 + j2**2) ** s


def sobolev_norm(u: SpectralField, s: float) -> float:
    """``H^s_per(Omega_R)`` norm ``(sum (1 + |j|^2)^s |u^(j)|^2)^(1/2)``."""
    if s < 0:
        raise ValueError(f"Sobolev index must be non-negative, got {s}")
    w = sobolev_weights(u.N, s)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def write_coeffs_csv(u: SpectralField, path: str | Path) -> None:
    """Write ``j1,j2,re,im`` rows, lexicographic in ``(j1, j2)``."""
    j = np.sort(indices(u.N))
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j1", "j2", "re", "im"])
        for j1 in j:
            for j2 in j:
                c = u[int(j1), int(j2)]
                w.writerow([int(j1), int(j2), repr(c.real), repr(c.imag)])


def read_coeffs_csv(path: str | Path, disc: Discretization, alpha: float) -> SpectralField:
    """Read a file written by :func:`write_coeffs_csv` onto ``disc``."""
    N = disc.N
    c = np.zeros((N, N), dtype=complex)
    seen = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["j1", "j2", "re", "im"]:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for row in reader:
            j1, j2 = int(row["j1"]), int(row["j2"])
            c[position(j1, N), position(j2, N)] = float(row["re"]) + 1j * float(row["im"])
            seen += 1
    if seen != N * N:
        raise ValueError(f"expected {N * N} rows, found {seen}")
    return SpectralField(disc, alpha, c)
