"""Material contrasts ``q = 1/eps_r - 1`` and their Fourier coefficients.

Coefficients are taken in the plain periodic basis of ``Omega_R`` (no alpha
phase; ``q`` is 2pi-periodic in x1):

    q^(j) = (4 pi R)^(-1/2) int_{Omega_R} q(x) exp(-i j1 x1 - i j2 pi x2 / R) dx.

Piecewise constant rectangles and separable profiles are integrated in closed
form. Curved inclusions are reduced to 1-D integrals with Green's formula and
evaluated with composite Simpson, doubling the panel count until the
coefficients settle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from tmgrating.spectral import Discretization, GridValues, SpectralField, index_grid, indices, inverse_dft, resize

log = logging.getLogger(__name__)

SIMPSON_PANELS = 2048
SIMPSON_MAX_PANELS = 2**17
SIMPSON_ATOL = 1e-10
# columns of t-samples handled per matrix product
_CHUNK = 2048


def simpson_rule(a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Simpson with an even number of panels."""
    if panels < 2 or panels % 2:
        raise ValueError(f"Simpson needs an even panel count, got {panels}")
    t = np.linspace(a, b, panels + 1)
    w = np.full(panels + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return t, w * ((b - a) / (3 * panels))


def _periodic_simpson(panels: int) -> tuple[np.ndarray, np.ndarray]:
    # endpoints of [0, 2 pi] coincide for periodic integrands; merge them
    t, w = simpson_rule(0.0, 2 * np.pi, panels)
    w = w[:-1].copy()
    w[0] *= 2
    return t[:-1], w


def interval_exp(a: float, b: float, lam) -> np.ndarray:
    """``int_a^b exp(-i lam x) dx`` for an array of frequencies."""
    lam = np.asarray(lam, dtype=float)
    safe = np.where(lam == 0, 1.0, lam)
    val = (np.exp(-1j * safe * a) - np.exp(-1j * safe * b)) / (1j * safe)
    return np.where(lam == 0, b - a, val)


def poly_exp(coeffs, a: float, b: float, lam) -> np.ndarray:
    """``int_a^b p(x) exp(-i lam x) dx`` with ``p(x) = sum_p coeffs[p] x^p``."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(lam.shape, dtype=complex)
    zero = lam == 0
    s = -1j * np.where(zero, 1.0, lam)
    for p, c in enumerate(coeffs):
        if c == 0:
            continue
        # int x^p e^{sx} = e^{sx} sum_k (-1)^k p!/(p-k)! x^(p-k) / s^(k+1)
        def F(x):
            acc = np.zeros(lam.shape, dtype=complex)
            for k in range(p + 1):
                acc += (-1) ** k * math.perm(p, k) * x ** (p - k) / s ** (k + 1)
            return np.exp(s * x) * acc

        val = F(b) - F(a)
        out += c * np.where(zero, (b ** (p + 1) - a ** (p + 1)) / (p + 1), val)
    return out


def _adaptive_simpson(evaluate: Callable[[int], np.ndarray], what: str) -> np.ndarray:
    panels = SIMPSON_PANELS
    prev = evaluate(panels)
    while True:
        panels *= 2
        if panels > SIMPSON_MAX_PANELS:
            raise RuntimeError(
                f"{what}: Simpson quadrature did not converge within {SIMPSON_MAX_PANELS} panels"
            )
        cur = evaluate(panels)
        if np.max(np.abs(cur - prev)) <= SIMPSON_ATOL:
            return cur
        prev = cur


# -- contrast families -------------------------------------------------------


@dataclass(frozen=True)
class Strip:
    """``q = q0`` on ``(-pi, pi) x (-a, a)``."""

    q0: float
    a: float

    def extent(self) -> tuple[float, float, float]:
        return -np.pi, np.pi, self.a

    def value(self, x1, x2):
        x1, x2 = np.broadcast_arrays(x1, x2)
        return np.where(np.abs(x2) < self.a, self.q0, 0.0)

    def integrals(self, M: int, R: float) -> np.ndarray:
        j1, j2 = index_grid(M)
        I1 = np.where(j1 == 0, 2 * np.pi, 0.0)
        return self.q0 * I1 * interval_exp(-self.a, self.a, j2 * np.pi / R)


@dataclass(frozen=True)
class Blocks:
    """Sum of constants on axis-aligned rectangles ``(x1a, x1b, x2a, x2b)``.

    Values add where rectangles overlap.
    """

    blocks: tuple[tuple[tuple[float, float, float, float], float], ...]

    def __post_init__(self):
        blocks = tuple((tuple(float(c) for c in rect), float(v)) for rect, v in self.blocks)
        for (x1a, x1b, x2a, x2b), _ in blocks:
            if not (x1a < x1b and x2a < x2b):
                raise ValueError(f"degenerate rectangle {(x1a, x1b, x2a, x2b)}")
        object.__setattr__(self, "blocks", blocks)

    def extent(self) -> tuple[float, float, float]:
        x1 = [c for (r, _) in self.blocks for c in r[:2]]
        x2 = [abs(c) for (r, _) in self.blocks for c in r[2:]]
        return min(x1), max(x1), max(x2)

    def value(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        out = np.zeros(x1.shape)
        for (x1a, x1b, x2a, x2b), v in self.blocks:
            out += v * ((x1 > x1a) & (x1 < x1b) & (x2 > x2a) & (x2 < x2b))
        return out

    def integrals(self, M: int, R: float) -> np.ndarray:
        j1, j2 = index_grid(M)
        out = np.zeros((M, M), dtype=complex)
        for (x1a, x1b, x2a, x2b), v in self.blocks:
            out += v * interval_exp(x1a, x1b, j1) * interval_exp(x2a, x2b, j2 * np.pi / R)
        return out


@dataclass(frozen=True)
class BoundaryConstant:
    """``q = q0`` inside a closed curve ``t -> z(t)``, ``t`` in ``[0, 2 pi]``.

    ``z`` and its derivative ``dz`` map an array of parameters to a pair of
    arrays. The curve must be positively oriented and lie in one period.
    """

    q0: float
    z: Callable = field(compare=False)
    dz: Callable = field(compare=False)
    name: str = "curve"

    def _samples(self, n: int = 4096):
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return self.z(t)

    def extent(self) -> tuple[float, float, float]:
        z1, z2 = self._samples()
        return float(z1.min()), float(z1.max()), float(np.abs(z2).max())

    def area(self) -> float:
        """Enclosed area from ``int z1 z2' dt`` (Simpson, periodic)."""
        t, w = _periodic_simpson(SIMPSON_PANELS)
        z1, _ = self.z(t)
        _, d2 = self.dz(t)
        return float(np.sum(w * z1 * d2))

    def value(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        z1, z2 = self._samples()
        inside = np.zeros(x1.shape, dtype=bool)
        # even-odd ray casting against the sampled polygon
        for a1, a2, b1, b2 in zip(z1, z2, np.roll(z1, -1), np.roll(z2, -1)):
            crosses = (a2 > x2) != (b2 > x2)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = a1 + (x2 - a2) * (b1 - a1) / (b2 - a2)
            inside ^= crosses & (x1 < xc)
        return np.where(inside, self.q0, 0.0)

    def _simpson(self, M: int, R: float, panels: int) -> np.ndarray:
        j = indices(M)
        lam = j * np.pi / R
        t, w = _periodic_simpson(panels)
        G = np.zeros((M, M), dtype=complex)  # x2-form, valid for j2 != 0
        col0 = np.zeros(M, dtype=complex)  # x1-form for the j2 = 0 column
        for s in range(0, t.size, _CHUNK):
            ts, ws = t[s:s + _CHUNK], w[s:s + _CHUNK]
            z1, z2 = self.z(ts)
            d1, d2 = self.dz(ts)
            E1 = np.exp(-1j * np.outer(j, z1))
            E2 = np.exp(-1j * np.outer(z2, lam)) * (ws * -d1)[:, None]
            G += E1 @ E2
            col0 += E1 @ (ws * d2)
        safe_lam = np.where(lam == 0, 1.0, lam)
        out = 1j * G / safe_lam[None, :]
        safe_j = np.where(j == 0, 1, j)
        out[:, 0] = 1j * col0 / safe_j
        out[0, 0] = self.area()
        return self.q0 * out

    def integrals(self, M: int, R: float) -> np.ndarray:
        return _adaptive_simpson(lambda P: self._simpson(M, R, P), self.name)


def kite_curve(a: float = 1.5, b: float = 1.0, shift: float = -0.65, height: float = 1.0):
    """Kite ``t -> (a cos t + b cos 2t + shift, height sin t)`` and its derivative."""

    def z(t):
        return a * np.cos(t) + b * np.cos(2 * t) + shift, height * np.sin(t)

    def dz(t):
        return -a * np.sin(t) - 2 * b * np.sin(2 * t), height * np.cos(t)

    return z, dz


def ellipse_curve(r1: float, r2: float, c1: float = 0.0, c2: float = 0.0):
    def z(t):
        return c1 + r1 * np.cos(t), c2 + r2 * np.sin(t)

    def dz(t):
        return -r1 * np.sin(t), r2 * np.cos(t)

    return z, dz


@dataclass(frozen=True)
class SinusoidStrip:
    """``q = scale exp(-decay x2)`` between ``g(x1) -/+ halfwidth``.

    ``g(x1) = center + amplitude sin(frequency x1)`` with an integer frequency.
    """

    scale: float = 1 / 3
    decay: float = 1.0
    amplitude: float = 0.5
    frequency: int = 2
    center: float = 0.0
    halfwidth: float = 0.5

    def __post_init__(self):
        if int(self.frequency) != self.frequency:
            raise ValueError("frequency must be an integer for 2pi-periodicity")
        if self.halfwidth <= 0:
            raise ValueError("halfwidth must be positive")

    def _bounds(self, x1):
        g = self.center + self.amplitude * np.sin(self.frequency * np.asarray(x1, float))
        return g - self.halfwidth, g + self.halfwidth

    def extent(self) -> tuple[float, float, float]:
        top = abs(self.center) + abs(self.amplitude) + self.halfwidth
        return -np.pi, np.pi, top

    def value(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        lo, hi = self._bounds(x1)
        return np.where((x2 > lo) & (x2 < hi), self.scale * np.exp(-self.decay * x2), 0.0)

    def _simpson(self, M: int, R: float, panels: int) -> np.ndarray:
        j = indices(M)
        c = self.decay + 1j * j * np.pi / R
        zero = c == 0
        safe_c = np.where(zero, 1.0, c)
        t, w = _periodic_simpson(panels)
        out = np.zeros((M, M), dtype=complex)
        for s in range(0, t.size, _CHUNK):
            ts, ws = t[s:s + _CHUNK], w[s:s + _CHUNK]
            lo, hi = self._bounds(ts)
            # int_{lo}^{hi} exp(-c x2) dx2
            inner = (np.exp(-np.outer(lo, safe_c)) - np.exp(-np.outer(hi, safe_c))) / safe_c
            inner = np.where(zero[None, :], (hi - lo)[:, None], inner)
            E1 = np.exp(-1j * np.outer(j, ts))
            out += E1 @ (inner * ws[:, None])
        return self.scale * out

    def integrals(self, M: int, R: float) -> np.ndarray:
        return _adaptive_simpson(lambda P: self._simpson(M, R, P), "sinusoid strip")


@dataclass(frozen=True)
class SeparableRect:
    """``q = f1(x1) f2(x2)`` on a rectangle, zero outside.

    ``f1 = sum_m cos_coeffs[m] cos(m x1) + sin_coeffs[m] sin(m x1)`` and
    ``f2 = sum_p poly[p] x2^p``.
    """

    cos_coeffs: tuple[float, ...]
    poly: tuple[float, ...]
    rect: tuple[float, float, float, float]
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("cos_coeffs", "poly", "rect", "sin_coeffs"):
            object.__setattr__(self, name, tuple(float(c) for c in getattr(self, name)))
        if len(self.rect) != 4:
            raise ValueError("rect must be (x1a, x1b, x2a, x2b)")

    def extent(self) -> tuple[float, float, float]:
        x1a, x1b, x2a, x2b = self.rect
        return x1a, x1b, max(abs(x2a), abs(x2b))

    def f1(self, x1):
        x1 = np.asarray(x1, float)
        out = sum(c * np.cos(m * x1) for m, c in enumerate(self.cos_coeffs))
        out = out + sum(c * np.sin(m * x1) for m, c in enumerate(self.sin_coeffs))
        return out + 0 * x1

    def f2(self, x2):
        return np.polynomial.polynomial.polyval(np.asarray(x2, float), self.poly)

    def value(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        x1a, x1b, x2a, x2b = self.rect
        inside = (x1 > x1a) & (x1 < x1b) & (x2 > x2a) & (x2 < x2b)
        return np.where(inside, self.f1(x1) * self.f2(x2), 0.0)

    def factor_x1(self, j1) -> np.ndarray:
        """``int f1(x1) exp(-i j1 x1) dx1`` over the rectangle's x1-range."""
        x1a, x1b = self.rect[:2]
        j1 = np.asarray(j1, dtype=float)
        out = np.zeros(j1.shape, dtype=complex)
        for m, c in enumerate(self.cos_coeffs):
            out += c / 2 * (interval_exp(x1a, x1b, j1 - m) + interval_exp(x1a, x1b, j1 + m))
        for m, c in enumerate(self.sin_coeffs):
            out += c / 2j * (interval_exp(x1a, x1b, j1 - m) - interval_exp(x1a, x1b, j1 + m))
        return out

    def factor_x2(self, lam) -> np.ndarray:
        """``int f2(x2) exp(-i lam x2) dx2`` over the rectangle's x2-range."""
        return poly_exp(self.poly, self.rect[2], self.rect[3], lam)

    def integrals(self, M: int, R: float) -> np.ndarray:
        j1, j2 = index_grid(M)
        return self.factor_x1(j1) * self.factor_x2(j2 * np.pi / R)


ContrastSpec = Strip | Blocks | BoundaryConstant | SinusoidStrip | SeparableRect


def kite(q0: float = 2.0) -> BoundaryConstant:
    z, dz = kite_curve()
    return BoundaryConstant(q0, z, dz, name="kite")


def stepped_strip() -> Blocks:
    """Contrast 1 on ``(-pi/2, pi/2) x (0, 0.75)`` and 2 on the rest of ``|x2| < 0.75``."""
    return Blocks(
        (
            ((-np.pi, np.pi, -0.75, 0.75), 2.0),
            ((-np.pi / 2, np.pi / 2, 0.0, 0.75), -1.0),
        )
    )


def sinusoid_strip() -> SinusoidStrip:
    return SinusoidStrip()


def smooth_rect() -> SeparableRect:
    """``2 cos(x1)^2 (x2 + 0.75)`` on ``(-2.5, 2.5) x (-0.75, 0.75)``."""
    return SeparableRect(cos_coeffs=(1.0, 0.0, 1.0), poly=(0.75, 1.0), rect=(-2.5, 2.5, -0.75, 0.75))


PRESETS = {
    "kite": kite,
    "stepped_strip": stepped_strip,
    "sinusoid_strip": sinusoid_strip,
    "smooth_rect": smooth_rect,
    "strip": lambda: Strip(2.0, 0.75),
}


def support_halfheight(spec: ContrastSpec) -> float:
    return spec.extent()[2]


def check_support(spec: ContrastSpec, disc: Discretization) -> None:
    """Raise ``ValueError`` unless the support fits ``[-pi, pi] x [-rho, rho]``."""
    x1a, x1b, h = spec.extent()
    if x1a < -np.pi - 1e-12 or x1b > np.pi + 1e-12:
        raise ValueError(f"contrast x1-extent [{x1a}, {x1b}] leaves one period")
    if h > disc.rho + 1e-12:
        raise ValueError(f"contrast reaches |x2| = {h} beyond rho = {disc.rho}")


@dataclass(frozen=True)
class ContrastSpectrum:
    """Coefficients ``q^(j)`` on ``Z^2_M`` in the periodic (alpha = 0) basis of ``Omega_R``."""

    disc: Discretization
    coeffs: np.ndarray = field(repr=False)
    spec: ContrastSpec | None = None

    @property
    def M(self) -> int:
        return self.disc.N

    def as_field(self) -> SpectralField:
        return SpectralField(self.disc, 0.0, self.coeffs)


def contrast_coeffs(spec: ContrastSpec, M: int, disc: Discretization) -> ContrastSpectrum:
    """Fourier coefficients of ``spec`` on ``Z^2_M`` for the box of ``disc``."""
    check_support(spec, disc)
    if M % 2 or M < 4:
        raise ValueError(f"M must be even and >= 4, got {M}")
    q0 = getattr(spec, "q0", None)
    if q0 is not None and q0 <= 0:
        log.warning("non-positive contrast value %s; coercivity theory does not cover it", q0)
    vals = spec.integrals(M, disc.R) / math.sqrt(4 * math.pi * disc.R)
    vals.setflags(write=False)
    return ContrastSpectrum(disc.with_N(M), vals, spec)


def contrast_grid_values(qhat: ContrastSpectrum, M: int) -> GridValues:
    """Grid values of the band-limited contrast on the ``M`` grid (alpha = 0)."""
    if M < qhat.M:
        raise ValueError(f"grid size {M} smaller than coefficient range {qhat.M}")
    return inverse_dft(resize(qhat.as_field(), M))
