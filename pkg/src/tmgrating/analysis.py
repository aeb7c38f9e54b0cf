"""Rayleigh coefficients, diffraction energies and convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tmgrating.kernel import WaveParameters, beta_values
from tmgrating.spectral import SpectralField, indices, resize, sobolev_norm


def rayleigh_coeffs(
    u: SpectralField,
    eval_height: float,
    side: str = "+",
    support_height: float | None = None,
) -> np.ndarray:
    """x1-mode coefficients of ``u`` on the line ``x2 = +/- eval_height``.

    Returns an array over ``j1`` in natural order (see ``spectral.indices``);
    entry ``l`` is ``(2 pi)^-1 int u(x1, +/-h) exp(-i alpha_l x1) dx1``.
    """
    if side not in ("+", "-"):
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    if not 0 < eval_height <= u.disc.rho + 1e-12:
        raise ValueError(f"eval_height {eval_height} outside (0, rho={u.disc.rho}]")
    if support_height is not None and eval_height < support_height:
        raise ValueError(f"eval_height {eval_height} cuts the contrast support ({support_height})")
    sign = 1 if side == "+" else -1
    j2 = indices(u.N)
    phase = np.exp(sign * 1j * j2 * np.pi * eval_height / u.disc.R)
    return u.coeffs @ phase / math.sqrt(4 * math.pi * u.disc.R)


@dataclass(frozen=True)
class ModeData:
    j: int
    alpha_j: float
    beta_j: complex
    u_plus: complex
    u_minus: complex

    @property
    def propagating(self) -> bool:
        return self.beta_j.imag == 0 and self.beta_j.real > 0


@dataclass(frozen=True)
class RayleighData:
    modes: tuple[ModeData, ...]
    incident: complex
    eval_height: float
    k: float

    def mode(self, j: int) -> ModeData:
        for m in self.modes:
            if m.j == j:
                return m
        raise KeyError(j)

    def propagating(self) -> list[ModeData]:
        return [m for m in self.modes if self.k**2 > m.alpha_j**2]


def rayleigh_data(
    u: SpectralField,
    w: WaveParameters,
    eval_height: float | None = None,
    support_height: float | None = None,
    amplitude: complex = 1.0,
) -> RayleighData:
    """Both-sided Rayleigh coefficients and the incident trace at ``x2 = -eval_height``."""
    h = u.disc.rho if eval_height is None else eval_height
    up = rayleigh_coeffs(u, h, "+", support_height)
    um = rayleigh_coeffs(u, h, "-", support_height)
    j = indices(u.N)
    b = beta_values(j, w.k, w.alpha)
    modes = tuple(
        ModeData(int(j[n]), float(j[n] + w.alpha), complex(b[n]), complex(up[n]), complex(um[n]))
        for n in np.argsort(j)
    )
    incident = amplitude * np.exp(1j * w.k * math.sin(w.theta) * h)
    return RayleighData(modes, complex(incident), h, w.k)


@dataclass(frozen=True)
class EnergyReport:
    E_ref: float
    E_tra: float
    conservation_error: float

    def as_dict(self) -> dict:
        return {"E_ref": self.E_ref, "E_tra": self.E_tra,
                "conservation_error": self.conservation_error}


def energies(rd: RayleighData, w: WaveParameters) -> EnergyReport:
    """Reflected/transmitted energy fractions over the propagating orders."""
    b0 = w.k * math.sin(w.theta)
    if not b0 > 0:
        raise ValueError("no propagating zeroth order")
    prop = rd.propagating()
    if not prop:
        raise ValueError("no propagating modes")
    E_ref = sum(m.beta_j.real * abs(m.u_plus) ** 2 for m in prop) / b0
    E_tra = sum(
        m.beta_j.real * abs(m.u_minus + (rd.incident if m.j == 0 else 0)) ** 2 for m in prop
    ) / b0
    return EnergyReport(float(E_ref), float(E_tra), abs(1 - E_ref - E_tra))


def relative_error(a: SpectralField, b: SpectralField, s: float) -> float:
    """``|a - b|_{H^s} / |b|_{H^s}``, zero-padding the coarser field."""
    if a.disc.R != b.disc.R or a.alpha != b.alpha:
        raise ValueError("fields use different bases")
    M = max(a.N, b.N)
    a, b = resize(a, M), resize(b, M)
    den = sobolev_norm(b, s)
    if den == 0:
        raise ZeroDivisionError("reference field has zero norm")
    return sobolev_norm(a - b, s) / den


def estimate_order(pairs) -> float:
    """Negated least-squares slope of ``log(error)`` against ``log(N)``."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least three (N, error) pairs")
    N = np.array([p[0] for p in pairs], dtype=float)
    e = np.array([p[1] for p in pairs], dtype=float)
    if np.any(e <= 0) or np.any(N <= 0):
        raise ValueError("N and errors must be positive")
    if np.ptp(np.log(N)) == 0:
        raise ValueError("degenerate abscissae")
    slope = np.polyfit(np.log(N), np.log(e), 1)[0]
    return float(-slope)
