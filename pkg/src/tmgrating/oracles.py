"""Slow, independent references for tests and the ``validate`` command."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tmgrating.contrast import ContrastSpectrum
from tmgrating.kernel import WaveParameters, check_wood, smoothed_kernel_rows
from tmgrating.solver import ProblemSetup, apply_operator
from tmgrating.spectral import Discretization, GridValues, SpectralField, indices


@dataclass(frozen=True)
class StripExact:
    """Single-mode transmission through ``|x2| < a`` with constant contrast.

    Total field profile (times ``exp(i alpha x1)``)::

        exp(-i b x2) + r exp(i b (x2 - a))      x2 > a
        t1 exp(i gamma x2) + t2 exp(-i gamma x2) |x2| < a
        tau exp(-i b (x2 + a))                  x2 < -a
    """

    r: complex
    tau: complex
    t1: complex
    t2: complex
    gamma: complex
    beta0: complex
    a: float
    residual: float

    def rayleigh(self, eval_height: float) -> tuple[complex, complex]:
        """Zeroth-order scattered coefficients ``(u+, u-)`` traced at ``x2 = +/- h``.

        ``u+ = r e^{i b (h - a)}`` and ``u- = tau e^{i b (h - a)} - e^{i b h}``.
        """
        b, h = self.beta0, eval_height
        up = self.r * np.exp(1j * b * (h - self.a))
        um = self.tau * np.exp(1j * b * (h - self.a)) - np.exp(1j * b * h)
        return complex(up), complex(um)


def strip_exact(w: WaveParameters, q0: float, a: float) -> StripExact:
    """Solve the 4x4 interface system for a homogeneous strip."""
    if not q0 > -1:
        raise ValueError("need q0 > -1")
    if not a > 0:
        raise ValueError("need a > 0")
    b = complex(np.sqrt(complex(w.k**2 - w.alpha**2)))
    g = complex(np.sqrt(complex(w.k**2 / (1 + q0) - w.alpha**2)))
    e = (1 + q0) * 1j * g
    ep, em = np.exp(1j * g * a), np.exp(-1j * g * a)
    # unknowns (r, t1, t2, tau); rows: [v], [eps^-1 v'] at x2 = a, then at x2 = -a
    A = np.array(
        [
            [1, -ep, -em, 0],
            [1j * b, -e * ep, e * em, 0],
            [0, em, ep, -1],
            [0, e * em, -e * ep, 1j * b],
        ],
        dtype=complex,
    )
    rhs = np.array([-np.exp(-1j * b * a), 1j * b * np.exp(-1j * b * a), 0, 0], dtype=complex)
    if np.linalg.cond(A) > 1e14:
        raise np.linalg.LinAlgError("strip interface system is singular")
    x = np.linalg.solve(A, rhs)
    res = float(np.linalg.norm(A @ x - rhs))
    return StripExact(x[0], x[3], x[1], x[2], g, b, a, res)


def strip_reduced_solve(w: WaveParameters, q0: float, a: float, disc: Discretization) -> SpectralField:
    """Dense solve of the discrete equation restricted to the ``j1 = 0`` column.

    A strip contrast couples only ``j1 = 0`` modes. The right-hand side uses the
    same 3N sampling of ``q_2N grad u_i`` as the 2-D solver, done here in 1-D.
    """
    if check_wood(w) is not None:
        raise ValueError("Wood's anomaly")
    N, R = disc.N, disc.R
    c = 1 / math.sqrt(4 * math.pi * R)
    lam = lambda n: n * np.pi / R  # noqa: E731
    j = indices(N)

    def qcol(n):
        n = np.asarray(n)
        out = np.where(n == 0, 2 * a, 2 * np.sin(lam(n) * a) / np.where(n == 0, 1, lam(n)))
        return c * 2 * np.pi * q0 * out

    K = smoothed_kernel_rows(disc, w, [0])[0][0]
    Q = qcol(j[:, None] - j[None, :])
    ia = 1j * w.alpha
    il = 1j * lam(j)
    # f_l(j) = c sum_m q(j - m) w_l(m) u(m);  L f(j) = c^-1 K(j) [ia f_1 + il_j f_2]
    A = np.eye(N) - K[:, None] * (ia * Q * ia + il[:, None] * Q * il[None, :])

    # 1-D 3N-grid sampling of q_2N and grad u_i along x2
    P = 3 * N
    l = np.arange(P)
    l = np.where(l <= P // 2, l, l - P)
    x2 = 2 * R * l / P
    n2 = np.arange(-N + 1, N + 1)
    qpad = np.zeros(P, dtype=complex)
    qpad[n2 % P] = qcol(n2)
    qx = c * P * np.fft.ifft(qpad)
    s = math.sin(w.theta)
    ui = np.exp(-1j * w.k * s * x2)
    f = []
    for d in (math.cos(w.theta), -s):
        vals = qx * 1j * w.k * d * ui
        # the x1-sum of the 2-D transform contributes a factor P
        f.append(np.fft.fft(vals)[j % P] / (c * P))
    rhs = K * (ia * f[0] + il * f[1]) / c
    col = np.linalg.solve(A, rhs)
    coeffs = np.zeros((N, N), dtype=complex)
    coeffs[0, :] = col
    return SpectralField(disc, w.alpha, coeffs)


MAX_DENSE_N = 16


def dense_operator(setup: ProblemSetup) -> np.ndarray:
    """Matrix of the discrete operator, column ``n`` = image of the n-th unit vector."""
    N = setup.disc.N
    if N > MAX_DENSE_N:
        raise ValueError(f"dense operator limited to N <= {MAX_DENSE_N}, got {N}")
    A = np.empty((N * N, N * N), dtype=complex)
    e = np.zeros(N * N, dtype=complex)
    for n in range(N * N):
        e[:] = 0
        e[n] = 1
        u = SpectralField(setup.disc, setup.alpha, e.reshape(N, N))
        A[:, n] = apply_operator(u, setup).coeffs.ravel()
    return A


def direct_convolution(u: SpectralField, qhat: ContrastSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """``(q d_l u)^(j) = (4 pi R)^(-1/2) sum_m (d_l u)^(m) q^(j - m)`` by explicit sums."""
    N, R, M = u.N, u.disc.R, qhat.M
    j = indices(N)
    out = [np.zeros((N, N), dtype=complex) for _ in range(2)]
    for a1, m1 in enumerate(j):
        for a2, m2 in enumerate(j):
            um = u.coeffs[a1, a2]
            if um == 0:
                continue
            w = (1j * (m1 + u.alpha) * um, 1j * m2 * np.pi / R * um)
            d1 = (j[:, None] - m1) % M
            d2 = (j[None, :] - m2) % M
            qs = qhat.coeffs[d1, d2]
            for ell in range(2):
                out[ell] += w[ell] * qs
    scale = 1 / math.sqrt(4 * math.pi * R)
    return out[0] * scale, out[1] * scale


def direct_dft(g: GridValues) -> np.ndarray:
    """Forward alpha-quasi-periodic DFT by the explicit double sum."""
    N, R = g.N, g.disc.R
    j = indices(N).astype(float)
    E1 = np.exp(-2j * np.pi * np.outer(j + g.alpha, j) / N)
    E2 = np.exp(-2j * np.pi * np.outer(j, j) / N)
    return math.sqrt(4 * math.pi * R) / N**2 * (E1 @ g.values @ E2.T)


# -- oracle suite -----------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    limit: float

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.limit)


STRIP_CASE = dict(k=math.pi / 2, theta=math.pi / 4, q0=2.0, a=0.75, R=2.0, rho=0.8)


def _rel(a, b) -> float:
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / max(np.linalg.norm(np.ravel(b)), 1e-300))


def run_checks(seed: int = 0) -> list[Check]:
    """Oracle comparisons exercised by the ``validate`` command.

    Each check reports a measured discrepancy and the limit it must not exceed.
    """
    from tmgrating.analysis import energies, rayleigh_data
    from tmgrating.contrast import PRESETS, Strip, contrast_coeffs, support_halfheight
    from tmgrating.kernel import kernel_coeffs
    from tmgrating.solver import assemble_rhs, build_setup, gmres_solve, multiply_contrast_gradient
    from tmgrating.spectral import forward_dft, inverse_dft

    rng = np.random.default_rng(seed)
    checks = []
    sc = STRIP_CASE
    w = WaveParameters(sc["k"], sc["theta"])

    # transform pair
    d = Discretization(16, 2.0, 0.8)
    u = SpectralField(d, w.alpha, rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)))
    g = inverse_dft(u)
    checks.append(Check("dft roundtrip", _rel(forward_dft(g).coeffs, u.coeffs), 1e-12))
    l2 = math.sqrt(4 * math.pi * d.R / d.N**2) * np.linalg.norm(g.values)
    checks.append(Check("parseval", abs(l2 - u.norm()) / u.norm(), 1e-12))

    # FFT product rule against the direct convolution sum
    worst = 0.0
    for name, make in PRESETS.items():
        spec = make()
        h = support_halfheight(spec)
        disc = Discretization(8, 2.0, h, smooth_cutoff=False) if h > 0.9 else Discretization(8, 2.0, h + 0.05)
        qhat = contrast_coeffs(spec, 16, disc)
        v = SpectralField(disc, w.alpha, rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
        fast = multiply_contrast_gradient(v, qhat)
        slow = direct_convolution(v, qhat)
        worst = max(worst, *(_rel(f.coeffs, s) for f, s in zip(fast, slow)))
    checks.append(Check("product rule vs direct convolution", worst, 1e-10))

    # GMRES against a dense direct solve
    disc = Discretization(8, 2.0, 0.8)
    setup = build_setup(w, disc, PRESETS["smooth_rect"]())
    A = dense_operator(setup)
    direct = np.linalg.solve(A, assemble_rhs(setup).coeffs.ravel())
    it = gmres_solve(setup, tol=1e-12)
    checks.append(Check("gmres vs dense solve", _rel(it.solution.coeffs.ravel(), direct), 1e-8))

    # strip: 2-D solver against the 1-D reduction, and the reduction against the exact strip
    disc = Discretization(32, sc["R"], sc["rho"])
    strip = Strip(sc["q0"], sc["a"])
    full = gmres_solve(build_setup(w, disc, strip), tol=1e-13).solution
    red = strip_reduced_solve(w, sc["q0"], sc["a"], disc)
    checks.append(Check("2-D solver vs reduced strip solver", _rel(full.coeffs, red.coeffs), 1e-8))

    exact = strip_exact(w, sc["q0"], sc["a"])
    up_exact = exact.rayleigh(sc["rho"])[0]
    errs = []
    for N in (64, 256, 1024):
        r = strip_reduced_solve(w, sc["q0"], sc["a"], Discretization(N, sc["R"], sc["rho"]))
        errs.append(abs(rayleigh_data(r, w, support_height=sc["a"]).mode(0).u_plus - up_exact)
                    / abs(up_exact))
    checks.append(Check("reduced strip -> exact: error ratio per step",
                        max(errs[1] / errs[0], errs[2] / errs[1]), 1.0 - 1e-3))
    checks.append(Check("reduced strip -> exact: error at N=1024", errs[2], 1e-3))
    checks.append(Check("exact strip energy identity",
                        abs(abs(exact.r) ** 2 + abs(exact.tau) ** 2 - 1), 1e-12))

    # kernel coefficient continuity across the resonant branch
    j1, j2, h, alpha = 1, 3, 2.0, 0.3
    k_res = math.sqrt((j1 + alpha) ** 2 + (j2 * math.pi / h) ** 2)
    limit_val = complex(kernel_coeffs(j1, j2, k_res, alpha, h))
    worst = 0.0
    for delta in (1e-8, -1e-8):
        k = math.sqrt(k_res**2 + delta)
        worst = max(worst, abs(complex(kernel_coeffs(j1, j2, k, alpha, h)) - limit_val) / abs(limit_val))
    checks.append(Check("kernel resonance continuity", worst, 1e-5))

    # no contrast: no scattered field and exact energy balance
    disc = Discretization(16, 2.0, 0.8)
    rep = gmres_solve(build_setup(w, disc, Strip(0.0, 0.75)))
    en = energies(rayleigh_data(rep.solution, w), w)
    checks.append(Check("zero contrast conservation error",
                        max(en.conservation_error, float(np.abs(rep.solution.coeffs).max())), 1e-14))

    # Wood's anomaly refused
    refused = check_wood(WaveParameters(2.5, math.acos(0.6))) is not None
    checks.append(Check("wood anomaly refused at k=2.5, theta=arccos(0.6)", 0.0 if refused else 1.0, 0.0))
    return checks
