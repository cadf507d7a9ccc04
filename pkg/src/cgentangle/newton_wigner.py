"""Smeared Newton-Wigner kernels and their convergence to the detector profile.

With ``g(k) = (8 pi eps^2)^(1/4) exp(-eps^2 k^2)`` the Fourier transform of
the Gaussian profile, the smeared kernels are cosine transforms

    R_eps(x)    = int dk/2pi  sqrt(w_k)   g(k) cos(kx)
    Rinv_eps(x) = int dk/2pi  1/sqrt(w_k) g(k) cos(kx)
    f+-(x)      = int dk/2pi  g(k) cos(kx) [sqrt(w_k/m) +- sqrt(m/w_k)] / 2

evaluated in momentum space, never through the distributional unsmeared
kernels.  In ``s = eps k`` every kernel depends on ``mu = m eps`` only, up
to an overall ``eps^(-1/2)`` (and ``m^(+-1/2)`` for the R kernels).

The coarse-grained detector mode ``a_j^+ |0>`` is the one-particle state
with momentum wavefunction ``exp(-i k x_j) g(k) h(k) / sqrt(2 pi)``, where
``h = (sqrt(m/w) + sqrt(w/m)) / 2``; this is what the localization fidelity
is built from.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import integrate

from .coarse_grain import ModeFamily

__all__ = [
    "QuadratureError",
    "KernelTable",
    "NormEstimate",
    "ConvergenceMetrics",
    "Wavepacket",
    "profile_fourier",
    "default_grid",
    "smeared_R_kernels",
    "f_kernels",
    "gauss_profile_table",
    "convergence_metrics",
    "convergence_exponent",
    "nw_vacuum_number",
    "gaussian_wavepacket",
    "coarse_mode_wavepacket",
    "one_particle_localization_fidelity",
    "nw_sampling_fidelity",
]

KernelKind = Literal["R_eps", "Rinv_eps", "f_plus", "f_minus", "gauss_profile"]

QUADRATURE_TOL = 1e-10
EDGE_TOL = 1e-12
MU_RANGE = (0.1, 100.0)
# exp(-s^2) < 1e-16 beyond this
S_MAX = float(np.sqrt(np.log(1e16)))
_GL_ORDER = 32
_MAX_PANELS = 1024
_CHUNK = 2048


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested tolerance."""


def profile_fourier(k, epsilon):
    """Fourier transform of the unit-norm Gaussian detector profile."""
    k = np.asarray(k, dtype=float)
    return (8 * np.pi * epsilon**2) ** 0.25 * np.exp(-(epsilon**2) * k**2)


def _log_ratio(kappa):
    # u = ln(sqrt(w/m)) = ln(1 + kappa^2) / 4 with kappa = k/m
    return 0.25 * np.log1p(kappa**2)


_SYMBOLS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "R_eps": lambda kap: np.exp(_log_ratio(kap)),
    "Rinv_eps": lambda kap: np.exp(-_log_ratio(kap)),
    "f_plus": lambda kap: np.cosh(_log_ratio(kap)),
    "f_minus": lambda kap: np.sinh(_log_ratio(kap)),
}


def _panel_nodes(panels, s_max, mu):
    edges = np.linspace(0.0, s_max, panels + 1)
    # the symbols are analytic except at s = +-i mu; grade panels near 0
    extra = mu * np.array([1 / 16, 1 / 8, 1 / 4, 1 / 2, 1, 2, 4])
    edges = np.unique(np.concatenate([edges, extra[extra < s_max]]))
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    a, b = edges[:-1, None], edges[1:, None]
    return ((b - a) / 2 * x + (a + b) / 2).ravel(), ((b - a) / 2 * w).ravel()


def _cosine_transform(weight, xi, mu, s_max=S_MAX, tol=QUADRATURE_TOL):
    """``int_0^s_max weight(s) cos(s xi) ds`` with panel doubling until two
    successive refinements agree to ``tol``.  Returns ``(values, error)``."""
    xi = np.abs(np.asarray(xi, dtype=float))
    uniq, inverse = np.unique(xi, return_inverse=True)

    def evaluate(panels):
        s, w = _panel_nodes(panels, s_max, mu)
        ws = w * weight(s)
        out = np.empty(uniq.size)
        for lo in range(0, uniq.size, _CHUNK):
            block = uniq[lo : lo + _CHUNK]
            out[lo : lo + _CHUNK] = np.cos(np.outer(block, s)) @ ws
        # rounding bound for the weighted sum
        return out, 8 * np.finfo(float).eps * np.sum(np.abs(ws))

    panels = 8
    prev, _ = evaluate(panels)
    while panels < _MAX_PANELS:
        panels *= 2
        cur, rounding = evaluate(panels)
        diff = float(np.max(np.abs(cur - prev)))
        if diff <= tol:
            return cur[inverse], max(diff, rounding)
        prev = cur
    raise QuadratureError(
        f"cosine transform not converged at mu={mu:g} after {panels} panels (diff {diff:.2e})"
    )


@functools.lru_cache(maxsize=128)
def _unit_kernel(kind: str, mu: float, xi_bytes: bytes):
    xi = np.frombuffer(xi_bytes, dtype=float)
    symbol = _SYMBOLS[kind]
    prefactor = (8 * np.pi) ** 0.25 / np.pi
    values, err = _cosine_transform(lambda s: np.exp(-(s**2)) * symbol(s / mu), xi, mu)
    values = prefactor * values
    values.setflags(write=False)
    return values, prefactor * err


@dataclass(frozen=True)
class NormEstimate:
    value: float
    error: float


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel samples on a position grid, with a per-sample error bound."""

    grid: np.ndarray
    values: np.ndarray
    quadrature_tol: float
    kind: KernelKind
    epsilon: float
    mass: float

    def l2_norm(self) -> NormEstimate:
        """Trapezoidal L2 norm on the grid, with the propagated quadrature bound."""
        norm = float(np.sqrt(integrate.trapezoid(self.values**2, self.grid)))
        extent = float(self.grid[-1] - self.grid[0])
        return NormEstimate(norm, self.quadrature_tol * np.sqrt(extent))

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)


def default_grid(epsilon: float, mass: float, points_per_eps: int = 64) -> np.ndarray:
    """Symmetric grid with step ``eps/points_per_eps`` covering the kernels.

    The half-width is ``max(11 eps, 40/m)``: the Gaussian needs ``~10.5 eps``
    to fall below 1e-12, and the smeared R kernels keep an ``exp(-m|x|)``
    tail when ``m eps`` is small.
    """
    half = max(11.0 * epsilon, 40.0 / mass)
    step = epsilon / points_per_eps
    n_half = int(np.ceil(half / step))
    return step * np.arange(-n_half, n_half + 1)


def _check_mu(epsilon, mass):
    if not (epsilon > 0 and mass > 0):
        raise ValueError(f"epsilon and mass must be positive, got {epsilon!r}, {mass!r}")
    return float(epsilon * mass)


def _table(kind, epsilon, mass, grid, center=0.0):
    mu = _check_mu(epsilon, mass)
    if grid is None:
        grid = center + default_grid(epsilon, mass)
    grid = np.asarray(grid, dtype=float)
    xi = np.ascontiguousarray((grid - center) / epsilon)
    unit, err = _unit_kernel(kind, mu, xi.tobytes())
    scale = epsilon**-0.5
    if kind == "R_eps":
        scale *= np.sqrt(mass)
    elif kind == "Rinv_eps":
        scale /= np.sqrt(mass)
    values = scale * unit
    tol = scale * err
    edge = max(abs(values[0]), abs(values[-1]))
    if edge > EDGE_TOL * max(1.0, scale):
        raise ValueError(
            f"grid does not cover the {kind} kernel support: edge value {edge:.2e} at mu={mu:g}"
        )
    return KernelTable(grid=grid, values=values, quadrature_tol=float(tol), kind=kind,
                       epsilon=float(epsilon), mass=float(mass))


def smeared_R_kernels(epsilon: float, mass: float, grid=None) -> tuple[KernelTable, KernelTable]:
    """Smeared ``R`` and ``R^-1`` kernels, real and even about ``x = 0``."""
    return _table("R_eps", epsilon, mass, grid), _table("Rinv_eps", epsilon, mass, grid)


def f_kernels(epsilon: float, mass: float, grid=None) -> tuple[KernelTable, KernelTable]:
    """``f+`` and ``f-``: coefficients of the local ``a(y)`` and ``a^+(y)`` in
    the smeared Newton-Wigner annihilator.  Each is integrated directly
    from its own symbol, so ``f+ + f- = R_eps/sqrt(m)`` is a real check."""
    return _table("f_plus", epsilon, mass, grid), _table("f_minus", epsilon, mass, grid)


def gauss_profile_table(epsilon: float, mass: float = 1.0, grid=None) -> KernelTable:
    if grid is None:
        grid = default_grid(epsilon, mass)
    grid = np.asarray(grid, dtype=float)
    values = (2 * np.pi * epsilon**2) ** -0.25 * np.exp(-(grid**2) / (4 * epsilon**2))
    return KernelTable(grid=grid, values=values, quadrature_tol=0.0, kind="gauss_profile",
                       epsilon=float(epsilon), mass=float(mass))


@dataclass(frozen=True)
class ConvergenceMetrics:
    """How far the smeared Newton-Wigner annihilator is from the local one.

    ``ratio = |f-| / |f+|`` and ``gauss_distance = |f+ - G| / |G|``; both
    vanish as ``m eps`` grows.
    """

    mass_eps: float
    ratio: float
    gauss_distance: float
    f_plus_norm: float
    f_minus_norm: float
    abs_error: float


def _parseval(epsilon, mass, symbol):
    """``int dk/2pi g(k)^2 symbol(k/m)^2`` by adaptive quadrature."""
    k_max = np.sqrt(np.log(1e18) / 2) / epsilon
    g2 = lambda k: np.sqrt(8 * np.pi) * epsilon * np.exp(-2 * epsilon**2 * k**2)
    points = [mass] if mass < k_max else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                lambda k: g2(k) * symbol(k / mass) ** 2,
                0.0, k_max, epsabs=0.0, epsrel=1e-11, limit=400, points=points,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"Parseval integral failed at mu={epsilon * mass:g}: {exc}") from exc
    return val / np.pi, err / np.pi


def convergence_metrics(epsilon: float, mass: float) -> ConvergenceMetrics:
    mu = _check_mu(epsilon, mass)
    if not MU_RANGE[0] <= mu <= MU_RANGE[1]:
        raise ValueError(f"m*eps={mu:g} outside the validity window {MU_RANGE}")
    plus, e1 = _parseval(epsilon, mass, _SYMBOLS["f_plus"])
    minus, e2 = _parseval(epsilon, mass, _SYMBOLS["f_minus"])
    # cosh(u) - 1 = 2 sinh(u/2)^2 avoids cancellation
    dist, e3 = _parseval(epsilon, mass, lambda kap: 2 * np.sinh(_log_ratio(kap) / 2) ** 2)
    return ConvergenceMetrics(
        mass_eps=mu,
        ratio=float(np.sqrt(minus / plus)),
        gauss_distance=float(np.sqrt(dist)),  # |G| = 1
        f_plus_norm=float(np.sqrt(plus)),
        f_minus_norm=float(np.sqrt(minus)),
        abs_error=float(max(e1, e2, e3)),
    )


def convergence_exponent(mass_eps, values) -> float:
    """Least-squares exponent ``p`` in ``values ~ (m eps)^(-p)``."""
    slope, _ = np.polyfit(np.log(mass_eps), np.log(values), 1)
    return float(-slope)


def nw_vacuum_number(
    epsilon: float,
    mass: float,
    center: float = 0.0,
    path: Literal["momentum", "kernel"] = "momentum",
) -> float:
    """Vacuum expectation of ``a_NW,eps^+ a_NW,eps`` at ``center``.

    The momentum path is exact: the smeared operator contains only
    momentum annihilators, so the result is 0.  The kernel path expands it
    in local ladder operators and keeps only the ``f-`` contraction,
    returning ``int |f-|^2``; it is a quadrature self-test that becomes
    negligible for ``m eps >> 1``.
    """
    _check_mu(epsilon, mass)
    if path == "momentum":
        return 0.0
    if path != "kernel":
        raise ValueError(f"unknown path {path!r}")
    grid = center + default_grid(epsilon, mass)
    f_minus = _table("f_minus", epsilon, mass, grid, center=center)
    return float(integrate.trapezoid(f_minus.values**2, f_minus.grid))


@dataclass(frozen=True, eq=False)
class Wavepacket:
    """One-particle momentum wavefunction sampled on quadrature nodes.

    Amplitudes are rescaled on construction so that ``sum(w |f|^2) = 1``.
    """

    k: np.ndarray
    weights: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        f = np.asarray(self.amplitudes, dtype=complex)
        if not (k.shape == w.shape == f.shape) or k.ndim != 1:
            raise ValueError("k, weights and amplitudes must be 1D arrays of equal length")
        norm = np.sqrt(np.sum(w * np.abs(f) ** 2))
        if not norm > 0:
            raise ValueError("wavepacket has zero norm")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "amplitudes", f / norm)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(self.amplitudes) ** 2)))

    def position_amplitude(self, x) -> np.ndarray:
        """Newton-Wigner wavefunction ``int dk/sqrt(2 pi) f(k) exp(ikx)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phase = np.exp(1j * np.outer(x, self.k))
        return phase @ (self.weights * self.amplitudes) / np.sqrt(2 * np.pi)

    def bandwidth(self, rel=1e-8) -> float:
        mag = np.abs(self.amplitudes)
        return float(np.max(np.abs(self.k[mag > rel * mag.max()])))

    @classmethod
    def from_function(cls, func, k_min, k_max, n_points=2048) -> "Wavepacket":
        x, w = np.polynomial.legendre.leggauss(n_points)
        k = (k_max - k_min) / 2 * x + (k_max + k_min) / 2
        return cls(k=k, weights=(k_max - k_min) / 2 * w, amplitudes=func(k))


def gaussian_wavepacket(center: float, width: float, momentum: float = 0.0,
                        n_points: int = 2048) -> Wavepacket:
    """Packet whose position density ``|f~(x)|^2`` is Gaussian with
    standard deviation ``width`` around ``center``."""
    if not width > 0:
        raise ValueError("width must be positive")
    half = 6.5 / width
    return Wavepacket.from_function(
        lambda k: np.exp(-(width**2) * (k - momentum) ** 2 - 1j * k * center),
        momentum - half, momentum + half, n_points,
    )


def _mode_symbol(k, mass, ladder_mass):
    omega = np.sqrt(k**2 + mass**2)
    return 0.5 * (np.sqrt(ladder_mass / omega) + np.sqrt(omega / ladder_mass))


def coarse_mode_wavepacket(epsilon: float, mass: float, center: float = 0.0,
                           ladder_mass: float | None = None, n_points: int = 2048) -> Wavepacket:
    """Momentum wavefunction of ``a_j^+ |0>`` for a detector at ``center``."""
    ladder_mass = mass if ladder_mass is None else ladder_mass
    half = 6.5 / epsilon
    return Wavepacket.from_function(
        lambda k: profile_fourier(k, epsilon) * _mode_symbol(k, mass, ladder_mass)
        * np.exp(-1j * k * center) / np.sqrt(2 * np.pi),
        -half, half, n_points,
    )


def _overlap_function(separations, epsilon, mass, ladder_mass, left, right):
    """``int dk/2pi g(k)^2 h_l(k) h_r(k) cos(k r)`` for each separation ``r``,
    where ``h`` is the detector-mode symbol (``left``/``right`` True) or 1."""
    mu = epsilon * mass
    lam = ladder_mass / mass
    s_max = float(np.sqrt(np.log(1e16) / 2))

    def weight(s):
        u = _log_ratio(s / mu)
        h = 0.5 * (np.sqrt(lam) * np.exp(-u) + np.exp(u) / np.sqrt(lam))
        return np.exp(-2 * s**2) * (h if left else 1.0) * (h if right else 1.0)

    vals, _ = _cosine_transform(weight, np.asarray(separations) / epsilon, mu, s_max=s_max)
    return np.sqrt(8 * np.pi) / np.pi * vals


def _toeplitz_gram(family, values):
    j = np.arange(family.n_modes)
    return values[np.abs(j[:, None] - j[None, :])]


def one_particle_localization_fidelity(packet: Wavepacket, family: ModeFamily, mass: float,
                                       check_bandwidth: bool = True) -> float:
    """Fidelity between a one-particle state and its detector-mode sampling.

    The effective state is ``sum_j d f~(x_j) a_j^+ |0>`` with ``x_j`` the
    family centres and ``d`` their separation; all overlaps are momentum
    integrals.
    """
    if not mass > 0:
        raise ValueError("mass must be positive")
    ladder_mass = family.ladder_mass or mass
    eps = family.epsilon
    if check_bandwidth and family.n_modes > 1:
        nyquist = np.pi / family.separation
        if packet.bandwidth() > nyquist:
            raise ValueError(
                f"packet bandwidth {packet.bandwidth():.3g} exceeds the detector Nyquist "
                f"wavenumber {nyquist:.3g}"
            )
    centers = family.centers
    coeffs = family.separation * packet.position_amplitude(centers)

    base = profile_fourier(packet.k, eps) * _mode_symbol(packet.k, mass, ladder_mass) / np.sqrt(2 * np.pi)
    modes = base[None, :] * np.exp(-1j * np.outer(centers, packet.k))
    overlap = np.sum(coeffs * (modes @ (packet.weights * np.conj(packet.amplitudes))))

    lags = family.separation * np.arange(family.n_modes)
    gram = _toeplitz_gram(family, _overlap_function(lags, eps, mass, ladder_mass, True, True))
    norm_sq = float(np.real(np.conj(coeffs) @ gram @ coeffs))
    if not norm_sq > 1e-300:
        raise ValueError("effective state has vanishing norm; the packet misses every detector")
    return float(np.clip(abs(overlap) ** 2 / norm_sq, 0.0, 1.0))


def nw_sampling_fidelity(packet: Wavepacket, family: ModeFamily, mass: float) -> float:
    """Fidelity between ``sum_j c_j a_j^+ |0>`` and ``sum_j c_j a_NW,eps^+(x_j) |0>``.

    Both states use the coefficients ``c_j = d f~(x_j)`` of the packet, so
    the smearing itself cancels and only the difference between local and
    Newton-Wigner detector modes remains.  Tends to 1 as ``m eps`` grows.
    """
    if not mass > 0:
        raise ValueError("mass must be positive")
    ladder_mass = family.ladder_mass or mass
    eps = family.epsilon
    coeffs = family.separation * packet.position_amplitude(family.centers)
    lags = family.separation * np.arange(family.n_modes)

    def quad_form(left, right):
        gram = _toeplitz_gram(family, _overlap_function(lags, eps, mass, ladder_mass, left, right))
        return np.conj(coeffs) @ gram @ coeffs

    cross = quad_form(True, False)
    local = float(np.real(quad_form(True, True)))
    nw = float(np.real(quad_form(False, False)))
    if not (local > 1e-300 and nw > 1e-300):
        raise ValueError("sampled state has vanishing norm; the packet misses every detector")
    return float(np.clip(abs(cross) ** 2 / (local * nw), 0.0, 1.0))
