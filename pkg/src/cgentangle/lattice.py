"""Periodic lattice regularization of the free 1D Klein-Gordon field.

All covariances are returned in the dimensionless convention
``[q_i, p_j] = i delta_ij`` where ``q_i`` is the field at site ``i`` and
``p_i = a * pi_i``.  Frequencies are reported in physical units
(inverse length); multiply by the spacing to get lattice units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import circulant

from .gaussian import CovarianceMatrix

__all__ = [
    "LatticeModel",
    "MomentumGrid",
    "momentum_grid",
    "dispersion",
    "vacuum_covariance",
]

DEFAULT_MASS_REGULATOR = 1e-6


@dataclass(frozen=True)
class LatticeModel:
    """Discretized Klein-Gordon field on a ring of ``num_sites`` sites.

    ``mass`` is physical (inverse length).  A massless model is regulated
    by replacing the mass with ``mass_regulator / spacing``; pass
    ``mass_regulator=None`` to forbid that and get an error instead.
    """

    num_sites: int
    mass: float
    spacing: float = 1.0
    dispersion_kind: Literal["lattice", "continuum"] = "lattice"
    mass_regulator: float | None = DEFAULT_MASS_REGULATOR

    def __post_init__(self):
        if int(self.num_sites) != self.num_sites or self.num_sites < 1:
            raise ValueError(f"num_sites must be a positive integer, got {self.num_sites!r}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing!r}")
        if self.mass < 0:
            raise ValueError(f"mass must be non-negative, got {self.mass!r}")
        if self.dispersion_kind not in ("lattice", "continuum"):
            raise ValueError(f"unknown dispersion_kind {self.dispersion_kind!r}")
        if self.mass_regulator is not None and not self.mass_regulator > 0:
            raise ValueError("mass_regulator must be positive or None")

    @property
    def length(self) -> float:
        """Total ring length, the infrared cutoff."""
        return self.num_sites * self.spacing

    @property
    def effective_mass(self) -> float:
        """Mass actually used in the dispersion, after zero-mode regulation."""
        if self.mass > 0:
            return float(self.mass)
        if self.mass_regulator is None:
            raise ValueError(
                "massless model has a singular zero mode; set mass_regulator"
            )
        return self.mass_regulator / self.spacing

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.num_sites) * self.spacing


@dataclass(frozen=True)
class MomentumGrid:
    wavenumbers: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.wavenumbers)


def momentum_grid(model: LatticeModel) -> MomentumGrid:
    """Allowed wavenumbers ``2 pi n / (N a)`` for ``n`` in ``[-N//2, ceil(N/2))``.

    Weights are ``1/N`` so that ``sum(weights * f(k))`` is the lattice
    average over modes.
    """
    n = model.num_sites
    idx = np.arange(-(n // 2), -(n // 2) + n)
    k = 2 * np.pi * idx / (n * model.spacing)
    return MomentumGrid(wavenumbers=k, weights=np.full(n, 1.0 / n))


def dispersion(model: LatticeModel, k) -> np.ndarray:
    """Angular frequency of the mode with wavenumber ``k``.

    The continuum kind is ``sqrt(k^2 + m^2)``; the lattice kind replaces
    ``k^2`` by ``(2/a)^2 sin^2(k a / 2)``.
    """
    k = np.asarray(k, dtype=float)
    m = model.effective_mass
    if model.dispersion_kind == "continuum":
        return np.sqrt(k**2 + m**2)
    a = model.spacing
    return np.sqrt(m**2 + (2.0 / a) ** 2 * np.sin(k * a / 2) ** 2)


def vacuum_covariance(model: LatticeModel) -> CovarianceMatrix:
    """Exact vacuum second moments of the lattice field.

    ``X_ij = (1/N) sum_k cos(k r_ij a) / (2 w_k a)`` and
    ``P_ij = (1/N) sum_k cos(k r_ij a) w_k a / 2``; the cross block
    vanishes because the vacuum wavefunction is real.
    """
    grid = momentum_grid(model)
    w = dispersion(model, grid.wavenumbers) * model.spacing
    if np.any(w <= 0):
        raise ValueError("zero frequency on the momentum grid; regulate the zero mode")

    separations = np.arange(model.num_sites)
    phases = np.cos(np.outer(separations, grid.wavenumbers * model.spacing))
    x_profile = phases @ (grid.weights / (2 * w))
    p_profile = phases @ (grid.weights * w / 2)
    # circulant(c)[i, j] == c[(i - j) % N]; the profiles are even in r
    X = circulant(x_profile)
    P = circulant(p_profile)
    return CovarianceMatrix(X=(X + X.T) / 2, P=(P + P.T) / 2)
