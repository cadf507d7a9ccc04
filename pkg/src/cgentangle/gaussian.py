"""Gaussian states described by quadrature second moments.

Partial traces are sub-block restrictions; entropies follow from the
symplectic spectrum through ``s(v) = (v+1/2) ln(v+1/2) - (v-1/2) ln(v-1/2)``.
Entropies are in nats throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Literal

import numpy as np
from scipy.special import xlogy

if TYPE_CHECKING:
    from .lattice import LatticeModel

__all__ = [
    "NotAQuantumStateError",
    "CovarianceMatrix",
    "SymplecticSpectrum",
    "restrict",
    "symplectic_spectrum",
    "entropy",
    "covariance_entropy",
    "entanglement_entropy",
    "symplectic_form",
]

PURITY_TOL = 1e-9
_SYM_TOL = 1e-10


class NotAQuantumStateError(ValueError):
    """Second moments violate positivity or the uncertainty relation."""


def symplectic_form(n: int) -> np.ndarray:
    """Canonical form for quadratures ordered ``(q_1..q_n, p_1..p_n)``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _is_symmetric(a, tol=_SYM_TOL):
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return np.allclose(a, a.T, rtol=0, atol=tol * scale)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Second moments of ``n`` bosonic modes.

    ``C`` holds the symmetrized cross moments ``<{q_i, p_j}>/2`` and
    ``commutator_gram`` records ``[q_i, p_j]/i``.  The Gram matrix is the
    identity for canonical modes and the profile overlap matrix for raw
    coarse-grained modes.
    """

    X: np.ndarray
    P: np.ndarray
    C: np.ndarray | None = None
    commutator_gram: np.ndarray | None = None
    _n: int = field(init=False, repr=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n = X.shape[0]
        if X.shape != (n, n) or P.shape != (n, n):
            raise ValueError(f"X and P must be square and equal shape, got {X.shape}, {P.shape}")
        C = np.zeros((n, n)) if self.C is None else np.asarray(self.C, dtype=float)
        gram = np.eye(n) if self.commutator_gram is None else np.asarray(
            self.commutator_gram, dtype=float
        )
        if C.shape != (n, n) or gram.shape != (n, n):
            raise ValueError("C and commutator_gram must match the shape of X")
        if not (_is_symmetric(X) and _is_symmetric(P)):
            raise ValueError("X and P must be symmetric")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "commutator_gram", gram)
        object.__setattr__(self, "_n", n)

    @property
    def n_modes(self) -> int:
        return self._n

    @property
    def is_canonical(self) -> bool:
        return np.allclose(self.commutator_gram, np.eye(self._n), rtol=0, atol=1e-12)

    @property
    def has_cross_terms(self) -> bool:
        return bool(np.any(self.C != 0))

    def gamma(self) -> np.ndarray:
        """Full ``2n x 2n`` covariance in ``(q.., p..)`` ordering."""
        return np.block([[self.X, self.C], [self.C.T, self.P]])

    @classmethod
    def from_gamma(cls, gamma, commutator_gram=None) -> "CovarianceMatrix":
        gamma = np.asarray(gamma, dtype=float)
        n = gamma.shape[0] // 2
        return cls(
            X=gamma[:n, :n],
            P=gamma[n:, n:],
            C=gamma[:n, n:],
            commutator_gram=commutator_gram,
        )

    def transform(self, S: np.ndarray) -> "CovarianceMatrix":
        """Apply a linear map ``r -> S r`` on the quadrature vector."""
        g = S @ self.gamma() @ S.T
        om = S @ _gram_form(self.commutator_gram) @ S.T
        n = g.shape[0] // 2
        return CovarianceMatrix.from_gamma((g + g.T) / 2, commutator_gram=om[:n, n:])


def _gram_form(gram):
    n = gram.shape[0]
    zero = np.zeros((n, n))
    return np.block([[zero, gram], [-gram.T, zero]])


@dataclass(frozen=True)
class SymplecticSpectrum:
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())[::-1]
        if v.size and v[-1] < 0.5 - PURITY_TOL:
            raise NotAQuantumStateError(
                f"symplectic eigenvalue {v[-1]:.3e} below 1/2: not a quantum state"
            )
        object.__setattr__(self, "values", np.maximum(v, 0.5))

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


def restrict(cov: CovarianceMatrix, subset: Iterable[int]) -> CovarianceMatrix:
    """Reduced state on ``subset``; a Gaussian partial trace keeps sub-blocks."""
    idx = np.asarray(list(subset), dtype=int)
    if idx.size == 0:
        raise ValueError("subset must be non-empty")
    if idx.min() < 0 or idx.max() >= cov.n_modes:
        raise IndexError(f"subset indices out of range for {cov.n_modes} modes")
    if np.unique(idx).size != idx.size:
        raise ValueError("subset contains repeated indices")
    block = np.ix_(idx, idx)
    return CovarianceMatrix(
        X=cov.X[block],
        P=cov.P[block],
        C=cov.C[block],
        commutator_gram=cov.commutator_gram[block],
    )


def _spectrum_from_product(X, P):
    # sqrt(X P) is similar to sqrt(X^1/2 P X^1/2), which is symmetric
    ev, U = np.linalg.eigh(X)
    if ev.min() <= 0:
        raise NotAQuantumStateError("X is not positive-definite")
    root = (U * np.sqrt(ev)) @ U.T
    inner = root @ P @ root
    nu2 = np.linalg.eigvalsh((inner + inner.T) / 2)
    if nu2.min() <= 0:
        raise NotAQuantumStateError("P is not positive-definite")
    return np.sqrt(nu2)


def _spectrum_from_form(gamma):
    n = gamma.shape[0] // 2
    if np.linalg.eigvalsh(gamma).min() <= 0:
        raise NotAQuantumStateError("covariance is not positive-definite")
    ev = np.linalg.eigvals(1j * symplectic_form(n) @ gamma)
    # eigenvalues of i Omega Gamma come in pairs +-nu
    pos = np.sort(ev.real)[n:]
    return pos


def symplectic_spectrum(
    cov: CovarianceMatrix, method: Literal["auto", "product", "form"] = "auto"
) -> SymplecticSpectrum:
    """Symplectic eigenvalues of a canonical Gaussian state.

    ``"product"`` uses the principal square root of ``X P`` (valid only
    without cross moments); ``"form"`` diagonalizes ``i Omega Gamma``.
    ``"auto"`` picks the product route whenever ``C`` vanishes.
    """
    if not cov.is_canonical:
        raise ValueError(
            "modes are not canonical; orthonormalize the commutator Gram matrix first"
        )
    if method == "auto":
        method = "form" if cov.has_cross_terms else "product"
    if method == "product":
        if cov.has_cross_terms:
            raise ValueError("product route requires vanishing cross moments")
        values = _spectrum_from_product(cov.X, cov.P)
    elif method == "form":
        values = _spectrum_from_form(cov.gamma())
    else:
        raise ValueError(f"unknown method {method!r}")
    return SymplecticSpectrum(values)


def _mode_entropy(nu):
    nu = np.asarray(nu, dtype=float)
    return xlogy(nu + 0.5, nu + 0.5) - xlogy(nu - 0.5, nu - 0.5)


def entropy(spectrum: SymplecticSpectrum) -> float:
    """Von Neumann entropy (nats) of a Gaussian state from its spectrum."""
    if not isinstance(spectrum, SymplecticSpectrum):
        spectrum = SymplecticSpectrum(spectrum)
    return float(np.sum(_mode_entropy(spectrum.values)))


def covariance_entropy(cov: CovarianceMatrix, subset: Iterable[int] | None = None) -> float:
    if subset is not None:
        cov = restrict(cov, subset)
    return entropy(symplectic_spectrum(cov))


def entanglement_entropy(model: "LatticeModel", region: Iterable[int]) -> float:
    """Entropy of the lattice vacuum reduced to the sites in ``region``."""
    from .lattice import vacuum_covariance

    return covariance_entropy(vacuum_covariance(model), region)
