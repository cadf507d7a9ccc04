"""Gaussian detector profiles and the coarse-grained mode algebra.

A family of ``M`` profiles centred at ``origin + j*d`` defines smeared
quadratures ``q_j = sum_i a g_j(x_i) q_i`` and ``p_j = sum_i g_j(x_i) p_i``
on the lattice, so that ``[q_j, p_k] = i G_jk`` with ``G`` the discrete
overlap (Gram) matrix of the profiles.  Lowdin orthonormalization turns
these into exactly canonical modes, and completing them to an orthonormal
basis splits the lattice into accessible and inaccessible subsystems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import null_space
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .gaussian import CovarianceMatrix, symplectic_form
from .lattice import LatticeModel, vacuum_covariance

__all__ = [
    "Profile",
    "ModeFamily",
    "LadderMoments",
    "CANONICAL_OVERLAP_THRESHOLD",
    "make_profile",
    "sample_profiles",
    "profile_matrix",
    "commutator_matrix",
    "analytic_overlap",
    "quadrature_maps",
    "lowdin",
    "lowdin_orthonormalize",
    "reduced_cg_covariance",
    "ladder_moments",
    "complete_basis",
    "split_transform",
    "commutant_residual",
    "CoarseGrainer",
]

CANONICAL_OVERLAP_THRESHOLD = 1e-4
EDGE_TOL = 1e-12
MIN_EPSILON_SITES = 2.0


def _gaussian_profile(x, epsilon):
    return (2 * np.pi * epsilon**2) ** -0.25 * np.exp(-(x**2) / (4 * epsilon**2))


def _sample_gaussian(center, epsilon, num_sites, spacing):
    if epsilon < MIN_EPSILON_SITES * spacing:
        raise ValueError(
            f"epsilon={epsilon} is below {MIN_EPSILON_SITES:g} lattice spacings; "
            "the sampled profile would not resolve the Gaussian"
        )
    length = num_sites * spacing
    if _gaussian_profile(length / 2, epsilon) >= EDGE_TOL:
        raise ValueError(
            f"profile of width {epsilon} does not fit in a ring of length {length}: "
            f"value {_gaussian_profile(length / 2, epsilon):.2e} at the far side"
        )
    x = np.arange(num_sites) * spacing
    disp = np.mod(x - center + length / 2, length) - length / 2
    g = _gaussian_profile(disp, epsilon)
    return g / np.sqrt(np.sum(g**2) * spacing)


@dataclass(frozen=True, eq=False)
class Profile:
    """Sampled, L2-normalized Gaussian detection profile on the ring."""

    center: float
    epsilon: float
    samples: np.ndarray
    spacing: float = 1.0

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.samples**2) * self.spacing))


def make_profile(center: float, epsilon: float, model: LatticeModel) -> Profile:
    samples = _sample_gaussian(center, epsilon, model.num_sites, model.spacing)
    return Profile(center=float(center), epsilon=float(epsilon), samples=samples, spacing=model.spacing)


@dataclass(frozen=True)
class ModeFamily:
    """Geometry of ``n_modes`` profiles of width ``epsilon`` spaced by ``separation``.

    ``ladder_mass`` is the mass entering the coarse-grained ladder
    operators; ``None`` means "use the field mass".
    """

    n_modes: int
    separation: float
    epsilon: float
    origin: float = 0.0
    ladder_mass: float | None = None

    def __post_init__(self):
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.ladder_mass is not None and not self.ladder_mass > 0:
            raise ValueError("ladder_mass must be positive")

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.separation * np.arange(self.n_modes)

    @property
    def separation_ratio(self) -> float:
        return self.separation / self.epsilon

    @property
    def neighbour_overlap(self) -> float:
        """Continuum overlap of adjacent profiles, ``exp(-d^2 / 8 eps^2)``."""
        return float(np.exp(-self.separation_ratio**2 / 8))

    @property
    def approximately_canonical(self) -> bool:
        if self.n_modes == 1:
            return True
        return self.neighbour_overlap < CANONICAL_OVERLAP_THRESHOLD


def sample_profiles(family: ModeFamily, model: LatticeModel) -> list[Profile]:
    return [make_profile(c, family.epsilon, model) for c in family.centers]


def profile_matrix(family: ModeFamily, model: LatticeModel) -> np.ndarray:
    """``M x N`` array of sampled profile values ``g_j(x_i)``."""
    return np.stack([p.samples for p in sample_profiles(family, model)])


def commutator_matrix(family: ModeFamily, model: LatticeModel) -> np.ndarray:
    """``[q_j, p_k] / i``, the discrete Gram matrix of the profiles."""
    g = profile_matrix(family, model)
    gram = model.spacing * g @ g.T
    return (gram + gram.T) / 2


def analytic_overlap(family: ModeFamily) -> np.ndarray:
    j = np.arange(family.n_modes)
    diff = (j[:, None] - j[None, :]) * family.separation
    return np.exp(-(diff**2) / (8 * family.epsilon**2))


def quadrature_maps(family: ModeFamily, model: LatticeModel) -> tuple[np.ndarray, np.ndarray]:
    """Linear maps from lattice quadratures to raw coarse-grained ones.

    Returns ``(Gq, Gp)`` with ``q_cg = Gq @ q`` and ``p_cg = Gp @ p``.
    """
    g = profile_matrix(family, model)
    return model.spacing * g, g


def lowdin(gram: np.ndarray) -> np.ndarray:
    """Inverse square root of a symmetric positive-definite overlap matrix."""
    gram = np.asarray(gram, dtype=float)
    ev, U = np.linalg.eigh((gram + gram.T) / 2)
    if ev.min() <= 1e-12 * max(1.0, ev.max()):
        raise ValueError(
            f"Gram matrix is not positive-definite (min eigenvalue {ev.min():.3e}); "
            "profiles are degenerate"
        )
    T = (U / np.sqrt(ev)) @ U.T
    return (T + T.T) / 2


def lowdin_orthonormalize(vectors: np.ndarray) -> np.ndarray:
    """Symmetric orthonormalization of the rows of ``vectors``."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    return lowdin(vectors @ vectors.T) @ vectors


def reduced_cg_covariance(
    family: ModeFamily,
    model: LatticeModel,
    orthonormalize: bool = False,
    cov: CovarianceMatrix | None = None,
) -> CovarianceMatrix:
    """State of the coarse-grained modes, i.e. the lattice state with the
    inaccessible degrees of freedom traced out.

    Without ``orthonormalize`` the raw moments are returned and the
    commutator Gram matrix is recorded on the result; that is only allowed
    for approximately canonical families.  ``cov`` defaults to the lattice
    vacuum.
    """
    if not (orthonormalize or family.approximately_canonical):
        raise ValueError(
            f"family with d/eps={family.separation_ratio:.3g} is not approximately "
            "canonical; pass orthonormalize=True"
        )
    if cov is None:
        cov = vacuum_covariance(model)
    if cov.n_modes != model.num_sites:
        raise ValueError("covariance does not match the lattice size")
    Gq, Gp = quadrature_maps(family, model)
    gram = Gq @ Gp.T
    gram = (gram + gram.T) / 2
    if orthonormalize:
        T = lowdin(gram)
        Gq, Gp = T @ Gq, T @ Gp
        gram = np.eye(family.n_modes)
    X = Gq @ cov.X @ Gq.T
    P = Gp @ cov.P @ Gp.T
    C = Gq @ cov.C @ Gp.T
    return CovarianceMatrix(X=(X + X.T) / 2, P=(P + P.T) / 2, C=C, commutator_gram=gram)


@dataclass(frozen=True, eq=False)
class LadderMoments:
    """``number[j, k] = <a_j^+ a_k>`` and ``anomalous[j, k] = <a_j a_k>``."""

    number: np.ndarray
    anomalous: np.ndarray
    ladder_mass: float

    @property
    def occupations(self) -> np.ndarray:
        return np.real(np.diag(self.number))


def ladder_moments(
    family: ModeFamily,
    model: LatticeModel,
    ladder_mass: float | None = None,
    orthonormalize: bool = False,
    cov: CovarianceMatrix | None = None,
) -> LadderMoments:
    """Moments of ``a_j = (sqrt(m') q_j + i p_j / sqrt(m')) / sqrt(2)``.

    ``m'`` is taken from the argument, then ``family.ladder_mass``, then
    the field mass.  The commutator Gram matrix enters the normal-ordered
    number moments, so raw families give meaningful occupations.
    """
    if ladder_mass is None:
        ladder_mass = family.ladder_mass
    if ladder_mass is None:
        ladder_mass = model.effective_mass
    if not ladder_mass > 0:
        raise ValueError(f"ladder mass must be positive, got {ladder_mass!r}")
    state = reduced_cg_covariance(family, model, orthonormalize=orthonormalize, cov=cov)
    mq = ladder_mass
    X, P, C, G = state.X, state.P, state.C, state.commutator_gram
    number = 0.5 * (mq * X + P / mq - G) + 0.5j * (C - C.T)
    anomalous = 0.5 * (mq * X - P / mq) + 0.5j * (C + C.T)
    return LadderMoments(number=number, anomalous=anomalous, ladder_mass=float(ladder_mass))


def complete_basis(
    family: ModeFamily,
    model: LatticeModel,
    method: Literal["svd", "qr"] = "svd",
    seed: int | None = 0,
) -> np.ndarray:
    """Orthogonal ``N x N`` matrix whose first ``M`` rows are the
    orthonormalized profile vectors ``sqrt(a) g_j``.

    The remaining rows are an arbitrary orthonormal completion; ``"svd"``
    takes the null space from an SVD, ``"qr"`` orthogonalizes seeded
    random vectors against the profiles.
    """
    n = model.num_sites
    if family.n_modes >= n:
        raise ValueError("need fewer profiles than lattice sites to complete a basis")
    V = lowdin_orthonormalize(np.sqrt(model.spacing) * profile_matrix(family, model))
    if method == "svd":
        rest = null_space(V).T
    elif method == "qr":
        rng = np.random.default_rng(seed)
        R = rng.standard_normal((n, n - family.n_modes))
        R -= V.T @ (V @ R)
        Q, r = np.linalg.qr(R)
        if np.min(np.abs(np.diag(r))) < 1e-10:
            raise ValueError("rank-deficient completion")
        # second projection pass removes the residual profile component
        Q -= V.T @ (V @ Q)
        Q, _ = np.linalg.qr(Q)
        rest = Q.T
    else:
        raise ValueError(f"unknown completion method {method!r}")
    if rest.shape[0] != n - family.n_modes:
        raise ValueError("rank deficiency: profile span has the wrong dimension")
    return np.vstack([V, rest])


def split_transform(basis: np.ndarray, spacing: float = 1.0) -> np.ndarray:
    """Quadrature map ``(q, p) -> (sqrt(a) O q, O p / sqrt(a))`` for an
    orthogonal ``O``; symplectic, so it preserves the vacuum's purity."""
    n = basis.shape[0]
    zero = np.zeros((n, n))
    return np.block(
        [[np.sqrt(spacing) * basis, zero], [zero, basis / np.sqrt(spacing)]]
    )


def commutant_residual(basis: np.ndarray, n_coarse: int, spacing: float = 1.0) -> float:
    """Largest commutator between a coarse and a fine quadrature after the split."""
    S = split_transform(basis, spacing)
    n = basis.shape[0]
    form = S @ symplectic_form(n) @ S.T
    idx = np.arange(2 * n)
    coarse = (idx % n) < n_coarse
    return float(np.max(np.abs(form[np.ix_(coarse, ~coarse)]), initial=0.0))


class CoarseGrainer(TransformerMixin, BaseEstimator):
    """Maps lattice field configurations onto coarse-grained detector modes.

    Samples are rows of lattice quadrature values on a ring with
    ``n_features`` sites; ``fit`` lays the detector profiles on that ring
    and ``transform`` returns the smeared quadratures, one column per
    detector.

    Parameters
    ----------
    n_modes : int
        Number of detector profiles.
    epsilon : float
        Profile width.
    separation : float
        Distance ``d`` between adjacent profile centres.
    origin : float
        Centre of the first profile.
    lattice_spacing : float
        Distance between lattice sites.
    quadrature : {"field", "momentum"}
        Whether inputs are field values ``q_i`` or momenta ``p_i``.
    orthonormalize : bool
        Apply Lowdin orthonormalization so the output modes are canonical.
    """

    def __init__(
        self,
        n_modes=1,
        epsilon=4.0,
        separation=40.0,
        origin=0.0,
        lattice_spacing=1.0,
        quadrature="field",
        orthonormalize=True,
    ):
        self.n_modes = n_modes
        self.epsilon = epsilon
        self.separation = separation
        self.origin = origin
        self.lattice_spacing = lattice_spacing
        self.quadrature = quadrature
        self.orthonormalize = orthonormalize

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        if self.quadrature not in ("field", "momentum"):
            raise ValueError(f"quadrature must be 'field' or 'momentum', got {self.quadrature!r}")
        family = ModeFamily(
            n_modes=self.n_modes,
            separation=self.separation,
            epsilon=self.epsilon,
            origin=self.origin,
        )
        model = LatticeModel(num_sites=X.shape[1], mass=1.0, spacing=self.lattice_spacing)
        Gq, Gp = quadrature_maps(family, model)
        self.gram_ = (Gq @ Gp.T + Gp @ Gq.T) / 2
        components = Gq if self.quadrature == "field" else Gp
        if self.orthonormalize:
            components = lowdin(self.gram_) @ components
        self.components_ = components
        self.centers_ = family.centers
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but CoarseGrainer was fitted with {self.n_features_in_}"
            )
        return X @ self.components_.T
