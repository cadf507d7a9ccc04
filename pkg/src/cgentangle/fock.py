"""Truncated bosonic Fock space over a few localized modes.

Spin is handled by doubling the modes: physical mode ``j`` with spin ``s``
(0 = up, 1 = down) is effective mode ``2*j + s``.  Basis states are
occupation tuples in graded order: by total particle number, then
descending lexicographic order, so ``(1, 0)`` precedes ``(0, 1)``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MAX_DIMENSION",
    "TrivialBipartitionWarning",
    "FockBasis",
    "FockState",
    "BoundCheck",
    "dim_exact",
    "dim_bounded",
    "vacuum",
    "create",
    "singlet_state",
    "random_state",
    "reduced_density_matrix",
    "reduced_entropy",
    "bound_check",
    "maximal_entropy_state",
]

MAX_DIMENSION = 10**6


class TrivialBipartitionWarning(UserWarning):
    """The subsystem is empty or the whole system, so the entropy is 0."""


def dim_exact(n_modes: int, n_particles: int) -> int:
    """Number of ways to place ``n_particles`` bosons in ``n_modes`` modes."""
    if n_modes < 1 or n_particles < 0:
        raise ValueError("need n_modes >= 1 and n_particles >= 0")
    return math.comb(n_modes + n_particles - 1, n_particles)


def dim_bounded(n_modes: int, max_particles: int) -> int:
    """Dimension of the ``n_modes``-mode space with at most ``max_particles``
    bosons, ``(M+N)! / (M! N!)``.  The closed form is checked against the
    sum over particle numbers."""
    summed = sum(dim_exact(n_modes, n) for n in range(max_particles + 1))
    closed = math.comb(n_modes + max_particles, max_particles)
    if summed != closed:  # pragma: no cover - exact integer identity
        raise ArithmeticError(f"dimension mismatch {summed} != {closed}")
    return closed


def _compositions(n, parts):
    """Weak compositions of ``n`` into ``parts`` in descending lex order."""
    if parts == 1:
        yield (n,)
        return
    for head in range(n, -1, -1):
        for tail in _compositions(n - head, parts - 1):
            yield (head,) + tail


@dataclass(frozen=True)
class FockBasis:
    num_modes: int
    max_total: int
    spin: bool = False
    _states: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.num_modes < 1 or self.max_total < 0:
            raise ValueError("need num_modes >= 1 and max_total >= 0")
        if self.dimension > MAX_DIMENSION:
            raise ValueError(
                f"basis dimension {self.dimension} exceeds the cap {MAX_DIMENSION}"
            )
        states = tuple(
            s for n in range(self.max_total + 1) for s in _compositions(n, self.effective_modes)
        )
        object.__setattr__(self, "_states", states)

    @property
    def effective_modes(self) -> int:
        return self.num_modes * (2 if self.spin else 1)

    @property
    def dimension(self) -> int:
        return dim_bounded(self.effective_modes, self.max_total)

    @property
    def states(self) -> tuple:
        return self._states

    @functools.cached_property
    def occupations(self) -> np.ndarray:
        return np.array(self._states, dtype=int).reshape(len(self._states), self.effective_modes)

    @functools.cached_property
    def _index(self) -> dict:
        return {s: i for i, s in enumerate(self._states)}

    def index(self, occupation: Sequence[int]) -> int:
        return self._index[tuple(occupation)]

    def mode(self, j: int, s: int | None = None) -> int:
        """Effective mode index of physical mode ``j`` (and spin ``s``)."""
        if not 0 <= j < self.num_modes:
            raise IndexError(f"mode {j} out of range")
        if not self.spin:
            if s is not None:
                raise ValueError("basis has no spin label")
            return j
        if s not in (0, 1):
            raise ValueError("spin label must be 0 (up) or 1 (down)")
        return 2 * j + s

    def effective_subset(self, modes: Iterable[int]) -> list[int]:
        """Effective modes belonging to the physical modes in ``modes``."""
        out = []
        for j in modes:
            if not 0 <= j < self.num_modes:
                raise IndexError(f"mode {j} out of range")
            out.extend([2 * j, 2 * j + 1] if self.spin else [j])
        return sorted(set(out))


@dataclass(frozen=True, eq=False)
class FockState:
    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dimension,):
            raise ValueError("amplitude vector does not match the basis dimension")
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-12:
            raise ValueError("state is not normalized")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, basis: FockBasis, amplitudes) -> "FockState":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero vector cannot be normalized")
        return cls(basis, amps / norm)

    @property
    def support(self) -> np.ndarray:
        """Occupation tuples carrying non-zero amplitude."""
        return self.basis.occupations[self.amplitudes != 0]


def vacuum(basis: FockBasis) -> FockState:
    amps = np.zeros(basis.dimension, dtype=complex)
    amps[0] = 1.0
    return FockState(basis, amps)


def create(basis: FockBasis, amplitudes: np.ndarray, mode: int) -> np.ndarray:
    """Apply the bosonic creation operator of effective ``mode``.

    Raises if any component would leave the truncated space.
    """
    out = np.zeros(basis.dimension, dtype=complex)
    occ = basis.occupations
    for i in np.flatnonzero(amplitudes):
        target = occ[i].copy()
        target[mode] += 1
        if target.sum() > basis.max_total:
            raise ValueError("creation leaves the truncated Fock space; raise max_total")
        out[basis.index(target)] += np.sqrt(target[mode]) * amplitudes[i]
    return out


def singlet_state(i: int, j: int, basis: FockBasis) -> FockState:
    """``(a+_{i,up} a+_{j,down} - a+_{i,down} a+_{j,up}) |0> / sqrt(2)``."""
    if not basis.spin:
        raise ValueError("singlet needs a basis with spin")
    if i == j:
        raise ValueError("singlet needs two distinct sites")
    if basis.max_total < 2:
        raise ValueError("singlet needs max_total >= 2")
    vac = vacuum(basis).amplitudes
    up_down = create(basis, create(basis, vac, basis.mode(j, 1)), basis.mode(i, 0))
    down_up = create(basis, create(basis, vac, basis.mode(j, 0)), basis.mode(i, 1))
    return FockState(basis, (up_down - down_up) / np.sqrt(2))


def random_state(basis: FockBasis, rng: np.random.Generator) -> FockState:
    """Haar-like random pure state; the caller owns the generator."""
    z = rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(basis.dimension)
    return FockState.normalized(basis, z)


def _split(state: FockState, subset_eff):
    occ = state.basis.occupations
    rest = [m for m in range(state.basis.effective_modes) if m not in set(subset_eff)]
    keys_a, ia = np.unique(occ[:, subset_eff], axis=0, return_inverse=True)
    keys_b, ib = np.unique(occ[:, rest], axis=0, return_inverse=True)
    psi = np.zeros((len(keys_a), len(keys_b)), dtype=complex)
    psi[ia.ravel(), ib.ravel()] = state.amplitudes
    return psi, keys_a


def reduced_density_matrix(state: FockState, mode_subset: Iterable[int]) -> np.ndarray:
    """Reduced density operator on the physical modes in ``mode_subset``,
    indexed by the distinct occupation patterns of those modes."""
    subset_eff = state.basis.effective_subset(mode_subset)
    psi, _ = _split(state, subset_eff)
    return psi @ psi.conj().T


def _vn_entropy(rho):
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    lam = lam[lam > 1e-300]
    return float(-np.sum(lam * np.log(lam)))


def reduced_entropy(state: FockState, mode_subset: Iterable[int]) -> float:
    """Entanglement entropy (nats) between ``mode_subset`` and the rest."""
    subset = sorted(set(mode_subset))
    if not subset or len(subset) == state.basis.num_modes:
        warnings.warn(
            "trivial bipartition; entropy of a pure state is 0", TrivialBipartitionWarning,
            stacklevel=2,
        )
        return 0.0
    return _vn_entropy(reduced_density_matrix(state, subset))


@dataclass(frozen=True)
class BoundCheck:
    entropy: float
    bound: float
    satisfied: bool


def bound_check(state: FockState, mode_subset: Iterable[int],
                max_particles: int | None = None) -> BoundCheck:
    """Compare the subsystem entropy with ``ln D`` of the subsystem's
    ``M_A``-mode space holding at most ``max_particles`` bosons.

    ``max_particles`` defaults to the largest total occupation in the
    state's support; a smaller value is accepted only if the subsystem
    never holds more than that many particles.
    """
    subset = sorted(set(mode_subset))
    subset_eff = state.basis.effective_subset(subset)
    support = state.support
    if max_particles is None:
        max_particles = int(support.sum(axis=1).max())
    elif support[:, subset_eff].sum(axis=1).max() > max_particles:
        raise ValueError("subsystem holds more than max_particles in some component")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrivialBipartitionWarning)
        s = reduced_entropy(state, subset)
    bound = math.log(dim_bounded(len(subset_eff), max_particles)) if subset_eff else 0.0
    return BoundCheck(entropy=s, bound=bound, satisfied=s <= bound + 1e-9)


def maximal_entropy_state(subset_modes: int, max_particles: int) -> tuple[FockState, list[int]]:
    """State whose marginal on the first ``subset_modes`` modes is maximally
    mixed over all configurations with at most ``max_particles`` bosons.

    Each subsystem configuration is paired with its mirror image on an
    equal number of partner modes, giving a uniform Schmidt spectrum of
    length ``D``.  Returns the state and the subsystem's mode list.
    """
    basis = FockBasis(2 * subset_modes, 2 * max_particles)
    configs = [s for n in range(max_particles + 1) for s in _compositions(n, subset_modes)]
    amps = np.zeros(basis.dimension, dtype=complex)
    for c in configs:
        amps[basis.index(c + c)] = 1.0
    return FockState.normalized(basis, amps), list(range(subset_modes))
