import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from cgentangle.coarse_grain import (
    CoarseGrainer,
    ModeFamily,
    analytic_overlap,
    commutant_residual,
    commutator_matrix,
    complete_basis,
    ladder_moments,
    lowdin,
    lowdin_orthonormalize,
    make_profile,
    profile_matrix,
    quadrature_maps,
    reduced_cg_covariance,
    split_transform,
)
from cgentangle.gaussian import covariance_entropy, restrict, symplectic_spectrum
from cgentangle.lattice import LatticeModel, vacuum_covariance


def single_nu(eps, mass, n=256):
    model = LatticeModel(n, mass)
    family = ModeFamily(1, separation=10 * eps, epsilon=eps, origin=n // 2)
    return symplectic_spectrum(reduced_cg_covariance(family, model)).values[0]


def test_profile_normalized():
    assert make_profile(0.0, 4.0, LatticeModel(256, 1.0)).norm == pytest.approx(1.0, abs=1e-10)


def test_profile_peak():
    p = make_profile(0.0, 4.0, LatticeModel(256, 1.0))
    assert p.samples[0] == pytest.approx((2 * np.pi * 16) ** -0.25, rel=1e-10)


def test_profile_wraps_around_the_ring():
    model = LatticeModel(64, 1.0)
    p = make_profile(0.0, 3.0, model)
    np.testing.assert_allclose(p.samples[1:], p.samples[1:][::-1], atol=1e-15)


def test_discrete_overlap_of_two_profiles():
    model = LatticeModel(256, 1.0)
    a, b = make_profile(0.0, 4.0, model), make_profile(40.0, 4.0, model)
    assert np.sum(a.samples * b.samples) == pytest.approx(np.exp(-12.5), rel=0.05)


@pytest.mark.parametrize("eps", [1.0, 1.9])
def test_narrow_profiles_rejected(eps):
    with pytest.raises(ValueError):
        make_profile(0.0, eps, LatticeModel(64, 1.0))


def test_profile_must_fit_the_ring():
    with pytest.raises(ValueError):
        make_profile(0.0, 8.0, LatticeModel(32, 1.0))


def test_commutator_diagonal_and_tails():
    family = ModeFamily(8, separation=40.0, epsilon=4.0)
    gram = commutator_matrix(family, LatticeModel(512, 1.0))
    np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-10)
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) <= 4e-6
    assert family.approximately_canonical


def test_close_profiles_not_canonical():
    family = ModeFamily(4, separation=8.0, epsilon=4.0)
    gram = commutator_matrix(family, LatticeModel(256, 1.0))
    assert gram[0, 1] == pytest.approx(np.exp(-0.5), rel=1e-6)
    assert not family.approximately_canonical
    with pytest.raises(ValueError, match="canonical"):
        reduced_cg_covariance(family, LatticeModel(256, 1.0))


@settings(max_examples=30, deadline=None)
@given(
    eps=st.floats(2.0, 6.0),
    ratio=st.floats(0.5, 12.0),
    n_modes=st.integers(2, 5),
)
def test_gram_matches_analytic_overlap(eps, ratio, n_modes):
    family = ModeFamily(n_modes, separation=ratio * eps, epsilon=eps)
    gram = commutator_matrix(family, LatticeModel(512, 1.0))
    exact = analytic_overlap(family)
    assert np.all(np.abs(gram - exact) <= np.maximum(1e-8, 0.02 * exact))


def test_quadrature_maps_rows():
    model = LatticeModel(256, 0.3, spacing=0.5)
    family = ModeFamily(2, separation=40.0, epsilon=4.0)
    Gq, Gp = quadrature_maps(family, model)
    # a * g with sum g^2 a = 1
    np.testing.assert_allclose(np.sum(Gq**2, axis=1) / model.spacing, 1.0, atol=1e-10)
    np.testing.assert_allclose(Gq, model.spacing * Gp)
    cov = vacuum_covariance(model)
    assert Gq[0] @ cov.X @ Gq[0] > 0


def test_vacuum_correlations_between_distant_detectors():
    model = LatticeModel(256, 1e-3)
    family = ModeFamily(2, separation=20.0, epsilon=2.0)
    Gq, _ = quadrature_maps(family, model)
    cov = vacuum_covariance(model)
    assert abs(Gq[0] @ cov.X @ Gq[1]) > 1e-6


def test_heavy_field_leaves_detector_nearly_pure():
    assert single_nu(4.0, 2.5) - 0.5 < 1e-2


def test_light_field_leaves_detector_mixed():
    assert single_nu(4.0, 0.025) - 0.5 > 0.05


def test_entropy_of_one_detector_falls_with_mass():
    eps, n = 8.0, 512
    values = []
    for mu in (0.5, 1, 2, 4, 8):
        model = LatticeModel(n, mu / eps)
        family = ModeFamily(2, separation=10 * eps, epsilon=eps, origin=n // 2)
        state = reduced_cg_covariance(family, model, orthonormalize=True)
        values.append(covariance_entropy(state, [0]))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_orthonormalized_state_is_canonical():
    family = ModeFamily(3, separation=8.0, epsilon=4.0)
    state = reduced_cg_covariance(family, LatticeModel(128, 0.5), orthonormalize=True)
    assert state.is_canonical
    assert symplectic_spectrum(state).values.min() >= 0.5


def test_ladder_occupations():
    eps, n = 4.0, 256
    family = ModeFamily(1, separation=40.0, epsilon=eps, origin=n // 2)
    heavy = LatticeModel(n, 10 / eps)
    light = LatticeModel(n, 0.1 / eps)
    matched = ladder_moments(family, heavy).occupations[0]
    assert matched < 1e-2
    assert ladder_moments(family, light).occupations[0] > 0.1
    mismatched = ladder_moments(family, heavy, ladder_mass=100 * heavy.mass).occupations[0]
    assert mismatched > 100 * matched


def test_ladder_mass_from_family_and_validation():
    model = LatticeModel(128, 0.5)
    family = ModeFamily(1, separation=40.0, epsilon=4.0, origin=64, ladder_mass=2.0)
    assert ladder_moments(family, model).ladder_mass == 2.0
    with pytest.raises(ValueError):
        ladder_moments(family, model, ladder_mass=0.0)


def test_ladder_moments_are_hermitian_and_symmetric():
    model = LatticeModel(256, 0.2)
    family = ModeFamily(3, separation=12.0, epsilon=4.0, origin=100)
    lm = ladder_moments(family, model, orthonormalize=True)
    np.testing.assert_allclose(lm.number, lm.number.conj().T, atol=1e-14)
    np.testing.assert_allclose(lm.anomalous, lm.anomalous.T, atol=1e-14)
    assert np.linalg.eigvalsh(lm.number).min() > -1e-12


@pytest.mark.parametrize("method", ["svd", "qr"])
def test_completed_basis(method):
    model = LatticeModel(128, 0.5, spacing=0.5)
    family = ModeFamily(3, separation=10.0, epsilon=2.0, origin=10.0)
    O = complete_basis(family, model, method=method)
    np.testing.assert_allclose(O @ O.T, np.eye(128), atol=1e-10)
    V = lowdin_orthonormalize(np.sqrt(model.spacing) * profile_matrix(family, model))
    np.testing.assert_allclose(O[:3], V, atol=1e-10)
    state = vacuum_covariance(model).transform(split_transform(O, model.spacing))
    np.testing.assert_allclose(symplectic_spectrum(state).values, 0.5, atol=1e-8)
    assert commutant_residual(O, 3, model.spacing) < 1e-10


def test_completion_needs_fewer_profiles_than_sites():
    with pytest.raises(ValueError):
        complete_basis(ModeFamily(4, separation=4.0, epsilon=2.0), LatticeModel(4, 1.0))


@pytest.mark.parametrize("spacing", [1.0, 0.5])
def test_restriction_equals_tracing_out_fine_modes(spacing):
    model = LatticeModel(128, 0.3, spacing=spacing)
    family = ModeFamily(3, separation=6.0, epsilon=2.0, origin=5.0)
    direct = covariance_entropy(reduced_cg_covariance(family, model, orthonormalize=True))
    for method in ("svd", "qr"):
        O = complete_basis(family, model, method=method, seed=7)
        full = vacuum_covariance(model).transform(split_transform(O, spacing))
        via_split = covariance_entropy(restrict(full, range(3)))
        assert via_split == pytest.approx(direct, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_lowdin_idempotent(n, seed):
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((n, n + 4))
    once = lowdin_orthonormalize(vectors)
    np.testing.assert_allclose(once @ once.T, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(lowdin_orthonormalize(once), once, atol=1e-12)


def test_lowdin_rejects_degenerate_profiles():
    with pytest.raises(ValueError, match="positive-definite"):
        lowdin(np.ones((2, 2)))


class TestCoarseGrainer:
    def samples(self, n=128, rows=5):
        return np.random.default_rng(0).standard_normal((rows, n))

    def test_params_and_clone(self):
        est = CoarseGrainer(n_modes=2, epsilon=3.0, separation=30.0)
        params = est.get_params()
        assert params["n_modes"] == 2 and params["epsilon"] == 3.0
        twin = clone(est)
        assert twin.get_params() == params
        assert not hasattr(twin, "components_")

    def test_transform_shapes(self):
        X = self.samples()
        out = CoarseGrainer(n_modes=3, separation=30.0, origin=10.0).fit_transform(X)
        assert out.shape == (5, 3)

    def test_orthonormal_components_preserve_canonical_pairs(self):
        X = self.samples()
        q = CoarseGrainer(n_modes=2, separation=8.0, epsilon=4.0).fit(X)
        p = CoarseGrainer(n_modes=2, separation=8.0, epsilon=4.0, quadrature="momentum").fit(X)
        np.testing.assert_allclose(q.components_ @ p.components_.T, np.eye(2), atol=1e-12)

    def test_matches_quadrature_maps(self):
        X = self.samples()
        est = CoarseGrainer(n_modes=2, separation=40.0, orthonormalize=False).fit(X)
        Gq, _ = quadrature_maps(ModeFamily(2, separation=40.0, epsilon=4.0), LatticeModel(128, 1.0))
        np.testing.assert_allclose(est.transform(X), X @ Gq.T)

    def test_in_pipeline(self):
        X = self.samples()
        pipe = make_pipeline(FunctionTransformer(lambda a: 2 * a), CoarseGrainer(n_modes=1))
        single = CoarseGrainer(n_modes=1).fit(X)
        np.testing.assert_allclose(pipe.fit_transform(X), 2 * single.transform(X))

    def test_feature_mismatch(self):
        est = CoarseGrainer().fit(self.samples())
        with pytest.raises(ValueError, match="features"):
            est.transform(self.samples(n=64))

    def test_bad_quadrature(self):
        with pytest.raises(ValueError):
            CoarseGrainer(quadrature="both").fit(self.samples())
