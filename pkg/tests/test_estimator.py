import numpy as np
import pytest

from oracles import bayes_posterior, density_likelihoods, random_state
from seqtom import estimator as est
from seqtom.estimator import (
    HypothesisGrid,
    ImpossibleOutcomeError,
    OpCounter,
    ParameterPoint,
    QQReferenceState,
    init_hybrid,
    init_qq,
)
from seqtom.measurement import MeasurementStrength, build_ic_kraus, build_z_kraus
from seqtom.qubit import IDENTITY, KET0, KET1, PreconditionError, density_matrix

TAU = 2 * np.pi / 10


def freq_grid(n=11):
    return HypothesisGrid.product(np.linspace(0.95, 1.05, n))


def random_grid(rng, n):
    return HypothesisGrid(tuple(
        ParameterPoint(rng.uniform(0.5, 1.5), rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
        for _ in range(n)))


def test_parameter_point_validation():
    with pytest.raises(PreconditionError):
        ParameterPoint(1.0, theta=-0.1)
    with pytest.raises(PreconditionError):
        ParameterPoint(1.0, phi=2 * np.pi)
    np.testing.assert_allclose(ParameterPoint(1.0).axis, (1, 0, 0), atol=1e-15)


def test_canonical_collapses_poles():
    assert ParameterPoint(1.0, 0.0, 2.0).canonical() == ParameterPoint(1.0, 0.0, 0.0)
    assert ParameterPoint(1.0, np.pi, 2.0).canonical() == ParameterPoint(1.0, np.pi, 0.0)
    assert ParameterPoint(1.0, 1.0, 2.0).canonical() == ParameterPoint(1.0, 1.0, 2.0)
    assert ParameterPoint(1.0, 0.0, 2.0).isclose(ParameterPoint(1.0, 0.0, 4.0))


def test_grid_validation_and_order():
    with pytest.raises(PreconditionError):
        HypothesisGrid(())
    with pytest.raises(PreconditionError):
        HypothesisGrid((ParameterPoint(1.0), ParameterPoint(1.0)))
    g = HypothesisGrid.product([1.0, 2.0], [0.5, 1.0], [0.0, 3.0])
    assert len(g) == 8
    assert g[0] == ParameterPoint(1.0, 0.5, 0.0) and g[1] == ParameterPoint(1.0, 0.5, 3.0)
    assert g[2] == ParameterPoint(1.0, 1.0, 0.0) and g[7] == ParameterPoint(2.0, 1.0, 3.0)
    assert g.index_of(ParameterPoint(2.0, 0.5, 3.0)) == 5
    with pytest.raises(KeyError):
        g.index_of(ParameterPoint(1.5))


def test_init_uniform_and_delta():
    g = freq_grid()
    h = init_hybrid(g, np.full(11, 1 / 11), KET0, TAU)
    np.testing.assert_allclose(est.posterior(h), 1 / 11, atol=1e-16)
    prior = np.zeros(11)
    prior[3] = 1.0
    h = init_hybrid(g, prior, KET0, TAU)
    assert np.count_nonzero(np.abs(h.phis).sum(axis=1)) == 1
    np.testing.assert_array_equal(est.posterior(h), prior)


def test_init_two_point_prior():
    g = freq_grid(2)
    h = init_hybrid(g, [0.6, 0.4], KET0, TAU)
    np.testing.assert_allclose(h.phis, [[np.sqrt(0.6), 0], [np.sqrt(0.4), 0]], atol=1e-16)


@pytest.mark.parametrize("prior", [[0.5, 0.5, 0.0], [0.5, 0.6], [1.2, -0.2]])
def test_init_rejects_bad_prior(prior):
    with pytest.raises(PreconditionError):
        init_hybrid(freq_grid(2), prior, KET0, TAU)


def test_predict_identity_propagators(rng):
    g = freq_grid(4)
    h = init_hybrid(g, np.full(4, 0.25), random_state(rng), TAU, propagators=np.array([IDENTITY] * 4))
    np.testing.assert_array_equal(est.predict(h).phis, h.phis)


def test_predict_half_turn():
    g = HypothesisGrid((ParameterPoint(1.0),))
    h = init_hybrid(g, [1.0], KET0, np.pi)
    np.testing.assert_allclose(est.predict(h).phis[0], -1j * KET1, atol=1e-15)


def test_predict_preserves_posterior(rng):
    for _ in range(20):
        g = random_grid(rng, 6)
        h = init_hybrid(g, rng.dirichlet(np.ones(6)), random_state(rng), TAU)
        h1 = est.predict(h)
        np.testing.assert_allclose(est.posterior(h1), est.posterior(h), atol=1e-15)
        assert abs(h1.total_weight - 1.0) < 1e-12


def test_update_with_scaled_identity_keeps_posterior(rng):
    g = random_grid(rng, 5)
    h = est.predict(init_hybrid(g, rng.dirichlet(np.ones(5)), random_state(rng), TAU))
    h1 = est.update(h, IDENTITY / np.sqrt(2))
    np.testing.assert_allclose(est.posterior(h1), est.posterior(h), atol=1e-15)


def test_update_two_hypotheses_bayes():
    # hypothesis 0 sits in |0>, hypothesis 1 in |1>; outcome z0 has likelihoods 0.6 and 0.4
    g = freq_grid(2)
    unit = np.array([IDENTITY, IDENTITY])
    h = est.HybridState(np.array([KET0, KET1]) / np.sqrt(2), unit)
    h1 = est.update(h, build_z_kraus(MeasurementStrength(0.2))["z0"])
    np.testing.assert_allclose(est.posterior(h1), [0.6, 0.4], atol=1e-15)


def test_update_impossible_outcome():
    k = build_z_kraus(MeasurementStrength(1.0))
    g = freq_grid(3)
    h = init_hybrid(g, np.full(3, 1 / 3), KET0, TAU, propagators=np.array([IDENTITY] * 3))
    with pytest.raises(ImpossibleOutcomeError):
        est.update(h, k["z1"])
    q = init_qq(np.full(3, 1 / 3), KET0)
    with pytest.raises(ImpossibleOutcomeError):
        est.qq_step(q, [IDENTITY] * 3, k["z1"])


def test_bayes_equivalence_random_cases(rng):
    for _ in range(100):
        n = int(rng.integers(1, 9))
        g = random_grid(rng, n)
        s = MeasurementStrength(rng.uniform(0.01, 1.0))
        k = build_ic_kraus(s) if rng.random() < 0.5 else build_z_kraus(s)
        prior = rng.dirichlet(np.ones(n))
        psi_e = random_state(rng)
        tau = rng.uniform(0.05, 2.0)
        h = init_hybrid(g, prior, psi_e, tau)
        q = init_qq(prior, psi_e)
        M = k.operators[rng.integers(len(k))]

        hybrid = est.posterior(est.update(est.predict(h), M))
        reference = est.qq_posterior(est.qq_step(q, h.propagators, M))
        direct = bayes_posterior(prior, density_likelihoods(psi_e, h.propagators, M))
        np.testing.assert_allclose(hybrid, reference, atol=1e-12)
        np.testing.assert_allclose(hybrid, direct, atol=1e-12)


def test_multi_step_equivalence_with_density_blocks(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        g = random_grid(rng, n)
        k = build_ic_kraus(MeasurementStrength(rng.uniform(0.1, 0.9)))
        prior = rng.dirichlet(np.ones(n))
        psi_e = random_state(rng)
        h = init_hybrid(g, prior, psi_e, 0.4)
        q = init_qq(prior, psi_e)
        for _ in range(200):
            M = k.operators[rng.integers(len(k))]
            h = est.update(est.predict(h), M)
            q = est.qq_step(q, h.propagators, M)
        np.testing.assert_allclose(est.posterior(h), est.qq_posterior(q), atol=1e-12)
        np.testing.assert_allclose(est.reduced_state(h), est.qq_reduced_state(q), atol=1e-12)


def test_qq_identity_measurement_keeps_block_traces(rng):
    g = random_grid(rng, 4)
    prior = rng.dirichlet(np.ones(4))
    q = init_qq(prior, random_state(rng))
    q1 = est.qq_step(q, g.propagators(TAU), IDENTITY)
    np.testing.assert_allclose(est.qq_posterior(q1), prior, atol=1e-15)


def test_qq_delta_prior_reduces_to_back_action(rng):
    g = random_grid(rng, 3)
    prior = np.array([0.0, 1.0, 0.0])
    psi = random_state(rng)
    U = g.propagators(TAU)
    M = build_ic_kraus(MeasurementStrength(0.5))["y1"]
    q1 = est.qq_step(init_qq(prior, psi), U, M)
    after = M @ U[1] @ psi
    after /= np.linalg.norm(after)
    np.testing.assert_allclose(est.qq_reduced_state(q1), density_matrix(after), atol=1e-14)


def test_reduced_state_examples(rng):
    psi = random_state(rng)
    h = init_hybrid(HypothesisGrid((ParameterPoint(1.0),)), [1.0], psi, TAU)
    np.testing.assert_allclose(est.reduced_state(h), density_matrix(psi), atol=1e-15)
    mixed = est.HybridState(np.array([KET0, KET1]) / np.sqrt(2), np.array([IDENTITY] * 2))
    np.testing.assert_allclose(est.reduced_state(mixed), IDENTITY / 2, atol=1e-15)


def test_reduced_state_is_the_frequency_mixture(rng):
    for _ in range(20):
        n = int(rng.integers(1, 12))
        g = random_grid(rng, n)
        prior = rng.dirichlet(np.ones(n))
        psi = random_state(rng)
        rho = est.reduced_state(est.predict(init_hybrid(g, prior, psi, TAU)))
        mixture = sum(P * U @ density_matrix(psi) @ U.conj().T for P, U in zip(prior, g.propagators(TAU)))
        np.testing.assert_allclose(rho, mixture, atol=1e-14)
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-15)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_weight_conservation_long_run(rng):
    g = freq_grid()
    k = build_z_kraus(MeasurementStrength(0.2))
    h = init_hybrid(g, np.full(11, 1 / 11), KET0, TAU)
    for _ in range(10_000):
        w0 = h.total_weight
        h = est.predict(h)
        assert abs(h.total_weight - w0) < 1e-12
        h = est.update(h, k.operators[rng.integers(2)])
        assert abs(h.total_weight - 1.0) < 1e-10


def test_grid_permutation_equivariance(rng):
    n = 7
    g = random_grid(rng, n)
    prior = rng.dirichlet(np.ones(n))
    psi = random_state(rng)
    perm = rng.permutation(n)
    gp = HypothesisGrid(tuple(g[i] for i in perm))
    k = build_ic_kraus(MeasurementStrength(0.3))
    h = init_hybrid(g, prior, psi, TAU)
    hp = init_hybrid(gp, prior[perm], psi, TAU)
    for _ in range(50):
        M = k.operators[rng.integers(len(k))]
        h = est.update(est.predict(h), M)
        hp = est.update(est.predict(hp), M)
        np.testing.assert_allclose(est.posterior(hp), est.posterior(h)[perm], rtol=0, atol=1e-15)


def test_pure_state_filter_halves_operator_applications(rng):
    n = 8
    g = random_grid(rng, n)
    prior = rng.dirichlet(np.ones(n))
    psi = random_state(rng)
    M = build_z_kraus(MeasurementStrength(0.2))["z0"]
    pure, dense = OpCounter(), OpCounter()
    h = init_hybrid(g, prior, psi, TAU)
    h = est.predict(h, pure)
    assert pure.matvec == n
    est.update(h, M, pure)
    assert pure.matvec == 2 * n
    est.qq_step(init_qq(prior, psi), h.propagators, M, dense)
    assert dense.matmat == 4 * n
    assert dense.matmat == 2 * pure.matvec


def test_map_estimate():
    g = HypothesisGrid.product([0.9, 1.0, 1.1])
    assert est.map_estimate(np.array([0.0, 0.0, 1.0]), g) == g[2]
    assert est.map_estimate(np.full(3, 1 / 3), g) == g[0]
    assert est.map_estimate(np.array([0.1, 0.7, 0.2]), g) == g[1]
    polar = HypothesisGrid.product([1.0], [0.0], [0.0, 1.0, 2.0])
    assert est.map_estimate(np.array([0.1, 0.2, 0.7]), polar) == ParameterPoint(1.0, 0.0, 0.0)
