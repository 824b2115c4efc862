"""Tests de l'inférence MAP par descente par coordonnées"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.optimize import minimize_scalar

from lidarlib.cda import (
    class_log_densities,
    init_state,
    log_posterior,
    posterior_terms,
    run_cda,
    update_aux,
    update_beta,
    update_gain,
    update_global_scale,
    update_labels,
    update_reflectivity,
    update_scale,
)
from lidarlib.graph import aux_coefficients, build_graph, gain_coefficients
from lidarlib.models import Irf, ModelState, SpectralLibrary, SurfaceSet
from lidarlib.settings import CdaConfig

from .conftest import surface_set_from_totals


def manual_state(y_bar, reflectivity, beta, labels, gain, aux=(), present=None) -> ModelState:
    y_bar = np.atleast_2d(np.asarray(y_bar, dtype=float))
    n = y_bar.shape[0]
    return ModelState(
        reflectivity=np.atleast_2d(np.asarray(reflectivity, dtype=float)).copy(),
        beta=np.asarray(beta, dtype=float).reshape(n, -1, y_bar.shape[1]).copy(),
        labels=np.asarray(labels, dtype=np.int64).reshape(n).copy(),
        depth=np.full(n, 5, dtype=np.int64),
        gain=np.asarray(gain, dtype=float).reshape(n).copy(),
        aux=np.asarray(aux, dtype=float).copy(),
        present=np.ones(n, dtype=bool) if present is None else np.asarray(present, dtype=bool),
        y_bar=y_bar,
        y_bbar=y_bar.sum(axis=1),
        degenerate=np.zeros(n, dtype=bool),
    )


def argmax_1d(log_density, upper: float) -> float:
    """Maximum numérique d'une densité unimodale sur ]0, upper]"""
    result = minimize_scalar(lambda x: -log_density(x), bounds=(1e-12, upper), method='bounded',
                             options={'xatol': 1e-12, 'maxiter': 2000})
    return float(result.x)


def random_problem(seed: int, rows=16, cols=16, k_s=2, wavelengths=3, classes=3, absent=0.1):
    """Surfaces aux totaux de Poisson h·m_u, classes en blocs, gain lisse"""
    generator = np.random.default_rng(seed)
    library = SpectralLibrary.from_signatures(
        0.5 + generator.random((classes, wavelengths)), alpha=100.0, nu=3.0
    )
    yy, xx = np.meshgrid(np.arange(rows), np.arange(cols), indexing='ij')
    gain = 30.0 + 15.0 * np.sin(yy / 3.0 + seed) * np.cos(xx / 4.0)
    block = np.repeat(np.repeat(generator.integers(0, classes, size=(4, 4)), 4, axis=0), 4, axis=1)
    labels = block[:rows, :cols]
    totals = np.empty((rows, cols, k_s, wavelengths))
    for k in range(k_s):
        totals[:, :, k] = generator.poisson(gain[..., None] * library.signatures[labels])
    totals[generator.random((rows, cols, k_s)) < absent] = np.nan
    surfaces = surface_set_from_totals(totals, max_surfaces=k_s, bins=64)
    return surfaces, library


# Initialisation

def test_single_class_initial_labels():
    surfaces = surface_set_from_totals(np.random.default_rng(0).poisson(5.0, size=(3, 3, 1, 2)) + 1.0)
    library = SpectralLibrary.from_signatures([[1.0, 2.0]])
    state = init_state(surfaces, library, CdaConfig())
    assert np.all(state.labels == 0)


def test_initial_label_is_closest_signature():
    library = SpectralLibrary.from_signatures([[3.0, 1.0, 1.0], [1.0, 1.0, 3.0]])
    totals = 7.0 * library.signatures[1].reshape(1, 1, 1, 3)
    state = init_state(surface_set_from_totals(totals), library, CdaConfig())
    assert state.labels.tolist() == [1]


def test_initial_beta_matches_signature_mean():
    library = SpectralLibrary.from_signatures([[1.0, 2.0], [2.0, 0.5]], alpha=50.0)
    state = init_state(surface_set_from_totals(np.full((2, 2, 1, 2), 4.0)), library, CdaConfig())
    assert np.allclose(library.alpha[None] * state.beta, library.signatures[None])
    assert np.allclose(state.gain * state.reflectivity.sum(axis=1), state.y_bbar)


def test_empty_and_mismatched_inputs():
    library = SpectralLibrary.from_signatures([[1.0]])
    empty = SurfaceSet(0, 0, 1, 16, Irf.delta())
    with pytest.raises(ValueError):
        init_state(empty, library, CdaConfig())
    with pytest.raises(ValueError):
        init_state(surface_set_from_totals(np.ones((1, 1, 1, 2))), library, CdaConfig())


def test_library_rejects_small_alpha():
    with pytest.raises(ValueError):
        SpectralLibrary.from_signatures([[1.0]], alpha=0.5)


# Mises à jour en forme close

def test_reflectivity_substitution():
    library = SpectralLibrary([[1.0]], alpha=2.0, nu=1.0, eps=1.0)
    state = manual_state([[10.0]], [[1.0]], [1.0], [0], [1.0])
    update_reflectivity(state, library)
    assert state.reflectivity[0, 0] == pytest.approx(5.5)

    library = SpectralLibrary([[1.0]], alpha=1.0, nu=1.0, eps=1.0)
    state = manual_state([[0.0]], [[1.0]], [1.0], [0], [1.0])
    update_reflectivity(state, library)
    assert state.reflectivity[0, 0] == 0.0


def test_beta_substitution_and_monotonicity():
    library = SpectralLibrary([[1.0], [1.0]], alpha=1.0, nu=1.0, eps=1.0)
    state = manual_state([[0.0]], [[0.0]], [1.0, 1.0], [0], [1.0])
    update_beta(state, library)
    assert state.beta[0, 0, 0] == pytest.approx(1.0 / 3.0)
    assert state.beta[0, 1, 0] == pytest.approx(0.5)

    previous = state.beta[0, 0, 0]
    for r in (0.5, 1.0, 4.0):
        state.reflectivity[0, 0] = r
        update_beta(state, library)
        assert state.beta[0, 0, 0] > previous
        previous = state.beta[0, 0, 0]


def test_gain_substitution():
    surfaces = surface_set_from_totals(np.full((2, 2, 1, 1), 20.0))
    graph = build_graph(surfaces, rho=1.0)
    state = manual_state(np.full((4, 1), 20.0), np.full((4, 1), 4.0), np.ones(4), np.zeros(4), np.ones(4), aux=[1.0])
    update_gain(state, graph)
    assert np.allclose(state.gain, 4.0)


def test_isolated_gain_uses_likelihood_only():
    surfaces = surface_set_from_totals(np.full((1, 1, 1, 2), 6.0))
    graph = build_graph(surfaces, rho=1.25)
    state = manual_state([[6.0, 6.0]], [[1.0, 2.0]], [1.0, 1.0], [0], [1.0])
    update_gain(state, graph)
    assert state.gain[0] == pytest.approx(12.0 / 3.0)


def test_zero_denominator_marks_degenerate():
    surfaces = surface_set_from_totals(np.zeros((1, 1, 1, 1)))
    graph = build_graph(surfaces, rho=1.0)
    state = manual_state([[0.0]], [[0.0]], [1.0], [0], [1.0])
    update_gain(state, graph)
    assert state.gain[0] == 0.0
    assert state.degenerate[0]


def test_aux_substitution():
    surfaces = surface_set_from_totals(np.ones((2, 2, 1, 1)))
    graph = build_graph(surfaces, rho=1.0)
    state = manual_state(np.ones((4, 1)), np.ones((4, 1)), np.ones(4), np.zeros(4), np.full(4, 2.0), aux=[1.0])
    update_aux(state, graph)
    assert state.aux[0] == pytest.approx(8.0 / 5.0)


def test_inactive_aux_unchanged():
    totals = np.full((2, 2, 1, 1), np.nan)
    graph = build_graph(surface_set_from_totals(totals), rho=1.0)
    state = manual_state(np.zeros((4, 1)), np.zeros((4, 1)), np.ones(4), np.zeros(4), np.zeros(4),
                         aux=[0.7], present=np.zeros(4, dtype=bool))
    update_aux(state, graph)
    assert state.aux[0] == 0.7


# Oracles numériques des modes

def test_reflectivity_mode_oracle():
    generator = np.random.default_rng(7)
    for _ in range(100):
        y, alpha, h, beta = generator.uniform(0, 50), generator.uniform(1, 200), generator.uniform(0.1, 20), generator.uniform(0.01, 2)
        library = SpectralLibrary([[1.0]], alpha=alpha, nu=3.0, eps=1.0)
        state = manual_state([[y]], [[1.0]], [beta], [0], [h])
        update_reflectivity(state, library)

        def density(r):
            return xlog(y, h * r) - h * r + (alpha - 1.0) * math.log(r) - r / beta

        expected = argmax_1d(density, upper=10.0 * (y + alpha) / (h + 1.0 / beta) + 1.0)
        assert state.reflectivity[0, 0] == pytest.approx(expected, rel=1e-5, abs=1e-9)


def test_beta_mode_oracle():
    generator = np.random.default_rng(8)
    for _ in range(100):
        r, alpha, nu, eps = generator.uniform(0, 10), generator.uniform(1, 200), generator.uniform(0.5, 10), generator.uniform(0.01, 5)
        library = SpectralLibrary([[1.0]], alpha=alpha, nu=nu, eps=eps)
        state = manual_state([[1.0]], [[r]], [1.0], [0], [1.0])
        update_beta(state, library)

        def density(b):
            return stats.invgamma.logpdf(b, nu, scale=eps) + stats.gamma.logpdf(r, alpha, scale=b)
        expected = argmax_1d(density, upper=10.0 * (r + eps) / (alpha + nu + 1.0) + 1.0)
        assert state.beta[0, 0, 0] == pytest.approx(expected, rel=1e-5)


def test_gain_mode_oracle():
    generator = np.random.default_rng(9)
    for _ in range(100):
        rho = generator.uniform(1.0, 3.0)
        wavelengths = int(generator.integers(1, 4))
        surfaces = surface_set_from_totals(np.ones((2, 2, 1, wavelengths)))
        graph = build_graph(surfaces, rho=rho)
        y_bar = generator.uniform(0, 40, size=(4, wavelengths))
        r = generator.uniform(0.1, 5, size=(4, wavelengths))
        state = manual_state(y_bar, r, np.ones((4, wavelengths)), np.zeros(4), np.ones(4),
                             aux=[generator.uniform(0.2, 20)])
        theta1, theta2 = gain_coefficients(graph, state.aux)
        update_gain(state, graph)

        for s in range(4):
            def density(h, s=s):
                return (xlog(state.y_bbar[s], h) - h * r[s].sum()
                        + wavelengths * ((theta1[s] - 1.0) * math.log(h) - theta2[s] * h))

            upper = 10.0 * (state.y_bbar[s] + wavelengths * theta1[s]) / (r[s].sum() + wavelengths * theta2[s]) + 1.0
            expected = argmax_1d(density, upper=upper)
            assert state.gain[s] == pytest.approx(expected, rel=1e-5, abs=1e-9)


def test_aux_mode_oracle():
    generator = np.random.default_rng(10)
    for _ in range(100):
        rho = generator.uniform(0.5, 3.0)
        graph = build_graph(surface_set_from_totals(np.ones((2, 2, 1, 1))), rho=rho)
        gain = generator.uniform(0.1, 50, size=4)
        state = manual_state(np.ones((4, 1)), np.ones((4, 1)), np.ones(4), np.zeros(4), gain, aux=[1.0])
        theta1, theta2 = aux_coefficients(graph, gain)
        update_aux(state, graph)

        def density(w):
            return -(theta1[0] + 1.0) * math.log(w) - theta2[0] / w

        expected = argmax_1d(density, upper=10.0 * theta2[0] / theta1[0] + 1.0)
        assert state.aux[0] == pytest.approx(expected, rel=1e-5)


def xlog(a: float, b: float) -> float:
    return 0.0 if a == 0 else a * math.log(b)


def rescaled(state: ModelState, surfaces, factor: float, aux: bool = False) -> ModelState:
    """Copie de l'état avec (h, r, β_u) ← (c h, r / c, β_u / c) sur les surfaces données"""
    trial = state.copy()
    labels = trial.labels[surfaces]
    trial.gain[surfaces] *= factor
    trial.reflectivity[surfaces] /= factor
    trial.beta[surfaces, labels] /= factor
    if aux:
        trial.aux *= factor
    return trial


def converging_problem(seed: int):
    surfaces, library = random_problem(seed, rows=5, cols=5)
    graph = build_graph(surfaces, rho=1.25)
    config = CdaConfig(i_max=3)
    state, _ = run_cda(surfaces, library, graph, config)
    return surfaces, library, graph, config, state


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_surface_scale_mode_oracle(seed):
    surfaces, library, graph, config, state = converging_problem(seed)
    update_scale(state, library, graph)
    for s in np.flatnonzero(state.present)[:6]:
        def density(c, s=s):
            return log_posterior(rescaled(state, [s], c), surfaces, library, graph, config)
        assert argmax_1d(density, upper=3.0) == pytest.approx(1.0, rel=1e-4)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_global_scale_mode_oracle(seed):
    surfaces, library, graph, config, state = converging_problem(seed)
    before = log_posterior(state, surfaces, library, graph, config)
    update_global_scale(state, library, graph)
    assert log_posterior(state, surfaces, library, graph, config) >= before - 1e-9 * abs(before)

    present = np.flatnonzero(state.present)

    def density(c):
        return log_posterior(rescaled(state, present, c, aux=True), surfaces, library, graph, config)
    assert argmax_1d(density, upper=3.0) == pytest.approx(1.0, rel=1e-4)


def test_scale_moves_keep_intensity():
    surfaces, library, graph, _, state = converging_problem(4)
    intensity = state.intensity.copy()
    ratios = state.reflectivity / state.beta[np.arange(len(state.labels)), state.labels]
    update_scale(state, library, graph)
    update_global_scale(state, library, graph)
    present = state.present
    assert np.allclose(state.intensity[present], intensity[present])
    after = state.reflectivity / state.beta[np.arange(len(state.labels)), state.labels]
    assert np.allclose(after[present], ratios[present])


def test_random_problem_converges_within_hundred_sweeps():
    surfaces, library = random_problem(7, rows=8, cols=8)
    graph = build_graph(surfaces, rho=1.25)
    _, trace = run_cda(surfaces, library, graph, CdaConfig(xi=1e-4, i_max=100))
    assert trace.converged


# Labels

def test_labels_follow_class_prior_without_potts():
    library = SpectralLibrary.from_signatures([[1.0], [4.0]], alpha=100.0)
    beta = np.broadcast_to(library.signatures / library.alpha, (1, 2, 1))
    state = manual_state([[1.0]], [[1.0]], beta, [1], [1.0])
    graph = build_graph(surface_set_from_totals(np.ones((1, 1, 1, 1))), rho=1.0)
    update_labels(state, library, graph, CdaConfig(gamma=0.0))
    assert state.labels.tolist() == [0]


def test_single_wavelength_labels_match_enumeration():
    generator = np.random.default_rng(11)
    library = SpectralLibrary.from_signatures([[0.5], [1.0], [2.0]], alpha=20.0)
    n = 25
    r = generator.uniform(0.2, 3.0, size=(n, 1))
    beta = generator.uniform(0.01, 0.2, size=(n, 3, 1))
    state = manual_state(np.ones((n, 1)), r, beta, np.zeros(n), np.ones(n))
    graph = build_graph(surface_set_from_totals(np.ones((5, 5, 1, 1))), rho=1.0)
    update_labels(state, library, graph, CdaConfig(gamma=0.0))

    for s in range(n):
        scores = [stats.gamma.logpdf(r[s, 0], library.alpha[k, 0], scale=beta[s, k, 0]) for k in range(3)]
        assert state.labels[s] == int(np.argmax(scores))


def test_strong_potts_spreads_majority_label():
    library = SpectralLibrary.from_signatures([[1.0], [1.2]], alpha=100.0)
    n = 16
    graph = build_graph(surface_set_from_totals(np.ones((4, 4, 1, 1))), rho=1.0)
    beta = np.broadcast_to(library.signatures / library.alpha, (n, 2, 1))
    labels = np.zeros(n)
    labels[2 * 4 + 2] = 1
    state = manual_state(np.ones((n, 1)), np.full((n, 1), 1.2), beta, labels, np.ones(n))
    update_labels(state, library, graph, CdaConfig(gamma=1e3))
    assert np.all(state.labels == 0)


def test_single_class_labels_unchanged():
    library = SpectralLibrary.from_signatures([[1.0]])
    graph = build_graph(surface_set_from_totals(np.ones((2, 2, 1, 1))), rho=1.0)
    state = manual_state(np.ones((4, 1)), np.ones((4, 1)), np.full(4, 0.01), np.zeros(4), np.ones(4), aux=[1.0])
    update_labels(state, library, graph, CdaConfig())
    assert np.all(state.labels == 0)


def test_class_log_densities_shape():
    library = SpectralLibrary.from_signatures([[1.0, 1.0], [2.0, 1.0], [1.0, 3.0]])
    state = manual_state(np.ones((4, 2)), np.ones((4, 2)), np.full((4, 3, 2), 0.01), np.zeros(4), np.ones(4))
    assert class_log_densities(state, library).shape == (4, 3)


# Log-postérieure

def two_bin_problem():
    irf = Irf(np.array([[0.25, 0.75]]), offset=0)
    hists = np.array([1.0, 3.0]).reshape(1, 1, 1, 1, 2)
    surfaces = SurfaceSet.from_histograms(hists, np.array([[[5]]]), 10, irf)
    library = SpectralLibrary([[1.0]], alpha=20.0, nu=3.0, eps=0.2)
    state = manual_state([[4.0]], [[2.0]], [0.1], [0], [1.5])
    return surfaces, library, state


def test_hand_computed_log_posterior():
    surfaces, library, state = two_bin_problem()
    graph = build_graph(surfaces, rho=1.25)
    terms = posterior_terms(state, surfaces, library, graph, CdaConfig())

    rates = 1.5 * 2.0 * np.array([0.25, 0.75])
    likelihood = stats.poisson.logpmf([1, 3], rates).sum()
    assert terms.likelihood == pytest.approx(likelihood, abs=1e-9)
    assert terms.reflectivity_prior == pytest.approx(stats.gamma.logpdf(2.0, 20.0, scale=0.1), abs=1e-9)
    assert terms.beta_prior == pytest.approx(stats.invgamma.logpdf(0.1, 3.0, scale=0.2), abs=1e-9)
    assert terms.gain_prior == 0.0
    assert terms.label_prior == 0.0
    assert log_posterior(state, surfaces, library, graph, CdaConfig()) == pytest.approx(terms.total, abs=1e-12)


def test_constant_shift_changes_only_likelihood():
    surfaces, library, state = two_bin_problem()
    graph = build_graph(surfaces, rho=1.25)
    before = posterior_terms(state, surfaces, library, graph, CdaConfig())

    shifted = SurfaceSet.from_histograms(surfaces.surfaces[0].hist.reshape(1, 1, 1, 1, 2) + 2.0,
                                         np.array([[[5]]]), 10, surfaces.irf)
    state.y_bar = shifted.totals()
    state.y_bbar = state.y_bar.sum(axis=1)
    after = posterior_terms(state, shifted, library, graph, CdaConfig())

    assert after.likelihood != before.likelihood
    assert after.reflectivity_prior == before.reflectivity_prior
    assert after.beta_prior == before.beta_prior
    assert after.gain_prior == before.gain_prior
    assert after.label_prior == before.label_prior


def test_empty_surface_set_has_zero_log_posterior():
    surfaces = surface_set_from_totals(np.full((2, 2, 1, 1), np.nan))
    library = SpectralLibrary.from_signatures([[1.0]])
    graph = build_graph(surfaces, rho=1.25)
    state = init_state(surfaces, library, CdaConfig(), graph)
    assert log_posterior(state, surfaces, library, graph, CdaConfig()) == 0.0


# Boucle complète

def test_infinite_xi_runs_one_sweep():
    surfaces, library = random_problem(0, rows=6, cols=6)
    graph = build_graph(surfaces, rho=1.25)
    _, trace = run_cda(surfaces, library, graph, CdaConfig(xi=math.inf))
    assert trace.sweeps == 1
    assert trace.converged


def test_converged_state_stops_after_one_sweep():
    surfaces, library = random_problem(1, rows=6, cols=6)
    graph = build_graph(surfaces, rho=1.25)
    config = CdaConfig(xi=1e-4, i_max=500)
    state, trace = run_cda(surfaces, library, graph, config)
    assert trace.converged
    last = trace.rows[-1]
    assert max(last.rms_reflectivity, last.rms_gain, last.label_change_rate) <= config.xi

    _, again = run_cda(surfaces, library, graph, config, state=state.copy())
    assert again.sweeps == 1


def test_single_class_library_keeps_one_label():
    surfaces, _ = random_problem(2, rows=5, cols=5, classes=1)
    library = SpectralLibrary.from_signatures(np.ones((1, 3)))
    graph = build_graph(surfaces, rho=1.25)
    state, _ = run_cda(surfaces, library, graph, CdaConfig(i_max=10))
    assert np.all(state.labels[state.present] == 0)


def test_intensity_is_gain_times_reflectivity():
    surfaces, library = random_problem(3, rows=5, cols=5)
    graph = build_graph(surfaces, rho=1.25)
    state, _ = run_cda(surfaces, library, graph, CdaConfig(i_max=10))
    assert np.allclose(state.intensity, state.gain[:, None] * state.reflectivity)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), gamma=st.sampled_from([0.0, 1.0, 4.0]))
def test_log_posterior_never_decreases(seed, gamma):
    surfaces, library = random_problem(seed, rows=6, cols=6)
    graph = build_graph(surfaces, rho=1.25)
    state, trace = run_cda(surfaces, library, graph, CdaConfig(gamma=gamma, i_max=25))

    values = np.concatenate([[log_posterior(init_state(surfaces, library, CdaConfig(gamma=gamma), graph),
                                            surfaces, library, graph, CdaConfig(gamma=gamma))],
                             trace.log_posteriors])
    for previous, current in zip(values, values[1:]):
        assert current >= previous - 1e-9 * max(1.0, abs(previous))

    present = state.present
    assert np.all(state.reflectivity[present] >= 0)
    assert np.all(state.beta[present] > 0)
    assert np.all(state.gain >= 0)
    assert np.all(state.aux > 0)
