"""Tests du graphe des surfaces"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lidarlib.graph import aux_coefficients, build_graph, gain_coefficients

from .conftest import surface_set_from_totals


def test_single_pixel_has_no_dual_site():
    graph = build_graph(surface_set_from_totals(np.ones((1, 1, 1, 1))), rho=1.25)
    assert graph.n_dual == 0
    assert graph.dual_neighbors(0) == []
    assert graph.neighbors(0) == []
    theta1, theta2 = gain_coefficients(graph, np.ones(0))
    assert theta1.tolist() == [0.0] and theta2.tolist() == [0.0]


def test_two_by_two_lattice():
    graph = build_graph(surface_set_from_totals(np.ones((2, 2, 1, 1))), rho=1.0)
    assert graph.n_dual == 1
    assert sorted(int(s) for s in graph.w_to_h[0] if s >= 0) == [0, 1, 2, 3]
    for s in range(4):
        assert graph.dual_neighbors(s) == [0]
    # voisins de Potts: 4-connexité
    assert sorted(graph.neighbors(0)) == [1, 2]
    assert sorted(graph.neighbors(3)) == [1, 2]
    assert graph.is_symmetric()


def test_absent_surface_has_zero_weights():
    totals = np.ones((2, 2, 1, 1))
    totals[1, 1] = np.nan
    graph = build_graph(surface_set_from_totals(totals), rho=1.0)
    assert graph.h_weights()[3].sum() == 0
    assert graph.w_weights()[0].sum() == 3
    assert graph.neighbors(3) == []
    assert 3 not in graph.neighbors(1)


def test_hand_summed_coefficients():
    graph = build_graph(surface_set_from_totals(np.ones((2, 2, 1, 1))), rho=1.0)
    theta1_w, theta2_w = aux_coefficients(graph, np.full(4, 2.0))
    assert theta1_w.tolist() == [4.0]
    assert theta2_w.tolist() == [8.0]

    theta1_h, theta2_h = gain_coefficients(graph, np.array([0.5]))
    assert np.allclose(theta1_h, 1.0)
    assert np.allclose(theta2_h, 2.0)


def test_interior_pixel_has_four_dual_sites():
    graph = build_graph(surface_set_from_totals(np.ones((3, 3, 2, 1)), max_surfaces=2), rho=1.0)
    centre = 4 * 2
    assert len(graph.dual_neighbors(centre)) == 4 * 2
    assert graph.n_dual == 2 * 2 * 2


def test_invalid_rho():
    with pytest.raises(ValueError):
        build_graph(surface_set_from_totals(np.ones((1, 1, 1, 1))), rho=0.0)


@settings(max_examples=25, deadline=None)
@given(
    rows=st.integers(1, 5),
    cols=st.integers(1, 5),
    k_s=st.integers(1, 2),
    seed=st.integers(0, 2 ** 16),
)
def test_random_presence_patterns(rows, cols, k_s, seed):
    generator = np.random.default_rng(seed)
    totals = np.ones((rows, cols, k_s, 1))
    totals[generator.random((rows, cols, k_s)) < 0.3] = np.nan
    surfaces = surface_set_from_totals(totals, max_surfaces=k_s)
    graph = build_graph(surfaces, rho=1.25)

    assert graph.is_symmetric()
    absent = ~surfaces.present
    assert np.all(graph.h_weights()[absent] == 0)
    for j in range(graph.n_dual):
        for s, weight in zip(graph.w_to_h[j], graph.w_weights()[j]):
            if s >= 0 and absent[s]:
                assert weight == 0
    assert np.all(graph.label_neighbors[absent] == -1)
