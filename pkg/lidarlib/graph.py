"""Graphe des surfaces: réseau biparti h / w du gamma-MRF et voisinage de Potts"""

import logging
from typing import Tuple

import numpy as np

from .models import SurfaceGraph, SurfaceSet


logger = logging.getLogger(__name__)

# Sites duaux (r + dr, c + dc) rattachés au pixel (r, c)
DUAL_OFFSETS = ((-1, -1), (-1, 0), (0, -1), (0, 0))
# Pixels (r' + dr, c' + dc) rattachés au site dual (r', c')
CORNER_OFFSETS = ((0, 0), (0, 1), (1, 0), (1, 1))
PIXEL_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def build_graph(surface_set: SurfaceSet, rho: float) -> SurfaceGraph:
    """
    Construit le graphe des surfaces

    Chaque h (centre de pixel, K_s emplacements) est relié aux 4 sites duaux
    diagonaux x K_s emplacements; le poids d'une arête vaut 1 si la surface h est
    présente, 0 sinon. Le voisinage de Potts relie les surfaces présentes des 4
    pixels voisins (tous emplacements).

    Args:
        surface_set: Surfaces détectées
        rho: Couplage ρ > 0

    Returns:
        Graphe (listes de voisins complétées par -1)
    """
    if not rho > 0:
        raise ValueError(f"❌ ρ doit être > 0: {rho}")
    rows, cols, k_s = surface_set.rows, surface_set.cols, surface_set.max_surfaces
    present = surface_set.present.reshape(rows, cols, k_s)
    surface_ids = np.arange(rows * cols * k_s).reshape(rows, cols, k_s)

    dual_rows, dual_cols = max(rows - 1, 0), max(cols - 1, 0)
    dual_ids = np.arange(dual_rows * dual_cols * k_s).reshape(dual_rows, dual_cols, k_s)
    padded_dual = np.full((rows + 1, cols + 1, k_s), -1, dtype=np.int64)
    padded_dual[1:rows, 1:cols] = dual_ids

    h_to_w = np.full((rows, cols, k_s, 4, k_s), -1, dtype=np.int64)
    for n, (dr, dc) in enumerate(DUAL_OFFSETS):
        h_to_w[:, :, :, n, :] = padded_dual[dr + 1:dr + 1 + rows, dc + 1:dc + 1 + cols][:, :, None, :]

    w_to_h = np.full((dual_rows, dual_cols, k_s, 4, k_s), -1, dtype=np.int64)
    for n, (dr, dc) in enumerate(CORNER_OFFSETS):
        w_to_h[:, :, :, n, :] = surface_ids[dr:dr + dual_rows, dc:dc + dual_cols][:, :, None, :]

    padded_present = np.full((rows + 2, cols + 2, k_s), -1, dtype=np.int64)
    padded_present[1:-1, 1:-1] = np.where(present, surface_ids, -1)
    label_neighbors = np.full((rows, cols, k_s, 4, k_s), -1, dtype=np.int64)
    for n, (dr, dc) in enumerate(PIXEL_NEIGHBORS):
        label_neighbors[:, :, :, n, :] = padded_present[1 + dr:1 + dr + rows, 1 + dc:1 + dc + cols][:, :, None, :]
    label_neighbors[~present] = -1

    n_surfaces = rows * cols * k_s
    graph = SurfaceGraph(
        rows=rows,
        cols=cols,
        max_surfaces=k_s,
        present=present.reshape(-1).copy(),
        h_to_w=h_to_w.reshape(n_surfaces, 4 * k_s),
        w_to_h=w_to_h.reshape(dual_rows * dual_cols * k_s, 4 * k_s),
        label_neighbors=label_neighbors.reshape(n_surfaces, 4 * k_s),
        rho=float(rho),
    )
    logger.info(f"  🕸️  Graphe: {graph.n_surfaces} surfaces, {graph.n_dual} sites duaux")
    return graph


def gain_coefficients(graph: SurfaceGraph, aux: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    θ^h_1 = ρ Σ_{j ∈ η(s)} c_{s,j} et θ^h_2 = ρ Σ_{j ∈ η(s)} c_{s,j} / w_j

    Returns:
        (θ^h_1, θ^h_2) de taille N_s
    """
    weights = graph.h_weights()
    if graph.n_dual == 0:
        zeros = np.zeros(graph.n_surfaces)
        return zeros, zeros.copy()
    inverse = 1.0 / aux[np.maximum(graph.h_to_w, 0)]
    theta1 = graph.rho * weights.sum(axis=1)
    theta2 = graph.rho * (weights * inverse).sum(axis=1)
    return theta1, theta2


def aux_coefficients(graph: SurfaceGraph, gain: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    θ^w_1 = ρ Σ_{s ∈ η(j)} c_{s,j} et θ^w_2 = ρ Σ_{s ∈ η(j)} c_{s,j} h_s

    Returns:
        (θ^w_1, θ^w_2) de taille N_w
    """
    weights = graph.w_weights()
    if graph.n_dual == 0:
        zeros = np.zeros(0)
        return zeros, zeros.copy()
    theta1 = graph.rho * weights.sum(axis=1)
    theta2 = graph.rho * (weights * gain[np.maximum(graph.w_to_h, 0)]).sum(axis=1)
    return theta1, theta2
