"""
Inférence bayésienne MAP par descente par coordonnées

Chaque mise à jour est le mode exact de la loi conditionnelle du paramètre
concerné; l'ordre d'un balayage est u, r, β, h, w. Deux déplacements exacts
le long des directions où la vraisemblance est invariante (échelle de chaque
surface, puis échelle commune de h et w) complètent le balayage.
"""

import logging
from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np
from scipy import stats
from scipy.special import xlogy

from .errors import NonFiniteTermError
from .graph import aux_coefficients, gain_coefficients
from .library import class_similarity
from .models import CdaTrace, ModelState, SpectralLibrary, SurfaceGraph, SurfaceSet, TraceRow
from .settings import CdaConfig
from .utils import rms_change


logger = logging.getLogger(__name__)

# Plancher de w quand tous les h voisins sont nuls
AUX_FLOOR = 1e-12


@dataclass(frozen=True)
class PosteriorTerms:
    """Décomposition de la log-postérieure (constantes de normalisation omises)"""
    likelihood: float = 0.0
    reflectivity_prior: float = 0.0
    beta_prior: float = 0.0
    gain_prior: float = 0.0
    label_prior: float = 0.0

    @property
    def total(self) -> float:
        return sum(getattr(self, f.name) for f in fields(self))


def init_state(surfaces: SurfaceSet, library: SpectralLibrary, config: CdaConfig,
               graph: Optional[SurfaceGraph] = None) -> ModelState:
    """
    Initialise Θ à partir des surfaces détectées

    d est figé à la profondeur de l'échelle sélectionnée, u est la classe la plus
    proche (similarité cosinus) des totaux ȳ_{s,:}, h = ȳ̄_s / Σ_l m_{u,l} et
    r = ȳ / h, β = m / α pour toutes les classes, w au mode de sa loi sachant h.
    """
    if len(surfaces) == 0:
        raise ValueError("❌ Ensemble de surfaces vide")
    if library.wavelengths != surfaces.irf.wavelengths:
        raise ValueError(
            f"❌ Bibliothèque à {library.wavelengths} longueurs d'onde, surfaces à {surfaces.irf.wavelengths}"
        )
    present = surfaces.present
    y_bar = surfaces.totals()
    y_bbar = y_bar.sum(axis=1)
    n_surfaces = len(surfaces)

    labels = np.argmax(class_similarity(y_bar, library), axis=1).astype(np.int64)
    labels[~present] = 0

    signature_sums = library.signatures.sum(axis=1)[labels]
    gain = np.where(y_bbar > 0, y_bbar / signature_sums, 1.0)
    gain[~present] = 0.0
    reflectivity = np.zeros_like(y_bar)
    reflectivity[present] = y_bar[present] / gain[present, None]

    beta = np.broadcast_to(library.signatures / library.alpha, (n_surfaces,) + library.signatures.shape).copy()
    n_dual = graph.n_dual if graph is not None else 0
    state = ModelState(
        reflectivity=reflectivity,
        beta=beta,
        labels=labels,
        depth=surfaces.depths.copy(),
        gain=gain,
        aux=np.ones(n_dual),
        present=present.copy(),
        y_bar=y_bar,
        y_bbar=y_bbar,
        degenerate=np.zeros(n_surfaces, dtype=bool),
    )
    if graph is not None:
        update_aux(state, graph, config)
    logger.info(f"  🧮 État initial: {int(present.sum())} surfaces, K={library.classes}")
    return state


def class_log_densities(state: ModelState, library: SpectralLibrary) -> np.ndarray:
    """D[s, k] = Σ_l log G(r_{s,l}; α_{k,l}, β_{s,k,l})"""
    r = state.reflectivity[:, None, :]
    return stats.gamma.logpdf(r, library.alpha[None], scale=state.beta).sum(axis=2)


def update_labels(state: ModelState, library: SpectralLibrary, graph: SurfaceGraph,
                  config: CdaConfig) -> ModelState:
    """
    u_s ← argmax_k [γ · #{s' ∈ η(s) : u_s' = k} + D[s, k]]

    Balayage séquentiel en ordre ligne, colonne, emplacement, avec les labels
    voisins les plus récents; égalité: plus petit k.
    """
    if library.classes == 1:
        return state
    scores = class_log_densities(state, library)
    labels = state.labels
    present = np.flatnonzero(state.present)
    if config.gamma == 0:
        labels[present] = np.argmax(scores[present], axis=1)
        return state
    classes = library.classes
    for s in present:
        neighbors = graph.label_neighbors[s]
        neighbors = neighbors[neighbors >= 0]
        counts = np.bincount(labels[neighbors], minlength=classes)
        labels[s] = int(np.argmax(config.gamma * counts + scores[s]))
    return state


def update_reflectivity(state: ModelState, library: SpectralLibrary) -> ModelState:
    """r_{s,l} = (ȳ_{s,l} + α_{u,l} - 1) / (h_s + 1 / β_{s,u,l})"""
    present = state.present
    labels = state.labels[present]
    alpha = library.alpha[labels]
    beta = state.beta[present, labels]
    denominator = state.gain[present, None] + 1.0 / beta
    assert np.all(denominator > 0), "dénominateur de r non positif"
    state.reflectivity[present] = (state.y_bar[present] + alpha - 1.0) / denominator
    return state


def update_beta(state: ModelState, library: SpectralLibrary) -> ModelState:
    """
    Emplacement actif k = u_s: β = (r + ε) / (α + ν + 1);
    autres emplacements: mode de l'a priori ε / (ν + 1)
    """
    present = np.flatnonzero(state.present)
    if not present.size:
        return state
    state.beta[present] = library.beta_prior_mode[None]
    labels = state.labels[present]
    state.beta[present, labels] = (state.reflectivity[present] + library.eps[labels]) / (
        library.alpha[labels] + library.nu[labels] + 1.0
    )
    return state


def _gain_thetas(state: ModelState, graph: SurfaceGraph) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta1, theta2 = gain_coefficients(graph, state.aux)
    isolated = theta1 <= 0
    theta1 = np.where(isolated, 1.0, theta1)
    theta2 = np.where(isolated, 0.0, theta2)
    return theta1, theta2, isolated


def update_gain(state: ModelState, graph: SurfaceGraph, config: Optional[CdaConfig] = None) -> ModelState:
    """
    h_s = max((ȳ̄_s + L(θ^h_1 - 1)) / (Σ_l r_{s,l} + L θ^h_2), 0)

    Une surface isolée prend le mode de la vraisemblance seule; un dénominateur
    nul marque la surface dégénérée (h = 0).
    """
    wavelengths = state.reflectivity.shape[1]
    theta1, theta2, _ = _gain_thetas(state, graph)
    numerator = state.y_bbar + wavelengths * (theta1 - 1.0)
    denominator = state.reflectivity.sum(axis=1) + wavelengths * theta2
    present = state.present
    degenerate = present & (denominator <= 0)
    safe = present & ~degenerate
    gain = np.zeros_like(state.gain)
    gain[safe] = np.maximum(numerator[safe] / denominator[safe], 0.0)
    newly = degenerate & ~state.degenerate
    if newly.any():
        logger.warning(f"  ⚠️  {int(newly.sum())} surface(s) à gain dégénéré (h = 0)")
    state.gain = gain
    state.degenerate = degenerate
    return state


def update_aux(state: ModelState, graph: SurfaceGraph, config: Optional[CdaConfig] = None) -> ModelState:
    """w_j = θ^w_2 / (θ^w_1 + 1) sur les sites actifs (θ^w_1 > 0), inchangé ailleurs"""
    if graph.n_dual == 0:
        return state
    theta1, theta2 = aux_coefficients(graph, state.gain)
    active = theta1 > 0
    state.aux[active] = np.maximum(theta2[active] / (theta1[active] + 1.0), AUX_FLOOR)
    return state


def _scale_terms(state: ModelState, library: SpectralLibrary, movable: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coefficients (P_s, Q_s) hors gamma-MRF du déplacement (c h, r / c, β_u / c)

    Le long de ce déplacement la vraisemblance est invariante; l'a priori de r
    apporte L log c et celui de β_u apporte Σ_l (ν + 1) log c - c Σ_l ε / β.
    """
    labels = state.labels[movable]
    wavelengths = state.reflectivity.shape[1]
    beta = state.beta[movable, labels]
    p = wavelengths + (library.nu[labels] + 1.0).sum(axis=1)
    q = (library.eps[labels] / beta).sum(axis=1)
    return p, q


def _apply_scale(state: ModelState, movable: np.ndarray, factor: np.ndarray) -> None:
    labels = state.labels[movable]
    state.gain[movable] *= factor
    state.reflectivity[movable] /= factor[:, None]
    state.beta[movable, labels] /= factor[:, None]


def update_scale(state: ModelState, library: SpectralLibrary, graph: SurfaceGraph) -> ModelState:
    """
    Échelle propre de chaque surface: (h, r, β_u) ← (c h, r / c, β_u / c)

    w fixé, la log-postérieure vaut P log c - Q c avec
    P = L + Σ_l (ν + 1) + L (θ^h_1 - 1) et Q = Σ_l ε / β + L θ^h_2 h
    (termes en θ^h pour les seules surfaces couplées), d'où c = P / Q.
    """
    movable = np.flatnonzero(state.present & (state.gain > 0))
    if not movable.size:
        return state
    wavelengths = state.reflectivity.shape[1]
    p, q = _scale_terms(state, library, movable)
    theta1, theta2 = gain_coefficients(graph, state.aux)
    coupled = theta1[movable] > 0
    p = p + np.where(coupled, wavelengths * (theta1[movable] - 1.0), 0.0)
    q = q + wavelengths * theta2[movable] * state.gain[movable]
    _apply_scale(state, movable, p / q)
    return state


def update_global_scale(state: ModelState, library: SpectralLibrary, graph: SurfaceGraph) -> ModelState:
    """
    Échelle commune: h et w multipliés par c, r et β_u divisés par c

    Les rapports h / w sont conservés; le gamma-MRF ne contribue que par
    L [Σ_s (θ^h_1 - 1) - Σ_j (θ^w_1 + 1)] log c.
    """
    movable = np.flatnonzero(state.present & (state.gain > 0))
    if not movable.size or graph.n_dual == 0:
        return state
    wavelengths = state.reflectivity.shape[1]
    p, q = _scale_terms(state, library, movable)
    theta1_h, _ = gain_coefficients(graph, state.aux)
    theta1_w, _ = aux_coefficients(graph, state.gain)
    coupled = theta1_h[movable] > 0
    active = theta1_w > 0
    total_p = p.sum() + wavelengths * (
        np.sum(theta1_h[movable][coupled] - 1.0) - np.sum(theta1_w[active] + 1.0)
    )
    if total_p <= 0:
        return state
    factor = total_p / q.sum()
    _apply_scale(state, movable, np.full(movable.size, factor))
    state.aux[active] *= factor
    return state


def posterior_terms(state: ModelState, surfaces: SurfaceSet, library: SpectralLibrary,
                    graph: SurfaceGraph, config: CdaConfig,
                    constants: Optional[np.ndarray] = None) -> PosteriorTerms:
    """
    Termes de la log-postérieure

    La vraisemblance de Poisson est réduite à ȳ log(h r) - h r plus une constante
    par surface (Σ y log g - log y!); le gamma-MRF est élevé à la puissance L; le
    terme de Potts compte une fois chaque paire voisine de même label.
    """
    present = state.present
    if not present.any():
        return PosteriorTerms()
    if constants is None:
        constants = surfaces.likelihood_constants()
    wavelengths = state.reflectivity.shape[1]
    labels = state.labels[present]
    intensity = state.gain[present, None] * state.reflectivity[present]

    likelihood = float(np.sum(xlogy(state.y_bar[present], intensity) - intensity) + constants[present].sum())
    reflectivity_prior = float(np.sum(stats.gamma.logpdf(
        state.reflectivity[present], library.alpha[labels], scale=state.beta[present, labels]
    )))
    beta_prior = float(np.sum(stats.invgamma.logpdf(
        state.beta[present], library.nu[None], scale=library.eps[None]
    )))

    theta1_h, theta2_h = gain_coefficients(graph, state.aux)
    coupled = theta1_h > 0
    gain_prior = float(np.sum(xlogy(theta1_h[coupled] - 1.0, state.gain[coupled])))
    gain_prior -= float(np.sum(theta2_h * state.gain))
    if graph.n_dual:
        theta1_w, _ = aux_coefficients(graph, state.gain)
        active = theta1_w > 0
        gain_prior -= float(np.sum((theta1_w[active] + 1.0) * np.log(state.aux[active])))
    gain_prior *= wavelengths

    label_prior = 0.0
    if config.gamma:
        neighbors = graph.label_neighbors
        valid = neighbors >= 0
        same = valid & (state.labels[np.maximum(neighbors, 0)] == state.labels[:, None])
        label_prior = config.gamma * float(same.sum()) / 2.0

    terms = PosteriorTerms(likelihood, reflectivity_prior, beta_prior, gain_prior, label_prior)
    for f in fields(terms):
        value = getattr(terms, f.name)
        if not np.isfinite(value):
            raise NonFiniteTermError(f.name, value)
    return terms


def log_posterior(state: ModelState, surfaces: SurfaceSet, library: SpectralLibrary,
                  graph: SurfaceGraph, config: CdaConfig, constants: Optional[np.ndarray] = None) -> float:
    return posterior_terms(state, surfaces, library, graph, config, constants).total


def sweep(state: ModelState, library: SpectralLibrary, graph: SurfaceGraph, config: CdaConfig) -> ModelState:
    """Un balayage complet: u, r, β, h, échelles propres, w, échelle commune"""
    update_labels(state, library, graph, config)
    update_reflectivity(state, library)
    update_beta(state, library)
    update_gain(state, graph, config)
    update_scale(state, library, graph)
    update_aux(state, graph, config)
    update_global_scale(state, library, graph)
    return state


def run_cda(surfaces: SurfaceSet, library: SpectralLibrary, graph: SurfaceGraph, config: CdaConfig,
            state: Optional[ModelState] = None) -> Tuple[ModelState, CdaTrace]:
    """
    Descente par coordonnées jusqu'à convergence ou I_max balayages

    Arrêt quand les variations quadratiques moyennes de r et h et la proportion
    de labels modifiés sont toutes ≤ ξ. La non-convergence est signalée, pas levée.

    Args:
        surfaces: Surfaces (échelle sélectionnée)
        library: Bibliothèque spectrale
        graph: Graphe des surfaces
        config: ρ, γ, ξ, I_max
        state: État de départ (init_state par défaut)

    Returns:
        (état final, trace de convergence)
    """
    if state is None:
        state = init_state(surfaces, library, config, graph)
    constants = surfaces.likelihood_constants()
    trace = CdaTrace()
    present = state.present
    active_aux = None
    if graph.n_dual:
        active_aux = aux_coefficients(graph, state.gain)[0] > 0

    for iteration in range(1, config.i_max + 1):
        previous = state.copy()
        sweep(state, library, graph, config)

        flips = float(np.mean(previous.labels[present] != state.labels[present])) if present.any() else 0.0
        row = TraceRow(
            sweep=iteration,
            rms_reflectivity=rms_change(state.reflectivity, previous.reflectivity, present),
            rms_beta=rms_change(state.beta, previous.beta, present),
            rms_gain=rms_change(state.gain, previous.gain, present),
            rms_aux=rms_change(state.aux, previous.aux, active_aux),
            label_change_rate=flips,
            log_posterior=log_posterior(state, surfaces, library, graph, config, constants),
        )
        trace.rows.append(row)
        logger.debug(
            f"    Balayage {iteration}: Δr={row.rms_reflectivity:.3g} Δh={row.rms_gain:.3g} "
            f"labels={row.label_change_rate:.3g} log-post={row.log_posterior:.8g}"
        )
        xi = config.xi
        if row.rms_reflectivity <= xi and row.rms_gain <= xi and row.label_change_rate <= xi:
            trace.converged = True
            break

    if trace.converged:
        logger.info(f"  ✅ Convergence en {trace.sweeps} balayage(s)")
    else:
        logger.warning(f"  ⚠️  Pas de convergence après {trace.sweeps} balayages (ξ={config.xi:g})")
    return state, trace
