"""Matrice de saillance, ajustement gamma du fond et seuillage à pfa donnée"""

import logging
import math
from typing import Optional

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.special import gammaincc

from .background import background_share
from .config import (
    BACKGROUND_FREE_SHARE,
    GAMMA_CLIP_ITERATIONS,
    GAMMA_CLIP_PFA,
    GAMMA_MIN_SAMPLES,
    PEAK_FRACTION,
    THRESHOLD_TOLERANCE,
)
from .errors import DegenerateFitError
from .models import (
    BackgroundEstimate,
    DetectionMap,
    DetectionResult,
    GammaFit,
    Irf,
    KernelSet,
    MultiscaleStack,
    SaliencyMatrix,
)
from .multiscale import irf_coverage, matched_filter


logger = logging.getLogger(__name__)


def compute_saliency(stack: MultiscaleStack, irf: Irf, background: BackgroundEstimate,
                     kernels: Optional[KernelSet] = None) -> SaliencyMatrix:
    """
    S(n, t) = | Σ_q Σ_l λ_q (Y^q_l ⊛ g_l)(t) - b̂_l(n, t) c_l(t) |

    Le filtrage adapté étant linéaire, la combinaison des échelles est faite avant
    la corrélation. c_l(t) est la part de l'IRF comprise dans l'histogramme
    (1 sauf aux bords): un fond constant y donne S = 0 jusqu'aux bords.

    Args:
        stack: Pile multi-échelle
        irf: IRF du système
        background: Fond estimé
        kernels: Poids λ (par défaut ceux de la pile)

    Returns:
        Saillance (lignes, colonnes, T)
    """
    kernels = kernels or stack.kernels
    if kernels.scales != stack.count:
        raise ValueError(f"❌ {kernels.scales} poids pour {stack.count} échelles")
    if background.b_hat.shape != stack.dims:
        raise ValueError(f"❌ Fond {background.b_hat.shape} incompatible avec la pile {stack.dims}")

    combined = np.zeros(stack.dims)
    for weight, scale in zip(kernels.weights, stack.scales):
        if weight:
            combined += weight * scale
    residual = matched_filter(combined, irf) - background.b_hat * irf_coverage(irf, stack.dims[3])
    return SaliencyMatrix(np.abs(residual.sum(axis=2)))


def fit_gamma(samples: np.ndarray) -> GammaFit:
    """
    Ajustement par la méthode des moments sur les valeurs strictement positives

    Args:
        samples: Échantillons ≥ 0 (les zéros sont écartés)

    Returns:
        Loi gamma (α_b = moyenne²/variance, β_b = variance/moyenne)
    """
    values = np.asarray(samples, dtype=np.float64).ravel()
    values = values[values > 0]
    if values.size < GAMMA_MIN_SAMPLES:
        raise DegenerateFitError(
            f"❌ {values.size} échantillons positifs, {GAMMA_MIN_SAMPLES} requis pour l'ajustement gamma"
        )
    mean = float(values.mean())
    variance = float(values.var())
    if not np.isfinite(variance) or variance <= 0.0:
        raise DegenerateFitError("❌ Variance nulle: échantillons incompatibles avec une loi gamma")
    return GammaFit(shape=mean * mean / variance, scale=variance / mean)


def threshold_for_pfa(fit: GammaFit, pfa: float, tolerance: float = THRESHOLD_TOLERANCE) -> float:
    """
    Quantile x tel que P(Gamma(α_b, β_b) > x) = pfa, par dichotomie

    Args:
        fit: Loi du fond
        pfa: Probabilité de fausse alarme dans ]0, 1[
        tolerance: Précision absolue sur x

    Returns:
        Seuil
    """
    if not 0.0 < pfa < 1.0:
        raise ValueError(f"❌ pfa doit être dans ]0, 1[: {pfa}")

    def tail(x: float) -> float:
        return float(gammaincc(fit.shape, x / fit.scale))

    low, high = 0.0, max(fit.mean, fit.scale)
    while tail(high) > pfa:
        low, high = high, 2.0 * high
    for _ in range(400):
        if high - low <= tolerance:
            break
        middle = 0.5 * (low + high)
        if middle <= low or middle >= high:
            break
        if tail(middle) > pfa:
            low = middle
        else:
            high = middle
    return 0.5 * (low + high)


def binarize(saliency: SaliencyMatrix, threshold: float) -> DetectionMap:
    """Carte M = (S > seuil)"""
    if threshold < 0:
        raise ValueError(f"❌ Le seuil doit être ≥ 0: {threshold}")
    return DetectionMap(saliency.values > threshold)


def robust_threshold(saliency: SaliencyMatrix, pfa: float,
                     clip_iterations: int = GAMMA_CLIP_ITERATIONS) -> tuple:
    """
    Seuil de saillance à pfa donnée, par une loi gamma ajustée sur S²

    Pour un résidu de fond centré, S² suit une loi proche de σ² χ²₁, soit une
    gamma de forme 1/2. L'ajustement est refait sur les valeurs ≤ seuil courant
    (départ à la médiane, seuil d'écrêtage à min(pfa, GAMMA_CLIP_PFA)) pour
    écarter les voxels cibles.

    Returns:
        (seuil sur S, loi ajustée de S²)
    """
    if not 0.0 < pfa < 1.0:
        raise ValueError(f"❌ pfa doit être dans ]0, 1[: {pfa}")
    energy = saliency.values.ravel().astype(np.float64) ** 2
    positive = energy[energy > 0]
    fit = fit_gamma(positive)
    clip_pfa = min(pfa, GAMMA_CLIP_PFA)

    limit = float(np.median(positive)) if clip_iterations else math.inf
    for iteration in range(clip_iterations):
        try:
            candidate = fit_gamma(positive[positive <= limit])
        except DegenerateFitError:
            # Retour au dernier ajustement valide
            logger.debug(f"    Écrêtage {iteration}: échantillon dégénéré, arrêt")
            break
        fit = candidate
        updated = threshold_for_pfa(fit, clip_pfa)
        logger.debug(f"    Écrêtage {iteration}: limite {limit:.6g} → {updated:.6g}")
        converged = abs(updated - limit) <= 1e-6 * max(1.0, limit)
        limit = updated
        if converged:
            break
    return math.sqrt(threshold_for_pfa(fit, pfa)), fit


def peak_map(saliency: SaliencyMatrix, window: int, fraction: float = PEAK_FRACTION) -> DetectionMap:
    """
    Carte des maxima locaux: voxels de saillance non nulle atteignant fraction
    du maximum temporel sur une fenêtre de window bins centrée
    """
    if window < 1:
        raise ValueError(f"❌ Fenêtre de maxima invalide: {window}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"❌ Fraction de pic invalide: {fraction}")
    values = saliency.values
    local = maximum_filter1d(values, size=window, axis=2, mode='constant', cval=0.0)
    return DetectionMap((values > 0) & (values >= fraction * local))


def detect_targets(stack: MultiscaleStack, irf: Irf, background: BackgroundEstimate,
                   pfa: float, kernels: Optional[KernelSet] = None,
                   clip_iterations: int = GAMMA_CLIP_ITERATIONS) -> DetectionResult:
    """
    Détection par saillance: S, loi gamma du fond, seuil à pfa, carte binaire

    Quand la part du fond estimé reste sous BACKGROUND_FREE_SHARE, il n'y a pas de
    fond à modéliser: la carte garde les maxima locaux de S (fenêtre de
    2 longueurs d'IRF + 1), le seuil vaut 0 et la loi est absente.
    """
    saliency = compute_saliency(stack, irf, background, kernels)
    share = background_share(stack, background)
    if share <= BACKGROUND_FREE_SHARE:
        threshold, fit = 0.0, None
        detection_map = peak_map(saliency, 2 * irf.length + 1)
        logger.info(f"  🎯 Fond négligeable ({100.0 * share:.3g} % des photons): maxima locaux de saillance")
    else:
        threshold, fit = robust_threshold(saliency, pfa, clip_iterations)
        detection_map = binarize(saliency, threshold)
        logger.info(
            f"  🎯 Loi de S² Gamma(α={fit.shape:.4g}, β={fit.scale:.4g}), "
            f"seuil {threshold:.6g} à pfa={pfa:g}"
        )
    logger.info(
        f"  ✅ {detection_map.kept_voxels} voxels retenus "
        f"({100.0 * detection_map.kept_fraction:.3f} % du cube)"
    )
    return DetectionResult(saliency, fit, threshold, detection_map)
