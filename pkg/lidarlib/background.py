"""Estimation du fond non uniforme à partir de l'échelle la plus grossière"""

import logging
import math

import numpy as np

from .config import BACKGROUND_PIXEL_FRACTION
from .models import BackgroundEstimate, MultiscaleStack


logger = logging.getLogger(__name__)


def lowest_value_pixels(coarse: np.ndarray, fraction: float = BACKGROUND_PIXEL_FRACTION) -> np.ndarray:
    """
    Π_{l,t}: pour chaque longueur d'onde et chaque bin, les ceil(fraction·N) pixels
    de plus faible comptage

    Returns:
        Indices aplatis (|Π|, L, T), sans ordre au sein d'un même (l, t)
    """
    rows, cols, wavelengths, bins = coarse.shape
    n_pixels = rows * cols
    count = max(1, math.ceil(fraction * n_pixels))
    flat = coarse.reshape(n_pixels, wavelengths, bins)
    if count == n_pixels:
        return np.broadcast_to(np.arange(n_pixels)[:, None, None], flat.shape).copy()
    return np.argpartition(flat, count - 1, axis=0)[:count]


def estimate_background(stack: MultiscaleStack, fraction: float = BACKGROUND_PIXEL_FRACTION) -> BackgroundEstimate:
    """
    Estime b̂ = max(b̲ + b̄ - b̿, 0) sur l'échelle la plus grossière

    b̄_{l,t} (forme temporelle) est la médiane des valeurs des pixels Π_{l,t} les
    plus faibles au bin t, b̲ (forme spatiale) la médiane temporelle de chaque
    pixel, b̿ la moyenne de b̄. Un pixel n'entre dans Π_{l,t} qu'aux bins où il
    ne porte pas de signal: une scène sans fond donne b̂ = 0.

    Args:
        stack: Pile multi-échelle
        fraction: Part des pixels retenus à chaque bin pour la forme temporelle

    Returns:
        Estimation du fond
    """
    if stack.count < 1:
        raise ValueError("❌ Pile multi-échelle vide")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"❌ Fraction de pixels invalide: {fraction}")
    coarse = stack.coarsest
    rows, cols, wavelengths, bins = coarse.shape
    if rows * cols < 1 or bins < 1:
        raise ValueError(f"❌ Cube trop petit pour estimer le fond: {coarse.shape}")

    pixel_set = lowest_value_pixels(coarse, fraction)
    flat = coarse.reshape(rows * cols, wavelengths, bins)
    lowest = np.take_along_axis(flat, pixel_set, axis=0)
    temporal = np.median(lowest, axis=0)                    # b̄ (L, T)
    spatial = np.median(coarse, axis=3)                     # b̲ (lignes, colonnes, L)
    grand_mean = temporal.mean(axis=1)                      # b̿ (L,)
    b_hat = spatial[..., None] + (temporal - grand_mean[:, None])[None, None]
    np.maximum(b_hat, 0.0, out=b_hat)

    logger.info(
        f"  🌫️  Fond estimé sur {pixel_set.shape[0]} pixels par bin "
        f"(moyenne {float(b_hat.mean()):.4g} photons/voxel)"
    )
    return BackgroundEstimate(b_hat, temporal, spatial, grand_mean, pixel_set)


def background_share(stack: MultiscaleStack, background: BackgroundEstimate) -> float:
    """Part du fond estimé dans les photons de l'échelle la plus fine (0 pour un cube vide)"""
    total = float(stack.scales[0].sum())
    if total <= 0:
        return 0.0
    return float(background.b_hat.sum()) / total
