"""Représentation multi-échelle et filtrage adapté par l'IRF"""

import logging

import numpy as np
from scipy.ndimage import uniform_filter

from .models import HistogramCube, Irf, KernelSet, MultiscaleStack


logger = logging.getLogger(__name__)


def spatial_mean(counts: np.ndarray, size: int) -> np.ndarray:
    """
    Moyenne spatiale (size x size) par (l, t), renormalisée sur la fenêtre valide

    Args:
        counts: Tableau (lignes, colonnes, L, T)
        size: Côté impair du noyau

    Returns:
        Tableau float64 de même forme
    """
    data = np.asarray(counts, dtype=np.float64)
    if size == 1:
        return data.copy()
    footprint = (size, size, 1, 1)
    summed = uniform_filter(data, size=footprint, mode='constant', cval=0.0)
    support = uniform_filter(np.ones(data.shape[:2] + (1, 1)), size=footprint, mode='constant', cval=0.0)
    return summed / support


def build_multiscale(cube: HistogramCube, kernels: KernelSet) -> MultiscaleStack:
    """
    Construit les cubes filtrés Y^q, un par taille de noyau

    Args:
        cube: Cube d'observation
        kernels: Tailles et poids des échelles

    Returns:
        Pile multi-échelle (l'échelle de taille 1 est une copie exacte)
    """
    largest = max(kernels.sizes)
    side = min(cube.rows, cube.cols)
    if largest > side:
        raise ValueError(f"❌ Noyau {largest}x{largest} plus grand que l'image ({cube.rows}x{cube.cols})")

    scales = tuple(spatial_mean(cube.counts, size) for size in kernels.sizes)
    logger.info(f"  🔭 {len(scales)} échelles construites (noyaux {list(kernels.sizes)})")
    return MultiscaleStack(scales, kernels, cube.bin_width)


def matched_filter(data: np.ndarray, irf: Irf) -> np.ndarray:
    """
    Corrélation temporelle avec l'IRF, sans repliement

    out[..., l, t] = Σ_j data[..., l, t + j - offset] · g_l[j], de sorte qu'un
    histogramme égal à g_l décalé en d culmine en d.

    Args:
        data: Tableau (..., L, T)
        irf: IRF (L lignes)

    Returns:
        Tableau float64 de même forme
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim < 2 or data.shape[-2] != irf.wavelengths:
        raise ValueError(
            f"❌ {data.shape[-2] if data.ndim >= 2 else '?'} longueurs d'onde pour une IRF à {irf.wavelengths}"
        )
    bins = data.shape[-1]
    if irf.length > bins:
        raise ValueError(f"❌ IRF ({irf.length} bins) plus longue que l'histogramme ({bins})")

    out = np.zeros_like(data)
    # Somme des décalages dans un ordre fixe
    for j in range(irf.length):
        shift = j - irf.offset
        weight = irf.response[:, j][:, None]
        if shift >= 0:
            out[..., :bins - shift] += data[..., shift:] * weight
        else:
            out[..., -shift:] += data[..., :bins + shift] * weight
    return out


def irf_coverage(irf: Irf, bins: int) -> np.ndarray:
    """
    Part de l'IRF comprise dans l'histogramme à chaque bin: matched_filter d'un
    histogramme constant égal à 1, soit (L, T), égale à 1 loin des bords
    """
    return matched_filter(np.ones((irf.wavelengths, bins)), irf)
