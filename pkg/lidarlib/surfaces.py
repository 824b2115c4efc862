"""Extraction des surfaces détectées et sélection d'échelle"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from .models import BackgroundEstimate, DetectionMap, Irf, KernelSet, MultiscaleStack, Surface, SurfaceSet
from .multiscale import irf_coverage, matched_filter


logger = logging.getLogger(__name__)


def find_runs(column: np.ndarray) -> List[Tuple[int, int]]:
    """Plages [début, fin) de valeurs vraies consécutives"""
    padded = np.concatenate(([False], np.asarray(column, dtype=bool), [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


def merge_runs(runs: List[Tuple[int, int]], min_gap: int) -> List[Tuple[int, int]]:
    """Fusionne les plages séparées par moins de min_gap bins"""
    merged: List[Tuple[int, int]] = []
    for start, end in runs:
        if merged and start - merged[-1][1] < min_gap:
            merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return merged


def clean_histograms(stack: MultiscaleStack, irf: Irf, background: BackgroundEstimate,
                     rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """
    Signal sans fond max(Y^q ⊛ g - b̂ · couverture, 0) pour une liste de pixels

    Returns:
        Tableau (pixels, Q, L, T)
    """
    b_hat = background.b_hat[rows, cols] * irf_coverage(irf, stack.dims[3])
    return np.stack(
        [np.maximum(matched_filter(scale[rows, cols], irf) - b_hat, 0.0) for scale in stack.scales],
        axis=1,
    )


def extract_surfaces(detection_map: DetectionMap, stack: MultiscaleStack, irf: Irf,
                     background: BackgroundEstimate, max_surfaces: int) -> SurfaceSet:
    """
    Regroupe les voxels détectés en pics et garde les K_s plus énergétiques par pixel

    Les plages séparées par moins d'une largeur à mi-hauteur d'IRF sont fusionnées;
    chaque pic garde ses histogrammes propres à toutes les échelles sur une fenêtre
    élargie de deux longueurs d'IRF de chaque côté.

    Args:
        detection_map: Carte binaire M
        stack: Pile multi-échelle
        irf: IRF du système
        background: Fond estimé
        max_surfaces: K_s

    Returns:
        Ensemble de N x K_s surfaces (emplacements vides marqués absents)
    """
    if max_surfaces < 1:
        raise ValueError(f"❌ K_s doit être ≥ 1: {max_surfaces}")
    rows, cols, _, bins = stack.dims
    if detection_map.mask.shape != (rows, cols, bins):
        raise ValueError(f"❌ Carte {detection_map.mask.shape} incompatible avec la pile {stack.dims}")

    surface_set = SurfaceSet.empty(rows, cols, max_surfaces, bins, irf)
    surface_set.bin_width = stack.bin_width
    rr, cc = np.nonzero(detection_map.mask.any(axis=2))
    if not rr.size:
        logger.warning("  ⚠️  Carte de détection vide: aucune surface")
        return surface_set

    clean = clean_histograms(stack, irf, background, rr, cc)
    margin = 2 * irf.length
    min_gap = irf.fwhm_bins
    dropped = 0

    for p, (r, c) in enumerate(zip(rr, cc)):
        runs = merge_runs(find_runs(detection_map.mask[r, c]), min_gap)
        energies = [float(clean[p, :, :, a:b].sum()) for a, b in runs]
        candidates = [(e, run) for e, run in zip(energies, runs) if e > 0]
        dropped += len(runs) - len(candidates)
        # Énergie décroissante, pic le plus proche en cas d'égalité
        candidates.sort(key=lambda item: (-item[0], item[1][0]))
        kept = sorted(candidates[:max_surfaces], key=lambda item: item[1][0])
        for slot, (energy, (start, end)) in enumerate(kept):
            lo, hi = max(0, start - margin), min(bins, end + margin)
            surface = surface_set.surfaces[surface_set.index(r, c, slot)]
            surface.present = True
            surface.run = (start, end)
            surface.energy = energy
            surface.window_start = lo
            surface.clean = clean[p, :, :, lo:hi].copy()

    if dropped:
        logger.debug(f"    {dropped} pics sans énergie propre écartés")
    logger.info(f"  🧩 {surface_set.n_present} surfaces extraites sur {rr.size} pixels")
    return surface_set


def _correlation(clean: np.ndarray, irf: Irf) -> np.ndarray:
    """Σ_l Σ_t y^q_{l,t} g_l(t - d) pour chaque échelle: (Q, fenêtre)"""
    return matched_filter(clean, irf).sum(axis=1)


def select_scales(surface_set: SurfaceSet, kernels: Optional[KernelSet] = None) -> SurfaceSet:
    """
    Sélectionne pour chaque surface l'échelle q̄ dont le pic est le plus proche du pic global

    d^G maximise la corrélation cumulée sur toutes les échelles, d^q celle de
    l'échelle q; q̄ minimise |d^G - d^q| parmi les échelles 2..Q (égalité: la plus
    fine). L'histogramme retenu est celui de l'échelle q̄ sur le support de l'IRF
    centré en d^q̄.
    """
    irf = surface_set.irf
    for surface in surface_set.surfaces:
        if not surface.present:
            continue
        scales = surface.clean.shape[0]
        if scales < 2:
            raise ValueError(f"❌ La sélection d'échelle exige au moins 2 échelles ({scales})")
        if kernels is not None and kernels.scales != scales:
            raise ValueError(f"❌ {kernels.scales} noyaux pour {scales} échelles")

        corr = _correlation(surface.clean, irf)
        width = corr.shape[1]
        lo = max(0, surface.run[0] - irf.length) - surface.window_start
        hi = min(surface_set.bins, surface.run[1] + irf.length) - surface.window_start
        lo, hi = max(lo, 0), min(hi, width)
        search = corr[:, lo:hi]

        depth_global = lo + int(np.argmax(search.sum(axis=0)))
        depth_scales = lo + np.argmax(search, axis=1)
        gaps = np.abs(depth_scales[1:] - depth_global)
        selected = 1 + int(np.argmin(gaps))

        surface.depth_global = surface.window_start + depth_global
        surface.depth_scales = surface.window_start + depth_scales
        surface.selected_scale = selected
        surface.depth = int(surface.window_start + depth_scales[selected])
        surface.hist = _crop_hist(surface.clean[selected], surface.window_start, surface.depth,
                                  surface_set.bins, irf)

    _reorder_slots(surface_set)
    logger.info(f"  📐 Échelles sélectionnées pour {surface_set.n_present} surfaces")
    return surface_set


def _crop_hist(clean: np.ndarray, window_start: int, depth: int, bins: int, irf: Irf) -> np.ndarray:
    """Histogramme (L, longueur IRF) sur le support de l'IRF, nul hors cube ou là où g = 0"""
    positions, valid = irf.support(depth, bins)
    local = positions - window_start
    valid &= (local >= 0) & (local < clean.shape[1])
    hist = np.zeros((irf.wavelengths, irf.length))
    hist[:, valid] = clean[:, local[valid]]
    hist[irf.response == 0] = 0.0
    return hist


def _reorder_slots(surface_set: SurfaceSet) -> None:
    """Garantit des profondeurs strictement croissantes dans chaque pixel"""
    k_s = surface_set.max_surfaces
    if k_s == 1:
        return
    for base in range(0, len(surface_set.surfaces), k_s):
        block = surface_set.surfaces[base:base + k_s]
        present = [s for s in block if s.present]
        depths = [s.depth for s in present]
        if all(a < b for a, b in zip(depths, depths[1:])) and all(s.present for s in block[:len(present)]):
            continue
        # Profondeurs en double: seule la surface la plus énergétique est gardée
        by_depth = {}
        for s in sorted(present, key=lambda s: -s.energy):
            by_depth.setdefault(s.depth, s)
        ordered = sorted(by_depth.values(), key=lambda s: s.depth)
        row, col = block[0].row, block[0].col
        fresh = [Surface(row=row, col=col, slot=k) for k in range(k_s)]
        for slot, s in enumerate(ordered):
            s.slot = slot
            fresh[slot] = s
        surface_set.surfaces[base:base + k_s] = fresh
