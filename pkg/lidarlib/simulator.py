"""Simulation de cubes d'histogrammes (modèle d'observation de Poisson)"""

import logging
import math
from typing import Optional

import numpy as np

from .models import BackgroundSpec, GroundTruthScene, HistogramCube, Irf
from .config import DEFAULT_BIN_WIDTH
from .utils import format_count


logger = logging.getLogger(__name__)


def signal_rate(scene: GroundTruthScene, irf: Irf) -> np.ndarray:
    """
    Flux de signal Σ_c r_{n,c,l} g_l(t - d_{n,c}), IRF tronquée aux bords

    Returns:
        Tableau (lignes, colonnes, L, T)
    """
    if irf.wavelengths != scene.wavelengths:
        raise ValueError(
            f"❌ L'IRF a {irf.wavelengths} longueurs d'onde, la scène {scene.wavelengths}"
        )
    rate = np.zeros((scene.rows, scene.cols, scene.wavelengths, scene.bins))
    for slot in range(scene.max_surfaces):
        rr, cc = np.nonzero(scene.depths[:, :, slot] >= 0)
        if not rr.size:
            continue
        depth = scene.depths[rr, cc, slot]
        refl = scene.reflectivity[rr, cc, slot]  # (P, L)
        for j in range(irf.length):
            t = depth - irf.offset + j
            valid = (t >= 0) & (t < scene.bins)
            # Un pixel porte au plus une surface par emplacement: pas de doublon d'indice
            rate[rr[valid], cc[valid], :, t[valid]] += refl[valid] * irf.response[:, j]
    return rate


def _signal_scale(scene: GroundTruthScene, rate: np.ndarray, ppp: float, sbr: float) -> float:
    signal_share = 1.0 if math.isinf(sbr) else sbr / (1.0 + sbr)
    occupied = int(np.any(scene.present, axis=2).sum())
    total = float(rate.sum())
    if not occupied or total <= 0:
        return 1.0
    return ppp * signal_share * occupied / total


def calibrate_scene(scene: GroundTruthScene, irf: Irf, ppp: float, sbr: float) -> GroundTruthScene:
    """Scène dont les réflectivités sont exprimées en photons signal attendus (calibration PPP / SBR)"""
    scale = _signal_scale(scene, signal_rate(scene, irf), ppp, sbr)
    return GroundTruthScene(scene.depths, scene.reflectivity * scale, scene.labels, scene.bins)


def observation_rate(scene: GroundTruthScene, irf: Irf, background: BackgroundSpec,
                     ppp: float, sbr: float) -> np.ndarray:
    """
    Intensité de Poisson par voxel, calibrée en PPP / SBR

    Le signal est mis à l'échelle pour que la moyenne de photons signal par pixel
    occupé vaille ppp·sbr/(1+sbr), le fond pour que la moyenne de photons de fond
    par pixel vaille ppp/(1+sbr). sbr = inf supprime le fond.
    """
    if not ppp > 0:
        raise ValueError(f"❌ ppp doit être > 0: {ppp}")
    if not sbr > 0:
        raise ValueError(f"❌ sbr doit être > 0 (ou inf): {sbr}")

    rate = signal_rate(scene, irf)
    rate *= _signal_scale(scene, rate, ppp, sbr)

    if not math.isinf(sbr) and background.level > 0:
        field = background.field(scene.rows, scene.cols, scene.wavelengths, scene.bins) / background.level
        per_voxel = ppp / (1.0 + sbr) / (scene.wavelengths * scene.bins)
        rate += field * per_voxel
    return rate


def simulate(scene: GroundTruthScene, irf: Irf, background: BackgroundSpec, ppp: float,
             sbr: float, seed: int, bin_width: float = DEFAULT_BIN_WIDTH) -> HistogramCube:
    """
    Tire un cube de comptages de Poisson pour une scène

    Args:
        scene: Vérité terrain
        irf: IRF du système (même nombre de longueurs d'onde que la scène)
        background: Forme du fond
        ppp: Photons moyens par pixel
        sbr: Rapport signal sur fond (inf: sans fond)
        seed: Graine du générateur

    Returns:
        Cube simulé de mêmes dimensions que la scène
    """
    rate = observation_rate(scene, irf, background, ppp, sbr)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate).astype(np.uint32)
    cube = HistogramCube(counts, bin_width)
    logger.info(
        f"  🎲 Cube simulé {cube.dims} (ppp={ppp:g}, sbr={sbr:g}, graine={seed}): "
        f"{format_count(cube.total)} photons"
    )
    return cube


def default_signatures(classes: int, wavelengths: int) -> np.ndarray:
    """
    Signatures spectrales séparables: un pic par classe sur une ligne de base,
    normalisées à la même somme (l'énergie ne trahit pas la classe)
    """
    if classes < 1 or wavelengths < 1:
        raise ValueError(f"❌ Bibliothèque vide: K={classes}, L={wavelengths}")
    if wavelengths == 1:
        return np.ones((classes, 1))
    centers = np.linspace(0, wavelengths - 1, classes) if classes > 1 else np.array([(wavelengths - 1) / 2])
    width = max(0.6, (wavelengths - 1) / (2.0 * max(classes, 2)))
    grid = np.arange(wavelengths)
    signatures = 0.25 + np.exp(-0.5 * ((grid[None, :] - centers[:, None]) / width) ** 2)
    return signatures * wavelengths / signatures.sum(axis=1, keepdims=True)


def _depth_layer(rows: int, cols: int, low: int, high: int, rng: np.random.Generator) -> np.ndarray:
    """Plan incliné aléatoire + boîtes, ramené dans [low, high]"""
    yy, xx = np.meshgrid(np.linspace(0, 1, rows), np.linspace(0, 1, cols), indexing='ij')
    angle = rng.uniform(0, 2 * np.pi)
    layer = 0.5 + 0.5 * (np.cos(angle) * (yy - 0.5) + np.sin(angle) * (xx - 0.5)) * 1.4
    for _ in range(int(rng.integers(2, 5))):
        h = int(rng.integers(max(1, rows // 8), max(2, rows // 3) + 1))
        w = int(rng.integers(max(1, cols // 8), max(2, cols // 3) + 1))
        r0 = int(rng.integers(0, max(1, rows - h + 1)))
        c0 = int(rng.integers(0, max(1, cols - w + 1)))
        layer[r0:r0 + h, c0:c0 + w] = rng.uniform(0, 1)
    layer = np.clip(layer, 0.0, 1.0)
    return np.rint(low + layer * (high - low)).astype(np.int64)


def _block_labels(rows: int, cols: int, classes: int, rng: np.random.Generator) -> np.ndarray:
    block = max(2, min(rows, cols) // 4)
    grid = rng.integers(0, classes, size=(-(-rows // block), -(-cols // block)))
    return np.repeat(np.repeat(grid, block, axis=0), block, axis=1)[:rows, :cols]


def generate_scene(rows: int, cols: int, bins: int, signatures: np.ndarray, surfaces: int = 2,
                   seed: int = 0, margin: Optional[int] = None) -> GroundTruthScene:
    """
    Scène synthétique à une ou deux couches de profondeur par pixel

    Chaque couche est un plan incliné encombré de boîtes; les classes forment des
    blocs et le gain d'éclairement varie lentement (0.5 à 1.5), indépendamment
    de la profondeur.

    Args:
        rows, cols, bins: Dimensions de la scène
        signatures: Signatures m (K, L) des classes
        surfaces: Nombre de couches (1 ou 2)
        seed: Graine du générateur
        margin: Marge (bins) aux bords temporels, par défaut T/12
    """
    if surfaces not in (1, 2):
        raise ValueError(f"❌ 1 ou 2 surfaces par pixel supportées: {surfaces}")
    signatures = np.atleast_2d(np.asarray(signatures, dtype=float))
    classes, wavelengths = signatures.shape
    rng = np.random.default_rng(seed)
    margin = max(2, bins // 12) if margin is None else margin
    usable = bins - 2 * margin
    if usable < 4 * surfaces:
        raise ValueError(f"❌ Trop peu de bins ({bins}) pour {surfaces} couches")

    span = usable // surfaces
    gap = max(2, span // 4)
    depths = np.full((rows, cols, surfaces), -1, dtype=np.int64)
    labels = np.full((rows, cols, surfaces), -1, dtype=np.int64)
    reflectivity = np.zeros((rows, cols, surfaces, wavelengths))
    yy, xx = np.meshgrid(np.arange(rows), np.arange(cols), indexing='ij')

    for k in range(surfaces):
        low = margin + k * span + (gap if k else 0)
        high = margin + (k + 1) * span - gap - 1
        depths[:, :, k] = _depth_layer(rows, cols, low, high, rng)
        labels[:, :, k] = _block_labels(rows, cols, classes, rng)
        phase = rng.uniform(0, 2 * np.pi, size=2)
        gain = 1.0 + 0.5 * np.sin(2 * np.pi * yy / max(rows, 2) + phase[0]) * np.cos(2 * np.pi * xx / max(cols, 2) + phase[1])
        reflectivity[:, :, k, :] = gain[:, :, None] * signatures[labels[:, :, k]]

    scene = GroundTruthScene(depths, reflectivity, labels, bins)
    logger.info(f"  🏞️  Scène synthétique {rows}x{cols}, T={bins}, {surfaces} couche(s), K={classes}")
    return scene
