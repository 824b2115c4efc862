"""Fonctions utilitaires du pipeline"""

import hashlib
import json
from typing import Any

import numpy as np

from .config import SPEED_OF_LIGHT


def format_count(value: float) -> str:
    """
    Formate un nombre de photons/voxels en format lisible

    Args:
        value: Nombre à formater

    Returns:
        Chaîne formatée (ex: "1.23 M")
    """
    for unit in ['', 'k', 'M', 'G']:
        if abs(value) < 1000.0:
            return f"{value:.2f} {unit}".rstrip()
        value /= 1000.0
    return f"{value:.2f} T"


def stable_hash(payload: Any) -> str:
    """Hash court (16 hex) d'un objet sérialisable en JSON canonique"""
    text = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]


def rms_change(new: np.ndarray, old: np.ndarray, mask: np.ndarray = None) -> float:
    """Variation quadratique moyenne entre deux itérés (critère d'arrêt)"""
    diff = np.asarray(new, dtype=float) - np.asarray(old, dtype=float)
    if mask is not None:
        diff = diff[mask]
    if diff.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(diff ** 2)))


def bins_to_metres(bins: float, bin_width: float) -> float:
    """Convertit une distance en bins en mètres (temps de vol aller-retour)"""
    return bins * bin_width * SPEED_OF_LIGHT / 2.0


def metres_to_bins(metres: float, bin_width: float) -> float:
    """Convertit une distance en mètres en bins"""
    return 2.0 * metres / (bin_width * SPEED_OF_LIGHT)
