"""Bibliothèque spectrale: chargement, sauvegarde et bibliothèque par défaut"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from .config import DEFAULT_ALPHA, DEFAULT_NU
from .models import SpectralLibrary
from .simulator import default_signatures


logger = logging.getLogger(__name__)

Matrix = Union[float, List[float], List[List[float]]]


class LibraryFile(BaseModel):
    """Schéma JSON d'une bibliothèque (α, ν scalaires ou matrices K x L; ε optionnel)"""
    names: List[str] = []
    signatures: List[List[float]]
    alpha: Matrix = DEFAULT_ALPHA
    nu: Matrix = DEFAULT_NU
    eps: Optional[Matrix] = None


def default_library(classes: int, wavelengths: int, alpha: float = DEFAULT_ALPHA,
                    nu: float = DEFAULT_NU) -> SpectralLibrary:
    """Bibliothèque synthétique, cohérente avec les scènes simulées"""
    return SpectralLibrary.from_signatures(default_signatures(classes, wavelengths), alpha, nu)


def load_library(path: Union[str, Path]) -> SpectralLibrary:
    """
    Charge une bibliothèque JSON

    Sans ε explicite, ε = m (ν + 1) / α: le mode a priori de β vaut alors m / α.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ Bibliothèque introuvable: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = LibraryFile.model_validate(json.load(f))
        except (json.JSONDecodeError, ValidationError) as e:
            raise ValueError(f"❌ Bibliothèque invalide ({path.name}): {e}")
    if data.eps is None:
        library = SpectralLibrary.from_signatures(data.signatures, data.alpha, data.nu, data.names)
    else:
        library = SpectralLibrary(data.signatures, data.alpha, data.nu, data.eps, tuple(data.names))
    logger.info(f"  📚 Bibliothèque chargée: K={library.classes}, L={library.wavelengths}")
    return library


def store_library(library: SpectralLibrary, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = LibraryFile(
        names=list(library.names),
        signatures=library.signatures.tolist(),
        alpha=library.alpha.tolist(),
        nu=library.nu.tolist(),
        eps=library.eps.tolist(),
    )
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload.model_dump(), f, indent=2, ensure_ascii=False)
    return path


def class_similarity(totals: np.ndarray, library: SpectralLibrary) -> np.ndarray:
    """Similarité cosinus entre les totaux ȳ_{s,:} et chaque signature m_k: (N_s, K)"""
    norms = np.linalg.norm(totals, axis=1, keepdims=True)
    unit = np.divide(totals, norms, out=np.zeros_like(totals), where=norms > 0)
    signatures = library.signatures / np.linalg.norm(library.signatures, axis=1, keepdims=True)
    return unit @ signatures.T
