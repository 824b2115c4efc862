"""Fixtures partagées par les tests"""

import numpy as np
import pytest

from lidarlib.models import GroundTruthScene, HistogramCube, Irf, SurfaceSet
from lidarlib.settings import CdaConfig, PipelineConfig


def single_surface_scene(rows=1, cols=1, bins=32, depth=10, reflectivity=5.0, wavelengths=1):
    """Une surface par pixel à profondeur et réflectivité constantes"""
    depths = np.full((rows, cols, 1), depth, dtype=np.int64)
    refl = np.full((rows, cols, 1, wavelengths), float(reflectivity))
    labels = np.zeros((rows, cols, 1), dtype=np.int64)
    return GroundTruthScene(depths, refl, labels, bins)


def surface_set_from_totals(totals, irf=None, max_surfaces=1, bins=32, depth=10):
    """
    Ensemble de surfaces dont les histogrammes portent les totaux donnés au pic

    Args:
        totals: (lignes, colonnes, K_s, L), NaN pour une surface absente
    """
    totals = np.asarray(totals, dtype=float)
    rows, cols, k_s, wavelengths = totals.shape
    irf = irf or Irf.delta(wavelengths)
    hists = np.zeros((rows, cols, k_s, wavelengths, irf.length))
    present = ~np.isnan(totals).any(axis=3)
    hists[..., irf.offset] = np.nan_to_num(totals)
    depths = np.where(present, depth + 4 * np.arange(k_s)[None, None, :], -1)
    return SurfaceSet.from_histograms(hists, depths, bins, irf)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cube(rng):
    return HistogramCube(rng.poisson(3.0, size=(4, 4, 2, 8)))


@pytest.fixture
def small_config(tmp_path):
    """Configuration réduite (scène 12x12) pour les tests de bout en bout"""
    return PipelineConfig.model_validate({
        'kernels': {'sizes': [1, 3, 5], 'weights': [1 / 3, 1 / 3, 1 / 3]},
        'simulation': {
            'rows': 12, 'cols': 12, 'bins': 48, 'wavelengths': 2, 'classes': 2,
            'surfaces': 1, 'ppp': 200.0, 'sbr': 10.0, 'seed': 3,
        },
        'cda': {'i_max': 30},
        'output_dir': str(tmp_path),
    })


@pytest.fixture
def cda_config():
    return CdaConfig()
