"""
Module core de la chaîne LiDAR mono-photon multispectrale - détection par saillance
multi-échelle et reconstruction bayésienne (profondeur, réflectivité, classes)
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional, Tuple

# Configuration du logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

from .config import THREADS_ENV_VAR
from .errors import StageError
from .models import (
    BackgroundSpec,
    CdaTrace,
    DetectionResult,
    GroundTruthScene,
    HistogramCube,
    Irf,
    ModelState,
    PointCloud,
    SpectralLibrary,
    SurfaceSet,
    EvalReport,
)
from .settings import PipelineConfig
from .cube_manager import CubeManager
from .map_manager import MapManager
from .cloud_manager import CloudManager, cloud_from_scene, cloud_from_state
from .library import default_library, load_library
from .simulator import calibrate_scene, generate_scene, simulate
from .multiscale import build_multiscale
from .background import estimate_background
from .saliency import detect_targets
from .surfaces import extract_surfaces, select_scales
from .graph import build_graph
from .cda import run_cda
from .metrics import evaluate_sweep


@contextmanager
def stage(name: str):
    """Rattache toute erreur levée dans le bloc au nom de l'étape"""
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def cell_name(ppp: float, sbr: float) -> str:
    return f"p{ppp:g}_s{sbr:g}"


class LidarSystem:
    """
    Point d'entrée principal: simulation, détection, reconstruction, évaluation
    """

    def __init__(self, config: Optional[PipelineConfig] = None, output_dir=None):
        self.config = config or PipelineConfig()
        self.output_dir = Path(output_dir or self.config.output_dir)
        self.config_hash = self.config.config_hash()

        self.cube_manager = CubeManager(self.output_dir)
        self.map_manager = MapManager(self.output_dir)
        self.cloud_manager = CloudManager(self.output_dir)

    def artifact_stem(self, name: str, cell: Optional[str] = None) -> Path:
        stem = f"{name}_{cell}" if cell else name
        return self.output_dir / f"{stem}_{self.config_hash}"

    def artifact(self, name: str, ext: str, cell: Optional[str] = None) -> Path:
        """Chemin '<artefact>[_<cellule>]_<hash>.<ext>' dans le dossier de sortie"""
        stem = self.artifact_stem(name, cell)
        return stem.with_name(f"{stem.name}.{ext}")

    # Composants configurés

    def irf(self, wavelengths: int) -> Irf:
        return Irf.gaussian(wavelengths, self.config.irf_sigma)

    def library(self, wavelengths: int) -> SpectralLibrary:
        if self.config.library_path:
            return load_library(self.config.library_path)
        return default_library(self.config.simulation.classes, wavelengths)

    def background_spec(self) -> BackgroundSpec:
        sim = self.config.simulation
        if sim.background == "obscurant":
            return BackgroundSpec.obscurant(sim.rows, sim.cols, sim.bins)
        return BackgroundSpec.uniform(1.0)

    # Étapes en mémoire

    def simulate(self, ppp: Optional[float] = None, sbr: Optional[float] = None,
                 seed: Optional[int] = None) -> Tuple[HistogramCube, GroundTruthScene]:
        """
        Génère une scène synthétique et son cube simulé

        Returns:
            (cube, vérité terrain en photons signal attendus)
        """
        sim = self.config.simulation
        ppp = sim.ppp if ppp is None else ppp
        sbr = sim.sbr if sbr is None else sbr
        seed = sim.seed if seed is None else seed
        library = self.library(sim.wavelengths)
        irf = self.irf(library.wavelengths)
        scene = generate_scene(sim.rows, sim.cols, sim.bins, library.signatures, sim.surfaces, seed)
        cube = simulate(scene, irf, self.background_spec(), ppp, sbr, seed, self.config.bin_width)
        return cube, calibrate_scene(scene, irf, ppp, sbr)

    def detect(self, cube: HistogramCube) -> Tuple[DetectionResult, SurfaceSet]:
        """Chaîne de pré-traitement: multi-échelle, fond, saillance, surfaces, échelles"""
        kernels = self.config.kernels.to_kernel_set()
        detection = self.config.detection
        irf = self.irf(cube.wavelengths)
        logger.info(f"🔍 Détection sur un cube {cube.dims}...")
        stack = build_multiscale(cube, kernels)
        background = estimate_background(stack)
        result = detect_targets(stack, irf, background, detection.pfa, kernels, detection.clip_iterations)
        surfaces = extract_surfaces(result.detection_map, stack, irf, background, detection.max_surfaces)
        select_scales(surfaces, kernels)
        return result, surfaces

    def reconstruct(self, surfaces: SurfaceSet) -> Tuple[ModelState, CdaTrace, PointCloud]:
        """Chaîne de post-traitement: graphe puis descente par coordonnées"""
        logger.info(f"🧠 Reconstruction de {surfaces.n_present} surfaces...")
        library = self.library(surfaces.irf.wavelengths)
        graph = build_graph(surfaces, self.config.cda.rho)
        state, trace = run_cda(surfaces, library, graph, self.config.cda)
        return state, trace, cloud_from_state(state, surfaces)

    def evaluate(self, est: PointCloud, gt: PointCloud, taus: Optional[List[float]] = None) -> List[EvalReport]:
        return evaluate_sweep(est, gt, taus if taus is not None else self.config.taus)

    # Étapes sur fichiers

    def cmd_simulate(self, ppp: Optional[float] = None, sbr: Optional[float] = None,
                     seed: Optional[int] = None, cell: Optional[str] = None) -> Dict[str, Path]:
        with stage("simulate"):
            seed = self.config.simulation.seed if seed is None else seed
            cube, scene = self.simulate(ppp, sbr, seed)
            return {
                'cube': self.cube_manager.store_cube(cube, self.artifact("cube", "splc", cell)),
                'scene': self.cube_manager.store_scene(scene, self.artifact("scene", "npz", cell), seed, self.config_hash),
                'truth': self.cloud_manager.store_csv(cloud_from_scene(scene), self.artifact("truth", "csv", cell), self.config_hash),
            }

    def cmd_detect(self, cube_path: Path, cell: Optional[str] = None) -> Dict[str, object]:
        with stage("load"):
            cube = self.cube_manager.load_cube(cube_path)
        with stage("detect"):
            result, surfaces = self.detect(cube)
        with stage("write"):
            return {
                'map': self.map_manager.store_map(result.detection_map, self.artifact("map", "rle", cell)),
                'surfaces': self.map_manager.store_surfaces(surfaces, self.artifact("surfaces", "npz", cell), self.config_hash),
                'reduction_ratio': result.reduction_ratio,
                'surface_count': surfaces.n_present,
            }

    def cmd_reconstruct(self, surfaces_path: Path, cell: Optional[str] = None) -> Dict[str, object]:
        with stage("load"):
            surfaces = self.map_manager.load_surfaces(surfaces_path)
        with stage("reconstruct"):
            state, trace, cloud = self.reconstruct(surfaces)
        with stage("write"):
            return {
                'ply': self.cloud_manager.store_ply(cloud, self.artifact("cloud", "ply", cell), self.config_hash, surfaces.bin_width),
                'cloud': self.cloud_manager.store_csv(cloud, self.artifact("cloud", "csv", cell), self.config_hash),
                'trace': self.cloud_manager.store_trace(trace, self.artifact("trace", "csv", cell), self.config_hash),
                'converged': trace.converged,
                'sweeps': trace.sweeps,
                'points': len(cloud),
            }

    def cmd_evaluate(self, est_path: Path, gt_path: Path, taus: Optional[List[float]] = None,
                     cell: Optional[str] = None) -> Dict[str, object]:
        with stage("load"):
            est = self.cloud_manager.load_csv(est_path)
            gt = self.cloud_manager.load_csv(gt_path)
        with stage("evaluate"):
            reports = self.evaluate(est, gt, taus)
        with stage("write"):
            paths = self.cloud_manager.store_reports(
                reports, self.artifact_stem("report", cell), self.config_hash, self.config.bin_width,
            )
            return {'csv': paths[0], 'json': paths[1], 'reports': reports}

    def run_cell(self, index: int, ppp: float, sbr: float, grid: bool = False) -> Dict[str, object]:
        """Chaîne complète pour une cellule PPP x SBR (graine = graine + indice)"""
        cell = cell_name(ppp, sbr) if grid else None
        seed = self.config.simulation.seed + index
        logger.info(f"🚀 Cellule {index} (ppp={ppp:g}, sbr={sbr:g}, graine={seed})")
        simulated = self.cmd_simulate(ppp, sbr, seed, cell)
        detected = self.cmd_detect(simulated['cube'], cell)
        reconstructed = self.cmd_reconstruct(detected['surfaces'], cell)
        evaluated = self.cmd_evaluate(reconstructed['cloud'], simulated['truth'], None, cell)
        return {'index': index, 'ppp': ppp, 'sbr': sbr, 'seed': seed,
                **simulated, **detected, **reconstructed, **evaluated}

    def run_pipeline(self, threads: Optional[int] = None) -> List[Dict[str, object]]:
        """
        Simulation, détection, reconstruction et évaluation sur chaque cellule

        Les cellules sont indépendantes; elles tournent dans un pool de threads
        dimensionné par la variable d'environnement SPLIDAR_THREADS.
        """
        cells = self.config.simulation.grid()
        grid = len(cells) > 1
        if threads is None:
            threads = int(os.environ.get(THREADS_ENV_VAR, "1") or 1)
        threads = max(1, min(threads, len(cells)))
        if threads == 1:
            return [self.run_cell(i, c['ppp'], c['sbr'], grid) for i, c in enumerate(cells)]
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(self.run_cell, i, c['ppp'], c['sbr'], grid) for i, c in enumerate(cells)]
            return [future.result() for future in futures]


# Export
__all__ = ['LidarSystem', 'PipelineConfig', 'StageError', 'stage']
