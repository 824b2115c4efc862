"""Configuration globale du pipeline LiDAR mono-photon"""

from pathlib import Path

# Répertoires de données (relatifs à la racine du projet)
# lidarlib/config.py -> parent = lidarlib/ -> parent.parent = racine du projet
PROJECT_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = PROJECT_ROOT / "data"
RUNS_DIR = DATA_DIR / "runs"

# Formats de fichiers
CUBE_MAGIC = b"SPLC"
CUBE_VERSION = 1
MAP_MAGIC = b"SPDM"
MAP_VERSION = 1

# Largeur d'un bin temporel (secondes) et vitesse de la lumière
DEFAULT_BIN_WIDTH = 2e-12
SPEED_OF_LIGHT = 299_792_458.0

# Noyaux multi-échelles (simulation / données réelles)
SIMULATION_KERNEL_SIZES = (1, 5, 7, 11)
SIMULATION_KERNEL_WEIGHTS = (0.25, 0.25, 0.25, 0.25)
REAL_DATA_KERNEL_SIZES = (1, 3, 7, 9)
REAL_DATA_KERNEL_WEIGHTS = (0.0, 1.0, 0.0, 0.0)

# Détection
DEFAULT_PFA = 1e-3
DEFAULT_MAX_SURFACES = 2
BACKGROUND_PIXEL_FRACTION = 0.10
GAMMA_MIN_SAMPLES = 30
GAMMA_CLIP_ITERATIONS = 20
# pfa de l'écrêtage: seuls les voxels bien au-delà du fond sont écartés de l'ajustement
GAMMA_CLIP_PFA = 1e-5
# Sous cette part de fond (photons de fond / photons), carte des maxima locaux
BACKGROUND_FREE_SHARE = 1e-3
PEAK_FRACTION = 0.9
THRESHOLD_TOLERANCE = 1e-10

# Inférence bayésienne (CDA)
DEFAULT_RHO = 1.25
DEFAULT_GAMMA = 4.0
DEFAULT_XI = 1e-4
DEFAULT_MAX_ITERATIONS = 100
DEFAULT_ALPHA = 100.0
DEFAULT_NU = 3.0

# Évaluation (distances en bins)
DEFAULT_TAUS = (0.0, 1.0, 2.0, 4.0, 8.0)

# Parallélisme de la grille PPP x SBR
THREADS_ENV_VAR = "SPLIDAR_THREADS"

# Logging
LOG_LEVEL = "INFO"
