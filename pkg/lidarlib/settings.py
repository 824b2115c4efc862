"""Modèles de configuration (pydantic) du pipeline"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import (
    DEFAULT_BIN_WIDTH,
    DEFAULT_GAMMA,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_MAX_SURFACES,
    DEFAULT_PFA,
    DEFAULT_RHO,
    DEFAULT_TAUS,
    DEFAULT_XI,
    GAMMA_CLIP_ITERATIONS,
    RUNS_DIR,
    SIMULATION_KERNEL_SIZES,
    SIMULATION_KERNEL_WEIGHTS,
)
from .models import KernelSet
from .utils import stable_hash


class KernelConfig(BaseModel):
    sizes: List[int] = Field(default_factory=lambda: list(SIMULATION_KERNEL_SIZES))
    weights: List[float] = Field(default_factory=lambda: list(SIMULATION_KERNEL_WEIGHTS))

    @model_validator(mode='after')
    def _check(self) -> "KernelConfig":
        # Délègue aux invariants de KernelSet (impair, croissant, Σλ = 1)
        self.to_kernel_set()
        return self

    def to_kernel_set(self) -> KernelSet:
        return KernelSet(tuple(self.sizes), tuple(self.weights))


class DetectionConfig(BaseModel):
    pfa: float = DEFAULT_PFA
    max_surfaces: int = Field(DEFAULT_MAX_SURFACES, ge=1)
    clip_iterations: int = Field(GAMMA_CLIP_ITERATIONS, ge=0)

    @field_validator('pfa')
    @classmethod
    def _check_pfa(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"❌ pfa doit être dans ]0, 1[: {value}")
        return value


class CdaConfig(BaseModel):
    """Paramètres de la descente par coordonnées: ρ, γ, ξ, I_max"""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    rho: float = Field(DEFAULT_RHO, gt=0)
    gamma: float = Field(DEFAULT_GAMMA, ge=0)
    xi: float = Field(DEFAULT_XI, gt=0)
    i_max: int = Field(DEFAULT_MAX_ITERATIONS, ge=1)


class SimulationConfig(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    rows: int = Field(64, ge=1)
    cols: int = Field(64, ge=1)
    bins: int = Field(128, ge=8)
    wavelengths: int = Field(1, ge=1)
    classes: int = Field(1, ge=1)
    surfaces: int = Field(2, ge=1, le=2)
    ppp: float = Field(64.0, gt=0)
    sbr: float = 1.0
    background: str = "uniform"
    seed: int = 0
    ppp_grid: Optional[List[float]] = None
    sbr_grid: Optional[List[float]] = None

    @field_validator('sbr')
    @classmethod
    def _check_sbr(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"❌ sbr doit être > 0 (ou inf): {value}")
        return value

    @field_validator('background')
    @classmethod
    def _check_background(cls, value: str) -> str:
        if value not in ("uniform", "obscurant"):
            raise ValueError(f"❌ Fond inconnu: {value} (uniform | obscurant)")
        return value

    @field_validator('ppp_grid', 'sbr_grid')
    @classmethod
    def _check_grid(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and (not value or any(not (v > 0) for v in value)):
            raise ValueError(f"❌ Grille invalide: {value}")
        return value

    def grid(self) -> List[Dict[str, float]]:
        """Cellules PPP x SBR (une seule cellule hors mode grille)"""
        ppps = self.ppp_grid or [self.ppp]
        sbrs = self.sbr_grid or [self.sbr]
        return [{'ppp': p, 'sbr': s} for p in ppps for s in sbrs]


class PipelineConfig(BaseModel):
    """Configuration complète, validée avant toute étape"""
    kernels: KernelConfig = Field(default_factory=KernelConfig)
    detection: DetectionConfig = Field(default_factory=DetectionConfig)
    cda: CdaConfig = Field(default_factory=CdaConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    irf_sigma: float = Field(1.0, gt=0)
    bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0)
    library_path: Optional[str] = None
    output_dir: str = str(RUNS_DIR)
    taus: List[float] = Field(default_factory=lambda: list(DEFAULT_TAUS))

    @field_validator('taus')
    @classmethod
    def _check_taus(cls, value: List[float]) -> List[float]:
        if not value or any(t < 0 for t in value):
            raise ValueError(f"❌ Les distances τ doivent être ≥ 0: {value}")
        return sorted(set(value))

    @model_validator(mode='after')
    def _check_kernels_fit(self) -> "PipelineConfig":
        largest = max(self.kernels.sizes)
        side = min(self.simulation.rows, self.simulation.cols)
        if largest > side:
            raise ValueError(f"❌ Noyau {largest} plus grand que l'image ({side})")
        if len(self.kernels.sizes) < 2:
            raise ValueError("❌ La reconstruction exige au moins 2 échelles")
        return self

    def config_hash(self) -> str:
        return stable_hash(self.model_dump(mode='json'))


def _coerce(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """
    Applique des surcharges 'section.cle=valeur' sur un dictionnaire de config

    Args:
        data: Configuration brute
        overrides: Liste de 'a.b=valeur' (valeur lue en JSON si possible)

    Returns:
        Nouveau dictionnaire
    """
    merged = json.loads(json.dumps(data))
    for item in overrides:
        if '=' not in item:
            raise ValueError(f"❌ Surcharge invalide (attendu cle=valeur): {item}")
        key, raw = item.split('=', 1)
        parts = key.strip().split('.')
        node = merged
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"❌ Clé non imbriquable: {key}")
        node[parts[-1]] = _coerce(raw.strip())
    return merged


def _deep_update(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_pipeline_config(path: Optional[Path] = None, overrides: Optional[List[str]] = None) -> PipelineConfig:
    """Fusionne le fichier JSON (s'il existe) avec les valeurs par défaut, puis les surcharges"""
    data = PipelineConfig().model_dump(mode='json')
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"❌ Fichier de configuration introuvable: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            _deep_update(data, json.load(f))
    if overrides:
        data = apply_overrides(data, overrides)
    return PipelineConfig.model_validate(data)


def save_pipeline_config(config: PipelineConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(config.model_dump(mode='json'), f, indent=2, ensure_ascii=False)
    return path
