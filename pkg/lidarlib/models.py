"""Modèles de données du pipeline LiDAR mono-photon"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gammaln, xlogy

from .config import (
    DEFAULT_BIN_WIDTH,
    REAL_DATA_KERNEL_SIZES,
    REAL_DATA_KERNEL_WEIGHTS,
    SIMULATION_KERNEL_SIZES,
    SIMULATION_KERNEL_WEIGHTS,
)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# Données brutes et simulation

@dataclass(frozen=True)
class HistogramCube:
    """Cube 4D de comptages de photons (ligne, colonne, longueur d'onde, bin)"""
    counts: np.ndarray
    bin_width: float = DEFAULT_BIN_WIDTH

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 4:
            raise ValueError(f"❌ Le cube doit être 4D (lignes, colonnes, L, T), reçu: {counts.shape}")
        if min(counts.shape) < 1:
            raise ValueError(f"❌ Dimensions de cube invalides: {counts.shape}")
        if counts.dtype.kind == 'f' and not np.all(np.mod(counts, 1) == 0):
            raise ValueError("❌ Les comptages doivent être entiers")
        if (counts < 0).any():
            raise ValueError("❌ Les comptages doivent être positifs ou nuls")
        if self.bin_width <= 0:
            raise ValueError(f"❌ Largeur de bin invalide: {self.bin_width}")
        object.__setattr__(self, 'counts', _frozen(np.array(counts, dtype=np.uint32)))

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return tuple(self.counts.shape)

    @property
    def rows(self) -> int:
        return self.counts.shape[0]

    @property
    def cols(self) -> int:
        return self.counts.shape[1]

    @property
    def wavelengths(self) -> int:
        return self.counts.shape[2]

    @property
    def bins(self) -> int:
        return self.counts.shape[3]

    @property
    def total(self) -> int:
        return int(self.counts.sum(dtype=np.uint64))

    def pixel_totals(self) -> np.ndarray:
        """Nombre de photons par pixel (lignes, colonnes)"""
        return self.counts.sum(axis=(2, 3), dtype=np.uint64)


@dataclass(frozen=True)
class Irf:
    """
    Réponse impulsionnelle normalisée, une ligne par longueur d'onde.

    response[l, j] est la réponse au décalage j - offset bins.
    """
    response: np.ndarray
    offset: int = -1

    def __post_init__(self):
        response = np.array(self.response, dtype=float)
        if response.ndim == 1:
            response = response[None, :]
        if response.ndim != 2 or response.shape[1] < 1:
            raise ValueError(f"❌ IRF invalide: {response.shape}")
        if (response < 0).any():
            raise ValueError("❌ L'IRF doit être positive ou nulle")
        sums = response.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError(f"❌ Chaque IRF doit sommer à 1 (sommes: {sums})")
        offset = self.offset
        if offset < 0:
            offset = int(np.argmax(response.sum(axis=0)))
        if offset >= response.shape[1]:
            raise ValueError(f"❌ Décalage d'IRF hors fenêtre: {offset}")
        object.__setattr__(self, 'response', _frozen(response))
        object.__setattr__(self, 'offset', offset)

    @property
    def wavelengths(self) -> int:
        return self.response.shape[0]

    @property
    def length(self) -> int:
        return self.response.shape[1]

    @property
    def fwhm_bins(self) -> int:
        """Largeur à mi-hauteur (en bins), maximum sur les longueurs d'onde"""
        peaks = self.response.max(axis=1, keepdims=True)
        return int(max(1, (self.response >= peaks / 2.0).sum(axis=1).max()))

    def support(self, depth: int, bins: int) -> Tuple[np.ndarray, np.ndarray]:
        """Bins couverts par l'IRF centrée en depth et masque de validité dans [0, bins)"""
        positions = depth - self.offset + np.arange(self.length)
        return positions, (positions >= 0) & (positions < bins)

    @classmethod
    def delta(cls, wavelengths: int = 1) -> "Irf":
        return cls(np.ones((wavelengths, 1)), offset=0)

    @classmethod
    def gaussian(cls, wavelengths: int = 1, sigma: float = 1.0, half_width: Optional[int] = None) -> "Irf":
        """IRF gaussienne discrète, tronquée à ±half_width bins (par défaut 3 sigma)"""
        if sigma <= 0:
            raise ValueError(f"❌ Écart-type d'IRF invalide: {sigma}")
        if half_width is None:
            half_width = max(1, int(np.ceil(3.0 * sigma)))
        offsets = np.arange(-half_width, half_width + 1)
        row = np.exp(-0.5 * (offsets / sigma) ** 2)
        row /= row.sum()
        return cls(np.tile(row, (wavelengths, 1)), offset=half_width)

    @classmethod
    def triangular(cls, wavelengths: int = 1, half_width: int = 2) -> "Irf":
        offsets = np.arange(-half_width, half_width + 1)
        row = (half_width + 1 - np.abs(offsets)).astype(float)
        row /= row.sum()
        return cls(np.tile(row, (wavelengths, 1)), offset=half_width)


@dataclass(frozen=True)
class GroundTruthScene:
    """
    Scène de vérité terrain: jusqu'à K_s surfaces par pixel.

    Les surfaces présentes occupent les premiers emplacements, triées par
    profondeur croissante; les emplacements vides ont depth = label = -1.
    """
    depths: np.ndarray         # (lignes, colonnes, K_s) bins
    reflectivity: np.ndarray   # (lignes, colonnes, K_s, L)
    labels: np.ndarray         # (lignes, colonnes, K_s) classes 0..K-1
    bins: int

    def __post_init__(self):
        depths = np.array(self.depths, dtype=np.int64)
        reflectivity = np.array(self.reflectivity, dtype=float)
        labels = np.array(self.labels, dtype=np.int64)
        if depths.ndim != 3 or reflectivity.ndim != 4 or reflectivity.shape[:3] != depths.shape:
            raise ValueError(f"❌ Dimensions de scène incohérentes: {depths.shape} / {reflectivity.shape}")
        if labels.shape != depths.shape:
            raise ValueError("❌ Les labels doivent avoir la forme des profondeurs")
        if (reflectivity < 0).any():
            raise ValueError("❌ Réflectivités négatives dans la scène")
        present = depths >= 0
        if np.any(depths[present] >= self.bins):
            raise ValueError(f"❌ Profondeurs hors de [0, {self.bins})")
        # Emplacements présents d'abord, profondeurs strictement croissantes
        if np.any(~present[..., :-1] & present[..., 1:]):
            raise ValueError("❌ Les surfaces présentes doivent occuper les premiers emplacements")
        both = present[..., :-1] & present[..., 1:]
        if np.any(both & (np.diff(depths, axis=-1) <= 0)):
            raise ValueError("❌ Profondeurs non strictement croissantes dans un pixel")
        object.__setattr__(self, 'depths', _frozen(depths))
        object.__setattr__(self, 'reflectivity', _frozen(reflectivity))
        object.__setattr__(self, 'labels', _frozen(labels))

    @property
    def rows(self) -> int:
        return self.depths.shape[0]

    @property
    def cols(self) -> int:
        return self.depths.shape[1]

    @property
    def max_surfaces(self) -> int:
        return self.depths.shape[2]

    @property
    def wavelengths(self) -> int:
        return self.reflectivity.shape[3]

    @property
    def present(self) -> np.ndarray:
        return self.depths >= 0

    @property
    def surface_count(self) -> int:
        return int(self.present.sum())


@dataclass(frozen=True)
class BackgroundSpec:
    """
    Forme du fond: uniforme, ou séparable b(n, t) ∝ u_n · v_t.

    level est le nombre moyen de photons de fond par voxel.
    """
    shape: str = "uniform"
    level: float = 1.0
    spatial: Optional[np.ndarray] = None
    temporal: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.shape not in ("uniform", "separable"):
            raise ValueError(f"❌ Forme de fond inconnue: {self.shape}")
        if self.level < 0:
            raise ValueError(f"❌ Niveau de fond négatif: {self.level}")
        if self.shape == "separable":
            if self.spatial is None or self.temporal is None:
                raise ValueError("❌ Un fond séparable exige des profils spatial et temporel")
            spatial = np.array(self.spatial, dtype=float)
            temporal = np.array(self.temporal, dtype=float)
            if (spatial < 0).any() or (temporal < 0).any():
                raise ValueError("❌ Profils de fond négatifs")
            if spatial.sum() <= 0 or temporal.sum() <= 0:
                raise ValueError("❌ Profils de fond nuls")
            object.__setattr__(self, 'spatial', _frozen(spatial))
            object.__setattr__(self, 'temporal', _frozen(temporal))

    def field(self, rows: int, cols: int, wavelengths: int, bins: int) -> np.ndarray:
        """Champ de fond (lignes, colonnes, L, T) de moyenne level par voxel"""
        if self.shape == "uniform":
            return np.full((rows, cols, wavelengths, bins), float(self.level))
        if self.spatial.shape != (rows, cols) or self.temporal.shape != (bins,):
            raise ValueError(
                f"❌ Profils de fond incompatibles: {self.spatial.shape}/{self.temporal.shape} "
                f"pour {(rows, cols, bins)}"
            )
        spatial = self.spatial / self.spatial.mean()
        temporal = self.temporal / self.temporal.mean()
        field_ = spatial[:, :, None, None] * temporal[None, None, None, :]
        return np.broadcast_to(field_ * self.level, (rows, cols, wavelengths, bins)).copy()

    @classmethod
    def uniform(cls, level: float = 1.0) -> "BackgroundSpec":
        return cls("uniform", level)

    @classmethod
    def separable(cls, spatial: np.ndarray, temporal: np.ndarray, level: float = 1.0) -> "BackgroundSpec":
        return cls("separable", level, spatial, temporal)

    @classmethod
    def obscurant(cls, rows: int, cols: int, bins: int, level: float = 1.0,
                  decay: float = 0.02, tilt: float = 0.5) -> "BackgroundSpec":
        """Rétrodiffusion d'obscurant: décroissance exponentielle en t, gradient spatial lisse"""
        temporal = np.exp(-decay * np.arange(bins))
        yy, xx = np.meshgrid(np.linspace(0, 1, rows), np.linspace(0, 1, cols), indexing='ij')
        spatial = 1.0 + tilt * (0.5 * yy + 0.5 * xx)
        return cls.separable(spatial, temporal, level)


# Multi-échelle et détection

@dataclass(frozen=True)
class KernelSet:
    """Tailles de noyaux uniformes (impaires, croissantes) et poids λ_q"""
    sizes: Tuple[int, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        weights = tuple(float(w) for w in self.weights)
        if not sizes or len(sizes) != len(weights):
            raise ValueError(f"❌ Tailles et poids incohérents: {sizes} / {weights}")
        if any(s < 1 or s % 2 == 0 for s in sizes):
            raise ValueError(f"❌ Les tailles de noyau doivent être impaires et ≥ 1: {sizes}")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"❌ Les tailles de noyau doivent être strictement croissantes: {sizes}")
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"❌ Les poids λ doivent être positifs et sommer à 1: {weights}")
        object.__setattr__(self, 'sizes', sizes)
        object.__setattr__(self, 'weights', weights)

    @property
    def scales(self) -> int:
        return len(self.sizes)

    @classmethod
    def uniform_weights(cls, sizes) -> "KernelSet":
        sizes = tuple(sizes)
        return cls(sizes, tuple([1.0 / len(sizes)] * len(sizes)))

    @classmethod
    def simulation_default(cls) -> "KernelSet":
        return cls(SIMULATION_KERNEL_SIZES, SIMULATION_KERNEL_WEIGHTS)

    @classmethod
    def real_data_default(cls) -> "KernelSet":
        return cls(REAL_DATA_KERNEL_SIZES, REAL_DATA_KERNEL_WEIGHTS)


@dataclass(frozen=True)
class MultiscaleStack:
    """Cubes filtrés Y^q, un par échelle, de mêmes dimensions que l'entrée"""
    scales: Tuple[np.ndarray, ...]
    kernels: KernelSet
    bin_width: float = DEFAULT_BIN_WIDTH

    @property
    def count(self) -> int:
        return len(self.scales)

    @property
    def coarsest(self) -> np.ndarray:
        return self.scales[-1]

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return tuple(self.scales[0].shape)


@dataclass(frozen=True)
class BackgroundEstimate:
    """Fond estimé b̂ et ses formes temporelle, spatiale et moyenne"""
    b_hat: np.ndarray            # (lignes, colonnes, L, T)
    temporal_shape: np.ndarray   # b̄ (L, T)
    spatial_shape: np.ndarray    # b̲ (lignes, colonnes, L)
    grand_mean: np.ndarray       # b̿ (L,)
    pixel_set: np.ndarray        # Π_{l,t}: indices (aplatis) des pixels retenus, (|Π|, L, T)


@dataclass(frozen=True)
class SaliencyMatrix:
    """Saillance s(n, t) ≥ 0, rangée en (lignes, colonnes, T)"""
    values: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """Vue N x T"""
        rows, cols, bins = self.values.shape
        return self.values.reshape(rows * cols, bins)


@dataclass(frozen=True)
class GammaFit:
    """Loi gamma (forme α_b, échelle β_b) du carré de la saillance de fond"""
    shape: float
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.shape) and np.isfinite(self.scale)) or self.shape <= 0 or self.scale <= 0:
            raise ValueError(f"❌ Paramètres gamma invalides: α={self.shape}, β={self.scale}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale ** 2


@dataclass(frozen=True)
class DetectionMap:
    """Carte binaire 3D M (lignes, colonnes, T)"""
    mask: np.ndarray

    @property
    def kept_voxels(self) -> int:
        return int(self.mask.sum())

    @property
    def kept_fraction(self) -> float:
        return self.kept_voxels / self.mask.size


@dataclass(frozen=True)
class DetectionResult:
    """Résultat de l'étape de détection: saillance, loi du fond, seuil et carte"""
    saliency: SaliencyMatrix
    fit: Optional[GammaFit]
    threshold: float
    detection_map: DetectionMap

    @property
    def reduction_ratio(self) -> float:
        """Fraction de voxels conservés"""
        return self.detection_map.kept_fraction


@dataclass
class Surface:
    """Pic détecté d'un pixel et son histogramme propre (sans fond)"""
    row: int
    col: int
    slot: int
    present: bool = False
    run: Tuple[int, int] = (-1, -1)        # bins [début, fin) du pic détecté
    energy: float = 0.0
    window_start: int = 0
    clean: Optional[np.ndarray] = None     # (Q, L, W) histogrammes propres par échelle
    depth_global: int = -1                 # d^G
    depth_scales: Optional[np.ndarray] = None  # d^q pour chaque échelle
    selected_scale: int = -1               # q̄ (indice 0-based, ≥ 1)
    depth: int = -1                        # d_s = d^{q̄}
    hist: Optional[np.ndarray] = None      # (L, longueur IRF) à l'échelle q̄ autour de depth


@dataclass
class SurfaceSet:
    """Ensemble de N x K_s surfaces, rangées ligne, colonne puis emplacement"""
    rows: int
    cols: int
    max_surfaces: int
    bins: int
    irf: Irf
    surfaces: List[Surface] = field(default_factory=list)
    bin_width: float = DEFAULT_BIN_WIDTH

    def index(self, row: int, col: int, slot: int) -> int:
        return (row * self.cols + col) * self.max_surfaces + slot

    def __len__(self) -> int:
        return len(self.surfaces)

    @property
    def present(self) -> np.ndarray:
        return np.array([s.present for s in self.surfaces], dtype=bool)

    @property
    def n_present(self) -> int:
        return int(self.present.sum())

    @property
    def depths(self) -> np.ndarray:
        return np.array([s.depth for s in self.surfaces], dtype=np.int64)

    def totals(self) -> np.ndarray:
        """ȳ_{s,l} = Σ_t y_{s,l,t} (zéro pour les surfaces absentes)"""
        out = np.zeros((len(self.surfaces), self.irf.wavelengths))
        for i, surface in enumerate(self.surfaces):
            if surface.present and surface.hist is not None:
                out[i] = surface.hist.sum(axis=1)
        return out

    def likelihood_constants(self) -> np.ndarray:
        """Σ_l Σ_t [y log g(t - d) - log Γ(y + 1)] par surface"""
        out = np.zeros(len(self.surfaces))
        g = self.irf.response
        for i, surface in enumerate(self.surfaces):
            if surface.present and surface.hist is not None:
                y = surface.hist
                out[i] = float(np.sum(xlogy(y, g) - gammaln(y + 1.0)))
        return out

    @classmethod
    def empty(cls, rows: int, cols: int, max_surfaces: int, bins: int, irf: Irf) -> "SurfaceSet":
        surfaces = [
            Surface(row=r, col=c, slot=k)
            for r in range(rows) for c in range(cols) for k in range(max_surfaces)
        ]
        return cls(rows, cols, max_surfaces, bins, irf, surfaces)

    @classmethod
    def from_histograms(cls, hists: np.ndarray, depths: np.ndarray, bins: int, irf: Irf) -> "SurfaceSet":
        """
        Construit un ensemble à partir d'histogrammes propres déjà alignés sur l'IRF

        Args:
            hists: (lignes, colonnes, K_s, L, longueur IRF)
            depths: (lignes, colonnes, K_s), -1 pour une surface absente
            bins: Nombre de bins T
            irf: IRF du système
        """
        rows, cols, max_surfaces = depths.shape
        surface_set = cls.empty(rows, cols, max_surfaces, bins, irf)
        for surface in surface_set.surfaces:
            d = int(depths[surface.row, surface.col, surface.slot])
            if d < 0:
                continue
            hist = np.array(hists[surface.row, surface.col, surface.slot], dtype=float)
            _, valid = irf.support(d, bins)
            hist[:, ~valid] = 0.0
            hist[irf.response == 0] = 0.0
            surface.present = True
            surface.depth = surface.depth_global = d
            surface.selected_scale = 1
            surface.hist = hist
            surface.energy = float(hist.sum())
        return surface_set


@dataclass(frozen=True)
class SurfaceGraph:
    """
    Graphe du gamma-MRF: réseau h aux centres des pixels, réseau w aux sites duaux.

    Les tableaux de voisins sont complétés par -1.
    """
    rows: int
    cols: int
    max_surfaces: int
    present: np.ndarray          # (N_s,)
    h_to_w: np.ndarray           # (N_s, 4 K_s) sites duaux de chaque h
    w_to_h: np.ndarray           # (N_w, 4 K_s) surfaces de chaque site dual
    label_neighbors: np.ndarray  # (N_s, 4 K_s) voisins de Potts (surfaces présentes)
    rho: float

    @property
    def n_surfaces(self) -> int:
        return self.h_to_w.shape[0]

    @property
    def n_dual(self) -> int:
        return self.w_to_h.shape[0]

    def h_weights(self) -> np.ndarray:
        """c_{s,s'} sur les arêtes h -> w"""
        return ((self.h_to_w >= 0) & self.present[:, None]).astype(float)

    def w_weights(self) -> np.ndarray:
        """c_{s,s'} sur les arêtes w -> h"""
        valid = self.w_to_h >= 0
        present = np.zeros_like(valid)
        present[valid] = self.present[self.w_to_h[valid]]
        return present.astype(float)

    def dual_neighbors(self, s: int) -> List[int]:
        return [int(j) for j in self.h_to_w[s] if j >= 0]

    def neighbors(self, s: int) -> List[int]:
        return [int(j) for j in self.label_neighbors[s] if j >= 0]

    def is_symmetric(self) -> bool:
        """s' ∈ η(s) ⟺ s ∈ η(s'), pour les voisins de Potts et le biparti h/w"""
        for s in range(self.n_surfaces):
            for t in self.neighbors(s):
                if s not in self.neighbors(t):
                    return False
            for j in self.dual_neighbors(s):
                if s not in self.w_to_h[j]:
                    return False
        for j in range(self.n_dual):
            for s in self.w_to_h[j]:
                if s >= 0 and j not in self.h_to_w[s]:
                    return False
        return True


# Inférence bayésienne

@dataclass(frozen=True)
class SpectralLibrary:
    """K signatures spectrales connues et hyperparamètres gamma / inverse-gamma"""
    signatures: np.ndarray  # m (K, L)
    alpha: np.ndarray       # α (K, L)
    nu: np.ndarray          # ν (K, L)
    eps: np.ndarray         # ε (K, L)
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        signatures = np.atleast_2d(np.array(self.signatures, dtype=float))
        shape = signatures.shape
        arrays = {}
        for name in ('alpha', 'nu', 'eps'):
            value = np.array(getattr(self, name), dtype=float)
            try:
                arrays[name] = np.broadcast_to(value, shape).copy()
            except ValueError:
                raise ValueError(f"❌ {name} incompatible avec les signatures {shape}")
        if shape[0] < 1:
            raise ValueError("❌ La bibliothèque doit contenir au moins une classe")
        for name, value in [('signatures', signatures)] + list(arrays.items()):
            if not np.all(value > 0):
                raise ValueError(f"❌ {name} doit être strictement positif")
        if np.any(arrays['alpha'] < 1):
            raise ValueError("❌ α doit être ≥ 1 pour que le mode de r soit positif")
        names = tuple(self.names) or tuple(f"classe_{k + 1}" for k in range(shape[0]))
        if len(names) != shape[0]:
            raise ValueError("❌ Nombre de noms de classes incohérent")
        object.__setattr__(self, 'signatures', _frozen(signatures))
        for name, value in arrays.items():
            object.__setattr__(self, name, _frozen(value))
        object.__setattr__(self, 'names', names)

    @property
    def classes(self) -> int:
        return self.signatures.shape[0]

    @property
    def wavelengths(self) -> int:
        return self.signatures.shape[1]

    @property
    def beta_prior_mode(self) -> np.ndarray:
        """Mode de IG(ν, ε): ε / (ν + 1)"""
        return self.eps / (self.nu + 1.0)

    @classmethod
    def from_signatures(cls, signatures, alpha: float = 100.0, nu: float = 3.0, names=()) -> "SpectralLibrary":
        """ε choisi pour que le mode a priori de β soit m / α (α β = m)"""
        signatures = np.atleast_2d(np.array(signatures, dtype=float))
        alpha_arr = np.broadcast_to(np.array(alpha, dtype=float), signatures.shape)
        nu_arr = np.broadcast_to(np.array(nu, dtype=float), signatures.shape)
        eps = signatures * (nu_arr + 1.0) / alpha_arr
        return cls(signatures, alpha_arr, nu_arr, eps, tuple(names))


@dataclass
class ModelState:
    """Inconnues Θ = (r, β, d, u, h, w) sur l'ensemble des surfaces"""
    reflectivity: np.ndarray  # r (N_s, L)
    beta: np.ndarray          # β (N_s, K, L)
    labels: np.ndarray        # u (N_s,) classes 0..K-1
    depth: np.ndarray         # d (N_s,) figé après initialisation
    gain: np.ndarray          # h (N_s,)
    aux: np.ndarray           # w (N_w,)
    present: np.ndarray       # (N_s,)
    y_bar: np.ndarray         # ȳ_{s,l}
    y_bbar: np.ndarray        # ȳ̄_s
    degenerate: np.ndarray    # (N_s,) gains dégénérés

    def copy(self) -> "ModelState":
        return ModelState(**{name: np.array(value) for name, value in self.__dict__.items()})

    @property
    def intensity(self) -> np.ndarray:
        """I_{s,l} = h_s r_{s,l}"""
        return self.gain[:, None] * self.reflectivity


@dataclass(frozen=True)
class TraceRow:
    """Une ligne de la trace de convergence"""
    sweep: int
    rms_reflectivity: float
    rms_beta: float
    rms_gain: float
    rms_aux: float
    label_change_rate: float
    log_posterior: float


@dataclass
class CdaTrace:
    """Trace de l'algorithme de descente par coordonnées"""
    rows: List[TraceRow] = field(default_factory=list)
    converged: bool = False

    @property
    def sweeps(self) -> int:
        return len(self.rows)

    @property
    def log_posteriors(self) -> np.ndarray:
        return np.array([row.log_posterior for row in self.rows])


# Évaluation

@dataclass(frozen=True)
class PointCloud:
    """Nuage de points: pixel, profondeur (bins), intensités par longueur d'onde, classe"""
    rows: np.ndarray
    cols: np.ndarray
    depth: np.ndarray
    intensity: np.ndarray
    labels: Optional[np.ndarray] = None
    gain: Optional[np.ndarray] = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        depth = np.asarray(self.depth, dtype=float).reshape(-1)
        intensity = np.asarray(self.intensity, dtype=float)
        if intensity.ndim == 1:
            intensity = intensity.reshape(-1, 1) if depth.size else intensity.reshape(0, 1)
        n = depth.size
        if rows.size != n or cols.size != n or intensity.shape[0] != n:
            raise ValueError("❌ Champs du nuage de points de tailles incohérentes")
        if (intensity < 0).any():
            raise ValueError("❌ Intensités négatives dans le nuage de points")
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'cols', cols)
        object.__setattr__(self, 'depth', depth)
        object.__setattr__(self, 'intensity', intensity)
        if self.labels is not None:
            object.__setattr__(self, 'labels', np.asarray(self.labels, dtype=np.int64).reshape(-1))
        if self.gain is not None:
            object.__setattr__(self, 'gain', np.asarray(self.gain, dtype=float).reshape(-1))

    def __len__(self) -> int:
        return self.depth.size

    @property
    def wavelengths(self) -> int:
        return self.intensity.shape[1]


@dataclass(frozen=True)
class Matching:
    """Appariement un-à-un estimé / vérité terrain"""
    pairs: np.ndarray          # (M, 2) indices (estimé, vérité)
    unmatched_est: np.ndarray
    unmatched_gt: np.ndarray


@dataclass(frozen=True)
class EvalReport:
    """Critères F_true, F_false, IAE, DAE et précision de classification à la distance τ"""
    tau: float
    f_true: float
    f_false: int
    iae: float
    dae: float
    accuracy: Optional[float]
    n_gt: int
    n_est: int
    n_matched: int

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {
            'tau': self.tau,
            'f_true': self.f_true,
            'f_false': self.f_false,
            'iae': self.iae,
            'dae': self.dae,
            'accuracy': self.accuracy,
            'n_gt': self.n_gt,
            'n_est': self.n_est,
            'n_matched': self.n_matched,
        }
