"""Lecture / écriture des cubes d'histogrammes et des scènes de vérité terrain"""

import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .config import CUBE_MAGIC, CUBE_VERSION, DATA_DIR, DEFAULT_BIN_WIDTH
from .errors import CubeFormatError
from .models import GroundTruthScene, HistogramCube
from .utils import format_count


logger = logging.getLogger(__name__)

# magic, version, lignes, colonnes, L, T, largeur de bin
HEADER = struct.Struct('<4sHIIIId')
SPARSE_SUFFIXES = ('.txt', '.events', '.tsv')

PathLike = Union[str, Path]


class CubeManager:
    """Gère le stockage des cubes (binaire ou événements creux) et des scènes"""

    def __init__(self, data_dir: Path = DATA_DIR):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def _resolve(self, path: PathLike) -> Path:
        path = Path(path)
        return path if path.is_absolute() or path.parent != Path('.') else self.data_dir / path

    def store_cube(self, cube: HistogramCube, path: PathLike) -> Path:
        """
        Sauvegarde un cube au format binaire (en-tête little-endian + comptages uint32)

        Args:
            cube: Cube à sauvegarder
            path: Fichier de destination

        Returns:
            Chemin du fichier écrit
        """
        path = self._resolve(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows, cols, wavelengths, bins = cube.dims
        header = HEADER.pack(CUBE_MAGIC, CUBE_VERSION, rows, cols, wavelengths, bins, float(cube.bin_width))
        tmp_path = path.with_suffix(path.suffix + '.tmp')
        with open(tmp_path, 'wb') as f:
            f.write(header)
            f.write(np.ascontiguousarray(cube.counts, dtype='<u4').tobytes())
        tmp_path.replace(path)
        logger.info(f"  💾 Cube {cube.dims} écrit: {path.name} ({format_count(cube.total)} photons)")
        return path

    def load_cube(self, path: PathLike, dims: Optional[tuple] = None) -> HistogramCube:
        """
        Charge un cube binaire, ou un fichier d'événements creux selon l'extension

        Args:
            path: Fichier à lire
            dims: Dimensions (lignes, colonnes, L, T) pour un fichier creux sans directive

        Returns:
            Cube chargé
        """
        path = self._resolve(path)
        if not path.exists():
            raise FileNotFoundError(f"❌ Cube introuvable: {path}")
        if path.suffix.lower() in SPARSE_SUFFIXES:
            return self.load_sparse(path, dims)

        with open(path, 'rb') as f:
            raw = f.read()
        if len(raw) < HEADER.size:
            raise CubeFormatError(f"❌ En-tête tronqué ({len(raw)} octets): {path}")
        magic, version, rows, cols, wavelengths, bins, bin_width = HEADER.unpack_from(raw)
        if magic != CUBE_MAGIC:
            raise CubeFormatError(f"❌ Signature invalide {magic!r}: {path}")
        if version != CUBE_VERSION:
            raise CubeFormatError(f"❌ Version de cube non supportée: {version}")
        if min(rows, cols, wavelengths, bins) < 1:
            raise CubeFormatError(f"❌ Dimensions déclarées invalides: {(rows, cols, wavelengths, bins)}")
        expected = rows * cols * wavelengths * bins * 4
        payload = raw[HEADER.size:]
        if len(payload) != expected:
            raise CubeFormatError(
                f"❌ Taille de données incohérente: {len(payload)} octets lus, {expected} attendus"
            )
        counts = np.frombuffer(payload, dtype='<u4').reshape(rows, cols, wavelengths, bins)
        cube = HistogramCube(counts, bin_width)
        logger.info(f"  📂 Cube {cube.dims} chargé: {path.name}")
        return cube

    def load_sparse(self, path: PathLike, dims: Optional[tuple] = None) -> HistogramCube:
        """
        Lit un fichier d'événements 'ligne colonne longueur_onde bin comptage'

        Les lignes '# dims R C L T' et '# bin_width x' fixent la géométrie;
        les autres commentaires sont ignorés. Les comptages d'un même voxel s'additionnent.
        """
        path = Path(path)
        bin_width = DEFAULT_BIN_WIDTH
        records = []
        with open(path, 'r', encoding='utf-8') as f:
            for lineno, line in enumerate(f, start=1):
                text = line.strip()
                if not text:
                    continue
                if text.startswith('#'):
                    words = text[1:].split()
                    if len(words) == 5 and words[0] == 'dims':
                        dims = tuple(int(w) for w in words[1:])
                    elif len(words) == 2 and words[0] == 'bin_width':
                        bin_width = float(words[1])
                    continue
                fields = text.split()
                if len(fields) != 5:
                    raise CubeFormatError(f"❌ Ligne {lineno}: 5 champs attendus, {len(fields)} lus")
                try:
                    record = [int(v) for v in fields]
                except ValueError:
                    raise CubeFormatError(f"❌ Ligne {lineno}: valeurs non entières: {text}")
                if min(record) < 0:
                    raise CubeFormatError(f"❌ Ligne {lineno}: valeur négative: {text}")
                records.append(record)

        events = np.array(records, dtype=np.int64).reshape(-1, 5)
        if dims is None:
            if not len(events):
                raise CubeFormatError(f"❌ Fichier vide sans directive '# dims': {path}")
            dims = tuple(int(v) + 1 for v in events[:, :4].max(axis=0))
        dims = tuple(int(v) for v in dims)
        if len(events) and np.any(events[:, :4] >= np.array(dims)):
            raise CubeFormatError(f"❌ Événement hors des dimensions {dims}: {path}")

        counts = np.zeros(dims, dtype=np.uint64)
        np.add.at(counts, tuple(events[:, i] for i in range(4)), events[:, 4].astype(np.uint64))
        if counts.max(initial=0) > np.iinfo(np.uint32).max:
            raise CubeFormatError("❌ Comptage accumulé hors de la plage uint32")
        cube = HistogramCube(counts, bin_width)
        logger.info(f"  📂 {len(events)} événements cumulés dans un cube {cube.dims}")
        return cube

    def store_sparse(self, cube: HistogramCube, path: PathLike) -> Path:
        """Écrit les voxels non nuls au format d'événements creux"""
        path = self._resolve(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        index = np.argwhere(cube.counts > 0)
        with open(path, 'w', encoding='utf-8') as f:
            f.write("# row col wavelength bin count\n")
            f.write("# dims " + " ".join(str(v) for v in cube.dims) + "\n")
            f.write(f"# bin_width {cube.bin_width!r}\n")
            for r, c, l, t in index:
                f.write(f"{r} {c} {l} {t} {cube.counts[r, c, l, t]}\n")
        return path

    def store_scene(self, scene: GroundTruthScene, path: PathLike, seed: Optional[int] = None,
                    config_hash: str = "") -> Path:
        """Archive .npz de la vérité terrain (graine et hash de config inclus)"""
        path = self._resolve(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as f:
            np.savez(
                f,
                depths=scene.depths,
                reflectivity=scene.reflectivity,
                labels=scene.labels,
                bins=np.int64(scene.bins),
                seed=np.int64(-1 if seed is None else seed),
                config_hash=np.array(config_hash),
            )
        logger.info(f"  💾 Vérité terrain écrite: {path.name} ({scene.surface_count} surfaces)")
        return path

    def load_scene(self, path: PathLike) -> GroundTruthScene:
        path = self._resolve(path)
        if not path.exists():
            raise FileNotFoundError(f"❌ Scène introuvable: {path}")
        with np.load(path) as archive:
            try:
                return GroundTruthScene(
                    depths=archive['depths'],
                    reflectivity=archive['reflectivity'],
                    labels=archive['labels'],
                    bins=int(archive['bins']),
                )
            except KeyError as e:
                raise CubeFormatError(f"❌ Archive de scène incomplète ({e}): {path}")


def load_cube(path: PathLike, dims: Optional[tuple] = None) -> HistogramCube:
    return CubeManager(Path(path).parent).load_cube(Path(path).resolve(), dims)


def store_cube(cube: HistogramCube, path: PathLike) -> Path:
    return CubeManager(Path(path).parent).store_cube(cube, Path(path).resolve())
