"""Stockage des cartes de détection (RLE binaire) et des ensembles de surfaces"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .config import MAP_MAGIC, MAP_VERSION, RUNS_DIR
from .errors import CubeFormatError
from .models import DetectionMap, Irf, SurfaceSet
from .surfaces import find_runs


logger = logging.getLogger(__name__)

# magic, version, lignes, colonnes, T, nombre total de plages
MAP_HEADER = struct.Struct('<4sHIIIQ')

PathLike = Union[str, Path]


class MapManager:
    """
    Gère les artefacts de l'étape de détection

    Format RLE: en-tête MAP_HEADER puis, pour chaque pixel en ordre ligne par
    ligne, un uint32 (nombre de plages) suivi de paires uint32 (début, longueur).
    """

    def __init__(self, output_dir: Path = RUNS_DIR):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _resolve(self, path: PathLike) -> Path:
        path = Path(path)
        return path if path.is_absolute() or path.parent != Path('.') else self.output_dir / path

    def store_map(self, detection_map: DetectionMap, path: PathLike) -> Path:
        path = self._resolve(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows, cols, bins = detection_map.mask.shape
        chunks = []
        total = 0
        for r in range(rows):
            for c in range(cols):
                runs = find_runs(detection_map.mask[r, c])
                total += len(runs)
                record = [len(runs)] + [v for start, end in runs for v in (start, end - start)]
                chunks.append(np.array(record, dtype='<u4').tobytes())
        with open(path, 'wb') as f:
            f.write(MAP_HEADER.pack(MAP_MAGIC, MAP_VERSION, rows, cols, bins, total))
            f.write(b''.join(chunks))
        size = path.stat().st_size
        logger.info(
            f"  💾 Carte RLE écrite: {path.name} ({total} plages, {size} octets "
            f"pour {detection_map.mask.size} voxels)"
        )
        return path

    def load_map(self, path: PathLike) -> DetectionMap:
        path = self._resolve(path)
        if not path.exists():
            raise FileNotFoundError(f"❌ Carte introuvable: {path}")
        raw = path.read_bytes()
        if len(raw) < MAP_HEADER.size:
            raise CubeFormatError(f"❌ En-tête de carte tronqué: {path}")
        magic, version, rows, cols, bins, total = MAP_HEADER.unpack_from(raw)
        if magic != MAP_MAGIC or version != MAP_VERSION:
            raise CubeFormatError(f"❌ Signature de carte invalide ({magic!r}, v{version}): {path}")
        body = raw[MAP_HEADER.size:]
        if len(body) % 4:
            raise CubeFormatError(f"❌ Corps de carte mal aligné: {path}")
        words = np.frombuffer(body, dtype='<u4')
        expected = rows * cols + 2 * total
        if words.size != expected:
            raise CubeFormatError(f"❌ Carte incohérente: {words.size} mots, {expected} attendus")

        mask = np.zeros((rows, cols, bins), dtype=bool)
        cursor = 0
        for r in range(rows):
            for c in range(cols):
                count = int(words[cursor])
                pairs = words[cursor + 1:cursor + 1 + 2 * count].reshape(count, 2)
                cursor += 1 + 2 * count
                for start, length in pairs:
                    if start + length > bins:
                        raise CubeFormatError(f"❌ Plage hors cube au pixel ({r}, {c})")
                    mask[r, c, start:start + length] = True
        return DetectionMap(mask)

    def store_surfaces(self, surface_set: SurfaceSet, path: PathLike, config_hash: str = "") -> Path:
        """Archive .npz des surfaces (profondeurs, échelles, histogrammes propres, IRF)"""
        path = self._resolve(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        shape = (surface_set.rows, surface_set.cols, surface_set.max_surfaces)
        irf = surface_set.irf
        hists = np.zeros(shape + (irf.wavelengths, irf.length))
        depths = np.full(shape, -1, dtype=np.int64)
        depth_global = np.full(shape, -1, dtype=np.int64)
        scales = np.full(shape, -1, dtype=np.int64)
        energy = np.zeros(shape)
        for s in surface_set.surfaces:
            if s.present:
                hists[s.row, s.col, s.slot] = s.hist
                depths[s.row, s.col, s.slot] = s.depth
                depth_global[s.row, s.col, s.slot] = s.depth_global
                scales[s.row, s.col, s.slot] = s.selected_scale
                energy[s.row, s.col, s.slot] = s.energy
        with open(path, 'wb') as f:
            np.savez(
                f,
                hists=hists,
                depths=depths,
                depth_global=depth_global,
                selected_scale=scales,
                energy=energy,
                bins=np.int64(surface_set.bins),
                bin_width=np.float64(surface_set.bin_width),
                irf_response=irf.response,
                irf_offset=np.int64(irf.offset),
                config_hash=np.array(config_hash),
            )
        logger.info(f"  💾 {surface_set.n_present} surfaces archivées: {path.name}")
        return path

    def load_surfaces(self, path: PathLike) -> SurfaceSet:
        path = self._resolve(path)
        if not path.exists():
            raise FileNotFoundError(f"❌ Archive de surfaces introuvable: {path}")
        with np.load(path) as archive:
            try:
                irf = Irf(archive['irf_response'], int(archive['irf_offset']))
                surface_set = SurfaceSet.from_histograms(
                    archive['hists'], archive['depths'], int(archive['bins']), irf
                )
                depth_global = archive['depth_global']
                scales = archive['selected_scale']
                energy = archive['energy']
                if 'bin_width' in archive.files:
                    surface_set.bin_width = float(archive['bin_width'])
            except KeyError as e:
                raise CubeFormatError(f"❌ Archive de surfaces incomplète ({e}): {path}")
        for s in surface_set.surfaces:
            if s.present:
                s.depth_global = int(depth_global[s.row, s.col, s.slot])
                s.selected_scale = int(scales[s.row, s.col, s.slot])
                s.energy = float(energy[s.row, s.col, s.slot])
        return surface_set
