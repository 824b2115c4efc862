"""Nuages de points, rapports d'évaluation et traces de convergence sur disque"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .config import DEFAULT_BIN_WIDTH, RUNS_DIR
from .models import CdaTrace, EvalReport, GroundTruthScene, ModelState, PointCloud, SurfaceSet
from .utils import bins_to_metres


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def cloud_from_state(state: ModelState, surfaces: SurfaceSet) -> PointCloud:
    """Points des surfaces présentes: intensité I = h r, classe u, gain h"""
    present = np.flatnonzero(state.present)
    rows = np.array([surfaces.surfaces[s].row for s in present], dtype=np.int64)
    cols = np.array([surfaces.surfaces[s].col for s in present], dtype=np.int64)
    return PointCloud(
        rows=rows,
        cols=cols,
        depth=state.depth[present].astype(float),
        intensity=state.intensity[present].reshape(len(present), state.reflectivity.shape[1]),
        labels=state.labels[present],
        gain=state.gain[present],
    )


def cloud_from_scene(scene: GroundTruthScene) -> PointCloud:
    rr, cc, kk = np.nonzero(scene.present)
    return PointCloud(
        rows=rr,
        cols=cc,
        depth=scene.depths[rr, cc, kk].astype(float),
        intensity=scene.reflectivity[rr, cc, kk].reshape(len(rr), scene.wavelengths),
        labels=scene.labels[rr, cc, kk],
    )


def _number(value: float) -> str:
    return repr(float(value))


class CloudManager:
    """Gère l'écriture des nuages de points (PLY ASCII + table CSV), rapports et traces"""

    def __init__(self, output_dir: Path = RUNS_DIR):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _resolve(self, path: PathLike) -> Path:
        path = Path(path)
        path = path if path.is_absolute() or path.parent != Path('.') else self.output_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def store_ply(self, cloud: PointCloud, path: PathLike, config_hash: str = "",
                  bin_width: float = DEFAULT_BIN_WIDTH) -> Path:
        """
        Écrit un nuage au format PLY ASCII

        Sommets: x (colonne), y (ligne), z (profondeur en bins), une intensité par
        longueur d'onde, classe (1..K, 0 si inconnue), gain h.
        """
        path = self._resolve(path)
        wavelengths = cloud.wavelengths
        lines = [
            "ply",
            "format ascii 1.0",
            f"comment config_hash {config_hash}",
            f"comment depth_unit bins bin_width {bin_width!r}",
            f"element vertex {len(cloud)}",
            "property float x",
            "property float y",
            "property float z",
        ]
        lines += [f"property float intensity_{l}" for l in range(wavelengths)]
        lines += ["property int class", "property float gain", "end_header"]
        for n in range(len(cloud)):
            label = int(cloud.labels[n]) + 1 if cloud.labels is not None else 0
            gain = float(cloud.gain[n]) if cloud.gain is not None else 0.0
            values = [str(int(cloud.cols[n])), str(int(cloud.rows[n])), _number(cloud.depth[n])]
            values += [_number(v) for v in cloud.intensity[n]]
            values += [str(label), _number(gain)]
            lines.append(" ".join(values))
        path.write_text("\n".join(lines) + "\n", encoding='utf-8')
        logger.info(f"  💾 Nuage PLY écrit: {path.name} ({len(cloud)} points)")
        return path

    def store_csv(self, cloud: PointCloud, path: PathLike, config_hash: str = "") -> Path:
        """Table plate: row, col, depth, intensity_*, label (1..K), gain"""
        path = self._resolve(path)
        wavelengths = cloud.wavelengths
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(f)
            writer.writerow(['row', 'col', 'depth'] + [f'intensity_{l}' for l in range(wavelengths)] + ['label', 'gain'])
            for n in range(len(cloud)):
                label = int(cloud.labels[n]) + 1 if cloud.labels is not None else 0
                gain = _number(cloud.gain[n]) if cloud.gain is not None else ''
                writer.writerow(
                    [int(cloud.rows[n]), int(cloud.cols[n]), _number(cloud.depth[n])]
                    + [_number(v) for v in cloud.intensity[n]]
                    + [label, gain]
                )
        logger.info(f"  💾 Table de points écrite: {path.name}")
        return path

    def load_csv(self, path: PathLike) -> PointCloud:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"❌ Nuage introuvable: {path}")
        with open(path, 'r', encoding='utf-8', newline='') as f:
            lines = [line for line in f if not line.startswith('#')]
        reader = csv.DictReader(lines)
        intensity_keys = sorted(
            (k for k in (reader.fieldnames or []) if k.startswith('intensity_')),
            key=lambda k: int(k.split('_')[1]),
        )
        if not intensity_keys or 'depth' not in (reader.fieldnames or []):
            raise ValueError(f"❌ Colonnes manquantes dans {path.name}")
        records = list(reader)
        labels = [int(r['label']) for r in records]
        has_labels = bool(records) and all(label > 0 for label in labels)
        has_gain = bool(records) and all(r.get('gain') for r in records)
        return PointCloud(
            rows=[int(r['row']) for r in records],
            cols=[int(r['col']) for r in records],
            depth=[float(r['depth']) for r in records],
            intensity=np.array([[float(r[k]) for k in intensity_keys] for r in records]).reshape(
                len(records), len(intensity_keys)
            ),
            labels=np.array(labels) - 1 if has_labels else None,
            gain=[float(r['gain']) for r in records] if has_gain else None,
        )

    def store_reports(self, reports: List[EvalReport], stem: PathLike, config_hash: str = "",
                      bin_width: float = DEFAULT_BIN_WIDTH) -> List[Path]:
        """Écrit les rapports (un par τ, triés) en CSV et en JSON"""
        reports = sorted(reports, key=lambda r: r.tau)
        csv_path = self._resolve(Path(str(stem) + '.csv'))
        json_path = self._resolve(Path(str(stem) + '.json'))
        columns = ['tau', 'tau_m', 'f_true', 'f_false', 'iae', 'dae', 'accuracy', 'n_gt', 'n_est', 'n_matched']
        with open(csv_path, 'w', encoding='utf-8', newline='') as f:
            f.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(f)
            writer.writerow(columns)
            for report in reports:
                row = report.to_dict()
                row['tau_m'] = bins_to_metres(report.tau, bin_width)
                writer.writerow(['' if row[c] is None else row[c] for c in columns])

        def clean(value):
            return None if isinstance(value, float) and math.isnan(value) else value

        payload = {
            'config_hash': config_hash,
            'bin_width': bin_width,
            'reports': [
                {**{k: clean(v) for k, v in r.to_dict().items()}, 'tau_m': bins_to_metres(r.tau, bin_width)}
                for r in reports
            ],
        }
        with open(json_path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, ensure_ascii=False)
        logger.info(f"  💾 Rapports écrits: {csv_path.name}, {json_path.name}")
        return [csv_path, json_path]

    def store_trace(self, trace: CdaTrace, path: PathLike, config_hash: str = "") -> Path:
        path = self._resolve(path)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(f"# config_hash={config_hash} converged={trace.converged}\n")
            writer = csv.writer(f)
            writer.writerow(['sweep', 'rms_r', 'rms_beta', 'rms_h', 'rms_w', 'label_change_rate', 'log_posterior'])
            for row in trace.rows:
                writer.writerow([
                    row.sweep,
                    _number(row.rms_reflectivity),
                    _number(row.rms_beta),
                    _number(row.rms_gain),
                    _number(row.rms_aux),
                    _number(row.label_change_rate),
                    _number(row.log_posterior),
                ])
        return path

    def load_trace_rows(self, path: PathLike) -> List[dict]:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            lines = [line for line in f if not line.startswith('#')]
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(lines)]


def read_config_hash(path: PathLike) -> Optional[str]:
    """Hash de config inscrit dans l'en-tête d'un artefact texte"""
    with open(path, 'r', encoding='utf-8') as f:
        head = [f.readline().strip() for _ in range(4)]
    for line in head:
        for marker in ('config_hash=', 'config_hash ', '"config_hash": "'):
            if marker in line:
                return line.split(marker, 1)[1].split()[0].strip('",')
    return None
