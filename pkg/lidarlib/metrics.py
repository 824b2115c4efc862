"""Critères d'évaluation des nuages de points: F_true, F_false, IAE, DAE, précision"""

import logging
from collections import defaultdict
from typing import Iterable, List

import numpy as np

from .models import EvalReport, Matching, PointCloud


logger = logging.getLogger(__name__)


def match_points(est: PointCloud, gt: PointCloud, tau: float) -> Matching:
    """
    Appariement un-à-un dans chaque pixel, par écart de profondeur croissant

    Seules les paires d'écart ≤ τ sont candidates; chaque point (estimé ou vrai)
    est apparié au plus une fois.

    Args:
        est: Nuage estimé
        gt: Nuage de vérité terrain
        tau: Distance maximale (bins)

    Returns:
        Paires (estimé, vérité) et indices non appariés des deux côtés
    """
    if tau < 0:
        raise ValueError(f"❌ τ doit être ≥ 0: {tau}")
    by_pixel = defaultdict(list)
    for j, key in enumerate(zip(gt.rows.tolist(), gt.cols.tolist())):
        by_pixel[key].append(j)

    candidates = []
    for i, key in enumerate(zip(est.rows.tolist(), est.cols.tolist())):
        for j in by_pixel.get(key, ()):
            gap = abs(float(est.depth[i]) - float(gt.depth[j]))
            if gap <= tau:
                candidates.append((gap, i, j))
    candidates.sort()

    used_est = np.zeros(len(est), dtype=bool)
    used_gt = np.zeros(len(gt), dtype=bool)
    pairs = []
    for _, i, j in candidates:
        if not used_est[i] and not used_gt[j]:
            used_est[i] = used_gt[j] = True
            pairs.append((i, j))
    return Matching(
        pairs=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        unmatched_est=np.flatnonzero(~used_est),
        unmatched_gt=np.flatnonzero(~used_gt),
    )


def evaluate(est: PointCloud, gt: PointCloud, tau: float) -> EvalReport:
    """
    Calcule les critères à la distance τ

    IAE pénalise les points non appariés des deux côtés par Σ_l |I|; DAE est la
    moyenne de |Δd| sur les détections vraies (nan sans détection).
    """
    if len(gt) == 0:
        raise ValueError("❌ Vérité terrain vide: F_true non défini")
    if len(est) and est.wavelengths != gt.wavelengths:
        raise ValueError(f"❌ Intensités à {est.wavelengths} et {gt.wavelengths} longueurs d'onde")

    matching = match_points(est, gt, tau)
    i, j = matching.pairs[:, 0], matching.pairs[:, 1]
    n_matched = len(matching.pairs)

    error = float(np.abs(est.intensity[i] - gt.intensity[j]).sum())
    error += float(np.abs(est.intensity[matching.unmatched_est]).sum())
    error += float(np.abs(gt.intensity[matching.unmatched_gt]).sum())

    dae = float(np.mean(np.abs(est.depth[i] - gt.depth[j]))) if n_matched else float('nan')
    accuracy = None
    if est.labels is not None and gt.labels is not None and n_matched:
        accuracy = float(np.mean(est.labels[i] == gt.labels[j]))

    return EvalReport(
        tau=float(tau),
        f_true=n_matched / len(gt),
        f_false=int(len(matching.unmatched_est)),
        iae=error / len(gt),
        dae=dae,
        accuracy=accuracy,
        n_gt=len(gt),
        n_est=len(est),
        n_matched=n_matched,
    )


def evaluate_sweep(est: PointCloud, gt: PointCloud, taus: Iterable[float]) -> List[EvalReport]:
    """Rapports pour chaque τ, triés par τ croissant"""
    reports = [evaluate(est, gt, tau) for tau in sorted(set(float(t) for t in taus))]
    for report in reports:
        logger.info(
            f"  📊 τ={report.tau:g}: F_true={report.f_true:.4f} F_false={report.f_false} "
            f"IAE={report.iae:.4g} DAE={report.dae:.4g}"
        )
    return reports
