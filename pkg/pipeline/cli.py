#!/usr/bin/env python3
"""
Script CLI de la chaîne LiDAR mono-photon multispectrale
"""

import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table

# Ajouter le répertoire parent au path pour importer lidarlib
sys.path.insert(0, str(Path(__file__).parent.parent))

from lidarlib import LidarSystem, StageError
from lidarlib.config import LOG_LEVEL
from lidarlib.settings import load_pipeline_config, save_pipeline_config

app = typer.Typer(help="🛰️  LiDAR CLI - Détection et reconstruction multispectrale mono-photon")
console = Console()

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

# Options globales, remplies par le callback
OPTIONS = {
    'config': None,
    'overrides': [],
    'output_dir': None,
}


@app.callback()
def main(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Fichier de configuration JSON"),
    overrides: Optional[List[str]] = typer.Option(None, "--set", "-s", help="Surcharge 'section.cle=valeur' (répétable)"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o", help="Dossier des artefacts"),
    log_level: str = typer.Option(LOG_LEVEL, "--log-level", "-l", help="Niveau de log (DEBUG, INFO, WARNING...)"),
):
    """Options communes à toutes les commandes"""
    logging.getLogger().setLevel(log_level.upper())
    OPTIONS['config'] = config
    OPTIONS['overrides'] = list(overrides or [])
    OPTIONS['output_dir'] = output_dir


def load_system(extra: Optional[List[str]] = None) -> LidarSystem:
    """Charge et valide la configuration avant toute étape (code 1 en cas d'échec)"""
    try:
        config = load_pipeline_config(OPTIONS['config'], OPTIONS['overrides'] + list(extra or []))
    except (ValueError, FileNotFoundError) as e:
        print(f"❌ Configuration invalide: {e}")
        raise typer.Exit(EXIT_VALIDATION)
    return LidarSystem(config, OPTIONS['output_dir'])


@contextmanager
def runtime():
    """Convertit les erreurs d'exécution en code de sortie 2"""
    try:
        yield
    except typer.Exit:
        raise
    except StageError as e:
        print(f"❌ {e}")
        raise typer.Exit(EXIT_RUNTIME)
    except Exception as e:
        print(f"❌ Erreur inattendue: {e}")
        raise typer.Exit(EXIT_RUNTIME)


def print_reports(reports, title: str = "📊 Évaluation"):
    table = Table(title=title)
    for column in ("τ (bins)", "F_true", "F_false", "IAE", "DAE", "Précision"):
        table.add_column(column, justify="right")
    for r in reports:
        table.add_row(
            f"{r.tau:g}",
            f"{r.f_true:.4f}",
            str(r.f_false),
            f"{r.iae:.4g}",
            f"{r.dae:.4g}",
            "-" if r.accuracy is None else f"{r.accuracy:.4f}",
        )
    console.print(table)


@app.command()
def simulate(
    ppp: Optional[float] = typer.Option(None, "--ppp", help="Photons signal moyens par pixel"),
    sbr: Optional[float] = typer.Option(None, "--sbr", help="Rapport signal sur fond"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Graine du générateur"),
):
    """🎲 Simule un cube d'histogrammes et sa vérité terrain"""
    extra = []
    if ppp is not None:
        extra.append(f"simulation.ppp={ppp!r}")
    if sbr is not None:
        extra.append(f"simulation.sbr={sbr!r}")
    if seed is not None:
        extra.append(f"simulation.seed={seed}")
    system = load_system(extra)

    with runtime():
        paths = system.cmd_simulate()
    print("✅ Simulation terminée")
    for name, path in paths.items():
        print(f"   {name}: {path}")


@app.command()
def detect(
    cube: Path = typer.Argument(..., help="Cube d'histogrammes (.splc ou liste d'événements)"),
):
    """🔍 Pré-traitement: saillance multi-échelle, carte de détection et surfaces"""
    system = load_system()

    with runtime():
        result = system.cmd_detect(cube)
    print("✅ Détection terminée")
    print(f"   Carte: {result['map']}")
    print(f"   Surfaces: {result['surfaces']} ({result['surface_count']} présentes)")
    print(f"   Taux de réduction: {result['reduction_ratio']:.6f}")


@app.command()
def reconstruct(
    surfaces: Path = typer.Argument(..., help="Ensemble de surfaces (.npz issu de 'detect')"),
):
    """🧠 Post-traitement: estimation bayésienne profondeur, réflectivité et classes"""
    system = load_system()

    with runtime():
        result = system.cmd_reconstruct(surfaces)
    status = "convergé" if result['converged'] else "non convergé"
    print(f"✅ Reconstruction terminée ({result['sweeps']} balayages, {status})")
    print(f"   Nuage PLY: {result['ply']}")
    print(f"   Table: {result['cloud']} ({result['points']} points)")
    print(f"   Trace: {result['trace']}")


@app.command()
def evaluate(
    estimate: Path = typer.Argument(..., help="Nuage estimé (CSV)"),
    truth: Path = typer.Argument(..., help="Nuage de vérité terrain (CSV)"),
    taus: Optional[List[float]] = typer.Option(None, "--tau", "-t", help="Distance τ en bins (répétable)"),
):
    """📊 Compare deux nuages de points pour chaque distance τ"""
    extra = []
    if taus:
        extra.append(f"taus={sorted(set(taus))!r}")
    system = load_system(extra)

    with runtime():
        result = system.cmd_evaluate(estimate, truth)
    print_reports(result['reports'])
    print(f"   Rapports: {result['csv']}, {result['json']}")


@app.command()
def pipeline(
    threads: Optional[int] = typer.Option(None, "--threads", "-j", help="Cellules traitées en parallèle"),
):
    """🚀 Chaîne complète: simulation, détection, reconstruction, évaluation"""
    system = load_system()
    if threads is not None and threads < 1:
        print(f"❌ Nombre de threads invalide: {threads}")
        raise typer.Exit(EXIT_VALIDATION)

    with runtime():
        cells = system.run_pipeline(threads)

    summary = Table(title="🚀 Pipeline")
    for column in ("PPP", "SBR", "Graine", "Réduction", "Surfaces", "Balayages", "F_true (τ max)"):
        summary.add_column(column, justify="right")
    for cell in cells:
        last = cell['reports'][-1]
        summary.add_row(
            f"{cell['ppp']:g}",
            f"{cell['sbr']:g}",
            str(cell['seed']),
            f"{cell['reduction_ratio']:.5f}",
            str(cell['surface_count']),
            str(cell['sweeps']),
            f"{last.f_true:.4f}",
        )
    console.print(summary)
    print(f"✅ {len(cells)} cellule(s) traitée(s) dans {system.output_dir}")


@app.command("init-config")
def init_config(
    path: Path = typer.Argument(Path("pipeline.json"), help="Fichier à créer"),
    force: bool = typer.Option(False, "--force", "-f", help="Écraser un fichier existant"),
):
    """⚙️  Écrit une configuration par défaut (surcharges --set appliquées)"""
    if path.exists() and not force:
        print(f"❌ {path} existe déjà (utilisez --force pour l'écraser)")
        raise typer.Exit(EXIT_VALIDATION)
    system = load_system()
    save_pipeline_config(system.config, path)
    print(f"✅ Configuration écrite: {path}")
    print(f"   Hash: {system.config_hash}")


@app.command()
def show_config():
    """⚙️  Affiche la configuration effective"""
    system = load_system()
    console.print_json(system.config.model_dump_json())
    print(f"   Hash: {system.config_hash}")


if __name__ == "__main__":
    app()
