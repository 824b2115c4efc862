"""Scénarios de bout en bout sur scènes simulées (lents)"""

import time

import numpy as np
import pytest

from lidarlib import LidarSystem
from lidarlib.cda import init_state, log_posterior, run_cda
from lidarlib.cloud_manager import cloud_from_scene
from lidarlib.graph import build_graph
from lidarlib.settings import CdaConfig, load_pipeline_config

from .test_cda import random_problem


pytestmark = pytest.mark.slow


def make_system(tmp_path, **simulation) -> LidarSystem:
    overrides = [f"simulation.{key}={value}" for key, value in simulation.items()]
    return LidarSystem(load_pipeline_config(overrides=overrides), tmp_path)


def run_scene(system: LidarSystem, ppp=None, sbr=None, seed=None, taus=(1.0, 4.0)):
    cube, scene = system.simulate(ppp, sbr, seed)
    _, surfaces = system.detect(cube)
    _, trace, cloud = system.reconstruct(surfaces)
    reports = system.evaluate(cloud, cloud_from_scene(scene), list(taus))
    return reports, trace, cloud


def test_noiseless_two_surface_scene(tmp_path):
    system = make_system(tmp_path, rows=64, cols=64, bins=128, surfaces=2, ppp=1000, sbr="Infinity")
    reports, _, _ = run_scene(system, taus=(1.0,))
    report = reports[0]
    assert report.f_true >= 0.99
    assert report.f_false <= 0.01 * report.n_gt
    assert report.dae <= 0.5


def test_noiseless_scene_keeps_few_voxels(tmp_path):
    system = make_system(tmp_path, rows=64, cols=64, bins=128, surfaces=2, ppp=1000, sbr="Infinity")
    cube, _ = system.simulate()
    result, _ = system.detect(cube)
    assert 0.0 < result.reduction_ratio <= 0.05


def test_large_cube_detection_time(tmp_path):
    system = make_system(tmp_path, rows=200, cols=200, bins=300, surfaces=2, ppp=64, sbr=1)
    cube, _ = system.simulate()
    start = time.perf_counter()
    system.detect(cube)
    assert time.perf_counter() - start < 10.0


def test_multispectral_classification(tmp_path):
    system = make_system(tmp_path, rows=48, cols=48, bins=128, surfaces=1, wavelengths=4, classes=3,
                         ppp=50, sbr=1.3)
    reports, _, _ = run_scene(system, taus=(4.0,))
    assert reports[0].accuracy is not None
    assert reports[0].accuracy >= 0.95


def test_reruns_are_identical(tmp_path):
    system = make_system(tmp_path, rows=24, cols=24, bins=96, surfaces=2, ppp=64, sbr=1, seed=11)
    first = run_scene(system)
    second = run_scene(system)
    assert np.array_equal(first[2].depth, second[2].depth)
    assert np.array_equal(first[2].intensity, second[2].intensity)
    assert np.array_equal(first[1].log_posteriors, second[1].log_posteriors)


def test_random_problems_converge_monotonically():
    converged = 0
    for seed in range(20):
        surfaces, library = random_problem(100 + seed)
        graph = build_graph(surfaces, rho=1.25)
        config = CdaConfig(xi=1e-4, i_max=100)
        start = log_posterior(init_state(surfaces, library, config, graph), surfaces, library, graph, config)
        _, trace = run_cda(surfaces, library, graph, config)

        values = np.concatenate([[start], trace.log_posteriors])
        assert np.all(np.diff(values) >= -1e-9 * np.maximum(1.0, np.abs(values[:-1])))
        converged += trace.converged
    assert converged >= 18


def mean_and_error(values):
    values = np.asarray(values, dtype=float)
    return values.mean(), values.std(ddof=1) / np.sqrt(values.size)


def detection_curve(system: LidarSystem, cells):
    curve = []
    for ppp, sbr in cells:
        scores = [run_scene(system, ppp, sbr, seed, taus=(4.0,))[0][0].f_true for seed in range(5)]
        curve.append(mean_and_error(scores))
    return curve


def assert_non_decreasing(curve):
    for (m0, e0), (m1, e1) in zip(curve, curve[1:]):
        assert m1 >= m0 - np.sqrt(e0 ** 2 + e1 ** 2)


def test_detection_improves_with_photons(tmp_path):
    system = make_system(tmp_path, rows=64, cols=64, bins=128, surfaces=2)
    assert_non_decreasing(detection_curve(system, [(4, 1.0), (16, 1.0), (64, 1.0)]))
    assert_non_decreasing(detection_curve(system, [(16, 0.25), (16, 1.0), (16, 4.0)]))
