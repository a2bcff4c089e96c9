"""Shared geometries for the test suite."""

import numpy as np
import pytest

from limitmesh.limit import LimitEvaluator
from limitmesh.mesh import FeatureModel, infer_features
from limitmesh.shapes import cube_surface, cylinder_surface, fibonacci_sphere, planar_grid, torus


def quadrant_ids(surface):
    """Surface ids 1..4 from the azimuth of each triangle centroid."""
    c = surface.vertices[surface.triangles].mean(axis=1)
    return 1 + ((np.arctan2(c[:, 1], c[:, 0]) + np.pi) // (np.pi / 2)).astype(int) % 4


@pytest.fixture(scope="session")
def featured_sphere():
    """200-triangle closed mesh, valences 5-7, four surfaces meeting at the poles."""
    s = fibonacci_sphere(102, radius=0.5)
    return s, infer_features(s, quadrant_ids(s))


@pytest.fixture(scope="session")
def featured_sphere_evaluator(featured_sphere):
    s, m = featured_sphere
    return LimitEvaluator(s, m)


@pytest.fixture(scope="session")
def smooth_sphere():
    """450-vertex sphere approximant with a single smooth surface."""
    s = fibonacci_sphere(450)
    return s, FeatureModel(surfaces={1: range(s.n_triangles)})


@pytest.fixture(scope="session")
def regular_torus():
    """Closed mesh where every vertex has valence 6."""
    s = torus(12, 8)
    return s, FeatureModel(surfaces={1: range(s.n_triangles)})


@pytest.fixture(scope="session")
def flat_grid():
    return planar_grid(4, 4)


@pytest.fixture(scope="session")
def cube():
    s, ids = cube_surface(2)
    return s, infer_features(s, ids)


@pytest.fixture(scope="session")
def seamed_cylinder():
    s, ids = cylinder_surface(n_theta=16, n_z=3, seam=True, n_cap=2)
    return s, infer_features(s, ids)


# ----------------------------------------------------------------------
# acceptance summary

ACCEPTANCE_LINES = []


def acceptance(number, ok, text):
    """Record and print one acceptance line; returns ``ok``."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
