"""Shared oracles and samplers for the test suite."""

import math

import numpy as np
import pytest


def fd_gradient(evalfn, x, h=1e-5):
    """Central finite-difference gradient of a scalar field at point ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for k in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[k] += h
        lo[k] -= h
        out[k] = (evalfn(hi) - evalfn(lo)) / (2.0 * h)
    return out


def segment_oracle(x, p1, p2):
    """Step-by-step scalar evaluation of the segment field (independent of
    the library's vectorised implementation)."""
    x1, y1 = p1
    x2, y2 = p2
    L = math.hypot(x2 - x1, y2 - y1)
    f = ((x[0] - x1) * (y2 - y1) - (x[1] - y1) * (x2 - x1)) / L
    xc = ((x1 + x2) / 2.0, (y1 + y2) / 2.0)
    t = ((L / 2.0) ** 2 - ((x[0] - xc[0]) ** 2 + (x[1] - xc[1]) ** 2)) / L
    aux = math.sqrt(t * t + f ** 4)
    return math.sqrt(f * f + ((aux - t) / 2.0) ** 2)


def circle_boundary(center, radius, n):
    """n points exactly on a circle."""
    th = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return np.stack(
        [center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)], axis=1
    )


def sphere_boundary(center, radius, n):
    """n points on a sphere (Fibonacci lattice)."""
    k = np.arange(n, dtype=float)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    z = 1.0 - 2.0 * (k + 0.5) / n
    r = np.sqrt(1.0 - z * z)
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return np.asarray(center) + radius * pts


def segment_interior(p1, p2, n, margin=0.05):
    """n points on the open segment, ``margin`` away from the endpoints."""
    u = np.linspace(margin, 1.0 - margin, n)[:, None]
    return np.asarray(p1) + u * (np.asarray(p2) - np.asarray(p1))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20220624)
