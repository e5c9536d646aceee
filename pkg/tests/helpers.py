"""Shared test utilities: distance metrics and analytic shapes."""

import numpy as np
from scipy.spatial import cKDTree


def hausdorff(points_a, points_b) -> float:
    """Symmetric Hausdorff distance between two point sets of shape (n, 2)."""
    a = np.asarray(points_a, dtype=float)
    b = np.asarray(points_b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("hausdorff needs non-empty point sets")
    d_ab = cKDTree(b).query(a)[0].max()
    d_ba = cKDTree(a).query(b)[0].max()
    return float(max(d_ab, d_ba))


def circle_points(cx, cy, r, n=720) -> np.ndarray:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])
