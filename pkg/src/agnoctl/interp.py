"""Multilinear interpolation on dense rectilinear grids with edge clamping."""

from __future__ import annotations

from itertools import product

import numpy as np

__all__ = ["multilinear"]


def multilinear(axes, values: np.ndarray, points) -> np.ndarray:
    """Interpolate `values` (shape = tuple(len(ax) for ax in axes)) at points.

    axes: list of strictly increasing 1-d arrays.
    points: one array (or scalar) per axis; broadcast together.  Queries
    outside an axis are clamped to its ends (constant extrapolation).
    Returns an array of the broadcast shape.
    """
    if len(axes) != values.ndim or len(points) != values.ndim:
        raise ValueError("axes/points must match values.ndim")
    pts = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in points])
    out_shape = pts[0].shape

    los, fracs = [], []
    for ax, p in zip(axes, pts):
        ax = np.asarray(ax, dtype=float)
        if ax.size == 1:
            los.append(np.zeros(out_shape, dtype=np.intp))
            fracs.append(np.zeros(out_shape))
            continue
        idx = np.searchsorted(ax, p, side="right") - 1
        idx = np.clip(idx, 0, ax.size - 2)
        f = (p - ax[idx]) / (ax[idx + 1] - ax[idx])
        fracs.append(np.clip(f, 0.0, 1.0))
        los.append(idx)

    result = np.zeros(out_shape)
    sizes = values.shape
    for corner in product((0, 1), repeat=len(axes)):
        w = np.ones(out_shape)
        idxs = []
        for c, lo, f, n in zip(corner, los, fracs, sizes):
            idxs.append(np.minimum(lo + c, n - 1))
            w = w * (f if c else (1.0 - f))
        result += w * values[tuple(idxs)]
    return result
