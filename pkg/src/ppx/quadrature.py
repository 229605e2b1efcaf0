"""Globally adaptive tensor-product Gauss-Legendre cubature on boxes.

Each box is integrated with an n-point and a 2n-point tensor rule; their
difference is the box's error estimate. The box with the largest estimate
is split into 2^d children until the summed estimate meets the tolerance.
Known kinks or jumps of the integrand should be passed as ``breaks`` so
they fall on box faces from the start.
"""

from __future__ import annotations

import heapq
import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import QuadratureError

RTOL = 1e-8


@lru_cache(maxsize=None)
def _tensor_rule(n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    # nodes on [0, 1]
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights


def _box_rule(f, lo, hi, n):
    nodes, weights = _tensor_rule(n, len(lo))
    width = hi - lo
    pts = lo + nodes * width
    return float(np.dot(weights, f(pts))) * float(np.prod(width))


def integrate(
    f,
    lower,
    upper,
    *,
    breaks=None,
    rtol: float = RTOL,
    atol: float = 1e-13,
    order: int = 8,
    max_boxes: int = 200_000,
) -> float:
    """Integrate ``f`` over the box ``[lower, upper]``.

    Parameters
    ----------
    f : callable
        Vectorized integrand taking an ``(n, d)`` array of points and
        returning ``n`` values.
    lower, upper : sequence of float
        Box corners.
    breaks : sequence of sequences, optional
        Per-axis coordinates where the integrand is not smooth. Those inside
        the box become initial cut planes.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.size
    if np.any(upper < lower):
        raise ValueError("upper < lower")
    if np.any(upper == lower):
        return 0.0

    cuts = []
    for i in range(d):
        axis = {lower[i], upper[i]}
        if breaks is not None and breaks[i] is not None:
            axis.update(b for b in breaks[i] if lower[i] < b < upper[i])
        cuts.append(sorted(axis))

    counter = itertools.count()
    heap = []
    total = 0.0
    err = 0.0

    def push(lo, hi):
        nonlocal total, err
        coarse = _box_rule(f, lo, hi, order)
        fine = _box_rule(f, lo, hi, 2 * order)
        e = abs(fine - coarse)
        total += fine
        err += e
        heapq.heappush(heap, (-e, next(counter), fine, lo, hi))

    for idx in itertools.product(*[range(len(c) - 1) for c in cuts]):
        lo = np.array([cuts[i][k] for i, k in enumerate(idx)])
        hi = np.array([cuts[i][k + 1] for i, k in enumerate(idx)])
        push(lo, hi)

    n_boxes = len(heap)
    while err > max(rtol * abs(total), atol):
        if n_boxes >= max_boxes:
            raise QuadratureError(
                f"quadrature did not converge: estimate {total:.6g}, error {err:.3g} "
                f"after {n_boxes} boxes"
            )
        neg_e, _, val, lo, hi = heapq.heappop(heap)
        total -= val
        err += neg_e
        mid = 0.5 * (lo + hi)
        for corner in itertools.product((0, 1), repeat=d):
            c = np.array(corner, dtype=bool)
            push(np.where(c, mid, lo), np.where(c, hi, mid))
        n_boxes += 2**d - 1
    return math.fsum(item[2] for item in heap)
