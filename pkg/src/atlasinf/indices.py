"""Indices of tangential-field zeros and the sphere-wide audit.

A nondegenerate zero contributes the sign of its tangent Hessian
determinant: extrema count +1, saddles -1. Zeros that resist the
Hessian (degenerate, or sitting in the singular set with a degenerate
planar picture) fall back to the winding number of the field around a
small loop. The audit sums every index on the sphere and checks the
total against the Euler characteristic of the sphere, which certifies
that no zero was missed.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np

from .config import AnalysisConfig
from .critical import KIND_DEGENERATE, KIND_MAX, KIND_MIN, KIND_SADDLE, CriticalPoint
from .errors import GenericityError
from .poly import Center, Polynomial
from .spheremesh import RegionDecomposition


def _loop_winding(f: Polynomial, a: Center, zero: CriticalPoint,
                  loop_r: float, samples: int) -> Optional[int]:
    """Winding of the tangential field along a spherical circle around
    the zero, in the frame of the zero point. None when a step is too
    close to half a turn to be read off reliably."""
    af = np.array(a.as_float())
    r = zero.radius
    n = (zero.position - af) / r
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, ref)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)

    rho = loop_r / r
    phis = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    dirs = (np.outer(np.cos(phis), t1) + np.outer(np.sin(phis), t2))
    pts = af + r * (math.cos(rho) * n[None, :] + math.sin(rho) * dirs)

    gx, gy, gz = f.gradient()
    G = np.stack([gx.eval_many(pts), gy.eval_many(pts), gz.eval_many(pts)], axis=1)
    N = (pts - af[None, :]) / r
    X = G - np.sum(G * N, axis=1)[:, None] * N

    c1 = X @ t1
    c2 = X @ t2
    mags = np.hypot(c1, c2)
    if np.any(mags < 1e-300):
        return None
    ang = np.arctan2(c2, c1)
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + math.pi) % (2.0 * math.pi) - math.pi
    if np.max(np.abs(d)) > 2.5:
        return None
    w = float(np.sum(d) / (2.0 * math.pi))
    return int(round(w)) if abs(w - round(w)) < 0.1 else None


def point_index(f: Polynomial, a: Center, zero: CriticalPoint,
                config: Optional[AnalysisConfig] = None) -> int:
    """Index of one zero of the tangential field."""
    config = config or AnalysisConfig()
    if zero.kind in (KIND_MIN, KIND_MAX):
        zero.index = 1
        return 1
    if zero.kind == KIND_SADDLE:
        zero.index = -1
        return -1

    loop_r = config.loop_r_factor * zero.radius
    for _ in range(config.winding_halvings + 1):
        w = _loop_winding(f, a, zero, loop_r, config.winding_samples)
        if w is not None:
            zero.index = w
            return w
        loop_r *= 0.5
    raise GenericityError(
        "winding number around a degenerate zero did not settle; the "
        "configuration is not generic enough to classify")


def index_all(f: Polynomial, a: Center, zeros: Sequence[CriticalPoint],
              config: Optional[AnalysisConfig] = None) -> List[int]:
    config = config or AnalysisConfig()
    return [point_index(f, a, z, config) for z in zeros]


def poincare_hopf_audit(f: Polynomial, a: Center,
                        zeros: Sequence[CriticalPoint],
                        config: Optional[AnalysisConfig] = None) -> dict:
    """Sum all indices on the sphere and compare with 2.

    A pass certifies the zero list is complete and the indices are
    consistent; a failure is surfaced as a diagnostic, never silently
    repaired.
    """
    config = config or AnalysisConfig()
    total = sum(index_all(f, a, zeros, config))
    return {
        "sum": total,
        "expected": 2,
        "ok": total == 2,
        "zero_count": len(zeros),
        "singular_count": sum(1 for z in zeros if z.in_singular_set),
    }


def region_index_sum(decomp: RegionDecomposition,
                     branch_points: Sequence[CriticalPoint],
                     region_id: int,
                     f: Polynomial, a: Center,
                     config: Optional[AnalysisConfig] = None) -> int:
    """Sum of indices of the given branch points that lie in one region
    of the complement of the level set on the sphere."""
    config = config or AnalysisConfig()
    total = 0
    for z in branch_points:
        rid = decomp.locate(z.position)
        if rid == region_id:
            total += point_index(f, a, z, config)
    return total
