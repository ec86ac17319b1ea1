"""Tunable knobs for the analysis pipeline, with their defaults.

Every tolerance that appears in more than one module lives here so the
pipeline, the service and the tests agree on a single source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple


@dataclass
class AnalysisConfig:
    # radius selection
    r0: Optional[float] = None      # None -> seeded from the coefficient scale
    max_doublings: int = 12
    stable_doublings: int = 3       # consecutive doublings with constant zero count

    # sphere zero finding
    newton_tol: float = 1e-12
    grad_tol_factor: float = 1e-8   # scaled by (1 + coefficient scale)
    hess_tol: float = 1e-8
    dedup_tol: float = 1e-6         # scaled by the radius
    equator_scan: int = 200_000     # sign-scan density on the equator circle
    scan_columns: int = 1600        # plane-route scanline column count
    center: Optional[Tuple[str, str, str]] = None  # fixed center, fraction strings
    mesh_depth: int = 6
    max_mesh_depth: int = 8

    # winding-number fallback
    loop_r_factor: float = 1e-3     # times R
    winding_samples: int = 256
    winding_halvings: int = 6
    winding_snap: float = 0.1       # radians; total must land this close to 2*pi*k

    # branch tracing
    growth: float = 1.25
    r_max_factor: float = 2.0 ** 10
    divergence_threshold: float = 1e8
    vertex_tol: float = 1e-9        # scaled by max(1, |limit|)

    # candidate clustering
    cluster_tol: float = 1e-5       # scaled by (1 + |lambda|)

    # vanishing detector
    isolated_band_cap: int = 8

    # fiber oracle
    oracle_grid_3d: int = 128
    oracle_grid_2d: int = 1024
    box_factor: float = 8.0         # half-width of the fiber box, times R
    annulus_factor: float = 4.0     # default outer radius of the annulus, times R

    # center drawing
    seed: int = 0
    max_redraws: int = 8
    center_denom_bits: int = 16

    run_oracle: bool = False

    def with_(self, **kw) -> "AnalysisConfig":
        return replace(self, **kw)


DEFAULT = AnalysisConfig()


def radius_seed(coeff_scale: float, degree: int) -> float:
    """Starting radius for the doubling search.

    Scaled by the degree-th root of the coefficient size: expanded
    polynomials of degree d reach a given magnitude at radii that grow
    like the d-th root of their coefficients, and the starting sphere
    must sit at the scale of the curve geometry, not the coefficients.
    """
    d = max(1, degree)
    return 4.0 * (1.0 + coeff_scale) ** (1.0 / d)
