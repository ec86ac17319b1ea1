"""Detection of fiber components that escape to infinity near a level.

A branch point that is a local extremum of the restriction to the
sphere, with values settling monotonically onto a candidate level, may
witness a family of fiber components receding to infinity as the level
is approached from that side. Two tests decide it: the level component
through the point either meets the sphere in isolated spots (step one),
or, after enlarging the radius beyond every distance-critical value of
the level set, the candidate level stays out of the point's region
(step two). A positive from either test certifies the escape; the
second test is also complete, so an all-negative run rules it out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .branches import Candidate, TangencyBranch, _plane_correct, _plane_rescan, collect_candidates
from .config import AnalysisConfig
from .critical import _newton_on_sphere
from .errors import GenericityError
from .planar import Scan
from .poly import Center, Polynomial
from .spheremesh import DegenerateLevelError, build_mesh, decompose

SIDE_ABOVE = "from-above"
SIDE_BELOW = "from-below"


@dataclass
class Witness:
    branch_id: int
    side: str
    test: str                    # "isolated-intersection" | "enlarged-radius"
    outcome: Optional[bool]      # None when the test could not decide
    detail: str = ""

    def to_json_dict(self) -> dict:
        return {
            "branch_id": self.branch_id,
            "side": self.side,
            "test": self.test,
            "outcome": self.outcome,
            "detail": self.detail,
        }


@dataclass
class VanishingReport:
    level: float
    side: str                    # from-above | from-below | both | none
    witnesses: List[Witness] = field(default_factory=list)
    verdict: str = "none"        # vanishing | none | undetermined

    def to_json_dict(self) -> dict:
        return {
            "level": self.level,
            "side": self.side,
            "witnesses": [w.to_json_dict() for w in self.witnesses],
            "verdict": self.verdict,
        }


# ---------------------------------------------------------------------------
# candidate lists


def _approach_side(branch: TangencyBranch, lam: float) -> Optional[str]:
    """Which side the branch values settle onto the level from."""
    vals = branch.values
    if not vals:
        return None
    err = branch.limit_error if math.isfinite(branch.limit_error) else 0.0
    for v in reversed(vals):
        if abs(v - lam) > max(3.0 * err, 1e3 * 2.2e-16 * (1.0 + abs(lam))):
            return SIDE_ABOVE if v > lam else SIDE_BELOW
    return None


def build_candidate_lists(
    branches: Sequence[TangencyBranch],
    config: Optional[AnalysisConfig] = None,
) -> Tuple[Dict[float, List[TangencyBranch]], Dict[float, List[TangencyBranch]],
           List[float], List[float]]:
    """Split the finite-limit extremum branches into the two qualifying
    lists: minima arriving from above, maxima arriving from below."""
    config = config or AnalysisConfig()
    cands = collect_candidates(branches, (), config)
    by_id = {b.id: b for b in branches}
    p_min: Dict[float, List[TangencyBranch]] = {}
    p_max: Dict[float, List[TangencyBranch]] = {}
    for c in cands:
        for bid in c.branch_ids:
            b = by_id[bid]
            side = _approach_side(b, c.value)
            if b.seed.kind == "min" and side == SIDE_ABOVE:
                p_min.setdefault(c.value, []).append(b)
            elif b.seed.kind == "max" and side == SIDE_BELOW:
                p_max.setdefault(c.value, []).append(b)
    return p_min, p_max, sorted(p_min), sorted(p_max)


# ---------------------------------------------------------------------------
# step one: isolated intersection with the sphere


def _isolated_plane(f: Polynomial, a: Center, branch: TangencyBranch,
                    all_branches: Sequence[TangencyBranch],
                    config: AnalysisConfig) -> Optional[bool]:
    """Exact route: the full level component through the branch point
    never enters the open disk iff its intersection with the sphere is
    isolated. The scan box reaches past every distance-critical value of
    the level, beyond which no piece of the level can turn back inward.
    """
    delta = branch.value_at_base
    R = branch.seed.radius
    px, py = float(branch.seed.position[0]), float(branch.seed.position[1])
    cs = distance_critical_values_on_level(f, a, delta, all_branches, config)
    half = 2.0 * max([R, 1.0] + cs)
    sc = Scan(f, delta, a, box=half, columns=config.scan_columns)
    comps = sc.components()
    if not comps:
        return None
    step = 2.0 * half / config.scan_columns
    base = np.array([px, py])
    near = min(comps, key=lambda c: c.min_distance(base))
    if near.min_distance(base) > 4.0 * step:
        return None   # level curve not found at the branch point
    dmin = near.min_distance(np.array(a.as_float()[:2]))
    tol = max(3.0 * step, 1e-9 * R)
    return bool(dmin >= R - tol)


def _isolated_mesh(f: Polynomial, a: Center, branch: TangencyBranch,
                   config: AnalysisConfig) -> Optional[bool]:
    """Mesh route: the band of the level on the sphere around the point
    must stay a bounded face cluster two subdivision levels deeper,
    while a one-dimensional crossing grows with resolution."""
    from .planar import _DSU

    delta = branch.value_at_base
    R = branch.seed.radius
    depth = min(config.mesh_depth + 2, config.max_mesh_depth)
    mesh = build_mesh(a, R, depth, config.max_mesh_depth)
    vals = f.eval_many(mesh.vertices) - delta
    tol = config.vertex_tol * max(1.0, abs(delta))
    sign = np.zeros(len(vals), dtype=np.int8)
    sign[vals > tol] = 1
    sign[vals < -tol] = -1
    fs = sign[mesh.faces]
    band = ~(np.all(fs > 0, axis=1) | np.all(fs < 0, axis=1))

    dsu = _DSU()
    adj = mesh.face_adjacency()
    band_ids = np.nonzero(band)[0]
    band_set = set(band_ids.tolist())
    for fi in band_ids:
        dsu.find(int(fi))
    for faces in adj.values():
        if len(faces) == 2 and faces[0] in band_set and faces[1] in band_set:
            dsu.union(int(faces[0]), int(faces[1]))

    d2 = np.linalg.norm(mesh.vertices - branch.seed.position[None, :], axis=1)
    order = np.argsort(d2)
    root = None
    vf = mesh.vertex_faces()
    for vi in order[:6]:
        for fi in vf[int(vi)]:
            if fi in band_set:
                root = dsu.find(int(fi))
                break
        if root is not None:
            break
    if root is None:
        return None
    count = sum(1 for fi in band_set if dsu.find(int(fi)) == root)
    return bool(count <= config.isolated_band_cap)


def isolated_intersection_test(f: Polynomial, a: Center,
                               branch: TangencyBranch,
                               all_branches: Sequence[TangencyBranch] = (),
                               config: Optional[AnalysisConfig] = None) -> Optional[bool]:
    config = config or AnalysisConfig()
    if f.is_z_free():
        return _isolated_plane(f, a, branch, all_branches, config)
    return _isolated_mesh(f, a, branch, config)


# ---------------------------------------------------------------------------
# step two: enlarged radius


def distance_critical_values_on_level(
        f: Polynomial, a: Center, delta: float,
        branches: Sequence[TangencyBranch],
        config: Optional[AnalysisConfig] = None) -> List[float]:
    """Radii at which the distance from the center is critical on the
    level set: exactly the radii where some branch value crosses it."""
    config = config or AnalysisConfig()
    a1, a2 = float(a.a1), float(a.a2)
    out: List[float] = []
    tiny = 1e-9 * (1.0 + abs(delta))
    for b in branches:
        if not b.values:
            continue
        if b.is_singular:
            if abs(b.values[0] - delta) <= tiny:
                qx, qy, _ = b.positions[0]
                out.append(math.hypot(qx - a1, qy - a2))
            continue
        for k in range(len(b.values) - 1):
            v0, v1 = b.values[k] - delta, b.values[k + 1] - delta
            if v0 == 0.0:
                out.append(b.radii[k])
                continue
            if v0 * v1 < 0:
                out.append(_refine_crossing(f, a, b, k, delta, config))
    return sorted(out)


def _branch_theta(b: TangencyBranch, k: int, a: Center) -> float:
    x, y, _ = b.positions[k]
    return math.atan2(y - float(a.a2), x - float(a.a1))


def _refine_crossing(f: Polynomial, a: Center, b: TangencyBranch, k: int,
                     delta: float, config: AnalysisConfig) -> float:
    """Bisection in the radius between two trace samples bracketing the
    level, re-correcting the branch point at each probe radius."""
    r0, r1 = b.radii[k], b.radii[k + 1]
    v0 = b.values[k] - delta
    if f.is_z_free():
        t0, t1 = _branch_theta(b, k, a), _branch_theta(b, k + 1, a)
        a1, a2 = float(a.a1), float(a.a2)
        for _ in range(50):
            rm = 0.5 * (r0 + r1)
            # interpolate the angle as the Newton start
            w = (rm - b.radii[k]) / (b.radii[k + 1] - b.radii[k])
            tm = t0 + w * ((t1 - t0 + math.pi) % (2 * math.pi) - math.pi)
            res = _plane_correct(f, a, rm, tm, 0)
            if res is None:
                break
            x = a1 + rm * math.cos(res[0])
            y = a2 + rm * math.sin(res[0])
            vm = f.eval_float(x, y) - delta
            if vm == 0.0:
                return rm
            if (vm > 0) == (v0 > 0):
                r0 = rm
            else:
                r1 = rm
            if (r1 - r0) < 1e-9 * r1:
                break
        return r1
    minors = list(f.polar_minors(a))
    af = np.array(a.as_float())
    p0 = np.array(b.positions[k])
    p1 = np.array(b.positions[k + 1])
    for _ in range(50):
        rm = 0.5 * (r0 + r1)
        w = (rm - b.radii[k]) / (b.radii[k + 1] - b.radii[k])
        guess = p0 + w * (p1 - p0)
        guess = af + (guess - af) * (rm / np.linalg.norm(guess - af))
        sol = _newton_on_sphere(f, a, rm, guess, minors, config.newton_tol)
        if sol is None:
            break
        vm = f.eval_float(*sol) - delta
        if vm == 0.0:
            return rm
        if (vm > 0) == (b.values[k] - delta > 0):
            r0 = rm
        else:
            r1 = rm
        if (r1 - r0) < 1e-9 * r1:
            break
    return r1


def _branch_point_at(f: Polynomial, a: Center, b: TangencyBranch, r: float,
                     config: AnalysisConfig) -> Optional[np.ndarray]:
    """Position of the branch on the sphere of radius r."""
    k = min(range(len(b.radii)), key=lambda i: abs(b.radii[i] - r))
    if f.is_z_free():
        th = _branch_theta(b, k, a)
        res = _plane_correct(f, a, r, th, 0)
        if res is None:
            t2 = _plane_rescan(f, a, r, th, config, 0)
            if t2 is None:
                return None
            res = _plane_correct(f, a, r, t2, 0)
            if res is None:
                return None
        return np.array([float(a.a1) + r * math.cos(res[0]),
                         float(a.a2) + r * math.sin(res[0]), float(a.a3)])
    af = np.array(a.as_float())
    p = np.array(b.positions[k])
    guess = af + (p - af) * (r / np.linalg.norm(p - af))
    minors = list(f.polar_minors(a))
    return _newton_on_sphere(f, a, r, guess, minors, config.newton_tol)


def enlarged_radius_test(f: Polynomial, a: Center, branch: TangencyBranch,
                         lam: float, r_prime: float,
                         config: Optional[AnalysisConfig] = None) -> Optional[bool]:
    """True when the candidate level stays out of the branch point's
    region on the enlarged sphere, so the level component the branch
    rides must recede to infinity."""
    config = config or AnalysisConfig()
    delta = branch.value_at_base
    pos = _branch_point_at(f, a, branch, r_prime, config)
    if pos is None:
        return None

    if f.is_z_free():
        sc = Scan(f, delta, a, radius=r_prime, columns=config.scan_columns)
        zid = sc.zone_of_point(float(pos[0]), float(pos[1]))
        if zid is None:
            return None
        return not sc.zone_contains_level(zid, lam)

    depth = config.mesh_depth
    while depth <= config.max_mesh_depth:
        mesh = build_mesh(a, r_prime, depth, config.max_mesh_depth)
        try:
            dec = decompose(f, delta, mesh, config)
        except DegenerateLevelError:
            return None
        rid = dec.locate(pos)
        if rid is not None:
            region = dec.region_by_id(rid)
            if region.face_set is None:
                return None
            verts = np.unique(mesh.faces[sorted(region.face_set)])
            vals = f.eval_many(mesh.vertices[verts])
            band_tol = config.vertex_tol * max(1.0, abs(lam))
            if lam > delta:
                crossing = bool(np.any(vals >= lam - band_tol))
            else:
                crossing = bool(np.any(vals <= lam + band_tol))
            return not crossing
        depth += 1
    return None


# ---------------------------------------------------------------------------
# the detector


def detect_vanishing(f: Polynomial, a: Center, lam: float,
                     branches: Sequence[TangencyBranch],
                     config: Optional[AnalysisConfig] = None) -> VanishingReport:
    """Run both steps over every qualifying branch point of one level."""
    config = config or AnalysisConfig()
    p_min, p_max, _, _ = build_candidate_lists(branches, config)

    def entry_for(table: Dict[float, List[TangencyBranch]]) -> List[TangencyBranch]:
        tol = config.cluster_tol * (1.0 + abs(lam))
        for key, lst in table.items():
            if abs(key - lam) <= tol:
                return lst
        return []

    jobs = ([(b, SIDE_ABOVE) for b in entry_for(p_min)]
            + [(b, SIDE_BELOW) for b in entry_for(p_max)])
    report = VanishingReport(level=lam, side="none")
    sides_seen = sorted({side for _, side in jobs})

    for b, side in jobs:
        iso = isolated_intersection_test(f, a, b, branches, config)
        if iso is True:
            report.witnesses.append(Witness(b.id, side, "isolated-intersection", True))
            continue
        cs = distance_critical_values_on_level(f, a, b.value_at_base, branches, config)
        r_prime = 2.0 * max([b.seed.radius, 1.0] + cs)
        res = enlarged_radius_test(f, a, b, lam, r_prime, config)
        detail = f"R'={r_prime:.6g}"
        if iso is None:
            detail += "; step-one inconclusive"
        report.witnesses.append(Witness(b.id, side, "enlarged-radius", res, detail))

    positives = [w for w in report.witnesses if w.outcome is True]
    undecided = [w for w in report.witnesses if w.outcome is None]
    if positives:
        report.verdict = "vanishing"
        pos_sides = sorted({w.side for w in positives})
        report.side = pos_sides[0] if len(pos_sides) == 1 else "both"
    elif undecided:
        report.verdict = "undetermined"
        report.side = sides_seen[0] if len(sides_seen) == 1 else ("both" if sides_seen else "none")
    else:
        report.verdict = "none"
        report.side = sides_seen[0] if len(sides_seen) == 1 else ("both" if sides_seen else "none")
    return report
