"""Brute-force fiber extraction and topology measurement.

Ground truth at desk scale for the analytic machinery: level sets are
extracted on regular grids (marching squares for z-free input, marching
cubes otherwise), labeled into connected components, and measured for
Euler characteristic, box-boundary contact, distance to the center, and
ball intersection. Deliberately slow; meant for cross-checks and the
opt-in CLI flag, never the standard pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath as mp
import numpy as np
from skimage import measure

from .config import AnalysisConfig
from .critical import find_planar_critical_points
from .poly import Center, Polynomial
from .spheremesh import RegionDecomposition


@dataclass
class ComponentStats:
    chi: int
    touches_box_boundary: bool
    min_distance_to_a: float
    intersects_ball_R: bool
    n_vertices: int = 0

    def to_json_dict(self) -> dict:
        return {
            "chi": self.chi,
            "touches_box_boundary": self.touches_box_boundary,
            "min_distance_to_a": self.min_distance_to_a,
            "intersects_ball_R": self.intersects_ball_R,
            "n_vertices": self.n_vertices,
        }


@dataclass
class FiberSample:
    """One extracted level set: grid description plus per-component stats."""

    t: float
    box: Tuple[Tuple[float, float], ...]   # (lo, hi) per axis; 2 or 3 axes
    resolution: int
    dim: int
    components: int
    per_component: List[ComponentStats] = field(default_factory=list)
    # geometry for export: 2d polylines or 3d triangle soup per component
    geometry: List[np.ndarray] = field(default_factory=list)

    def to_json_dict(self, with_geometry: bool = False) -> dict:
        out = {
            "t": self.t,
            "box": [list(b) for b in self.box],
            "resolution": self.resolution,
            "dim": self.dim,
            "components": self.components,
            "per_component": [c.to_json_dict() for c in self.per_component],
        }
        if with_geometry:
            out["geometry"] = [g.tolist() for g in self.geometry]
        return out


def _nudge_level(t: float, values: np.ndarray, tol: float) -> float:
    """Shift the level off any grid value it collides with."""
    step = 3.7 * tol
    for _ in range(64):
        if not np.any(np.abs(values - t) <= tol):
            return t
        t += step
        step *= 1.7
    return t


def _resolve_box(box, center: Center, dim: int) -> List[Tuple[float, float]]:
    """Accept a scalar half-width around the center or explicit bounds."""
    cf = center.as_float()
    if np.isscalar(box):
        w = float(box)
        return [(cf[i] - w, cf[i] + w) for i in range(dim)]
    out = [(float(lo), float(hi)) for lo, hi in box]
    if len(out) != dim:
        raise ValueError(f"box has {len(out)} axes, expected {dim}")
    return out


class _DSU:
    def __init__(self, n: int):
        self.p = list(range(n))

    def find(self, i: int) -> int:
        while self.p[i] != i:
            self.p[i] = self.p[self.p[i]]
            i = self.p[i]
        return i

    def union(self, i: int, j: int):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.p[rj] = ri


def _extract_2d(f: Polynomial, t: float, bounds, resolution: int,
                center: Center, ball_radius: Optional[float],
                config: AnalysisConfig) -> FiberSample:
    (x0, x1), (y0, y1) = bounds
    n = resolution + 1
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    G = f.eval_many(pts).reshape(n, n)
    tol = config.vertex_tol * max(1.0, abs(t))
    t = _nudge_level(t, G, tol)

    contours = measure.find_contours(G, level=t)
    cf = center.as_float()
    dx = (x1 - x0) / resolution
    dy = (y1 - y0) / resolution
    comps: List[ComponentStats] = []
    geoms: List[np.ndarray] = []
    for c in contours:
        # index space -> coordinates; rows follow x because of the
        # indexing="ij" grid layout
        px = x0 + c[:, 0] * dx
        py = y0 + c[:, 1] * dy
        closed = np.allclose(c[0], c[-1])
        d = np.hypot(px - cf[0], py - cf[1])
        mind = float(np.min(d))
        edge = 1.5 * max(dx, dy)
        touches = bool(
            np.any(px <= x0 + edge) or np.any(px >= x1 - edge)
            or np.any(py <= y0 + edge) or np.any(py >= y1 - edge)
        ) and not closed
        chi = 0 if closed else 1
        inter = bool(ball_radius is not None and mind <= ball_radius)
        comps.append(ComponentStats(chi, touches, mind, inter, len(px)))
        geoms.append(np.stack([px, py], axis=1))
    order = sorted(range(len(comps)),
                   key=lambda i: (comps[i].min_distance_to_a, -comps[i].n_vertices))
    comps = [comps[i] for i in order]
    geoms = [geoms[i] for i in order]
    return FiberSample(t=t, box=tuple(bounds), resolution=resolution, dim=2,
                       components=len(comps), per_component=comps, geometry=geoms)


def _grid_values_3d(f: Polynomial, bounds, resolution: int) -> Tuple[np.ndarray, ...]:
    (x0, x1), (y0, y1), (z0, z1) = bounds
    n = resolution + 1
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    zs = np.linspace(z0, z1, n)
    V = np.empty((n, n, n))
    # one xy-slab at a time keeps the point buffer small and the
    # evaluation order deterministic
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    flat = np.stack([X.ravel(), Y.ravel()], axis=1)
    buf = np.empty((flat.shape[0], 3))
    buf[:, :2] = flat
    if f.is_z_free():
        buf[:, 2] = zs[0]
        V[:, :, :] = f.eval_many(buf).reshape(n, n)[:, :, None]
        return V, xs, ys, zs
    for k, z in enumerate(zs):
        buf[:, 2] = z
        V[:, :, k] = f.eval_many(buf).reshape(n, n)
    return V, xs, ys, zs


def _label_faces(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    dsu = _DSU(len(verts))
    for a, b, c in faces:
        dsu.union(int(a), int(b))
        dsu.union(int(a), int(c))
    return np.array([dsu.find(int(v)) for v in range(len(verts))])


def _chi_of_faces(faces: np.ndarray) -> Tuple[int, int, int, int]:
    """(V, E, F, chi) of a triangle subset, edges counted once."""
    if len(faces) == 0:
        return 0, 0, 0, 0
    vids = np.unique(faces)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    E = len(np.unique(e, axis=0))
    V = len(vids)
    F = len(faces)
    return V, E, F, V - E + F


def _extract_3d(f: Polynomial, t: float, bounds, resolution: int,
                center: Center, ball_radius: Optional[float],
                config: AnalysisConfig) -> FiberSample:
    V, xs, ys, zs = _grid_values_3d(f, bounds, resolution)
    tol = config.vertex_tol * max(1.0, abs(t))
    t = _nudge_level(t, V, tol)
    spacing = (xs[1] - xs[0], ys[1] - ys[0], zs[1] - zs[0])
    try:
        verts, faces, _, _ = measure.marching_cubes(V, level=t, spacing=spacing)
    except ValueError:
        # level misses the sampled range: empty fiber in this box
        return FiberSample(t=t, box=tuple(bounds), resolution=resolution,
                           dim=3, components=0)
    verts = verts + np.array([xs[0], ys[0], zs[0]])
    roots = _label_faces(verts, faces)
    cf = np.array(center.as_float())
    d = np.linalg.norm(verts - cf[None, :], axis=1)
    lo = np.array([xs[0], ys[0], zs[0]])
    hi = np.array([xs[-1], ys[-1], zs[-1]])
    edge = 1.5 * max(spacing)
    on_edge = np.any((verts <= lo + edge) | (verts >= hi - edge), axis=1)

    comps: List[ComponentStats] = []
    geoms: List[np.ndarray] = []
    for root in sorted(set(int(roots[v]) for v in np.unique(faces))):
        mask = roots[faces[:, 0]] == root
        sub = faces[mask]
        nV, nE, nF, chi = _chi_of_faces(sub)
        vids = np.unique(sub)
        mind = float(np.min(d[vids]))
        touches = bool(np.any(on_edge[vids]))
        inter = bool(ball_radius is not None and mind <= ball_radius)
        comps.append(ComponentStats(chi, touches, mind, inter, nV))
        geoms.append(verts[sub.ravel()].reshape(-1, 9))
    order = sorted(range(len(comps)),
                   key=lambda i: (comps[i].min_distance_to_a, -comps[i].n_vertices))
    comps = [comps[i] for i in order]
    geoms = [geoms[i] for i in order]
    return FiberSample(t=t, box=tuple(bounds), resolution=resolution, dim=3,
                       components=len(comps), per_component=comps, geometry=geoms)


def extract_fiber(f: Polynomial, t: float, box, resolution: Optional[int] = None,
                  center: Optional[Center] = None,
                  ball_radius: Optional[float] = None,
                  config: Optional[AnalysisConfig] = None) -> FiberSample:
    """Marching extraction of the level set f = t inside a box.

    z-free input is extracted as the plane curve g = t; each plane
    component stands for its vertical cylinder, whose Euler
    characteristic it shares (1 for an arc, 0 for an oval).
    """
    config = config or AnalysisConfig()
    center = center or Center.origin()
    if f.is_z_free():
        res = resolution or config.oracle_grid_2d
        bounds = _resolve_box(box, center, 2)
        return _extract_2d(f, t, bounds, res, center, ball_radius, config)
    res = resolution or config.oracle_grid_3d
    bounds = _resolve_box(box, center, 3)
    return _extract_3d(f, t, bounds, res, center, ball_radius, config)


# ---------------------------------------------------------------------------
# annulus patch characteristic


def _region_anchor_points(decomp: RegionDecomposition, R: float) -> Dict[int, List[np.ndarray]]:
    """A few sphere points well inside each region of a decomposition."""
    center = np.array(decomp.mesh.center.as_float())
    out: Dict[int, List[np.ndarray]] = {}
    for reg in decomp.regions:
        pts: List[np.ndarray] = []
        if reg.source == "plane" and reg.sample is not None:
            sx, sy = reg.sample
            d2 = (sx - center[0]) ** 2 + (sy - center[1]) ** 2
            h = math.sqrt(max(R * R - d2, 0.0))
            z = center[2] + (h if reg.hemisphere >= 0 else -h)
            pts.append(np.array([sx, sy, z]))
            if reg.hemisphere == 0:
                pts.append(np.array([sx, sy, center[2] - h]))
        elif reg.face_set is not None and len(reg.face_set):
            cens = decomp.mesh.vertices[decomp.mesh.faces[reg.face_set]].mean(axis=1)
            vals = np.abs(decomp.f.eval_many(cens) - decomp.level)
            for k in np.argsort(-vals)[:4]:
                v = cens[k] - center
                pts.append(center + v * (R / np.linalg.norm(v)))
        out[reg.id] = pts
    return out


def _annulus_chi_once(f: Polynomial, t: float, lam: float,
                      decomp: RegionDecomposition,
                      region_id: int, R: float, r_prime: float,
                      resolution: int, config: AnalysisConfig) -> Optional[int]:
    center = decomp.mesh.center
    cf = np.array(center.as_float())
    w = 1.02 * r_prime
    bounds = [(cf[i] - w, cf[i] + w) for i in range(3)]
    V, xs, ys, zs = _grid_values_3d(f, bounds, resolution)
    tol = config.vertex_tol * max(1.0, abs(t))
    t = _nudge_level(t, V, tol)
    spacing = (xs[1] - xs[0], ys[1] - ys[0], zs[1] - zs[0])
    try:
        verts, faces, _, _ = measure.marching_cubes(V, level=t, spacing=spacing)
    except ValueError:
        return 0
    verts = verts + np.array([xs[0], ys[0], zs[0]])
    cen = np.mean(verts[faces], axis=1)
    rad = np.linalg.norm(cen - cf[None, :], axis=1)
    keep = (rad >= R) & (rad <= r_prime)
    idx = np.nonzero(keep)[0]
    if len(idx) == 0:
        return 0
    # Membership is by separating component: the level surface outside
    # the ball divides space, the patch belongs to whichever component
    # hugs the region. Chart those components on the voxel grid.
    s = 1 if t >= lam else -1
    d2 = ((xs - cf[0]) ** 2)[:, None, None] \
        + ((ys - cf[1]) ** 2)[None, :, None] \
        + ((zs - cf[2]) ** 2)[None, None, :]
    mask = (d2 >= R * R) & (s * (V - lam) > 0.0)
    labels = measure.label(mask, connectivity=1)
    cell = np.array(spacing)
    lo3 = np.array([xs[0], ys[0], zs[0]])
    shape = np.array(labels.shape)

    def label_at(q: np.ndarray) -> int:
        ijk = np.rint((q - lo3) / cell).astype(int)
        if np.any(ijk < 0) or np.any(ijk >= shape):
            return 0
        return int(labels[ijk[0], ijk[1], ijk[2]])

    target = 0
    for p in _region_anchor_points(decomp, R).get(region_id, []):
        for push in (1.5, 3.0, 6.0, 12.0):
            q = cf + (p - cf) * ((R + push * cell.max()) / R)
            target = label_at(q)
            if target:
                break
        if target:
            break
    if target == 0:
        # region too thin for this grid to chart a component over it
        return 0
    # Connected fiber patches cannot cross the level surface, so each
    # lies in one charted component; the voxel with the safest signed
    # value places the whole patch.
    kept = faces[idx]
    parent = list(range(len(idx)))

    def find(u: int) -> int:
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    owner: Dict[int, int] = {}
    for pos in range(len(idx)):
        for v in kept[pos]:
            vi = int(v)
            if vi in owner:
                ra, rb = find(owner[vi]), find(pos)
                if ra != rb:
                    parent[ra] = rb
            else:
                owner[vi] = pos
    vox = np.rint((cen[idx] - lo3) / cell).astype(int)
    np.clip(vox, 0, shape - 1, out=vox)
    vlab = labels[vox[:, 0], vox[:, 1], vox[:, 2]]
    vscore = s * (V[vox[:, 0], vox[:, 1], vox[:, 2]] - lam)
    groups: Dict[int, List[int]] = {}
    for pos in range(len(idx)):
        groups.setdefault(find(pos), []).append(pos)
    sub = []
    for members in groups.values():
        best, bscore = 0, -math.inf
        for pos in members:
            if vlab[pos] and vscore[pos] > bscore:
                best, bscore = int(vlab[pos]), float(vscore[pos])
        if best == target:
            sub.extend(kept[pos] for pos in members)
    if not sub:
        return 0
    _, _, _, chi = _chi_of_faces(np.asarray(sub))
    return chi


def _turning_locus(f: Polynomial, center: Center) -> Polynomial:
    """Planar locus where level curves run tangent to centered circles."""
    px = Polynomial.variable("x") - Polynomial.constant(center.a1)
    py = Polynomial.variable("y") - Polynomial.constant(center.a2)
    return px * f.diff(1) - py * f.diff(0)


def _swap_xy(f: Polynomial) -> Polynomial:
    return Polynomial({(j, i, k): c for (i, j, k), c in f.terms.items()})


def _polyline_turnings(f: Polynomial, center: Center, t: float, half: float,
                       columns: int) -> List[Tuple[float, float, float, int]]:
    """Sphere tangency points on the fiber of a z-free polynomial.

    Candidate locations come from sign changes of the turning locus
    along exact level-curve polylines, swept by vertical and by
    horizontal columns so that strands steep in one direction are still
    well sampled in the other. Each candidate is Newton-polished onto
    the intersection of the fiber with the turning locus and duplicates
    are merged. Entries are (x, y, distance, cls) with cls +1 at a
    local distance minimum and -1 at a maximum; the class is read off
    the exact second derivative of the squared distance along the
    curve, whose sign is that of Px*gy - Py*gx.
    """
    from .planar import Scan
    a1, a2 = float(center.a1), float(center.a2)
    P = _turning_locus(f, center)
    gx, gy = f.diff(0), f.diff(1)
    Px, Py = P.diff(0), P.diff(1)
    W = Px * gy - Py * gx
    seeds: List[Tuple[float, float]] = []
    for swap in (False, True):
        fs = _swap_xy(f) if swap else f
        cs = Center(center.a2, center.a1, center.a3) if swap else center
        sc = Scan(fs, t, cs, box=half, columns=columns)
        Ps = _turning_locus(fs, cs)
        for comp in sc.components():
            pts = comp.pts
            if len(pts) < 2:
                continue
            vals = Ps.eval_many(pts)
            sgn = np.sign(vals)
            for i in range(len(pts) - 1):
                if sgn[i] != 0 and sgn[i] * sgn[i + 1] > 0:
                    continue
                if sgn[i] == 0 and sgn[i + 1] == 0:
                    continue
                w = abs(vals[i]) / max(abs(vals[i]) + abs(vals[i + 1]), 1e-300)
                q = pts[i] * (1.0 - w) + pts[i + 1] * w
                seeds.append((q[1], q[0]) if swap else (q[0], q[1]))
    pitch = 2.0 * half / max(columns, 1)
    out: List[Tuple[float, float, float, int]] = []
    for (x0, y0) in seeds:
        x, y = float(x0), float(y0)
        converged = False
        for _ in range(30):
            gv = f.eval_float(x, y) - t
            pv = P.eval_float(x, y)
            j11 = gx.eval_float(x, y)
            j12 = gy.eval_float(x, y)
            j21 = Px.eval_float(x, y)
            j22 = Py.eval_float(x, y)
            det = j11 * j22 - j12 * j21
            if not math.isfinite(det) or abs(det) < 1e-300:
                break
            dx = (-gv * j22 + pv * j12) / det
            dy = (-pv * j11 + gv * j21) / det
            step = math.hypot(dx, dy)
            if step > pitch:
                dx *= pitch / step
                dy *= pitch / step
            x += dx
            y += dy
            if math.hypot(x - x0, y - y0) > 4.0 * pitch:
                break
            if step < 1e-12 * (1.0 + math.hypot(x, y)):
                converged = True
                break
        if not converged and math.hypot(x - x0, y - y0) <= 4.0 * pitch:
            # steep walls make the update dither below float resolution
            # while both residuals are already far inside tolerance
            gv = f.eval_float(x, y) - t
            pv = P.eval_float(x, y)
            ng = math.hypot(gx.eval_float(x, y), gy.eval_float(x, y))
            npl = math.hypot(Px.eval_float(x, y), Py.eval_float(x, y))
            tol = 1e-8 * (1.0 + math.hypot(x, y))
            if abs(gv) <= tol * max(1.0, ng) and abs(pv) <= tol * max(1.0, npl):
                converged = True
        if not converged:
            continue
        # collapse float stall scatter so duplicate seeds dedupe cleanly
        with mp.workdps(40):
            try:
                root = mp.findroot(
                    lambda u, v: [f.eval_mp(u, v) - t, P.eval_mp(u, v)],
                    (mp.mpf(x), mp.mpf(y)))
                xr, yr = float(root[0]), float(root[1])
                if math.hypot(xr - x, yr - y) <= pitch:
                    x, y = xr, yr
            except (ValueError, ZeroDivisionError, ArithmeticError):
                pass
        dq = math.hypot(x - a1, y - a2)
        wv = W.eval_float(x, y)
        cls = 1 if wv > 0 else -1
        dup = False
        for (X, Y, _, _) in out:
            if (abs(x - X) <= 1e-6 * (1.0 + abs(X))
                    and abs(y - Y) <= 1e-6 * (1.0 + abs(Y))):
                dup = True
                break
        if not dup:
            out.append((x, y, dq, cls))
    return out


_COLLAR_CACHE: Dict[tuple, float] = {}


def _collar_radius(f: Polynomial, center: Center, t: float, R: float,
                   config: AnalysisConfig) -> float:
    """Cut radius past every tangency of the centered spheres with the
    fiber. Beyond the last tangency the outside part of the fiber is a
    product collar and contributes nothing to the Euler count, so the
    annulus may stop there. Input that depends on all three variables
    falls back to a fixed multiple."""
    if not f.is_z_free():
        return 4.0 * R
    key = (hash(f), center.as_tuple(), float(t), float(R))
    hit = _COLLAR_CACHE.get(key)
    if hit is not None:
        return hit
    far = 0.0
    half = 16.0 * R
    for _ in range(2):
        far = max([0.0] + [d for _, _, d, _ in
                           _polyline_turnings(f, center, t, half,
                                              config.scan_columns)])
        if far < 0.9 * half:
            break
        half *= 2.0
    rp = max(4.0 * R, 1.25 * far)
    if len(_COLLAR_CACHE) > 16:
        _COLLAR_CACHE.pop(next(iter(_COLLAR_CACHE)))
    _COLLAR_CACHE[key] = rp
    return rp


_PLANAR_CHI_CACHE: Dict[tuple, tuple] = {}


def _planar_chi_data(f: Polynomial, t: float, lam: float, center: Center,
                     half: float, columns: int, config: AnalysisConfig):
    """Level-complement chart plus classified fiber tangencies, cached.

    Building the two exact scans dominates the cost and is independent
    of the region asked about, so results are shared across regions.
    """
    key = (hash(f), center.as_tuple(), float(t), float(lam),
           round(float(half), 9), int(columns))
    hit = _PLANAR_CHI_CACHE.get(key)
    if hit is not None:
        return hit
    from .planar import Scan
    lam_scan = Scan(f, lam, center, box=half, columns=columns)
    turnings = _polyline_turnings(f, center, t, half, columns)
    data = (lam_scan, turnings)
    if len(_PLANAR_CHI_CACHE) > 8:
        _PLANAR_CHI_CACHE.pop(next(iter(_PLANAR_CHI_CACHE)))
    _PLANAR_CHI_CACHE[key] = data
    return data


def _annulus_chi_planar(f: Polynomial, t: float, lam: float,
                        decomp: RegionDecomposition, region_id: int,
                        R: float, r_prime: float, columns: int,
                        config: AnalysisConfig) -> int:
    """Exact patch Euler count for z-free input.

    Every fiber piece is a vertical cylinder over a plane curve, so the
    patch deformation-retracts along the radius onto a union of collar
    circles (count zero) and cells around sphere tangencies: a distance
    minimum contributes +1, a maximum -1. Membership goes through the
    planar component of the level complement containing the region's
    sample, which is exactly the separating component because the sign
    constraint does not involve z.
    """
    center = decomp.mesh.center
    reg = decomp.region_by_id(region_id)
    if reg is None:
        return 0
    s = 1 if t >= lam else -1
    if reg.sign != s:
        # fiber lies on the other side of the level, the patch is empty
        return 0
    lam_scan, turnings = _planar_chi_data(f, t, lam, center,
                                          1.05 * r_prime, columns, config)
    if reg.sample is None:
        return 0
    za = lam_scan.zone_of_point(float(reg.sample[0]), float(reg.sample[1]))
    if za is None:
        return 0
    total = 0
    for (qx, qy, dq, cls) in turnings:
        if not (R < dq < r_prime):
            continue
        if lam_scan.zone_of_point(qx, qy) != za:
            continue
        total += cls
    return total


def euler_outside_ball(f: Polynomial, t: float, lam: float,
                       decomp: RegionDecomposition, region_id: int,
                       R: float, r_prime: Optional[float] = None,
                       resolution: Optional[int] = None,
                       config: Optional[AnalysisConfig] = None) -> Optional[int]:
    """Euler characteristic of the fiber patch riding one sphere region.

    The patch is the part of f = t between the spheres of radius R and
    r_prime lying in the region's separating component of the level
    complement. When r_prime is not given it is derived from the last
    sphere-fiber tangency so that only a product collar is cut away.
    z-free input takes an exact plane-curve route; anything else is
    measured on a voxel grid. Answers are accepted only when two
    refinements agree; a persistent disagreement returns None.
    """
    config = config or AnalysisConfig()
    if r_prime is None:
        r_prime = _collar_radius(f, decomp.mesh.center, t, R, config)
    if f.is_z_free():
        cols = config.scan_columns
        a = _annulus_chi_planar(f, t, lam, decomp, region_id, R, r_prime,
                                cols, config)
        b = _annulus_chi_planar(f, t, lam, decomp, region_id, R, r_prime,
                                int(cols * 1.4) + 1, config)
        if a == b:
            return a
        c = _annulus_chi_planar(f, t, lam, decomp, region_id, R, r_prime,
                                2 * cols, config)
        if c == b or c == a:
            return c
        return None
    res = resolution or config.oracle_grid_3d
    a = _annulus_chi_once(f, t, lam, decomp, region_id, R, r_prime, res, config)
    b = _annulus_chi_once(f, t, lam, decomp, region_id, R, r_prime,
                          int(res * 1.4) + 1, config)
    if a == b:
        return a
    c = _annulus_chi_once(f, t, lam, decomp, region_id, R, r_prime, 2 * res,
                          config)
    if c == b or c == a:
        return c
    return None


# ---------------------------------------------------------------------------
# compactness and escape measurements


def compact_component_test(f: Polynomial, t: float, R: float, box,
                           resolution: Optional[int] = None,
                           center: Optional[Center] = None,
                           config: Optional[AnalysisConfig] = None) -> Optional[bool]:
    """Whether the fiber owns a compact component clear of the R-ball.

    z-free input never does: every plane-curve component sweeps an
    unbounded vertical cylinder.
    """
    config = config or AnalysisConfig()
    center = center or Center.origin()
    if f.is_z_free():
        return False
    sample = extract_fiber(f, t, box, resolution, center, ball_radius=R,
                           config=config)
    for comp in sample.per_component:
        if not comp.touches_box_boundary and not comp.intersects_ball_R:
            return True
    return False


def min_fiber_distance_sweep(f: Polynomial, lam: float, side: str,
                             t_schedule: Sequence[float], box,
                             resolution: Optional[int] = None,
                             center: Optional[Center] = None,
                             config: Optional[AnalysisConfig] = None
                             ) -> List[Tuple[float, float]]:
    """Per scheduled t, the largest over components of the component's
    least distance to the center. A run that climbs past the box scale
    is the empirical signature of a fiber component receding to
    infinity as t approaches the level.

    For z-free input the components come from the exact column solver:
    a receding fiber piece thins polynomially as it recedes, far past
    what any affordable uniform grid resolves, while a column solve
    pins both of its walls exactly in y."""
    config = config or AnalysisConfig()
    center = center or Center.origin()
    out: List[Tuple[float, float]] = []
    if f.is_z_free():
        from .planar import Scan
        bounds = _resolve_box(box, center, 2)
        half = 0.5 * max(hi - lo for lo, hi in bounds)
        cf = np.array(center.as_float()[:2])
        if f.degree_in(1) == 0:
            # fiber is a union of vertical lines: solve in x alone
            deg = f.degree_in(0)
            coeffs = [0.0] * (deg + 1)
            for (i, j, k), c in f.terms.items():
                if j == 0 and k == 0:
                    coeffs[i] = float(c)
            x_lo, x_hi = bounds[0]
            for t in t_schedule:
                shifted = list(coeffs)
                shifted[0] -= t
                roots = np.polynomial.polynomial.polyroots(shifted)
                real = [float(r.real) for r in roots
                        if abs(r.imag) <= 1e-9 * (1.0 + abs(r))
                        and x_lo <= r.real <= x_hi]
                if not real:
                    out.append((t, math.inf))
                    continue
                out.append((t, max(abs(r - float(center.a1)) for r in real)))
            return out
        for t in t_schedule:
            sc = Scan(f, t, center, box=half, columns=config.scan_columns)
            comps = sc.components()
            if not comps:
                out.append((t, math.inf))
                continue
            out.append((t, max(c.min_distance(cf) for c in comps)))
        return out
    for t in t_schedule:
        sample = extract_fiber(f, t, box, resolution, center, config=config)
        if sample.components == 0:
            out.append((t, math.inf))
            continue
        out.append((t, max(c.min_distance_to_a for c in sample.per_component)))
    return out


def approach_schedule(lam: float, side: str, steps: int = 4,
                      start: float = 1e-1, ratio: float = 0.1) -> List[float]:
    """Geometric t-schedule approaching the level from one side.

    Short by design: a receding component's nearest point moves out
    polynomially in 1/(t - level), so a few decades already carry it
    across the default box while keeping it inside."""
    sign = 1.0 if side == "from-above" else -1.0
    return [lam + sign * start * ratio**k for k in range(steps)]


def sweep_diverges(rows: Sequence[Tuple[float, float]], box_half: float) -> bool:
    """Read a sweep: climbing past half the box scale counts as escape."""
    vals = [v for _, v in rows if math.isfinite(v)]
    if not vals:
        return True
    climbing = all(b >= a * 0.9 for a, b in zip(vals, vals[1:]))
    return climbing and max(vals) >= 0.5 * box_half


def sweep_to_csv(f: Polynomial, lam: float, side: str,
                 t_schedule: Sequence[float], box,
                 resolution: Optional[int] = None,
                 center: Optional[Center] = None,
                 config: Optional[AnalysisConfig] = None) -> str:
    """Sweep with per-component detail, rendered as CSV text."""
    config = config or AnalysisConfig()
    center = center or Center.origin()
    lines = ["t,component_id,min_distance,chi,compact"]
    for t in t_schedule:
        sample = extract_fiber(f, t, box, resolution, center, config=config)
        for i, comp in enumerate(sample.per_component):
            compact = (not comp.touches_box_boundary) and not f.is_z_free()
            lines.append(f"{t!r},{i},{comp.min_distance_to_a!r},"
                         f"{comp.chi},{str(compact).lower()}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# critical value survey


def compute_K0(f: Polynomial, box, resolution: Optional[int] = None,
               center: Optional[Center] = None,
               config: Optional[AnalysisConfig] = None) -> List[float]:
    """Values of f at gradient zeros found inside the box, clustered.

    Completeness is claimed only within the box: the search is seeded
    on a grid and polished by Newton steps on the gradient.
    """
    config = config or AnalysisConfig()
    center = center or Center.origin()
    if f.is_z_free():
        bounds = _resolve_box(box, center, 2)
        half = 0.5 * max(hi - lo for lo, hi in bounds)
        pts = find_planar_critical_points(f, half, config)
        vals = sorted(f.eval_float(px, py) for px, py in pts)
    else:
        vals = sorted(_gradient_zero_values_3d(f, _resolve_box(box, center, 3)))
    out: List[float] = []
    for v in vals:
        if out and abs(v - out[-1]) <= config.cluster_tol * (1.0 + abs(v)):
            continue
        out.append(v)
    return out


def _gradient_zero_values_3d(f: Polynomial, bounds, seeds_per_axis: int = 12
                             ) -> List[float]:
    gx, gy, gz = (f.diff(v) for v in range(3))
    hess = [[gx.diff(0), gx.diff(1), gx.diff(2)],
            [gy.diff(0), gy.diff(1), gy.diff(2)],
            [gz.diff(0), gz.diff(1), gz.diff(2)]]
    axes = [np.linspace(lo, hi, seeds_per_axis) for lo, hi in bounds]
    scale = f.coeff_scale()
    span = max(hi - lo for lo, hi in bounds)
    found: List[np.ndarray] = []
    for sx in axes[0]:
        for sy in axes[1]:
            for sz in axes[2]:
                p = np.array([sx, sy, sz])
                ok = False
                for _ in range(40):
                    g = np.array([gx.eval_float(*p), gy.eval_float(*p),
                                  gz.eval_float(*p)])
                    H = np.array([[h.eval_float(*p) for h in row]
                                  for row in hess])
                    try:
                        step = np.linalg.solve(H, g)
                    except np.linalg.LinAlgError:
                        break
                    nrm = np.linalg.norm(step)
                    if nrm > 0.2 * span:
                        step *= 0.2 * span / nrm
                    p = p - step
                    if np.linalg.norm(step) < 1e-12 * (1.0 + np.linalg.norm(p)):
                        ok = True
                        break
                if not ok:
                    continue
                g = np.array([gx.eval_float(*p), gy.eval_float(*p),
                              gz.eval_float(*p)])
                if np.linalg.norm(g) > 1e-7 * (1.0 + scale):
                    continue
                if any(not (lo - 1e-9 <= c <= hi + 1e-9)
                       for c, (lo, hi) in zip(p, bounds)):
                    continue
                if any(np.linalg.norm(p - q) < 1e-6 * (1.0 + np.linalg.norm(p))
                       for q in found):
                    continue
                found.append(p)
    return [f.eval_float(*p) for p in found]
