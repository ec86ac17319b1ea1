"""Center selection, radius stabilization, and critical points on spheres.

The tangential gradient of f on a sphere around a generic center has
finitely many zeros; these are the seeds of everything downstream. For
inputs without third-variable dependence the zeros live either on the
equator (where the angular derivative of the planar restriction
vanishes) or on the vertical circle over a planar critical point, and
both families are found by dense scans with bisection refinement plus
audited Newton. General inputs go through mesh candidates and Newton
on the best-conditioned pair of polar minors.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import AnalysisConfig, radius_seed
from .errors import GenericityError, ResourceCapError
from .poly import Center, Polynomial
from .spheremesh import SphereMesh, build_mesh

KIND_MIN = "min"
KIND_MAX = "max"
KIND_SADDLE = "saddle"
KIND_DEGENERATE = "degenerate"


@dataclass
class CriticalPoint:
    """Zero of the tangential gradient field on one sphere."""

    position: np.ndarray
    radius: float
    value: float
    kind: str
    in_singular_set: bool
    tangent_hessian_eigenvalues: Tuple[float, float]
    index: Optional[int] = None
    theta: Optional[float] = None         # equator parameter, plane route
    planar_base: Optional[Tuple[float, float]] = None  # singular-column base

    def key(self) -> Tuple[float, float, float]:
        return (round(float(self.position[0]), 9),
                round(float(self.position[1]), 9),
                round(float(self.position[2]), 9))


@dataclass
class RadiusDiagnostics:
    chosen_R: float = 0.0
    branch_count_history: List[Tuple[float, int]] = field(default_factory=list)
    property_P_stable: bool = False
    value_interval_disjointness: bool = True
    level_transversality: bool = True
    messages: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# center selection


def _draw_center(rng: random.Random, bits: int, flat: bool) -> Center:
    den = 1 << bits

    def coord():
        return Fraction(rng.randint(-den, den), den)

    a3 = Fraction(0) if flat else coord()
    return Center(coord(), coord(), a3)


def choose_generic_center(f: Polynomial, seed: int,
                          config: Optional[AnalysisConfig] = None) -> Center:
    """Random rational center in [-1,1]^3 for which the polar system is
    nontrivial. Inputs constant in the third variable get a center in
    its zero plane, which the mirror symmetry of the construction
    requires for the exact planar route.
    """
    config = config or AnalysisConfig()
    if f.degree() <= 0:
        raise GenericityError("constant input has no typical/atypical structure")
    rng = random.Random(seed)
    flat = f.is_z_free()
    for _ in range(config.max_redraws):
        a = _draw_center(rng, config.center_denom_bits, flat)
        minors = f.polar_minors(a)
        if all(m.is_zero() for m in minors):
            continue
        return a
    raise GenericityError("center redraws exhausted: polar system degenerate "
                          "for every drawn center")


def validate_center(f: Polynomial, a: Center, sample_radii: Sequence[float],
                    config: Optional[AnalysisConfig] = None) -> bool:
    """True when every located sphere zero at the sample radii is
    nondegenerate. False asks the caller to redraw."""
    config = config or AnalysisConfig()
    for r in sample_radii:
        try:
            zeros = find_sphere_zeros(f, a, r, config)
        except GenericityError:
            return False
        for z in zeros:
            if z.kind == KIND_DEGENERATE and not z.in_singular_set:
                return False
    return True


# ---------------------------------------------------------------------------
# plane route: equator zeros and singular columns


def _equator_zeros(f: Polynomial, a: Center, r: float,
                   config: AnalysisConfig) -> List[float]:
    """Angles where the derivative of f along the equator circle vanishes."""
    gx, gy, _ = f.gradient()
    a1, a2 = float(a.a1), float(a.a2)

    def dval(ths: np.ndarray) -> np.ndarray:
        x = a1 + r * np.cos(ths)
        y = a2 + r * np.sin(ths)
        pts = np.stack([x, y], axis=1)
        return (-gx.eval_many(pts) * r * np.sin(ths)
                + gy.eval_many(pts) * r * np.cos(ths))

    n = config.equator_scan
    ths = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    dv = dval(ths)
    scale = float(np.max(np.abs(dv))) or 1.0

    def bisect(t0: float, t1: float, v0: float) -> float:
        for _ in range(80):
            tm = 0.5 * (t0 + t1)
            vm = float(dval(np.array([tm]))[0])
            if vm == 0.0:
                return tm
            if (vm > 0) == (v0 > 0):
                t0 = tm
            else:
                t1 = tm
            if t1 - t0 < 1e-15:
                break
        return 0.5 * (t0 + t1)

    s = np.sign(dv)
    s[s == 0] = 1
    flips = np.nonzero(s != np.roll(s, -1))[0]
    zeros = []
    step = 2.0 * math.pi / n
    for i in flips:
        t0 = ths[i]
        zeros.append(bisect(t0, t0 + step, float(dv[i])))

    # sign-preserving dips hide tangential pairs; look again at magnified
    # density around deep local minima of |D|
    absdv = np.abs(dv)
    local_min = (absdv < np.roll(absdv, 1)) & (absdv <= np.roll(absdv, -1))
    suspicious = np.nonzero(local_min & (absdv < 1e-4 * scale))[0]
    for i in suspicious:
        if any(abs(ths[i] - z) < 2 * step for z in zeros):
            continue
        fine = np.linspace(ths[i] - step, ths[i] + step, 4097)
        fdv = dval(fine)
        fsign = np.sign(fdv)
        fsign[fsign == 0] = 1
        fflips = np.nonzero(fsign[:-1] != fsign[1:])[0]
        for j in fflips:
            zeros.append(bisect(float(fine[j]), float(fine[j + 1]), float(fdv[j])))
        if len(fflips) == 0:
            # no crossing: certify the dip is genuinely nonzero against
            # the pointwise evaluation noise, escalating to high
            # precision when floating point cannot tell
            jmin = int(np.argmin(np.abs(fdv)))
            tm = float(fine[jmin])
            xm = a1 + r * math.cos(tm)
            ym = a2 + r * math.sin(tm)
            mag = r * (_float_mag(gx, xm, ym) + _float_mag(gy, xm, ym)) + 1e-300
            if float(np.abs(fdv[jmin])) < 64 * _EPS * mag:
                import mpmath as mp
                with mp.workdps(60):
                    xq = mp.mpf(a1) + mp.mpf(r) * mp.cos(mp.mpf(tm))
                    yq = mp.mpf(a2) + mp.mpf(r) * mp.sin(mp.mpf(tm))
                    dmp = (-gx.eval_mp(xq, yq) * mp.mpf(r) * mp.sin(mp.mpf(tm))
                           + gy.eval_mp(xq, yq) * mp.mpf(r) * mp.cos(mp.mpf(tm)))
                    if abs(dmp) < mp.mpf(mag) * mp.mpf("1e-40"):
                        raise GenericityError(
                            "equator field has a flat near-zero without a "
                            "sign change: degenerate tangency, center not "
                            "generic")
    return sorted(z % (2.0 * math.pi) for z in zeros)


def _float_mag(p: Polynomial, x: float, y: float, z: float = 0.0) -> float:
    """Sum of term magnitudes; the scale against which an evaluated value
    of p at (x,y,z) can be called zero in floating point."""
    ax, ay, az = abs(x), abs(y), abs(z)
    return sum(abs(float(c)) * ax**i * ay**j * (az**k if k else 1.0)
               for (i, j, k), c in p.terms.items())


_PLANAR_CRIT_CACHE: Dict[Tuple[Polynomial, float], List[Tuple[float, float]]] = {}


def find_planar_critical_points(f: Polynomial, half_width: float,
                                config: Optional[AnalysisConfig] = None,
                                grid: int = 128) -> List[Tuple[float, float]]:
    """Common zeros of both planar partials inside a centered box.

    Grid-seeded damped Newton, deduplicated, then verified exactly: the
    partials are evaluated with rational arithmetic at the rounded
    rational point and must vanish to 1e-6 relative to the evaluated
    term magnitudes.
    """
    config = config or AnalysisConfig()
    cache_key = (f, round(half_width, 6))
    if cache_key in _PLANAR_CRIT_CACHE:
        return _PLANAR_CRIT_CACHE[cache_key]
    gx, gy, _ = f.gradient()
    gxx = gx.diff(0)
    gxy = gx.diff(1)
    gyy = gy.diff(1)

    lin = np.linspace(-half_width, half_width, grid)
    X, Y = np.meshgrid(lin, lin)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    for _ in range(60):
        vx = gx.eval_many(pts)
        vy = gy.eval_many(pts)
        hxx = gxx.eval_many(pts)
        hxy = gxy.eval_many(pts)
        hyy = gyy.eval_many(pts)
        det = hxx * hyy - hxy * hxy
        det[np.abs(det) < 1e-300] = np.nan
        dx = (vx * hyy - vy * hxy) / det
        dy = (vy * hxx - vx * hxy) / det
        stepn = np.hypot(dx, dy)
        damp = np.minimum(1.0, 0.5 * half_width / np.maximum(stepn, 1e-300))
        pts[:, 0] -= dx * damp
        pts[:, 1] -= dy * damp
        np.nan_to_num(pts, copy=False, nan=1e9)

    vx = gx.eval_many(pts)
    vy = gy.eval_many(pts)
    scale = f.coeff_scale()
    ok = (np.abs(vx) < 1e-7 * (1 + scale)) & (np.abs(vy) < 1e-7 * (1 + scale))
    ok &= (np.abs(pts[:, 0]) <= 2 * half_width) & (np.abs(pts[:, 1]) <= 2 * half_width)
    found: List[Tuple[float, float]] = []
    for x0, y0 in pts[ok]:
        if any(math.hypot(x0 - u, y0 - v) < 1e-6 * (1 + half_width) for u, v in found):
            continue
        xq = Fraction(float(x0)).limit_denominator(10**12)
        yq = Fraction(float(y0)).limit_denominator(10**12)
        okx = _exact_small(gx, xq, yq)
        oky = _exact_small(gy, xq, yq)
        if okx and oky:
            found.append((float(x0), float(y0)))
    found.sort()
    _PLANAR_CRIT_CACHE[cache_key] = found
    return found


def _exact_small(p: Polynomial, xq: Fraction, yq: Fraction, rel: float = 1e-6) -> bool:
    """|p(x,y)| at a rational point, against the sum of term magnitudes."""
    val = Fraction(0)
    mag = Fraction(0)
    ax, ay = abs(xq), abs(yq)
    for (i, j, _k), c in p.terms.items():
        t = c * xq**i * yq**j
        val += t
        mag += abs(c) * ax**i * ay**j
    if mag == 0:
        return val == 0
    return abs(val) <= rel * mag


def _planar_kind(f: Polynomial, x: float, y: float,
                 hess_tol: float) -> Tuple[str, Tuple[float, float]]:
    H = f.hessian()
    hxx = H[0][0].eval_float(x, y)
    hxy = H[0][1].eval_float(x, y)
    hyy = H[1][1].eval_float(x, y)
    tr = hxx + hyy
    disc = math.sqrt(max((hxx - hyy) ** 2 / 4 + hxy**2, 0.0))
    e1, e2 = tr / 2 - disc, tr / 2 + disc
    mag = (_float_mag(H[0][0], x, y) + 2 * _float_mag(H[0][1], x, y)
           + _float_mag(H[1][1], x, y))
    floor = max(64 * _EPS * mag, hess_tol)
    if min(abs(e1), abs(e2)) < floor:
        return KIND_DEGENERATE, (e1, e2)
    if e1 > 0:
        return KIND_MIN, (e1, e2)
    if e2 < 0:
        return KIND_MAX, (e1, e2)
    return KIND_SADDLE, (e1, e2)


_EPS = float(np.finfo(float).eps)


def _signs_to_kind(e1: float, e2: float) -> str:
    if e1 > 0 and e2 > 0:
        return KIND_MIN
    if e1 < 0 and e2 < 0:
        return KIND_MAX
    if e1 == 0 or e2 == 0:
        return KIND_DEGENERATE
    return KIND_SADDLE


def _mp_equator_classify(f: Polynomial, a: Center, r: float, th: float,
                         mag_h: float, mag_k: float) -> Tuple[float, float, str]:
    """Settle eigenvalue signs that float precision cannot.

    The angle is first re-polished by Newton in high precision (the
    derivative of the equator field with respect to the angle is r^2
    times the first tangent eigenvalue), then both eigenvalues are
    recomputed there. Only a magnitude below the high-precision floor
    counts as degenerate.
    """
    import mpmath as mp

    gx, gy, _ = f.gradient()
    H = f.hessian()
    with mp.workdps(60):
        a1 = mp.mpf(a.a1.numerator) / mp.mpf(a.a1.denominator)
        a2 = mp.mpf(a.a2.numerator) / mp.mpf(a.a2.denominator)
        rm = mp.mpf(r)
        t = mp.mpf(th)

        def eigs(t):
            x = a1 + rm * mp.cos(t)
            y = a2 + rm * mp.sin(t)
            gxv = gx.eval_mp(x, y)
            gyv = gy.eval_mp(x, y)
            kappa = (gxv * (x - a1) + gyv * (y - a2)) / (rm * rm)
            u0, u1 = -mp.sin(t), mp.cos(t)
            huu = (H[0][0].eval_mp(x, y) * u0 * u0
                   + 2 * H[0][1].eval_mp(x, y) * u0 * u1
                   + H[1][1].eval_mp(x, y) * u1 * u1)
            D = -gxv * rm * mp.sin(t) + gyv * rm * mp.cos(t)
            return huu - kappa, -kappa, D

        for _ in range(6):
            e1, e2, D = eigs(t)
            if e1 == 0:
                break
            step = D / (rm * rm * e1)
            t = t - step
            if abs(step) < mp.mpf("1e-45"):
                break
        e1, e2, _D = eigs(t)
        floor = mp.mpf(max(mag_h + mag_k, 1.0)) * mp.mpf("1e-40")
        f1 = 0.0 if abs(e1) < floor else float(e1)
        f2 = 0.0 if abs(e2) < floor else float(e2)
        return f1, f2, _signs_to_kind(f1, f2)


def _plane_sphere_zeros(f: Polynomial, a: Center, r: float,
                        config: AnalysisConfig) -> List[CriticalPoint]:
    a1, a2 = float(a.a1), float(a.a2)
    gx, gy, _ = f.gradient()
    H = f.hessian()
    scale = f.coeff_scale()
    grad_tol = config.grad_tol_factor * (1.0 + scale)
    out: List[CriticalPoint] = []

    for th in _equator_zeros(f, a, r, config):
        x = a1 + r * math.cos(th)
        y = a2 + r * math.sin(th)
        gxv = gx.eval_float(x, y)
        gyv = gy.eval_float(x, y)
        kappa = (gxv * (x - a1) + gyv * (y - a2)) / (r * r)
        u = (-math.sin(th), math.cos(th))
        huu = (H[0][0].eval_float(x, y) * u[0] * u[0]
               + 2 * H[0][1].eval_float(x, y) * u[0] * u[1]
               + H[1][1].eval_float(x, y) * u[1] * u[1])
        e1, e2 = huu - kappa, -kappa
        # floating-point noise floors from the term-magnitude sums; an
        # eigenvalue inside its floor gets re-decided in high precision
        mag_k = (_float_mag(gx, x, y) * abs(x - a1)
                 + _float_mag(gy, x, y) * abs(y - a2)) / (r * r)
        mag_h = (_float_mag(H[0][0], x, y) * u[0] * u[0]
                 + 2 * _float_mag(H[0][1], x, y) * abs(u[0] * u[1])
                 + _float_mag(H[1][1], x, y) * u[1] * u[1])
        n1 = 64 * _EPS * (mag_h + mag_k) + 1e-300
        n2 = 64 * _EPS * mag_k + 1e-300
        if abs(e1) < n1 or abs(e2) < n2:
            e1, e2, kind = _mp_equator_classify(f, a, r, th, mag_h, mag_k)
        else:
            kind = _signs_to_kind(e1, e2)
        singular = math.hypot(gxv, gyv) < grad_tol
        out.append(CriticalPoint(
            position=np.array([x, y, float(a.a3)]), radius=r,
            value=f.eval_float(x, y), kind=kind, in_singular_set=singular,
            tangent_hessian_eigenvalues=(min(e1, e2), max(e1, e2)), theta=th))

    # the singular-set search box stays fixed across radii so the column
    # family is stable under radius doubling
    half = 2.0 * (config.r0 if config.r0 is not None
                  else radius_seed(scale, f.degree()))
    for qx, qy in find_planar_critical_points(f, half, config):
        d = math.hypot(qx - a1, qy - a2)
        if d >= r - config.dedup_tol * r:
            continue
        z = math.sqrt(max(r * r - d * d, 0.0))
        kind, eigs = _planar_kind(f, qx, qy, config.hess_tol)
        for zz in (z, -z):
            out.append(CriticalPoint(
                position=np.array([qx, qy, float(a.a3) + zz]), radius=r,
                value=f.eval_float(qx, qy), kind=kind, in_singular_set=True,
                tangent_hessian_eigenvalues=eigs, planar_base=(qx, qy)))

    out = _dedup_points(out, config.dedup_tol * r)
    out.sort(key=lambda p: (p.in_singular_set, p.theta if p.theta is not None else -1.0,
                            tuple(p.position)))
    return out


def _dedup_points(points: List[CriticalPoint], tol: float) -> List[CriticalPoint]:
    kept: List[CriticalPoint] = []
    for p in points:
        if any(np.linalg.norm(p.position - q.position) < tol for q in kept):
            continue
        kept.append(p)
    return kept


# ---------------------------------------------------------------------------
# mesh route


def _tangential_field(f: Polynomial, a: Center, r: float,
                      pts: np.ndarray) -> np.ndarray:
    gx, gy, gz = f.gradient()
    G = np.stack([gx.eval_many(pts), gy.eval_many(pts), gz.eval_many(pts)], axis=1)
    N = (pts - np.array(a.as_float())[None, :]) / r
    return G - (np.sum(G * N, axis=1))[:, None] * N


def _candidate_faces(mesh: SphereMesh, X: np.ndarray) -> List[int]:
    """Faces whose three field vectors do not fit in an open half-plane."""
    faces = mesh.faces
    V = mesh.vertices
    c = V[faces].mean(axis=1)
    n = c - np.array(mesh.center.as_float())[None, :]
    n /= np.linalg.norm(n, axis=1)[:, None]
    ref = np.zeros_like(n)
    ref[:, 0] = 1.0
    swap = np.abs(n[:, 0]) > 0.9
    ref[swap] = 0.0
    ref[swap, 1] = 1.0
    t1 = np.cross(n, ref)
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(n, t1)

    Xf = X[faces]                       # (m, 3, 3)
    u = np.einsum("mvk,mk->mv", Xf, t1)
    v = np.einsum("mvk,mk->mv", Xf, t2)
    ang = np.arctan2(v, u)              # (m, 3)
    ang.sort(axis=1)
    gaps = np.stack([ang[:, 1] - ang[:, 0],
                     ang[:, 2] - ang[:, 1],
                     2 * np.pi - (ang[:, 2] - ang[:, 0])], axis=1)
    spread = gaps.max(axis=1) < np.pi
    mags = np.linalg.norm(Xf, axis=2).min(axis=1)
    weak = mags < 1e-6 * (np.median(np.linalg.norm(X, axis=1)) + 1e-300)
    return sorted(np.nonzero(spread | weak)[0].tolist())


def _newton_on_sphere(f: Polynomial, a: Center, r: float, x0: np.ndarray,
                      minors: List[Polynomial], tol: float) -> Optional[np.ndarray]:
    af = np.array(a.as_float())
    grads = [m.gradient() for m in minors]

    def best_two(x):
        norms = []
        for g3 in grads:
            v = np.array([g3[0].eval_float(*x), g3[1].eval_float(*x), g3[2].eval_float(*x)])
            norms.append(np.linalg.norm(v))
        order = np.argsort(norms)[::-1]
        return [int(order[0]), int(order[1])]

    x = x0.astype(float).copy()
    sel = best_two(x)
    for _ in range(60):
        F = np.array([minors[sel[0]].eval_float(*x),
                      minors[sel[1]].eval_float(*x),
                      float(np.dot(x - af, x - af) - r * r)])
        J = np.zeros((3, 3))
        for row, mi in enumerate(sel):
            for col in range(3):
                J[row, col] = grads[mi][col].eval_float(*x)
        J[2] = 2 * (x - af)
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return None
        ns = np.linalg.norm(step)
        if ns > 0.5 * r:
            step *= 0.5 * r / ns
        x = x - step
        if np.linalg.norm(x - af) > 10 * r:
            return None
        if ns < tol * r:
            return x
    return None


def _mesh_sphere_zeros(f: Polynomial, a: Center, r: float,
                       config: AnalysisConfig, depth: Optional[int] = None) -> List[CriticalPoint]:
    depth = config.mesh_depth if depth is None else depth
    mesh = build_mesh(a, r, depth, config.max_mesh_depth)
    X = _tangential_field(f, a, r, mesh.vertices)
    cands = _candidate_faces(mesh, X)
    minors = list(f.polar_minors(a))
    af = np.array(a.as_float())
    gx, gy, gz = f.gradient()
    H = f.hessian()
    scale = f.coeff_scale()
    grad_tol = config.grad_tol_factor * (1.0 + scale)

    raw: List[np.ndarray] = []
    for fi in cands:
        x0 = mesh.vertices[mesh.faces[fi]].mean(axis=0)
        x0 = af + (x0 - af) * (r / np.linalg.norm(x0 - af))
        sol = _newton_on_sphere(f, a, r, x0, minors, config.newton_tol)
        if sol is not None:
            raw.append(sol)

    out: List[CriticalPoint] = []
    for x in raw:
        if any(np.linalg.norm(x - p.position) < config.dedup_tol * r for p in out):
            continue
        n = (x - af) / r
        G = np.array([gx.eval_float(*x), gy.eval_float(*x), gz.eval_float(*x)])
        tang = G - np.dot(G, n) * n
        if np.linalg.norm(tang) > 1e-6 * (1 + np.linalg.norm(G)):
            continue
        ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        t1 = np.cross(n, ref)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        Hm = np.array([[H[i][j].eval_float(*x) for j in range(3)] for i in range(3)])
        kappa = np.dot(G, n) / r
        Hs = np.array([
            [t1 @ Hm @ t1 - kappa, t1 @ Hm @ t2],
            [t1 @ Hm @ t2, t2 @ Hm @ t2 - kappa],
        ])
        e1, e2 = np.linalg.eigvalsh(Hs)
        mag = (sum(_float_mag(H[i][j], *x) for i in range(3) for j in range(3))
               + sum(_float_mag(g, *x) for g in (gx, gy, gz)) / r)
        floor = max(64 * _EPS * mag, config.hess_tol)
        if min(abs(e1), abs(e2)) < floor:
            kind = KIND_DEGENERATE
        elif e1 > 0:
            kind = KIND_MIN
        elif e2 < 0:
            kind = KIND_MAX
        else:
            kind = KIND_SADDLE
        out.append(CriticalPoint(
            position=x, radius=r, value=f.eval_float(*x), kind=kind,
            in_singular_set=bool(np.linalg.norm(G) < grad_tol),
            tangent_hessian_eigenvalues=(float(e1), float(e2))))
    out.sort(key=lambda p: tuple(np.round(p.position, 9)))
    return out


def find_sphere_zeros(f: Polynomial, a: Center, r: float,
                      config: Optional[AnalysisConfig] = None,
                      depth: Optional[int] = None) -> List[CriticalPoint]:
    """All zeros of the tangential gradient field on the sphere of
    radius r around a, classified. Completeness is certified separately
    by the index audit."""
    config = config or AnalysisConfig()
    if f.is_z_free():
        return _plane_sphere_zeros(f, a, r, config)
    return _mesh_sphere_zeros(f, a, r, config, depth)


# ---------------------------------------------------------------------------
# radius stabilization


def _match_zeros(prev: List[CriticalPoint], cur: List[CriticalPoint],
                 a: Center, r_prev: float, r_cur: float) -> Optional[List[Tuple[int, int]]]:
    """Injective nearest match of outward-projected zeros; None if any
    projected point has no partner within the angular bound."""
    if len(prev) != len(cur):
        return None
    if not prev:
        return []

    if all(p.theta is not None for p in prev) and all(c.theta is not None for c in cur):
        # equator zeros cannot exchange cyclic order without a degenerate
        # tangency in between, so the correspondence is an order rotation
        n = len(prev)
        pi2 = 2.0 * math.pi

        def angdist(u, v):
            d = abs(u - v) % pi2
            return min(d, pi2 - d)

        pth = [p.theta for p in prev]   # both lists arrive theta-sorted
        cth = [c.theta for c in cur]
        best, best_off = None, None
        for off in range(n):
            cost = sum(angdist(pth[i], cth[(i + off) % n]) for i in range(n))
            if best is None or cost < best:
                best, best_off = cost, off
        pairs = [(i, (i + best_off) % n) for i in range(n)]
        if max(angdist(pth[i], cth[j]) for i, j in pairs) > 0.45:
            return None
        return sorted(pairs)

    from scipy.optimize import linear_sum_assignment

    af = np.array(a.as_float())
    proj = af + (np.array([p.position for p in prev]) - af) * (r_cur / r_prev)
    cpos = np.array([c.position for c in cur])
    D = np.linalg.norm(cpos[None, :, :] - proj[:, None, :], axis=2)
    rows, cols = linear_sum_assignment(D)
    if float(D[rows, cols].max()) > 0.45 * r_cur:
        return None
    return sorted(zip(rows.tolist(), cols.tolist()))


def choose_radius(f: Polynomial, a: Center, candidates: Sequence[float],
                  R0: Optional[float] = None,
                  config: Optional[AnalysisConfig] = None) -> Tuple[float, RadiusDiagnostics]:
    """Smallest doubling radius whose zero structure is stable.

    Stability means: the non-singular zero count is constant over three
    consecutive doublings, zeros match injectively with identical kinds
    across those radii, no matched zero's value crosses a candidate
    level, and no candidate level set is tangent to the sphere.
    """
    config = config or AnalysisConfig()
    if R0 is None:
        R0 = config.r0 if config.r0 is not None else radius_seed(f.coeff_scale(), f.degree())
    diag = RadiusDiagnostics()
    need = config.stable_doublings
    radii: List[float] = []
    zero_sets: List[List[CriticalPoint]] = []
    r = float(R0)
    for k in range(config.max_doublings + 1):
        zeros = find_sphere_zeros(f, a, r, config)
        nonsing = [z for z in zeros if not z.in_singular_set]
        radii.append(r)
        zero_sets.append(zeros)
        diag.branch_count_history.append((r, len(nonsing)))

        if len(zero_sets) >= need:
            window = list(range(len(zero_sets) - need, len(zero_sets)))
            ok = True
            # (a)+(b): constant count, kind-preserving injective match
            for w0, w1 in zip(window[:-1], window[1:]):
                p_ns = [z for z in zero_sets[w0] if not z.in_singular_set]
                c_ns = [z for z in zero_sets[w1] if not z.in_singular_set]
                m = _match_zeros(p_ns, c_ns, a, radii[w0], radii[w1])
                if m is None or any(p_ns[i].kind != c_ns[j].kind for i, j in m):
                    ok = False
                    break
            # (c): no zero value crosses a candidate within the window
            if ok and candidates:
                for w0, w1 in zip(window[:-1], window[1:]):
                    p_ns = [z for z in zero_sets[w0] if not z.in_singular_set]
                    c_ns = [z for z in zero_sets[w1] if not z.in_singular_set]
                    m = _match_zeros(p_ns, c_ns, a, radii[w0], radii[w1]) or []
                    for i, j in m:
                        for lam in candidates:
                            v0 = p_ns[i].value - lam
                            v1 = c_ns[j].value - lam
                            if v0 * v1 < 0:
                                ok = False
                                diag.value_interval_disjointness = False
                if not ok:
                    diag.messages.append("a zero value crossed a candidate level")
            # (d): candidate levels transverse to the chosen sphere
            if ok and candidates:
                base = zero_sets[window[0]]
                tol = config.cluster_tol
                for z in base:
                    for lam in candidates:
                        if abs(z.value - lam) < tol * (1 + abs(lam)):
                            ok = False
                            diag.level_transversality = False
                            diag.messages.append(
                                "candidate level tangent to the sphere")
            if ok:
                diag.chosen_R = radii[window[0]]
                diag.property_P_stable = True
                return radii[window[0]], diag
        r *= 2.0
    raise ResourceCapError(
        f"no stable radius within {config.max_doublings} doublings from {R0}",
        diagnostics=diag)
