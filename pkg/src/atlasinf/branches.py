"""Tracing tangency zeros outward and estimating their value limits.

Each nonsingular zero of the tangential field seeds a branch that is
followed through geometrically growing radii with a predict-correct
loop. The value sequence along a branch either diverges or settles
toward a finite level; the finite levels, clustered, are the candidate
levels the rest of the analysis classifies. Zeros inside the singular
set sit on vertical lines, carry a constant value, and are kept for
bookkeeping but never generate candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import AnalysisConfig
from .critical import (_EPS, CriticalPoint, _equator_zeros, _float_mag,
                       _mesh_sphere_zeros, _newton_on_sphere)
from .errors import GenericityError
from .poly import Center, Polynomial


@dataclass
class TangencyBranch:
    id: int
    seed: CriticalPoint
    radii: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    positions: List[Tuple[float, float, float]] = field(default_factory=list)
    limit: Optional[float] = None
    limit_error: float = math.inf
    diverges: bool = False
    converged: bool = False
    alpha: Optional[float] = None
    truncated: bool = False
    is_singular: bool = False

    @property
    def value_at_base(self) -> float:
        return self.values[0] if self.values else math.nan

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.seed.kind,
            "in_singular_set": self.is_singular,
            "radii": [round(r, 10) for r in self.radii],
            "values": self.values,
            "positions": [list(p) for p in self.positions],
            "limit": self.limit,
            "limit_error": self.limit_error if math.isfinite(self.limit_error) else None,
            "diverges": self.diverges,
            "converged": self.converged,
            "alpha": self.alpha,
            "truncated": self.truncated,
        }


@dataclass
class Candidate:
    value: float
    branch_ids: List[int]
    spread: float = 0.0
    collides_with_K0: bool = False
    k0_value: Optional[float] = None


# ---------------------------------------------------------------------------
# limit estimation


def estimate_limit(values: Sequence[float],
                   growth: float) -> Tuple[Optional[float], float, bool, Optional[float]]:
    """Extrapolate a value sequence sampled at radii r0*growth^k.

    Returns (limit, error, converged, alpha). The tail differences are
    fit to a geometric decay, the tail is summed in closed form, and an
    Aitken estimate from the last three values cross-checks it; the two
    estimators' disagreement is the reported error. A ratio at or above
    one means the sequence is not settling.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 4 or not np.all(np.isfinite(v)):
        return None, math.inf, False, None
    d = np.diff(v)
    vscale = 1.0 + float(np.max(np.abs(v[-3:])))
    tail = d[-max(4, n // 3):]
    if np.all(np.abs(tail) < 1e-13 * vscale):
        return float(v[-1]), 1e-13 * vscale, True, None

    mags = np.abs(tail)
    mags[mags < 1e-300] = 1e-300
    k = np.arange(mags.size, dtype=float)
    slope, intercept = np.polyfit(k, np.log(mags), 1)
    rho = math.exp(slope)
    if rho >= 0.97:
        return None, math.inf, False, None
    alpha = -math.log(rho) / math.log(growth)
    lam = float(v[-1] + d[-1] * rho / (1.0 - rho))

    a0, a1, a2 = v[-3], v[-2], v[-1]
    denom = (a2 - a1) - (a1 - a0)
    if abs(denom) > 1e-300:
        lam_aitken = float(a2 - (a2 - a1) ** 2 / denom)
        err = abs(lam - lam_aitken)
    else:
        err = abs(float(d[-1]))
    err += 1e-12 * vscale
    return lam, err, True, alpha


# ---------------------------------------------------------------------------
# correctors


def _plane_correct(f: Polynomial, a: Center, r: float, theta0: float,
                   e1_sign: int) -> Optional[Tuple[float, int]]:
    """Newton in the angle at fixed radius; the derivative of the field
    along the equator is r^2 times the first tangent eigenvalue. The
    eigenvalue sign is tracked as a branch identity check, but only when
    its magnitude clears the evaluation noise."""
    gx, gy, _ = f.gradient()
    H = f.hessian()
    a1, a2 = float(a.a1), float(a.a2)

    def d_and_e1(t: float) -> Tuple[float, float]:
        x = a1 + r * math.cos(t)
        y = a2 + r * math.sin(t)
        gxv = gx.eval_float(x, y)
        gyv = gy.eval_float(x, y)
        D = -gxv * r * math.sin(t) + gyv * r * math.cos(t)
        kappa = (gxv * (x - a1) + gyv * (y - a2)) / (r * r)
        u0, u1 = -math.sin(t), math.cos(t)
        huu = (H[0][0].eval_float(x, y) * u0 * u0
               + 2 * H[0][1].eval_float(x, y) * u0 * u1
               + H[1][1].eval_float(x, y) * u1 * u1)
        return D, huu - kappa

    t = theta0
    for _ in range(60):
        D, e1 = d_and_e1(t)
        if e1 == 0.0:
            return None
        step = D / (r * r * e1)
        if abs(step) > 0.15:
            step = math.copysign(0.15, step)
        t -= step
        if abs(t - theta0) > 0.3:
            return None
        if abs(step) < 1e-14:
            break
    _, e1 = d_and_e1(t)
    x = a1 + r * math.cos(t)
    y = a2 + r * math.sin(t)
    u0, u1 = -math.sin(t), math.cos(t)
    floor = 64 * _EPS * (
        _float_mag(H[0][0], x, y) * u0 * u0
        + 2 * _float_mag(H[0][1], x, y) * abs(u0 * u1)
        + _float_mag(H[1][1], x, y) * u1 * u1
        + (_float_mag(gx, x, y) * abs(x - a1)
           + _float_mag(gy, x, y) * abs(y - a2)) / (r * r))
    if abs(e1) < floor:
        return t, e1_sign   # sign unresolved at this precision, keep the old
    new_sign = 1 if e1 > 0 else -1
    if e1_sign != 0 and new_sign != e1_sign:
        return None
    return t, new_sign


def _local_zeros(f: Polynomial, a: Center, r: float, lo: float, hi: float,
                 samples: int = 4096) -> List[float]:
    """Sign-change zeros of the equator field on one angular window."""
    gx, gy, _ = f.gradient()
    a1, a2 = float(a.a1), float(a.a2)
    ths = np.linspace(lo, hi, samples)
    x = a1 + r * np.cos(ths)
    y = a2 + r * np.sin(ths)
    pts = np.stack([x, y], axis=1)
    dv = (-gx.eval_many(pts) * r * np.sin(ths)
          + gy.eval_many(pts) * r * np.cos(ths))
    s = np.sign(dv)
    s[s == 0] = 1
    out = []
    for i in np.nonzero(s[:-1] != s[1:])[0]:
        t0, t1 = float(ths[i]), float(ths[i + 1])
        v0 = float(dv[i])
        for _ in range(60):
            tm = 0.5 * (t0 + t1)
            xm = a1 + r * math.cos(tm)
            ym = a2 + r * math.sin(tm)
            vm = (-gx.eval_float(xm, ym) * r * math.sin(tm)
                  + gy.eval_float(xm, ym) * r * math.cos(tm))
            if vm == 0.0:
                break
            if (vm > 0) == (v0 > 0):
                t0 = tm
            else:
                t1 = tm
            if t1 - t0 < 1e-15:
                break
        out.append(0.5 * (t0 + t1))
    return out


def _pick_by_sign(f: Polynomial, a: Center, r: float, zeros: List[float],
                  theta0: float, want_sign: int,
                  window: float) -> Optional[float]:
    pi2 = 2.0 * math.pi

    def adist(z):
        d = abs(z - theta0) % pi2
        return min(d, pi2 - d)

    for z in sorted(zeros, key=adist):
        if adist(z) > window:
            return None
        if want_sign == 0:
            return z
        res = _plane_correct(f, a, r, z, 0)
        if res is not None and res[1] in (want_sign, 0):
            return z
    return None


def _plane_rescan(f: Polynomial, a: Center, r: float, theta0: float,
                  config: AnalysisConfig, want_sign: int) -> Optional[float]:
    """Find the continuing zero near an angle where Newton lost its
    footing: first a dense local window scan, then a full equator scan.
    Neighboring zeros alternate derivative sign, so requiring the
    branch's sign rejects hops onto an adjacent branch."""
    local = _local_zeros(f, a, r, theta0 - 0.05, theta0 + 0.05)
    z = _pick_by_sign(f, a, r, local, theta0, want_sign, 0.05)
    if z is not None:
        return z
    zeros = _equator_zeros(f, a, r, config)
    return _pick_by_sign(f, a, r, zeros, theta0, want_sign, 0.3)


# ---------------------------------------------------------------------------
# tracing


def trace_branch(f: Polynomial, a: Center, seed: CriticalPoint,
                 branch_id: int = 0,
                 config: Optional[AnalysisConfig] = None) -> TangencyBranch:
    """Follow one tangency zero from its seed radius out to the radius
    cap, recording positions and values, then classify the value tail."""
    config = config or AnalysisConfig()
    br = TangencyBranch(id=branch_id, seed=seed,
                        is_singular=seed.in_singular_set)
    R = seed.radius
    r_max = config.r_max_factor * R
    threshold = config.divergence_threshold

    if seed.in_singular_set and seed.planar_base is not None:
        # vertical line over a planar critical point: value is constant
        qx, qy = seed.planar_base
        a1, a2 = float(a.a1), float(a.a2)
        d2 = (qx - a1) ** 2 + (qy - a2) ** 2
        zsign = 1.0 if seed.position[2] >= float(a.a3) else -1.0
        r = R
        while r <= r_max * (1 + 1e-9):
            z = float(a.a3) + zsign * math.sqrt(max(r * r - d2, 0.0))
            br.radii.append(r)
            br.values.append(seed.value)
            br.positions.append((qx, qy, z))
            r *= config.growth
        br.limit = seed.value
        br.limit_error = 0.0
        br.converged = True
        return br

    if f.is_z_free():
        _trace_plane(f, a, seed, br, config)
    else:
        _trace_mesh(f, a, seed, br, config)

    vals = br.values
    if any(not math.isfinite(v) or abs(v) > threshold for v in vals):
        cut = next(i for i, v in enumerate(vals)
                   if not math.isfinite(v) or abs(v) > threshold)
        del br.radii[cut + 1:], br.values[cut + 1:], br.positions[cut + 1:]
        br.diverges = True
        return br

    limit, err, conv, alpha = estimate_limit(vals, config.growth)
    if conv:
        br.limit = limit
        br.limit_error = err
        br.converged = True
        br.alpha = alpha
        return br

    # not settling: divergence shows as non-shrinking steps under a
    # growing magnitude, anything else stays unresolved
    if len(vals) >= 6:
        d = np.abs(np.diff(vals[-6:]))
        m = np.abs(vals[-6:])
        if np.all(d[1:] >= 0.5 * d[:-1]) and m[-1] >= m[0] and d[-1] > 1e-10 * (1 + m[-1]):
            br.diverges = True
    return br


def _branch_value(f: Polynomial, x: float, y: float, z: float = 0.0) -> float:
    """f at a branch point, escalating to high precision when the float
    result sits inside the cancellation noise of the monomial sums."""
    v = f.eval_float(x, y) if f.is_z_free() else f.eval_float(x, y, z)
    mag = _float_mag(f, x, y, z)
    if abs(v) >= 64 * _EPS * mag:
        return v
    import mpmath as mp
    with mp.workdps(50):
        return float(f.eval_mp(mp.mpf(x), mp.mpf(y), mp.mpf(z)))


def _trace_plane(f: Polynomial, a: Center, seed: CriticalPoint,
                 br: TangencyBranch, config: AnalysisConfig) -> None:
    a1, a2 = float(a.a1), float(a.a2)
    theta = float(seed.theta)
    prev_theta = None
    e1_sign = 0
    r = seed.radius
    r_max = config.r_max_factor * seed.radius
    while r <= r_max * (1 + 1e-9):
        # linear extrapolation of the angle drift; steps are uniform in
        # log radius so the first difference is the natural predictor
        guess = theta if prev_theta is None else theta + (theta - prev_theta)
        res = _plane_correct(f, a, r, guess, e1_sign)
        if res is not None and prev_theta is not None:
            drift_bound = max(4.0 * abs(theta - prev_theta), 1e-3)
            if abs(res[0] - guess) > drift_bound:
                res = None   # moved far off the branch trend: suspect a hop
        if res is None:
            t2 = _plane_rescan(f, a, r, guess, config, e1_sign)
            if t2 is None:
                br.truncated = True
                return
            res = _plane_correct(f, a, r, t2, e1_sign)
            if res is None:
                br.truncated = True
                return
        prev_theta, (theta, e1_sign) = theta, res
        x = a1 + r * math.cos(theta)
        y = a2 + r * math.sin(theta)
        br.radii.append(r)
        br.values.append(_branch_value(f, x, y))
        br.positions.append((x, y, float(a.a3)))
        if abs(br.values[-1]) > config.divergence_threshold:
            return
        r *= config.growth


def _trace_mesh(f: Polynomial, a: Center, seed: CriticalPoint,
                br: TangencyBranch, config: AnalysisConfig) -> None:
    af = np.array(a.as_float())
    minors = list(f.polar_minors(a))
    pos = seed.position.astype(float)
    r = seed.radius
    r_max = config.r_max_factor * seed.radius
    while r <= r_max * (1 + 1e-9):
        guess = af + (pos - af) * (r / np.linalg.norm(pos - af))
        sol = _newton_on_sphere(f, a, r, guess, minors, config.newton_tol)
        ok = sol is not None and np.linalg.norm(sol - guess) <= 0.3 * r
        if not ok:
            rescan = _mesh_sphere_zeros(f, a, r, config)
            sol = None
            for z in rescan:
                if np.linalg.norm(z.position - guess) <= 0.3 * r:
                    if sol is None or (np.linalg.norm(z.position - guess)
                                       < np.linalg.norm(sol - guess)):
                        sol = z.position
            if sol is None:
                br.truncated = True
                return
        pos = sol
        br.radii.append(r)
        br.values.append(_branch_value(f, *pos))
        br.positions.append((float(pos[0]), float(pos[1]), float(pos[2])))
        if abs(br.values[-1]) > config.divergence_threshold:
            return
        r *= config.growth


def trace_all(f: Polynomial, a: Center, seeds: Sequence[CriticalPoint],
              config: Optional[AnalysisConfig] = None) -> List[TangencyBranch]:
    config = config or AnalysisConfig()
    return [trace_branch(f, a, s, i, config) for i, s in enumerate(seeds)]


# ---------------------------------------------------------------------------
# candidate collection


def collect_candidates(branches: Sequence[TangencyBranch],
                       k0_values: Sequence[float] = (),
                       config: Optional[AnalysisConfig] = None) -> List[Candidate]:
    """Cluster the finite limits of nonsingular branches into candidate
    levels. Clusters closer together than three cluster widths cannot be
    told apart reliably and abort the run; a candidate sitting on a
    critical value of the map is flagged and left unclassified later.
    """
    config = config or AnalysisConfig()
    finite = [b for b in branches
              if b.converged and not b.is_singular and b.limit is not None]
    finite.sort(key=lambda b: b.limit)

    clusters: List[List[TangencyBranch]] = []
    for b in finite:
        tol = config.cluster_tol * (1.0 + abs(b.limit))
        if clusters and abs(b.limit - clusters[-1][-1].limit) <= tol:
            clusters[-1].append(b)
        else:
            clusters.append([b])

    out: List[Candidate] = []
    for cl in clusters:
        lams = [b.limit for b in cl]
        val = float(np.mean(lams))
        out.append(Candidate(value=val, branch_ids=[b.id for b in cl],
                             spread=max(lams) - min(lams)))

    for c1, c2 in zip(out, out[1:]):
        tol = config.cluster_tol * (1.0 + max(abs(c1.value), abs(c2.value)))
        if abs(c2.value - c1.value) < 3.0 * tol:
            raise GenericityError(
                f"candidate levels {c1.value:.6g} and {c2.value:.6g} are too "
                "close to separate at the configured cluster width")

    for c in out:
        tol = config.cluster_tol * (1.0 + abs(c.value))
        for k0 in k0_values:
            if abs(c.value - k0) < tol:
                c.collides_with_K0 = True
                c.k0_value = float(k0)
    return out
