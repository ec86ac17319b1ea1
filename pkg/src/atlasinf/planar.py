"""Exact scanline analysis of level curves of two-variable polynomials.

For inputs with no third-variable dependence every sphere-level question
reduces to plane-curve structure inside (or around) the disk cut out by
the sphere. This module computes that structure exactly enough to be
trusted for counting: per-column real roots of the exact rational column
polynomial, sign zones glued by interval overlap, curve components glued
by shared zone walls, and the Euler bookkeeping for fiber pieces.

Double precision alone cannot be trusted here: some inputs have sign
zones ~1e-4 wide at coordinate scale ~10, and the column root pairs
bounding them come out of a companion matrix as a complex pair. Each
marginal pair is settled by locating the nearby extremum of the column
polynomial and evaluating there with exact rational arithmetic; the
rare unresolvable clusters fall back to a high-precision full solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .poly import Center, Polynomial

_IMAG_KEEP = 1e-7       # |imag| below this (relative) is treated as real
_IMAG_SUSPECT = 3e-4    # |imag| below this (relative) triggers exact re-solve
_MP_DPS = 30


# ---------------------------------------------------------------------------
# univariate root finding


def _float_roots(coeffs: Sequence[float]) -> Tuple[np.ndarray, bool]:
    """Roots of an ascending-coefficient float polynomial.

    Returns (complex roots, suspect) where suspect means a root pair sat
    close enough to the real axis that double precision may have
    misclassified it.
    """
    c = np.asarray(coeffs, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return np.zeros(0, dtype=complex), False
    c = c / scale
    # trim trailing (leading in degree) near-zero coefficients
    deg = len(c) - 1
    while deg > 0 and abs(c[deg]) < 1e-13:
        deg -= 1
    c = c[: deg + 1]
    if deg == 0:
        return np.zeros(0, dtype=complex), False
    r = np.polynomial.polynomial.polyroots(c)
    im = np.abs(r.imag)
    rel = 1.0 + np.abs(r.real)
    suspect = bool(np.any((im > _IMAG_KEEP * rel) & (im < _IMAG_SUSPECT * rel)))
    return r, suspect


def _mp_real_roots(coeffs: Sequence[Fraction]) -> List[float]:
    """High-precision real roots of an exact rational polynomial."""
    import mpmath as mp

    cs = list(coeffs)
    while cs and cs[-1] == 0:
        cs.pop()
    if len(cs) <= 1:
        return []
    with mp.workdps(_MP_DPS):
        mpc = [mp.mpf(c.numerator) / mp.mpf(c.denominator) for c in reversed(cs)]
        try:
            roots = mp.polyroots(mpc, maxsteps=120, extraprec=80)
        except mp.libmp.libhyper.NoConvergence:
            return []
        out = []
        for r in roots:
            if abs(mp.im(r)) < mp.mpf(10) ** (-(_MP_DPS - 10)) * (1 + abs(mp.re(r))):
                out.append(float(mp.re(r)))
    return sorted(out)


def _resolve_pair(exact_coeffs: Sequence[Fraction], re: float, im: float) -> Optional[List[float]]:
    """Settle one near-real conjugate pair of a column polynomial.

    Near the pair the polynomial is a parabola a*(y-y0)^2 + c. The sign
    of c, taken with exact arithmetic at the extremum y0, decides whether
    the pair is two real roots or none. Returns the real roots, or None
    when the local picture is not a clean parabola (caller re-solves).
    """
    cs = [float(c) for c in exact_coeffs]
    deg = len(cs) - 1
    if deg < 2:
        return None
    d1 = [j * cs[j] for j in range(1, deg + 1)]
    d2 = [j * d1[j] for j in range(1, deg)]

    def horner(c, y):
        v = 0.0
        for ck in reversed(c):
            v = v * y + ck
        return v

    rel = 1.0 + abs(re)
    window = 10.0 * im + 1e-9 * rel
    y0 = re
    for _ in range(40):
        g1 = horner(d1, y0)
        g2 = horner(d2, y0)
        if g2 == 0.0:
            return None
        step = g1 / g2
        y0 -= step
        if abs(y0 - re) > 8.0 * window + 1e-6 * rel:
            return None
        if abs(step) < 1e-14 * rel:
            break
    else:
        return None
    a = horner(d2, y0) / 2.0
    if a == 0.0:
        return None
    yq = Fraction(y0).limit_denominator(10**15)
    c = Fraction(0)
    for ck in reversed(exact_coeffs):
        c = c * yq + ck
    if c == 0:
        return [y0, y0]
    if (c > 0) == (a > 0):
        return []
    gap = math.sqrt(-float(c) / a)
    return [y0 - gap, y0 + gap]


def real_roots(float_coeffs: Sequence[float], exact_coeffs=None) -> List[float]:
    """Sorted real roots; settles marginal pairs with exact arithmetic."""
    r, suspect = _float_roots(float_coeffs)
    if suspect and exact_coeffs is not None:
        return _roots_with_rescue(r, exact_coeffs)
    keep = np.abs(r.imag) <= _IMAG_KEEP * (1.0 + np.abs(r.real))
    return sorted(float(v) for v in r.real[keep])


def _roots_with_rescue(r: np.ndarray, exact_coeffs: Sequence[Fraction]) -> List[float]:
    """Classify each suspect conjugate pair; full re-solve only on clusters."""
    rel = 1.0 + np.abs(r.real)
    im = np.abs(r.imag)
    suspect = (im > _IMAG_KEEP * rel) & (im < _IMAG_SUSPECT * rel)
    out = [float(v) for v in r.real[im <= _IMAG_KEEP * rel]]
    done = set()
    for idx in np.nonzero(suspect)[0]:
        if idx in done or r.imag[idx] <= 0:
            continue
        re_v, im_v = float(r.real[idx]), float(r.imag[idx])
        mate = None
        for jdx in np.nonzero(suspect)[0]:
            if jdx != idx and jdx not in done and abs(r.real[jdx] - re_v) < 1e-9 * (1 + abs(re_v)) and r.imag[jdx] < 0:
                mate = jdx
                break
        if mate is None:
            return _mp_real_roots(exact_coeffs)
        # another root crowding the pair breaks the parabola model
        win = 10.0 * im_v + 1e-9 * (1.0 + abs(re_v))
        crowd = np.sum(np.abs(r - complex(re_v, 0.0)) < 8.0 * win + 1e-6)
        if crowd > 2:
            return _mp_real_roots(exact_coeffs)
        got = _resolve_pair(exact_coeffs, re_v, im_v)
        if got is None:
            return _mp_real_roots(exact_coeffs)
        out.extend(got)
        done.add(idx)
        done.add(mate)
    return sorted(out)


# ---------------------------------------------------------------------------
# scan structure


@dataclass
class ZoneInfo:
    zone_id: int
    sign: int
    touches_boundary: bool
    sample: Tuple[float, float]
    n_segments: int


@dataclass
class CurveComponent:
    pts: np.ndarray                 # ordered (n, 2) polyline
    closed: bool
    exits_box: bool
    zones: frozenset = frozenset()  # ids of the sign zones this curve borders

    def min_distance(self, center: np.ndarray) -> float:
        if len(self.pts) == 0:
            return math.inf
        d = np.hypot(self.pts[:, 0] - center[0], self.pts[:, 1] - center[1])
        return float(np.min(d))

    def _runs(self, mask: np.ndarray) -> int:
        """Number of maximal True runs, cyclically if the component closes."""
        if not mask.any():
            return 0
        if mask.all():
            return 1
        if self.closed:
            return int(np.count_nonzero(mask & ~np.roll(mask, 1)))
        starts = int(np.count_nonzero(mask[1:] & ~mask[:-1]))
        if mask[0]:
            starts += 1
        return starts

    def chi_piece(self, center: np.ndarray, R: float, Rprime: float) -> int:
        """Euler characteristic of the vertical-cylinder fiber piece.

        The piece is the set of points over this curve lying outside the
        ball of radius R and inside radius Rprime. Collapsing vertical
        intervals gives two copies of the in-Rprime curve glued along its
        outside-the-disk part, so

            chi = 2 * chi(curve within Rprime) - chi(that curve minus the open disk).

        An arc contributes 1 to either chi, a closed oval contributes 0.
        """
        if len(self.pts) == 0:
            return 0
        d = np.hypot(self.pts[:, 0] - center[0], self.pts[:, 1] - center[1])
        inside_Rp = d <= Rprime
        if not inside_Rp.any():
            return 0
        out_mask = inside_Rp & (d > R)
        if self.closed and inside_Rp.all():
            chi_in = 0
            chi_out = 0 if (out_mask.all() or not out_mask.any()) else self._runs(out_mask)
        else:
            chi_in = self._runs(inside_Rp)
            chi_out = self._runs(out_mask)
        return 2 * chi_in - chi_out

    def nearest_point(self, center: np.ndarray) -> Tuple[float, float]:
        d = np.hypot(self.pts[:, 0] - center[0], self.pts[:, 1] - center[1])
        i = int(np.argmin(d))
        return (float(self.pts[i, 0]), float(self.pts[i, 1]))


class _DSU:
    def __init__(self):
        self.parent: Dict[int, int] = {}

    def find(self, a: int) -> int:
        p = self.parent.setdefault(a, a)
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def degenerate_lines(g: Polynomial) -> List[Fraction]:
    """Exact x-values whose whole vertical line lies in the zero set.

    These are common roots of all the y-coefficient polynomials. They are
    fiber content in their own right and act as walls between sign zones.
    """
    degy = g.degree_in(1)
    coeff_polys: List[Polynomial] = []
    for j in range(degy + 1):
        terms = {}
        for (i, jj, k), c in g.terms.items():
            if jj == j:
                terms[(i, 0, 0)] = c
        coeff_polys.append(Polynomial(terms))
    nonzero = [p for p in coeff_polys if not p.is_zero()]
    if not nonzero:
        return []
    base = min(nonzero, key=lambda p: p.degree_in(0))
    float_c = [0.0] * (base.degree_in(0) + 1)
    exact_c = [Fraction(0)] * (base.degree_in(0) + 1)
    for (i, _j, _k), c in base.terms.items():
        float_c[i] = float(c)
        exact_c[i] = c
    out: List[Fraction] = []
    for r in real_roots(float_c, exact_c):
        cand = Fraction(r).limit_denominator(10**6)
        if all(p.evaluate(cand, 0) == 0 for p in coeff_polys):
            out.append(cand)
        elif all(abs(p.eval_float(r, 0.0)) < 1e-9 * (1 + p.coeff_scale()) for p in coeff_polys):
            out.append(Fraction(r))
    return sorted(set(out))


class Scan:
    """Scanline decomposition of {h != 0} within a disk or a box.

    h = g - t is handled exactly: t is converted to a Fraction, so a
    float probe level is honored bit for bit.
    """

    def __init__(
        self,
        g: Polynomial,
        t,
        center: Center,
        radius: Optional[float] = None,
        box: Optional[float] = None,
        columns: int = 1200,
    ):
        if not g.is_z_free():
            raise ValueError("scanline analysis needs a two-variable polynomial")
        self.g = g
        self.t = Fraction(t)
        self.h = g - Polynomial.constant(self.t)
        self.center = center
        self.cf = center.as_float()[:2]
        self.disk_R = radius
        if radius is not None and box is None:
            self.x_lo = float(self.cf[0]) - radius
            self.x_hi = float(self.cf[0]) + radius
            self.y_half = radius
            self.clip_disk = True
        else:
            b = box if box is not None else (radius or 10.0)
            self.x_lo, self.x_hi = float(self.cf[0]) - b, float(self.cf[0]) + b
            self.y_half = b
            self.clip_disk = False
        self.ncol = columns
        self.walls = [w for w in degenerate_lines(g) if self.x_lo < float(w) < self.x_hi]
        self._build()

    # -- column machinery --

    def _coeff_matrix(self, xs: np.ndarray) -> np.ndarray:
        """Float y-coefficients of h at each column, vectorized over x."""
        degy = self.h.degree_in(1)
        out = np.zeros((len(xs), degy + 1))
        for (i, j, _k), c in self.h.terms.items():
            out[:, j] += float(c) * xs**i
        return out

    def _exact_column(self, x: Fraction) -> List[Fraction]:
        return self.h.column(x)

    def _column_roots(self, x: Fraction, float_coeffs=None) -> List[float]:
        if float_coeffs is None:
            float_coeffs = [float(c) for c in self._exact_column(x)]
        r, suspect = _float_roots(float_coeffs)
        if suspect:
            roots = _roots_with_rescue(r, self._exact_column(x))
        else:
            keep = np.abs(r.imag) <= _IMAG_KEEP * (1.0 + np.abs(r.real))
            roots = sorted(float(v) for v in r.real[keep])
        lo, hi = self._y_range(float(x))
        return [y for y in roots if lo - 1e-12 <= y <= hi + 1e-12]

    def _y_range(self, xf: float) -> Tuple[float, float]:
        if self.clip_disk:
            dx = xf - self.cf[0]
            s2 = self.disk_R**2 - dx * dx
            s = math.sqrt(max(s2, 0.0))
            return (self.cf[1] - s, self.cf[1] + s)
        return (self.cf[1] - self.y_half, self.cf[1] + self.y_half)

    def _segment_sign(self, x: Fraction, xf: float, lo: float, hi: float) -> int:
        mid = 0.5 * (lo + hi)
        v = self.h.eval_float(xf, mid)
        if abs(v) > 1e-7 * (1.0 + self.h.coeff_scale()):
            return 1 if v > 0 else -1
        ymid = Fraction(mid).limit_denominator(10**15)
        ev = self.h.evaluate(x, ymid)
        if ev == 0:
            ymid = Fraction(lo + 0.37 * (hi - lo)).limit_denominator(10**15)
            ev = self.h.evaluate(x, ymid)
        return 1 if ev > 0 else (-1 if ev < 0 else 0)

    # -- build --

    def _build(self):
        width = self.x_hi - self.x_lo
        step = Fraction(width).limit_denominator(2**20) / self.ncol
        x0 = Fraction(self.x_lo).limit_denominator(2**20)
        cols: List[Fraction] = []
        eps = step / 997
        for i in range(self.ncol + 1):
            x = x0 + i * step
            if self.clip_disk and not (self.x_lo < float(x) < self.x_hi):
                continue
            for w in self.walls:
                if abs(x - w) < step / 1000:
                    x = x + eps
            cols.append(x)
        self.columns = cols
        self.col_x = np.array([float(c) for c in cols])
        C = self._coeff_matrix(self.col_x)
        self.roots: List[List[float]] = []
        for idx, x in enumerate(cols):
            self.roots.append(self._column_roots(x, float_coeffs=list(C[idx])))
        self._build_segments()
        self._match_zones()

    def _build_segments(self):
        # segments[i] = list of (lo, hi, sign); zone key = (i << 20) | seg_idx
        self.segments: List[List[Tuple[float, float, int]]] = []
        for i, x in enumerate(self.columns):
            xf = self.col_x[i]
            lo, hi = self._y_range(xf)
            if hi <= lo:
                self.segments.append([])
                continue
            cuts = [lo] + [y for y in self.roots[i] if lo < y < hi] + [hi]
            segs = []
            for a, b in zip(cuts[:-1], cuts[1:]):
                if b - a <= 0:
                    continue
                segs.append((a, b, self._segment_sign(x, xf, a, b)))
            self.segments.append(segs)

    def _key(self, col: int, seg: int) -> int:
        return (col << 20) | seg

    def _match_zones(self):
        dsu = _DSU()
        for i in range(len(self.columns)):
            for s in range(len(self.segments[i])):
                dsu.find(self._key(i, s))
        for i in range(len(self.columns) - 1):
            if self._wall_between(i, i + 1):
                continue
            for si, (la, ha, sa) in enumerate(self.segments[i]):
                for sj, (lb, hb, sb) in enumerate(self.segments[i + 1]):
                    if sa == sb and min(ha, hb) - max(la, lb) > 0:
                        dsu.union(self._key(i, si), self._key(i + 1, sj))
        self.dsu = dsu
        self._zones: Dict[int, ZoneInfo] = {}
        best_span: Dict[int, float] = {}
        for i in range(len(self.columns)):
            xf = self.col_x[i]
            ylo, yhi = self._y_range(xf)
            for s, (lo, hi, sign) in enumerate(self.segments[i]):
                z = dsu.find(self._key(i, s))
                touches = False
                if self.clip_disk:
                    # the segment touches the bounding circle when it reaches
                    # the clipped ends of the column
                    touches = (lo <= ylo + 1e-12) or (hi >= yhi - 1e-12)
                else:
                    touches = (lo <= ylo + 1e-12) or (hi >= yhi - 1e-12) or i == 0 or i == len(self.columns) - 1
                info = self._zones.get(z)
                if info is None:
                    info = ZoneInfo(z, sign, touches, (xf, 0.5 * (lo + hi)), 0)
                    self._zones[z] = info
                    best_span[z] = hi - lo
                info.n_segments += 1
                info.touches_boundary = info.touches_boundary or touches
                if hi - lo > best_span[z]:
                    best_span[z] = hi - lo
                    info.sample = (xf, 0.5 * (lo + hi))
        # first and last columns touch the boundary circle too (the clip
        # degenerates to a point there and is not sampled); mark zones on
        # the extreme sampled columns for the disk clip
        if self.clip_disk and self.columns:
            for i in (0, len(self.columns) - 1):
                for s in range(len(self.segments[i])):
                    self._zones[dsu.find(self._key(i, s))].touches_boundary = True

    def _wall_between(self, i: int, j: int) -> bool:
        a, b = self.columns[i], self.columns[j]
        return any(min(a, b) < w < max(a, b) for w in self.walls)

    # -- queries --

    def zones(self) -> List[ZoneInfo]:
        return sorted(self._zones.values(), key=lambda z: (-z.n_segments, z.zone_id))

    def zone_of_point(self, px: float, py: float) -> Optional[int]:
        """Zone id containing a point, resolved on a freshly solved column."""
        x = Fraction(px).limit_denominator(10**12)
        for w in self.walls:
            if x == w:
                x += Fraction(1, 10**9)
        i = int(np.searchsorted(self.col_x, float(x)))
        neighbors = [j for j in (i - 1, i) if 0 <= j < len(self.columns)]
        if not neighbors:
            return None
        roots = self._column_roots(x)
        lo, hi = self._y_range(float(x))
        if not (lo - 1e-12 <= py <= hi + 1e-12):
            return None
        cuts = [lo] + [y for y in roots if lo < y < hi] + [hi]
        seg_idx = None
        for k, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
            if a - 1e-12 <= py <= b + 1e-12:
                seg_idx = k
                a_, b_ = a, b
        if seg_idx is None:
            return None
        sign = self._segment_sign(x, float(x), a_, b_)
        return self._inherit_zone(x, neighbors, a_, b_, sign)

    def _inherit_zone(self, x: Fraction, neighbors, a_: float, b_: float, sign: int) -> Optional[int]:
        """Zone of a fresh segment, by sign and overlap with grid columns."""
        for j in neighbors:
            if any(min(x, self.columns[j]) < w < max(x, self.columns[j]) for w in self.walls):
                continue
            for s, (la, ha, sa) in enumerate(self.segments[j]):
                if sa == sign and min(ha, b_) - max(la, a_) > 0:
                    return self.dsu.find(self._key(j, s))
        return None

    def wall_adjacent_zones(self, w: Fraction) -> set:
        """Zones bordering a degenerate vertical line, one fresh column per side."""
        out = set()
        step = Fraction(self.x_hi - self.x_lo).limit_denominator(2**20) / self.ncol
        delta = step / 1009
        for x in (w - delta, w + delta):
            xf = float(x)
            if not (self.x_lo - 1e-12 <= xf <= self.x_hi + 1e-12):
                continue
            lo, hi = self._y_range(xf)
            if hi <= lo:
                continue
            i = int(np.searchsorted(self.col_x, xf))
            neighbors = [j for j in (i - 1, i) if 0 <= j < len(self.columns)]
            roots = self._column_roots(x)
            cuts = [lo] + [y for y in roots if lo < y < hi] + [hi]
            for a_, b_ in zip(cuts[:-1], cuts[1:]):
                sign = self._segment_sign(x, xf, a_, b_)
                zid = self._inherit_zone(x, neighbors, a_, b_, sign)
                if zid is not None:
                    out.add(zid)
        return out

    def zone_contains_level(self, zone_id: int, level) -> bool:
        """Whether the curve {g = level} passes through the given zone.

        Float column roots are only hints: where the shifted polynomial
        runs below its own evaluation noise, root finders sprinkle
        phantom roots, so every hit is confirmed by an exact sign change
        and sub-noise hits are settled by an exact column re-solve."""
        k = self.g - Polynomial.constant(Fraction(level))
        degy = k.degree_in(1)
        C = np.zeros((len(self.col_x), degy + 1))
        for (i, j, _kk), c in k.terms.items():
            C[:, j] += float(c) * self.col_x**i
        mp_cols: Dict[int, List[float]] = {}
        for i, x in enumerate(self.columns):
            r, suspect = _float_roots(list(C[i]))
            if suspect:
                roots = _roots_with_rescue(r, k.column(x))
            else:
                keep = np.abs(r.imag) <= _IMAG_KEEP * (1.0 + np.abs(r.real))
                roots = sorted(float(v) for v in r.real[keep])
            for s, (lo, hi, _sgn) in enumerate(self.segments[i]):
                if self.dsu.find(self._key(i, s)) != zone_id:
                    continue
                for y in roots:
                    if lo + 1e-12 < y < hi - 1e-12:
                        if self._crossing_confirmed(k, C[i], i, x, lo, hi, y, mp_cols):
                            return True
        return False

    def _crossing_confirmed(self, k: Polynomial, col_coeffs: np.ndarray,
                            i: int, x: Fraction, lo: float, hi: float,
                            y: float, mp_cols: Dict[int, List[float]]) -> bool:
        """Certify a float root hint with exact arithmetic.

        Genuine transversal crossings show an exact sign change in a
        shrinking bracket around the hint. If instead the polynomial
        holds one sign at a magnitude below the column's float noise
        floor, the hint came from noise and only an exact re-solve of
        the column can still find a real crossing."""
        width = hi - lo
        best = math.inf
        for w in (width / 8, width / 64, width / 512):
            vals = []
            for p in (y - w, y + w):
                p = min(max(p, lo + 1e-6 * width), hi - 1e-6 * width)
                ev = k.evaluate(x, Fraction(p).limit_denominator(10**15))
                if ev == 0:
                    return True
                vals.append(ev)
            if (vals[0] > 0) != (vals[1] > 0):
                return True
            best = min(best, float(abs(vals[0])), float(abs(vals[1])))
        ay = max(abs(lo), abs(hi))
        mag = float(np.sum(np.abs(col_coeffs) * ay ** np.arange(len(col_coeffs))))
        if best >= 64.0 * np.finfo(float).eps * mag:
            return False     # held one sign well above noise: phantom hint
        if i not in mp_cols:
            mp_cols[i] = _mp_real_roots(k.column(x))
        margin = 1e-6 * width
        return any(lo + margin < yr < hi - margin for yr in mp_cols[i])

    # -- curve components --

    def _root_zone_pair(self, i: int, r: int) -> Optional[Tuple[int, int]]:
        """(zone below, zone above) of the r-th root at column i."""
        segs = self.segments[i]
        y = self.roots[i][r]
        below = above = None
        for s, (lo, hi, _sign) in enumerate(segs):
            if abs(hi - y) < 1e-12:
                below = self.dsu.find(self._key(i, s))
            if abs(lo - y) < 1e-12:
                above = self.dsu.find(self._key(i, s))
        if below is None or above is None:
            return None
        return (below, above)

    def components(self) -> List[CurveComponent]:
        n = len(self.columns)
        edges: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}

        def add_edge(a, b):
            edges.setdefault(a, []).append(b)
            edges.setdefault(b, []).append(a)

        for i in range(n - 1):
            if self._wall_between(i, i + 1):
                continue
            pairs_i: Dict[Tuple[int, int], List[int]] = {}
            pairs_j: Dict[Tuple[int, int], List[int]] = {}
            for r in range(len(self.roots[i])):
                p = self._root_zone_pair(i, r)
                if p:
                    pairs_i.setdefault(p, []).append(r)
            for r in range(len(self.roots[i + 1])):
                p = self._root_zone_pair(i + 1, r)
                if p:
                    pairs_j.setdefault(p, []).append(r)
            matched_i, matched_j = set(), set()
            for p, ri in pairs_i.items():
                rj = pairs_j.get(p, [])
                m = min(len(ri), len(rj))
                # order-preserving alignment; when counts differ, keep the
                # best-aligned prefix/suffix by y proximity
                if m == 0:
                    continue
                if len(ri) == len(rj):
                    sel_i, sel_j = ri, rj
                else:
                    yi = [self.roots[i][r] for r in ri]
                    yj = [self.roots[i + 1][r] for r in rj]
                    best, best_cost = 0, math.inf
                    longer, shorter = (yi, yj) if len(yi) > len(yj) else (yj, yi)
                    for off in range(len(longer) - len(shorter) + 1):
                        cost = sum(abs(a - b) for a, b in zip(longer[off : off + len(shorter)], shorter))
                        if cost < best_cost:
                            best, best_cost = off, cost
                    if len(ri) > len(rj):
                        sel_i, sel_j = ri[best : best + m], rj
                    else:
                        sel_i, sel_j = ri, rj[best : best + m]
                for a, b in zip(sel_i, sel_j):
                    add_edge((i, a), (i + 1, b))
                    matched_i.add(a)
                    matched_j.add(b)
            # proximity continuation: a feature narrower than the column
            # pitch fragments its flanking zones, so its wall roots lose
            # their zone signature while staying aligned in y
            pitch = float(self.col_x[i + 1] - self.col_x[i])
            thr = 2.5 * max(pitch, 1e-12)
            ui = [r for r in range(len(self.roots[i])) if r not in matched_i]
            uj = [r for r in range(len(self.roots[i + 1])) if r not in matched_j]
            pi = pj = 0
            while pi < len(ui) and pj < len(uj):
                yi = self.roots[i][ui[pi]]
                yj = self.roots[i + 1][uj[pj]]
                if abs(yi - yj) <= thr:
                    add_edge((i, ui[pi]), (i + 1, uj[pj]))
                    matched_i.add(ui[pi])
                    matched_j.add(uj[pj])
                    pi += 1
                    pj += 1
                elif yi < yj:
                    pi += 1
                else:
                    pj += 1
            # fold pairing: consecutive unmatched roots at one column turn
            # into each other between the columns
            for col, matched in ((i, matched_i), (i + 1, matched_j)):
                other = i + 1 if col == i else i
                lo2, hi2 = self._y_range(self.col_x[other])
                free = [r for r in range(len(self.roots[col])) if r not in matched]
                # only pair roots unmatched toward THIS gap; roots matched in
                # the other direction are handled by their own gap
                free_here = []
                for r in free:
                    node = (col, r)
                    y = self.roots[col][r]
                    # a root that disappears by crossing the clip boundary is
                    # an arc endpoint, not a turning point
                    if y >= hi2 - 1e-9 or y <= lo2 + 1e-9:
                        continue
                    deg_toward = sum(
                        1 for nb in edges.get(node, []) if (col == i and nb[0] == i + 1) or (col == i + 1 and nb[0] == i)
                    )
                    if deg_toward == 0:
                        free_here.append(r)
                k = 0
                while k + 1 < len(free_here):
                    r1, r2 = free_here[k], free_here[k + 1]
                    if r2 == r1 + 1:
                        add_edge((col, r1), (col, r2))
                        k += 2
                    else:
                        k += 1

        # traverse
        visited = set()
        comps: List[CurveComponent] = []
        all_nodes = [(i, r) for i in range(n) for r in range(len(self.roots[i]))]
        deg = {node: len(set(edges.get(node, []))) for node in all_nodes}
        for start in all_nodes:
            if start in visited:
                continue
            if deg.get(start, 0) > 1:
                continue
            # open path from an endpoint
            path = self._walk(start, edges, visited)
            comps.append(self._to_component(path, closed=False))
        for start in all_nodes:
            if start in visited:
                continue
            path = self._walk(start, edges, visited)
            comps.append(self._to_component(path, closed=True))
        return [c for c in comps if len(c.pts) > 0]

    def _walk(self, start, edges, visited):
        path = [start]
        visited.add(start)
        cur, prev = start, None
        while True:
            nxt = None
            for nb in edges.get(cur, []):
                if nb != prev and nb not in visited:
                    nxt = nb
                    break
            if nxt is None:
                break
            path.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt
        return path

    def _to_component(self, path, closed: bool) -> CurveComponent:
        pts = np.array([[self.col_x[i], self.roots[i][r]] for i, r in path])
        adj = set()
        for i, r in path:
            p = self._root_zone_pair(i, r)
            if p:
                adj.update(p)
        exits = False
        step = (self.x_hi - self.x_lo) / self.ncol
        if not closed and len(path) > 0:
            for end in (path[0], path[-1]):
                i, r = end
                if i == 0 or i == len(self.columns) - 1:
                    exits = True
                y = self.roots[i][r]
                if self.clip_disk:
                    # a clip-exit endpoint sits up to a column short of the circle
                    rad = math.hypot(self.col_x[i] - self.cf[0], y - self.cf[1])
                    if rad >= self.disk_R - 3.0 * step:
                        exits = True
                else:
                    lo, hi = self._y_range(self.col_x[i])
                    if y <= lo + 3.0 * step or y >= hi - 3.0 * step:
                        exits = True
        return CurveComponent(pts=pts, closed=closed, exits_box=exits, zones=frozenset(adj))

    def boundary_arc_count(self) -> Tuple[int, int]:
        """(open in-disk arcs, closed ovals) of the level curve, disk clip.

        Degenerate vertical lines crossing the disk count as open arcs.
        """
        if not self.clip_disk:
            raise ValueError("arc census needs the disk clip")
        arcs = 0
        ovals = 0
        for c in self.components():
            if c.closed:
                ovals += 1
            else:
                arcs += 1
        arcs += sum(1 for w in self.walls if abs(float(w) - self.cf[0]) < self.disk_R)
        return arcs, ovals
