"""Icosphere meshing and decomposition of a sphere minus a level set.

Two routes produce the same Region objects. General three-variable
inputs use the mesh: vertex signs of f - level, faces grouped by
union-find into strict-sign regions, mixed-sign faces forming the
level band whose components count the level circles. Inputs with no
third-variable dependence are handled exactly through the plane: the
sphere is a double cover of the disk, so each disk sign zone lifts to
one region when it touches the boundary circle and to two mirror-cap
regions when it does not, and each in-disk curve arc lifts to one
circle while a closed oval lifts to two. The plane route is not an
optimization: some inputs have sign zones four orders of magnitude
narrower than the sphere radius, far below any affordable mesh edge
length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import AnalysisConfig
from .planar import Scan, _DSU
from .poly import Center, Polynomial


class MeshError(ValueError):
    pass


class DegenerateLevelError(ValueError):
    """The level set swallows the mesh: no stable sign decomposition."""


class SphereMesh:
    """Triangulated sphere centered at a rational center.

    Subdivided icosahedron; depth d has 20*4^d faces. Vertices are kept
    in float; the center and radius travel alongside for queries.
    """

    def __init__(self, center: Center, radius: float, depth: int,
                 vertices: np.ndarray, faces: np.ndarray):
        self.center = center
        self.radius = float(radius)
        self.depth = depth
        self.vertices = vertices
        self.faces = faces
        self._edges = None
        self._vertex_faces = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        if self._edges is None:
            f = self.faces
            e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            e.sort(axis=1)
            self._edges = np.unique(e, axis=0)
        return self._edges

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_faces

    def vertex_faces(self) -> List[List[int]]:
        if self._vertex_faces is None:
            vf: List[List[int]] = [[] for _ in range(self.n_vertices)]
            for fi, (a, b, c) in enumerate(self.faces):
                vf[a].append(fi)
                vf[b].append(fi)
                vf[c].append(fi)
            self._vertex_faces = vf
        return self._vertex_faces

    def face_adjacency(self) -> Dict[Tuple[int, int], List[int]]:
        """Map from sorted edge to the (two) faces sharing it."""
        adj: Dict[Tuple[int, int], List[int]] = {}
        for fi, (a, b, c) in enumerate(self.faces):
            for u, v in ((a, b), (b, c), (c, a)):
                key = (u, v) if u < v else (v, u)
                adj.setdefault(key, []).append(fi)
        return adj

    def to_json_dict(self, signs: Optional[np.ndarray] = None,
                     region_of_vertex: Optional[np.ndarray] = None) -> dict:
        out = {
            "center": [str(self.center.a1), str(self.center.a2), str(self.center.a3)],
            "radius": self.radius,
            "depth": self.depth,
            "vertices": [[float(v) for v in row] for row in self.vertices],
            "faces": [[int(i) for i in row] for row in self.faces],
        }
        if signs is not None:
            out["vertex_signs"] = [int(s) for s in signs]
        if region_of_vertex is not None:
            out["vertex_regions"] = [int(r) for r in region_of_vertex]
        return out


_ICO_VERTS = None
_ICO_FACES = None


def _icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    global _ICO_VERTS, _ICO_FACES
    if _ICO_VERTS is None:
        t = (1.0 + math.sqrt(5.0)) / 2.0
        v = np.array([
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ], dtype=float)
        v /= np.linalg.norm(v, axis=1)[:, None]
        f = np.array([
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ], dtype=np.int64)
        _ICO_VERTS, _ICO_FACES = v, f
    return _ICO_VERTS.copy(), _ICO_FACES.copy()


def build_mesh(center: Center, radius: float, depth: int, max_depth: int = 8) -> SphereMesh:
    """Icosphere at the given center and radius. 20*4^depth faces."""
    if radius <= 0:
        raise MeshError("radius must be positive")
    if depth < 0:
        raise MeshError("depth must be non-negative")
    if depth > max_depth:
        raise MeshError(f"depth {depth} above configured maximum {max_depth}")
    verts, faces = _icosahedron()
    vlist = [tuple(v) for v in verts]
    for _ in range(depth):
        cache: Dict[Tuple[int, int], int] = {}
        new_faces = []

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key in cache:
                return cache[key]
            a = vlist[i]
            b = vlist[j]
            m = (a[0] + b[0], a[1] + b[1], a[2] + b[2])
            n = math.sqrt(m[0] ** 2 + m[1] ** 2 + m[2] ** 2)
            vlist.append((m[0] / n, m[1] / n, m[2] / n))
            cache[key] = len(vlist) - 1
            return cache[key]

        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = np.array(new_faces, dtype=np.int64)
    vertices = np.array(vlist, dtype=float) * radius + np.array(center.as_float())
    return SphereMesh(center, radius, depth, vertices, faces)


@dataclass
class Region:
    """Connected component of the sphere minus a level set."""

    id: int
    sign: int
    source: str                      # "plane" or "mesh"
    boundary_circle_count: int = 0
    face_set: Optional[np.ndarray] = None     # mesh route
    zone_id: Optional[int] = None             # plane route
    hemisphere: int = 0              # 0 touches the equator plane; else +1 / -1 cap
    size_hint: float = 0.0
    member_points: list = field(default_factory=list)
    sample: Optional[Tuple[float, float]] = None


class RegionDecomposition:
    """Regions and level circles of a sphere minus f = level.

    Built by decompose(); carries whichever backend produced it so that
    point location works the same way for both.
    """

    def __init__(self, f: Polynomial, level: float, mesh: SphereMesh,
                 regions: List[Region], circle_count: int,
                 scan: Optional[Scan] = None,
                 vertex_signs: Optional[np.ndarray] = None,
                 face_region: Optional[np.ndarray] = None):
        self.f = f
        self.level = level
        self.mesh = mesh
        self.regions = regions
        self.circle_count = circle_count
        self.scan = scan
        self.vertex_signs = vertex_signs
        self.face_region = face_region

    def region_by_id(self, rid: int) -> Region:
        for r in self.regions:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def locate(self, point) -> Optional[int]:
        """Region id containing a sphere point; None inside the level band."""
        p = np.asarray(point, dtype=float)
        if self.scan is not None:
            zid = self.scan.zone_of_point(p[0], p[1])
            if zid is None:
                return None
            a3 = float(self.mesh.center.a3)
            for r in self.regions:
                if r.zone_id != zid:
                    continue
                if r.hemisphere == 0:
                    return r.id
                if (r.hemisphere > 0) == (p[2] >= a3):
                    return r.id
            return None
        # mesh route: nearest vertex, then any strict-sign incident face
        d = np.linalg.norm(self.mesh.vertices - p[None, :], axis=1)
        vi = int(np.argmin(d))
        for fi in self.mesh.vertex_faces()[vi]:
            rid = int(self.face_region[fi])
            if rid >= 0:
                return rid
        return None


def _decompose_plane(f: Polynomial, level: float, mesh: SphereMesh,
                     config: AnalysisConfig) -> RegionDecomposition:
    scan = Scan(f, level, mesh.center, radius=mesh.radius,
                columns=config.scan_columns)
    zones = scan.zones()
    comps = scan.components()
    in_disk_walls = [w for w in scan.walls
                     if abs(float(w) - float(mesh.center.a1)) < mesh.radius]

    regions: List[Region] = []
    zone_regions: Dict[int, List[Region]] = {}
    rid = 0
    for z in zones:
        if z.touches_boundary:
            made = [Region(id=rid, sign=z.sign, source="plane", zone_id=z.zone_id,
                           hemisphere=0, size_hint=float(z.n_segments), sample=z.sample)]
            rid += 1
        else:
            made = [Region(id=rid, sign=z.sign, source="plane", zone_id=z.zone_id,
                           hemisphere=+1, size_hint=float(z.n_segments), sample=z.sample),
                    Region(id=rid + 1, sign=z.sign, source="plane", zone_id=z.zone_id,
                           hemisphere=-1, size_hint=float(z.n_segments), sample=z.sample)]
            rid += 2
        zone_regions[z.zone_id] = made
        regions.extend(made)

    open_arcs = [c for c in comps if not c.closed]
    ovals = [c for c in comps if c.closed]
    circle_count = len(open_arcs) + 2 * len(ovals) + len(in_disk_walls)

    for c in open_arcs:
        for zid in c.zones:
            for r in zone_regions.get(zid, []):
                r.boundary_circle_count += 1
    for c in ovals:
        for zid in c.zones:
            for r in zone_regions.get(zid, []):
                # 2 lifted circles; caps see the one on their side only
                r.boundary_circle_count += 1 if r.hemisphere != 0 else 2
    for w in in_disk_walls:
        for zid in scan.wall_adjacent_zones(w):
            for r in zone_regions.get(zid, []):
                r.boundary_circle_count += 1

    return RegionDecomposition(f, level, mesh, regions, circle_count, scan=scan)


def _mesh_signs(f: Polynomial, level: float, mesh: SphereMesh, tol: float) -> np.ndarray:
    vals = f.eval_many(mesh.vertices) - level
    signs = np.zeros(len(vals), dtype=np.int8)
    signs[vals > tol] = 1
    signs[vals < -tol] = -1
    return signs


def _mesh_partition(mesh: SphereMesh, signs: np.ndarray):
    """(face_region, regions, band_component_count, band_adjacency)."""
    faces = mesh.faces
    fs = signs[faces]                      # (m, 3)
    face_sign = np.zeros(len(faces), dtype=np.int8)
    all_plus = (fs == 1).all(axis=1)
    all_minus = (fs == -1).all(axis=1)
    face_sign[all_plus] = 1
    face_sign[all_minus] = -1              # 0 = band

    dsu = _DSU()
    for fi in range(len(faces)):
        dsu.find(fi)
    for flist in mesh.face_adjacency().values():
        if len(flist) == 2:
            a, b = flist
            if face_sign[a] == face_sign[b]:
                dsu.union(a, b)

    root_of = np.fromiter((dsu.find(fi) for fi in range(len(faces))), dtype=np.int64)
    region_roots = []
    band_roots = []
    for root in np.unique(root_of):
        (band_roots if face_sign[root] == 0 else region_roots).append(int(root))

    # deterministic ids: largest face count first, then smallest root
    sizes = {root: int(np.sum(root_of == root)) for root in region_roots}
    region_roots.sort(key=lambda r: (-sizes[r], r))
    root_to_id = {root: i for i, root in enumerate(region_roots)}

    face_region = np.full(len(faces), -1, dtype=np.int64)
    for fi in range(len(faces)):
        face_region[fi] = root_to_id.get(int(root_of[fi]), -1)

    regions = []
    for root in region_roots:
        members = np.nonzero(root_of == root)[0]
        regions.append(Region(
            id=root_to_id[root], sign=int(face_sign[root]), source="mesh",
            face_set=members, size_hint=float(len(members)),
        ))

    band_adjacent: Dict[int, set] = {int(r): set() for r in band_roots}
    for flist in mesh.face_adjacency().values():
        if len(flist) != 2:
            continue
        a, b = flist
        ra, rb = int(root_of[a]), int(root_of[b])
        if face_sign[a] == 0 and face_sign[b] != 0:
            band_adjacent[ra].add(root_to_id[rb])
        elif face_sign[b] == 0 and face_sign[a] != 0:
            band_adjacent[rb].add(root_to_id[ra])
    for members in band_adjacent.values():
        for rid in members:
            regions[rid].boundary_circle_count += 1

    return face_region, regions, len(band_roots), band_adjacent


def _decompose_mesh(f: Polynomial, level: float, mesh: SphereMesh,
                    config: AnalysisConfig) -> RegionDecomposition:
    tol = config.vertex_tol * max(1.0, abs(level))
    signs = _mesh_signs(f, level, mesh, tol)
    n_zero = int(np.sum(signs == 0))
    if n_zero == len(signs):
        raise DegenerateLevelError(
            "every mesh vertex sits on the level set within tolerance")
    if n_zero > 0:
        # nudge the level both ways; the topology must not depend on it
        results = []
        for nudged in (level - 10 * tol, level + 10 * tol):
            s = _mesh_signs(f, nudged, mesh, tol)
            if np.any(s == 0):
                continue
            results.append((nudged, s))
        if not results:
            raise DegenerateLevelError("level collides with mesh vertices persistently")
        parts = [_mesh_partition(mesh, s) for _, s in results]
        counts = {(len(p[1]), p[2]) for p in parts}
        if len(counts) != 1:
            raise DegenerateLevelError(
                "level-set topology differs between infinitesimal nudges")
        signs = results[-1][1]
        face_region, regions, n_band, _adj = parts[-1]
    else:
        face_region, regions, n_band, _adj = _mesh_partition(mesh, signs)
    return RegionDecomposition(f, level, mesh, regions, n_band,
                               vertex_signs=signs, face_region=face_region)


def decompose(f: Polynomial, level: float, mesh: SphereMesh,
              config: Optional[AnalysisConfig] = None) -> RegionDecomposition:
    config = config or AnalysisConfig()
    if f.is_z_free():
        return _decompose_plane(f, level, mesh, config)
    return _decompose_mesh(f, level, mesh, config)


def decompose_regions(f: Polynomial, level: float, mesh: SphereMesh,
                      config: Optional[AnalysisConfig] = None) -> List[Region]:
    return decompose(f, level, mesh, config).regions


def count_level_circles(f: Polynomial, level: float, mesh: SphereMesh,
                        config: Optional[AnalysisConfig] = None) -> int:
    return decompose(f, level, mesh, config).circle_count


def locate_region(point, decomposition: RegionDecomposition) -> Optional[int]:
    return decomposition.locate(point)


def export_mesh_json(path: str, mesh: SphereMesh,
                     decomposition: Optional[RegionDecomposition] = None):
    signs = decomposition.vertex_signs if decomposition else None
    region_of_vertex = None
    if decomposition is not None and decomposition.face_region is not None:
        region_of_vertex = np.full(mesh.n_vertices, -1, dtype=np.int64)
        for fi, (a, b, c) in enumerate(mesh.faces):
            rid = decomposition.face_region[fi]
            if rid >= 0:
                for v in (a, b, c):
                    region_of_vertex[v] = rid
    with open(path, "w") as fh:
        json.dump(mesh.to_json_dict(signs, region_of_vertex), fh)
