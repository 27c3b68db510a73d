"""Incidence predicates on the unit sphere and the per-sample cell complex.

Every predicate reduces to signs of 3x3 determinants.  A point is never
silently assigned to a side of a circle it (numerically) lies on:
:class:`DegenerateIncidence` is raised instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg3 import ComplexPair, RealDistinct, cross, mixed_product, normalize
from .system import SubsystemUN

EPS_GEOM = 1e-9
SIGN_VARIANTS = tuple(itertools.product((1, -1), repeat=3))


class DegenerateIncidence(ValueError):
    pass


class DegenerateGeometry(ValueError):
    pass


class EmptyRegion(ValueError):
    pass


@dataclass(frozen=True)
class GreatCircle:
    """Great circle through ``span_a`` and ``span_b``.

    For a real sample ``axis`` names the eigenvector the circle goes around
    (1, 2 or 3); the complex invariant circle uses ``axis = 0``.
    """

    owner: int
    axis: int
    span_a: np.ndarray
    span_b: np.ndarray
    normal: np.ndarray

    @classmethod
    def through(cls, owner, axis, a, b) -> "GreatCircle":
        return cls(owner, axis, np.asarray(a, float), np.asarray(b, float), normalize(cross(a, b)))

    def side(self, p) -> float:
        return mixed_product(p, self.span_a, self.span_b)

    def point(self, theta: float) -> np.ndarray:
        u = normalize(self.span_a)
        w = cross(self.normal, u)
        return math.cos(theta) * u + math.sin(theta) * w


@dataclass(frozen=True)
class OctantTriangle:
    owner: int
    signs: tuple
    v1: np.ndarray  # source
    v2: np.ndarray  # saddle
    v3: np.ndarray  # sink

    @property
    def vertices(self):
        return (self.v1, self.v2, self.v3)

    def centroid(self) -> np.ndarray:
        return normalize(self.v1 + self.v2 + self.v3)

    def antipode(self) -> "OctantTriangle":
        return OctantTriangle(self.owner, tuple(-s for s in self.signs), -self.v1, -self.v2, -self.v3)


@dataclass(frozen=True)
class Separatrix:
    """Outgoing separatrix semicircle from the saddle ``sign * E2`` to ``-+E3``."""

    owner: int
    sign: int
    saddle: np.ndarray
    ends: tuple
    carrier: GreatCircle


@dataclass(frozen=True)
class Region:
    """Open region ``{p in triangle, p on keep_vertex's side of cut_circle}``."""

    triangle: OctantTriangle
    cut_circle: GreatCircle
    keep_vertex: np.ndarray
    provenance: tuple  # (j, saddle sign, l, triangle signs, cut case)

    @property
    def key(self) -> tuple:
        return self.provenance


@dataclass
class RealCells:
    spectrum: RealDistinct
    circles: dict          # axis -> GreatCircle
    triangles: dict        # signs -> OctantTriangle
    separatrices: dict     # sign -> Separatrix

    @property
    def vectors(self):
        return self.spectrum.vectors

    @property
    def separatrix_arcs(self) -> list:
        """The four outgoing arcs ``(saddle, sink end)``, two per saddle."""
        return [(sep.saddle, end) for _, sep in sorted(self.separatrices.items(), reverse=True)
                for end in sep.ends]


@dataclass
class ComplexCells:
    spectrum: ComplexPair
    dyn_class: str
    circle: GreatCircle
    poles: tuple


@dataclass
class CellComplex:
    real: dict = field(default_factory=dict)     # sample index -> RealCells
    complex: dict = field(default_factory=dict)  # sample index -> ComplexCells

    @property
    def real_indices(self) -> list:
        return sorted(self.real)

    def triangle_containing(self, k: int, q, eps_geom: float = EPS_GEOM) -> OctantTriangle:
        """The unique octant triangle of sample ``k`` holding ``q`` in its interior."""
        cells = self.real[k]
        spec_vecs = cells.vectors
        signs = []
        for i, e in enumerate(spec_vecs):
            a, b = spec_vecs[(i + 1) % 3], spec_vecs[(i + 2) % 3]
            det_q = mixed_product(q, a, b)
            if abs(det_q) <= eps_geom:
                raise DegenerateIncidence(f"point lies on circle C^{k}_{i + 1}")
            det_e = mixed_product(e, a, b)
            signs.append(1 if det_q * det_e > 0 else -1)
        return cells.triangles[tuple(signs)]


def separation_sign(q, c: GreatCircle, p, eps_geom: float = EPS_GEOM) -> int:
    """+1 when the circle separates ``q`` from ``p``, -1 when they share a side."""
    dq = mixed_product(q, c.span_a, c.span_b)
    dp = mixed_product(p, c.span_a, c.span_b)
    if abs(dq) <= eps_geom or abs(dp) <= eps_geom:
        raise DegenerateIncidence("point lies on the circle")
    return 1 if dq * dp < 0 else -1


def side_circles(t: OctantTriangle):
    """The three side circles of ``t`` paired with the opposite vertex."""
    v = t.vertices
    out = []
    for i in range(3):
        a, b = v[(i + 1) % 3], v[(i + 2) % 3]
        out.append((GreatCircle.through(t.owner, i + 1, a, b), v[i]))
    return out


def triangle_membership(q, t: OctantTriangle, eps_geom: float = EPS_GEOM) -> int:
    """+1 for interior points of ``t``, -1 for points outside its closure.

    A point on one side circle but strictly beyond another is outside;
    :class:`DegenerateIncidence` is raised only when no side separates it.
    """
    degenerate = None
    for circle, opposite in side_circles(t):
        try:
            if separation_sign(q, circle, opposite, eps_geom) == 1:
                return -1
        except DegenerateIncidence as exc:
            degenerate = exc
    if degenerate is not None:
        raise degenerate
    return 1


def triangle_predicates(q, t: OctantTriangle) -> list:
    """Raw determinant products ``det(q,a,b) det(v,a,b)`` per side."""
    v = t.vertices
    out = []
    for i in range(3):
        a, b = v[(i + 1) % 3], v[(i + 2) % 3]
        out.append(mixed_product(q, a, b) * mixed_product(v[i], a, b))
    return out


def build_real_cells(k: int, spec: RealDistinct, eps_geom: float = EPS_GEOM) -> RealCells:
    e1, e2, e3 = spec.vectors
    circles = {
        1: GreatCircle.through(k, 1, e2, e3),
        2: GreatCircle.through(k, 2, e3, e1),
        3: GreatCircle.through(k, 3, e1, e2),
    }
    triangles = {}
    for signs in SIGN_VARIANTS:
        t = OctantTriangle(k, signs, signs[0] * e1, signs[1] * e2, signs[2] * e3)
        if abs(mixed_product(t.v1, t.v2, t.v3)) <= eps_geom:
            raise DegenerateGeometry(f"degenerate triangle for sample {k}")
        triangles[signs] = t
    separatrices = {
        s: Separatrix(k, s, s * e2, (-e3, e3), circles[1]) for s in (1, -1)
    }
    return RealCells(spec, circles, triangles, separatrices)


def build_cell_complex(sub: SubsystemUN, eps_geom: float = EPS_GEOM) -> CellComplex:
    cx = CellComplex()
    for s in sub.samples:
        if isinstance(s.spectrum, RealDistinct):
            cx.real[s.index] = build_real_cells(s.index, s.spectrum, eps_geom)
        elif isinstance(s.spectrum, ComplexPair) and s.dyn_class != "ComplexNeutral":
            sp = s.spectrum
            cx.complex[s.index] = ComplexCells(sp, s.dyn_class,
                                               GreatCircle.through(s.index, 0, sp.p1, sp.p2),
                                               (sp.e_r, -sp.e_r))
    return cx


def region_membership(p, r: Region, eps_geom: float = EPS_GEOM) -> bool:
    """Open-set membership; points within ``eps_geom`` of a boundary are outside."""
    try:
        if triangle_membership(p, r.triangle, eps_geom) != 1:
            return False
        return separation_sign(p, r.cut_circle, r.keep_vertex, eps_geom) == -1
    except DegenerateIncidence:
        return False


def region_mask(points, r: Region, eps_geom: float = EPS_GEOM) -> np.ndarray:
    """Vectorised :func:`region_membership` over an ``(n, 3)`` array."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    ok = np.ones(len(points), dtype=bool)
    tests = side_circles(r.triangle) + [(r.cut_circle, r.keep_vertex)]
    for c, ref in tests:
        dp = points @ np.cross(c.span_a, c.span_b)
        dref = mixed_product(ref, c.span_a, c.span_b)
        ok &= (np.abs(dp) > eps_geom) & (dp * dref > 0)
    return ok


def _barycentric_points(t: OctantTriangle, n: int) -> np.ndarray:
    pts = []
    for i in range(1, n):
        for j in range(1, n - i):
            k = n - i - j
            pts.append(i * t.v1 + j * t.v2 + k * t.v3)
    if not pts:
        return np.zeros((0, 3))
    pts = np.asarray(pts, dtype=float)
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def region_sample_points(r: Region, m: int, max_level: int = 512,
                         eps_geom: float = EPS_GEOM) -> list:
    """``m`` deterministic interior points of the region.

    The triangle is sub-sampled on a barycentric lattice, refined by doubling
    until at least ``m`` lattice points pass the membership test; evenly
    spaced hits are returned.
    """
    if m < 1:
        raise ValueError("m must be positive")
    n = 4
    while n <= max_level:
        pts = _barycentric_points(r.triangle, n)
        hits = pts[region_mask(pts, r, eps_geom)] if len(pts) else pts
        if len(hits) >= m:
            idx = np.linspace(0, len(hits) - 1, m).round().astype(int) if m > 1 else [len(hits) // 2]
            return [hits[i].copy() for i in idx]
        n *= 2
    raise EmptyRegion(f"region {r.provenance} has fewer than {m} lattice points")


def circle_region_intersect(c: GreatCircle, r: Region, m: int = 720,
                            eps_geom: float = EPS_GEOM) -> bool:
    """One-sided test: true means a sampled circle point lies in the region."""
    if m < 64:
        raise ValueError("m must be at least 64")
    return any(region_membership(c.point(2 * math.pi * i / m), r, eps_geom) for i in range(m))


def in_any_region(p, regions, eps_geom: float = EPS_GEOM) -> bool:
    return any(region_membership(p, r, eps_geom) for r in regions)


def nudge(v, toward, angle: float) -> np.ndarray:
    """Move unit vector ``v`` by ``angle`` radians along the geodesic to ``toward``."""
    w = np.asarray(toward, float) - np.dot(toward, v) * np.asarray(v, float)
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        raise ValueError("nudge direction undefined")
    return math.cos(angle) * np.asarray(v, float) + math.sin(angle) * (w / nw)


def eigen_coords(q, e1, e2, e3) -> np.ndarray:
    """Coordinates of ``q`` in the (not necessarily orthogonal) basis e1, e2, e3 (Cramer)."""
    d = mixed_product(e1, e2, e3)
    return np.array([mixed_product(q, e2, e3), mixed_product(e1, q, e3),
                     mixed_product(e1, e2, q)]) / d
