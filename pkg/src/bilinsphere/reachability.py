"""Closure construction of reachable saddles and open regions, and the verdicts built on it.

A closure seeded at a point ``q`` holds two sets:

* ``co1`` -- saddles ``+-E^j_2`` whose outgoing separatrix semicircle is
  approachable from ``q``;
* ``co2`` -- open regions (a triangle cut by a separatrix carrier circle)
  contained in the positive orbit of ``q``.

Two moves grow it.  A *crossing* move follows the flow of sample ``k`` from a
reachable point inside its octant triangle until it crosses the stable circle
of another sample ``j`` (the circle through ``E^j_1, E^j_2``); the saddle on
the crossed arc joins ``co1``.  A *flooding* move takes a saddle of ``co1``
that lies inside a triangle of sample ``l`` whose separatrix endpoints lie
outside it; the chord cuts one vertex off the triangle and the flow of ``l``
sweeps the appropriate piece, which joins ``co2``.

Every step is logged with the determinant values that justified it, so a
certificate can be re-checked without re-running the search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SphereFlow
from .geometry import (EPS_GEOM, CellComplex, DegenerateIncidence, EmptyRegion,
                       OctantTriangle, Region, circle_region_intersect, eigen_coords,
                       in_any_region, nudge, region_sample_points, separation_sign,
                       triangle_membership, triangle_predicates)
from .linalg3 import mixed_product
from .system import (COMPLEX_ATTRACTING, COMPLEX_REPULSIVE, SubsystemUN, check_cc3_cc4)

CUT_SOURCE = "cut-source"   # chord isolates the source vertex; region keeps the sink side
CUT_SADDLE = "cut-saddle"   # chord isolates the saddle vertex
CUT_SINK = "cut-sink"       # chord isolates the sink vertex
CUT_CASES = (CUT_SOURCE, CUT_SADDLE, CUT_SINK)

CROSSING_GRID = 4000
REFINE_PASSES = 4
REFINE_POINTS = 128


class AmbiguousCut(ValueError):
    pass


class IterationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class CO1Entry:
    """A reachable saddle ``sign * E^owner_2``.

    ``side_ref`` is the side of the stable circle of ``owner`` on which the
    approaching point sat; ``approach`` is the sign of the ``E^owner_1``
    coordinate of the approach, i.e. the side of the separatrix carrier from
    which the separatrix is reached.
    """

    owner: int
    sign: int
    saddle: np.ndarray
    side_ref: int
    approach: int
    via: int

    @property
    def key(self) -> tuple:
        return (self.owner, self.sign)


@dataclass
class CrossingStep:
    id: int
    from_point: np.ndarray
    k: int
    j: int
    triangle: OctantTriangle
    crossing: np.ndarray
    crossing_time: float
    saddle_sign: int
    predicates: dict
    new_entry: tuple
    origin: object = None
    kind: str = "first"


@dataclass
class FloodStep:
    id: int
    entry: CO1Entry
    l: int
    cut_case: str
    region: Region
    predicates: dict
    new_entry: tuple = None
    kind: str = "second"


@dataclass
class ReachClosure:
    seed: np.ndarray
    co1: dict = field(default_factory=dict)   # key -> CO1Entry
    co2: dict = field(default_factory=dict)   # provenance key -> Region
    certificate: list = field(default_factory=list)
    partial: bool = False
    sweeps: int = 0
    skipped: list = field(default_factory=list)

    @property
    def regions(self) -> list:
        return list(self.co2.values())

    def contains(self, p, eps_geom: float = EPS_GEOM) -> bool:
        return in_any_region(p, self.co2.values(), eps_geom)

    def next_id(self) -> int:
        return len(self.certificate)


# --------------------------------------------------------------------------
# crossing move


def _crossings(flow: SphereFlow, start, t_max: float, event) -> list:
    """Times and points where ``event`` changes sign along the closed-form flow.

    A uniform time grid brackets each sign change, then the bracket is
    refined on successively finer sub-grids.
    """
    ts = np.linspace(0.0, t_max, CROSSING_GRID + 1)
    g = flow.sphere(start, ts) @ event
    idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    out = []
    for i in idx:
        lo, hi = ts[i], ts[i + 1]
        for _ in range(REFINE_PASSES):
            sub = np.linspace(lo, hi, REFINE_POINTS + 1)
            gs = flow.sphere(start, sub) @ event
            flips = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) <= 0)[0]
            if len(flips) == 0:
                break
            lo, hi = sub[flips[0]], sub[flips[0] + 1]
        t = 0.5 * (lo + hi)
        out.append((t, flow.sphere(start, t)))
    return out


def relaxation_time(spec) -> float:
    """Horizon over which a real-spectrum flow settles on its sink."""
    return 50.0 / spec.gap


def first_type_step(from_point, cx: CellComplex, closure: ReachClosure,
                    eps_geom: float = EPS_GEOM, origin=None) -> list:
    """Crossing moves from ``from_point``; returns the newly added ``co1`` entries."""
    added = []
    for k in cx.real_indices:
        tri = cx.triangle_containing(k, from_point, eps_geom)
        cells_k = cx.real[k]
        flow = None
        for j in cx.real_indices:
            if j == k:
                continue
            stable = cx.real[j].circles[3]
            if separation_sign(from_point, stable, tri.v3, eps_geom) != 1:
                continue
            if (j, 1) in closure.co1 and (j, -1) in closure.co1:
                continue
            if flow is None:
                flow = SphereFlow.of(cells_k.spectrum)
            e1, e2, e3 = cx.real[j].vectors
            event = np.cross(stable.span_a, stable.span_b)
            for t_cross, q_bar in _crossings(flow, from_point, relaxation_time(cells_k.spectrum), event):
                x = eigen_coords(q_bar, e1, e2, e3)
                sigma = 1 if x[1] > 0 else -1
                if (j, sigma) in closure.co1:
                    continue
                entry = CO1Entry(
                    owner=j, sign=sigma, saddle=sigma * e2,
                    side_ref=1 if stable.side(from_point) > 0 else -1,
                    approach=1 if x[0] > 0 else -1,
                    via=closure.next_id())
                preds = {
                    "membership": triangle_predicates(from_point, tri),
                    "separation": stable.side(from_point) * stable.side(tri.v3),
                    "saddle_coordinate": float(x[1]),
                }
                closure.certificate.append(CrossingStep(
                    closure.next_id(), np.asarray(from_point, float).copy(), k, j, tri,
                    q_bar, float(t_cross), sigma, preds, entry.key, origin))
                closure.co1[entry.key] = entry
                added.append(entry)
    return added


# --------------------------------------------------------------------------
# flooding move


def classify_cut(tri: OctantTriangle, carrier, eps_geom: float = EPS_GEOM) -> tuple:
    """Which vertex the carrier circle isolates, with the three separation values."""
    s12 = separation_sign(tri.v1, carrier, tri.v2, eps_geom)
    s13 = separation_sign(tri.v1, carrier, tri.v3, eps_geom)
    s23 = separation_sign(tri.v2, carrier, tri.v3, eps_geom)
    hits = []
    if s12 == 1 and s13 == 1:
        hits.append((CUT_SOURCE, tri.v3))
    if s12 == 1 and s23 == 1:
        hits.append((CUT_SADDLE, tri.v2))
    if s13 == 1 and s23 == 1:
        hits.append((CUT_SINK, tri.v3))
    if len(hits) != 1:
        raise AmbiguousCut(f"separations {(s12, s13, s23)} match {len(hits)} cut cases")
    return hits[0][0], hits[0][1], (s12, s13, s23)


def second_type_step(entry: CO1Entry, cx: CellComplex, closure: ReachClosure,
                     eps_geom: float = EPS_GEOM) -> list:
    """Flooding moves from a reachable saddle; returns ``(region, new entry or None)`` pairs."""
    j = entry.owner
    cells_j = cx.real[j]
    sep = cells_j.separatrices[entry.sign]
    carrier = sep.carrier
    out = []
    for l in cx.real_indices:
        if l == j:
            continue
        tri = cx.triangle_containing(l, entry.saddle, eps_geom)
        if any(triangle_membership(end, tri, eps_geom) != -1 for end in sep.ends):
            continue
        case, keep, seps = classify_cut(tri, carrier, eps_geom)
        key = (j, l, tri.signs, case)
        if key in closure.co2:
            continue
        region = Region(tri, carrier, keep, key)
        new_entry = None
        if case in (CUT_SOURCE, CUT_SADDLE):
            sigma = tri.signs[1]
            if (l, sigma) not in closure.co1:
                e1_l, e2_l = cx.real[l].vectors[0], cx.real[l].vectors[1]
                new_entry = CO1Entry(
                    owner=l, sign=sigma, saddle=tri.v2,
                    side_ref=1 if mixed_product(tri.v3, e1_l, e2_l) > 0 else -1,
                    approach=tri.signs[0], via=closure.next_id())
        preds = {
            "saddle_membership": triangle_predicates(entry.saddle, tri),
            "end_membership": [triangle_predicates(end, tri) for end in sep.ends],
            "cut_products": [carrier.side(a) * carrier.side(b)
                             for a, b in ((tri.v1, tri.v2), (tri.v1, tri.v3), (tri.v2, tri.v3))],
            "separations": list(seps),
        }
        closure.certificate.append(FloodStep(
            closure.next_id(), entry, l, case, region, preds,
            new_entry.key if new_entry is not None else None))
        closure.co2[key] = region
        if new_entry is not None:
            closure.co1[new_entry.key] = new_entry
        out.append((region, new_entry))
    return out


# --------------------------------------------------------------------------
# closure


def compute_closure(seed, cx: CellComplex, max_iter: int = 32, samples_per_region: int = 5,
                    eps_geom: float = EPS_GEOM) -> ReachClosure:
    """Worklist fixed point of crossing and flooding moves from ``seed``.

    Crossing moves are applied to the seed and to ``samples_per_region``
    sample points of every newly found region; flooding moves to every new
    saddle.  Steps that hit a degenerate incidence are skipped and recorded.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    seed = np.asarray(seed, dtype=float)
    closure = ReachClosure(seed)
    points = [(seed, "seed")]
    processed = set()
    for sweep in range(max_iter):
        closure.sweeps = sweep + 1
        for p, origin in points:
            try:
                first_type_step(p, cx, closure, eps_geom, origin)
            except DegenerateIncidence as exc:
                closure.skipped.append({"move": "first", "origin": origin, "reason": str(exc)})
        points = []
        for key in list(closure.co1):
            if key in processed:
                continue
            processed.add(key)
            try:
                found = second_type_step(closure.co1[key], cx, closure, eps_geom)
            except (DegenerateIncidence, AmbiguousCut) as exc:
                closure.skipped.append({"move": "second", "entry": list(key), "reason": str(exc)})
                continue
            for region, _ in found:
                try:
                    pts = region_sample_points(region, samples_per_region, eps_geom=eps_geom)
                except EmptyRegion as exc:
                    closure.skipped.append({"move": "sample", "region": _key_list(region.key),
                                            "reason": str(exc)})
                    continue
                points.extend((p, region.key) for p in pts)
        if not points and all(k in processed for k in closure.co1):
            return closure
    closure.partial = True
    return closure


def _key_list(key):
    j, l, signs, case = key
    return [j, l, list(signs), case]


# --------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    controllable: bool
    theorem: str = None
    witness: dict = field(default_factory=dict)
    reason: str = ""
    closures: list = field(default_factory=list)
    conditional: bool = False
    conditions: dict = field(default_factory=dict)
    replay: dict = None

    @property
    def label(self) -> str:
        return f"Controllable{{{self.theorem}}}" if self.controllable else "Inconclusive"

    def certificate(self) -> list:
        return [step for c in self.closures for step in c.certificate]


def inconclusive(reason: str, closures=None) -> Verdict:
    return Verdict(False, reason=reason, closures=list(closures or []))


def sink_seeds(cx: CellComplex, s: int, sign: int, eps_nudge: float) -> list:
    """Points ``eps_nudge`` inside each of the four triangles of ``s`` at ``sign * E^s_3``."""
    cells = cx.real[s]
    return [nudge(t.v3, t.centroid(), eps_nudge)
            for signs, t in sorted(cells.triangles.items()) if signs[2] == sign]


def vertex_probes(cx: CellComplex, s: int, vertex_index: int, sign: int, eps_nudge: float) -> list:
    """Nudges of ``sign * E^s_i`` into each of the four triangles of ``s`` meeting there."""
    cells = cx.real[s]
    return [nudge(t.vertices[vertex_index], t.centroid(), eps_nudge)
            for signs, t in sorted(cells.triangles.items()) if signs[vertex_index] == sign]


def point_probes(p, eps_nudge: float) -> list:
    """``p`` and four points ``eps_nudge`` away in orthogonal tangent directions."""
    p = np.asarray(p, float)
    a = np.cross(p, np.eye(3)[int(np.argmin(np.abs(p)))])
    a /= np.linalg.norm(a)
    b = np.cross(p, a)
    return [p] + [nudge(p, p + d, eps_nudge) for d in (a, -a, b, -b)]


def _closures_from_sinks(cx, s, eps_nudge, max_iter, samples_per_region, eps_geom):
    return [compute_closure(seed, cx, max_iter, samples_per_region, eps_geom)
            for sign in (1, -1) for seed in sink_seeds(cx, s, sign, eps_nudge)]


def _genericity_gate(sub, eps_geom):
    rep = check_cc3_cc4(sub, eps_geom)
    if not rep.cc3:
        return "CC3 violated: " + str([v for v in rep.violations if v["kind"] == "cc3"][:3])
    if not rep.cc4:
        return "CC4 violated: " + str([v for v in rep.violations if v["kind"].startswith("cc4")][:3])
    return None


def decide_theorem_a(sub: SubsystemUN, cx: CellComplex, eps_nudge: float = 1e-4,
                     max_iter: int = 32, samples_per_region: int = 5,
                     eps_geom: float = EPS_GEOM) -> Verdict:
    """Real-spectrum criterion: both sources of some sample reachable from both its sinks.

    Closures are seeded just inside each of the four triangles at ``E^s_3``
    and at ``-E^s_3``; every one of the eight must contain the nudges of
    ``E^s_1`` and ``-E^s_1`` into all four adjacent triangles.
    """
    real = cx.real_indices
    if len(real) < 2:
        return inconclusive("no separating circles: fewer than two real-spectrum samples")
    gate = _genericity_gate(sub.restricted(real), eps_geom)
    if gate:
        return inconclusive(gate)
    tried = []
    for s in real:
        closures = _closures_from_sinks(cx, s, eps_nudge, max_iter, samples_per_region, eps_geom)
        probes = vertex_probes(cx, s, 0, 1, eps_nudge) + vertex_probes(cx, s, 0, -1, eps_nudge)
        if all(c.contains(p, eps_geom) for c in closures for p in probes):
            return Verdict(True, "A", {"s": s}, closures=closures)
        tried.append(s)
    return inconclusive(f"source vertices not covered from the sinks of any of samples {tried}")


def decide_theorem_b(sub: SubsystemUN, cx: CellComplex, eps_nudge: float = 1e-4,
                     max_iter: int = 32, samples_per_region: int = 5,
                     eps_geom: float = EPS_GEOM, circle_resolution: int = 720) -> Verdict:
    """Mixed criterion: closures of the real samples meet a complex sample's poles or cycle."""
    real = cx.real_indices
    if not real:
        return inconclusive("empty real subsystem")
    cplx = sorted(j for j, c in cx.complex.items()
                  if c.dyn_class in (COMPLEX_ATTRACTING, COMPLEX_REPULSIVE))
    if not cplx:
        return inconclusive("no complex-spectrum sample with an attracting or repulsive cycle")
    gate = _genericity_gate(sub.restricted(real + cplx), eps_geom)
    if gate:
        return inconclusive(gate)
    for s in real:
        closures = _closures_from_sinks(cx, s, eps_nudge, max_iter, samples_per_region, eps_geom)
        for j in cplx:
            cells = cx.complex[j]
            if cells.dyn_class == COMPLEX_ATTRACTING:
                probes = point_probes(cells.poles[0], eps_nudge) + point_probes(cells.poles[1], eps_nudge)
                if all(c.contains(p, eps_geom) for c in closures for p in probes):
                    return Verdict(True, "B", {"s": s, "j": j, "case": "attracting"},
                                   closures=closures)
            else:
                if all(any(circle_region_intersect(cells.circle, r, circle_resolution, eps_geom)
                           for r in c.regions) for c in closures):
                    return Verdict(True, "B", {"s": s, "j": j, "case": "repulsive"},
                                   closures=closures)
    return inconclusive("no complex sample's poles or cycle reached by the real closures")


def decide_theorem_c(sub: SubsystemUN, cc1_holds: bool = True, eps_geom: float = EPS_GEOM) -> Verdict:
    """Attracting and repulsive invariant cycles side by side."""
    attracting = [s.index for s in sub.samples if s.dyn_class == COMPLEX_ATTRACTING]
    repulsive = [s.index for s in sub.samples if s.dyn_class == COMPLEX_REPULSIVE]
    if not attracting or not repulsive:
        return inconclusive("needs one attracting-cycle and one repulsive-cycle sample")
    if not cc1_holds:
        return inconclusive("CC1 not established")
    gate = _genericity_gate(sub.restricted(attracting + repulsive), eps_geom)
    if gate:
        return inconclusive(gate)
    return Verdict(True, "C", {"j": attracting[0], "l": repulsive[0]})


def decide(sub: SubsystemUN, cx: CellComplex, conditions: dict = None, eps_nudge: float = 1e-4,
           max_iter: int = 32, samples_per_region: int = 5, eps_geom: float = EPS_GEOM) -> Verdict:
    """Try the criteria from cheapest to costliest; never claims uncontrollability.

    ``conditions`` carries precomputed condition reports; a failed CC1
    check makes every verdict inconclusive, and a finite control set marks
    any positive verdict as conditional.
    """
    conditions = dict(conditions or {})
    cc1 = conditions.get("cc1")
    cc1_ok = True if cc1 is None else bool(cc1.get("holds"))
    conditional = conditions.get("cc2", {}).get("status") == "unsatisfiable"
    if not cc1_ok:
        v = inconclusive("CC1 not established at grid resolution")
    else:
        v = decide_theorem_c(sub, True, eps_geom)
        if not v.controllable:
            vb = decide_theorem_b(sub, cx, eps_nudge, max_iter, samples_per_region, eps_geom)
            if vb.controllable:
                v = vb
            else:
                va = decide_theorem_a(sub, cx, eps_nudge, max_iter, samples_per_region, eps_geom)
                v = va if va.controllable else inconclusive(
                    "; ".join(x.reason for x in (v, vb, va)))
    v.conditions = conditions
    v.conditional = conditional and v.controllable
    return v
