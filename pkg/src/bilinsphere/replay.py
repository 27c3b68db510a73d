"""Re-run certificate steps through the numerical integrator.

The closure construction uses predicates plus closed-form flows; replay uses
only RK4 integration of the projected fields, so a step passes only when two
independent routes agree on the claimed reachability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DegenerateSpectrum, _rk4_path, rk4_step
from .geometry import EmptyRegion, eigen_coords, nudge, region_membership, region_sample_points
from .linalg3 import Degenerate, geodesic, normalize
from .reachability import CrossingStep, FloodStep, Verdict

EPS_REPLAY = 1e-2
OFFSET = 1e-6
MAX_STEPS = 5_000_000


class ReplayBudgetExceeded(RuntimeError):
    pass


@dataclass
class ReplayReport:
    success: bool
    step_id: int
    kind: str
    reason: str = ""
    detail: dict = field(default_factory=dict)
    trajectories: list = field(default_factory=list)


def replay_step_size(m) -> float:
    return 1e-2 / max(float(np.linalg.norm(m)), 1e-12)


def _horizon(spec) -> float:
    return 50.0 / spec.gap + 20.0 * math.log(1.0 / OFFSET) / spec.gap


def _path(m, q0, t_max, h):
    n = int(math.ceil(t_max / h))
    if n > MAX_STEPS:
        raise ReplayBudgetExceeded(f"{n} integration steps requested")
    return _rk4_path(np.ascontiguousarray(m, float), np.ascontiguousarray(q0, float), h, n)


def integrate_until(m, q0, t_max: float, event, h: float | None = None):
    """First time the RK4 trajectory crosses the plane ``event . q = 0``.

    Returns ``(t, point, path)`` or ``None``.  The crossing inside the last
    step is located by bisection on the length of a single RK4 sub-step.
    """
    m = np.ascontiguousarray(m, float)
    h = replay_step_size(m) if h is None else h
    path = _path(m, normalize(q0), t_max, h)
    g = path @ event
    flips = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]
    if len(flips) == 0:
        return None
    i = int(flips[0])
    base = path[i]
    g0 = float(g[i])
    lo, hi = 0.0, h
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = float(rk4_step(m, base, mid) @ event)
        if (gm > 0) == (g0 > 0) and gm != 0.0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    return i * h + tau, rk4_step(m, base, tau), path[: i + 1]


def _require(sub, k):
    spec = sub[k].spectrum
    if isinstance(spec, Degenerate):
        raise DegenerateSpectrum(f"step references degenerate sample {k}: {spec.reason}")
    return spec


def _replay_crossing(step: CrossingStep, sub, eps_replay):
    spec_k, spec_j = _require(sub, step.k), _require(sub, step.j)
    m_k, m_j = sub[step.k].matrix, sub[step.j].matrix
    e1, e2, e3 = spec_j.vectors
    stable_normal = np.cross(e1, e2)
    hit = integrate_until(m_k, step.from_point, _horizon(spec_k), stable_normal)
    if hit is None:
        return ReplayReport(False, step.id, "first", "flow never crosses the stable circle")
    t_cross, q_cross, path_k = hit
    gap = geodesic(q_cross, step.crossing)
    beyond = rk4_step(m_k, q_cross, OFFSET / max(np.linalg.norm(m_k), 1e-12))
    saddle = step.saddle_sign * e2
    path_j = _path(m_j, beyond, _horizon(spec_j), replay_step_size(m_j))
    dist = np.arctan2(np.linalg.norm(np.cross(path_j, saddle), axis=1), path_j @ saddle)
    closest = float(dist.min())
    ok = gap <= eps_replay and closest <= eps_replay
    reason = "" if ok else (f"crossing off by {gap:.3e}" if gap > eps_replay
                            else f"saddle missed by {closest:.3e}")
    detail = {"crossing_time": t_cross, "crossing_gap": gap, "saddle_distance": closest}
    return ReplayReport(ok, step.id, "first", reason, detail, [path_k, path_j])


def _replay_flood(step: FloodStep, sub, eps_replay, n_targets):
    j, l = step.entry.owner, step.l
    spec_j, spec_l = _require(sub, j), _require(sub, l)
    m_j, m_l = sub[j].matrix, sub[l].matrix
    e1, e2, e3 = spec_j.vectors
    carrier_normal = np.cross(e2, e3)
    sigma = step.entry.sign
    targets = list(region_sample_points(step.region, n_targets))
    if step.new_entry is not None:
        # the saddle handed on to later steps must be approachable from the region
        tri = step.region.triangle
        near = nudge(tri.v2, tri.centroid(), 0.5 * eps_replay)
        if not region_membership(near, step.region):
            return ReplayReport(False, step.id, "second", "new saddle is not adjacent to the region")
        targets.append(near)
    misses, trajs = [], []
    for p in targets:
        back = integrate_until(-m_l, p, _horizon(spec_l), carrier_normal)
        if back is None:
            return ReplayReport(False, step.id, "second", "target never traced back to the separatrix")
        t2, c, _ = back
        x = eigen_coords(c, e1, e2, e3)
        if np.sign(x[1]) != sigma:
            return ReplayReport(False, step.id, "second",
                                "backward trace meets the other separatrix semicircle")
        start = normalize(sigma * e2 + step.entry.approach * OFFSET * e1 + np.sign(x[2]) * OFFSET * e3)
        fwd = integrate_until(m_j, start, _horizon(spec_j), np.cross(c, carrier_normal))
        if fwd is None:
            return ReplayReport(False, step.id, "second", "separatrix run never reaches the chord")
        t1, y, path_j = fwd
        path_l = _path(m_l, y, t2, t2 / max(1, math.ceil(t2 / replay_step_size(m_l))))
        miss = geodesic(path_l[-1], p)
        misses.append({"t1": t1, "t2": t2, "miss": miss})
        trajs.append([path_j, path_l])
        if miss > eps_replay:
            return ReplayReport(False, step.id, "second", f"target missed by {miss:.3e}",
                                {"targets": misses}, trajs)
    return ReplayReport(True, step.id, "second", "", {"targets": misses}, trajs)


def replay_step(step, sub, eps_replay: float = EPS_REPLAY, n_targets: int = 5) -> ReplayReport:
    """Check one certificate step by simulation."""
    if isinstance(step, CrossingStep):
        return _replay_crossing(step, sub, eps_replay)
    if isinstance(step, FloodStep):
        return _replay_flood(step, sub, eps_replay, n_targets)
    raise TypeError(f"unknown step type {type(step).__name__}")


def step_signature(step) -> tuple:
    if isinstance(step, CrossingStep):
        return ("first", step.k, step.j, step.saddle_sign, step.from_point.tobytes(),
                step.crossing.tobytes())
    return ("second", step.entry.key, step.entry.approach, step.l, step.region.key,
            step.region.keep_vertex.tobytes(), step.region.cut_circle.normal.tobytes(),
            step.region.triangle.signs)


def validate_verdict(verdict: Verdict, sub, eps_replay: float = EPS_REPLAY,
                     n_targets: int = 5) -> Verdict:
    """Replay every certificate step; any failure downgrades to inconclusive."""
    cache = {}
    failed, reports = [], []
    for ci, closure in enumerate(verdict.closures):
        for step in closure.certificate:
            sig = step_signature(step)
            if sig not in cache:
                try:
                    cache[sig] = replay_step(step, sub, eps_replay, n_targets)
                except (DegenerateSpectrum, ReplayBudgetExceeded, EmptyRegion) as exc:
                    cache[sig] = ReplayReport(False, step.id, step.kind, str(exc))
            rep = cache[sig]
            reports.append({"closure": ci, "step": step.id, "kind": step.kind,
                            "success": rep.success, "reason": rep.reason, "detail": rep.detail})
            if not rep.success:
                failed.append({"closure": ci, "step": step.id, "kind": step.kind,
                               "reason": rep.reason})
    summary = {"eps_replay": eps_replay, "steps": len(reports), "unique": len(cache),
               "failed": failed, "reports": reports}
    if verdict.controllable and failed:
        first = failed[0]
        return replace(verdict, controllable=False, theorem=None,
                       reason=(f"replay failed at closure {first['closure']} step {first['step']}: "
                               f"{first['reason']}"),
                       replay=summary, conditional=False)
    return replace(verdict, replay=summary)
