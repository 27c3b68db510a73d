"""Flows of the projected system on the sphere.

Two independent routes to the same trajectories are provided: closed-form
flows in the eigen-frame of a constant control (:func:`exact_flow`,
:func:`flow_on_sphere`), and fixed-step RK4 integration of the projected
field with renormalisation (:func:`integrate_projected`).  The Monte Carlo
switching search :func:`monte_carlo_connect` is built on the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .linalg3 import ComplexPair, Degenerate, RealDistinct, geodesic, normalize


class DegenerateSpectrum(ValueError):
    pass


class Underflow(ArithmeticError):
    pass


def projected_field(m, q) -> np.ndarray:
    """Tangential part ``A q - (A q . q) q`` of the linear field at ``q``."""
    m = np.asarray(m, dtype=float)
    q = np.asarray(q, dtype=float)
    aq = m @ q
    return aq - np.dot(aq, q) * q


# --------------------------------------------------------------------------
# closed-form flows


@dataclass(frozen=True)
class SphereFlow:
    """Closed-form flow of one constant control, with its frame pre-factored."""

    spectrum: object
    basis: np.ndarray   # columns: eigen-frame
    inverse: np.ndarray

    @classmethod
    def of(cls, spec) -> "SphereFlow":
        if isinstance(spec, RealDistinct):
            basis = np.column_stack(spec.vectors)
        elif isinstance(spec, ComplexPair):
            basis = np.column_stack([spec.e_r, spec.w_re, spec.w_im])
        else:
            raise DegenerateSpectrum(getattr(spec, "reason", "degenerate spectrum"))
        return cls(spec, basis, np.linalg.inv(basis))

    def _evolve(self, c, t, shift_exponents: bool):
        spec = self.spectrum
        t = np.asarray(t, dtype=float)
        tt = t[..., None]
        if isinstance(spec, RealDistinct):
            rates = np.asarray(spec.lambdas)
            expo = rates * tt
            if shift_exponents:
                live = np.where(c != 0.0, expo, -np.inf)
                expo = expo - np.max(live, axis=-1, keepdims=True)
            return c * np.exp(expo)
        a, b, lr = spec.re_c, spec.im_c, spec.lambda_r
        e_r = lr * t
        e_c = a * t
        if shift_exponents:
            live_r = np.where(c[..., 0] != 0.0, e_r, -np.inf)
            live_c = np.where((c[..., 1] != 0.0) | (c[..., 2] != 0.0), e_c, -np.inf)
            top = np.maximum(live_r, live_c)
            e_r, e_c = e_r - top, e_c - top
        cs, sn = np.cos(b * t), np.sin(b * t)
        x1 = c[..., 0] * np.exp(e_r)
        x2 = (c[..., 1] * cs + c[..., 2] * sn) * np.exp(e_c)
        x3 = (-c[..., 1] * sn + c[..., 2] * cs) * np.exp(e_c)
        return np.stack([x1, x2, x3], axis=-1)

    def state(self, x0, t):
        c = self.inverse @ np.asarray(x0, dtype=float)
        return self._evolve(c, t, False) @ self.basis.T

    def sphere(self, q0, t):
        """Central projection of the linear flow; ``t`` may be an array."""
        c = self.inverse @ np.asarray(q0, dtype=float)
        with np.errstate(invalid="ignore"):
            x = self._evolve(c, t, True) @ self.basis.T
        n = np.linalg.norm(x, axis=-1, keepdims=True)
        if not np.all(n >= 1e-300):
            raise Underflow("flow collapsed below representable range")
        return x / n


def exact_flow(spec, x0, t: float) -> np.ndarray:
    """Linear flow ``exp(t A) x0`` through the eigen-frame solution formulas."""
    return SphereFlow.of(spec).state(x0, t)


def flow_on_sphere(spec, q0, t: float) -> np.ndarray:
    return SphereFlow.of(spec).sphere(q0, t)


# --------------------------------------------------------------------------
# numerical integration


@njit(cache=True)
def _field(m, q, out):
    a0 = m[0, 0] * q[0] + m[0, 1] * q[1] + m[0, 2] * q[2]
    a1 = m[1, 0] * q[0] + m[1, 1] * q[1] + m[1, 2] * q[2]
    a2 = m[2, 0] * q[0] + m[2, 1] * q[1] + m[2, 2] * q[2]
    r = a0 * q[0] + a1 * q[1] + a2 * q[2]
    out[0] = a0 - r * q[0]
    out[1] = a1 - r * q[1]
    out[2] = a2 - r * q[2]


@njit(cache=True)
def _rk4_step(m, q, h, out):
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    tmp = np.empty(3)
    _field(m, q, k1)
    for i in range(3):
        tmp[i] = q[i] + 0.5 * h * k1[i]
    _field(m, tmp, k2)
    for i in range(3):
        tmp[i] = q[i] + 0.5 * h * k2[i]
    _field(m, tmp, k3)
    for i in range(3):
        tmp[i] = q[i] + h * k3[i]
    _field(m, tmp, k4)
    s = 0.0
    for i in range(3):
        out[i] = q[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        s += out[i] * out[i]
    s = math.sqrt(s)
    for i in range(3):
        out[i] /= s


@njit(cache=True)
def _rk4_path(m, q0, h, n):
    out = np.empty((n + 1, 3))
    out[0] = q0
    for s in range(n):
        _rk4_step(m, out[s], h, out[s + 1])
    return out


def rk4_step(m, q, h: float) -> np.ndarray:
    out = np.empty(3)
    _rk4_step(np.ascontiguousarray(m, dtype=float), np.ascontiguousarray(q, dtype=float),
              float(h), out)
    return out


def default_step(m) -> float:
    return 1e-3 / max(float(np.linalg.norm(m)), 1e-12)


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control: ``(sample index, duration)`` segments."""

    segments: tuple = ()

    def __post_init__(self):
        for k, dt in self.segments:
            if not (dt > 0 and math.isfinite(dt)):
                raise ValueError(f"segment duration must be positive and finite, got {dt}")

    @property
    def duration(self) -> float:
        return float(sum(dt for _, dt in self.segments))

    def __add__(self, other: "ControlSchedule") -> "ControlSchedule":
        return ControlSchedule(self.segments + other.segments)


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    schedule: ControlSchedule = field(default_factory=ControlSchedule)

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


def integrate_projected(m, q0, t: float, h: float | None = None) -> Trajectory:
    """Classic RK4 on the projected field, renormalising after every step.

    The last step is shortened so that the trajectory ends exactly at ``t``.
    """
    m = np.ascontiguousarray(m, dtype=float)
    if h is None:
        h = default_step(m)
    if not h > 0:
        raise ValueError("step must be positive")
    q0 = normalize(q0)
    if t <= 0:
        return Trajectory(np.zeros(1), q0[None, :].copy())
    n = int(math.ceil(t / h - 1e-12))
    h_eff = t / n
    pts = _rk4_path(m, np.ascontiguousarray(q0), h_eff, n)
    return Trajectory(np.linspace(0.0, t, n + 1), pts)


def simulate_schedule(sub, q0, schedule: ControlSchedule, h: float | None = None) -> Trajectory:
    """Integrate a switching schedule numerically, segment by segment."""
    q = normalize(q0)
    times, points = [np.zeros(1)], [q[None, :]]
    t0 = 0.0
    for k, dt in schedule.segments:
        tr = integrate_projected(sub[k].matrix, q, dt, h)
        times.append(t0 + tr.times[1:])
        points.append(tr.points[1:])
        t0 += dt
        q = tr.end
    return Trajectory(np.concatenate(times), np.concatenate(points), schedule)


def apply_schedule(flows: dict, q0, schedule: ControlSchedule) -> np.ndarray:
    """Endpoint of a schedule through closed-form flows."""
    q = np.asarray(q0, dtype=float)
    for k, dt in schedule.segments:
        q = flows[k].sphere(q, dt)
    return q


def sample_flows(sub) -> dict:
    return {s.index: SphereFlow.of(s.spectrum) for s in sub.samples
            if not isinstance(s.spectrum, Degenerate)}


# --------------------------------------------------------------------------
# Monte Carlo reachability oracle


@dataclass
class OrbitCloud:
    """Visited points of a randomized switching search with back-pointers."""

    origin: np.ndarray
    points: list = field(default_factory=list)
    parent: list = field(default_factory=list)
    segment: list = field(default_factory=list)

    def __post_init__(self):
        self.points.append(np.asarray(self.origin, dtype=float))
        self.parent.append(-1)
        self.segment.append(None)
        self._cache = None

    def add(self, point, parent: int, segment) -> int:
        self.points.append(point)
        self.parent.append(parent)
        self.segment.append(segment)
        self._cache = None
        return len(self.points) - 1

    def array(self) -> np.ndarray:
        if self._cache is None:
            self._cache = np.asarray(self.points)
        return self._cache

    def chain(self, i: int) -> list:
        """Segments from the origin to node ``i``, in the order they were applied."""
        segs = []
        while self.parent[i] >= 0:
            segs.append(self.segment[i])
            i = self.parent[i]
        return segs[::-1]

    def nearest(self, q) -> tuple:
        dots = self.array() @ q
        i = int(np.argmax(dots))
        return i, math.acos(max(-1.0, min(1.0, float(dots[i]))))

    def __len__(self):
        return len(self.points)


def spectral_scale(sub) -> float:
    mags = [abs(z) for s in sub.samples for z in np.linalg.eigvals(s.matrix)]
    return max(max(mags, default=1.0), 1e-12)


def _random_unit(rng) -> np.ndarray:
    return normalize(rng.normal(size=3))


def monte_carlo_connect(sub, start, target, tol: float = 0.05, budget: int = 10_000,
                        rng_seed: int = 42, stall_limit: int = 30):
    """Randomized switching search for a schedule from ``start`` to ``target``.

    Segments use a uniformly drawn sample index and an exponentially
    distributed duration (mean ``1/sigma_max``).  A forward cloud is grown
    greedily, accepting a segment when it brings the current point closer to
    a backward cloud of points known to reach ``target``.  The backward
    cloud grows from its node closest to the current forward point or to a
    uniformly random direction.  After ``stall_limit`` rejected proposals the
    greedy walk restarts, after a random excursion, from the forward node
    closest to a random direction.  A candidate is returned only
    after its closed-form replay ends within ``tol`` of ``target``.

    Returns a :class:`ControlSchedule` or ``None`` when ``budget`` segments
    are exhausted.
    """
    if not tol > 0 or budget < 1:
        raise ValueError("tol must be positive and budget at least 1")
    start, target = normalize(start), normalize(target)
    if geodesic(start, target) <= tol:
        return ControlSchedule(())
    flows = sample_flows(sub)
    keys = sorted(flows)
    if not keys:
        return None
    mean_dt = 1.0 / spectral_scale(sub)
    rng = np.random.default_rng(rng_seed)

    fwd = OrbitCloud(start)
    bwd = OrbitCloud(target)
    tried = set()

    def draw():
        return keys[int(rng.integers(len(keys)))], float(rng.exponential(mean_dt)) + 1e-9

    def attempt(i_f, i_b):
        if (i_f, i_b) in tried:
            return None
        tried.add((i_f, i_b))
        forward = fwd.chain(i_f)
        backward = [seg for seg in bwd.chain(i_b)][::-1]
        sched = ControlSchedule(tuple(forward) + tuple(backward))
        end = apply_schedule(flows, start, sched)
        return sched if geodesic(end, target) <= tol else None

    cur = 0
    _, cur_d = bwd.nearest(start)
    used = 0
    stall = 0
    while used < budget:
        if rng.random() < 0.2:
            if rng.random() < 0.5:
                i = bwd.nearest(fwd.points[cur])[0]
            else:
                i = bwd.nearest(_random_unit(rng))[0]
            k, dt = draw()
            p = flows[k].sphere(bwd.points[i], -dt)
            used += 1
            if np.all(np.isfinite(p)):
                j = bwd.add(p, i, (k, dt))
                d = geodesic(fwd.points[cur], p)
                if d < cur_d:
                    cur_d = d
                    if d <= tol:
                        found = attempt(cur, j)
                        if found is not None:
                            return found
            continue
        k, dt = draw()
        p = flows[k].sphere(fwd.points[cur], dt)
        used += 1
        j_b, d = bwd.nearest(p)
        if d < cur_d:
            cur = fwd.add(p, cur, (k, dt))
            cur_d = d
            stall = 0
            if d <= tol:
                found = attempt(cur, j_b)
                if found is not None:
                    return found
            continue
        stall += 1
        if stall >= stall_limit:
            stall = 0
            node = fwd.nearest(_random_unit(rng))[0]
            for _ in range(int(rng.integers(1, 4))):
                if used >= budget:
                    break
                k, dt = draw()
                p = flows[k].sphere(fwd.points[node], dt)
                used += 1
                node = fwd.add(p, node, (k, dt))
            cur = node
            _, cur_d = bwd.nearest(fwd.points[cur])
    return None
