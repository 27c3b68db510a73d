"""Bilinear systems ``x' = (A + sum_k u^k B_k) x`` and finite control subsystems."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .linalg3 import (ComplexPair, Degenerate, RealDistinct, eigen_decompose,
                      mixed_product, spectrum_eigenvalues)


class DimensionMismatch(ValueError):
    pass


class SampleOutsideControlSet(ValueError):
    def __init__(self, index: int, u):
        super().__init__(f"sample {index} ({list(u)}) lies outside the control set")
        self.index = index


REAL_STABLE = "RealStable"
COMPLEX_ATTRACTING = "ComplexAttractingCycle"
COMPLEX_REPULSIVE = "ComplexRepulsiveCycle"
COMPLEX_NEUTRAL = "ComplexNeutral"
DEGENERATE = "Degenerate"
COMPLEX_CLASSES = (COMPLEX_ATTRACTING, COMPLEX_REPULSIVE)


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise DimensionMismatch("box bounds must be non-empty and of equal length")
        if any(not lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box requires lower < upper componentwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, u) -> bool:
        # open box: strict inequalities
        return all(lo < x < hi for lo, x, hi in zip(self.lower, u, self.upper))

    def vertices(self) -> list:
        return [tuple(v) for v in itertools.product(*zip(self.lower, self.upper))]


@dataclass(frozen=True)
class FiniteSet:
    points: tuple

    def __post_init__(self):
        if not self.points:
            raise ValueError("finite control set must be non-empty")
        if len({len(p) for p in self.points}) != 1:
            raise DimensionMismatch("finite control points differ in dimension")

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def contains(self, u, tol: float = 1e-12) -> bool:
        return any(all(abs(a - b) <= tol for a, b in zip(p, u)) for p in self.points)


ControlSet = Union[Box, FiniteSet]


@dataclass(frozen=True)
class BilinearSystem:
    A: np.ndarray
    B: tuple
    control_set: ControlSet

    def __post_init__(self):
        mats = [np.asarray(self.A, dtype=float)] + [np.asarray(b, dtype=float) for b in self.B]
        if not self.B:
            raise DimensionMismatch("at least one control matrix is required")
        for m in mats:
            if m.shape != (3, 3):
                raise DimensionMismatch("all matrices must be 3x3")
            if not np.all(np.isfinite(m)):
                raise ValueError("matrices must be finite")
        object.__setattr__(self, "A", mats[0])
        object.__setattr__(self, "B", tuple(mats[1:]))
        if self.control_set.dim != len(self.B):
            raise DimensionMismatch(
                f"control set has dimension {self.control_set.dim}, expected {len(self.B)}")

    @property
    def d(self) -> int:
        return len(self.B)


def evaluate_operator(system: BilinearSystem, u) -> np.ndarray:
    """``A(u) = A + sum_k u[k] B_k``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != system.d:
        raise DimensionMismatch(f"control has length {u.shape[0]}, expected {system.d}")
    m = system.A.copy()
    for uk, bk in zip(u, system.B):
        m = m + uk * bk
    return m


@dataclass(frozen=True)
class ParameterSample:
    index: int
    u: tuple
    matrix: np.ndarray
    spectrum: object
    dyn_class: str


def classify(spectrum, eps_abs: float) -> str:
    """Dynamical class of one constant-control subsystem from its spectrum.

    For a complex pair the faster-growing component wins after projection:
    when the real eigenvalue exceeds the real part of the pair the poles
    ``+-e_r`` attract and the invariant circle repels, otherwise the circle
    attracts and the poles are sources.
    """
    if isinstance(spectrum, RealDistinct):
        return REAL_STABLE
    if isinstance(spectrum, ComplexPair):
        diff = spectrum.lambda_r - spectrum.re_c
        if abs(diff) <= eps_abs:
            return COMPLEX_NEUTRAL
        return COMPLEX_REPULSIVE if diff > 0 else COMPLEX_ATTRACTING
    return DEGENERATE


@dataclass(frozen=True)
class SubsystemUN:
    samples: tuple
    eps_spec: float = 1e-7

    @property
    def real_idx(self) -> list:
        return [s.index for s in self.samples if s.dyn_class == REAL_STABLE]

    @property
    def complex_idx(self) -> list:
        return [s.index for s in self.samples
                if s.dyn_class in (COMPLEX_ATTRACTING, COMPLEX_REPULSIVE, COMPLEX_NEUTRAL)]

    @property
    def excluded_idx(self) -> list:
        return [s.index for s in self.samples
                if s.dyn_class in (COMPLEX_NEUTRAL, DEGENERATE)]

    def __getitem__(self, k: int) -> ParameterSample:
        return self.samples[k]

    def __len__(self) -> int:
        return len(self.samples)

    def restricted(self, indices) -> "SubsystemUN":
        """Sub-subsystem keeping the original sample indices."""
        keep = set(indices)
        return SubsystemUN(tuple(s for s in self.samples if s.index in keep), self.eps_spec)


def make_sample(index: int, u, matrix, eps_spec: float = 1e-7) -> ParameterSample:
    matrix = np.asarray(matrix, dtype=float)
    spec = eigen_decompose(matrix, eps_spec)
    eps_abs = eps_spec * float(np.linalg.norm(matrix))
    return ParameterSample(index, tuple(float(x) for x in u), matrix, spec, classify(spec, eps_abs))


def build_subsystem(system: BilinearSystem, us: Sequence, eps_spec: float = 1e-7) -> SubsystemUN:
    if len(us) == 0:
        raise ValueError("at least one control sample is required")
    samples = []
    for k, u in enumerate(us):
        if len(u) != system.d:
            raise DimensionMismatch(f"sample {k} has length {len(u)}, expected {system.d}")
        if not system.control_set.contains(u):
            raise SampleOutsideControlSet(k, u)
        samples.append(make_sample(k, u, evaluate_operator(system, u), eps_spec))
    return SubsystemUN(tuple(samples), eps_spec)


def subsystem_from_matrices(mats, eps_spec: float = 1e-7) -> SubsystemUN:
    """Subsystem whose samples are given directly as operators ``A(u_k)``."""
    return SubsystemUN(tuple(make_sample(k, (float(k),), m, eps_spec) for k, m in enumerate(mats)),
                       eps_spec)


def system_from_matrices(mats) -> tuple:
    """Bilinear system realising ``mats`` as ``A(u_k)`` at ``u_0 = 0`` and unit vectors.

    ``A = mats[0]`` and ``B_k = mats[k] - mats[0]``; the box ``(-0.5, 1.5)^d``
    contains every sample.  For a single matrix a zero control matrix is used.
    """
    mats = [np.asarray(m, dtype=float) for m in mats]
    d = max(1, len(mats) - 1)
    B = [mats[k] - mats[0] for k in range(1, len(mats))] or [np.zeros((3, 3))]
    box = Box(tuple([-0.5] * d), tuple([1.5] * d))
    us = [tuple([0.0] * d)]
    for k in range(1, len(mats)):
        u = [0.0] * d
        u[k - 1] = 1.0
        us.append(tuple(u))
    return BilinearSystem(mats[0], tuple(B), box), us


# --------------------------------------------------------------------------
# condition checks


@dataclass
class GenericityReport:
    cc3: bool
    cc4: bool
    violations: list = field(default_factory=list)


def _directions(sample):
    spec = sample.spectrum
    if isinstance(spec, RealDistinct):
        return list(spec.vectors)
    if isinstance(spec, ComplexPair):
        return [spec.e_r]
    return []


def _planes(sample):
    """Invariant planes as (label, spanning pair)."""
    spec = sample.spectrum
    if isinstance(spec, RealDistinct):
        e = spec.vectors
        return [(1, (e[1], e[2])), (2, (e[2], e[0])), (3, (e[0], e[1]))]
    if isinstance(spec, ComplexPair):
        return [(0, (spec.p1, spec.p2))]
    return []


def check_cc3_cc4(sub: SubsystemUN, eps_geom: float = 1e-9) -> GenericityReport:
    """Spectral simplicity and eigenvector genericity of the usable samples.

    Real samples must have strictly ordered eigenvalues.  Eigen-directions of
    all usable samples must be pairwise distinct up to sign, and no direction
    of one sample may lie in an invariant plane of another.
    """
    violations = []
    usable = [s for s in sub.samples if s.dyn_class in (REAL_STABLE,) + COMPLEX_CLASSES]
    cc3 = True
    for s in usable:
        if s.dyn_class == REAL_STABLE:
            lam = s.spectrum.lambdas
            if not (lam[0] < lam[1] < lam[2]):
                cc3 = False
                violations.append({"kind": "cc3", "sample": s.index})
    for s in sub.samples:
        if s.dyn_class in (COMPLEX_NEUTRAL, DEGENERATE):
            violations.append({"kind": "excluded", "sample": s.index, "class": s.dyn_class})

    cc4 = True
    dirs = [(s.index, i + 1, v) for s in usable for i, v in enumerate(_directions(s))]
    for (k, i, a), (j, s_, b) in itertools.combinations(dirs, 2):
        sine = float(np.linalg.norm(np.cross(a, b)))
        if sine <= eps_geom:
            cc4 = False
            violations.append({"kind": "cc4-equal", "a": [k, i], "b": [j, s_], "measure": sine})
    for sk in usable:
        for sj in usable:
            if sk.index == sj.index:
                continue
            for i, v in enumerate(_directions(sk)):
                for label, (pa, pb) in _planes(sj):
                    mp = abs(mixed_product(v, pa, pb))
                    if mp <= eps_geom:
                        cc4 = False
                        violations.append({"kind": "cc4-plane", "vector": [sk.index, i + 1],
                                           "plane": [sj.index, label], "measure": mp})
    return GenericityReport(cc3, cc4, violations)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Deterministic quasi-uniform spiral lattice of ``n`` unit vectors."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass
class CC1Report:
    holds: bool
    worst_point: np.ndarray
    worst_measure: float
    evaluations: int


def _cc1_operators(system, sub):
    ops = [s.matrix for s in sub.samples]
    if system is not None and isinstance(system.control_set, Box):
        ops += [evaluate_operator(system, v) for v in system.control_set.vertices()]
    return ops


def check_cc1(system, sub: SubsystemUN, grid_n: int = 10000, eps_geom: float = 1e-9) -> CC1Report:
    """Pointwise rank-two check of the projected control fields on a sphere grid.

    At each grid point the largest ``|V(q,u_i) x V(q,u_j)|`` over operator
    pairs is taken; the condition holds at resolution ``grid_n`` when the
    minimum of that over the grid exceeds ``eps_geom``.
    """
    if grid_n < 12:
        raise ValueError("grid_n must be at least 12")
    qs = fibonacci_sphere(grid_n)
    ops = _cc1_operators(system, sub)
    fields = []
    for m in ops:
        aq = qs @ m.T
        radial = np.sum(aq * qs, axis=1)
        fields.append(aq - radial[:, None] * qs)
    best = np.zeros(grid_n)
    for a, b in itertools.combinations(range(len(fields)), 2):
        area = np.linalg.norm(np.cross(fields[a], fields[b]), axis=1)
        best = np.maximum(best, area)
    worst = int(np.argmin(best))
    return CC1Report(bool(best[worst] > eps_geom), qs[worst].copy(), float(best[worst]), grid_n)


@dataclass
class CK1Report:
    has_contracting: bool
    has_expanding: bool

    @property
    def lifts(self) -> bool:
        return self.has_contracting and self.has_expanding


def check_ck1(sub: SubsystemUN) -> CK1Report:
    """Eigenvalue-sign form of the lift condition from the sphere to R^3 minus 0."""
    contracting = expanding = False
    for s in sub.samples:
        if isinstance(s.spectrum, Degenerate):
            lams = np.linalg.eigvals(s.matrix)
        else:
            lams = spectrum_eigenvalues(s.spectrum)
        re = [z.real for z in lams]
        contracting |= all(x < 0 for x in re)
        expanding |= all(x > 0 for x in re)
    return CK1Report(contracting, expanding)
