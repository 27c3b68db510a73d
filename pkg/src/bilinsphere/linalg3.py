"""Three-dimensional vector/matrix helpers and the 3x3 eigenproblem.

Vectors and matrices are plain ``numpy`` arrays of shape ``(3,)`` and
``(3, 3)``.  The eigenproblem is solved through the characteristic cubic in
closed form, never through a general-purpose LAPACK call, so that the
classification into real/complex spectra is decided by one discriminant.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12
RESIDUAL_TOL = 1e-9


def vec(x, y, z) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def is_unit(v, tol: float = UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


def cross(a, b) -> np.ndarray:
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ], dtype=float)


def dot(a, b) -> float:
    return float(a[0] * b[0] + a[1] * b[1] + a[2] * b[2])


def mixed_product(a, b, c) -> float:
    """Determinant of the matrix with rows ``a, b, c``.

    Evaluated as ``(a x b) . c`` so that it agrees bit-for-bit with
    ``dot(cross(a, b), c)``.
    """
    return float((a[1] * b[2] - a[2] * b[1]) * c[0]
                 + (a[2] * b[0] - a[0] * b[2]) * c[1]
                 + (a[0] * b[1] - a[1] * b[0]) * c[2])


def geodesic(p, q) -> float:
    """Great-circle distance between two unit vectors (atan2 form, stable)."""
    return math.atan2(float(np.linalg.norm(cross(p, q))), dot(p, q))


def canonical_sign(v) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude component is positive."""
    v = np.asarray(v, dtype=float)
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


# --------------------------------------------------------------------------
# cubic


@dataclass(frozen=True)
class CubicRoots:
    """Roots of a monic cubic.

    ``roots`` holds three complex numbers.  When ``real_triple`` is true all
    imaginary parts are zero and the roots are sorted ascending; otherwise
    ``roots[0]`` is the real root and ``roots[1]`` has positive imaginary
    part.  ``multiplicity[i]`` counts how many roots coincide with
    ``roots[i]`` (1, 2 or 3).
    """

    roots: tuple
    real_triple: bool
    multiplicity: tuple

    @property
    def simple(self) -> bool:
        return all(m == 1 for m in self.multiplicity)


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _newton(r, c2, c1, c0, iters=2):
    for _ in range(iters):
        p = ((r + c2) * r + c1) * r + c0
        dp = (3.0 * r + 2.0 * c2) * r + c1
        if dp == 0:
            break
        step = p / dp
        if not cmath.isfinite(step):
            break
        r_new = r - step
        p_new = ((r_new + c2) * r_new + c1) * r_new + c0
        if abs(p_new) > abs(p):
            break
        r = r_new
    return r


def solve_cubic(c2: float, c1: float, c0: float) -> CubicRoots:
    """Roots of ``t**3 + c2 t**2 + c1 t + c0``.

    Trigonometric form for three real roots, Cardano otherwise, then a
    Newton polish per root.
    """
    c2, c1, c0 = float(c2), float(c1), float(c0)
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    scale = max(1.0, abs(c0), abs(c1), abs(c2))
    # disc > 0: three distinct real roots; disc < 0: one real + complex pair
    disc = -(4.0 * p ** 3 + 27.0 * q * q)
    tiny = 1e-14 * scale ** 2

    if abs(p) <= 1e-15 * scale and abs(q) <= 1e-15 * scale:
        r = -shift
        return CubicRoots((complex(r), complex(r), complex(r)), True, (3, 3, 3))

    if disc > tiny:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        ys = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
        rs = sorted(_newton(y - shift, c2, c1, c0) for y in ys)
        roots = tuple(complex(r) for r in rs)
        mult = _multiplicities(rs, scale)
        return CubicRoots(roots, True, mult)

    if disc < -tiny:
        half = q / 2.0
        root_d = math.sqrt(half * half + p ** 3 / 27.0)
        a = -_cbrt(half + math.copysign(root_d, half)) if half != 0 else _cbrt(root_d)
        b = -p / (3.0 * a) if a != 0 else 0.0
        y_real = a + b
        y_re = -(a + b) / 2.0
        y_im = abs(math.sqrt(3.0) / 2.0 * (a - b))
        r_real = _newton(y_real - shift, c2, c1, c0)
        r_cplx = _newton(complex(y_re - shift, y_im), c2, c1, c0)
        r_cplx = complex(r_cplx.real, abs(r_cplx.imag))
        roots = (complex(r_real), r_cplx, r_cplx.conjugate())
        return CubicRoots(roots, False, (1, 1, 1))

    # disc numerically zero: double root (p != 0)
    y1 = 3.0 * q / p
    y2 = -3.0 * q / (2.0 * p)
    rs = sorted([y1 - shift, y2 - shift, y2 - shift])
    return CubicRoots(tuple(complex(r) for r in rs), True, _multiplicities(rs, scale))


def _multiplicities(rs, scale):
    tol = 1e-7 * scale
    return tuple(sum(1 for s in rs if abs(s - r) <= tol) for r in rs)


# --------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class RealDistinct:
    lambdas: tuple  # ascending
    vectors: tuple  # unit eigenvectors e1, e2, e3

    @property
    def e1(self):
        return self.vectors[0]

    @property
    def e2(self):
        return self.vectors[1]

    @property
    def e3(self):
        return self.vectors[2]

    @property
    def gap(self) -> float:
        return min(self.lambdas[1] - self.lambdas[0], self.lambdas[2] - self.lambdas[1])


@dataclass(frozen=True)
class ComplexPair:
    """One real eigenvalue plus a conjugate pair ``re_c +- i im_c``.

    ``w_re``, ``w_im`` are the real and imaginary parts of an eigenvector for
    ``re_c + i im_c``; they are the frame in which the rotation-dilation
    solution formulas hold.  ``p1``, ``p2`` are an orthonormal basis of the
    same plane.
    """

    lambda_r: float
    re_c: float
    im_c: float
    e_r: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    w_re: np.ndarray
    w_im: np.ndarray


@dataclass(frozen=True)
class Degenerate:
    reason: str


def char_poly(m) -> tuple[float, float, float]:
    """Coefficients ``(c2, c1, c0)`` of ``det(tI - m)``."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    minors = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
              + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
              + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
    return -tr, minors, -float(np.linalg.det(m))


def _null_vector(shifted):
    """Best null vector of a rank-2 3x3 matrix from cross products of rows."""
    r = shifted
    cands = [np.cross(r[0], r[1]), np.cross(r[0], r[2]), np.cross(r[1], r[2])]
    norms = [np.sqrt(np.sum(np.abs(c) ** 2)) for c in cands]
    i = int(np.argmax(norms))
    if norms[i] == 0:
        return None
    return cands[i] / norms[i]


def _polish(m, lam, v, norm_m):
    """One shifted inverse-iteration step; keeps whichever vector is better."""
    n = np.sqrt(np.sum(np.abs(v) ** 2))
    v = v / n
    res0 = np.linalg.norm(m @ v - lam * v)
    mu = 1e-10 * max(norm_m, 1e-300)
    try:
        w = np.linalg.solve(m - (lam + mu) * np.eye(3), v)
    except np.linalg.LinAlgError:
        return v, res0
    nw = np.sqrt(np.sum(np.abs(w) ** 2))
    if not np.isfinite(nw) or nw == 0:
        return v, res0
    w = w / nw
    res1 = np.linalg.norm(m @ w - lam * w)
    return (w, res1) if res1 < res0 else (v, res0)


def eigen_decompose(m, eps_spec: float = 1e-7):
    """Classify the spectrum of a real 3x3 matrix.

    ``eps_spec`` is relative: eigenvalues closer than ``eps_spec * ||m||_F``
    are treated as coincident and the result is :class:`Degenerate`.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return Degenerate("matrix must be a finite 3x3 array")
    norm_m = float(np.linalg.norm(m))
    if norm_m == 0.0:
        return Degenerate("zero matrix")
    eps = eps_spec * norm_m
    tol = RESIDUAL_TOL * norm_m
    cr = solve_cubic(*char_poly(m))

    if cr.real_triple:
        lams = [r.real for r in cr.roots]
        gap = min(lams[1] - lams[0], lams[2] - lams[1])
        if not cr.simple or gap <= eps:
            return Degenerate(f"eigenvalue gap {gap:.3e} below {eps:.3e}")
        vectors = []
        for lam in lams:
            v = _null_vector(m - lam * np.eye(3))
            if v is None:
                return Degenerate("eigenvector not resolvable")
            v, res = _polish(m, lam, v, norm_m)
            if res > tol:
                return Degenerate(f"eigenvector residual {res:.3e} exceeds {tol:.3e}")
            vectors.append(canonical_sign(v))
        if abs(mixed_product(*vectors)) <= 1e-12:
            return Degenerate("eigenvectors nearly coplanar")
        return RealDistinct(tuple(lams), tuple(vectors))

    lam_r = cr.roots[0].real
    lam_c = cr.roots[1]
    if 2.0 * lam_c.imag <= eps:
        return Degenerate(f"complex pair nearly real (imag {lam_c.imag:.3e})")
    if abs(lam_c - lam_r) <= eps:
        return Degenerate("real eigenvalue collides with complex pair")
    e_r = _null_vector(m - lam_r * np.eye(3))
    if e_r is None:
        return Degenerate("real eigenvector not resolvable")
    e_r, res = _polish(m, lam_r, e_r, norm_m)
    if res > tol:
        return Degenerate(f"eigenvector residual {res:.3e} exceeds {tol:.3e}")
    e_r = canonical_sign(np.real(e_r))

    w = _null_vector(m.astype(complex) - lam_c * np.eye(3))
    if w is None:
        return Degenerate("complex eigenvector not resolvable")
    w, res = _polish(m.astype(complex), lam_c, w, norm_m)
    if res > tol:
        return Degenerate(f"complex eigenvector residual {res:.3e} exceeds {tol:.3e}")
    # rotate w so that its real and imaginary parts are orthogonal: best conditioned frame
    a, b, c = np.dot(w.real, w.real), np.dot(w.imag, w.imag), np.dot(w.real, w.imag)
    phi = 0.5 * math.atan2(2.0 * c, a - b)
    w = w * cmath.exp(-1j * phi)
    w_re, w_im = np.real(w).copy(), np.imag(w).copy()
    if np.linalg.norm(w_im) < 1e-12 or np.linalg.norm(w_re) < 1e-12:
        return Degenerate("complex eigenvector has no planar part")
    p1 = normalize(w_re)
    p2 = w_im - np.dot(w_im, p1) * p1
    p2 = normalize(p2)
    return ComplexPair(lam_r, lam_c.real, lam_c.imag, e_r, p1, p2, w_re, w_im)


def spectrum_eigenvalues(spec) -> list:
    """Eigenvalues of a non-degenerate spectrum as complex numbers."""
    if isinstance(spec, RealDistinct):
        return [complex(x) for x in spec.lambdas]
    if isinstance(spec, ComplexPair):
        lc = complex(spec.re_c, spec.im_c)
        return [complex(spec.lambda_r), lc, lc.conjugate()]
    return []


def random_rotation(rng) -> np.ndarray:
    """Uniformly distributed rotation matrix (QR of a Gaussian matrix)."""
    g = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rotation(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` by ``angle`` radians."""
    k = normalize(axis)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * kx @ kx


def skew(axis) -> np.ndarray:
    """Matrix of ``x -> axis x x`` (rotation generator)."""
    a = np.asarray(axis, dtype=float)
    return np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]], dtype=float)
