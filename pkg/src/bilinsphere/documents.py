"""JSON documents: system input, reports, geometry export and trajectories.

Every document carries ``format`` and ``version`` fields.  Parsing is
strict: unknown keys, missing keys and wrongly shaped arrays are rejected
with the offending field path (and the line number for syntax errors).
Floats are written with Python's shortest round-trip representation, so
serialising the same data twice gives identical bytes.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .geometry import CellComplex, GreatCircle, Region, side_circles
from .linalg3 import ComplexPair, Degenerate, RealDistinct
from .reachability import CrossingStep, FloodStep, ReachClosure, Verdict
from .system import (BilinearSystem, Box, DimensionMismatch, FiniteSet,
                     SampleOutsideControlSet, SubsystemUN, build_subsystem)

VERSION = 1
SYSTEM_FORMAT = "bilinsphere.system"
SAMPLES_FORMAT = "bilinsphere.samples"
SCHEDULE_FORMAT = "bilinsphere.schedule"
REPORT_FORMAT = "bilinsphere.report"
GEOMETRY_FORMAT = "bilinsphere.geometry"
TRAJECTORY_FORMAT = "bilinsphere.trajectory"


class ParseError(ValueError):
    """Malformed document text or structure."""


class ValidationError(ValueError):
    """Well-formed document describing an invalid system."""


# --------------------------------------------------------------------------
# plain-data conversion and text


def plain(obj):
    """Recursively convert numpy values and tuples into JSON-ready Python data."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return x
    return obj


def _is_scalar(x) -> bool:
    return x is None or isinstance(x, (bool, int, float, str))


def _format(obj, indent: int) -> str:
    pad, inner = " " * indent, " " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_format(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if all(_is_scalar(v) for v in obj):
            return json.dumps(obj, allow_nan=False, separators=(", ", ": "))
        items = [inner + _format(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(obj, allow_nan=False)


def dumps(doc: dict) -> str:
    """Deterministic JSON text; arrays of scalars stay on one line."""
    return _format(plain(doc), 0) + "\n"


def loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# --------------------------------------------------------------------------
# strict field readers


def _check_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise ParseError(f"{path or 'document'}: expected an object")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ParseError(f"{path or 'document'}: unknown key(s) {unknown}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ParseError(f"{path or 'document'}: missing key(s) {missing}")


def _number(x, path) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{path}: expected a number")
    x = float(x)
    if not math.isfinite(x):
        raise ParseError(f"{path}: number must be finite")
    return x


def _vector(x, path, n=None) -> list:
    if not isinstance(x, list):
        raise ParseError(f"{path}: expected an array")
    if n is not None and len(x) != n:
        raise ParseError(f"{path}: expected {n} entries, got {len(x)}")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(x)]


def _matrix(x, path) -> np.ndarray:
    if not isinstance(x, list) or len(x) != 3:
        raise ParseError(f"{path}: expected a 3x3 array (3 rows)")
    return np.array([_vector(row, f"{path}[{i}]", 3) for i, row in enumerate(x)])


def _header(doc, fmt):
    if doc.get("format") != fmt:
        raise ParseError(f"format: expected {fmt!r}, got {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise ParseError(f"version: unsupported version {doc.get('version')!r}")


def _control_set(cs, path, d):
    if not isinstance(cs, dict) or "type" not in cs:
        raise ParseError(f"{path}: expected an object with a 'type'")
    if cs["type"] == "box":
        _check_keys(cs, path, ("type", "lower", "upper"))
        lower = _vector(cs["lower"], f"{path}.lower")
        upper = _vector(cs["upper"], f"{path}.upper")
        if len(lower) != d or len(upper) != d:
            raise ValidationError(f"{path}: box dimension must equal the number of control matrices ({d})")
        if any(not lo < hi for lo, hi in zip(lower, upper)):
            raise ValidationError(f"{path}: lower must be strictly below upper")
        return Box(tuple(lower), tuple(upper))
    if cs["type"] == "finite":
        _check_keys(cs, path, ("type", "points"))
        pts = cs["points"]
        if not isinstance(pts, list) or not pts:
            raise ValidationError(f"{path}.points: must be a non-empty array")
        pts = [tuple(_vector(p, f"{path}.points[{i}]", d)) for i, p in enumerate(pts)]
        return FiniteSet(tuple(pts))
    raise ParseError(f"{path}.type: expected 'box' or 'finite', got {cs['type']!r}")


def _samples(raw, path, d) -> list:
    if not isinstance(raw, list):
        raise ParseError(f"{path}: expected an array")
    if not raw:
        raise ValidationError(f"{path}: at least one sample is required")
    return [tuple(_vector(u, f"{path}[{i}]", d)) for i, u in enumerate(raw)]


def parse_system_document(doc, eps_spec: float = 1e-7, samples=None):
    """Build ``(system, subsystem, samples)`` from a decoded system document."""
    _check_keys(doc, "", ("format", "version", "dim", "A", "B", "control_set", "samples"))
    _header(doc, SYSTEM_FORMAT)
    if doc["dim"] != 3 or isinstance(doc["dim"], bool):
        raise ValidationError(f"dim: only dim = 3 is supported, got {doc['dim']!r}")
    A = _matrix(doc["A"], "A")
    if not isinstance(doc["B"], list) or not doc["B"]:
        raise ValidationError("B: at least one control matrix is required")
    B = tuple(_matrix(b, f"B[{i}]") for i, b in enumerate(doc["B"]))
    d = len(B)
    cs = _control_set(doc["control_set"], "control_set", d)
    us = _samples(doc["samples"], "samples", d) if samples is None else samples
    try:
        system = BilinearSystem(A, B, cs)
        sub = build_subsystem(system, us, eps_spec)
    except SampleOutsideControlSet as exc:
        raise ValidationError(f"samples[{exc.index}]: {exc}") from None
    except DimensionMismatch as exc:
        raise ValidationError(str(exc)) from None
    return system, sub, us


def parse_system(text: str, eps_spec: float = 1e-7, samples=None):
    """Parse system document text into ``(BilinearSystem, SubsystemUN)``."""
    system, sub, _ = parse_system_document(loads(text), eps_spec, samples)
    return system, sub


def parse_samples(text: str, d: int) -> list:
    doc = loads(text)
    _check_keys(doc, "", ("format", "version", "samples"))
    _header(doc, SAMPLES_FORMAT)
    return _samples(doc["samples"], "samples", d)


def parse_schedule(text: str):
    """Schedule document: start point, ``[sample, duration]`` segments, optional step."""
    from .dynamics import ControlSchedule

    doc = loads(text)
    _check_keys(doc, "", ("format", "version", "start", "segments"), ("step",))
    _header(doc, SCHEDULE_FORMAT)
    start = np.array(_vector(doc["start"], "start", 3))
    if not np.linalg.norm(start) > 0:
        raise ValidationError("start: must be non-zero")
    if not isinstance(doc["segments"], list):
        raise ParseError("segments: expected an array")
    segs = []
    for i, seg in enumerate(doc["segments"]):
        path = f"segments[{i}]"
        if not isinstance(seg, list) or len(seg) != 2 or isinstance(seg[0], bool) \
                or not isinstance(seg[0], int):
            raise ParseError(f"{path}: expected [sample index, duration]")
        dt = _number(seg[1], f"{path}[1]")
        if not dt > 0:
            raise ValidationError(f"{path}[1]: duration must be positive")
        segs.append((seg[0], dt))
    step = None
    if "step" in doc:
        step = _number(doc["step"], "step")
        if not step > 0:
            raise ValidationError("step: must be positive")
    return start, ControlSchedule(tuple(segs)), step


def system_document(system: BilinearSystem, samples) -> dict:
    cs = system.control_set
    if isinstance(cs, Box):
        cset = {"type": "box", "lower": list(cs.lower), "upper": list(cs.upper)}
    else:
        cset = {"type": "finite", "points": [list(p) for p in cs.points]}
    return plain({"format": SYSTEM_FORMAT, "version": VERSION, "dim": 3, "A": system.A,
                  "B": list(system.B), "control_set": cset,
                  "samples": [list(u) for u in samples]})


def serialize_system(system: BilinearSystem, samples) -> str:
    return dumps(system_document(system, samples))


# --------------------------------------------------------------------------
# report pieces


def spectrum_record(spec) -> dict:
    if isinstance(spec, RealDistinct):
        return {"kind": "real", "eigenvalues": list(spec.lambdas),
                "eigenvectors": [v for v in spec.vectors]}
    if isinstance(spec, ComplexPair):
        return {"kind": "complex", "real_eigenvalue": spec.lambda_r,
                "complex_eigenvalue": [spec.re_c, spec.im_c], "real_eigenvector": spec.e_r,
                "invariant_plane": [spec.p1, spec.p2]}
    return {"kind": "degenerate", "reason": spec.reason}


def samples_record(sub: SubsystemUN) -> list:
    return [{"index": s.index, "u": list(s.u), "class": s.dyn_class, "matrix": s.matrix,
             "spectrum": spectrum_record(s.spectrum)} for s in sub.samples]


def circle_record(c: GreatCircle) -> dict:
    return {"owner": c.owner, "axis": c.axis, "normal": c.normal, "span": [c.span_a, c.span_b]}


def region_record(r: Region) -> dict:
    """Region as the half-space predicates ``sign(normal . p) == sign`` it satisfies."""
    j, l, signs, case = r.key
    constraints = []
    for circle, ref in side_circles(r.triangle) + [(r.cut_circle, r.keep_vertex)]:
        n = np.cross(circle.span_a, circle.span_b)
        constraints.append({"normal": n, "sign": 1 if float(n @ ref) > 0 else -1})
    return {"separatrix_owner": j, "triangle_owner": l, "triangle_signs": list(signs),
            "cut_case": case, "triangle": [r.triangle.v1, r.triangle.v2, r.triangle.v3],
            "cut_normal": r.cut_circle.normal, "keep_vertex": r.keep_vertex,
            "constraints": constraints}


def step_record(step) -> dict:
    if isinstance(step, CrossingStep):
        return {"id": step.id, "kind": "crossing", "from": step.from_point, "k": step.k,
                "j": step.j, "triangle_signs": list(step.triangle.signs),
                "crossing": step.crossing, "crossing_time": step.crossing_time,
                "saddle_sign": step.saddle_sign, "new_entry": list(step.new_entry),
                "origin": _origin(step.origin), "predicates": step.predicates}
    if isinstance(step, FloodStep):
        return {"id": step.id, "kind": "flooding",
                "entry": {"owner": step.entry.owner, "sign": step.entry.sign,
                          "saddle": step.entry.saddle, "approach": step.entry.approach,
                          "side_ref": step.entry.side_ref, "via": step.entry.via},
                "l": step.l, "cut_case": step.cut_case, "region": region_record(step.region),
                "new_entry": list(step.new_entry) if step.new_entry is not None else None,
                "predicates": step.predicates}
    raise TypeError(type(step).__name__)


def _origin(origin):
    if origin is None or isinstance(origin, str):
        return origin
    j, l, signs, case = origin
    return [j, l, list(signs), case]


def closure_record(c: ReachClosure) -> dict:
    return {"seed": c.seed,
            "co1": [{"owner": e.owner, "sign": e.sign, "saddle": e.saddle, "via": e.via}
                    for e in c.co1.values()],
            "co2": [region_record(r) for r in c.regions],
            "partial": c.partial, "sweeps": c.sweeps, "skipped": c.skipped,
            "certificate": [step_record(s) for s in c.certificate]}


def verdict_record(v: Verdict) -> dict:
    return {"status": "Controllable" if v.controllable else "Inconclusive",
            "label": v.label, "theorem": v.theorem, "witness": v.witness, "reason": v.reason,
            "conditional": v.conditional,
            "closures": [closure_record(c) for c in v.closures],
            "replay": v.replay}


def conditions_record(cc1, genericity, ck1, cc2_status) -> dict:
    return {"cc1": {"holds": cc1.holds, "worst_point": cc1.worst_point,
                    "worst_measure": cc1.worst_measure, "evaluations": cc1.evaluations},
            "cc2": {"status": cc2_status},
            "cc3": genericity.cc3, "cc4": genericity.cc4,
            "genericity_violations": genericity.violations,
            "ck1": {"has_contracting": ck1.has_contracting, "has_expanding": ck1.has_expanding,
                    "lifts": ck1.lifts}}


def report_document(command: str, **sections) -> dict:
    return plain({"format": REPORT_FORMAT, "version": VERSION, "command": command, **sections})


def geometry_document(cx: CellComplex, closures: dict) -> dict:
    """Circles, triangles, separatrices and poles of every sample plus closure regions."""
    circles, triangles, separatrices, poles = [], [], [], []
    for k in sorted(cx.real):
        cells = cx.real[k]
        circles += [circle_record(cells.circles[a]) for a in (1, 2, 3)]
        for signs in sorted(cells.triangles):
            t = cells.triangles[signs]
            triangles.append({"owner": k, "signs": list(signs), "vertices": [t.v1, t.v2, t.v3]})
        for sign in (1, -1):
            sep = cells.separatrices[sign]
            separatrices.append({"owner": k, "sign": sign, "saddle": sep.saddle,
                                 "ends": list(sep.ends), "carrier_normal": sep.carrier.normal})
    for k in sorted(cx.complex):
        cells = cx.complex[k]
        circles.append(circle_record(cells.circle))
        poles.append({"owner": k, "class": cells.dyn_class, "points": list(cells.poles)})
    return plain({"format": GEOMETRY_FORMAT, "version": VERSION, "circles": circles,
                  "triangles": triangles, "separatrices": separatrices, "poles": poles,
                  "closures": [{"sample": s, "seed": c.seed,
                                "regions": [region_record(r) for r in c.regions]}
                               for s in sorted(closures) for c in closures[s]]})


def trajectory_document(traj, stride: int = 1) -> dict:
    idx = list(range(0, len(traj.times), stride))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    return plain({"format": TRAJECTORY_FORMAT, "version": VERSION,
                  "segments": [list(s) for s in traj.schedule.segments],
                  "times": traj.times[idx], "points": traj.points[idx]})


def sanitize(obj):
    """Round-trip helper: what :func:`loads` returns for ``dumps(obj)``."""
    return json.loads(dumps(obj))
