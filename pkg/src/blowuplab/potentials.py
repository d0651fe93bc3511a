"""Analytic potential families with exact value/gradient/Hessian.

Three closed-form variants keep every derivative exact, so no interpolation
error leaks into the balancing-system tests:

* ``Constant``:   V = v0
* ``Quadratic``:  V = v0 + (1/2)(x-z)^T H (x-z), H symmetric
* ``BumpSum``:    V = baseline + sum_k amp_k exp(-|x-c_k|^2 / w_k^2)

The blow-up theory needs V positive; positivity is enforced by sampling a
grid over a working box (17 points per axis, capped at 1e5 total samples)
and can be waived explicitly for the infeasibility tests.
"""

import json
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import numerics
from .numerics import DomainError


class PositivityError(ValueError):
    """The sampled potential is not strictly positive on the working box."""


@dataclass
class Box:
    center: np.ndarray
    halfwidth: float

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.halfwidth = float(self.halfwidth)
        if self.halfwidth <= 0:
            raise DomainError("box halfwidth must be positive")


@dataclass
class Constant:
    v0: float


@dataclass
class Quadratic:
    v0: float
    z: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))
        self.H = np.asarray(self.H, dtype=float)
        if self.H.shape != (self.z.size, self.z.size):
            raise DomainError("quadratic Hessian shape does not match center")
        if not np.allclose(self.H, self.H.T, rtol=0, atol=1e-12):
            raise DomainError("quadratic Hessian must be symmetric")
        self.H = 0.5 * (self.H + self.H.T)


@dataclass
class Bump:
    center: np.ndarray
    amplitude: float
    width: float

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.width <= 0:
            raise DomainError("bump width must be positive")


@dataclass
class BumpSum:
    baseline: float
    bumps: List[Bump] = field(default_factory=list)


@dataclass
class CriticalPoint:
    location: np.ndarray
    hessian: np.ndarray
    morse_index: int
    nondegenerate: bool


@dataclass
class CriticalPointReport:
    points: List[CriticalPoint]
    degenerate_everywhere: bool = False

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


# ----------------------------------------------------------------- evaluation

def v_eval(spec, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(spec, Constant):
        return spec.v0
    if isinstance(spec, Quadratic):
        d = x - spec.z
        return spec.v0 + 0.5 * float(d @ spec.H @ d)
    if isinstance(spec, BumpSum):
        out = spec.baseline
        for bump in spec.bumps:
            d = x - bump.center
            out += bump.amplitude * math.exp(-float(d @ d) / bump.width**2)
        return out
    raise DomainError(f"unknown potential spec {type(spec).__name__}")


def v_grad(spec, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(spec, Constant):
        return np.zeros_like(x)
    if isinstance(spec, Quadratic):
        return spec.H @ (x - spec.z)
    if isinstance(spec, BumpSum):
        out = np.zeros_like(x)
        for bump in spec.bumps:
            d = x - bump.center
            g = bump.amplitude * math.exp(-float(d @ d) / bump.width**2)
            out += g * (-2.0 / bump.width**2) * d
        return out
    raise DomainError(f"unknown potential spec {type(spec).__name__}")


def v_hess(spec, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = x.size
    if isinstance(spec, Constant):
        return np.zeros((m, m))
    if isinstance(spec, Quadratic):
        return spec.H.copy()
    if isinstance(spec, BumpSum):
        out = np.zeros((m, m))
        for bump in spec.bumps:
            d = x - bump.center
            g = bump.amplitude * math.exp(-float(d @ d) / bump.width**2)
            w2 = bump.width**2
            out += g * (4.0 / w2**2 * np.outer(d, d) - 2.0 / w2 * np.eye(m))
        return out
    raise DomainError(f"unknown potential spec {type(spec).__name__}")


# ----------------------------------------------------------------- positivity

def _sample_grid(box, n, max_total=100_000, per_axis=17):
    m = per_axis
    while m > 3 and m**n > max_total:
        m -= 1
    axes = [np.linspace(c - box.halfwidth, c + box.halfwidth, m) for c in box.center]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def validate_positivity(spec, n, box, allow_negative=False):
    """Sample V over the box grid; raise PositivityError on a violation.

    Returns the sampled minimum.  With allow_negative=True the check is
    waived (the infeasibility test path) and only the minimum is reported.
    """
    pts = _sample_grid(box, n)
    values = np.array([v_eval(spec, p) for p in pts])
    vmin = float(values.min())
    if not allow_negative and vmin <= 0.0:
        worst = pts[int(values.argmin())]
        raise PositivityError(
            f"potential is not positive on the working box: V({worst.tolist()}) = {vmin:.6g}")
    return vmin


# ----------------------------------------------------------------- criticals

def _classify(spec, location, tol=1e-7):
    hess = v_hess(spec, location)
    eigs = np.linalg.eigvalsh(hess)
    nondegenerate = bool(np.min(np.abs(eigs)) > tol)
    morse_index = int(np.sum(eigs < -tol))
    return CriticalPoint(np.asarray(location, dtype=float), hess, morse_index, nondegenerate)


def critical_points(spec, search_box, grad_tol=1e-10, dedup_tol=1e-6, seed=0):
    """Critical points of V inside the search box.

    Quadratic potentials have exactly one (the center); the bump family is
    handled by multistart damped Newton on v_grad with the analytic Hessian
    as Jacobian, deduplicated at ``dedup_tol``.  A constant potential is
    degenerate everywhere (empty list, flag set).
    """
    n = search_box.center.size
    if isinstance(spec, Constant):
        return CriticalPointReport([], degenerate_everywhere=True)
    if isinstance(spec, Quadratic):
        return CriticalPointReport([_classify(spec, spec.z)])
    if not isinstance(spec, BumpSum):
        raise DomainError(f"unknown potential spec {type(spec).__name__}")

    seeds = []
    per_axis = 3 if 3**n <= 1000 else 2
    axes = [np.linspace(c - search_box.halfwidth, c + search_box.halfwidth, per_axis)
            for c in search_box.center]
    mesh = np.meshgrid(*axes, indexing="ij")
    seeds.extend(np.stack([g.ravel() for g in mesh], axis=-1))
    for bump in spec.bumps:
        seeds.append(bump.center.copy())
    for i, bi in enumerate(spec.bumps):
        for bj in spec.bumps[i + 1:]:
            seeds.append(0.5 * (bi.center + bj.center))
    rng = np.random.default_rng(seed)
    for _ in range(20):
        seeds.append(search_box.center
                     + rng.uniform(-search_box.halfwidth, search_box.halfwidth, size=n))

    found = []
    for s in seeds:
        rep = numerics.newton_solve(lambda x: v_grad(spec, x),
                                    lambda x: v_hess(spec, x),
                                    s, tol=grad_tol, max_iter=60)
        if not rep.converged:
            continue
        loc = rep.solution
        if np.any(np.abs(loc - search_box.center) > search_box.halfwidth + dedup_tol):
            continue
        if any(np.linalg.norm(loc - p.location) < dedup_tol for p in found):
            continue
        found.append(_classify(spec, loc))
    found.sort(key=lambda p: tuple(p.location))
    return CriticalPointReport(found)


# ----------------------------------------------------------------- fd check

@dataclass
class FdReport:
    max_grad_error: float
    max_hess_error: float
    samples: int


def fd_consistency(spec, n, box=None, samples=100, seed=0):
    """Check v_grad / v_hess against central differences of v_eval.

    Errors are relative to the larger of the analytic norm and 1 (so exact
    zeros, e.g. a constant potential, compare cleanly).
    """
    if box is None:
        box = default_box(spec, n)
    rng = np.random.default_rng(seed)
    worst_g = 0.0
    worst_h = 0.0
    for _ in range(samples):
        x = box.center + rng.uniform(-box.halfwidth, box.halfwidth, size=n)
        ag = v_grad(spec, x)
        fg = numerics.fd_gradient(lambda p: v_eval(spec, p), x, h=1e-6)
        scale_g = max(float(np.max(np.abs(ag))), 1.0)
        worst_g = max(worst_g, float(np.max(np.abs(ag - fg))) / scale_g)
        ah = v_hess(spec, x)
        fh = numerics.fd_hessian(lambda p: v_eval(spec, p), x, h=1e-4)
        scale_h = max(float(np.max(np.abs(ah))), 1.0)
        worst_h = max(worst_h, float(np.max(np.abs(ah - fh))) / scale_h)
    return FdReport(worst_g, worst_h, samples)


def default_box(spec, n):
    """A reasonable working box for a potential (experiments may override)."""
    if isinstance(spec, Quadratic):
        return Box(spec.z, 0.25)
    if isinstance(spec, BumpSum) and spec.bumps:
        centers = np.array([b.center for b in spec.bumps])
        mid = centers.mean(axis=0)
        spread = float(np.max(np.abs(centers - mid))) if len(spec.bumps) > 1 else 0.0
        margin = 2.0 * max(b.width for b in spec.bumps)
        return Box(mid, max(spread + margin, 0.5))
    return Box(np.zeros(n), 1.0)


# ----------------------------------------------------------------- JSON

def to_json(spec):
    """JSON-compatible dict for a potential (matrices row-major)."""
    if isinstance(spec, Constant):
        return {"type": "constant", "v0": spec.v0}
    if isinstance(spec, Quadratic):
        return {"type": "quadratic", "v0": spec.v0,
                "z": spec.z.tolist(), "H": spec.H.tolist()}
    if isinstance(spec, BumpSum):
        return {"type": "bumps", "baseline": spec.baseline,
                "bumps": [{"center": b.center.tolist(),
                           "amplitude": b.amplitude,
                           "width": b.width} for b in spec.bumps]}
    raise DomainError(f"unknown potential spec {type(spec).__name__}")


def from_json(data, n=None, allow_negative=False, box=None):
    """Build a potential spec from a JSON dict (or string).

    Validates positivity on ``box`` (defaulting to :func:`default_box`)
    unless ``allow_negative`` is set.
    """
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("type")
    if kind == "constant":
        spec = Constant(v0=float(data["v0"]))
    elif kind == "quadratic":
        spec = Quadratic(v0=float(data["v0"]),
                         z=np.asarray(data["z"], dtype=float),
                         H=np.asarray(data["H"], dtype=float))
    elif kind == "bumps":
        spec = BumpSum(baseline=float(data["baseline"]),
                       bumps=[Bump(np.asarray(b["center"], dtype=float),
                                   float(b["amplitude"]), float(b["width"]))
                              for b in data["bumps"]])
    else:
        raise DomainError(f"unknown potential type {kind!r}")
    if n is None:
        n = _spec_dimension(spec)
    if n is not None:
        if box is None:
            box = default_box(spec, n)
        if isinstance(spec, Constant):
            if not allow_negative and spec.v0 <= 0:
                raise PositivityError(f"constant potential v0 = {spec.v0} is not positive")
        else:
            validate_positivity(spec, n, box, allow_negative=allow_negative)
    return spec


def _spec_dimension(spec):
    if isinstance(spec, Quadratic):
        return spec.z.size
    if isinstance(spec, BumpSum) and spec.bumps:
        return spec.bumps[0].center.size
    return None
