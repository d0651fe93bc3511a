"""Kirchhoff-Routh-type cluster functional and its equilibria.

For m points xi_1..xi_m in R^n and a symmetric matrix H (the Hessian of the
potential at the blow-up point),

    F(xi) = sum_i xi_i^T H xi_i  -  sum_{i != j} |xi_i - xi_j|^{2-n},

the pair sum running over ordered pairs (each unordered pair twice).  Its
critical points describe the limiting geometry of bubble clusters after
rescaling.  Vanishing of the gradient block

    2 H xi_i + 2(n-2) sum_{j != i} (xi_i - xi_j)/|xi_i - xi_j|^n

is the cluster equilibrium equation; for H = -2I and m = 2 the symmetric
ansatz gives separation (n-2)^{1/n}, and for H = +2I there is no critical
point at all: <grad F, xi> = 4 sum |xi_i|^2 + 2(n-2) sum_{i<j}
|xi_i-xi_j|^{2-n} > 0 on the whole configuration space.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import numerics
from ._backend import worker_count
from .numerics import DomainError


@dataclass
class ClusterConfig:
    n: int
    m: int
    xi: np.ndarray  # shape (m, n), pairwise distinct rows

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(self.m, self.n)

    def min_pair_distance(self):
        if self.m < 2:
            return np.inf
        best = np.inf
        for i in range(self.m):
            for j in range(i + 1, self.m):
                best = min(best, float(np.linalg.norm(self.xi[i] - self.xi[j])))
        return best


@dataclass
class CriticalConfig:
    config: ClusterConfig
    f_value: float
    grad_norm: float
    hessian_signature: Tuple[int, int, int]  # (positives, negatives, near-zeros)
    min_pair_distance: float


@dataclass
class FindCriticalReport:
    configs: List[CriticalConfig]
    diagnostics: List[str]

    def __iter__(self):
        return iter(self.configs)

    def __len__(self):
        return len(self.configs)

    def __getitem__(self, i):
        return self.configs[i]


def _check_distinct(config):
    if config.m >= 2 and config.min_pair_distance() < 1e-14:
        raise DomainError("cluster points must be pairwise distinct")


def f_eval(hessV, config):
    """Value of the cluster functional."""
    hessV = np.asarray(hessV, dtype=float)
    _check_distinct(config)
    xi = config.xi
    total = float(sum(xi[i] @ hessV @ xi[i] for i in range(config.m)))
    for i in range(config.m):
        for j in range(config.m):
            if j == i:
                continue
            total -= float(np.linalg.norm(xi[i] - xi[j])) ** (2 - config.n)
    return total


def f_grad(hessV, config):
    """Gradient, flat vector of length m*n (blocks in point order)."""
    hessV = np.asarray(hessV, dtype=float)
    _check_distinct(config)
    xi = config.xi
    n, m = config.n, config.m
    grad = np.empty((m, n))
    for i in range(m):
        g = 2.0 * hessV @ xi[i]
        for j in range(m):
            if j == i:
                continue
            diff = xi[i] - xi[j]
            g += 2.0 * (n - 2) * diff / float(np.linalg.norm(diff)) ** n
        grad[i] = g
    return grad.ravel()


# ----------------------------------------------------------------- search

def auto_seeds(m, n, rng):
    """Ring configurations at radius (n-2)^{1/n} times {0.5, 1, 2},
    plus 20 uniform random configurations in a box of half-width 3."""
    radius = (n - 2.0) ** (1.0 / n)
    seeds = []
    for scale in (0.5, 1.0, 2.0):
        pts = np.zeros((m, n))
        if m == 1:
            pts[0, 0] = scale * radius
        else:
            angles = 2.0 * np.pi * np.arange(m) / m
            pts[:, 0] = scale * radius * np.cos(angles)
            pts[:, 1 % n] = scale * radius * np.sin(angles)
        seeds.append(pts)
    for _ in range(20):
        seeds.append(rng.uniform(-3.0, 3.0, size=(m, n)))
    return seeds


def _is_isotropic(hessV):
    hessV = np.asarray(hessV, dtype=float)
    return np.allclose(hessV, hessV[0, 0] * np.eye(hessV.shape[0]), atol=1e-12)


def _normalize(xi, isotropic):
    """Canonical representative: optional rotation aligning xi_1 - xi_2 with
    the first axis (legitimate only when hessV is a multiple of identity),
    then lexicographic ordering of the points."""
    pts = np.array(sorted(map(tuple, xi)))
    if isotropic and pts.shape[0] >= 2:
        u = pts[0] - pts[1]
        norm = np.linalg.norm(u)
        if norm > 0:
            u = u / norm
            e1 = np.zeros_like(u)
            e1[0] = 1.0
            v = u - e1
            vnorm = np.linalg.norm(v)
            if vnorm > 1e-14:  # Householder reflection mapping u -> e1
                v = v / vnorm
                pts = pts - 2.0 * np.outer(pts @ v, v)
        pts = np.array(sorted(map(tuple, pts)))
    return pts


def _greedy_match_distance(a, b):
    """Configuration distance modulo permutation (greedy point matching)."""
    used = np.zeros(len(b), dtype=bool)
    worst = 0.0
    for p in a:
        dists = np.linalg.norm(b - p, axis=1)
        dists[used] = np.inf
        k = int(np.argmin(dists))
        used[k] = True
        worst = max(worst, float(dists[k]))
    return worst


def config_distance(xi_a, xi_b, isotropic=False):
    """Distance between configurations modulo permutation (and rotation when
    isotropic), as the worst matched point distance."""
    a = _normalize(np.asarray(xi_a, dtype=float), isotropic)
    b = _normalize(np.asarray(xi_b, dtype=float), isotropic)
    return _greedy_match_distance(a, b)


def find_critical(hessV, m, n, seeds="auto", tol=1e-10, seed=0, dedup_tol=1e-6):
    """Multistart damped Newton on f_grad.

    Returns a FindCriticalReport of deduplicated critical configurations
    (modulo permutation, and modulo rotation when hessV is isotropic), each
    with a finite-difference Hessian signature.  When every seed fails the
    report is empty and carries per-seed diagnostics.
    """
    hessV = np.asarray(hessV, dtype=float)
    if not np.allclose(hessV, hessV.T, atol=1e-12):
        raise DomainError("hessV must be symmetric")
    if seeds == "auto":
        rng = np.random.default_rng(seed)
        seed_list = auto_seeds(m, n, rng)
    else:
        seed_list = [np.asarray(s.xi if isinstance(s, ClusterConfig) else s, dtype=float)
                     for s in seeds]
    isotropic = _is_isotropic(hessV)

    def objective(x):
        return f_grad(hessV, ClusterConfig(n, m, x.reshape(m, n)))

    def run_seed(pts):
        try:
            rep = numerics.newton_solve(objective, "finite-difference",
                                        pts.ravel(), tol=tol, max_iter=80)
        except DomainError as exc:  # collapsed to coincident points
            return None, f"seed failed: {exc}"
        if not rep.converged:
            return None, f"seed failed: {rep.message or 'no convergence'}"
        return rep.solution.reshape(m, n), ""

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_seed, seed_list))
    else:
        outcomes = [run_seed(pts) for pts in seed_list]

    found = []
    diagnostics = []
    for k, (solution, msg) in enumerate(outcomes):
        if solution is None:
            diagnostics.append(f"seed {k}: {msg}")
            continue
        canon = _normalize(solution, isotropic)
        if any(_greedy_match_distance(canon, other) < dedup_tol for other, _ in found):
            continue
        found.append((canon, k))

    results = []
    for canon, _ in found:
        config = ClusterConfig(n, m, canon)
        grad = f_grad(hessV, config)
        value = f_eval(hessV, config)
        # central differences of the analytic gradient: accurate enough for
        # the 1e-7 cutoff to separate rotational null directions from noise
        jac = numerics.fd_jacobian(objective, canon.ravel(), h=1e-5)
        eigs = np.linalg.eigvalsh((jac + jac.T) / 2.0)
        signature = (int(np.sum(eigs > 1e-7)), int(np.sum(eigs < -1e-7)),
                     int(np.sum(np.abs(eigs) <= 1e-7)))
        results.append(CriticalConfig(
            config=config,
            f_value=value,
            grad_norm=float(np.max(np.abs(grad))),
            hessian_signature=signature,
            min_pair_distance=config.min_pair_distance(),
        ))
    results.sort(key=lambda c: (c.f_value, tuple(c.config.xi.ravel())))
    return FindCriticalReport(results, diagnostics)
