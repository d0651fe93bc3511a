"""Leading-order finite-dimensional balancing system for bubble clusters.

Unknowns are the concentration rates lambda_i and centers a_i of an
N-bubble ansatz for -Delta u + V u = u^{p-eps} on a bounded domain, away
from the boundary.  The reduced equations kept here are

    (EL_i)  c2*eps - cbar2 * sum_{j != i} lam_i d eps_ij / d lam_i
                   - c(n) * ln^{sigma}(lam_i)/lam_i^2 * V(a_i)  = 0
    (EA_i)  c2_n * alpha_i * ln^{sigma}(lam_i)/lam_i^3 * grad V(a_i)
                   - cbar2 * sum_{j != i} alpha_j/lam_i * d eps_ij / d a_i = 0

with the normalization weights alpha_i slaved to lambda_i through
alpha^{p-1-eps} = lam^{eps(n-2)/2}.  All higher-order remainders are
dropped: this module solves the leading-order system exactly and exposes
the rate law, the negative-potential infeasibility certificate, the
cluster rescaling to the Kirchhoff-Routh frame, and sweep classification.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import bubbles, constants, kirchhoff, numerics, potentials
from .bubbles import Bubble, BubbleFamily
from .numerics import DomainError

#: validity guards: the asymptotic regime requires eps*ln(lam) small and
#: weak bubble interaction.
EPS_LOG_GUARD = 0.5
INTERACTION_GUARD = 0.1


class BalancingSolveError(RuntimeError):
    """Newton failed on the balancing system; carries the solver report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class Infeasible:
    reason: str
    certificate: Optional["InfeasibilityCertificate"] = None


@dataclass
class BalancingState:
    n: int
    eps: float
    family: BubbleFamily
    alphas: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        if self.eps <= 0:
            raise DomainError("eps must be positive")
        if len(self.alphas) != len(self.family):
            raise DomainError("one alpha per bubble required")
        if np.any(self.alphas <= 0):
            raise DomainError("alphas must be positive")
        for b in self.family.bubbles:
            if self.eps * math.log(b.lam) > EPS_LOG_GUARD:
                raise DomainError(
                    f"validity guard violated: eps*ln(lambda) = "
                    f"{self.eps * math.log(b.lam):.3g} > {EPS_LOG_GUARD}")
        N = len(self.family)
        for i in range(N):
            for j in range(i + 1, N):
                e = bubbles.eps_interaction(self.n, self.family[i], self.family[j])
                if e >= INTERACTION_GUARD:
                    raise DomainError(
                        f"validity guard violated: eps_{i}{j} = {e:.3g} >= "
                        f"{INTERACTION_GUARD}")

    @property
    def lams(self):
        return np.array([b.lam for b in self.family.bubbles])

    @property
    def centers(self):
        return np.array([b.a for b in self.family.bubbles])


@dataclass
class RatePrediction:
    lambda_predicted: float
    formula_branch: str  # "log-corrected" (n=4) or "plain" (n>=5)
    kappa1_used: float
    v_at_point: float

    def __post_init__(self):
        if self.lambda_predicted <= 0:
            raise DomainError("predicted lambda must be positive")


def _log_factor(n, lam):
    """ln^{sigma_n}(lam): the logarithm itself in dimension 4, else 1."""
    return math.log(lam) if n == 4 else 1.0


def alpha_of_lambda(n, eps, lam):
    """Exact root of alpha^{p-1-eps} = lam^{eps(n-2)/2}."""
    if eps == 0:
        return 1.0
    if eps * math.log(lam) > EPS_LOG_GUARD:
        raise DomainError("eps*ln(lambda) outside the validity guard")
    denom = 4.0 - eps * (n - 2)
    if denom <= 0:
        raise DomainError("4 - eps(n-2) <= 0: outside the asymptotic regime")
    return lam ** (eps * (n - 2) ** 2 / (2.0 * denom))


# ------------------------------------------------------------ residuals

def _residual_el(n, eps, lams, centers, potential):
    table = constants.compute_table(n)
    N = len(lams)
    fam = [Bubble(a=centers[i], lam=lams[i]) for i in range(N)]
    res = np.empty(N)
    for i in range(N):
        inter = sum(bubbles.lambda_deps_dlambda(n, fam[i], fam[j])
                    for j in range(N) if j != i)
        res[i] = (table.c2 * eps - table.cbar2 * inter
                  - table.c_n * _log_factor(n, lams[i]) / lams[i] ** 2
                  * potentials.v_eval(potential, centers[i]))
    return res


def _residual_ea(n, eps, lams, centers, alphas, potential):
    table = constants.compute_table(n)
    N = len(lams)
    fam = [Bubble(a=centers[i], lam=lams[i]) for i in range(N)]
    blocks = np.empty((N, n))
    for i in range(N):
        pair = np.zeros(n)
        for j in range(N):
            if j != i:
                pair += alphas[j] / lams[i] * bubbles.deps_da(n, fam[i], fam[j])
        blocks[i] = (table.c2_n * alphas[i]
                     * _log_factor(n, lams[i]) / lams[i] ** 3
                     * potentials.v_grad(potential, centers[i])
                     - table.cbar2 * pair)
    return blocks.ravel()


def residual_EL(state, potential):
    """Rate-equation residuals, one per bubble."""
    return _residual_el(state.n, state.eps, state.lams, state.centers, potential)


def residual_EA(state, potential):
    """Center-equation residuals, one n-block per bubble, flattened."""
    return _residual_ea(state.n, state.eps, state.lams, state.centers,
                        state.alphas, potential)


def predicted_lambda_single(n, v_at_z, eps):
    """Single-bubble rate law: lam^2 * eps / ln^{sigma}(lam) = kappa1 * V."""
    if not 0.0 < eps < 0.1:
        raise DomainError("eps must lie in (0, 0.1)")
    if v_at_z <= 0:
        return Infeasible(reason="V <= 0 at the concentration point: the rate "
                                 "law has no positive root (no interior blow-up)")
    table = constants.compute_table(n)
    target = table.kappa1 * v_at_z / eps
    if n >= 5:
        lam = math.sqrt(target)
        branch = "plain"
    else:
        # lam^2 / ln(lam) = target, i.e. f(L) = 2L - ln(L) - ln(target) = 0
        # in L = ln(lam); f is increasing and convex on L > 1/2.
        log_target = math.log(target)
        L = 0.5 * (log_target + math.log(max(1.0, 0.5 * abs(math.log(eps)))))
        L = max(L, 0.7)
        for _ in range(100):
            step = (2.0 * L - math.log(L) - log_target) / (2.0 - 1.0 / L)
            L_new = max(L - step, 0.55)
            if abs(L_new - L) <= 1e-14 * max(1.0, abs(L)):
                L = L_new
                break
            L = L_new
        lam = math.exp(L)
        branch = "log-corrected"
    return RatePrediction(lambda_predicted=lam, formula_branch=branch,
                          kappa1_used=table.kappa1, v_at_point=v_at_z)


# ---------------------------------------------------------------- solve

def _ea_scale(n, lams):
    return max(_log_factor(n, lam) / lam ** 3 for lam in lams)


def solve_system(n, eps, potential, init, tol=1e-9, max_iter=60):
    """Damped Newton on the stacked (EL, EA) residuals.

    Unknowns are (ln lam_i, a_i); the alphas are recomputed from lambda at
    every residual evaluation.  Residuals are scaled by their natural
    sizes (eps for EL, max_i ln^{sigma} lam_i / lam_i^3 for EA) so `tol`
    is relative.  Returns a solved BalancingState, or Infeasible when the
    negative-potential sign certificate applies.
    """
    N = len(init.family)
    centers0 = init.centers

    def infeasible_or_none():
        # cheap gate: only run the box certificate when V < 0 at every center
        if any(potentials.v_eval(potential, c) >= 0 for c in centers0):
            return None
        cert = infeasibility_check(n, eps, potential, _covering_box(n, centers0))
        if cert.applicable and cert.infeasible:
            return Infeasible(reason="V < 0 near the requested centers: the "
                                     "EL residual is a sum of nonnegative "
                                     "terms with the eps term strictly "
                                     "positive", certificate=cert)
        return None

    early = infeasible_or_none()
    if early is not None:
        return early

    def unpack(x):
        lams = np.exp(x[:N])
        centers = x[N:].reshape(N, n)
        return lams, centers

    def F(x):
        lams, centers = unpack(x)
        alphas = np.array([alpha_of_lambda(n, eps, lam) for lam in lams])
        el = _residual_el(n, eps, lams, centers, potential) / eps
        ea = _residual_ea(n, eps, lams, centers, alphas, potential) / _ea_scale(n, lams)
        return np.concatenate([el, ea])

    x0 = np.concatenate([np.log(init.lams), centers0.ravel()])
    report = numerics.newton_solve(F, "finite-difference", x0, tol=tol,
                                   max_iter=max_iter)
    if not report.converged:
        raise BalancingSolveError(
            f"balancing solve failed: {report.message or 'no convergence'} "
            f"(residual {report.residual_norm:.3g})", report)
    lams, centers = unpack(report.solution)
    alphas = np.array([alpha_of_lambda(n, eps, lam) for lam in lams])
    family = BubbleFamily(n, [Bubble(a=centers[i], lam=lams[i]) for i in range(N)])
    try:
        return BalancingState(n=n, eps=eps, family=family, alphas=alphas)
    except DomainError as exc:
        raise BalancingSolveError(f"solved state rejected: {exc}", report)


def _covering_box(n, centers):
    center = np.mean(centers, axis=0)
    spread = float(np.max(np.abs(centers - center))) if len(centers) else 0.0
    return potentials.Box(center=center, halfwidth=spread + 0.25)


# ------------------------------------------------------- infeasibility

@dataclass
class InfeasibilityCertificate:
    applicable: bool
    infeasible: bool
    term_signs: dict = field(default_factory=dict)
    states_sampled: int = 0
    message: str = ""


def infeasibility_check(n, eps, potential, box, samples=200, seed=0):
    """Sign certificate that (EL) cannot vanish when V < 0.

    Applicable only when V is negative on the whole sampled box.  Then for
    any admissible state: the eps term equals c2*eps > 0; the potential
    term -c(n) ln^{sigma}(lam)/lam^2 V(a) is >= 0; and the interaction
    terms, combined with weights 2^{i-1} after sorting lambda ascending,
    have nonnegative weighted sum (pairwise -lam_i de/dlam_i
    - 2 lam_j de/dlam_j >= 0 for lam_i <= lam_j).  The three signs are
    verified on randomly sampled states and reported.
    """
    pts = potentials._sample_grid(box, n)
    values = np.array([potentials.v_eval(potential, p) for p in pts])
    if np.any(values >= 0):
        return InfeasibilityCertificate(
            applicable=False, infeasible=False,
            message="not applicable: V is not negative on the sampled box")

    table = constants.compute_table(n)
    rng = np.random.default_rng(seed)
    eps_term_ok = True
    potential_term_ok = True
    interaction_ok = True
    for _ in range(samples):
        N = int(rng.integers(1, 4))
        lams = np.sort(np.exp(rng.uniform(math.log(10.0), math.log(1e4), N)))
        centers = np.array([box.center + rng.uniform(-1, 1, n) * box.halfwidth
                            for _ in range(N)])
        # keep the sampled configuration inside the interaction guard
        fam = [Bubble(a=centers[i], lam=lams[i]) for i in range(N)]
        if any(bubbles.eps_interaction(n, fam[i], fam[j]) >= INTERACTION_GUARD
               for i in range(N) for j in range(i + 1, N)):
            continue
        if table.c2 * eps <= 0:
            eps_term_ok = False
        for i in range(N):
            v = potentials.v_eval(potential, centers[i])
            if -table.c_n * _log_factor(n, lams[i]) / lams[i] ** 2 * v < 0:
                potential_term_ok = False
        weights = 2.0 ** np.arange(N)  # lambda ascending
        weighted = 0.0
        scale = 0.0
        for i in range(N):
            for j in range(N):
                if j != i:
                    term = bubbles.lambda_deps_dlambda(n, fam[i], fam[j])
                    weighted -= weights[i] * term
                    scale += abs(term)
        if weighted < -1e-12 * max(scale, 1.0):
            interaction_ok = False
    signs = {
        "eps_term": "c2*eps > 0" if eps_term_ok else "VIOLATED",
        "potential_term": ">= 0 (V < 0)" if potential_term_ok else "VIOLATED",
        "interaction_term": "weighted sum >= 0" if interaction_ok else "VIOLATED",
    }
    ok = eps_term_ok and potential_term_ok and interaction_ok
    return InfeasibilityCertificate(
        applicable=True, infeasible=ok, term_signs=signs,
        states_sampled=samples,
        message="no interior blow-up: the EL residual is strictly positive"
                if ok else "sign verification failed")


# ----------------------------------------------------------- rescaling

def cluster_eta(n, eps):
    """Cluster scale eta(eps): eps^{(n-4)/(2n)} for n >= 5, the
    log-corrected (2/|ln eps|)^{1/4} in dimension 4."""
    if n == 4:
        return (2.0 / abs(math.log(eps))) ** 0.25
    return eps ** ((n - 4.0) / (2.0 * n))


def rescale_cluster(state, z, v_at_z, compat_exponent=False):
    """Map centers to the Kirchhoff-Routh frame:
    b_i = kappa2 * V^{(n-4)/(2n)} * (a_i - z)/eta(eps).

    Meaningful in the cluster regime |a_i - z| <= 0.1; evaluated as
    written outside it (early sweep points sit wider and converge in).
    `compat_exponent` switches the potential exponent to (n-4)/(n-2), a
    variant appearing alongside the derived (n-4)/(2n); the default is the
    value consistent with the critical-configuration limit.
    """
    z = np.asarray(z, dtype=float)
    n = state.n
    table = constants.compute_table(n)
    exponent = (n - 4.0) / (n - 2.0) if compat_exponent else (n - 4.0) / (2.0 * n)
    factor = table.kappa2 * v_at_z ** exponent / cluster_eta(n, state.eps)
    return [factor * (np.asarray(b.a) - z) for b in state.family.bubbles]


# ---------------------------------------------------------- diagnostics

def rate_ratio_diagnostic(state):
    """r = (eps + sum_{k != j} eps_kj) / sum_i ln^{sigma}(lam_i)/lam_i^2.

    For an exactly solved single bubble r equals kappa1 * V(a); the
    two-sided bound requires r to stay in a fixed bracket along sweeps
    (see rate_ratio_bracket)."""
    n = state.n
    fam = state.family.bubbles
    N = len(fam)
    inter = sum(bubbles.eps_interaction(n, fam[k], fam[j])
                for k in range(N) for j in range(N) if k != j)
    denom = sum(_log_factor(n, b.lam) / b.lam ** 2 for b in fam)
    return (state.eps + inter) / denom


def rate_ratio_bracket(states):
    """(lower, upper) envelope of rate_ratio_diagnostic over solved states."""
    ratios = [rate_ratio_diagnostic(s) for s in states]
    return min(ratios), max(ratios)


def beta_rate(n, eps):
    """Single-bubble center decay rate beta(eps): |ln eps| (n=4),
    eps^{-1/2}|ln eps|^{-1} (n=5), eps^{-1/2} (n >= 6)."""
    if n == 4:
        return abs(math.log(eps))
    if n == 5:
        return eps ** -0.5 / abs(math.log(eps))
    return eps ** -0.5


@dataclass
class ClassificationRecord:
    location: np.ndarray
    members: List[int]
    classification: str  # "empty" | "isolated-simple" | "non-simple"
    beta_sup: Optional[float] = None
    cluster_sup: Optional[float] = None
    cluster_inf: Optional[float] = None


def classify_blowup(sweep, potential, critical_locations=None, assign_tol=0.1):
    """Classify blow-up at each critical point of V from a solved sweep.

    For each critical point z: the bubble set B(z) is read off the
    smallest-eps state (centers within `assign_tol`).  A single member is
    classified isolated-simple and the sup of beta(eps)|a-z| over the
    sweep is reported; two or more members are non-simple, with the sup
    and inf of the cluster-scale distances |ln eps|^{sigma/4}
    eps^{-(n-4)/(2n)} |a_i - z| (inf over all but the innermost member).
    """
    if len(sweep) == 0:
        raise DomainError("empty sweep")
    eps_values = [s.eps for s in sweep]
    if any(e2 >= e1 for e1, e2 in zip(eps_values, eps_values[1:])):
        raise DomainError("sweep must have strictly decreasing eps")
    n = sweep[0].n
    if critical_locations is None:
        box = potentials.default_box(potential, n)
        critical_locations = [cp.location for cp in
                              potentials.critical_points(potential, box)]

    last = sweep[-1]
    records = []
    for z in critical_locations:
        z = np.asarray(z, dtype=float)
        members = [i for i, b in enumerate(last.family.bubbles)
                   if np.linalg.norm(b.a - z) <= assign_tol]
        if not members:
            records.append(ClassificationRecord(location=z, members=[],
                                                classification="empty"))
            continue
        if len(members) == 1:
            i = members[0]
            sup = max(beta_rate(n, s.eps)
                      * float(np.linalg.norm(s.family[i].a - z)) for s in sweep)
            records.append(ClassificationRecord(
                location=z, members=members,
                classification="isolated-simple", beta_sup=sup))
            continue
        sigma = 1.0 if n == 4 else 0.0
        sups, infs = [], []
        for i in members:
            scaled = [abs(math.log(s.eps)) ** (sigma / 4.0)
                      * s.eps ** (-(n - 4.0) / (2.0 * n))
                      * float(np.linalg.norm(s.family[i].a - z)) for s in sweep]
            sups.append(max(scaled))
            infs.append(min(scaled))
        # all members bounded above; all but possibly one bounded below
        infs.sort()
        records.append(ClassificationRecord(
            location=z, members=members, classification="non-simple",
            cluster_sup=max(sups), cluster_inf=infs[1]))
    return records


# --------------------------------------------------------- continuation

@dataclass
class SweepResult:
    states: List[BalancingState]
    failures: List[str]

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


def analytic_init(n, eps, potential, z, xi, v_at_z=None):
    """Initial state at eps from the predicted rate and the rescaled
    seed configuration: a_i = z + sigma*eta(eps)*xi_i with
    sigma^{-1} = kappa2 * V(z)^{(n-4)/(2n)}."""
    z = np.asarray(z, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(-1, n)
    if v_at_z is None:
        v_at_z = potentials.v_eval(potential, z)
    pred = predicted_lambda_single(n, v_at_z, eps)
    if isinstance(pred, Infeasible):
        return pred
    table = constants.compute_table(n)
    sigma_scale = 1.0 / (table.kappa2 * v_at_z ** ((n - 4.0) / (2.0 * n)))
    centers = z + sigma_scale * cluster_eta(n, eps) * xi
    lam = pred.lambda_predicted
    fam = BubbleFamily(n, [Bubble(a=c, lam=lam) for c in centers])
    alphas = np.array([alpha_of_lambda(n, eps, lam)] * len(centers))
    return BalancingState(n=n, eps=eps, family=fam, alphas=alphas)


def continuation_sweep(n, potential, z, xi, eps_start=1e-2, eps_stop=1e-6,
                       factor=10.0 ** -0.25, tol=1e-9):
    """Solve the balancing system along a geometric eps schedule.

    The first solve starts from analytic_init; each later solve warm-starts
    from the previous solution with lambda and the center offsets advanced
    along the predicted scalings (lam ~ predicted ratio, a - z ~ eta(eps)).
    Failed eps values are recorded and the sweep continues cold from the
    analytic initialization at the next point.
    """
    z = np.asarray(z, dtype=float)
    states: List[BalancingState] = []
    failures: List[str] = []
    eps = eps_start
    prev: Optional[BalancingState] = None
    while eps >= eps_stop * (1.0 - 1e-12):
        if prev is None:
            init = analytic_init(n, eps, potential, z, xi)
            if isinstance(init, Infeasible):
                failures.append(f"eps={eps:.6g}: {init.reason}")
                return SweepResult(states, failures)
        else:
            scale = cluster_eta(n, eps) / cluster_eta(n, prev.eps)
            new_bubbles = []
            for b in prev.family.bubbles:
                v_here = potentials.v_eval(potential, b.a)
                if v_here > 0:
                    ratio = (predicted_lambda_single(n, v_here, eps).lambda_predicted
                             / predicted_lambda_single(n, v_here, prev.eps).lambda_predicted)
                else:
                    ratio = (prev.eps / eps) ** 0.5
                new_bubbles.append(Bubble(a=z + scale * (b.a - z), lam=b.lam * ratio))
            fam = BubbleFamily(n, new_bubbles)
            alphas = np.array([alpha_of_lambda(n, eps, b.lam) for b in new_bubbles])
            init = BalancingState(n=n, eps=eps, family=fam, alphas=alphas)
        try:
            solved = solve_system(n, eps, potential, init, tol=tol)
        except (BalancingSolveError, DomainError) as exc:
            failures.append(f"eps={eps:.6g}: {exc}")
            prev = None
            eps *= factor
            continue
        if isinstance(solved, Infeasible):
            failures.append(f"eps={eps:.6g}: {solved.reason}")
            return SweepResult(states, failures)
        states.append(solved)
        prev = solved
        eps *= factor
    return SweepResult(states, failures)
