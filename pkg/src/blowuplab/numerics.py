"""Self-contained numerical kernels used throughout the package.

Contents
--------
* gamma/beta special functions (thin wrappers with domain checks),
* adaptive quadrature on (0, inf) via the compactification r = t/(1-t)
  followed by Gauss-Kronrod (G7, K15) panels with recursive bisection,
* radially symmetric integrals over R^n,
* damped Newton iteration with residual-norm backtracking,
* adaptive Dormand-Prince 4(5) integration for shooting problems,
* central finite differences (gradient / Jacobian / Hessian) used as
  verification oracles for every analytic derivative in the package.

All functions are pure; there is no shared mutable state.
"""

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature exhausted its budget.

    Carries the best available estimate in ``best_estimate``.
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class IntegrationError(RuntimeError):
    """ODE integration failed; ``r`` names the failing abscissa."""

    def __init__(self, message, r):
        super().__init__(message)
        self.r = r


@dataclass
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


@dataclass
class NewtonReport:
    solution: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    message: str = ""


Trajectory = namedtuple("Trajectory", ["rs", "ys"])


# ----------------------------------------------------------------------
# special functions
# ----------------------------------------------------------------------

def gamma_fn(x):
    """Gamma function for x > 0."""
    if x <= 0:
        raise DomainError(f"gamma_fn requires x > 0, got {x}")
    return math.gamma(x)


def beta_fn(a, b):
    """Euler Beta function B(a, b) = Gamma(a)Gamma(b)/Gamma(a+b), a, b > 0."""
    if a <= 0 or b <= 0:
        raise DomainError(f"beta_fn requires positive arguments, got ({a}, {b})")
    if a + b < 170.0:
        return math.gamma(a) * math.gamma(b) / math.gamma(a + b)
    # avoid overflow for large arguments
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def sphere_measure(n):
    """Surface measure of the unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2)."""
    if n < 2:
        raise DomainError(f"sphere_measure requires n >= 2, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


# ----------------------------------------------------------------------
# adaptive quadrature
# ----------------------------------------------------------------------
# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK dqk15).

_XGK = np.array([
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
])
_WGK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277,
    0.381830050505119, 0.417959183673469,
])


def _gk15(g, lo, hi):
    """One (K15, |K15-G7|) panel evaluation of g on [lo, hi]."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    fc = g(center)
    resk = _WGK[7] * fc
    resg = _WG[3] * fc
    for j in range(7):
        dx = half * _XGK[j]
        f1 = g(center - dx)
        f2 = g(center + dx)
        resk += _WGK[j] * (f1 + f2)
        if j % 2 == 1:  # j = 1, 3, 5 are the Gauss-7 nodes
            resg += _WG[j // 2] * (f1 + f2)
    resk *= half
    resg *= half
    return resk, abs(resk - resg)


def integrate_halfline(f, tol=1e-12, max_evaluations=500_000):
    """Integrate f over (0, inf).

    Substitutes r = t/(1-t) and applies adaptive G7/K15 bisection on
    t in (0, 1).  f must be continuous and decay at least like r^(-1-d).
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")

    def g(t):
        w = 1.0 - t
        if w <= 0.0:  # only reachable through rounding at panel edges
            return 0.0
        val = f(t / w) / (w * w)
        return val if math.isfinite(val) else 0.0

    total = 0.0
    total_err = 0.0
    evaluations = 0
    stack = [(0.0, 1.0)]
    while stack:
        lo, hi = stack.pop()
        resk, err = _gk15(g, lo, hi)
        evaluations += 15
        width = hi - lo
        if err <= tol * width or width <= 1e-15:
            total += resk
            total_err += err
        elif evaluations >= max_evaluations:
            best = total + resk + sum(_gk15(g, a, b)[0] for a, b in stack)
            raise QuadratureError(
                f"quadrature budget exhausted ({evaluations} evaluations) "
                f"before reaching tol={tol:g}",
                best_estimate=best,
            )
        else:
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid))
            stack.append((mid, hi))
    if not math.isfinite(total):
        raise QuadratureError("quadrature produced a non-finite value", best_estimate=total)
    return QuadratureResult(value=total, abs_error_estimate=total_err, evaluations=evaluations)


def radial_integral(n, g, tol=1e-12):
    """Integral of the radial function g(|x|) over R^n.

    Equals meas(S^{n-1}) * int_0^inf g(r) r^{n-1} dr.
    """
    if int(n) != n or n < 2:
        raise DomainError(f"radial_integral requires integer n >= 2, got {n}")
    n = int(n)
    res = integrate_halfline(lambda r: g(r) * r ** (n - 1), tol=tol)
    return sphere_measure(n) * res.value


# ----------------------------------------------------------------------
# finite differences
# ----------------------------------------------------------------------

def default_fd_step(x):
    """Default step h = 1e-6 * max(1, ||x||_inf)."""
    x = np.asarray(x, dtype=float)
    return 1e-6 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)


def fd_gradient(f, x, h=None):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_fd_step(x)
    grad = np.empty_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        grad[k] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def fd_jacobian(F, x, h=None):
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_fd_step(x)
    f0 = np.asarray(F(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (np.asarray(F(xp), dtype=float) - np.asarray(F(xm), dtype=float)) / (2.0 * h)
    return jac


def fd_hessian(f, x, h=1e-5):
    """Central-difference Hessian of a scalar function (symmetrized)."""
    x = np.asarray(x, dtype=float)
    m = x.size
    hess = np.empty((m, m))
    f0 = f(x)
    for k in range(m):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        hess[k, k] = (f(xp) - 2.0 * f0 + f(xm)) / (h * h)
        for l in range(k + 1, m):
            xpp = x.copy(); xpp[k] += h; xpp[l] += h
            xpm = x.copy(); xpm[k] += h; xpm[l] -= h
            xmp = x.copy(); xmp[k] -= h; xmp[l] += h
            xmm = x.copy(); xmm[k] -= h; xmm[l] -= h
            val = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h * h)
            hess[k, l] = val
            hess[l, k] = val
    return 0.5 * (hess + hess.T)


# ----------------------------------------------------------------------
# damped Newton
# ----------------------------------------------------------------------

def newton_solve(F, J, x0, tol=1e-12, max_iter=50):
    """Damped Newton for F(x) = 0 with backtracking on the residual norm.

    J may be a callable returning the Jacobian or the string
    "finite-difference".  Convergence means ||F(x)||_inf <= tol.  A singular
    Jacobian falls back to a least-squares step; if no step reduces the
    residual the report comes back non-converged with a diagnostic message.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    def fvec(z):
        return np.atleast_1d(np.asarray(F(z), dtype=float))

    if callable(J):
        jac = lambda z: np.atleast_2d(np.asarray(J(z), dtype=float))
    elif J == "finite-difference":
        jac = lambda z: np.atleast_2d(fd_jacobian(fvec, z))
    else:
        raise DomainError(f"J must be callable or 'finite-difference', got {J!r}")

    fx = fvec(x)
    norm = float(np.max(np.abs(fx)))
    note = ""
    for iteration in range(1, max_iter + 1):
        if norm <= tol:
            return NewtonReport(x, norm, iteration - 1, True, note)
        jm = jac(x)
        try:
            step = np.linalg.solve(jm, -fx)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError("non-finite step")
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jm, -fx, rcond=None)
            note = "singular Jacobian: least-squares step used"
            if not np.all(np.isfinite(step)) or not np.any(step):
                return NewtonReport(x, norm, iteration, False,
                                    "singular Jacobian and no least-squares descent")
        # backtracking: halve up to 30 times until the residual norm drops
        scale = 1.0
        for _ in range(30):
            x_try = x + scale * step
            f_try = fvec(x_try)
            norm_try = float(np.max(np.abs(f_try)))
            if math.isfinite(norm_try) and norm_try < norm:
                break
            scale *= 0.5
        else:
            return NewtonReport(x, norm, iteration, False,
                                "line search found no residual decrease" +
                                (f" ({note})" if note else ""))
        x, fx, norm = x_try, f_try, norm_try
    converged = norm <= tol
    msg = note if converged else f"max_iter={max_iter} reached" + (f" ({note})" if note else "")
    return NewtonReport(x, norm, max_iter, converged, msg)


# ----------------------------------------------------------------------
# Dormand-Prince 4(5)
# ----------------------------------------------------------------------

_DP_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
# y5 - y4 error weights
_DP_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
         -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


def ode_integrate(rhs, y0, span, tol=1e-10, atol=None, max_steps=2_000_000):
    """Adaptive explicit Runge-Kutta 4(5) (Dormand-Prince) on span=[r0, r1].

    Local error per step is kept at or below tol (relative) / atol
    (absolute, defaults to tol).  Returns the accepted trajectory as a
    Trajectory(rs, ys) pair of arrays.
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    rtol = tol
    if atol is None:
        atol = tol
    r0, r1 = float(span[0]), float(span[1])
    if not r1 > r0:
        raise DomainError(f"span must be increasing, got {span}")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    dim = y.size

    rs = [r0]
    ys = [y.copy()]
    r = r0
    k1 = np.asarray(rhs(r, y), dtype=float)
    h = (r1 - r0) * 1e-4
    steps = 0
    k = np.empty((7, dim))
    while r < r1:
        if steps >= max_steps:
            raise IntegrationError(f"step budget {max_steps} exhausted at r={r:.6e}", r)
        h = min(h, r1 - r)
        if h < 1e-14 * (r1 - r0):
            raise IntegrationError(f"step size underflow at r={r:.6e}", r)
        k[0] = k1
        for i in range(5):
            yi = y + h * np.dot(_DP_A[i], k[: i + 1])
            k[i + 1] = rhs(r + _DP_C[i] * h, yi)
        y5 = y + h * np.dot(_DP_A[5], k[:6])
        k[6] = rhs(r + h, y5)
        err = h * np.dot(_DP_E, k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err_norm = math.sqrt(float(np.mean((err / scale) ** 2)))
        steps += 1
        if err_norm <= 1.0:
            r += h
            y = y5
            k1 = k[6]  # first-same-as-last
            rs.append(r)
            ys.append(y.copy())
            factor = 5.0 if err_norm == 0.0 else min(5.0, 0.9 * err_norm ** -0.2)
            h *= max(0.2, factor)
        else:
            h *= max(0.2, 0.9 * err_norm ** -0.2)
    return Trajectory(np.array(rs), np.array(ys))
