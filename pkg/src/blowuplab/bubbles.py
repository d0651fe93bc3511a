"""Bubble profiles and their interaction calculus.

The bubble with center a and concentration rate lam is

    delta_{a,lam}(x) = c0 * lam^{(n-2)/2} * (1 + lam^2 |x-a|^2)^{-(n-2)/2},

the extremal profile of the critical Sobolev embedding.  Two bubbles i, j
interact through

    eps_ij = (lam_i/lam_j + lam_j/lam_i + lam_i lam_j |a_i-a_j|^2)^{(2-n)/2},

whose analytic derivatives drive the balancing system.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .constants import c0
from .numerics import DomainError


@dataclass
class Bubble:
    a: np.ndarray          # center
    lam: float             # concentration rate (inverse length)

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.lam = float(self.lam)
        if self.lam <= 0:
            raise DomainError(f"bubble rate must be positive, got {self.lam}")


@dataclass
class BubbleFamily:
    n: int
    bubbles: List[Bubble] = field(default_factory=list)

    def __post_init__(self):
        if len(self.bubbles) < 1:
            raise DomainError("a bubble family needs at least one bubble")
        for b in self.bubbles:
            if b.a.size != self.n:
                raise DomainError(
                    f"bubble center dimension {b.a.size} != ambient n={self.n}")
        for i, bi in enumerate(self.bubbles):
            for bj in self.bubbles[i + 1:]:
                if np.array_equal(bi.a, bj.a):
                    raise DomainError("bubble centers must be pairwise distinct")

    def __len__(self):
        return len(self.bubbles)

    def __getitem__(self, i):
        return self.bubbles[i]


def bubble_eval(n, b, x):
    """delta_{a,lam}(x); strictly positive."""
    d = np.asarray(x, dtype=float) - b.a
    q = 1.0 + b.lam**2 * float(np.dot(d, d))
    return c0(n) * b.lam ** ((n - 2) / 2.0) * q ** (-(n - 2) / 2.0)


def bubble_dlambda(n, b, x):
    """lam * d(delta)/d(lam) = ((n-2)/2) delta (1 - lam^2|x-a|^2)/(1 + lam^2|x-a|^2)."""
    d = np.asarray(x, dtype=float) - b.a
    s = b.lam**2 * float(np.dot(d, d))
    return (n - 2) / 2.0 * bubble_eval(n, b, x) * (1.0 - s) / (1.0 + s)


def _interaction_base(bi, bj):
    d = bi.a - bj.a
    return bi.lam / bj.lam + bj.lam / bi.lam + bi.lam * bj.lam * float(np.dot(d, d))


def eps_interaction(n, bi, bj):
    """Interaction coefficient eps_ij; symmetric, in (0, 2^{(2-n)/2}]."""
    return _interaction_base(bi, bj) ** ((2.0 - n) / 2.0)


def deps_da(n, bi, bj):
    """d(eps_ij)/d(a_i) = (n-2) eps_ij^{n/(n-2)} lam_i lam_j (a_j - a_i)."""
    eps = eps_interaction(n, bi, bj)
    return (n - 2.0) * eps ** (n / (n - 2.0)) * bi.lam * bj.lam * (bj.a - bi.a)


def lambda_deps_dlambda(n, bi, bj):
    """lam_i * d(eps_ij)/d(lam_i).

    Equals ((2-n)/2) eps_ij^{n/(n-2)} (lam_i/lam_j - lam_j/lam_i
    + lam_i lam_j |a_i-a_j|^2); negative whenever lam_i >= lam_j.
    """
    eps = eps_interaction(n, bi, bj)
    d = bi.a - bj.a
    bracket = (bi.lam / bj.lam - bj.lam / bi.lam
               + bi.lam * bj.lam * float(np.dot(d, d)))
    return (2.0 - n) / 2.0 * eps ** (n / (n - 2.0)) * bracket


def barycenter_identity(n, family, weights, b):
    """Both sides of the weighted barycenter identity.

    lhs = -sum_{i != j} w_i w_j d(eps_ij)/d(a_i) . (a_i - b)
    rhs = (n-2) sum_{i < j} w_i w_j eps_ij

    In the small-interaction regime (rates within a bounded ratio, all
    eps_ij small -- the caller asserts this) lhs/rhs -> 1, and lhs is
    exactly independent of the base point b by pairwise antisymmetry.
    """
    weights = np.asarray(weights, dtype=float)
    base = np.asarray(b, dtype=float)
    N = len(family)
    lhs = 0.0
    rhs = 0.0
    for i in range(N):
        for j in range(N):
            if j == i:
                continue
            wij = weights[i] * weights[j]
            lhs -= wij * float(np.dot(deps_da(n, family[i], family[j]),
                                      family[i].a - base))
            if j > i:
                rhs += (n - 2.0) * wij * eps_interaction(n, family[i], family[j])
    return lhs, rhs
