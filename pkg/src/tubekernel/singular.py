"""Where the kernel integral converges: margin, the singular set and ``A``.

For boundary-coordinate points ``z = (x+iy, t+i(b(x)+h))`` and
``w = (r+is, u+i(b(r)+k))`` the kernel integral converges absolutely iff

    margin = h + k + b(x) + b(r) - 2 b**((x + r)/2) > 0,

and ``margin`` is exactly ``inf_eta (delta + A(x, r, eta))`` with
``A = A_x + A_r``, ``A_x(eta) = b*(eta) - (eta x - b(x)) >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .legendre import EnvelopeTable, biconjugate, legendre
from .polynomial import Polynomial

__all__ = [
    "KernelQuery",
    "PairClassification",
    "AValues",
    "ClassificationError",
    "convergence_margin",
    "classify_pair",
    "in_lambda",
    "A_value",
    "vanishing_factor",
    "margin_minimizing_slope",
]

CLASS_TOL = 1e-8


class ClassificationError(RuntimeError):
    """Margin and Lambda-membership disagree; the envelope table is off."""


@dataclass(frozen=True)
class KernelQuery:
    x: float = 0.0
    y: float = 0.0
    t: float = 0.0
    h: float = 0.0
    r: float = 0.0
    s: float = 0.0
    u: float = 0.0
    k: float = 0.0
    i1: int = 0
    j1: int = 0
    i2: int = 0
    j2: int = 0

    def __post_init__(self):
        if min(self.i1, self.j1, self.i2, self.j2) < 0:
            raise ValueError("derivative orders must be nonnegative")
        if self.h < 0 or self.k < 0:
            raise ValueError("h and k must be nonnegative (points in the closed domain)")

    @property
    def delta(self) -> float:
        return self.h + self.k

    @property
    def s_exp(self) -> int:
        return self.i1 + self.j1

    @property
    def m_exp(self) -> int:
        return self.i1 + self.j1 + self.i2 + self.j2

    def swapped(self) -> "KernelQuery":
        return KernelQuery(self.r, self.s, self.u, self.k, self.x, self.y, self.t, self.h,
                           self.j1, self.i1, self.j2, self.i2)


@dataclass(frozen=True)
class PairClassification:
    location: str
    on_diagonal: bool
    in_sigma: bool
    margin: float

    def to_dict(self) -> dict:
        return {"margin": self.margin, "in_sigma": self.in_sigma,
                "on_diagonal": self.on_diagonal, "location": self.location}


def convergence_margin(b: Polynomial, env: EnvelopeTable, q: KernelQuery) -> float:
    mid = 0.5 * (q.x + q.r)
    return q.delta + b(q.x) + b(q.r) - 2.0 * biconjugate(b, env, mid)


def _A_single(b: Polynomial, x: float, eta: float, bstar: float) -> float:
    return bstar - (eta * x - b(x))


def in_lambda(b: Polynomial, env: EnvelopeTable, x: float, tol: float = 1e-9) -> bool:
    """Is ``x`` a global minimiser of ``b(.) - eta*.`` for some ``eta``?"""
    for g in env.gaps:
        if g.sigma + tol < x < g.lam - tol:
            # interior points of a gap belong only if tied at the bitangent slope
            bstar = legendre(b, g.c)
            return _A_single(b, x, g.c, bstar) <= tol * (1.0 + abs(bstar))
    return True


def classify_pair(b: Polynomial, env: EnvelopeTable, q: KernelQuery,
                  tol: float = CLASS_TOL) -> PairClassification:
    margin = convergence_margin(b, env, q)
    boundary = q.delta == 0.0
    diag = (boundary and abs(q.x - q.r) <= tol and abs(q.y - q.s) <= tol and abs(q.t - q.u) <= tol)
    in_sigma = False
    if boundary:
        if abs(q.x - q.r) <= tol and in_lambda(b, env, q.x, tol):
            in_sigma = True
        else:
            for g in env.gaps:
                bstar = legendre(b, g.c)
                scale = tol * (1.0 + abs(bstar))
                if (_A_single(b, q.x, g.c, bstar) <= scale
                        and _A_single(b, q.r, g.c, bstar) <= scale):
                    in_sigma = True
                    break
    mscale = tol * (1.0 + abs(b(q.x)) + abs(b(q.r)))
    if in_sigma and margin > mscale:
        raise ClassificationError(f"pair classified in Sigma but margin={margin!r}")
    if boundary and not in_sigma and margin <= 0.0:
        raise ClassificationError(f"pair outside Sigma but margin={margin!r}")
    location = "boundary" if boundary else "interior-touching"
    return PairClassification(location, diag, in_sigma, float(margin))


@dataclass(frozen=True)
class AValues:
    A: float
    A_x: float
    A_r: float


def A_value(b: Polynomial, x: float, r: float, eta) -> AValues:
    """``A_x``, ``A_r`` and their sum; vectorised over ``eta``."""
    bstar = legendre(b, eta)
    eta = np.asarray(eta, dtype=float) if not np.isscalar(eta) else eta
    ax = bstar - (eta * x - b(x))
    ar = bstar - (eta * r - b(r))
    return AValues(ax + ar, ax, ar)


def vanishing_factor(b: Polynomial, x: float, eta0: float, eta, tol: float = 1e-9):
    """``F_x(eta) = A_x(eta) / (eta - eta0)`` for ``x`` a minimiser at slope ``eta0``."""
    e = np.asarray(eta, dtype=float)
    if np.any(e <= eta0):
        raise ValueError("eta must exceed eta0")
    b0 = legendre(b, eta0)
    if _A_single(b, x, eta0, b0) > tol * (1.0 + abs(b0)):
        raise ValueError(f"x={x!r} is not a global minimiser at eta0={eta0!r}")
    ax = A_value(b, x, x, eta).A_x
    out = ax / (e - eta0)
    return float(out) if np.isscalar(eta) else out


def margin_minimizing_slope(b: Polynomial, env: EnvelopeTable, x: float, r: float) -> float:
    """Slope ``eta`` at which ``A(x, r, eta)`` is smallest.

    ``A(x, r, .)`` is minimised where ``(x + r)/2`` is a subgradient point of
    ``b*``: the bitangent slope inside a gap, else ``b'((x + r)/2)``.
    """
    mid = 0.5 * (x + r)
    g = env.gap_at(mid)
    if g is not None:
        return g.c
    return float(b.deriv()(mid))
