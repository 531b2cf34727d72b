"""Laplace-type integrals ``I(eta, tau) = int exp(-2 tau p_eta(xi)) dxi``.

``p_eta(xi) = b(xi + lambda) - b(lambda) - eta*xi`` with ``lambda =
lambda(eta)`` is nonnegative with an even-order zero at the origin, so the
normalisation integral factors as ``N(eta, tau) = exp(2 tau b*(eta)) *
I(eta, tau)``. ``N`` itself overflows long before anything interesting
happens, hence everything here reports ``log N``.

Also here: the comparators used to bracket ``I`` (the convex-polynomial
estimate, the derivative lower bound and the local upper-bound check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .legendre import minimizer_set, minimizers_batch
from .polynomial import Polynomial, derivative, real_roots
from .quadrature import integrate

__all__ = [
    "ShiftedPolynomial",
    "QuadratureResult",
    "NResult",
    "UpperBoundCheck",
    "QuadratureError",
    "shift_poly",
    "shifted_coefficients",
    "laplace_integral",
    "laplace_batch",
    "laplace_breaks",
    "N_value",
    "bnw_estimate",
    "lower_bound_I",
    "upper_bound_check",
]

# exp(-700) is already far below double precision relative to O(1) values
TRUNCATION_EXPONENT = 700.0


class QuadratureError(RuntimeError):
    """Quadrature failed to reach its tolerance within the panel budget."""


@dataclass(frozen=True)
class ShiftedPolynomial:
    p: Polynomial
    eta: float
    lambda_eta: float


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    truncation_radius: float
    panels: int
    converged: bool


@dataclass(frozen=True)
class NResult:
    log_N: float
    legendre: float
    I: QuadratureResult


def shifted_coefficients(b: Polynomial, lam: float, eta: float) -> np.ndarray:
    """Taylor coefficients of ``p_eta`` about 0; constant and linear terms zeroed."""
    c = np.array(b.shift(lam).coeffs, dtype=float)
    c[0] = 0.0
    c[1] = 0.0
    return c


def shift_poly(b: Polynomial, eta: float) -> ShiftedPolynomial:
    lam = minimizer_set(b, eta).lam
    return ShiftedPolynomial(Polynomial(shifted_coefficients(b, lam, eta)), float(eta), float(lam))


def _radius(p: Polynomial, tau_min: float, side: float, start: float) -> float:
    r = max(start, 1.0)
    while 2.0 * tau_min * p(side * r) < TRUNCATION_EXPONENT:
        r *= 2.0
    # back off geometrically while the threshold still holds
    lo, hi = r / 2.0, r
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if mid <= start or 2.0 * tau_min * p(side * mid) < TRUNCATION_EXPONENT:
            lo = mid
        else:
            hi = mid
    return hi


def _breakpoints(p: Polynomial, tau_min: float, tau_max: float) -> tuple[np.ndarray, float, float]:
    dp = derivative(p)
    d2p = derivative(p, 2)
    crit = [0.0]
    if dp.degree >= 1 and not dp.is_zero:
        crit += [x for x, _ in real_roots(dp).real_roots]
    infl = [x for x, _ in real_roots(d2p).real_roots] if d2p.degree >= 1 else []
    right0 = max(crit + infl) + 1e-3
    left0 = -min(crit + infl) + 1e-3
    rr = _radius(p, tau_min, 1.0, max(right0, 0.0))
    rl = _radius(p, tau_min, -1.0, max(left0, 0.0))
    pts = {-rl, rr}
    for m in crit:
        if not (-rl < m < rr):
            continue
        pts.add(m)
        if m != 0.0 and d2p(m) < 0.0:
            continue
        # a well at height p(m) stops carrying mass once 2 tau p(m) > 50
        tau_eff = tau_max if m == 0.0 else min(tau_max, max(tau_min, 25.0 / max(p(m), 1e-300)))
        q = p.shift(m).coeffs
        s = sum((2.0 * tau_eff * abs(q[j])) ** (1.0 / j) for j in range(2, len(q)) if q[j] != 0.0)
        w = 0.25 / s if s > 0 else 1.0
        while w < rr + rl:
            for x in (m - w, m + w):
                if -rl < x < rr:
                    pts.add(x)
            w *= 2.0
    return np.array(sorted(pts)), rl, rr


def _tail_bound(p: Polynomial, tau: np.ndarray, r: float, side: float) -> np.ndarray:
    # p convex and increasing past r: int_r^oo e^{-2 tau p} <= e^{-2 tau p(r)} / (2 tau |p'(r)|)
    slope = abs(derivative(p)(side * r))
    if slope == 0.0:
        return np.full_like(tau, np.inf)
    return np.exp(-2.0 * tau * p(side * r)) / (2.0 * tau * slope)


def laplace_breaks(p: Polynomial, tau_min: float, tau_max: float):
    """Initial panel layout valid for every ``tau`` in ``[tau_min, tau_max]``."""
    return _breakpoints(p, tau_min, tau_max)


def laplace_batch(p: Polynomial, taus, rtol: float = 1e-10, max_panels: int = 4000,
                  layout=None):
    """``I`` for many ``tau`` at once over a shared adaptive panel set.

    Returns ``(values, errors, radius, panels, converged)``; ``radius`` is
    ``max(R_left, R_right)``. ``layout`` may carry a precomputed
    :func:`laplace_breaks` result covering all of ``taus``.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus <= 0):
        raise ValueError("tau must be positive")
    if layout is None:
        layout = _breakpoints(p, float(taus.min()), float(taus.max()))
    breaks, rl, rr = layout
    two_tau = 2.0 * taus

    def f(x):
        return np.exp(-np.outer(p(x), two_tau))

    out = integrate(f, breaks, rtol=rtol, max_panels=max_panels)
    val = np.atleast_1d(out.value)
    tail = _tail_bound(p, taus, rr, 1.0) + _tail_bound(p, taus, rl, -1.0)
    return val, np.atleast_1d(out.error) + tail, max(rl, rr), out.panels, out.converged


def laplace_integral(sp: ShiftedPolynomial | Polynomial, tau: float, tol: float = 1e-10,
                     max_panels: int = 4000) -> QuadratureResult:
    """Adaptive quadrature of ``exp(-2 tau p)`` over the real line."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    p = sp.p if isinstance(sp, ShiftedPolynomial) else sp
    val, err, r, panels, ok = laplace_batch(p, [tau], rtol=0.5 * tol, max_panels=max_panels)
    v, e = float(val[0]), float(err[0])
    ok = ok and e <= tol * (1.0 + abs(v))
    return QuadratureResult(max(v, 0.0), e, r, panels, ok)


def N_value(b: Polynomial, eta: float, tau: float, tol: float = 1e-10) -> NResult:
    """``log N(eta, tau) = 2 tau b*(eta) + log I(eta, tau)``."""
    ms = minimizer_set(b, eta)
    sp = ShiftedPolynomial(Polynomial(shifted_coefficients(b, ms.lam, eta)), eta, ms.lam)
    res = laplace_integral(sp, tau, tol)
    bstar = -ms.min_value
    return NResult(2.0 * tau * bstar + math.log(res.value), bstar, res)


def bnw_estimate(beta: Sequence[float]) -> float:
    """``[sum_j |beta_j|**(1/j)]**-1`` for ``beta = (beta_2, ..., beta_2n)``."""
    s = sum(abs(v) ** (1.0 / j) for j, v in enumerate(beta, start=2) if v != 0.0)
    if s == 0.0:
        raise ValueError("all coefficients are zero")
    return 1.0 / s


def _derivs_at(b: Polynomial, lam: float) -> list[float]:
    return [derivative(b, j)(lam) for j in range(2, b.degree + 1)]


def lower_bound_I(b: Polynomial, eta: float, tau: float) -> float:
    """``[sum_{j>=2} (tau |b^(j)(lambda(eta))|)**(1/j)]**-1``.

    Since ``p_eta <= (1/2) sum |b^(j)| |xi|^j`` this satisfies
    ``lower_bound_I <= e * I(eta, tau)``.
    """
    lam = minimizer_set(b, eta).lam
    return bnw_estimate([tau * abs(v) for v in _derivs_at(b, lam)])


@dataclass(frozen=True)
class UpperBoundCheck:
    fitted_c: float
    holds: bool
    worst_ratio: float
    tail_sqrt_tau_I: float


def upper_bound_check(b: Polynomial, eta0: float, eps: float, tau_set: Sequence[float],
                      n_eta: int = 11, tol: float = 1e-9, slack: float = 0.05) -> UpperBoundCheck:
    """Check ``I <= c (1 + sqrt(tau)) / sqrt(tau)`` on the window ``(eta0, eta0 + eps)``.

    ``c`` is fitted as the largest ``I sqrt(tau)/(1 + sqrt(tau))`` over a
    fitting grid (``n_eta`` slopes times ``tau_set``); the bound is then
    verified with ``slack`` on an interleaved grid of slopes and taus that
    were not used in the fit.
    """
    if eps <= 0 or len(tau_set) == 0:
        raise ValueError("need eps > 0 and a nonempty tau set")
    taus = np.sort(np.asarray(tau_set, dtype=float))
    fit_etas = eta0 + eps * (np.arange(1, n_eta + 1) - 0.5) / n_eta
    chk_etas = np.concatenate([
        eta0 + eps * np.arange(1, n_eta) / n_eta,
        [eta0 + eps * 1e-3, eta0 + eps * (1 - 1e-3)],
    ])
    chk_taus = np.sqrt(taus[:-1] * taus[1:]) if len(taus) > 1 else taus

    def profile(etas, ts):
        _, lams, _ = minimizers_batch(b, etas)
        rows = []
        for eta, lam in zip(etas, lams):
            p = Polynomial(shifted_coefficients(b, lam, eta))
            val, err, _, _, ok = laplace_batch(p, ts, rtol=tol)
            if not ok:
                raise QuadratureError(f"I(eta={eta!r}) did not converge")
            rows.append(val)
        return np.array(rows)

    envelope = lambda ts: (1.0 + np.sqrt(ts)) / np.sqrt(ts)
    fit = profile(fit_etas, taus)
    c = float((fit / envelope(taus)).max())
    chk = profile(chk_etas, chk_taus)
    ratio = max(float((chk / envelope(chk_taus)).max()), float((fit / envelope(taus)).max())) / c
    tail = float((np.sqrt(taus[-1]) * np.concatenate([fit[:, -1], chk[:, -1]])).max())
    return UpperBoundCheck(c, ratio <= 1.0 + slack, ratio, tail)
