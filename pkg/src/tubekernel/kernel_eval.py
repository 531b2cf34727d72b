"""Szegő kernel and derivative integrals on the closed tube domain.

With ``delta = h + k``, ``s = i1 + j1``, ``m = i1 + j1 + i2 + j2`` and
``A(x, r, eta) = b(x) + b(r) - eta (x + r) + 2 b*(eta)`` the absolute
integral is

    S~ = int_R int_0^oo exp(-tau (delta + A)) |eta|^s tau^(m+1) / I(eta, tau) dtau deta,

where ``I`` is the recentred Laplace integral (the ``exp(2 tau b*)`` part of
``N`` cancels against ``A``). The complex kernel carries the extra phase
``exp(i tau (t - u) + i eta tau (y - s))`` and a signed ``eta**s``. The
overall normalising constant is taken to be 1.

The tau integral runs over ``u = log tau``; both truncation ends are
covered by rigorous bounds coming from ``1/I <= e * sum_j (tau |b^(j)|)^(1/j)``.
The eta integral is truncated at ``M`` using the power-law tail
``|eta|^(-2-(m-s)-(m+3)/(2n-1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gamma, gammaincc

from .legendre import EnvelopeTable, minimizers_batch
from .laplace import laplace_batch, laplace_breaks, shifted_coefficients
from .polynomial import Polynomial, derivative
from .quadrature import integrate
from .singular import (
    KernelQuery,
    classify_pair,
    convergence_margin,
    margin_minimizing_slope,
)

__all__ = [
    "KernelEvaluation",
    "DivergenceProbe",
    "KernelDomainError",
    "abs_kernel",
    "abs_kernel_orders",
    "kernel",
    "I_j_lower",
    "I_j_integrated",
    "divergence_probe",
]

DEFAULT_TOL = 1e-6
DEFAULT_BUDGET = 2000
ETA_CAP = 1e7
TAU_FLOOR = 1e-8


class KernelDomainError(ValueError):
    """Query lies where the kernel integral does not converge."""


@dataclass(frozen=True)
class KernelEvaluation:
    kind: str
    value: float | complex | None
    error_estimate: float
    eta_truncation: float
    status: str
    panels: int = 0
    orders: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        if self.value is None:
            v = None
        elif isinstance(self.value, complex):
            v = [self.value.real, self.value.imag]
        else:
            v = self.value
        return {"status": self.status, "value": v, "err": self.error_estimate,
                "eta_truncation": self.eta_truncation, "kind": self.kind,
                "s": self.orders[0], "m": self.orders[1]}


@dataclass
class _Context:
    b: Polynomial
    x: float
    r: float
    delta: float
    orders: list[tuple[int, int]]
    omega: tuple[float, float] | None
    tol: float
    derivs: list[Polynomial] = field(default_factory=list)
    inner_rel: float = 0.0
    inner_ok: bool = True


def _tau_bounds(ctx: _Context, a: float, absd: np.ndarray, tau_min: float, tau_max: float,
                s: int, m: int, eta: float) -> float:
    js = np.arange(2, len(absd) + 2)
    nz = absd > 0
    js, coef = js[nz], absd[nz] ** (1.0 / js[nz])
    e = m + 2 + 1.0 / js
    low = np.sum(coef * tau_min**e / e)
    high = np.sum(coef * gamma(e) * gammaincc(e, a * tau_max) / a**e)
    return math.e * abs(eta) ** s * float(low + high)


def _tau_integral(ctx: _Context, eta: float, lam: float, bstar: float):
    b = ctx.b
    a = ctx.delta + b(ctx.x) + b(ctx.r) - eta * (ctx.x + ctx.r) + 2.0 * bstar
    if not a > 0:
        n = len(ctx.orders) * (3 if ctx.omega else 1)
        return np.full(n, np.inf), np.zeros(n)
    p = Polynomial(shifted_coefficients(b, lam, eta))
    m_max = max(m for _, m in ctx.orders)
    tau_min = TAU_FLOOR / max(1.0, a)
    tau_max = (60.0 + 2.0 * m_max) / a
    u0, u1 = math.log(tau_min), math.log(tau_max)
    layout = laplace_breaks(p, tau_min, tau_max)
    peak = math.log(2.0 / a)
    breaks = sorted({u0, u1, *np.linspace(u0, u1, 4), min(max(peak, u0), u1)})
    ms = np.array([m for _, m in ctx.orders], dtype=float)
    weights = np.array([abs(eta) ** s for s, _ in ctx.orders])
    xi_rtol = max(1e-13, 1e-3 * ctx.tol)
    if ctx.omega is not None:
        s0 = ctx.orders[0][0]
        signed = eta**s0
        omega = ctx.omega[0] + eta * ctx.omega[1]

    def f(u):
        tau = np.exp(u)
        val, err, _, _, ok = laplace_batch(p, tau, rtol=xi_rtol, layout=layout)
        if not ok:
            ctx.inner_ok = False
        logi = np.log(val)
        base = np.exp(np.outer(u, ms + 2.0) - (a * tau + logi)[:, None])
        out = base * weights[None, :]
        if ctx.omega is None:
            return out
        ph = omega * tau
        return np.column_stack([out[:, 0], signed * base[:, 0] * np.cos(ph),
                                signed * base[:, 0] * np.sin(ph)])

    k = len(ctx.orders)
    ref = None if ctx.omega is None else [0, 0, 0]
    res = integrate(f, breaks, rtol=0.1 * ctx.tol, max_panels=400, ref=ref)
    if not res.converged:
        ctx.inner_ok = False
    vals = np.atleast_1d(res.value)
    errs = np.atleast_1d(res.error).copy()
    absd = np.abs([d(lam) for d in ctx.derivs])
    for i, (s, m) in enumerate(ctx.orders):
        errs[i] += _tau_bounds(ctx, a, absd, tau_min, tau_max, s, m, eta)
    if ctx.omega is not None:
        errs[1:] += errs[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(np.abs(vals[:k]) > 0, errs[:k] / np.abs(vals[:k]), 0.0)
    ctx.inner_rel = max(ctx.inner_rel, float(rel.max()))
    return vals, errs


def _eta_function(ctx: _Context):
    def f(etas):
        etas = np.asarray(etas, dtype=float)
        _, lams, mins = minimizers_batch(ctx.b, etas)
        rows = [_tau_integral(ctx, e, l, -mn)[0] for e, l, mn in zip(etas, lams, mins)]
        return np.array(rows)
    return f


def _tail_exponents(n: int, orders) -> np.ndarray:
    return np.array([2.0 + (m - s) + (m + 3.0) / (2 * n - 1) for s, m in orders])


def _eta_breaks(b: Polynomial, env: EnvelopeTable, x: float, r: float, margin: float,
                M: float) -> list[float]:
    star = margin_minimizing_slope(b, env, x, r)
    pts = {-M, M, 0.0, star, *env.slopes}
    w = max(min(margin, 1.0), 1e-6) / 4.0
    while w < 1.0:
        pts.update({star - w, star + w})
        w *= 2.0
    v = 1.0
    while v < M:
        pts.update({v, -v})
        v *= 4.0
    return sorted(p for p in pts if -M <= p <= M)


def _initial_M(b: Polynomial, env: EnvelopeTable, x: float, r: float) -> float:
    star = margin_minimizing_slope(b, env, x, r)
    big = max([abs(star), *(abs(c) for c in env.slopes), 1.0])
    return float(2.0 ** math.ceil(math.log2(max(16.0, 4.0 * big))))


def _integrate_eta(b, env, ctx: _Context, margin: float, budget: int, eta_cap: float,
                   eta_truncation: float | None):
    n = b.degree // 2
    k = len(ctx.orders)
    p_exp = _tail_exponents(n, ctx.orders)
    f = _eta_function(ctx)
    ref = None if ctx.omega is None else [0, 0, 0]
    fixed = eta_truncation is not None
    M = float(eta_truncation) if fixed else _initial_M(b, env, ctx.x, ctx.r)
    res = integrate(f, _eta_breaks(b, env, ctx.x, ctx.r, margin, M), rtol=ctx.tol,
                    max_panels=budget, ref=ref)
    total = np.atleast_1d(res.value).astype(float)
    err = np.atleast_1d(res.error).astype(float)
    panels = res.panels
    ok = res.converged
    while True:
        edge = f(np.array([-M, M]))
        tail = (np.abs(edge[0]) + np.abs(edge[1])) * M / (p_exp - 1.0 if ctx.omega is None
                                                          else np.repeat(p_exp, 3) - 1.0)
        small = tail[:k] <= 0.1 * ctx.tol * np.abs(total[:k])
        if fixed or np.all(small) or 2 * M > eta_cap or panels >= budget:
            break
        outer = [M, 2.0 * M]
        left = integrate(f, [-v for v in outer][::-1], rtol=ctx.tol, max_panels=budget, ref=ref)
        right = integrate(f, outer, rtol=ctx.tol, max_panels=budget, ref=ref)
        total = total + np.atleast_1d(left.value) + np.atleast_1d(right.value)
        err = err + np.atleast_1d(left.error) + np.atleast_1d(right.error)
        panels += left.panels + right.panels
        ok = ok and left.converged and right.converged
        M *= 2.0
    tail_ok = bool(np.all(tail[:k] <= ctx.tol * np.abs(total[:k])))
    err = err + tail + ctx.inner_rel * np.abs(total if ctx.omega is None else np.repeat(total[:1], 3))
    return total, err, M, panels, ok and ctx.inner_ok and (tail_ok or fixed)


def abs_kernel_orders(b: Polynomial, env: EnvelopeTable, x: float, r: float, delta: float,
                      orders: Sequence[tuple[int, int]], tol: float = DEFAULT_TOL,
                      budget: int = DEFAULT_BUDGET, eta_cap: float = ETA_CAP,
                      eta_truncation: float | None = None) -> list[KernelEvaluation]:
    """Absolute integrals for several ``(s, m)`` pairs sharing one quadrature."""
    orders = [(int(s), int(m)) for s, m in orders]
    if any(s < 0 or m < s for s, m in orders):
        raise ValueError("orders must satisfy 0 <= s <= m")
    q = KernelQuery(x=x, r=r, h=delta)
    margin = convergence_margin(b, env, q)
    cls = classify_pair(b, env, q)
    if margin <= 0.0 or (delta == 0.0 and cls.in_sigma):
        status = "diverged" if delta == 0.0 and cls.in_sigma else "margin_nonpositive"
        return [KernelEvaluation("absolute", None, math.inf, 0.0, status, 0, o) for o in orders]
    ctx = _Context(b, x, r, delta, orders, None, tol,
                   [derivative(b, j) for j in range(2, b.degree + 1)])
    total, err, M, panels, ok = _integrate_eta(b, env, ctx, margin, budget, eta_cap, eta_truncation)
    status = "converged" if ok else "budget_exceeded"
    return [KernelEvaluation("absolute", float(v), float(e), M, status, panels, o)
            for v, e, o in zip(total, err, orders)]


def abs_kernel(b: Polynomial, env: EnvelopeTable, q: KernelQuery, tol: float = DEFAULT_TOL,
               budget: int = DEFAULT_BUDGET, eta_cap: float = ETA_CAP,
               eta_truncation: float | None = None) -> KernelEvaluation:
    """``S~^{s,m,delta}`` for the query's point pair and derivative orders."""
    return abs_kernel_orders(b, env, q.x, q.r, q.delta, [(q.s_exp, q.m_exp)], tol, budget,
                             eta_cap, eta_truncation)[0]


def kernel(b: Polynomial, env: EnvelopeTable, q: KernelQuery, tol: float = DEFAULT_TOL,
           budget: int = DEFAULT_BUDGET, eta_cap: float = ETA_CAP,
           eta_truncation: float | None = None) -> KernelEvaluation:
    """Complex kernel derivative integral (normalising constant 1)."""
    margin = convergence_margin(b, env, q)
    if not margin > 0.0:
        raise KernelDomainError(f"convergence margin {margin!r} is not positive")
    orders = [(q.s_exp, q.m_exp)]
    ctx = _Context(b, q.x, q.r, q.delta, orders, (q.t - q.u, q.y - q.s), tol,
                   [derivative(b, j) for j in range(2, b.degree + 1)])
    total, err, M, panels, ok = _integrate_eta(b, env, ctx, margin, budget, eta_cap, eta_truncation)
    value = complex(total[1], total[2])
    status = "converged" if ok else "budget_exceeded"
    return KernelEvaluation("complex", value, float(max(err[1], err[2])), M, status, panels,
                            orders[0])


def I_j_lower(b: Polynomial, x: float, r: float, delta: float, s: int, m: int, j: int,
              eta: float) -> float:
    """Closed-form tau integral ``|eta|^s |b^(j)(lambda)|^(1/j) Gamma(m+2+1/j) / (delta+A)^(m+2+1/j)``."""
    sig, lam, mn = minimizers_batch(b, [eta])
    a = delta + b(x) + b(r) - eta * (x + r) - 2.0 * float(mn[0])
    if not a > 0:
        raise ValueError("delta + A must be positive")
    e = m + 2.0 + 1.0 / j
    return abs(eta) ** s * abs(derivative(b, j)(float(lam[0]))) ** (1.0 / j) * math.gamma(e) / a**e


def I_j_integrated(b: Polynomial, env: EnvelopeTable, x: float, r: float, delta: float,
                   s: int, m: int, M: float, tol: float = 1e-8) -> float:
    """``sum_j int_{-M}^{M} I_j(eta) d eta`` by adaptive quadrature."""
    derivs = [derivative(b, j) for j in range(2, b.degree + 1)]

    def f(etas):
        _, lams, mins = minimizers_batch(b, etas)
        a = delta + b(x) + b(r) - etas * (x + r) - 2.0 * mins
        out = np.zeros_like(etas)
        for j, d in enumerate(derivs, start=2):
            e = m + 2.0 + 1.0 / j
            out += np.abs(d(lams)) ** (1.0 / j) * math.gamma(e) / a**e
        return np.abs(etas) ** s * out

    margin = convergence_margin(b, env, KernelQuery(x=x, r=r, h=delta))
    return float(integrate(f, _eta_breaks(b, env, x, r, margin, M), rtol=tol).value)


@dataclass(frozen=True)
class DivergenceProbe:
    deltas: tuple[float, ...]
    values: tuple[float, ...]
    growth_ratios: tuple[float, ...]
    errors: tuple[float, ...]
    statuses: tuple[str, ...]
    complete: bool


def divergence_probe(b: Polynomial, env: EnvelopeTable, x: float, r: float, delta0: float,
                     halvings: int, tol: float = DEFAULT_TOL,
                     budget: int = DEFAULT_BUDGET) -> DivergenceProbe:
    """``S~^{0,0,delta}`` along ``delta = delta0 / 2^i``, ``i = 0..halvings``."""
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")
    deltas, values, errors, statuses = [], [], [], []
    for i in range(halvings + 1):
        d = delta0 / 2.0**i
        ev = abs_kernel(b, env, KernelQuery(x=x, r=r, h=0.5 * d, k=0.5 * d), tol, budget)
        deltas.append(d)
        values.append(ev.value)
        errors.append(ev.error_estimate)
        statuses.append(ev.status)
        if ev.status != "converged":
            break
    ratios = tuple(v1 / v0 for v0, v1 in zip(values[:-1], values[1:]))
    complete = len(values) == halvings + 1 and all(s == "converged" for s in statuses)
    return DivergenceProbe(tuple(deltas), tuple(values), ratios, tuple(errors), tuple(statuses),
                           complete)
