"""Global minimisation of the tilted family ``B_eta(x) = b(x) - eta*x``.

The global minimisers of ``B_eta`` are read off the real critical points,
i.e. the real roots of ``b'(x) - eta``. From them come ``lambda(eta)``
(largest minimiser), ``sigma(eta)`` (smallest), the Legendre transform
``b*(eta) = -min B_eta`` and, by locating the slopes at which ``lambda``
jumps, the finite table of bitangents that defines the convex envelope
``b**``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polynomial import Polynomial, concavity_intervals, derivative

__all__ = [
    "MinimizerSet",
    "Gap",
    "EnvelopeTable",
    "AsymptoticRatios",
    "minimizer_set",
    "minimizers_batch",
    "lambda_of",
    "legendre",
    "gap_intervals",
    "biconjugate",
    "asymptotic_ratios",
]

TIE_TOL = 1e-10
MERGE_TOL = 1e-7
SCAN_POINTS = 512
BISECT_WIDTH = 1e-12


@dataclass(frozen=True)
class MinimizerSet:
    eta: float
    minimizers: tuple[float, ...]
    sigma: float
    lam: float
    min_value: float

    @property
    def legendre(self) -> float:
        return -self.min_value


def _critical_candidates(b: Polynomial, etas: np.ndarray) -> np.ndarray:
    """Real parts of all roots of ``b' - eta`` for each eta, Newton-polished.

    Returns an array of shape ``(len(etas), 2n - 1)``. Real parts of genuinely
    complex roots are kept as harmless extra candidates: ``B_eta`` there is
    never below the true minimum.
    """
    db = derivative(b)
    d2b = derivative(b, 2)
    c = db.array
    d = len(c) - 1
    lead = c[-1]
    mon = c[:-1] / lead
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    m = len(etas)
    if d == 1:
        x = ((etas - c[0]) / lead)[:, None]
        return x
    comp = np.zeros((m, d, d))
    comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
    comp[:, :, -1] = -mon
    comp[:, 0, -1] = -(c[0] - etas) / lead
    z = np.linalg.eigvals(comp)
    x = z.real.copy()
    e = etas[:, None]
    # steps that overshoot near multiple roots overflow; they are rejected below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(6):
            g = db(x) - e
            h = d2b(x)
            step = np.where(h != 0.0, g / h, 0.0)
            xn = x - step
            better = np.isfinite(xn) & (np.abs(db(xn) - e) <= np.abs(g))
            x = np.where(better, xn, x)
    return x


def minimizers_batch(b: Polynomial, etas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised ``(sigma, lambda, min_value)`` for an array of slopes."""
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    x = _critical_candidates(b, etas)
    vals = b(x) - etas[:, None] * x
    mn = vals.min(axis=1)
    tied = vals - mn[:, None] <= TIE_TOL * (1.0 + np.abs(mn))[:, None]
    lam = np.where(tied, x, -np.inf).max(axis=1)
    sig = np.where(tied, x, np.inf).min(axis=1)
    return sig, lam, mn


def lambda_of(b: Polynomial, etas) -> np.ndarray:
    return minimizers_batch(b, etas)[1]


def minimizer_set(b: Polynomial, eta: float, tie_tol: float = TIE_TOL) -> MinimizerSet:
    """All global minimisers of ``b(x) - eta*x``, ties judged relative to ``1 + |min|``."""
    x = _critical_candidates(b, np.array([eta]))[0]
    vals = b(x) - eta * x
    mn = float(vals.min())
    keep = sorted(
        (float(xi), float(v)) for xi, v in zip(x, vals) if v - mn <= tie_tol * (1.0 + abs(mn))
    )
    db = derivative(b)
    groups: list[list[tuple[float, float]]] = []
    for xi, v in keep:
        if groups and abs(xi - groups[-1][-1][0]) <= MERGE_TOL * (1.0 + abs(xi)):
            groups[-1].append((xi, v))
        else:
            groups.append([(xi, v)])
    mins = tuple(min(g, key=lambda t: abs(db(t[0]) - eta))[0] for g in groups)
    return MinimizerSet(float(eta), mins, mins[0], mins[-1], mn)


def legendre(b: Polynomial, eta) -> float | np.ndarray:
    """``b*(eta) = sup_x [eta*x - b(x)]``; vectorised over ``eta``."""
    if np.isscalar(eta):
        return -minimizer_set(b, float(eta)).min_value
    return -minimizers_batch(b, eta)[2]


@dataclass(frozen=True)
class Gap:
    """One bitangent: slope ``c`` touching ``b`` at ``sigma < lam``."""

    c: float
    sigma: float
    lam: float
    bridge_value: float
    members: tuple[float, ...] = ()
    degraded: bool = False

    def bridge(self, u):
        return self.bridge_value + self.c * (np.asarray(u, dtype=float) - self.sigma)

    def to_dict(self) -> dict:
        out = {"c": self.c, "sigma": self.sigma, "lambda": self.lam, "bridge_value": self.bridge_value}
        if self.members:
            out["members"] = list(self.members)
        if self.degraded:
            out["degraded"] = True
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Gap":
        return cls(
            float(d["c"]),
            float(d["sigma"]),
            float(d["lambda"]),
            float(d["bridge_value"]),
            tuple(float(v) for v in d.get("members", ())),
            bool(d.get("degraded", False)),
        )


@dataclass(frozen=True)
class EnvelopeTable:
    gaps: tuple[Gap, ...] = field(default_factory=tuple)

    @property
    def slopes(self) -> list[float]:
        return [g.c for g in self.gaps]

    def __len__(self) -> int:
        return len(self.gaps)

    def to_dict(self) -> dict:
        return {"gaps": [g.to_dict() for g in self.gaps]}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvelopeTable":
        return cls(tuple(Gap.from_dict(g) for g in d["gaps"]))

    def gap_at(self, u: float, tol: float = 0.0) -> Gap | None:
        """Gap whose closed hull ``[sigma, lam]`` contains ``u``."""
        for g in self.gaps:
            if g.sigma - tol <= u <= g.lam + tol:
                return g
        return None


def _bitangent_newton(b: Polynomial, s: float, l: float, iters: int = 50):
    db, d2b = derivative(b), derivative(b, 2)
    for _ in range(iters):
        f1 = db(s) - db(l)
        f2 = b(l) - b(s) - db(s) * (l - s)
        j11, j12 = d2b(s), -d2b(l)
        j21, j22 = -d2b(s) * (l - s), db(l) - db(s)
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            return None
        ds = (f1 * j22 - f2 * j12) / det
        dl = (j11 * f2 - j21 * f1) / det
        s, l = s - ds, l - dl
        if not (math.isfinite(s) and math.isfinite(l)) or l <= s:
            return None
        if abs(ds) + abs(dl) <= 1e-15 * (1.0 + abs(s) + abs(l)):
            break
    scale = 1.0 + abs(db(s)) + abs(db(l))
    if abs(db(s) - db(l)) > 1e-9 * scale:
        return None
    return s, l


def gap_intervals(b: Polynomial, tol: float = 1e-9) -> EnvelopeTable:
    """Bitangent slopes and gap intervals ``[sigma(c), lambda(c))`` of ``b``.

    ``lambda(eta)`` jumps across ``c`` exactly when the interval between its
    one-sided values contains a point where ``b'' < 0``. Jumps can only occur
    at slopes ``b'(w)`` with ``w`` in a concavity interval, so the scan is
    confined to those slope ranges, then each jump is bisected and the
    bitangent pair polished by Newton's method.
    """
    conc = concavity_intervals(b)
    if not conc:
        return EnvelopeTable(())
    db = derivative(b)

    def jumps(l0: float, l1: float) -> bool:
        return any(lo < l1 and hi > l0 for lo, hi in conc)

    brackets = []
    for lo, hi in conc:
        e_lo, e_hi = db(hi), db(lo)
        pad = 1e-6 * (1.0 + abs(e_hi - e_lo) + abs(e_lo) + abs(e_hi))
        brackets.append([e_lo - pad, e_hi + pad])
    brackets.sort()
    merged = [brackets[0]]
    for lo, hi in brackets[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])

    cells: list[tuple[float, float, float, float]] = []

    def refine(e0: float, e1: float, l0: float, l1: float) -> None:
        if e1 - e0 <= BISECT_WIDTH * (1.0 + abs(e0)):
            cells.append((e0, e1, l0, l1))
            return
        em = 0.5 * (e0 + e1)
        if em <= e0 or em >= e1:
            cells.append((e0, e1, l0, l1))
            return
        lm = float(lambda_of(b, [em])[0])
        if jumps(l0, lm):
            refine(e0, em, l0, lm)
        if jumps(lm, l1):
            refine(em, e1, lm, l1)

    for lo, hi in merged:
        grid = np.linspace(lo, hi, SCAN_POINTS)
        lam = lambda_of(b, grid)
        for i in range(len(grid) - 1):
            if jumps(lam[i], lam[i + 1]):
                refine(grid[i], grid[i + 1], lam[i], lam[i + 1])

    gaps = []
    for e0, e1, l0, l1 in cells:
        sig_guess = float(minimizers_batch(b, [e0])[1][0])
        lam_guess = float(minimizers_batch(b, [e1])[1][0])
        sol = _bitangent_newton(b, sig_guess, lam_guess)
        if sol is None:
            s, l, c, degraded = sig_guess, lam_guess, 0.5 * (e0 + e1), True
        else:
            s, l = sol
            c = (b(l) - b(s)) / (l - s)
            degraded = not (e0 - 1e-6 * (1 + abs(e0)) <= c <= e1 + 1e-6 * (1 + abs(e1)))
            if degraded:
                s, l, c = sig_guess, lam_guess, 0.5 * (e0 + e1)
        gaps.append([float(c), float(s), float(l), degraded])
    gaps.sort()
    # a tie of three or more wells splits into adjacent cells with one slope
    merged_gaps: list[list] = []
    for g in gaps:
        last = merged_gaps[-1] if merged_gaps else None
        if last is not None and abs(g[0] - last[0]) <= 1e-8 * (1.0 + abs(g[0])):
            last[1], last[2] = min(last[1], g[1]), max(last[2], g[2])
            last[0] = (b(last[2]) - b(last[1])) / (last[2] - last[1])
            last[3] = last[3] or g[3]
        else:
            merged_gaps.append(list(g))
    return EnvelopeTable(tuple(
        Gap(c, s, l, float(b(s)), _tied_members(b, c, s, l, tol), degraded)
        for c, s, l, degraded in merged_gaps
    ))


def _tied_members(b: Polynomial, c: float, s: float, l: float, tol: float) -> tuple[float, ...]:
    # Lambda_c can hold interior minimisers besides the two endpoints (n >= 3)
    x = _critical_candidates(b, np.array([c]))[0]
    ref = b(s) - c * s
    d2b = derivative(b, 2)
    inner = [
        float(xi)
        for xi in x
        if s + MERGE_TOL * (1 + abs(s)) < xi < l - MERGE_TOL * (1 + abs(l))
        and d2b(xi) >= 0
        and abs(b(xi) - c * xi - ref) <= max(tol, TIE_TOL) * (1.0 + abs(ref))
    ]
    if not inner:
        return ()
    return tuple([s, *sorted(set(inner)), l])


def biconjugate(b: Polynomial, env: EnvelopeTable, u):
    """Convex envelope ``b**``: ``b`` off the gaps, the bitangent on them."""
    if np.isscalar(u):
        g = env.gap_at(float(u))
        return float(b(u)) if g is None else float(g.bridge(u))
    u = np.asarray(u, dtype=float)
    out = b(u)
    for g in env.gaps:
        inside = (u >= g.sigma) & (u <= g.lam)
        out = np.where(inside, g.bridge(u), out)
    return out


@dataclass(frozen=True)
class AsymptoticRatios:
    eta: float
    lambda_ratio: float
    legendre_ratio: float
    derivative_ratios: dict[int, float]
    simple: bool

    def all_ratios(self) -> list[float]:
        return [self.lambda_ratio, self.legendre_ratio, *self.derivative_ratios.values()]


def _odd_root(v: float, k: int) -> float:
    return math.copysign(abs(v) ** (1.0 / k), v)


def asymptotic_ratios(b: Polynomial, eta: float) -> AsymptoticRatios:
    """Ratios of ``lambda(eta)``, ``b*(eta)`` and ``b^(j)(lambda(eta))`` to their
    leading power-law behaviour as ``|eta| -> oo``.

    With leading coefficient ``a`` of ``x**(2n)`` put ``kappa = 2n*a`` and
    ``rho = (eta/kappa)**(1/(2n-1))`` (real odd root). Then
    ``lambda ~ rho``, ``b* ~ (2n-1)/(2n) * kappa * rho**(2n)`` and
    ``b^(j)(lambda) ~ kappa * (2n-1)!/(2n-j)! * rho**(2n-j)``. For ``kappa = 1``
    these are the familiar normal-form asymptotics.
    """
    if eta == 0:
        raise ValueError("asymptotic ratios need eta != 0")
    d = b.degree
    n = d // 2
    kappa = d * b.leading
    rho = _odd_root(eta / kappa, d - 1)
    ms = minimizer_set(b, eta)
    lam = ms.lam
    bstar = -ms.min_value
    ratios = {}
    for j in range(2, d + 1):
        ref = kappa * math.factorial(d - 1) / math.factorial(d - j) * rho ** (d - j)
        ratios[j] = derivative(b, j)(lam) / ref
    simple = len(ms.minimizers) == 1 and derivative(b, 2)(lam) > 0
    return AsymptoticRatios(
        float(eta),
        lam / rho,
        bstar / ((2 * n - 1) / (2 * n) * kappa * rho**d),
        ratios,
        simple,
    )
