"""Real polynomials in ascending-coefficient form.

Everything downstream (the tilted family ``-eta*x + b(x)``, the shifted
polynomials ``p_eta`` and the envelope construction) is built on the small
set of operations here: Horner evaluation, derivatives, Taylor shifts, root
extraction with multiplicities and a factorisation of nonnegative
polynomials into real quadratics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "Polynomial",
    "RootList",
    "QuadraticFactorization",
    "PolynomialError",
    "DomainError",
    "NotNonnegativeError",
    "evaluate",
    "derivative",
    "real_roots",
    "convexity_intervals",
    "factor_nonneg",
    "parse_polynomial",
    "format_polynomial",
    "validate_domain",
]

# roots closer than CLUSTER_TOL * (1 + |root|) are merged into one multiple root
CLUSTER_TOL = 1e-7


class PolynomialError(ValueError):
    """Malformed or degenerate polynomial input."""


class DomainError(PolynomialError):
    """Polynomial is not admissible as the boundary function ``b``."""


class NotNonnegativeError(PolynomialError):
    """Raised by :func:`factor_nonneg` when the input takes negative values."""

    def __init__(self, message: str, witness: float | None = None, value: float | None = None):
        super().__init__(message)
        self.witness = witness
        self.value = value


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with real coefficients, ``coeffs[j]`` multiplying ``x**j``.

    Trailing zero coefficients are stripped on construction, so ``degree`` is
    always the index of the last nonzero coefficient. The zero polynomial is
    represented by ``coeffs == (0.0,)`` and has degree 0.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float]):
        c = [float(v) for v in coeffs]
        if not c:
            c = [0.0]
        if not all(math.isfinite(v) for v in c):
            raise PolynomialError("polynomial coefficients must be finite")
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __call__(self, x):
        c = self.coeffs
        if np.isscalar(x):
            acc = 0.0
            for a in reversed(c):
                acc = acc * x + a
            return acc
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for a in reversed(c):
            acc = acc * x + a
        return acc

    def deriv(self, j: int = 1) -> "Polynomial":
        return derivative(self, j)

    def shift(self, x0: float) -> "Polynomial":
        """Return ``q`` with ``q(xi) = self(xi + x0)`` (Taylor shift)."""
        c = list(self.coeffs)
        d = len(c) - 1
        # repeated synthetic division; exact in the sense of Horner
        for i in range(d):
            for k in range(d - 1, i - 1, -1):
                c[k] += x0 * c[k + 1]
        return Polynomial(c)

    def scale(self) -> float:
        """Largest coefficient magnitude; used to make tolerances relative."""
        return max(abs(a) for a in self.coeffs)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polyadd(self.array, other.array))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polysub(self.array, other.array))

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polymul(self.array, other.array))

    def __str__(self) -> str:
        return format_polynomial(self)


@dataclass(frozen=True)
class RootList:
    real_roots: tuple[tuple[float, int], ...]
    complex_pairs: tuple[tuple[float, float, int], ...]

    @property
    def locations(self) -> list[float]:
        return [r for r, _ in self.real_roots]

    def count(self) -> int:
        return sum(m for _, m in self.real_roots) + 2 * sum(m for *_, m in self.complex_pairs)


@dataclass(frozen=True)
class QuadraticFactorization:
    """``p(xi) = leading * xi**k0 * prod_j ((xi - h_j)**2 + k_j**2)``."""

    leading: float
    even_order_root_at_zero: int
    factors: tuple[tuple[float, float], ...]

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = self.leading * xi ** self.even_order_root_at_zero
        for h, k in self.factors:
            out = out * ((xi - h) ** 2 + k * k)
        return out

    def expand(self) -> Polynomial:
        c = np.zeros(self.even_order_root_at_zero + 1)
        c[-1] = self.leading
        for h, k in self.factors:
            c = npoly.polymul(c, [h * h + k * k, -2.0 * h, 1.0])
        return Polynomial(c)


def evaluate(p: Polynomial, x):
    """Horner evaluation; accepts scalars or arrays."""
    return p(x)


def derivative(p: Polynomial, j: int = 1) -> Polynomial:
    if j < 0:
        raise PolynomialError("derivative order must be nonnegative")
    if j == 0:
        return p
    if j > p.degree:
        return Polynomial([0.0])
    c = p.coeffs
    out = []
    for i in range(j, len(c)):
        f = 1.0
        for t in range(i - j + 1, i + 1):
            f *= t
        out.append(c[i] * f)
    return Polynomial(out)


def _polish(p: Polynomial, x: float, iters: int = 8) -> float:
    dp = derivative(p)
    for _ in range(iters):
        d = dp(x)
        if d == 0.0:
            break
        step = p(x) / d
        xn = x - step
        if not math.isfinite(xn) or abs(p(xn)) > abs(p(x)):
            break
        x = xn
        if abs(step) <= 4e-16 * (1.0 + abs(x)):
            break
    return x


def _cluster(z: np.ndarray, tol: float) -> list[list[complex]]:
    # single linkage on the complex plane; eigenvalue sets are tiny
    groups: list[list[complex]] = []
    for v in sorted(z, key=lambda w: (w.real, w.imag)):
        hit = None
        for g in groups:
            if any(abs(v - w) <= tol * (1.0 + abs(w)) for w in g):
                if hit is None:
                    g.append(v)
                    hit = g
                else:
                    hit.extend(g)
                    g.clear()
        groups = [g for g in groups if g]
        if hit is None:
            groups.append([v])
    return groups


def real_roots(p: Polynomial, tol: float = CLUSTER_TOL) -> RootList:
    """All roots of ``p`` with multiplicities.

    Companion-matrix eigenvalues, clustered with relative radius ``tol``;
    real clusters are Newton-polished on ``p^(m-1)``, which has a simple
    root at an ``m``-fold root of ``p``.
    """
    if p.is_zero:
        raise PolynomialError("the zero polynomial has no well-defined roots")
    if p.degree == 0:
        return RootList((), ())
    z = npoly.polyroots(p.array)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    reals: list[tuple[float, int]] = []
    pairs: list[tuple[float, float, int]] = []
    for g in _cluster(z, tol):
        c = complex(np.mean(g))
        m = len(g)
        if abs(c.imag) <= tol * (1.0 + abs(c)):
            x = _polish(derivative(p, m - 1), c.real)
            reals.append((x, m))
        elif c.imag > 0:
            pairs.append((c.real, c.imag, m))
    reals.sort()
    # polishing can pull two clusters together; re-merge
    merged: list[tuple[float, int]] = []
    for x, m in reals:
        if merged and abs(x - merged[-1][0]) <= tol * (1.0 + abs(x)):
            x0, m0 = merged[-1]
            merged[-1] = ((x0 * m0 + x * m) / (m0 + m), m0 + m)
        else:
            merged.append((x, m))
    pairs.sort()
    return RootList(tuple(merged), tuple(pairs))


def convexity_intervals(p: Polynomial) -> list[tuple[float, float]]:
    """Maximal closed intervals on which ``p'' >= 0``."""
    if p.degree < 2:
        raise PolynomialError("convexity analysis needs degree >= 2")
    d2 = derivative(p, 2)
    if d2.degree == 0:
        return [(-math.inf, math.inf)] if d2.coeffs[0] >= 0 else []
    pts = sorted(r for r, _ in real_roots(d2).real_roots)
    edges = [-math.inf, *pts, math.inf]
    out: list[tuple[float, float]] = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isinf(lo) and math.isinf(hi):
            mid = 0.0
        elif math.isinf(lo):
            mid = hi - 1.0 - abs(hi)
        elif math.isinf(hi):
            mid = lo + 1.0 + abs(lo)
        else:
            mid = 0.5 * (lo + hi)
        if d2(mid) >= 0.0:
            if out and out[-1][1] == lo:
                out[-1] = (out[-1][0], hi)
            else:
                out.append((lo, hi))
    return out


def concavity_intervals(p: Polynomial) -> list[tuple[float, float]]:
    """Complement of :func:`convexity_intervals`: open intervals with ``p'' < 0``."""
    conv = convexity_intervals(p)
    edges = [-math.inf]
    for lo, hi in conv:
        edges.extend([lo, hi])
    edges.append(math.inf)
    out = []
    for lo, hi in zip(edges[::2], edges[1::2]):
        if lo < hi:
            out.append((lo, hi))
    return out


def factor_nonneg(p: Polynomial, tol: float = 1e-9) -> QuadraticFactorization:
    """Factor a nonnegative ``p`` with an even-order zero at the origin into
    ``leading * xi**k0 * prod((xi - h)**2 + k**2)``, factors sorted by ``h``.

    Real roots away from the origin appear as ``k = 0`` factors, one per pair
    of multiplicity.
    """
    if p.is_zero:
        raise PolynomialError("cannot factor the zero polynomial")
    scale = p.scale()
    probe = [r for r, _ in real_roots(derivative(p)).real_roots] if p.degree > 1 else []
    probe += list(np.linspace(-10.0, 10.0, 41))
    absp = Polynomial([abs(a) for a in p.coeffs])
    vals = [(p(x) / max(absp(abs(x)), scale), x) for x in probe]
    rel, xmin = min(vals)
    vmin = p(xmin)
    if rel < -tol:
        raise NotNonnegativeError(f"polynomial is negative at x={xmin!r} (value {vmin!r})", xmin, vmin)
    c = list(p.coeffs)
    k0 = 0
    while k0 < len(c) - 1 and abs(c[k0]) <= tol * scale:
        k0 += 1
    if k0 % 2:
        raise PolynomialError(f"vanishing order {k0} at the origin is odd")
    q = Polynomial(c[k0:])
    factors: list[tuple[float, float]] = []
    if q.degree > 0:
        roots = real_roots(q)
        for x, m in roots.real_roots:
            if m % 2:
                raise NotNonnegativeError(f"real root {x!r} has odd multiplicity {m}", x, 0.0)
            factors.extend([(x, 0.0)] * (m // 2))
        for h, k, m in roots.complex_pairs:
            factors.extend([(h, k)] * m)
    factors.sort()
    return QuadraticFactorization(p.leading, k0, tuple(factors))


def parse_polynomial(text: str) -> Polynomial:
    """Parse ``"c0,c1,...,cd"`` (ascending coefficients)."""
    parts = [s.strip() for s in text.strip().split(",")]
    if not parts or any(s == "" for s in parts):
        raise PolynomialError(f"malformed polynomial text: {text!r}")
    try:
        vals = [float(s) for s in parts]
    except ValueError as exc:
        raise PolynomialError(f"malformed polynomial text: {text!r}") from exc
    p = Polynomial(vals)
    if p.is_zero:
        raise PolynomialError("zero polynomial")
    return p


def format_polynomial(p: Polynomial) -> str:
    # repr gives the shortest string that round-trips exactly
    return ",".join(repr(float(a)) for a in p.coeffs)


def validate_domain(b: Polynomial) -> Polynomial:
    """Check ``b`` has even degree ``2n >= 4`` and a positive leading coefficient."""
    if b.degree < 4 or b.degree % 2:
        raise DomainError(f"b must have even degree >= 4, got degree {b.degree}")
    if b.leading <= 0:
        raise DomainError("b must have a positive leading coefficient")
    return b


def as_polynomial(p: Polynomial | Sequence[float] | str) -> Polynomial:
    if isinstance(p, Polynomial):
        return p
    if isinstance(p, str):
        return parse_polynomial(p)
    return Polynomial(p)
