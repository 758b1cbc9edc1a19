"""Scalar special functions: Lambert W, Weierstrass p, cubic roots and period lattices.

Everything here is a pure function of its arguments.  The Weierstrass
function is evaluated by lattice reduction, a truncated Laurent series near
the origin and repeated duplication; half-periods come from Carlson's
symmetric elliptic integral R_F.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import elliprf

__all__ = [
    "DomainError",
    "PoleError",
    "DegenerateError",
    "WeierstrassInvariants",
    "PeriodLattice",
    "CubicRootSet",
    "lambert_w",
    "weierstrass_p",
    "cubic_roots",
    "half_periods",
    "laurent_coefficients",
]

INV_E = math.exp(-1.0)

# Laurent truncation and the radius (as a fraction of the shortest lattice
# vector) inside which the series is summed directly.
LAURENT_TERMS = 40
SERIES_RADIUS_FRACTION = 0.3
DEFAULT_POLE_RADIUS = 1e-10
DEGENERATE_RTOL = 1e-13


class DomainError(ValueError):
    pass


class PoleError(ArithmeticError):
    pass


class DegenerateError(ValueError):
    pass


@dataclass(frozen=True)
class WeierstrassInvariants:
    g2: float
    g3: float

    @property
    def discriminant(self) -> float:
        """g2**3 - 27 g3**2 (the modular discriminant without the factor 16)."""
        return self.g2**3 - 27.0 * self.g3**2

    def is_degenerate(self, rtol: float = DEGENERATE_RTOL) -> bool:
        scale = max(abs(self.g2) ** 3, 27.0 * self.g3**2, 1e-300)
        return abs(self.discriminant) <= rtol * scale

    def q(self, w):
        return 4.0 * w**3 - self.g2 * w - self.g3

    def dq(self, w):
        return 12.0 * w**2 - self.g2


@dataclass(frozen=True)
class PeriodLattice:
    """Half-periods of the lattice 2*omega1*Z + 2*omega3*Z, with Im(omega3/omega1) > 0."""

    omega1: complex
    omega3: complex

    @property
    def generators(self) -> tuple[complex, complex]:
        return 2 * self.omega1, 2 * self.omega3

    @property
    def shortest(self) -> float:
        a, b = self.generators
        return min(abs(a), abs(b), abs(a + b), abs(a - b))

    def reduce(self, z: complex) -> complex:
        """Representative of z modulo the lattice with smallest modulus."""
        a, b = self.generators
        m = np.array([[a.real, b.real], [a.imag, b.imag]])
        coef = np.linalg.solve(m, [z.real, z.imag])
        z0 = z - round(coef[0]) * a - round(coef[1]) * b
        best = z0
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                cand = z0 - i * a - j * b
                if abs(cand) < abs(best):
                    best = cand
        return best


@dataclass(frozen=True)
class CubicRootSet:
    """Roots of 4w^3 - g2 w - g3: real roots first (ascending), then complex (Im > 0 first)."""

    e1: complex
    e2: complex
    e3: complex
    discriminant: float
    multiplicities: tuple[int, int, int] = (1, 1, 1)

    @property
    def roots(self) -> tuple[complex, complex, complex]:
        return self.e1, self.e2, self.e3

    @property
    def n_real(self) -> int:
        return sum(1 for e in self.roots if e.imag == 0.0)

    @property
    def degenerate(self) -> bool:
        return max(self.multiplicities) > 1


# ---------------------------------------------------------------------------
# Lambert W


def _halley(w: float, z: float) -> float:
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - z
        if f == 0.0 or w == -1.0:
            break
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 4e-16 * (1.0 + abs(w)):
            break
    return w


def lambert_w(z: float, branch: str = "principal") -> float:
    """Real Lambert W: the w with w*exp(w) = z.

    branch="principal" returns w >= -1 for z >= -1/e; branch="lower" returns
    w <= -1 for -1/e <= z < 0.
    """
    z = float(z)
    if branch not in ("principal", "lower"):
        raise ValueError(f"unknown branch {branch!r}")
    if not z >= -INV_E - 1e-17:
        raise DomainError(f"lambert_w undefined for z={z!r} < -1/e")
    if branch == "lower" and z >= 0.0:
        raise DomainError(f"lower branch requires z < 0, got {z!r}")
    if z == 0.0:
        return 0.0
    p = math.sqrt(max(0.0, 2.0 * (math.e * z + 1.0)))
    if branch == "principal":
        if z < -0.25:
            w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
        elif z < 3.0:
            w = math.log1p(z)
        else:
            l1 = math.log(z)
            l2 = math.log(l1)
            w = l1 - l2 + l2 / l1
        if p == 0.0:
            return -1.0
        w = max(w, -1.0 + 1e-300)
    else:
        if z < -0.25:
            w = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p**3
        else:
            l1 = math.log(-z)
            l2 = math.log(-l1)
            w = l1 - l2 + l2 / l1
        if p == 0.0:
            return -1.0
    return _halley(w, z)


# ---------------------------------------------------------------------------
# Cubic roots


def _newton_polish(inv: WeierstrassInvariants, e: complex, steps: int = 3) -> complex:
    for _ in range(steps):
        d = inv.dq(e)
        if d == 0:
            break
        e = e - inv.q(e) / d
    return e


def cubic_roots(inv: WeierstrassInvariants) -> CubicRootSet:
    """Roots of q(w) = 4w^3 - g2 w - g3 by closed form plus Newton polishing."""
    g2, g3 = float(inv.g2), float(inv.g3)
    disc16 = 16.0 * inv.discriminant
    if inv.is_degenerate():
        if g2 == 0.0:
            return CubicRootSet(0j, 0j, 0j, disc16, (3, 3, 3))
        # a double root e forces g3 = -8 e^3; the cube root is well conditioned
        e = -float(np.cbrt(g3 / 8.0))
        single = -2.0 * e
        if e < single:
            return CubicRootSet(complex(e), complex(e), complex(single), disc16, (2, 2, 1))
        return CubicRootSet(complex(single), complex(e), complex(e), disc16, (1, 2, 2))

    # depressed form w^3 + a w + b = 0
    a, b = -g2 / 4.0, -g3 / 4.0
    if disc16 > 0:
        m = 2.0 * math.sqrt(-a / 3.0)
        c = (3.0 * b / (2.0 * a)) * math.sqrt(-3.0 / a)
        phi = math.acos(max(-1.0, min(1.0, c)))
        roots = [m * math.cos(phi / 3.0 - 2.0 * math.pi * k / 3.0) for k in range(3)]
        roots = sorted(_newton_polish(inv, r) for r in roots)
        return CubicRootSet(complex(roots[0]), complex(roots[1]), complex(roots[2]), disc16)

    s = math.sqrt(b * b / 4.0 + a**3 / 27.0)
    A = float(np.cbrt(-b / 2.0 + s))
    B = float(np.cbrt(-b / 2.0 - s))
    real = _newton_polish(inv, A + B)
    cplx = complex(-(A + B) / 2.0, math.sqrt(3.0) * abs(A - B) / 2.0)
    cplx = _newton_polish(inv, cplx)
    cplx = complex(cplx.real, abs(cplx.imag))
    return CubicRootSet(complex(real), cplx, cplx.conjugate(), disc16)


# ---------------------------------------------------------------------------
# Period lattice


def _real_half_period(g2: float, g3: float) -> float:
    roots = cubic_roots(WeierstrassInvariants(g2, g3))
    if roots.n_real == 3:
        top, others = roots.e3.real, (roots.e1, roots.e2)
    else:
        top, others = roots.e1.real, (roots.e2, roots.e3)
    val = elliprf(0.0, top - others[0], top - others[1])
    return float(np.real(val))


@lru_cache(maxsize=256)
def _half_periods_cached(g2: float, g3: float) -> PeriodLattice:
    inv = WeierstrassInvariants(g2, g3)
    if inv.is_degenerate():
        raise DegenerateError(f"period lattice degenerates for g2={g2!r}, g3={g3!r}")
    real_half = _real_half_period(g2, g3)
    # the imaginary axis of lattice(g2, g3) is the real axis of lattice(g2, -g3)
    imag_half = _real_half_period(g2, -g3)
    if inv.discriminant > 0:
        return PeriodLattice(complex(real_half), complex(0.0, imag_half))
    # rhombic lattice: the real and imaginary periods span an index-2 sublattice
    return PeriodLattice(
        complex(real_half, -imag_half) / 2.0, complex(real_half, imag_half) / 2.0
    )


def half_periods(inv: WeierstrassInvariants) -> PeriodLattice:
    """Half-periods omega1, omega3 of the lattice with invariants (g2, g3).

    For a positive discriminant omega1 is real and omega3 purely imaginary.
    Raises DegenerateError when the discriminant vanishes.
    """
    return _half_periods_cached(float(inv.g2), float(inv.g3))


# ---------------------------------------------------------------------------
# Weierstrass p


@lru_cache(maxsize=256)
def laurent_coefficients(g2: float, g3: float, n: int = LAURENT_TERMS) -> tuple[float, ...]:
    """c_k (k = 2..n+1) in p(z) = z^-2 + sum_k c_k z^(2k-2)."""
    c = {2: g2 / 20.0, 3: g3 / 28.0}
    for k in range(4, n + 2):
        acc = sum(c[m] * c[k - m] for m in range(2, k - 1))
        c[k] = 3.0 * acc / ((2 * k + 1) * (k - 3))
    return tuple(c[k] for k in range(2, n + 2))


def _series(z: complex, coeffs: tuple[float, ...]) -> tuple[complex, complex]:
    z2 = z * z
    p = 0j
    dp = 0j
    # Horner in z^2, highest order first
    for k in range(len(coeffs) + 1, 1, -1):
        c = coeffs[k - 2]
        p = p * z2 + c
        dp = dp * z2 + (2 * k - 2) * c
    # p currently holds sum c_k z^(2k-4); dp holds sum (2k-2)c_k z^(2k-4)
    return 1.0 / z2 + p * z2, -2.0 / (z2 * z) + dp * z


def _p_small(z: complex, g2: float, g3: float, radius: float) -> tuple[complex, complex]:
    """Laurent series at z / 2^n followed by n duplications."""
    coeffs = laurent_coefficients(g2, g3)
    n = 0
    while abs(z) / 2**n > radius:
        n += 1
    p, dp = _series(z / 2**n, coeffs)
    for _ in range(n):
        pp = 6.0 * p * p - 0.5 * g2
        p, dp = pp * pp / (4.0 * dp * dp) - 2.0 * p, 3.0 * p * pp / dp - pp**3 / (4.0 * dp**3) - dp
    return p, dp


@lru_cache(maxsize=256)
def _half_period_values(g2: float, g3: float, lattice: PeriodLattice):
    """(h, e, (e - e')(e - e'')) for the three half-period classes."""
    roots = cubic_roots(WeierstrassInvariants(g2, g3)).roots
    radius = SERIES_RADIUS_FRACTION * lattice.shortest
    out = []
    for h in (lattice.omega1, lattice.omega3, lattice.omega1 + lattice.omega3):
        approx = _p_small(lattice.reduce(h), g2, g3, radius)[0]
        i = int(np.argmin([abs(approx - e) for e in roots]))
        e = roots[i]
        others = [roots[j] for j in range(3) if j != i]
        out.append((complex(h), complex(e), complex((e - others[0]) * (e - others[1]))))
    return tuple(out)


def weierstrass_p(
    z: complex,
    inv: WeierstrassInvariants,
    pole_radius: float = DEFAULT_POLE_RADIUS,
    lattice: PeriodLattice | None = None,
) -> tuple[complex, complex]:
    """(p(z), p'(z)) for invariants (g2, g3).

    Raises PoleError if z lies within pole_radius of a lattice point.
    """
    z = complex(z)
    g2, g3 = float(inv.g2), float(inv.g3)
    if lattice is None and not inv.is_degenerate():
        lattice = half_periods(inv)
    if lattice is None:
        if abs(z) <= pole_radius:
            raise PoleError(f"z within {pole_radius:g} of a lattice point")
        return _p_small(z, g2, g3, 0.3)
    z = lattice.reduce(z)
    if abs(z) <= pole_radius:
        raise PoleError(f"z within {pole_radius:g} of a lattice point")
    radius = SERIES_RADIUS_FRACTION * lattice.shortest
    # shift by the nearest half-period so the series sees a small argument:
    # p(h + t) = e + K / (p(t) - e), K = (e - e')(e - e'')
    best = None
    for h, e, k in _half_period_values(g2, g3, lattice):
        for sign in (1, -1):
            t = lattice.reduce(z - sign * h)
            if best is None or abs(t) < abs(best[0]):
                best = (t, e, k)
    t, e, k = best
    if abs(t) >= abs(z) or t == 0:
        if t == 0:
            return e, 0j
        return _p_small(z, g2, g3, radius)
    p, dp = _p_small(t, g2, g3, radius)
    d = p - e
    return e + k / d, -k * dp / (d * d)


def weierstrass_p_inverse(w: complex, inv: WeierstrassInvariants) -> complex:
    """Some z with p(z) = w (the branch given by R_F), Newton-polished."""
    roots = cubic_roots(inv)
    w = complex(w)
    args = [w - roots.e1, w - roots.e2, w - roots.e3]
    z = complex(elliprf(*args))
    if not np.isfinite(z):
        # R_F rejects arguments lying exactly on its cut; nudge off it and polish
        z = complex(elliprf(*(a + 1e-30j for a in args)))
    lattice = half_periods(inv)
    for _ in range(8):
        p, dp = weierstrass_p(z, inv, lattice=lattice)
        if dp == 0:
            break
        step = (p - w) / dp
        z -= step
        if abs(step) < 1e-15 * (1 + abs(z)):
            break
    return z

