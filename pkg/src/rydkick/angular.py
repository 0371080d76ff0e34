"""Wigner 3j symbols and Legendre multipole couplings between |l m> states."""

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

from .errors import DomainError


@lru_cache(maxsize=None)
def wigner_3j(j1, j2, j3, m1, m2, m3):
    """Wigner 3j symbol for integer arguments via the Racah formula.

    The square-root prefactor is accumulated as an exact rational so the
    result is correct to double precision for the angular momenta used
    here (a few tens at most).
    """
    args = (j1, j2, j3, m1, m2, m3)
    if any(int(a) != a for a in args):
        raise DomainError("wigner_3j supports integer arguments only")
    j1, j2, j3, m1, m2, m3 = (int(a) for a in args)
    if min(j1, j2, j3) < 0:
        raise DomainError("angular momenta must be non-negative")
    if m1 + m2 + m3 != 0:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return 0.0
    if j3 > j1 + j2 or j3 < abs(j1 - j2):
        return 0.0

    triangle = Fraction(
        factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3),
        factorial(j1 + j2 + j3 + 1),
    )
    prefactor = triangle * (
        factorial(j1 + m1) * factorial(j1 - m1)
        * factorial(j2 + m2) * factorial(j2 - m2)
        * factorial(j3 + m3) * factorial(j3 - m3)
    )
    t_min = max(0, j2 - j3 - m1, j1 - j3 + m2)
    t_max = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    total = Fraction(0)
    for t in range(t_min, t_max + 1):
        denom = (
            factorial(t)
            * factorial(j3 - j2 + t + m1)
            * factorial(j3 - j1 + t - m2)
            * factorial(j1 + j2 - j3 - t)
            * factorial(j1 - t - m1)
            * factorial(j2 - t + m2)
        )
        total += Fraction((-1) ** t, denom)
    if total == 0:
        return 0.0
    sign = (-1) ** (j1 - j2 - m3)
    # sqrt(prefactor) * total, keeping the sign of total outside the root
    magnitude = sqrt(float(prefactor * total * total))
    return float(sign * magnitude * (1 if total > 0 else -1))


@lru_cache(maxsize=None)
def angular_coupling(la, lb, L, m):
    """<la m| P_L(cos theta) |lb m> for spherical harmonics.

    Zero unless (la, L, lb) satisfy the triangle rule and la + lb + L is even.
    """
    if min(la, lb, L) < 0:
        raise DomainError(f"negative angular momentum in ({la}, {lb}, {L})")
    if abs(m) > min(la, lb):
        raise DomainError(f"|m|={abs(m)} exceeds min(la, lb)={min(la, lb)}")
    if (la + lb + L) % 2 or L > la + lb or L < abs(la - lb):
        return 0.0
    return (
        (-1) ** m
        * sqrt((2 * la + 1) * (2 * lb + 1))
        * wigner_3j(la, L, lb, 0, 0, 0)
        * wigner_3j(la, L, lb, -m, 0, m)
    )
