"""Numeric checks behind the error-rate asymptotics.

Two small facts carry the false-alarm analysis:

1. a binomial remainder estimate,  |(1+x)^n - 1 - nx| <= n(n-1)/2 * x^2 * (1+|x|)^(n-2),
   which controls the second-order term when expanding (1 - z)^(N^2);
2. the resulting leading-order size of the union event,
   1 - (1 - N^(-2*c*lam))^(N^2) = N^(2(1-c*lam)) + O(N^(4(1-c*lam)))
   valid when c*lam > 1.

Both are evaluated here with cancellation-safe formulations (log1p/expm1);
naive powering of (1 - z) with z ~ 1e-8 and exponents ~ 1e8 would lose the
entire effect to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class AsymptoticInputs:
    """Validated parameter bundle for the two estimates."""

    x: float
    n: int
    side: int = 2
    c: float = 1.0
    lam: float = 2.0

    def __post_init__(self) -> None:
        if abs(self.x) >= 1.0:
            raise ValueError("|x| must be < 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.side < 2:
            raise ValueError("side must be >= 2")
        if self.c <= 0 or self.lam <= 0:
            raise ValueError("c and lam must be > 0")


def binomial_remainder_bound(x: float, n: int) -> tuple[float, float]:
    """(lhs, rhs) of |(1+x)^n - 1 - n*x| <= n(n-1)/2 * x^2 * (1+|x|)^(n-2).

    The left side is the error of the first-order binomial expansion; the
    right side bounds the tail of the series term by term.  Guaranteed
    lhs <= rhs on the whole domain |x| < 1, n >= 1.
    """
    if abs(x) >= 1.0:
        raise ValueError("|x| must be < 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1 or x == 0.0:
        return (0.0, 0.0)  # the expansion is exact
    lhs = abs(math.expm1(n * math.log1p(x)) - n * x)
    rhs = 0.5 * n * (n - 1) * x * x * (1.0 + abs(x)) ** (n - 2)
    return (lhs, rhs)


def false_alarm_exact_vs_leading(n: int, c: float, lam: float) -> tuple[float, float, float]:
    """Union-event size over N^2 sites versus its leading-order term.

    exact   = 1 - (1 - z)^(N^2)  with  z = N^(-2*c*lam)
    leading = N^(2*(1 - c*lam))  (= N^2 * z)
    ratio   = exact / leading  (tends to 1 from below as N grows)

    Requires c*lam > 1 — otherwise the event saturates instead of vanishing
    and the expansion is meaningless.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if c <= 0 or lam <= 0:
        raise ValueError("c and lam must be > 0")
    if c * lam <= 1.0:
        raise ValueError("c * lam must exceed 1")
    log_n = math.log(n)
    z = math.exp(-2.0 * c * lam * log_n)
    exact = -math.expm1(float(n) * float(n) * math.log1p(-z))
    leading = n ** (2.0 * (1.0 - c * lam))
    return (exact, leading, exact / leading)
