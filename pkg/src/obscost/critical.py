"""Critical lengths ``L = 2 pi sqrt((k^2 + k l + l^2) / 3)`` and the spectral gap d(L)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

from .xreal import XReal, xr

FOUR_PI2_OVER_3 = (2.0 * math.pi) ** 2 / 3.0


class CriticalLengthError(ValueError):
    """Raised where a non-critical length is required."""


@dataclass(frozen=True)
class CriticalReport:
    L: float
    is_critical: bool
    witness: Optional[Tuple[int, int]]
    d: XReal
    tolerance: float

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "is_critical": self.is_critical,
            "witness": list(self.witness) if self.witness else None,
            "d": self.d.to_json(),
            "d_float": float(self.d),
            "tolerance": self.tolerance,
        }


def form(k: int, l: int) -> int:
    return k * k + k * l + l * l


def critical_length(k: int, l: int) -> float:
    if k < 1 or l < 1:
        raise ValueError("k and l must be positive integers")
    return 2.0 * math.pi * math.sqrt(form(k, l) / 3.0)


def _pairs_up_to(qmax: float) -> Iterator[Tuple[int, int]]:
    """All (k, l), 1 <= k <= l, with k^2 + kl + l^2 <= qmax, in lexicographic order."""
    k = 1
    while 3 * k * k <= qmax:
        l = k
        while form(k, l) <= qmax:
            yield k, l
            l += 1
        k += 1


def default_tolerance(L: float) -> float:
    """Lengths typed with ~7 significant digits still register as critical."""
    return 1e-6 * L * L


def classify(L: float, tolerance: Optional[float] = None) -> CriticalReport:
    """Nearest critical value of ``L^2`` over k, l >= 1 and the gap ``d(L)``.

    ``tolerance`` applies to ``d`` (units of length squared); by default it is
    ``1e-6 L^2``.
    """
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"length must be positive, got {L!r}")
    if tolerance is None:
        tolerance = default_tolerance(L)
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    L2 = L * L
    best_d = abs(L2 - FOUR_PI2_OVER_3 * 3)  # (1, 1)
    best = (1, 1)
    # progressive pruning: forms above L^2 + best_d can no longer improve
    limit = (L2 + best_d) / FOUR_PI2_OVER_3
    for k, l in _pairs_up_to(limit):
        d = abs(L2 - FOUR_PI2_OVER_3 * form(k, l))
        if d < best_d:
            best_d, best = d, (k, l)
    is_crit = best_d <= tolerance
    return CriticalReport(L=float(L), is_critical=is_crit, witness=best,
                          d=xr(best_d), tolerance=float(tolerance))


def spectral_gap(L: float) -> XReal:
    """``d(L) = min_{k,l>=1} |L^2 - (2 pi)^2 (k^2+kl+l^2)/3|``."""
    return classify(L, 0.0).d
