"""Explicit Sobolev embedding / interpolation constants on (0, L).

The constants ``E^n_m`` bound intermediate derivatives,

    ||f||_{H^n}^2 <= (2 E^n_m + 1) ||f||_{L^2}^{2(m-n)/m} ||f||_{H^m}^{2n/m},

and are produced by two integer recursions starting from ``E^1_2 = 42``:

    E^m_{m+1}  = 2^m 42^m (E^{m-1}_m)^m            (diagonal)
    E^{k-1}_m  = E^{k-1}_k (E^k_m + 1)             (sub-diagonals)

All ``E`` values are integers, so the table is built exactly with Python
integers and exposed as :class:`~obscost.xreal.XReal` for downstream use.

The extension-operator norms ``lambda_m`` have no explicit value in the
literature this package follows (only existence is known), so they are a
configuration input selected by a named *profile*.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

from .xreal import XReal, xr

MAX_ORDER = 7
BASE_E12 = 42
LAMBDA_ENV = "OBSCOST_LAMBDA_PROFILE"

# Standing assumption inherited by every constant in the chain.
ASSUMPTIONS = (
    "The base constant E^1_2 = 42 is derived for interval lengths L >= 4; "
    "all constants are therefore only produced for L >= 4.",
)

# Named lambda_m tables (m = 0..7).  None of them is taken from the
# literature; each entry documents how it was chosen.
LAMBDA_PROFILES: Dict[str, dict] = {
    "default": {
        "values": [float((m + 1) * 2**m) for m in range(MAX_ORDER + 1)],
        "provenance": (
            "conservative placeholder lambda_m = (m+1) 2^m; "
            "extension-operator norms are only known to exist"
        ),
    },
    "unit": {
        "values": [1.0] * (MAX_ORDER + 1),
        "provenance": (
            "idealized lower limit lambda_m = 1 "
            "(every extension operator has norm >= 1)"
        ),
    },
}


class SobolevDomainError(ValueError):
    """Index or parameter outside the supported range."""


def _check_pair(n: int, m: int) -> None:
    if not (isinstance(n, int) and isinstance(m, int)):
        raise SobolevDomainError(f"orders must be integers, got ({n!r}, {m!r})")
    if not (0 < n < m <= MAX_ORDER):
        raise SobolevDomainError(f"need 0 < n < m <= {MAX_ORDER}, got n={n}, m={m}")


def e_exact(n: int, m: int) -> int:
    """Exact integer value of ``E^n_m``."""
    _check_pair(n, m)
    return _e_cached(n, m)


@lru_cache(maxsize=None)
def _e_cached(n: int, m: int) -> int:
    if m == n + 1:
        if n == 1:
            return BASE_E12
        return 2**n * 42**n * _e_cached(n - 1, n) ** n
    # E^{k-1}_m = E^{k-1}_k (E^k_m + 1) with k - 1 = n
    return _e_cached(n, n + 1) * (_e_cached(n + 1, m) + 1)


def e_table_iterative(max_order: int = MAX_ORDER) -> Dict[Tuple[int, int], int]:
    """The whole E table built bottom-up without recursion or caching (cross-check)."""
    table: Dict[Tuple[int, int], int] = {(1, 2): BASE_E12}
    for k in range(2, max_order):
        table[(k, k + 1)] = 2**k * 42**k * table[(k - 1, k)] ** k
    for m in range(3, max_order + 1):
        for n in range(m - 2, 0, -1):
            table[(n, m)] = table[(n, n + 1)] * (table[(n + 1, m)] + 1)
    return table


def e_constant(n: int, m: int) -> XReal:
    """``E^n_m`` as an extended-range value (exact integer underneath)."""
    return xr(e_exact(n, m))


def interpolation_bound(n: int, m: int, l2_norm, hm_norm) -> XReal:
    """Upper bound ``(2E^n_m+1) l2^{2(m-n)/m} hm^{2n/m}`` for ``||f||_{H^n}^2``."""
    _check_pair(n, m)
    l2, hm = xr(l2_norm), xr(hm_norm)
    if l2 < 0 or hm < 0:
        raise SobolevDomainError("norms must be non-negative")
    if l2.is_zero() or hm.is_zero():
        return xr(0)
    coef = xr(2 * e_exact(n, m) + 1)
    return coef * l2 ** (2.0 * (m - n) / m) * hm ** (2.0 * n / m)


@lru_cache(maxsize=None)
def g_exact(m: int) -> int:
    """Exact integer ``G^m = 1 + sum_{0<a<m} C(m, a) E^a_m``."""
    if not isinstance(m, int) or not 0 <= m <= MAX_ORDER:
        raise SobolevDomainError(f"need 0 <= m <= {MAX_ORDER}, got {m!r}")
    return 1 + sum(math.comb(m, a) * e_exact(a, m) for a in range(1, m))


def g_constant(m: int) -> XReal:
    return xr(g_exact(m))


def parse_lambda_profile(spec: str) -> Tuple[str, Tuple[float, ...], str]:
    """Resolve a profile name or an inline ``custom:v0,...,v7`` table."""
    spec = spec.strip()
    if spec in LAMBDA_PROFILES:
        entry = LAMBDA_PROFILES[spec]
        return spec, tuple(entry["values"]), entry["provenance"]
    if spec.startswith("custom:"):
        try:
            vals = tuple(float(v) for v in spec[len("custom:"):].split(","))
        except ValueError as exc:
            raise SobolevDomainError(f"bad custom lambda table {spec!r}") from exc
        if len(vals) != MAX_ORDER + 1:
            raise SobolevDomainError(f"custom lambda table needs {MAX_ORDER + 1} values")
        if any(not math.isfinite(v) or v < 1.0 for v in vals):
            raise SobolevDomainError("extension norms must be finite and >= 1")
        return spec, vals, "user-supplied custom table"
    raise SobolevDomainError(
        f"unknown lambda profile {spec!r}; known: {sorted(LAMBDA_PROFILES)} or custom:v0,...,v7"
    )


def resolve_profile(profile: Optional[str] = None) -> str:
    """Profile name to use: explicit argument, then the environment, then default."""
    if profile:
        return profile
    return os.environ.get(LAMBDA_ENV, "").strip() or "default"


def stein_lambda(m: int, profile: Optional[str] = None) -> XReal:
    if not isinstance(m, int) or not 0 <= m <= MAX_ORDER:
        raise SobolevDomainError(f"need 0 <= m <= {MAX_ORDER}, got {m!r}")
    _, vals, _ = parse_lambda_profile(resolve_profile(profile))
    return xr(vals[m])


@dataclass(frozen=True)
class SobolevTable:
    e: Dict[Tuple[int, int], XReal]
    e_int: Dict[Tuple[int, int], int]
    g: Tuple[XReal, ...]
    lam: Tuple[XReal, ...]
    profile: str
    provenance: str
    assumptions: Tuple[str, ...] = field(default=ASSUMPTIONS)

    def E(self, n: int, m: int) -> XReal:
        _check_pair(n, m)
        return self.e[(n, m)]

    def G(self, m: int) -> XReal:
        return self.g[m]

    def lam_(self, m: int) -> XReal:
        return self.lam[m]

    def to_json(self) -> dict:
        out: dict = {"profile": self.profile, "provenance": self.provenance,
                     "assumptions": list(self.assumptions)}
        for (n, m), v in sorted(self.e.items()):
            out[f"E[{n}][{m}]"] = v.to_json()
        for m, v in enumerate(self.g):
            out[f"G[{m}]"] = v.to_json()
        for m, v in enumerate(self.lam):
            out[f"lambda[{m}]"] = v.to_json()
        return out


def build_table(profile: Optional[str] = None) -> SobolevTable:
    name, vals, prov = parse_lambda_profile(resolve_profile(profile))
    pairs = [(n, m) for m in range(2, MAX_ORDER + 1) for n in range(1, m)]
    e_int = {p: e_exact(*p) for p in pairs}
    return SobolevTable(
        e={p: xr(v) for p, v in e_int.items()},
        e_int=e_int,
        g=tuple(g_constant(m) for m in range(MAX_ORDER + 1)),
        lam=tuple(xr(v) for v in vals),
        profile=name,
        provenance=prov,
    )


def lambda_profile_names() -> Sequence[str]:
    return sorted(LAMBDA_PROFILES)
