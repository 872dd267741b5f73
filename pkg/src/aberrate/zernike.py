"""Zernike polynomials on the unit disk under Fringe indexing.

The polynomials are the unnormalized Born & Wolf set: a radial factor

    R_n^m(rho) = sum_s (-1)^s (n-s)! / (s! ((n+m)/2-s)! ((n-m)/2-s)!) rho^(n-2s)

multiplied by cos(m*phi), sin(m*phi) or 1.  The single Fringe index orders
terms by increasing (n + m), then increasing n, with the cosine member of
each (n, m>0) pair first; index 37 is the conventional trailing (12, 0)
spherical term.

Orientation convention: the cosine member of a pair carries the
"straight"/"horizontal" aberration name (e.g. Fringe 5, straight
astigmatism), the sine member the "oblique"/"vertical" one.  This is the
single place where the angular sign bookkeeping is fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_FRINGE = 1
MAX_FRINGE = 37

ANGULAR_CONSTANT = "constant"
ANGULAR_COSINE = "cosine"
ANGULAR_SINE = "sine"

_LABELS = {
    1: "Piston",
    2: "Tilt X",
    3: "Tilt Y",
    4: "Defocus",
    5: "Astigmatism (straight)",
    6: "Astigmatism (oblique)",
    7: "Coma (horizontal)",
    8: "Coma (vertical)",
    9: "Primary spherical",
    10: "Trefoil (horizontal)",
    11: "Trefoil (vertical)",
    12: "Secondary astigmatism (straight)",
    13: "Secondary astigmatism (oblique)",
    14: "Secondary coma (horizontal)",
    15: "Secondary coma (vertical)",
    16: "Secondary spherical",
    17: "Tetrafoil (straight)",
    18: "Tetrafoil (oblique)",
    19: "Secondary trefoil (horizontal)",
    20: "Secondary trefoil (vertical)",
    21: "Tertiary astigmatism (straight)",
    22: "Tertiary astigmatism (oblique)",
    23: "Tertiary coma (horizontal)",
    24: "Tertiary coma (vertical)",
    25: "Tertiary spherical",
    26: "Pentafoil (horizontal)",
    27: "Pentafoil (vertical)",
    28: "Secondary tetrafoil (straight)",
    29: "Secondary tetrafoil (oblique)",
    30: "Tertiary trefoil (horizontal)",
    31: "Tertiary trefoil (vertical)",
    32: "Quaternary astigmatism (straight)",
    33: "Quaternary astigmatism (oblique)",
    34: "Quaternary coma (horizontal)",
    35: "Quaternary coma (vertical)",
    36: "Quaternary spherical",
    37: "Quinary spherical",
}


@dataclass(frozen=True)
class ZernikeIndex:
    """One Fringe term: single index, radial/azimuthal orders, angular kind."""

    fringe: int
    n: int
    m_abs: int
    angular_kind: str

    @property
    def label(self) -> str:
        return _LABELS[self.fringe]


@dataclass(frozen=True)
class UnitDiskPoint:
    """Polar point on the unit disk; phi wraps modulo 2*pi."""

    rho: float
    phi: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))


def _build_fringe_table() -> tuple[ZernikeIndex, ...]:
    entries: list[ZernikeIndex] = []
    total = 0
    while len(entries) < 36:
        # All (n, m) with n + m == total, m = total - n >= 0 and m <= n.
        for n in range((total + 1) // 2, total + 1):
            m = total - n
            if m == 0:
                entries.append(ZernikeIndex(len(entries) + 1, n, 0, ANGULAR_CONSTANT))
            else:
                entries.append(ZernikeIndex(len(entries) + 1, n, m, ANGULAR_COSINE))
                entries.append(ZernikeIndex(len(entries) + 1, n, m, ANGULAR_SINE))
        total += 2
    entries = entries[:36]
    entries.append(ZernikeIndex(37, 12, 0, ANGULAR_CONSTANT))
    return tuple(entries)


_FRINGE_TABLE = _build_fringe_table()


def fringe_index(fringe: int) -> ZernikeIndex:
    """Return the ZernikeIndex for a Fringe single index in [1, 37]."""
    if not isinstance(fringe, (int, np.integer)):
        raise ValueError(f"Fringe index must be an integer, got {fringe!r}")
    if not MIN_FRINGE <= fringe <= MAX_FRINGE:
        raise ValueError(
            f"Fringe index {fringe} outside supported range "
            f"[{MIN_FRINGE}, {MAX_FRINGE}]"
        )
    return _FRINGE_TABLE[int(fringe) - 1]


def fringe_to_nm(fringe: int) -> tuple[int, int, str]:
    """Map a Fringe index to (n, m_abs, angular_kind)."""
    idx = fringe_index(fringe)
    return idx.n, idx.m_abs, idx.angular_kind


def _validate_nm(n: int, m_abs: int) -> None:
    if n < 0 or m_abs < 0:
        raise ValueError(f"orders must be non-negative, got n={n}, m={m_abs}")
    if m_abs > n:
        raise ValueError(f"m_abs={m_abs} exceeds n={n}")
    if (n - m_abs) % 2 != 0:
        raise ValueError(f"(n - m_abs) must be even, got n={n}, m={m_abs}")


def _radial_coefficients(n: int, m_abs: int) -> list[int]:
    # Integer coefficients of R_n^m as a polynomial in rho^2, highest power
    # first: R = rho^m * sum_s c_s (rho^2)^((n-m)/2 - s).
    half = (n - m_abs) // 2
    coeffs = []
    for s in range(half + 1):
        c = (
            (-1) ** s
            * math.factorial(n - s)
            // (
                math.factorial(s)
                * math.factorial((n + m_abs) // 2 - s)
                * math.factorial((n - m_abs) // 2 - s)
            )
        )
        coeffs.append(c)
    return coeffs


def radial(n: int, m_abs: int, rho):
    """Evaluate the radial polynomial R_n^m at rho (scalar or array).

    The alternating factorial sum is evaluated exactly (integer
    coefficients, Horner in rho^2), so R_n^m(1) == 1 holds bit-exactly.
    """
    _validate_nm(n, m_abs)
    rho = np.asarray(rho, dtype=float)
    if rho.size and (rho.min() < 0.0 or rho.max() > 1.0):
        raise ValueError("rho samples must lie in [0, 1]")
    rho2 = rho * rho
    acc = np.zeros_like(rho)
    for c in _radial_coefficients(n, m_abs):
        acc = acc * rho2 + c
    out = acc * rho**m_abs if m_abs else acc
    return float(out) if out.ndim == 0 else out


def zernike_field(index: ZernikeIndex | int, rho, phi):
    """Evaluate one Fringe term on arrays of polar coordinates."""
    if not isinstance(index, ZernikeIndex):
        index = fringe_index(index)
    r = radial(index.n, index.m_abs, rho)
    if index.angular_kind == ANGULAR_CONSTANT:
        return r
    phi = np.asarray(phi, dtype=float)
    if index.angular_kind == ANGULAR_COSINE:
        return r * np.cos(index.m_abs * phi)
    return r * np.sin(index.m_abs * phi)


def zernike_eval(index: ZernikeIndex | int, point: UnitDiskPoint) -> float:
    """Evaluate one Fringe term at a single unit-disk point."""
    return float(zernike_field(index, point.rho, point.phi))
