"""Non-classical polynomials on F_2^n with values in (1/2^D)Z/Z.

A polynomial is stored as its value table (residues mod ``2**D`` in bitmask
order of the input).  Its Taylor coefficients are the Mobius transform of the
table, the same transform the cubes module uses, because over F_2 the binomial
``C(|v|, t)`` reduces to ``v**t``.

Depth is measured on the translate ``P - P(0)``.  Which power of two a given
depth stands for is not hard-coded: ``calibrate_depth_convention`` decides it
by comparing polynomial classes with morphism sets exhaustively.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .cubes import popcount, subsets
from .group2 import FilteredGroup, make_canonical


@dataclass(frozen=True)
class NonClassicalPoly:
    n: int
    D: int
    table: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.n < 0 or self.D < 0:
            raise ValueError("n and D must be non-negative")
        if len(self.table) != 1 << self.n:
            raise ValueError(f"need {1 << self.n} table entries, got {len(self.table)}")
        object.__setattr__(self, "table", tuple(int(t) % self.modulus for t in self.table))

    @property
    def modulus(self) -> int:
        return 1 << self.D

    def __call__(self, x: int) -> int:
        return self.table[x]

    def __add__(self, other: "NonClassicalPoly") -> "NonClassicalPoly":
        self._check_compatible(other)
        return NonClassicalPoly(self.n, self.D, tuple(a + b for a, b in zip(self.table, other.table)))

    def __sub__(self, other: "NonClassicalPoly") -> "NonClassicalPoly":
        self._check_compatible(other)
        return NonClassicalPoly(self.n, self.D, tuple(a - b for a, b in zip(self.table, other.table)))

    def _check_compatible(self, other: "NonClassicalPoly") -> None:
        if (self.n, self.D) != (other.n, other.D):
            raise ValueError("polynomials live on different spaces")

    def normalized(self) -> "NonClassicalPoly":
        """Translate values so that ``P(0) = 0``."""
        c = self.table[0]
        return NonClassicalPoly(self.n, self.D, tuple(t - c for t in self.table))

    def is_zero(self) -> bool:
        return not any(self.table)

    def coeffs(self) -> tuple[int, ...]:
        """Taylor coefficients ``w_S`` indexed by subset bitmask."""
        mod = self.modulus
        out = []
        for s in range(1 << self.n):
            ws = popcount(s)
            acc = 0
            for t in subsets(s):
                acc += -self.table[t] if (ws - popcount(t)) % 2 else self.table[t]
            out.append(acc % mod)
        return tuple(out)

    @classmethod
    def from_coeffs(cls, n: int, D: int, coeffs: Sequence[int]) -> "NonClassicalPoly":
        table = [sum(coeffs[s] for s in subsets(v)) for v in range(1 << n)]
        return cls(n, D, tuple(table))

    def to_json(self) -> dict:
        return {"n": self.n, "D": self.D, "table": list(self.table)}

    @classmethod
    def from_json(cls, data: dict) -> "NonClassicalPoly":
        n, D = int(data["n"]), int(data["D"])
        if "table" in data:
            return cls(n, D, tuple(data["table"]))
        raw = data["coeffs"]
        coeffs = [0] * (1 << n)
        for key, val in raw.items():
            coeffs[int(key)] = int(val)
        return cls.from_coeffs(n, D, coeffs)


def derivative(p: NonClassicalPoly, h: int) -> NonClassicalPoly:
    """``x -> P(x + h) - P(x)``; the result is not re-normalized."""
    return NonClassicalPoly(p.n, p.D, tuple(p.table[x ^ h] - p.table[x] for x in range(1 << p.n)))


def degree_of(p: NonClassicalPoly) -> int:
    """Least ``d`` such that every ``(d+1)``-fold derivative vanishes.

    Only basis directions are used: a derivative along ``h + h'`` is a sum of
    translated derivatives along ``h`` and ``h'``.
    """
    level = {p.table}
    d = 0
    while True:
        level = {t for t in level if any(t)}
        if not level:
            return max(d - 1, 0)
        nxt = set()
        for t in level:
            for i in range(p.n):
                bit = 1 << i
                nxt.add(tuple((t[x ^ bit] - t[x]) % p.modulus for x in range(len(t))))
        level = nxt
        d += 1


def _two_adic_valuation(x: int) -> int:
    return (x & -x).bit_length() - 1


def denominator_exponent(p: NonClassicalPoly) -> int:
    """Least ``e`` with the image of ``P - P(0)`` inside ``(1/2^e)Z/Z``."""
    e = 0
    c = p.table[0]
    for t in p.table:
        diff = (t - c) % p.modulus
        if diff:
            e = max(e, p.D - _two_adic_valuation(diff))
    return e


def depth_with_offset(p: NonClassicalPoly, offset: int) -> int:
    return max(0, denominator_exponent(p) - offset)


def depth_of(p: NonClassicalPoly) -> int:
    """Depth under the calibrated convention (see ``calibrate_depth_convention``)."""
    return depth_with_offset(p, calibrate_depth_convention().offset)


# -- morphisms into cyclic filtered groups ----------------------------------


def _embedding_shift(p: NonClassicalPoly, z: FilteredGroup) -> int:
    if z.rank != 1:
        raise ValueError("target must be a single cyclic factor")
    q = z.moduli[0]
    e = q.bit_length() - 1
    if q != 1 << e:
        raise ValueError(f"target modulus {q} is not a power of two")
    if e > p.D:
        raise ValueError(f"target of order {q} does not embed in (1/2^{p.D})Z/Z")
    return p.D - e


def is_morphism_into(p: NonClassicalPoly, z: FilteredGroup) -> bool:
    """Coefficient test: ``w_S`` lies in the embedded ``Z_(|S|)`` for every ``S``.

    ``Z`` is cyclic of order ``2^e`` and sits in ``(1/2^D)Z/Z`` as the
    multiples of ``2^(D-e)``.
    """
    shift = _embedding_shift(p, z)
    for s, w in enumerate(p.coeffs()):
        step = (z.mult(popcount(s), 0) << shift) % p.modulus or p.modulus
        if w % step:
            return False
    return True


def all_tables(n: int, D: int, normalized: bool = True) -> Iterable[NonClassicalPoly]:
    mod = 1 << D
    if normalized:
        for rest in itertools.product(range(mod), repeat=(1 << n) - 1):
            yield NonClassicalPoly(n, D, (0,) + rest)
    else:
        for tab in itertools.product(range(mod), repeat=1 << n):
            yield NonClassicalPoly(n, D, tab)


# -- depth convention calibration -----------------------------------------


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DepthCalibration:
    """Outcome of the calibration run.

    ``offset`` is the chosen convention: depth ``r`` means image inside
    ``(1/2^(r + offset))Z/Z``.  ``pairing`` maps ``(k, r)`` to ``ell``.
    ``diagnostics`` records, per candidate offset, the pairs that failed.
    """

    offset: int
    pairing: dict[tuple[int, int], int]
    max_k: int
    max_n: int
    diagnostics: dict[int, list[tuple[int, int]]]

    def ell(self, k: int, r: int) -> int:
        try:
            return self.pairing[(k, r)]
        except KeyError:
            raise KeyError(f"(k={k}, r={r}) is outside the calibrated table") from None

    def to_json(self) -> dict:
        return {
            "offset": self.offset,
            "max_k": self.max_k,
            "max_n": self.max_n,
            "pairing": [{"k": k, "r": r, "ell": ell} for (k, r), ell in sorted(self.pairing.items())],
            "rejected": {str(o): [list(x) for x in bad] for o, bad in sorted(self.diagnostics.items())},
        }


def _universe(max_k: int, max_n: int) -> list[tuple[NonClassicalPoly, int, int]]:
    """All normalized tables for ``n <= max_n`` with denominators up to ``2^(max_k+1)``."""
    D = max_k + 1
    out = []
    for n in range(1, max_n + 1):
        for p in all_tables(n, D):
            out.append((p, degree_of(p), denominator_exponent(p)))
    return out


@lru_cache(maxsize=None)
def calibrate_depth_convention(max_k: int = 3, max_n: int = 2) -> DepthCalibration:
    """Pair ``(k, r)`` with ``ell`` by exhaustive comparison of sets of tables.

    For each candidate offset, the class ``{P : deg P <= k, depth P <= r,
    P(0) = 0}`` must coincide, for every ``n <= max_n``, with the set of
    normalized morphisms into ``Z_{k, ell}`` for exactly one ``ell``.  The
    offset whose pairing is total on all achievable ``(k, r)`` wins; if none
    or several do, ``CalibrationError`` carries the diagnostics.
    """
    universe = _universe(max_k, max_n)
    hom_cache: dict[tuple[int, int], frozenset] = {}

    def hom_set(k: int, ell: int) -> frozenset:
        if (k, ell) not in hom_cache:
            z = make_canonical(k, ell)
            hom_cache[(k, ell)] = frozenset(
                (p.n, p.table) for p, _, _ in universe if is_morphism_into(p, z)
            )
        return hom_cache[(k, ell)]

    results: dict[int, dict[tuple[int, int], int]] = {}
    diagnostics: dict[int, list[tuple[int, int]]] = {}
    for offset in (0, 1):
        pairing: dict[tuple[int, int], int] = {}
        bad: list[tuple[int, int]] = []
        for k in range(1, max_k + 1):
            depths = sorted({max(0, e - offset) for _, deg, e in universe if deg <= k})
            for r in depths:
                cls = frozenset(
                    (p.n, p.table)
                    for p, deg, e in universe
                    if deg <= k and max(0, e - offset) <= r
                )
                matches = [ell for ell in range(1, k + 1) if hom_set(k, ell) == cls]
                if len(matches) == 1:
                    pairing[(k, r)] = matches[0]
                else:
                    bad.append((k, r))
        diagnostics[offset] = bad
        if not bad:
            results[offset] = pairing
    if len(results) != 1:
        raise CalibrationError(f"no unique consistent depth convention: rejected pairs {diagnostics}")
    (offset, pairing), = results.items()
    return DepthCalibration(offset, pairing, max_k, max_n, diagnostics)
