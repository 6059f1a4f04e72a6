"""Finite filtered abelian groups.

A filtered group is a product of cyclic groups ``Z/q_1 x ... x Z/q_m`` with a
non-increasing chain of subgroups ``Z_(0) = Z_(1) >= Z_(2) >= ...``.  Every level
is itself a product of cyclic subgroups, stored as a matrix of multipliers:
``Z_(i) = prod_j c[i][j] * Z/q_j``.  Membership is therefore a divisibility
test per coordinate.

Elements are plain tuples of residues.  Each group also fixes a mixed-radix
integer index for its elements (coordinate 0 least significant) which the
enumeration code uses for hashing and table lookups.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import gcd, prod
from typing import Iterator, Sequence

import numpy as np

GroupElement = tuple[int, ...]


def _is_prime_power(q: int) -> bool:
    if q == 1:
        return True
    for p in range(2, q + 1):
        if q % p == 0:
            while q % p == 0:
                q //= p
            return q == 1
    return False


@dataclass(frozen=True)
class FilteredGroup:
    """A finite abelian group with a product-subgroup filtration.

    ``multipliers`` has ``degree + 2`` rows; row ``i`` describes ``Z_(i)``.
    Levels above ``degree + 1`` are trivial and not stored.
    """

    moduli: tuple[int, ...]
    degree: int
    multipliers: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        moduli = tuple(int(q) for q in self.moduli)
        mults = tuple(tuple(int(c) for c in row) for row in self.multipliers)
        object.__setattr__(self, "moduli", moduli)
        object.__setattr__(self, "multipliers", mults)
        d = self.degree
        if d < 0:
            raise ValueError("degree must be non-negative")
        if any(q < 1 or not _is_prime_power(q) for q in moduli):
            raise ValueError(f"moduli must be prime powers, got {moduli}")
        if len(mults) != d + 2:
            raise ValueError(f"expected {d + 2} filtration rows, got {len(mults)}")
        for row in mults:
            if len(row) != len(moduli):
                raise ValueError("multiplier row length does not match moduli")
            for c, q in zip(row, moduli):
                if c < 1 or q % c:
                    raise ValueError(f"multiplier {c} does not divide modulus {q}")
        for j in range(len(moduli)):
            if mults[0][j] != 1 or mults[1][j] != 1:
                raise ValueError("levels 0 and 1 must be the whole group")
            if mults[d + 1][j] != moduli[j]:
                raise ValueError(f"level {d + 1} must be trivial")
            for i in range(d + 1):
                if mults[i + 1][j] % mults[i][j]:
                    raise ValueError("filtration must be non-increasing")

    # -- basic structure -------------------------------------------------

    @property
    def rank(self) -> int:
        return len(self.moduli)

    @cached_property
    def order(self) -> int:
        return prod(self.moduli)

    @cached_property
    def effective_degree(self) -> int:
        """Least ``d`` with ``Z_(d+1)`` trivial (may be below ``degree``)."""
        for d in range(self.degree + 1):
            if self.level_order(d + 1) == 1:
                return d
        return self.degree

    def mult(self, i: int, j: int) -> int:
        """Multiplier of level ``i`` at coordinate ``j``; trivial beyond the stored rows."""
        if i < 0:
            raise ValueError("negative filtration level")
        if i > self.degree + 1:
            return self.moduli[j]
        return self.multipliers[i][j]

    def level_mults(self, i: int) -> tuple[int, ...]:
        return tuple(self.mult(i, j) for j in range(self.rank))

    def level_order(self, i: int) -> int:
        return prod(q // c for q, c in zip(self.moduli, self.level_mults(i)))

    def level_orders(self, upto: int) -> list[int]:
        return [self.level_order(i) for i in range(upto + 1)]

    def in_level(self, x: Sequence[int], i: int) -> bool:
        return all(int(v) % c == 0 for v, c in zip(x, self.level_mults(i)))

    # -- arithmetic ------------------------------------------------------

    def zero(self) -> GroupElement:
        return (0,) * self.rank

    def reduce(self, x: Sequence[int]) -> GroupElement:
        if len(x) != self.rank:
            raise ValueError(f"element {tuple(x)} has wrong length for rank {self.rank}")
        return tuple(int(v) % q for v, q in zip(x, self.moduli))

    def add(self, x: Sequence[int], y: Sequence[int]) -> GroupElement:
        return tuple((a + b) % q for a, b, q in zip(x, y, self.moduli))

    def sub(self, x: Sequence[int], y: Sequence[int]) -> GroupElement:
        return tuple((a - b) % q for a, b, q in zip(x, y, self.moduli))

    def neg(self, x: Sequence[int]) -> GroupElement:
        return tuple((-a) % q for a, q in zip(x, self.moduli))

    def scale(self, x: Sequence[int], n: int) -> GroupElement:
        return tuple((a * n) % q for a, q in zip(x, self.moduli))

    # -- indexing --------------------------------------------------------

    @cached_property
    def strides(self) -> tuple[int, ...]:
        out, s = [], 1
        for q in self.moduli:
            out.append(s)
            s *= q
        return tuple(out)

    def index(self, x: Sequence[int]) -> int:
        return sum((int(v) % q) * s for v, q, s in zip(x, self.moduli, self.strides))

    def element(self, idx: int) -> GroupElement:
        return tuple((idx // s) % q for q, s in zip(self.moduli, self.strides))

    def elements(self) -> list[GroupElement]:
        return [self.element(i) for i in range(self.order)]

    @cached_property
    def element_array(self) -> np.ndarray:
        """``(order, rank)`` array of residues in index order."""
        idx = np.arange(self.order, dtype=np.int64)
        cols = [(idx // s) % q for q, s in zip(self.moduli, self.strides)]
        if not cols:
            return np.zeros((self.order, 0), dtype=np.int64)
        return np.stack(cols, axis=1)

    def level_members(self, i: int) -> Iterator[GroupElement]:
        """Enumerate ``Z_(i)`` once each, in lexicographic order of residues."""
        if not 0 <= i <= self.degree + 1:
            raise ValueError(f"level {i} outside [0, {self.degree + 1}]")
        ranges = [range(0, q, c) for q, c in zip(self.moduli, self.level_mults(i))]
        for x in itertools.product(*ranges):
            yield tuple(x)

    def level_generators(self, i: int) -> list[GroupElement]:
        """One generator per non-trivial cyclic factor of ``Z_(i)``."""
        gens = []
        for j, (q, c) in enumerate(zip(self.moduli, self.level_mults(i))):
            if c < q:
                g = [0] * self.rank
                g[j] = c
                gens.append(tuple(g))
        return gens

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "moduli": list(self.moduli),
            "degree": self.degree,
            "multipliers": [list(r) for r in self.multipliers],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FilteredGroup":
        if "canonical" in data:
            params = data["canonical"]
            return make_canonical(int(params["k"]), int(params["ell"]))
        if "h_trunc" in data:
            params = data["h_trunc"]
            return make_h_truncation(int(params["k"]), [int(w) for w in params["widths"]])
        return cls(
            moduli=tuple(data["moduli"]),
            degree=int(data["degree"]),
            multipliers=tuple(tuple(r) for r in data["multipliers"]),
        )

    def __str__(self) -> str:
        levels = ", ".join(
            "x".join(f"{c}Z{q}" if c > 1 else f"Z{q}" for c, q in zip(self.level_mults(i), self.moduli))
            or "0"
            for i in range(self.degree + 2)
        )
        return f"FilteredGroup[{levels}]"


def trivial_group() -> FilteredGroup:
    return FilteredGroup(moduli=(), degree=0, multipliers=((), ()))


def cyclic(q: int, degree: int = 1) -> FilteredGroup:
    """``Z/q`` with the standard degree-``degree`` filtration (full up to ``degree``)."""
    rows = [(1,)] * (degree + 1) + [(q,)]
    return FilteredGroup(moduli=(q,), degree=degree, multipliers=tuple(rows))


def make_canonical(k: int, ell: int) -> FilteredGroup:
    """The 2-homogeneous building block of degree ``k``, ``ell``-fold ergodic.

    Cyclic of order ``2**(k - ell + 1)``; level ``i`` is the whole group for
    ``i <= ell`` and ``2**(i - ell)`` times the group above that.
    """
    if k < 1 or not 1 <= ell <= k:
        raise ValueError(f"need 1 <= ell <= k, got k={k}, ell={ell}")
    q = 2 ** (k - ell + 1)
    rows = tuple((min(2 ** max(0, i - ell), q),) for i in range(k + 2))
    return FilteredGroup(moduli=(q,), degree=k, multipliers=rows)


def product(a: FilteredGroup, b: FilteredGroup) -> FilteredGroup:
    d = max(a.degree, b.degree)
    rows = tuple(a.level_mults(i) + b.level_mults(i) for i in range(d + 2))
    return FilteredGroup(moduli=a.moduli + b.moduli, degree=d, multipliers=rows)


def product_of(groups: Sequence[FilteredGroup]) -> FilteredGroup:
    out = trivial_group()
    for g in groups:
        out = product(out, g)
    return out


def make_h_truncation(k: int, widths: Sequence[int]) -> FilteredGroup:
    """Finite shadow of the universal group: ``prod_l Z_{k,l} ** widths[l-1]``."""
    if k < 1:
        raise ValueError("k must be positive")
    if len(widths) != k or any(w < 0 for w in widths):
        raise ValueError(f"need {k} non-negative widths, got {list(widths)}")
    factors = [make_canonical(k, ell) for ell, w in enumerate(widths, start=1) for _ in range(w)]
    out = product_of(factors)
    if out.degree < k:
        # empty product still carries the requested degree label
        rows = tuple(out.level_mults(i) for i in range(k + 2))
        out = FilteredGroup(out.moduli, k, rows)
    return out


def quotient_by_level(z: FilteredGroup, j: int) -> FilteredGroup:
    """``Z / Z_(j)`` with the induced filtration, of degree ``j - 1``.

    Coordinates that become trivial are dropped; ``quotient_coordinates``
    reports which source coordinates survive.
    """
    if not 1 <= j <= z.degree + 1:
        raise ValueError(f"level {j} outside [1, {z.degree + 1}]")
    top = z.level_mults(j)
    keep = [t for t, c in enumerate(top) if c > 1]
    moduli = tuple(top[t] for t in keep)
    rows = tuple(tuple(min(z.mult(i, t), top[t]) for t in keep) for i in range(j + 1))
    return FilteredGroup(moduli=moduli, degree=j - 1, multipliers=rows)


def quotient_coordinates(z: FilteredGroup, j: int) -> list[int]:
    top = z.level_mults(j)
    return [t for t, c in enumerate(top) if c > 1]


def is_2_homogeneous(z: FilteredGroup) -> bool:
    """Check that doubling maps every level into the next one."""
    for i in range(z.degree + 1):
        for j, q in enumerate(z.moduli):
            c_here, c_next = z.mult(i, j), z.mult(i + 1, j)
            # 2*c_here*Z/q = gcd(2*c_here, q)*Z/q must sit inside c_next*Z/q
            if gcd(2 * c_here, q) % c_next:
                return False
    return True
