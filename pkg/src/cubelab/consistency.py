"""Consistency subgroups of linear-form systems.

A value tuple ``(b_1, ..., b_m)`` in ``Z^m`` is consistent with forms
``L_1', ..., L_m'`` in ``F_2^(s-1)`` when some polynomial map ``f`` from
``F_2^(s-1)`` (with its degree-one filtration) into ``Z`` satisfies
``f(L_i') = b_i``.  Such maps are sums of monomials ``g * v^S`` with
``g`` in ``Z_(|S|)``, so the consistent tuples form the subgroup spanned by the
monomial evaluations.  Membership is decided by a Howell-style echelon form
over ``Z/2^E``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .cubes import popcount, subsets
from .group2 import FilteredGroup, GroupElement, is_2_homogeneous, make_canonical
from .measures import LinearFormSystem, mask_to_bits
from .poly import calibrate_depth_convention


def lift_to_affine(system: LinearFormSystem) -> LinearFormSystem:
    """Prefix every form with a leading coefficient 1 (stored in bit 0)."""
    return LinearFormSystem(system.k + 1, tuple((f << 1) | 1 for f in system.forms))


def strip_affine(system: LinearFormSystem) -> LinearFormSystem:
    """Inverse of ``lift_to_affine``; every form must start with 1."""
    if system.k < 1:
        raise ValueError("affine forms need at least one coordinate")
    if any(not f & 1 for f in system.forms):
        raise ValueError("affine forms must have leading coefficient 1")
    return LinearFormSystem(system.k - 1, tuple(f >> 1 for f in system.forms))


def _valuation(x: int) -> int:
    return (x & -x).bit_length() - 1


@dataclass
class _Row:
    values: list[int]
    combo: list[int]


@dataclass
class ConsistencySubgroup:
    """Subgroup of ``Z^m`` spanned by monomial evaluations.

    ``generators[t]`` is the evaluation tuple of ``monomials[t] = (S, g)``.
    Coordinates of ``Z^m`` are flattened form-major and embedded into ``Z/2^E``.
    """

    group: FilteredGroup
    forms: LinearFormSystem
    monomials: list[tuple[int, GroupElement]]
    generators: list[tuple[GroupElement, ...]]
    exponent: int = 0
    _embed: list[int] = field(default_factory=list, repr=False)
    _echelon: list[tuple[int, int, _Row]] = field(default_factory=list, repr=False)

    @property
    def m(self) -> int:
        return len(self.forms)

    @property
    def modulus(self) -> int:
        return 1 << self.exponent

    def _flatten(self, b: Sequence[GroupElement]) -> list[int]:
        flat = [int(x) for tup in b for x in tup]
        return [(x * s) % self.modulus for x, s in zip(flat, self._embed)]

    def _build(self) -> None:
        z = self.group
        self.exponent = max((q.bit_length() - 1 for q in z.moduli), default=0)
        self._embed = [self.modulus // q for q in z.moduli] * self.m
        ngen = len(self.generators)
        pending = [
            _Row(self._flatten(g), [int(t == i) for t in range(ngen)]) for i, g in enumerate(self.generators)
        ]
        mod = self.modulus
        for col in range(len(self._embed)):
            live = [r for r in pending if r.values[col] % mod]
            if not live:
                continue
            pivot = min(live, key=lambda r: _valuation(r.values[col]))
            pending.remove(pivot)
            v = _valuation(pivot.values[col])
            inv = pow(pivot.values[col] >> v, -1, mod)
            for r in pending:
                x = r.values[col]
                if x:
                    c = ((x >> v) * inv) % mod
                    r.values = [(a - c * p) % mod for a, p in zip(r.values, pivot.values)]
                    r.combo = [(a - c * p) % mod for a, p in zip(r.combo, pivot.combo)]
            # the multiple of the pivot that vanishes in this column stays in the span
            scale = 1 << (self.exponent - v)
            pending.append(_Row([(scale * a) % mod for a in pivot.values], [(scale * a) % mod for a in pivot.combo]))
            self._echelon.append((col, v, pivot))

    def reduced(self) -> list[dict]:
        """Echelon rows as ``{"pivot": column, "valuation": v, "row": [...]}`` in ``Z/2^E``."""
        return [{"pivot": c, "valuation": v, "row": list(r.values)} for c, v, r in self._echelon]

    def _check_tuple(self, b: Sequence[GroupElement]) -> None:
        if len(b) != self.m:
            raise ValueError(f"expected {self.m} values, got {len(b)}")
        for x in b:
            if len(x) != self.group.rank or any(not 0 <= int(v) < q for v, q in zip(x, self.group.moduli)):
                raise ValueError(f"value {tuple(x)} is not a reduced element of the target group")

    def reduce(self, b: Sequence[GroupElement]) -> tuple[list[int], list[int], int | None]:
        """Forward reduction; returns (residual, combination, failing column or None)."""
        self._check_tuple(b)
        mod = self.modulus
        vec = self._flatten(b)
        combo = [0] * len(self.generators)
        for col, v, row in self._echelon:
            x = vec[col]
            if x % (1 << v):
                return vec, combo, col
            if x:
                c = ((x >> v) * pow(row.values[col] >> v, -1, mod)) % mod
                vec = [(a - c * p) % mod for a, p in zip(vec, row.values)]
                combo = [(a + c * p) % mod for a, p in zip(combo, row.combo)]
        bad = next((i for i, a in enumerate(vec) if a), None)
        return vec, combo, bad

    def contains(self, b: Sequence[GroupElement]) -> bool:
        return self.reduce(b)[2] is None

    def certificate(self, b: Sequence[GroupElement]) -> dict:
        """Polynomial coefficients realising ``b``, or the column where reduction got stuck."""
        residual, combo, bad = self.reduce(b)
        if bad is not None:
            form, coord = divmod(bad, self.group.rank)
            return {"member": False, "stuck_at": {"form": form, "coordinate": coord}, "residual": residual}
        z = self.group
        coeffs: dict[int, GroupElement] = {}
        for c, (S, g) in zip(combo, self.monomials):
            if c:
                coeffs[S] = z.add(coeffs.get(S, z.zero()), z.scale(g, c))
        return {
            "member": True,
            "coefficients": [
                {"monomial": mask_to_bits(S, self.forms.k), "value": list(val)}
                for S, val in sorted(coeffs.items())
                if any(val)
            ],
        }

    def to_json(self) -> dict:
        return {
            "forms": self.forms.to_json(),
            "group": self.group.to_json(),
            "generators": [[list(x) for x in g] for g in self.generators],
            "exponent": self.exponent,
            "reduced": self.reduced(),
        }


def evaluate_monomials(forms: LinearFormSystem, z: FilteredGroup, coeffs: dict[int, GroupElement]) -> tuple[GroupElement, ...]:
    """Values ``sum_S z_S * [S subset of L']`` at each form."""
    out = []
    for L in forms.forms:
        acc = z.zero()
        for S in subsets(L):
            if S in coeffs:
                acc = z.add(acc, coeffs[S])
        out.append(acc)
    return tuple(out)


def consistent_subgroup(forms: LinearFormSystem, z: FilteredGroup) -> ConsistencySubgroup:
    """Subgroup of ``Z^m`` reached by polynomial maps ``F_2^(s-1) -> Z`` at the given forms."""
    if not is_2_homogeneous(z):
        raise ValueError("consistency subgroups need a 2-homogeneous target")
    monomials: list[tuple[int, GroupElement]] = []
    generators = []
    for S in range(1 << forms.k):
        for g in z.level_generators(popcount(S)):
            monomials.append((S, g))
            generators.append(tuple(g if (L & S) == S else z.zero() for L in forms.forms))
    sub = ConsistencySubgroup(z, forms, monomials, generators)
    sub._build()
    return sub


def target_group(k: int, r: int) -> FilteredGroup:
    """The calibrated target for ``(k, r)``-polynomials."""
    return make_canonical(k, calibrate_depth_convention().ell(k, r))


def _as_elements(b: Sequence, z: FilteredGroup) -> list[GroupElement]:
    return [tuple(x) if isinstance(x, (tuple, list)) else (int(x),) for x in b]


def is_consistent(b: Sequence, forms: LinearFormSystem, k: int, r: int) -> bool:
    """Whether ``b`` is realised by a ``(k, r)``-polynomial along the affine forms ``forms``.

    ``forms`` carry their leading affine coefficient in bit 0; ``b`` holds
    residues of the calibrated target group.
    """
    z = target_group(k, r)
    return consistent_subgroup(strip_affine(forms), z).contains(_as_elements(b, z))


def consistency_verdict(b: Sequence, forms: LinearFormSystem, k: int, r: int) -> dict:
    z = target_group(k, r)
    sub = consistent_subgroup(strip_affine(forms), z)
    cert = sub.certificate(_as_elements(b, z))
    return {"consistent": cert["member"], "target": z.to_json(), "certificate": cert, "subgroup": sub.to_json()}
