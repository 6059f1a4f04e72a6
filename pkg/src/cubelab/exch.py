"""Exchangeability and independence checks for window distributions.

A window distribution is a law on label tuples indexed by the vertices of
``{0,1}^k`` (vertex ``v`` is the bitmask ``v``, so a tuple has ``2**k`` entries).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt
from typing import Callable, Iterator, Sequence

import numpy as np

from .cubes import all_cubes_array, face_vertices, faces, index_array, injective_cube_morphisms, popcount
from .group2 import FilteredGroup
from .measures import FiniteDistribution, tv_distance


@dataclass(frozen=True)
class Face:
    k: int
    free: int
    fixed: int

    def __post_init__(self) -> None:
        full = (1 << self.k) - 1
        if self.free & ~full or self.fixed & ~full:
            raise ValueError("face does not fit in the window")
        if self.free & self.fixed:
            raise ValueError("fixed bits must lie outside the free set")

    @property
    def dim(self) -> int:
        return popcount(self.free)

    def vertices(self) -> list[int]:
        return face_vertices(self.free, self.fixed)

    def __contains__(self, v: int) -> bool:
        return (v & ~self.free) == self.fixed

    def independent_of(self, other: "Face") -> bool:
        """Disjoint free coordinates and disjoint vertex sets."""
        if self.free & other.free:
            return False
        return not set(self.vertices()) & set(other.vertices())

    def to_json(self) -> dict:
        free = [i + 1 for i in range(self.k) if (self.free >> i) & 1]
        fixed = {str(i + 1): (self.fixed >> i) & 1 for i in range(self.k) if not (self.free >> i) & 1}
        return {"free": free, "fixed": fixed}


def all_faces(k: int) -> list[Face]:
    return [Face(k, free, fixed) for free, fixed in faces(k)]


@dataclass(frozen=True)
class WindowDistribution:
    k: int
    dist: FiniteDistribution

    def __post_init__(self) -> None:
        if self.dist.length != 1 << self.k:
            raise ValueError(f"outcomes must have length {1 << self.k}")

    @property
    def exact(self) -> bool:
        return self.dist.exact

    def to_json(self) -> dict:
        return {"k": self.k, "distribution": self.dist.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "WindowDistribution":
        return cls(int(data["k"]), FiniteDistribution.from_json(data["distribution"]))


def uniform_cube_window(z: FilteredGroup, k: int) -> WindowDistribution:
    """Haar measure on ``C^k(Z)``; labels are element indices."""
    idx = index_array(all_cubes_array(z, k), z)
    uniq, counts = np.unique(idx, axis=0, return_counts=True)
    total = int(counts.sum())
    weights = {tuple(int(x) for x in row): Fraction(int(c), total) for row, c in zip(uniq, counts)}
    alphabet = tuple(",".join(map(str, x)) or "0" for x in z.elements())
    return WindowDistribution(k, FiniteDistribution(alphabet, 1 << k, weights))


def pushforward_by_vertex_map(d: WindowDistribution | FiniteDistribution, sigma: Sequence[int]) -> FiniteDistribution:
    """Law of ``(t[sigma[0]], t[sigma[1]], ...)``.

    With ``sigma`` a permutation of the vertices this relabels coordinates;
    with a shorter list it projects onto a sub-window.
    """
    dist = d.dist if isinstance(d, WindowDistribution) else d
    return dist.pushforward(list(sigma))


# -- affine generators ---------------------------------------------------------


def _translation(i: int) -> Callable[[int], int]:
    return lambda v: v ^ (1 << i)


def _transvection(v: int) -> int:
    """``v_1 -> v_1 + v_2``."""
    return v ^ ((v >> 1) & 1)


def _cyclic_shift(k: int) -> Callable[[int], int]:
    full = (1 << k) - 1
    return lambda v: ((v << 1) | (v >> (k - 1))) & full


def affine_generators(k: int) -> list[tuple[str, list[int]]]:
    """Named vertex permutations generating ``Aff(F_2^k)``."""
    gens: list[tuple[str, Callable[[int], int]]] = [(f"translate e{i + 1}", _translation(i)) for i in range(k)]
    if k >= 2:
        gens.append(("transvection v1 -> v1+v2", _transvection))
        gens.append(("cyclic shift", _cyclic_shift(k)))
    return [(name, [g(v) for v in range(1 << k)]) for name, g in gens]


def generated_group_order(k: int) -> int:
    """Size of the permutation group spanned by ``affine_generators(k)``."""
    gens = [tuple(p) for _, p in affine_generators(k)]
    identity = tuple(range(1 << k))
    seen = {identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                comp = tuple(g[x] for x in p)
                if comp not in seen:
                    seen.add(comp)
                    nxt.append(comp)
        frontier = nxt
    return len(seen)


# -- reports ---------------------------------------------------------------------


@dataclass
class ExchReport:
    passed: bool
    witnesses: list[dict] = field(default_factory=list)
    statistical: bool = False
    checked: int = 0

    def to_json(self) -> dict:
        out = {"pass": self.passed, "witnesses": self.witnesses, "checked": self.checked}
        if self.statistical:
            out["statistical"] = True
        return out


def _fmt(x) -> str | float:
    return str(x) if isinstance(x, Fraction) else float(x)


def _tolerance(d: FiniteDistribution) -> float:
    return 4 * sqrt(1 / d.n_samples) if d.n_samples else 0.0


def _same(a: FiniteDistribution, b: FiniteDistribution, tol: float) -> tuple[bool, object]:
    tv = tv_distance(a, b)
    if a.exact and b.exact:
        return tv == 0, tv
    return tv <= tol, tv


def check_affine_exchangeable(d: WindowDistribution) -> ExchReport:
    """Invariance under every generator of the affine group of the window.

    Estimated inputs are compared with the tolerance ``4/sqrt(N)`` and the
    report is flagged as statistical.
    """
    tol = _tolerance(d.dist)
    report = ExchReport(True, statistical=not d.exact)
    for name, perm in affine_generators(d.k):
        moved = pushforward_by_vertex_map(d, perm)
        ok, tv = _same(moved, d.dist, tol)
        report.checked += 1
        if not ok:
            report.passed = False
            report.witnesses.append({"generator": name, "tv": _fmt(tv)})
    return report


def check_cubic_exchangeable(d: WindowDistribution, m: int) -> ExchReport:
    """Projections along all injective cube morphisms ``{0,1}^m -> {0,1}^k`` agree."""
    if m > d.k:
        raise ValueError(f"sub-cube dimension {m} exceeds window {d.k}")
    if m < 0:
        raise ValueError("sub-cube dimension must be non-negative")
    tol = _tolerance(d.dist)
    report = ExchReport(True, statistical=not d.exact)
    reference = None
    for phi in injective_cube_morphisms(m, d.k):
        proj = pushforward_by_vertex_map(d, phi.vertex_map())
        report.checked += 1
        if reference is None:
            reference = (phi, proj)
            continue
        ok, tv = _same(proj, reference[1], tol)
        if not ok:
            report.passed = False
            report.witnesses.append(
                {"morphism": phi.vertex_map(), "reference": reference[0].vertex_map(), "tv": _fmt(tv)}
            )
    return report


def independent_face_pairs(k: int) -> Iterator[tuple[Face, Face]]:
    fs = all_faces(k)
    for i, f1 in enumerate(fs):
        for f2 in fs[i + 1:]:
            if f1.independent_of(f2):
                yield f1, f2


def factors_exactly(joint: FiniteDistribution, left: FiniteDistribution, right: FiniteDistribution) -> bool:
    for o1, w1 in left.weights.items():
        for o2, w2 in right.weights.items():
            if joint[o1 + o2] != w1 * w2:
                return False
    # the products already sum to one, so nothing else can carry mass
    return True


def check_independence_property(d: WindowDistribution) -> ExchReport:
    """Joint marginal on every pair of independent faces is the product of the marginals."""
    tol = _tolerance(d.dist)
    report = ExchReport(True, statistical=not d.exact)
    for f1, f2 in independent_face_pairs(d.k):
        v1, v2 = f1.vertices(), f2.vertices()
        left = d.dist.pushforward(v1)
        right = d.dist.pushforward(v2)
        joint = d.dist.pushforward(v1 + v2)
        report.checked += 1
        if d.exact:
            ok = factors_exactly(joint, left, right)
            tv = None if ok else tv_distance(joint, _product(left, right))
        else:
            tv = tv_distance(joint, _product(left, right))
            ok = tv <= tol
        if not ok:
            report.passed = False
            report.witnesses.append({"faces": [f1.to_json(), f2.to_json()], "tv": _fmt(tv)})
    return report


def _product(a: FiniteDistribution, b: FiniteDistribution) -> FiniteDistribution:
    exact = a.exact and b.exact
    if not exact:
        a, b = a.as_float(), b.as_float()
    weights = {o1 + o2: w1 * w2 for o1, w1 in a.weights.items() for o2, w2 in b.weights.items()}
    return FiniteDistribution(a.alphabet, a.length + b.length, weights, exact)
