"""Host-Kra cube groups of filtered abelian groups.

A cube of dimension ``k`` is a vertex table ``q: {0,1}^k -> Z`` of the form
``q(v) = sum_S z_S prod_{i in S} v[i]`` with ``z_S`` in ``Z_(|S|)``.  Vertices
and subsets are both little-endian bitmasks: bit ``i-1`` of a vertex index is
``v[i]``.

Two representations are kept: ``CubeCoeffs`` (the coefficients ``z_S``) and
``CubePoint`` (the vertex table).  Coefficients parametrize the cube group
bijectively, which makes counting and uniform sampling exact.  Membership of
an arbitrary vertex table is decided from alternating sums over faces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterator, Sequence

import numpy as np

from .group2 import FilteredGroup, GroupElement


def popcount(x: int) -> int:
    return bin(x).count("1")


def subsets(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


@dataclass(frozen=True)
class CubeCoeffs:
    k: int
    group: FilteredGroup
    coeffs: tuple[GroupElement, ...]

    def __post_init__(self) -> None:
        if len(self.coeffs) != 1 << self.k:
            raise ValueError(f"need {1 << self.k} coefficients, got {len(self.coeffs)}")
        object.__setattr__(self, "coeffs", tuple(self.group.reduce(c) for c in self.coeffs))

    def is_member(self) -> bool:
        """``z_S`` lies in ``Z_(|S|)`` for every ``S``."""
        return all(self.group.in_level(z, popcount(s)) for s, z in enumerate(self.coeffs))

    def to_json(self) -> dict:
        return {"k": self.k, "coeffs": {str(s): list(z) for s, z in enumerate(self.coeffs)}}

    @classmethod
    def from_json(cls, data: dict, group: FilteredGroup) -> "CubeCoeffs":
        k = int(data["k"])
        raw = data["coeffs"]
        coeffs = [group.zero()] * (1 << k)
        for key, val in raw.items():
            coeffs[int(key)] = tuple(val)
        return cls(k, group, tuple(coeffs))


@dataclass(frozen=True)
class CubePoint:
    k: int
    group: FilteredGroup
    values: tuple[GroupElement, ...]

    def __post_init__(self) -> None:
        if len(self.values) != 1 << self.k:
            raise ValueError(f"need {1 << self.k} vertex values, got {len(self.values)}")
        object.__setattr__(self, "values", tuple(self.group.reduce(v) for v in self.values))

    def __getitem__(self, vertex: int) -> GroupElement:
        return self.values[vertex]

    def to_json(self) -> dict:
        return {"k": self.k, "values": [list(v) for v in self.values]}

    @classmethod
    def from_json(cls, data: dict, group: FilteredGroup) -> "CubePoint":
        return cls(int(data["k"]), group, tuple(tuple(v) for v in data["values"]))


def evaluate(c: CubeCoeffs) -> CubePoint:
    z = c.group
    vals = []
    for v in range(1 << c.k):
        acc = z.zero()
        for s in subsets(v):
            acc = z.add(acc, c.coeffs[s])
        vals.append(acc)
    return CubePoint(c.k, z, tuple(vals))


def coeffs_from_cube(q: CubePoint) -> CubeCoeffs:
    """Mobius inversion of ``evaluate``; membership is not checked here."""
    z = q.group
    out = []
    for s in range(1 << q.k):
        acc = z.zero()
        ws = popcount(s)
        for t in subsets(s):
            if (ws - popcount(t)) % 2:
                acc = z.sub(acc, q.values[t])
            else:
                acc = z.add(acc, q.values[t])
        out.append(acc)
    return CubeCoeffs(q.k, z, tuple(out))


# -- faces -----------------------------------------------------------------


def faces(k: int) -> Iterator[tuple[int, int]]:
    """Every face of ``{0,1}^k`` as ``(free_mask, fixed_bits)``.

    ``fixed_bits`` is a submask of the complement of ``free_mask``.
    """
    full = (1 << k) - 1
    for free in range(1 << k):
        for fixed in subsets(full & ~free):
            yield free, fixed


def face_vertices(free: int, fixed: int) -> list[int]:
    return sorted(fixed | t for t in subsets(free))


def alternating_sum(q: CubePoint, free: int, fixed: int) -> GroupElement:
    """Signed sum of ``q`` over a face; the vertex with all free bits set counts ``+``."""
    z = q.group
    acc = z.zero()
    s = popcount(free)
    for t in subsets(free):
        val = q.values[fixed | t]
        acc = z.sub(acc, val) if (s - popcount(t)) % 2 else z.add(acc, val)
    return acc


def is_cube(q: CubePoint) -> bool:
    """Every face alternating sum of dimension ``s`` lies in ``Z_(s)``."""
    z = q.group
    for free, fixed in faces(q.k):
        if not z.in_level(alternating_sum(q, free, fixed), popcount(free)):
            return False
    return True


# -- corners ---------------------------------------------------------------


class CornerError(ValueError):
    """The partial table is not a valid corner, or its completion is not unique."""

    def __init__(self, message: str, completions: int | None = None):
        super().__init__(message)
        self.completions = completions


def _with_vertex(values: Sequence[GroupElement | None], w: int, x: GroupElement) -> tuple:
    out = list(values)
    out[w] = x
    return tuple(out)


def _missing_vertex(values: Sequence[GroupElement | None]) -> int:
    missing = [v for v, x in enumerate(values) if x is None]
    if len(missing) != 1:
        raise CornerError(f"a corner has exactly one missing vertex, found {len(missing)}")
    return missing[0]


def count_completions(values: Sequence[GroupElement | None], z: FilteredGroup) -> int:
    """Exhaustive count of values at the missing vertex that yield a cube."""
    k = (len(values) - 1).bit_length()
    w = _missing_vertex(values)
    return sum(is_cube(CubePoint(k, z, _with_vertex(values, w, x))) for x in z.elements())


def top_forced_value(values: Sequence[GroupElement | None], z: FilteredGroup) -> GroupElement:
    """Value at the gap that makes the full alternating sum vanish.

    Lower faces are not consulted, so this is only a completion when the
    corner itself is valid.
    """
    k = (len(values) - 1).bit_length()
    w = _missing_vertex(values)
    rest = alternating_sum(CubePoint(k, z, _with_vertex(values, w, z.zero())), (1 << k) - 1, 0)
    # sign of w in the top alternating sum is (-1)^(k - |w|)
    return rest if (k - popcount(w)) % 2 else z.neg(rest)


def complete_corner(values: Sequence[GroupElement | None], z: FilteredGroup) -> CubePoint:
    """Fill the single missing vertex (``None``) of a corner.

    The value is forced by the full-cube alternating sum, which must vanish
    when ``Z_(k)`` is trivial.  Faces avoiding the gap are checked first.
    """
    n = len(values)
    k = (n - 1).bit_length()
    if n != 1 << k:
        raise CornerError(f"table length {n} is not a power of two")
    w = _missing_vertex(values)
    for free, fixed in faces(k):
        verts = face_vertices(free, fixed)
        if w in verts:
            continue
        sub = CubePoint(popcount(free), z, tuple(values[v] for v in verts))
        if not z.in_level(alternating_sum(sub, (1 << popcount(free)) - 1, 0), popcount(free)):
            raise CornerError(f"face (free={free:b}, fixed={fixed:b}) is not a cube")
    if z.level_order(k) > 1:
        raise CornerError(
            f"dimension {k} does not exceed the degree; completion is not unique",
            completions=count_completions(values, z),
        )
    out = CubePoint(k, z, _with_vertex(values, w, top_forced_value(values, z)))
    if not is_cube(out):
        raise CornerError("corner has no completion")
    return out


# -- counting and sampling ---------------------------------------------------


def cube_count(z: FilteredGroup, n: int) -> int:
    """``prod_s |Z_(s)| ** C(n, s)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    total = 1
    for s in range(n + 1):
        total *= z.level_order(s) ** comb(n, s)
    return total


def _uniform_level(z: FilteredGroup, level: int, size: int, rng: np.random.Generator) -> np.ndarray:
    cols = []
    for q, c in zip(z.moduli, z.level_mults(level)):
        cols.append(rng.integers(0, q // c, size=size, dtype=np.int64) * c)
    if not cols:
        return np.zeros((size, 0), dtype=np.int64)
    return np.stack(cols, axis=1)


def sample_cube(z: FilteredGroup, k: int, rng: np.random.Generator) -> CubeCoeffs:
    """One Haar-uniform cube: independent uniform coefficients per level."""
    if k < 0:
        raise ValueError("k must be non-negative")
    arr = sample_coeff_array(z, k, 1, rng)[0]
    return CubeCoeffs(k, z, tuple(tuple(int(v) for v in row) for row in arr))


def sample_coeff_array(z: FilteredGroup, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``(size, 2**k, rank)`` array of independent uniform cube coefficients."""
    out = np.zeros((size, 1 << k, z.rank), dtype=np.int64)
    for s in range(1 << k):
        out[:, s, :] = _uniform_level(z, popcount(s), size, rng)
    return out


# -- vectorized transforms -------------------------------------------------


def _moduli(z: FilteredGroup) -> np.ndarray:
    return np.asarray(z.moduli, dtype=np.int64)


def evaluate_array(coeffs: np.ndarray, z: FilteredGroup) -> np.ndarray:
    """Subset-sum transform over axis 1 of a ``(N, 2**k, rank)`` array."""
    out = coeffs.copy()
    k = (out.shape[1] - 1).bit_length()
    mod = _moduli(z)
    for i in range(k):
        bit = 1 << i
        for v in range(out.shape[1]):
            if v & bit:
                out[:, v, :] += out[:, v ^ bit, :]
        out %= mod
    return out


def coeffs_array(values: np.ndarray, z: FilteredGroup) -> np.ndarray:
    """Inverse of ``evaluate_array``."""
    out = values.copy()
    k = (out.shape[1] - 1).bit_length()
    mod = _moduli(z)
    for i in range(k):
        bit = 1 << i
        for v in range(out.shape[1]):
            if v & bit:
                out[:, v, :] -= out[:, v ^ bit, :]
        out %= mod
    return out


def members_mask(coeffs: np.ndarray, z: FilteredGroup) -> np.ndarray:
    """Boolean mask of rows whose coefficients respect the filtration."""
    ok = np.ones(coeffs.shape[0], dtype=bool)
    for s in range(coeffs.shape[1]):
        c = np.asarray(z.level_mults(popcount(s)), dtype=np.int64)
        if c.size:
            ok &= np.all(coeffs[:, s, :] % c == 0, axis=1)
    return ok


def all_coeff_arrays(z: FilteredGroup, n: int) -> np.ndarray:
    """Every coefficient vector of ``C^n(Z)`` as an ``(N, 2**n, rank)`` array."""
    arr = np.zeros((1, 1 << n, z.rank), dtype=np.int64)
    for s in range(1 << n):
        level = min(popcount(s), z.degree + 1)
        members = np.asarray(list(z.level_members(level)), dtype=np.int64).reshape(-1, z.rank)
        m, big = members.shape[0], arr.shape[0]
        arr = np.repeat(arr, m, axis=0)
        arr[:, s, :] = np.tile(members, (big, 1))
    return arr


def all_cubes_array(z: FilteredGroup, n: int) -> np.ndarray:
    """Every cube of ``C^n(Z)`` as vertex tables, shape ``(N, 2**n, rank)``."""
    return evaluate_array(all_coeff_arrays(z, n), z)


def index_array(values: np.ndarray, z: FilteredGroup) -> np.ndarray:
    """Collapse the trailing residue axis to element indices."""
    strides = np.asarray(z.strides, dtype=np.int64)
    if strides.size == 0:
        return np.zeros(values.shape[:-1], dtype=np.int64)
    return values @ strides


def is_cube_array(values: np.ndarray, z: FilteredGroup) -> np.ndarray:
    return members_mask(coeffs_array(values, z), z)


# -- discrete-cube morphisms -----------------------------------------------


@dataclass(frozen=True)
class CubeMorphism:
    """A discrete-cube morphism ``{0,1}^m -> {0,1}^k``.

    ``coords[j]`` gives output coordinate ``j+1`` as ``("0", 0)``, ``("1", 0)``,
    ``("v", i)`` for ``v[i]`` or ``("~v", i)`` for ``1 - v[i]`` (``i`` 1-based).
    """

    m: int
    coords: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        for kind, i in self.coords:
            if kind in ("0", "1"):
                continue
            if kind not in ("v", "~v") or not 1 <= i <= self.m:
                raise ValueError(f"malformed morphism coordinate {(kind, i)!r}")

    @property
    def k(self) -> int:
        return len(self.coords)

    @classmethod
    def parse(cls, m: int, items: Sequence[str]) -> "CubeMorphism":
        coords = []
        for item in items:
            item = item.strip()
            if item in ("0", "1"):
                coords.append((item, 0))
            elif item.startswith("1-v"):
                coords.append(("~v", int(item[3:])))
            elif item.startswith("v"):
                coords.append(("v", int(item[1:])))
            else:
                raise ValueError(f"malformed morphism coordinate {item!r}")
        return cls(m, tuple(coords))

    def __call__(self, u: int) -> int:
        out = 0
        for j, (kind, i) in enumerate(self.coords):
            if kind == "1":
                bit = 1
            elif kind == "0":
                bit = 0
            else:
                bit = (u >> (i - 1)) & 1
                if kind == "~v":
                    bit ^= 1
            out |= bit << j
        return out

    def vertex_map(self) -> list[int]:
        return [self(u) for u in range(1 << self.m)]

    def is_injective(self) -> bool:
        return len(set(self.vertex_map())) == 1 << self.m


def all_cube_morphisms(m: int, k: int) -> Iterator[CubeMorphism]:
    options = [("0", 0), ("1", 0)] + [(kind, i) for i in range(1, m + 1) for kind in ("v", "~v")]
    for coords in itertools.product(options, repeat=k):
        yield CubeMorphism(m, coords)


def injective_cube_morphisms(m: int, k: int) -> Iterator[CubeMorphism]:
    for phi in all_cube_morphisms(m, k):
        if phi.is_injective():
            yield phi


def restrict(q: CubePoint, phi: CubeMorphism) -> CubePoint:
    if phi.k != q.k:
        raise ValueError(f"morphism targets dimension {phi.k}, cube has dimension {q.k}")
    return CubePoint(phi.m, q.group, tuple(q.values[phi(u)] for u in range(1 << phi.m)))
