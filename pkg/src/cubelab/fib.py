"""Morphisms, cube-surjectivity and fibrations between finite filtered groups.

Maps are dense tables from domain element indices to codomain element indices.
Three kinds of check live here:

* cube-based morphism tests that push every cube (or a sample, above the
  budget) through the table;
* an exact derivative test: iterated differences along generators of the
  domain levels must land in the matching codomain levels;
* fibration and cube-surjectivity tests that work coset by coset instead of
  enumerating corners or cubes one at a time.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb, prod
from typing import Callable, Iterator, Sequence

import numpy as np

from .cubes import all_coeff_arrays, coeffs_array, cube_count, evaluate_array, index_array, is_cube_array, popcount, sample_coeff_array
from .group2 import FilteredGroup, GroupElement, is_2_homogeneous, make_h_truncation, quotient_by_level, quotient_coordinates
from .measures import BudgetExceeded, default_budget

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupNilspaceMap:
    domain: FilteredGroup
    codomain: FilteredGroup
    table: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "table", tuple(int(t) for t in self.table))
        if len(self.table) != self.domain.order:
            raise ValueError(f"table needs {self.domain.order} entries, got {len(self.table)}")
        if any(not 0 <= t < self.codomain.order for t in self.table):
            raise ValueError("table entry outside the codomain")

    def __call__(self, x: Sequence[int]) -> GroupElement:
        return self.codomain.element(self.table[self.domain.index(x)])

    @classmethod
    def from_function(cls, domain: FilteredGroup, codomain: FilteredGroup, fn: Callable[[GroupElement], Sequence[int]]) -> "GroupNilspaceMap":
        return cls(domain, codomain, tuple(codomain.index(codomain.reduce(fn(x))) for x in domain.elements()))

    @classmethod
    def identity(cls, z: FilteredGroup) -> "GroupNilspaceMap":
        return cls(z, z, tuple(range(z.order)))

    @classmethod
    def constant(cls, domain: FilteredGroup, codomain: FilteredGroup, y: Sequence[int]) -> "GroupNilspaceMap":
        return cls(domain, codomain, (codomain.index(y),) * domain.order)

    def then(self, other: "GroupNilspaceMap") -> "GroupNilspaceMap":
        """``other`` after ``self``."""
        if other.domain != self.codomain:
            raise ValueError("maps do not compose")
        return GroupNilspaceMap(self.domain, other.codomain, tuple(other.table[t] for t in self.table))

    def is_surjective(self) -> bool:
        return len(set(self.table)) == self.codomain.order

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "codomain": self.codomain.to_json(),
            "table": [list(self.codomain.element(t)) for t in self.table],
        }

    @classmethod
    def from_json(cls, data: dict, domain: FilteredGroup | None = None, codomain: FilteredGroup | None = None) -> "GroupNilspaceMap":
        domain = domain or FilteredGroup.from_json(data["domain"])
        codomain = codomain or FilteredGroup.from_json(data["codomain"])
        table = [codomain.index(codomain.reduce(_as_tuple(y))) for y in data["table"]]
        return cls(domain, codomain, tuple(table))


def _as_tuple(y) -> tuple[int, ...]:
    return tuple(y) if isinstance(y, (list, tuple)) else (int(y),)


def default_nmax(phi: GroupNilspaceMap) -> int:
    return max(phi.domain.degree, phi.codomain.degree) + 1


# -- cube-based morphism test --------------------------------------------------


def non_cube_witness(phi: GroupNilspaceMap, n: int, budget: int | None = None, samples: int = 20000, seed: int = 0):
    """A cube of the domain whose image is not a cube, or ``None``.

    Exhaustive when ``|C^n(domain)|`` fits the budget, otherwise a seeded
    sample whose size is logged.
    """
    x, y = phi.domain, phi.codomain
    budget = default_budget() if budget is None else budget
    table = np.asarray(phi.table, dtype=np.int64)
    total = cube_count(x, n)
    if total <= budget:
        coeffs = all_coeff_arrays(x, n)
    else:
        log.info("sampling %d of %d cubes in dimension %d", samples, total, n)
        coeffs = sample_coeff_array(x, n, samples, np.random.default_rng(seed))
    cubes = evaluate_array(coeffs, x)
    images = y.element_array[table[index_array(cubes, x)]]
    ok = is_cube_array(images, y)
    if ok.all():
        return None
    bad = int(np.argmin(ok))
    return [list(map(int, v)) for v in cubes[bad]]


def is_morphism(phi: GroupNilspaceMap, nmax: int | None = None, budget: int | None = None) -> bool:
    nmax = default_nmax(phi) if nmax is None else nmax
    if nmax < 1:
        raise ValueError("nmax must be at least 1")
    return all(non_cube_witness(phi, n, budget) is None for n in range(nmax + 1))


# -- exact derivative criterion ------------------------------------------------


def _level_steps(z: FilteredGroup) -> list[tuple[int, np.ndarray]]:
    """``(level, permutation)`` for each generator of each level ``1..degree``: ``x -> x + g``."""
    steps = []
    elems = z.element_array
    mod = np.asarray(z.moduli, dtype=np.int64)
    for level in range(1, z.degree + 1):
        for g in z.level_generators(level):
            shifted = (elems + np.asarray(g, dtype=np.int64)) % mod
            steps.append((level, index_array(shifted, z)))
    return steps


def is_polynomial_map(phi: GroupNilspaceMap) -> bool:
    """Exact morphism test via iterated differences.

    For generators ``g_1, ..., g_t`` of levels ``j_1, ..., j_t`` the difference
    ``D_{g_1} ... D_{g_t} phi`` must take values in ``Y_(j_1 + ... + j_t)``.
    Differences of total weight above the codomain degree must vanish, so the
    search stops there.
    """
    x, y = phi.domain, phi.codomain
    ymod = np.asarray(y.moduli, dtype=np.int64)
    start = y.element_array[np.asarray(phi.table, dtype=np.int64)]
    steps = _level_steps(x)
    top = y.degree + 1
    frontier: dict[int, set[bytes]] = {0: {start.tobytes()}}
    shape = start.shape
    for weight in range(top + 1):
        for raw in frontier.get(weight, set()):
            f = np.frombuffer(raw, dtype=np.int64).reshape(shape)
            mults = np.asarray(y.level_mults(weight), dtype=np.int64) if y.rank else None
            if y.rank and np.any(f % mults):
                return False
            if weight >= top:
                continue
            for level, perm in steps:
                w = min(weight + level, top)
                d = (f[perm] - f) % ymod
                frontier.setdefault(w, set()).add(d.tobytes())
    return True


# -- enumeration -----------------------------------------------------------------


def _unit_weights(z: FilteredGroup) -> list[int]:
    """Deepest level containing the unit vector of each coordinate."""
    out = []
    for j in range(z.rank):
        w = 0
        while w + 1 <= z.degree + 1 and z.mult(w + 1, j) == 1:
            w += 1
        out.append(w)
    return out


def enumerate_morphisms(x: FilteredGroup, y: FilteredGroup, budget: int | None = None) -> list[GroupNilspaceMap]:
    """All morphisms ``X -> Y``.

    Every map on a finite product of cyclic groups has a unique Newton
    expansion ``phi(x) = sum_t a_t prod_j C(x_j, t_j)`` with ``0 <= t_j < q_j``.
    For a morphism ``a_t`` is an iterated unit difference at 0, so it lies in
    ``Y_(sum_j t_j w_j)`` where ``w_j`` is the depth of the ``j``-th unit
    vector.  Candidates satisfying that are expanded and then checked with
    ``is_polynomial_map``.
    """
    budget = default_budget() if budget is None else budget
    weights = _unit_weights(x)
    exps = list(itertools.product(*[range(q) for q in x.moduli]))
    choices = []
    for t in exps:
        level = sum(a * w for a, w in zip(t, weights))
        if level > y.degree + 1:
            choices.append([y.zero()])
        else:
            choices.append(list(y.level_members(level)))
    ncand = prod(len(c) for c in choices)
    if ncand > budget:
        raise BudgetExceeded(f"{ncand} candidate expansions exceed budget {budget}")
    elems = x.elements()
    binom = np.asarray([[prod(comb(v, a) for v, a in zip(e, t)) for t in exps] for e in elems], dtype=object)
    ymod = np.asarray(y.moduli, dtype=np.int64)
    strides = np.asarray(y.strides, dtype=np.int64)
    out = []
    for coeffs in itertools.product(*choices):
        a = np.asarray(coeffs, dtype=object).reshape(len(exps), y.rank)
        vals = (binom.dot(a) % ymod).astype(np.int64) if y.rank else np.zeros((len(elems), 0), dtype=np.int64)
        table = tuple(int(v) for v in vals @ strides) if y.rank else (0,) * len(elems)
        phi = GroupNilspaceMap(x, y, table)
        if is_polynomial_map(phi):
            out.append(phi)
    return sorted(out, key=lambda p: p.table)


def all_tables(x: FilteredGroup, y: FilteredGroup) -> Iterator[GroupNilspaceMap]:
    for table in itertools.product(range(y.order), repeat=x.order):
        yield GroupNilspaceMap(x, y, table)


# -- cube-surjectivity -----------------------------------------------------------


def _digits(coeffs: np.ndarray, z: FilteredGroup, shift: int) -> tuple[np.ndarray, np.ndarray]:
    """Split cube coefficients into (coset id, position inside the coset).

    The subgroup is ``C^n`` of the filtration shifted by ``shift`` levels, so a
    coefficient ``z_S`` is read modulo ``Z_(|S| + shift)``.
    """
    n_rows, nverts = coeffs.shape[0], coeffs.shape[1]
    coset = np.zeros(n_rows, dtype=np.int64)
    inner = np.zeros(n_rows, dtype=np.int64)
    for s in range(nverts):
        lvl = popcount(s)
        for j, q in enumerate(z.moduli):
            c_lo, c_hi = z.mult(lvl, j), z.mult(lvl + shift, j)
            u = coeffs[:, s, j] // c_lo
            r = c_hi // c_lo
            coset = coset * r + u % r
            inner = inner * (q // c_hi) + u // r
    return coset, inner


def _subgroup_order(z: FilteredGroup, n: int, shift: int) -> int:
    return prod(z.level_order(popcount(s) + shift) for s in range(1 << n))


def cube_image_count(phi: GroupNilspaceMap, n: int, budget: int | None = None) -> int:
    """``|phi(C^n(X))|`` by hashing every image cube."""
    x, y = phi.domain, phi.codomain
    _check(cube_count(x, n), budget, "cube image count")
    table = np.asarray(phi.table, dtype=np.int64)
    cubes = evaluate_array(all_coeff_arrays(x, n), x)
    images = y.element_array[table[index_array(cubes, x)]]
    coset, inner = _digits(coeffs_array(images, y), y, 0)
    return len(np.unique(inner))


def _check(cost: int, budget: int | None, what: str) -> None:
    budget = default_budget() if budget is None else budget
    if cost > budget:
        raise BudgetExceeded(f"{what} needs {cost} cubes, budget is {budget}")


@lru_cache(maxsize=8)
def _domain_split(x: FilteredGroup, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertex indices of every ``n``-cube of ``x`` and the shifted-subgroup coset of each."""
    coeffs = all_coeff_arrays(x, n)
    coset, _ = _digits(coeffs, x, 1)
    return index_array(evaluate_array(coeffs, x), x), coset


def is_cube_surjective_at(phi: GroupNilspaceMap, n: int, budget: int | None = None) -> bool:
    """Surjectivity of ``phi`` on ``n``-cubes.

    An ``n``-cube is a pair of ``(n-1)``-cubes in one coset of the subgroup
    ``C^(n-1)`` of the shifted filtration.  Grouping domain ``(n-1)``-cubes by
    that coset gives image sets ``I``; every target pair ``(p0, p1)`` in one
    target coset must lie in a common ``I``.
    """
    x, y = phi.domain, phi.codomain
    if n == 0:
        return phi.is_surjective()
    if cube_count(x, n) < cube_count(y, n):
        return False
    _check(cube_count(x, n - 1), budget, "cube surjectivity")
    table = np.asarray(phi.table, dtype=np.int64)
    vertex_idx, src_coset = _domain_split(x, n - 1)
    images = y.element_array[table[vertex_idx]]
    dst_coset, dst_inner = _digits(coeffs_array(images, y), y, 1)
    coset_size = _subgroup_order(y, n - 1, 1)
    n_dst_cosets = cube_count(y, n - 1) // coset_size
    n_src_cosets = int(src_coset.max()) + 1
    # a morphism sends each source coset into a single target coset
    target_of = np.full(n_src_cosets, -1, dtype=np.int64)
    target_of[src_coset] = dst_coset
    if np.any(target_of[src_coset] != dst_coset):
        raise ValueError("map is not a morphism: a coset is split across target cosets")
    if len(np.unique(dst_coset)) < n_dst_cosets:
        return False
    keys = np.unique(src_coset * coset_size + dst_inner)
    src, inner = keys // coset_size, keys % coset_size
    image_size = np.bincount(src, minlength=n_src_cosets)
    for lam in range(n_dst_cosets):
        owners = np.flatnonzero(target_of == lam)
        if np.any(image_size[owners] == coset_size):
            continue
        rank = np.full(n_src_cosets, -1, dtype=np.int64)
        rank[owners] = np.arange(len(owners))
        sel = rank[src] >= 0
        members = np.zeros((len(owners), coset_size), dtype=np.float32)
        members[rank[src[sel]], inner[sel]] = 1.0
        # (a, b) is covered when some image set contains both
        if not np.all(members.T @ members > 0):
            return False
    return True


def is_cube_surjective(phi: GroupNilspaceMap, nmax: int | None = None, budget: int | None = None) -> bool:
    nmax = default_nmax(phi) if nmax is None else nmax
    return all(is_cube_surjective_at(phi, n, budget) for n in range(nmax + 1))


# -- fibrations ------------------------------------------------------------------


def fibration_failure(phi: GroupNilspaceMap) -> dict | None:
    """First ``(n, x)`` where corner completions fail to lift, or ``None``.

    The completions of an ``n``-corner with one completion ``x`` are exactly
    ``x + X_(n)``, and those of its image are ``phi(x) + Y_(n)``.  Since a
    morphism maps the first set into the second, lifting holds in dimension
    ``n`` iff ``phi(x + X_(n)) = phi(x) + Y_(n)`` for every ``x``.  Above the
    codomain degree the target set is a single point.
    """
    x, y = phi.domain, phi.codomain
    table = phi.table
    for n in range(0, y.degree + 1):
        src = [x.index(h) for h in x.level_members(min(n, x.degree + 1))]
        need = y.level_order(n)
        src_elems = [x.element(i) for i in src]
        for xi in range(x.order):
            base = x.element(xi)
            hit = {table[x.index(x.add(base, h))] for h in src_elems}
            if len(hit) != need:
                return {"dimension": n, "point": list(base), "reached": len(hit), "needed": need}
    return None


def is_fibration(phi: GroupNilspaceMap) -> bool:
    return fibration_failure(phi) is None


# -- canonical maps and searches ---------------------------------------------


def canonical_projection(z: FilteredGroup, j: int) -> GroupNilspaceMap:
    """``Z -> Z / Z_(j)``."""
    quotient = quotient_by_level(z, j)
    keep = quotient_coordinates(z, j)
    return GroupNilspaceMap.from_function(z, quotient, lambda e: tuple(e[t] for t in keep))


def coordinate_maps(h: FilteredGroup, z: FilteredGroup) -> Iterator[GroupNilspaceMap]:
    """Maps sending target coordinate ``j`` to a reduction of some source coordinate."""
    options = []
    for q in z.moduli:
        options.append([i for i, p in enumerate(h.moduli) if p % q == 0])
    for choice in itertools.product(*options):
        yield GroupNilspaceMap.from_function(h, z, lambda e, c=choice: tuple(e[i] for i in c))


def find_truncation_fibration(
    z: FilteredGroup, max_k: int = 2, max_width: int = 2
) -> tuple[tuple[int, tuple[int, ...]], GroupNilspaceMap] | None:
    """Search small universal truncations for a fibration onto ``z``."""
    if not is_2_homogeneous(z):
        raise ValueError("target must be 2-homogeneous")
    for k in range(max(1, z.effective_degree), max_k + 1):
        for widths in itertools.product(range(max_width + 1), repeat=k):
            h = make_h_truncation(k, widths)
            for phi in coordinate_maps(h, z):
                if is_polynomial_map(phi) and is_fibration(phi):
                    return (k, tuple(widths)), phi
    return None
