"""Brute-force reference implementations used to validate the library.

Nothing here calls the code path it is checking: cube sets come from vertex
by vertex search with face constraints, measures from plain loops with
Fractions, fibrations from literal corner lifting.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

import numpy as np

from cubelab.group2 import FilteredGroup


def _level_ok(z: FilteredGroup, x, level: int) -> bool:
    return all(int(v) % z.mult(level, j) == 0 for j, v in enumerate(x))


def _bits(x: int) -> int:
    return bin(x).count("1")


def brute_cube_array(z: FilteredGroup, n: int) -> np.ndarray:
    """All vertex tables ``{0,1}^n -> Z`` whose face alternating sums lie in the right levels.

    Vertices are assigned in increasing bitmask order; a face is checked as soon
    as its largest vertex ``free | fixed`` is assigned.
    """
    elems = np.asarray(z.elements(), dtype=np.int64).reshape(z.order, z.rank)
    mod = np.asarray(z.moduli, dtype=np.int64)
    partial = np.zeros((1, 0, z.rank), dtype=np.int64)
    for v in range(1 << n):
        rows = partial.shape[0]
        ext = np.concatenate(
            [np.repeat(partial, z.order, axis=0), np.tile(elems, (rows, 1))[:, None, :]], axis=1
        )
        keep = np.ones(ext.shape[0], dtype=bool)
        for free in range(v + 1):
            if free & ~v:
                continue
            fixed = v & ~free
            s = _bits(free)
            acc = np.zeros((ext.shape[0], z.rank), dtype=np.int64)
            t = free
            while True:
                sign = -1 if (s - _bits(t)) % 2 else 1
                acc += sign * ext[:, fixed | t, :]
                if t == 0:
                    break
                t = (t - 1) & free
            acc %= mod if z.rank else 1
            mults = np.asarray([z.mult(s, j) for j in range(z.rank)], dtype=np.int64)
            if z.rank:
                keep &= np.all(acc % mults == 0, axis=1)
        partial = ext[keep]
    return partial


def cube_codes(cubes: np.ndarray, z: FilteredGroup) -> np.ndarray:
    """Sorted integer codes of vertex tables (element indices in base ``|Z|``)."""
    strides = np.asarray(z.strides, dtype=np.int64)
    idx = cubes @ strides if z.rank else np.zeros(cubes.shape[:2], dtype=np.int64)
    code = np.zeros(cubes.shape[0], dtype=np.int64)
    for v in range(cubes.shape[1]):
        code = code * z.order + idx[:, v]
    return np.sort(code)


@lru_cache(maxsize=None)
def brute_cube_set(z: FilteredGroup, n: int) -> frozenset:
    return frozenset(tuple(tuple(int(c) for c in row) for row in cube) for cube in brute_cube_array(z, n))


def brute_sample_measure(f_values, n: int, forms, k: int) -> dict:
    counts: dict = {}
    total = 0
    for a in itertools.product(range(1 << n), repeat=k + 1):
        out = []
        for L in forms:
            x = a[0]
            for i in range(k):
                if (L >> i) & 1:
                    x ^= a[i + 1]
            out.append(f_values[x])
        key = tuple(out)
        counts[key] = counts.get(key, 0) + 1
        total += 1
    return {o: Fraction(c, total) for o, c in counts.items()}


def brute_zeta(z: FilteredGroup, kernel, forms, k: int) -> dict:
    """``kernel[i]`` is the label law at element index ``i``; pure-Python sum over coefficients."""
    per_subset = []
    for S in range(1 << k):
        per_subset.append([x for x in itertools.product(*[range(q) for q in z.moduli]) if _level_ok(z, x, _bits(S))])
    n_labels = len(kernel[0])
    acc: dict = {}
    ncubes = 0
    for coeffs in itertools.product(*per_subset):
        ncubes += 1
        idx = []
        for L in forms:
            val = [0] * z.rank
            for S in range(1 << k):
                if S & L == S:
                    val = [(a + b) % q for a, b, q in zip(val, coeffs[S], z.moduli)]
            idx.append(z.index(val))
        for labels in itertools.product(range(n_labels), repeat=len(forms)):
            w = Fraction(1)
            for i, b in zip(idx, labels):
                w *= kernel[i][b]
                if not w:
                    break
            if w:
                acc[labels] = acc.get(labels, Fraction(0)) + w
    return {o: w / ncubes for o, w in acc.items()}


def brute_degree(table, n: int, modulus: int) -> int:
    """Iterated differences along every nonzero direction."""
    level = {tuple(t % modulus for t in table)}
    d = 0
    while True:
        level = {t for t in level if any(t)}
        if not level:
            return max(d - 1, 0)
        level = {
            tuple((t[x ^ h] - t[x]) % modulus for x in range(1 << n)) for t in level for h in range(1, 1 << n)
        }
        d += 1


def mobius(values: np.ndarray, modulus: int) -> np.ndarray:
    """Möbius transform over the last axis (length ``2**n``)."""
    out = values.copy()
    size = out.shape[-1]
    bit = 1
    while bit < size:
        for v in range(size):
            if v & bit:
                out[..., v] -= out[..., v ^ bit]
        bit <<= 1
    return out % modulus


def cube_morphism_mask(tables: np.ndarray, n: int, target: FilteredGroup, max_dim: int) -> np.ndarray:
    """Which rows of ``tables`` (values in the cyclic target) send every cube of ``D_1(F_2^n)`` to a cube.

    The domain cubes of dimension ``d`` are the maps ``u -> x + sum_i u_i h_i``.
    """
    q = target.moduli[0]
    ok = np.ones(tables.shape[0], dtype=bool)
    for dim in range(max_dim + 1):
        cubes = []
        for pts in itertools.product(range(1 << n), repeat=dim + 1):
            cube = []
            for u in range(1 << dim):
                x = pts[0]
                for i in range(dim):
                    if (u >> i) & 1:
                        x ^= pts[i + 1]
                cube.append(x)
            cubes.append(cube)
        cubes = np.unique(np.asarray(cubes, dtype=np.int64), axis=0)
        for start in range(0, tables.shape[0], 256):
            sl = slice(start, start + 256)
            vals = tables[sl][:, cubes]
            co = mobius(vals, q)
            good = np.ones(vals.shape[0], dtype=bool)
            for S in range(1 << dim):
                good &= np.all(co[..., S] % target.mult(_bits(S), 0) == 0, axis=1)
            ok[sl] &= good
    return ok


def brute_fibration(x: FilteredGroup, y: FilteredGroup, table, nmax: int) -> bool:
    """Literal corner lifting in every dimension up to ``nmax``."""
    for n in range(nmax + 1):
        top = (1 << n) - 1
        xcubes = brute_cube_set(x, n)
        ycubes = brute_cube_set(y, n)
        x_completions: dict = {}
        for cube in xcubes:
            x_completions.setdefault(cube[:top], set()).add(cube[top])
        y_completions: dict = {}
        for cube in ycubes:
            y_completions.setdefault(cube[:top], set()).add(cube[top])
        for corner, comps in x_completions.items():
            image = tuple(y.element(table[x.index(v)]) for v in corner)
            reached = {y.element(table[x.index(c)]) for c in comps}
            if not y_completions.get(image, set()) <= reached:
                return False
    return True


def brute_is_morphism(x: FilteredGroup, y: FilteredGroup, table, nmax: int) -> bool:
    for n in range(nmax + 1):
        ycubes = brute_cube_set(y, n)
        for cube in brute_cube_set(x, n):
            if tuple(y.element(table[x.index(v)]) for v in cube) not in ycubes:
                return False
    return True


def brute_cube_image_size(x: FilteredGroup, y: FilteredGroup, table, n: int) -> int:
    return len({tuple(table[x.index(v)] for v in cube) for cube in brute_cube_set(x, n)})


def brute_consistent_tuples(forms_prime, s: int, k: int, r: int, ell: int, dims, offset: int = 1) -> set:
    """Tuples ``(P(L_i(x)))_i`` over polynomials of degree <= k and depth <= r.

    ``forms_prime`` are the non-leading parts of affine forms in ``F_2^s``;
    ``x = (x_0, ..., x_{s-1})`` ranges over ``(F_2^n)^s`` for ``n`` in ``dims``.
    Values are reported in the target ``Z/2^(k-ell+1)``.
    """
    D = k + 1
    mod = 1 << D
    e = k - ell + 1
    shift = D - e
    out = set()
    for n in dims:
        tables = [(0,) * (1 << n)] if n == 0 else [
            (0,) + rest for rest in itertools.product(range(mod), repeat=(1 << n) - 1)
        ]
        polys = []
        for t in tables:
            if brute_degree(t, n, mod) > k:
                continue
            den = 0
            for v in t:
                if v % mod:
                    val = (v & -v).bit_length() - 1
                    den = max(den, D - val)
            if max(0, den - offset) > r:
                continue
            polys.append(t)
        for xs in itertools.product(range(1 << n), repeat=s):
            points = []
            for L in forms_prime:
                p = xs[0]
                for i in range(s - 1):
                    if (L >> i) & 1:
                        p ^= xs[i + 1]
                points.append(p)
            for t in polys:
                vals = [t[p] for p in points]
                for c in range(mod):
                    out.add(tuple(((v + c) % mod) >> shift if (v + c) % (1 << shift) == 0 else None for v in vals))
    return {b for b in out if None not in b}


def consistency_sweep(k: int, r: int, ell: int, is_member, dims_for=lambda s: (s - 1,)) -> tuple[int, int, int]:
    """Compare ``is_member(b, forms_prime, s)`` with brute force on every system of m <= 4 distinct forms, s <= 3.

    Returns ``(systems, candidates, mismatches)``.
    """
    q = 1 << (k - ell + 1)
    systems = candidates = mismatches = 0
    for s in (1, 2, 3):
        space = range(1 << (s - 1))
        for m in range(1, 5):
            for forms in itertools.combinations(space, m):
                truth = brute_consistent_tuples(forms, s, k, r, ell, dims_for(s))
                systems += 1
                for b in itertools.product(range(q), repeat=m):
                    candidates += 1
                    if is_member(b, forms, s) != (b in truth):
                        mismatches += 1
    return systems, candidates, mismatches


def brute_morphism_mask(tables: np.ndarray, x: FilteredGroup, y: FilteredGroup, nmax: int) -> np.ndarray:
    """Rows of ``tables`` (element indices) sending every brute-force cube of ``x`` to one of ``y``."""
    tables = np.asarray(tables, dtype=np.int64)
    ok = np.ones(tables.shape[0], dtype=bool)
    for n in range(nmax + 1):
        xs = brute_cube_array(x, n)
        xidx = xs @ np.asarray(x.strides, dtype=np.int64) if x.rank else np.zeros(xs.shape[:2], dtype=np.int64)
        ycodes = cube_codes(brute_cube_array(y, n), y)
        weights = y.order ** np.arange((1 << n) - 1, -1, -1, dtype=np.int64)
        for start in range(0, tables.shape[0], 64):
            img = tables[start:start + 64][:, xidx]
            codes = img @ weights
            ok[start:start + 64] &= np.isin(codes, ycodes).all(axis=1)
    return ok
