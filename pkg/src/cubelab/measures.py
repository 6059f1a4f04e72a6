"""Sampling measures of functions against linear-form systems, and limit marginals.

For ``f: F_2^n -> B`` and forms ``L_1..L_m`` in ``F_2^k`` the sampling measure is
the law of ``(f(A(L_1)), ..., f(A(L_m)))`` for a uniform affine map
``A(v) = a_0 + sum_i v[i] a_i``.  For a 2-homogeneous filtered group ``Z`` and a
label kernel ``m: Z -> P(B)`` the limit marginal averages the product measure
``m(q(L_1)) x ... x m(q(L_m))`` over uniform cubes ``q`` in ``C^k(Z)``.

Both come in an exact mode (enumeration with rational weights) and a Monte
Carlo mode (float frequencies, seeded).
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Callable, Sequence, Union

import numpy as np

from .cubes import all_cubes_array, cube_count, evaluate_array, index_array, sample_coeff_array
from .group2 import FilteredGroup, is_2_homogeneous

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 1 << 24
_CHUNK = 1 << 18

Weight = Union[Fraction, float]


class BudgetExceeded(RuntimeError):
    """Exact enumeration would exceed the configured iteration budget."""


def default_budget() -> int:
    env = os.environ.get("CUBELAB_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


def _check_budget(cost: int, budget: int | None, what: str) -> None:
    budget = default_budget() if budget is None else budget
    if cost > budget:
        raise BudgetExceeded(f"{what} needs {cost} iterations, budget is {budget}")


@dataclass(frozen=True)
class MonteCarlo:
    n_samples: int
    seed: int
    shards: int = 1

    def __post_init__(self) -> None:
        if self.n_samples < 1 or self.shards < 1:
            raise ValueError("n_samples and shards must be positive")

    def generators(self) -> list[tuple[np.random.Generator, int]]:
        """One generator per shard, with the sample count it is responsible for."""
        seqs = np.random.SeedSequence(self.seed).spawn(self.shards)
        base, extra = divmod(self.n_samples, self.shards)
        return [(np.random.default_rng(s), base + (i < extra)) for i, s in enumerate(seqs)]


Mode = Union[str, MonteCarlo]


# -- domain types ------------------------------------------------------------


def bits_to_mask(bits: Sequence[int]) -> int:
    return sum((int(b) & 1) << i for i, b in enumerate(bits))


def mask_to_bits(mask: int, k: int) -> list[int]:
    return [(mask >> i) & 1 for i in range(k)]


@dataclass(frozen=True)
class LinearFormSystem:
    """Ordered distinct forms in ``F_2^k``, stored as bitmasks (bit ``i-1`` = coefficient ``i``)."""

    k: int
    forms: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "forms", tuple(int(f) for f in self.forms))
        if self.k < 0:
            raise ValueError("ambient dimension must be non-negative")
        if len(set(self.forms)) != len(self.forms):
            raise ValueError("forms must be distinct")
        if any(not 0 <= f < (1 << self.k) for f in self.forms):
            raise ValueError(f"forms do not fit in {self.k} bits")

    def __len__(self) -> int:
        return len(self.forms)

    def embed(self, k: int) -> "LinearFormSystem":
        """The same forms viewed in a larger ambient space."""
        if k < self.k:
            raise ValueError("cannot embed into a smaller space")
        return LinearFormSystem(k, self.forms)

    @classmethod
    def full(cls, k: int) -> "LinearFormSystem":
        return cls(k, tuple(range(1 << k)))

    def to_json(self) -> dict:
        return {"k": self.k, "forms": [mask_to_bits(f, self.k) for f in self.forms]}

    @classmethod
    def from_json(cls, data: dict) -> "LinearFormSystem":
        k = int(data["k"])
        forms = []
        for f in data["forms"]:
            if len(f) != k:
                raise ValueError(f"form {f} does not have {k} coordinates")
            forms.append(bits_to_mask(f))
        return cls(k, tuple(forms))


@dataclass(frozen=True)
class FunctionTable:
    n: int
    alphabet: tuple[str, ...]
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphabet", tuple(str(a) for a in self.alphabet))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.values) != 1 << self.n:
            raise ValueError(f"need {1 << self.n} values, got {len(self.values)}")
        if any(not 0 <= v < len(self.alphabet) for v in self.values):
            raise ValueError("label index out of range")

    def lift(self, n: int) -> "FunctionTable":
        """Same function in ``n >= self.n`` variables, ignoring the new ones."""
        if n < self.n:
            raise ValueError("cannot lift to fewer variables")
        mask = (1 << self.n) - 1
        return FunctionTable(n, self.alphabet, tuple(self.values[v & mask] for v in range(1 << n)))

    @classmethod
    def from_callable(cls, n: int, alphabet: Sequence[str], fn: Callable[[int], int]) -> "FunctionTable":
        return cls(n, tuple(alphabet), tuple(fn(v) for v in range(1 << n)))

    def to_json(self) -> dict:
        return {"n": self.n, "alphabet": list(self.alphabet), "values": list(self.values)}

    @classmethod
    def from_json(cls, data: dict) -> "FunctionTable":
        return cls(int(data["n"]), tuple(data["alphabet"]), tuple(data["values"]))


@dataclass(frozen=True)
class FiniteDistribution:
    """Probabilities of label tuples of a fixed length.

    Outcomes are tuples of indices into ``alphabet``.  Exact distributions
    carry ``Fraction`` weights summing to one; estimated ones carry floats
    together with the sample count and seed that produced them.
    """

    alphabet: tuple[str, ...]
    length: int
    weights: dict[tuple[int, ...], Weight]
    exact: bool = True
    n_samples: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        clean = {tuple(int(i) for i in o): w for o, w in self.weights.items() if w != 0}
        object.__setattr__(self, "weights", dict(sorted(clean.items())))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        for o, w in self.weights.items():
            if len(o) != self.length:
                raise ValueError(f"outcome {o} does not have length {self.length}")
            if w < 0:
                raise ValueError("negative weight")
        total = sum(self.weights.values())
        if self.exact:
            if any(not isinstance(w, Fraction) for w in self.weights.values()):
                raise TypeError("exact distributions need Fraction weights")
            if total != 1:
                raise ValueError(f"weights sum to {total}, not 1")
        elif abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")

    def __getitem__(self, outcome: Sequence[int]) -> Weight:
        return self.weights.get(tuple(outcome), Fraction(0) if self.exact else 0.0)

    def support(self) -> list[tuple[int, ...]]:
        return list(self.weights)

    def same_space(self, other: "FiniteDistribution") -> bool:
        return self.alphabet == other.alphabet and self.length == other.length

    def pushforward(self, positions: Sequence[int]) -> "FiniteDistribution":
        """Law of the sub-tuple ``(t[p] for p in positions)``."""
        acc: dict[tuple[int, ...], Weight] = {}
        zero = Fraction(0) if self.exact else 0.0
        for o, w in self.weights.items():
            key = tuple(o[p] for p in positions)
            acc[key] = acc.get(key, zero) + w
        return FiniteDistribution(self.alphabet, len(positions), acc, self.exact, self.n_samples, self.seed)

    def as_float(self) -> "FiniteDistribution":
        if not self.exact:
            return self
        return FiniteDistribution(
            self.alphabet, self.length, {o: float(w) for o, w in self.weights.items()}, exact=False
        )

    def outcome_label(self, outcome: Sequence[int]) -> str:
        return ",".join(self.alphabet[i] for i in outcome)

    def to_json(self) -> dict:
        out: dict = {"mode": "exact" if self.exact else "estimated", "alphabet": list(self.alphabet), "length": self.length}
        if not self.exact:
            out["n_samples"] = self.n_samples
            out["seed"] = self.seed
        out["outcomes"] = {
            self.outcome_label(o): (str(w) if self.exact else float(w)) for o, w in self.weights.items()
        }
        return out

    @classmethod
    def from_json(cls, data: dict) -> "FiniteDistribution":
        alphabet = tuple(data["alphabet"])
        index = {a: i for i, a in enumerate(alphabet)}
        exact = data["mode"] == "exact"
        weights = {}
        for key, w in data["outcomes"].items():
            labels = key.split(",") if key else []
            weights[tuple(index[a] for a in labels)] = Fraction(w) if exact else float(w)
        return cls(alphabet, int(data["length"]), weights, exact, data.get("n_samples"), data.get("seed"))

    def to_csv(self) -> str:
        lines = ["outcome,probability"]
        for o, w in self.weights.items():
            lines.append(f"\"{self.outcome_label(o)}\",{w}")
        return "\n".join(lines) + "\n"


def dirac(alphabet: Sequence[str], outcome: Sequence[int]) -> FiniteDistribution:
    return FiniteDistribution(tuple(alphabet), len(outcome), {tuple(outcome): Fraction(1)})


def product_distribution(parts: Sequence[FiniteDistribution]) -> FiniteDistribution:
    """Independent concatenation; all parts share one alphabet."""
    alphabet = parts[0].alphabet
    exact = all(p.exact for p in parts)
    acc: dict[tuple[int, ...], Weight] = {(): Fraction(1) if exact else 1.0}
    for p in parts:
        if p.alphabet != alphabet:
            raise ValueError("alphabets differ")
        src = p if exact else p.as_float()
        acc = {o + o2: w * w2 for o, w in acc.items() for o2, w2 in src.weights.items()}
    return FiniteDistribution(alphabet, sum(p.length for p in parts), acc, exact)


@dataclass(frozen=True)
class LimitObject:
    """A 2-homogeneous filtered group with a label kernel.

    ``kernel[x]`` lists the probabilities of each label at the element with
    index ``x``.
    """

    group: FilteredGroup
    alphabet: tuple[str, ...]
    kernel: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if not is_2_homogeneous(self.group):
            raise ValueError("limit objects need a 2-homogeneous filtration")
        kernel = tuple(tuple(Fraction(w) for w in row) for row in self.kernel)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "alphabet", tuple(str(a) for a in self.alphabet))
        if len(kernel) != self.group.order:
            raise ValueError("kernel needs one row per group element")
        for row in kernel:
            if len(row) != len(self.alphabet) or any(w < 0 for w in row) or sum(row) != 1:
                raise ValueError(f"kernel row {row} is not a probability vector")

    @classmethod
    def deterministic(cls, group: FilteredGroup, alphabet: Sequence[str], label: Callable[[tuple], int]) -> "LimitObject":
        rows = []
        for x in group.elements():
            row = [Fraction(0)] * len(alphabet)
            row[label(x)] = Fraction(1)
            rows.append(tuple(row))
        return cls(group, tuple(alphabet), tuple(rows))

    def is_deterministic(self) -> bool:
        return all(max(row) == 1 for row in self.kernel)

    def labels(self) -> list[int]:
        """Label of each element; only meaningful for deterministic kernels."""
        return [row.index(max(row)) for row in self.kernel]

    def to_json(self) -> dict:
        return {
            "group": self.group.to_json(),
            "alphabet": list(self.alphabet),
            "kernel": [[str(w) for w in row] for row in self.kernel],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LimitObject":
        group = FilteredGroup.from_json(data["group"])
        if "labels" in data:
            labels = [int(v) for v in data["labels"]]
            return cls.deterministic(group, data["alphabet"], lambda x: labels[group.index(x)])
        return cls(group, tuple(data["alphabet"]), tuple(tuple(Fraction(w) for w in row) for row in data["kernel"]))


# -- tallying helpers --------------------------------------------------------


def _encode_rows(labels: np.ndarray, base: int) -> np.ndarray:
    code = np.zeros(labels.shape[0], dtype=np.int64)
    for j in range(labels.shape[1]):
        code = code * base + labels[:, j]
    return code


def _decode(code: int, base: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        code, r = divmod(code, base)
        out.append(r)
    return tuple(reversed(out))


def _tally(codes: np.ndarray) -> dict[int, int]:
    uniq, counts = np.unique(codes, return_counts=True)
    return {int(u): int(c) for u, c in zip(uniq, counts)}


def _merge(parts: Sequence[dict[int, int]]) -> dict[int, int]:
    out: dict[int, int] = {}
    for part in parts:
        for code, c in part.items():
            out[code] = out.get(code, 0) + c
    return out


def _to_distribution(counts: dict[int, int], total: int, alphabet, length: int, mode: Mode) -> FiniteDistribution:
    base = len(alphabet)
    if isinstance(mode, MonteCarlo):
        weights = {_decode(c, base, length): n / total for c, n in counts.items()}
        return FiniteDistribution(alphabet, length, weights, exact=False, n_samples=mode.n_samples, seed=mode.seed)
    weights = {_decode(c, base, length): Fraction(n, total) for c, n in counts.items()}
    return FiniteDistribution(alphabet, length, weights)


def _check_mode(mode: Mode) -> None:
    if not (mode == "exact" or isinstance(mode, MonteCarlo)):
        raise ValueError(f"unknown mode {mode!r}")


# -- sampling measure --------------------------------------------------------


def _affine_images(a: np.ndarray, forms: Sequence[int]) -> np.ndarray:
    """``(N, m)`` array of ``A(L)`` for parameter rows ``a = (a_0, ..., a_k)``."""
    cols = []
    for form in forms:
        img = a[:, 0].copy()
        i = 0
        while form >> i:
            if (form >> i) & 1:
                img ^= a[:, i + 1]
            i += 1
        cols.append(img)
    return np.stack(cols, axis=1)


def sample_measure(
    f: FunctionTable,
    system: LinearFormSystem,
    mode: Mode = "exact",
    budget: int | None = None,
    jobs: int = 1,
) -> FiniteDistribution:
    """Distribution of ``(f(A(L)))_L`` over uniform affine maps ``A``."""
    _check_mode(mode)
    if not system.forms:
        raise ValueError("empty form system")
    n, k = f.n, system.k
    values = np.asarray(f.values, dtype=np.int64)
    base = len(f.alphabet)

    def tally(a: np.ndarray) -> dict[int, int]:
        return _tally(_encode_rows(values[_affine_images(a, system.forms)], base))

    if isinstance(mode, MonteCarlo):
        parts = []
        for rng, size in mode.generators():
            a = rng.integers(0, 1 << n, size=(size, k + 1), dtype=np.int64)
            parts.append(tally(a))
        return _to_distribution(_merge(parts), mode.n_samples, f.alphabet, len(system), mode)

    total = 1 << (n * (k + 1))
    _check_budget(total, budget, "exact sampling measure")
    mask = (1 << n) - 1

    def chunk(start: int) -> dict[int, int]:
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        a = np.stack([(idx >> (n * i)) & mask for i in range(k + 1)], axis=1)
        return tally(a)

    starts = range(0, total, _CHUNK)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    return _to_distribution(_merge(parts), total, f.alphabet, len(system), mode)


# -- limit marginals ---------------------------------------------------------


def _kernel_integers(lim: LimitObject) -> tuple[np.ndarray, int]:
    den = 1
    for row in lim.kernel:
        for w in row:
            den = lcm(den, w.denominator)
    W = [[int(w * den) for w in row] for row in lim.kernel]
    return np.asarray(W, dtype=object), den


def _accumulate_products(idx: np.ndarray, counts: np.ndarray, lim: LimitObject) -> tuple[dict[int, int], int]:
    """Sum over rows of ``count * prod_j W[idx_j, b_j]`` for every label tuple ``b``."""
    W, den = _kernel_integers(lim)
    base = len(lim.alphabet)
    m = idx.shape[1]
    bound = int(counts.sum()) * den**m
    dtype = np.int64 if bound < (1 << 62) else object
    Wd = W.astype(dtype)
    total = np.zeros(base**m, dtype=dtype)
    rows_per_chunk = max(1, (1 << 20) // max(1, base**m))
    for start in range(0, idx.shape[0], rows_per_chunk):
        sl = slice(start, start + rows_per_chunk)
        arr = Wd[idx[sl, 0]]
        for j in range(1, m):
            arr = (arr[:, :, None] * Wd[idx[sl, j]][:, None, :]).reshape(arr.shape[0], -1)
        total = total + (arr * counts[sl].astype(dtype)[:, None]).sum(axis=0)
    out = {c: int(v) for c, v in enumerate(total) if v}
    return out, den**m


def zeta_marginal(
    lim: LimitObject,
    system: LinearFormSystem,
    mode: Mode = "exact",
    budget: int | None = None,
) -> FiniteDistribution:
    """Law of labels drawn from ``m(q(L))`` for a uniform cube ``q`` of ``C^k(Z)``."""
    _check_mode(mode)
    if not system.forms:
        raise ValueError("empty form system")
    z, k = lim.group, system.k
    m = len(system)
    base = len(lim.alphabet)
    forms = list(system.forms)

    if isinstance(mode, MonteCarlo):
        cum = np.cumsum(np.asarray([[float(w) for w in row] for row in lim.kernel]), axis=1)
        cum[:, -1] = 1.0
        parts = []
        for rng, size in mode.generators():
            vals = evaluate_array(sample_coeff_array(z, k, size, rng), z)
            idx = index_array(vals[:, forms, :], z)
            u = rng.random(size=(size, m))
            labels = (u[:, :, None] < cum[idx]).argmax(axis=2)
            parts.append(_tally(_encode_rows(labels, base)))
        return _to_distribution(_merge(parts), mode.n_samples, lim.alphabet, m, mode)

    ncubes = cube_count(z, k)
    _check_budget(ncubes * m, budget, "exact limit marginal")
    vals = all_cubes_array(z, k)
    idx = index_array(vals[:, forms, :], z)
    if lim.is_deterministic():
        labels = np.asarray(lim.labels(), dtype=np.int64)[idx]
        counts = _tally(_encode_rows(labels, base))
        return _to_distribution(counts, ncubes, lim.alphabet, m, mode)
    uniq, counts = np.unique(idx, axis=0, return_counts=True)
    sums, scale = _accumulate_products(uniq, counts, lim)
    weights = {_decode(c, base, m): Fraction(v, ncubes * scale) for c, v in sums.items()}
    return FiniteDistribution(lim.alphabet, m, weights)


# -- distances and reports ---------------------------------------------------


def tv_distance(d1: FiniteDistribution, d2: FiniteDistribution) -> Weight:
    """Half the l1 distance; exact when both inputs are exact."""
    if not d1.same_space(d2):
        raise ValueError("distributions live on different outcome spaces")
    if d1.exact and d2.exact:
        keys = set(d1.weights) | set(d2.weights)
        return sum((abs(d1[o] - d2[o]) for o in keys), Fraction(0)) / 2
    a, b = d1.as_float(), d2.as_float()
    keys = set(a.weights) | set(b.weights)
    return 0.5 * sum(abs(a[o] - b[o]) for o in keys)


def _fmt(x: Weight) -> str | float:
    return str(x) if isinstance(x, Fraction) else float(x)


@dataclass
class ConvergenceReport:
    systems: list[dict] = field(default_factory=list)
    mixed_modes: bool = False

    def to_json(self) -> dict:
        return {"mixed_modes": self.mixed_modes, "systems": self.systems}


def convergence_report(
    fs: Sequence[FunctionTable],
    systems: Sequence[LinearFormSystem],
    mode: Mode = "exact",
    limit: LimitObject | None = None,
    limit_mode: Mode | None = None,
    budget: int | None = None,
) -> ConvergenceReport:
    """Distances between consecutive sampling measures, and to the limit marginal if given."""
    report = ConvergenceReport()
    for system in systems:
        mus = [sample_measure(f, system, mode, budget) for f in fs]
        entry: dict = {
            "forms": system.to_json(),
            "arities": [f.n for f in fs],
            "consecutive": [_fmt(tv_distance(a, b)) for a, b in zip(mus, mus[1:])],
        }
        modes = {mu.exact for mu in mus}
        if limit is not None:
            ref = zeta_marginal(limit, system, limit_mode or mode, budget)
            entry["to_reference"] = [_fmt(tv_distance(mu, ref)) for mu in mus]
            modes.add(ref.exact)
        if len(modes) > 1:
            report.mixed_modes = True
            log.warning("mixing exact and estimated distributions; distances are floats")
        report.systems.append(entry)
    return report


# -- affine relabelling --------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """``x -> Mx + t`` on ``F_2^k``; ``rows[i]`` is row ``i`` of ``M`` as a bitmask."""

    k: int
    rows: tuple[int, ...]
    shift: int = 0

    def __call__(self, x: int) -> int:
        out = 0
        for i, row in enumerate(self.rows):
            out |= (bin(row & x).count("1") & 1) << i
        return out ^ self.shift

    def is_invertible(self) -> bool:
        return gf2_rank(self.rows) == self.k

    @classmethod
    def random_invertible(cls, k: int, rng: np.random.Generator) -> "AffineMap":
        while True:
            rows = tuple(int(r) for r in rng.integers(0, 1 << k, size=k))
            if gf2_rank(rows) == k:
                return cls(k, rows, int(rng.integers(0, 1 << k)))


def gf2_rank(rows: Sequence[int]) -> int:
    basis: list[int] = []
    for r in rows:
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
    return len(basis)


def apply_to_system(T: AffineMap, system: LinearFormSystem) -> LinearFormSystem:
    return LinearFormSystem(system.k, tuple(T(L) for L in system.forms))


def affine_relabel_invariance(f: FunctionTable, system: LinearFormSystem, T: AffineMap) -> bool:
    """Exact check that moving every form by ``T`` leaves the sampling measure unchanged."""
    if T.k != system.k:
        raise ValueError("affine map and form system have different ambient dimensions")
    if not T.is_invertible():
        raise ValueError("affine map is not invertible")
    base = sample_measure(f, system)
    moved = sample_measure(f, apply_to_system(T, system))
    return base.weights == moved.weights
