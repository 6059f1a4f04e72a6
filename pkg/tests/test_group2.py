from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from cubelab.group2 import (
    FilteredGroup,
    cyclic,
    is_2_homogeneous,
    make_canonical,
    make_h_truncation,
    product,
    quotient_by_level,
    trivial_group,
)

valid_kl = st.integers(1, 6).flatmap(lambda k: st.tuples(st.just(k), st.integers(1, k)))


@given(valid_kl)
def test_canonical_order_and_level_indices(kl):
    k, ell = kl
    z = make_canonical(k, ell)
    assert z.order == 2 ** (k - ell + 1)
    for i in range(k + 3):
        index = z.order // z.level_order(i)
        assert index == min(2 ** max(0, min(i, k + 1) - ell), z.order)


@given(valid_kl)
def test_canonical_blocks_are_2_homogeneous(kl):
    assert is_2_homogeneous(make_canonical(*kl))


@given(valid_kl)
def test_quotient_by_last_level(kl):
    k, ell = kl
    big = make_canonical(k + 1, ell)
    q = quotient_by_level(big, k + 1)
    if big.level_order(k + 1) > 1:
        assert q == make_canonical(k, ell)
    else:
        assert q.moduli == big.moduli and q.degree == k


def test_homogeneity_examples():
    assert not is_2_homogeneous(cyclic(3))
    assert is_2_homogeneous(cyclic(2))
    assert not is_2_homogeneous(cyclic(4))


def test_product_examples():
    assert product(cyclic(2), cyclic(2)) == FilteredGroup((2, 2), 1, ((1, 1), (1, 1), (2, 2)))
    p = product(make_canonical(2, 1), make_canonical(2, 2))
    assert p.moduli == (4, 2) and p.degree == 2 and is_2_homogeneous(p)
    x = make_canonical(3, 1)
    assert product(x, trivial_group()) == x


def test_product_is_associative_up_to_order_and_counts_multiply():
    a, b, c = cyclic(2), make_canonical(2, 1), make_canonical(3, 2)
    left, right = product(product(a, b), c), product(a, product(b, c))
    assert left == right
    for i in range(5):
        assert left.level_order(i) == a.level_order(i) * b.level_order(i) * c.level_order(i)


def test_level_members():
    z21 = make_canonical(2, 1)
    assert list(z21.level_members(2)) == [(0,), (2,)]
    assert len(list(z21.level_members(0))) == 4
    p = product(z21, make_canonical(2, 2))
    assert sorted(p.level_members(2)) == [(0, 0), (0, 1), (2, 0), (2, 1)]
    with pytest.raises(ValueError):
        list(z21.level_members(4))


def test_quotient_examples():
    q = quotient_by_level(make_canonical(2, 1), 2)
    assert q == cyclic(2)
    assert quotient_by_level(make_canonical(3, 1), 1).order == 1
    assert quotient_by_level(make_canonical(3, 1), 3) == make_canonical(2, 1)
    with pytest.raises(ValueError):
        quotient_by_level(make_canonical(2, 1), 4)


def test_invalid_groups_rejected():
    with pytest.raises(ValueError):
        FilteredGroup((6,), 1, ((1,), (1,), (6,)))
    with pytest.raises(ValueError):
        FilteredGroup((4,), 1, ((1,), (2,), (4,)))
    with pytest.raises(ValueError):
        FilteredGroup((4,), 2, ((1,), (1,), (1,), (2,)))
    with pytest.raises(ValueError):
        make_canonical(2, 3)


def test_json_round_trip_and_shorthands():
    for z in (make_canonical(3, 2), product(cyclic(3), make_canonical(2, 1))):
        assert FilteredGroup.from_json(json.loads(json.dumps(z.to_json()))) == z
    assert FilteredGroup.from_json({"canonical": {"k": 2, "ell": 1}}) == make_canonical(2, 1)
    h = FilteredGroup.from_json({"h_trunc": {"k": 2, "widths": [1, 1]}})
    assert h == make_h_truncation(2, [1, 1])
    assert h.moduli == (4, 2)


def test_indexing_round_trip():
    z = product(make_canonical(2, 1), cyclic(3))
    for i in range(z.order):
        assert z.index(z.element(i)) == i
    assert z.element_array.shape == (12, 2)
