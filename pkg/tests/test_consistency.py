from __future__ import annotations

import itertools
import json
import random

import pytest

from cubelab.consistency import (
    consistency_verdict,
    consistent_subgroup,
    evaluate_monomials,
    is_consistent,
    lift_to_affine,
    strip_affine,
    target_group,
)
from cubelab.group2 import cyclic, make_canonical, product, trivial_group
from cubelab.measures import LinearFormSystem, bits_to_mask
from oracles import brute_consistent_tuples, consistency_sweep

PAIRS = {(1, 0): 1, (2, 0): 2, (2, 1): 1}


def test_lift_examples():
    assert lift_to_affine(LinearFormSystem.from_json({"k": 1, "forms": [[0]]})).to_json() == {"k": 2, "forms": [[1, 0]]}
    empty = lift_to_affine(LinearFormSystem(2, ()))
    assert empty.k == 3 and empty.forms == ()
    three = LinearFormSystem.from_json({"k": 2, "forms": [[1, 0], [0, 1], [1, 1]]})
    assert lift_to_affine(three).to_json()["forms"] == [[1, 1, 0], [1, 0, 1], [1, 1, 1]]
    assert strip_affine(lift_to_affine(three)) == three
    with pytest.raises(ValueError):
        strip_affine(three)


@pytest.mark.parametrize("z", [cyclic(2), make_canonical(2, 1), make_canonical(3, 2), product(cyclic(2), make_canonical(2, 1))])
def test_single_form_reaches_everything(z):
    for L in range(4):
        sub = consistent_subgroup(LinearFormSystem(2, (L,)), z)
        assert all(sub.contains([x]) for x in z.elements())


def test_three_form_example_is_the_full_group():
    sub = consistent_subgroup(LinearFormSystem(2, (1, 2, 3)), cyclic(2))
    assert sub.generators == [((1,), (1,), (1,)), ((1,), (0,), (1,)), ((0,), (1,), (1,))]
    assert sub.reduced() == [
        {"pivot": 0, "valuation": 0, "row": [1, 1, 1]},
        {"pivot": 1, "valuation": 0, "row": [0, 1, 0]},
        {"pivot": 2, "valuation": 0, "row": [0, 0, 1]},
    ]
    assert all(sub.contains(list(zip(b))) for b in itertools.product(range(2), repeat=3))


def test_four_affine_forms_give_index_two(fixtures_dir):
    forms = LinearFormSystem.from_json(json.loads((fixtures_dir / "affine_forms_4.json").read_text()))
    members = {b for b in itertools.product(range(2), repeat=4) if is_consistent(b, forms, 1, 0)}
    assert members == {b for b in itertools.product(range(2), repeat=4) if sum(b) % 2 == 0}
    truth = brute_consistent_tuples(strip_affine(forms).forms, 3, 1, 0, 1, (0, 1, 2))
    assert (1, 0, 0, 0) not in truth and not is_consistent((1, 0, 0, 0), forms, 1, 0)


def test_trivial_target_and_inhomogeneous_target():
    sub = consistent_subgroup(LinearFormSystem(2, (0, 3)), trivial_group())
    assert sub.contains([(), ()])
    with pytest.raises(ValueError):
        consistent_subgroup(LinearFormSystem(1, (1,)), cyclic(3))


def test_zero_and_constant_tuples():
    forms = LinearFormSystem(3, (1, 3, 5, 7))
    for (k, r), ell in PAIRS.items():
        for c in range(1 << (k - ell + 1)):
            assert is_consistent([c] * 4, forms, k, r)


def test_target_groups_follow_calibration():
    assert target_group(1, 0).moduli == (2,)
    assert target_group(2, 0).moduli == (2,)
    assert target_group(2, 1).moduli == (4,)
    assert target_group(3, 0).moduli == (2,)


def test_subgroup_law_and_certificates():
    rng = random.Random(4)
    z = product(make_canonical(2, 1), make_canonical(3, 2))
    forms = LinearFormSystem(3, (0, 1, 3, 6, 7))
    sub = consistent_subgroup(forms, z)
    for _ in range(60):
        parts = [sub.generators[rng.randrange(len(sub.generators))] for _ in range(3)]
        scal = [rng.randrange(8) for _ in parts]
        b = tuple(z.zero() for _ in forms.forms)
        for g, c in zip(parts, scal):
            b = tuple(z.add(x, z.scale(y, c)) for x, y in zip(b, g))
        assert sub.contains(b)
        assert sub.contains(tuple(z.neg(x) for x in b))
        cert = sub.certificate(b)
        coeffs = {bits_to_mask(c["monomial"]): tuple(c["value"]) for c in cert["coefficients"]}
        for S, g in coeffs.items():
            level = bin(S).count("1")
            assert z.reduce(g) in set(map(tuple, z.level_members(min(level, z.degree + 1))))
        assert evaluate_monomials(forms, z, coeffs) == b


def test_non_member_certificate():
    sub = consistent_subgroup(LinearFormSystem(2, (0, 1, 2, 3)), cyclic(2))
    cert = sub.certificate([(1,), (0,), (0,), (0,)])
    assert cert["member"] is False and cert["stuck_at"] == {"form": 3, "coordinate": 0}
    with pytest.raises(ValueError):
        sub.certificate([(1,), (0,)])
    with pytest.raises(ValueError):
        sub.certificate([(2,), (0,), (0,), (0,)])


def test_verdict_document():
    verdict = consistency_verdict([1, 0, 3], LinearFormSystem(3, (1, 3, 5)), 2, 1)
    assert verdict["consistent"] is True
    assert verdict["target"] == {"moduli": [4], "degree": 2, "multipliers": [[1], [1], [2], [4]]}
    assert verdict["certificate"]["coefficients"][0] == {"monomial": [0, 0], "value": [1]}


@pytest.mark.parametrize("k,r", sorted(PAIRS))
def test_matches_brute_force(k, r):
    ell = PAIRS[k, r]

    def member(b, forms, s):
        return is_consistent(b, lift_to_affine(LinearFormSystem(s - 1, forms)), k, r)

    systems, candidates, mismatches = consistency_sweep(k, r, ell, member)
    assert systems == 19 and mismatches == 0


def test_larger_ambient_dimension_adds_nothing():
    for (k, r), ell in PAIRS.items():
        for forms in [(0, 1, 2, 3), (1, 2, 3), (0, 3)]:
            small = brute_consistent_tuples(forms, 3, k, r, ell, (2,))
            assert brute_consistent_tuples(forms, 3, k, r, ell, (0, 1, 2)) == small
