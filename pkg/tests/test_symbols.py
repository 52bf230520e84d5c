"""Tests for the relational core: atoms, effect sets, substitution, unification."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tamplearn.errors import FileFormatError, UnboundVariable
from tamplearn.symbols import (
    Atom,
    EffectSet,
    ObjectRef,
    Variable,
    VariableAllocator,
    apply_effects,
    apply_substitution,
    atom_sort_key,
    format_literal,
    ground_effects,
    invert_bijection,
    parse_atom,
    parse_literal,
    substitute_effects,
    unify,
)

from conftest import (
    BLOCK,
    COVERS,
    HAND_EMPTY,
    HOLDING,
    ON,
    ON_TABLE,
    PREDICATES,
    TARGET,
    blk,
    effect_set,
    enumerate_bijections,
    random_effect_set,
    tgt,
)


def test_atom_arity_checked():
    with pytest.raises(ValueError):
        Atom(HOLDING, ())
    with pytest.raises(ValueError):
        Atom(HOLDING, (blk("a"), blk("b")))


def test_atom_arg_types_checked():
    with pytest.raises(ValueError):
        Atom(HOLDING, (tgt("t1"),))
    # Variables are checked the same way as objects.
    with pytest.raises(ValueError):
        Atom(COVERS, (Variable("?x0", TARGET), Variable("?x1", BLOCK)))


def test_atom_str():
    assert str(HOLDING(blk("b1"))) == "Holding(b1)"
    assert str(HAND_EMPTY()) == "HandEmpty()"
    assert str(COVERS(blk("b1"), tgt("t2"))) == "Covers(b1,t2)"


def test_effect_set_rejects_overlap():
    a = HOLDING(blk("b1"))
    with pytest.raises(ValueError):
        EffectSet(add=frozenset({a}), delete=frozenset({a}))


def test_ground_effects_identity_is_empty():
    s = frozenset({HAND_EMPTY(), ON_TABLE(blk("b1"))})
    eff = ground_effects(s, s)
    assert eff.is_empty


def test_ground_effects_pick_transition():
    b1 = blk("b1")
    s = frozenset({HAND_EMPTY(), ON_TABLE(b1)})
    s_next = frozenset({HOLDING(b1)})
    eff = ground_effects(s, s_next)
    assert eff.add == {HOLDING(b1)}
    assert eff.delete == {HAND_EMPTY(), ON_TABLE(b1)}


def test_ground_effects_matches_set_difference(rng):
    # Oracle: adds = s_next - s, deletes = s - s_next, by definition.
    for _ in range(50):
        base = random_effect_set(rng, n_objects=3, max_atoms=5)
        s = frozenset(base.add | base.delete)
        nxt = random_effect_set(rng, n_objects=3, max_atoms=5)
        s_next = frozenset(nxt.add | nxt.delete)
        eff = ground_effects(s, s_next)
        assert eff.add == s_next - s
        assert eff.delete == s - s_next
        assert apply_effects(s, eff) == s_next


def test_apply_substitution_maps_variables():
    x = Variable("?x0", BLOCK)
    sigma = {x: blk("b3")}
    assert apply_substitution({HOLDING(x)}, sigma) == {HOLDING(blk("b3"))}


def test_apply_substitution_identity():
    atoms = {HOLDING(blk("b1")), HAND_EMPTY()}
    assert apply_substitution(atoms, {}) == atoms


def test_apply_substitution_merges_duplicates():
    x, y = Variable("?x0", BLOCK), Variable("?x1", BLOCK)
    sigma = {x: blk("b3"), y: blk("b3")}
    assert apply_substitution({HOLDING(x), HOLDING(y)}, sigma) == {HOLDING(blk("b3"))}


def test_apply_substitution_unbound_variable_raises():
    x = Variable("?x0", BLOCK)
    with pytest.raises(UnboundVariable):
        apply_substitution({HOLDING(x)}, {})


def test_apply_substitution_object_remap():
    # Object-to-object mappings apply too (used when matching ground effects).
    assert apply_substitution({HOLDING(blk("b1"))}, {blk("b1"): blk("b9")}) == {
        HOLDING(blk("b9"))
    }


def test_unify_single_atom_rename():
    e1 = effect_set(add=[HOLDING(blk("b1"))])
    e2 = effect_set(add=[HOLDING(blk("b7"))])
    sigma = unify(e1, e2)
    assert sigma == {blk("b1"): blk("b7")}


def test_unify_polarity_respected():
    e1 = effect_set(add=[HOLDING(blk("b1"))])
    e2 = effect_set(delete=[HOLDING(blk("b7"))])
    assert unify(e1, e2) is None


def test_unify_rejects_non_bijection():
    # On(a,b) cannot map onto On(c,c): a and b would both need to become c.
    e1 = effect_set(add=[ON(blk("a"), blk("b"))])
    e2 = effect_set(add=[ON(blk("c"), blk("c"))])
    assert unify(e1, e2) is None
    # And the reverse direction fails too (c cannot map to both a and b).
    assert unify(e2, e1) is None


def test_unify_two_atom_cover_case():
    b1, b2 = blk("b1"), blk("b2")
    t1, t2 = tgt("t1"), tgt("t2")
    e1 = effect_set(add=[COVERS(b1, t1)], delete=[HOLDING(b1)])
    e2 = effect_set(add=[COVERS(b2, t2)], delete=[HOLDING(b2)])
    sigma = unify(e1, e2)
    assert sigma == {b1: b2, t1: t2}
    # Cross-check against the brute-force enumeration oracle.
    oracle = list(enumerate_bijections(e1, e2))
    assert sigma in oracle


def test_unify_respects_seed():
    b1, b2 = blk("b1"), blk("b2")
    e1 = effect_set(add=[ON(b1, b2)])
    e2 = effect_set(add=[ON(blk("c"), blk("d"))])
    assert unify(e1, e2, seed={b1: blk("c")}) == {b1: blk("c"), b2: blk("d")}
    # A seed incompatible with any bijection forces failure.
    assert unify(e1, e2, seed={b1: blk("d")}) is None


def test_unify_seed_with_extra_objects():
    # Seeds may bind objects that do not appear in the effects (action
    # arguments with no effect on the state); they constrain nothing.
    e1 = effect_set(add=[HOLDING(blk("b1"))])
    e2 = effect_set(add=[HOLDING(blk("b7"))])
    sigma = unify(e1, e2, seed={blk("zz"): blk("qq")})
    assert sigma is not None
    assert sigma[blk("b1")] == blk("b7")


def test_unify_empty_effects():
    assert unify(effect_set(), effect_set()) == {}


def test_unify_type_mismatch():
    e1 = effect_set(add=[HOLDING(blk("b1"))])
    e2 = effect_set(add=[HOLDING(blk("b1")), HAND_EMPTY()])
    assert unify(e1, e2) is None


def test_unify_matches_enumeration_oracle(rng):
    # Randomized cross-check: unify() succeeds iff the exhaustive oracle
    # finds at least one bijection, and any returned mapping is one of them.
    n_checked = 0
    for _ in range(300):
        e1 = random_effect_set(rng, n_objects=3, max_atoms=3)
        if rng.random() < 0.5:
            # Cloned-and-renamed pair: guaranteed unifiable.
            renaming = {}
            for o in e1.objects():
                pool = "bcdefg"
                renaming[o] = ObjectRef(pool[len(renaming) % 6] + o.name, o.type)
            e2 = substitute_effects(e1, renaming)
        else:
            e2 = random_effect_set(rng, n_objects=3, max_atoms=3)
        sigma = unify(e1, e2)
        oracle = list(enumerate_bijections(e1, e2))
        if sigma is None:
            assert oracle == [], f"unify missed a bijection for {e1} vs {e2}"
        else:
            assert sigma in oracle
            n_checked += 1
    assert n_checked > 50  # sanity: the generator produced real positives


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_unify_reflexive(seed):
    e = random_effect_set(np.random.default_rng(seed))
    sigma = unify(e, e)
    assert sigma is not None
    assert substitute_effects(e, sigma) == e


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_unify_symmetric(seed):
    rng = np.random.default_rng(seed)
    e1 = random_effect_set(rng)
    e2 = random_effect_set(rng)
    sigma = unify(e1, e2)
    if sigma is None:
        assert unify(e2, e1) is None
    else:
        back = invert_bijection(sigma)
        assert substitute_effects(e2, back) == e1


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_unify_transitive(seed):
    rng = np.random.default_rng(seed)
    e1 = random_effect_set(rng)
    renaming = {o: ObjectRef("m_" + o.name, o.type) for o in e1.objects()}
    e2 = substitute_effects(e1, renaming)
    renaming2 = {o: ObjectRef("n_" + o.name, o.type) for o in e2.objects()}
    e3 = substitute_effects(e2, renaming2)
    assert unify(e1, e2) is not None
    assert unify(e2, e3) is not None
    assert unify(e1, e3) is not None


def test_variable_allocator_lifting():
    alloc = VariableAllocator()
    b1, t1 = blk("b1"), tgt("t1")
    eff = effect_set(add=[COVERS(b1, t1)], delete=[HOLDING(b1)])
    lifted = alloc.lift_effects(eff)
    v0 = Variable("?x0", BLOCK)
    v1 = Variable("?x1", TARGET)
    assert lifted.add == {COVERS(v0, v1)}
    assert lifted.delete == {HOLDING(v0)}
    assert alloc.mapping == {b1: v0, t1: v1}


def test_atom_sort_key_orders_by_name_then_args():
    atoms = [ON(blk("b2"), blk("b1")), HOLDING(blk("a")), ON(blk("b1"), blk("b2"))]
    ordered = sorted(atoms, key=atom_sort_key)
    assert [str(a) for a in ordered] == ["Holding(a)", "On(b1,b2)", "On(b2,b1)"]


def test_atom_text_round_trip():
    for atom in [HAND_EMPTY(), HOLDING(blk("b1")), COVERS(blk("b1"), tgt("t3"))]:
        assert parse_atom(str(atom), PREDICATES) == atom


def test_literal_round_trip():
    lit = format_literal(HOLDING(blk("b1")), negated=True)
    assert lit == "not-Holding(b1)"
    atom, negated = parse_literal(lit, PREDICATES)
    assert atom == HOLDING(blk("b1"))
    assert negated


def test_parse_atom_errors():
    with pytest.raises(FileFormatError):
        parse_atom("Nope(b1)", PREDICATES)
    with pytest.raises(FileFormatError):
        parse_atom("Holding(b1", PREDICATES)
    with pytest.raises(FileFormatError):
        parse_atom("Holding(b1,b2)", PREDICATES)
