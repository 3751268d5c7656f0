import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import ENTITY_RELS, NUMERIC_RELS, random_lf
from tsparser.semantics import Signature, parse_funql, type_check
from tsparser.transitions import (ALL_OPS, BU_OPS, ENTITY, NUMBER, RED, REL_ANY, REL_NUMERIC, REL_UNARY,
                                  STOP, TD_OPS, ArityUnderflow, Derivation, IllegalTransition, Inventory,
                                  Limits, Op, apply_transition, bu_oracle, final_form, initial_config,
                                  legal_transitions, needs_token, reconstruct, replay, td_oracle,
                                  token_slot)

SIG = Signature(frozenset(NUMERIC_RELS))
SLOT_TOKENS = {
    ENTITY: ["a", "b", "c"],
    NUMBER: ["1", "2.5"],
    REL_ANY: list(ENTITY_RELS + NUMERIC_RELS),
    REL_UNARY: list(ENTITY_RELS),
    REL_NUMERIC: list(NUMERIC_RELS),
}

TABLE1 = "count(and(daughterOf(Barack_Obama), InfluentialTeensByYear(2014)))"


def random_walk(mode, rng, limits=Limits(), inventory=Inventory()):
    c = initial_config(mode)
    steps = []
    while not c.is_terminal():
        ops = legal_transitions(c, SIG, limits, inventory)
        assert ops, f"dead end at {c.render()!r}"
        op = ops[rng.integers(len(ops))]
        tok = None
        if needs_token(op):
            pool = SLOT_TOKENS[token_slot(c, op, SIG)]
            tok = pool[rng.integers(len(pool))]
        c = apply_transition(c, op, tok, SIG)
        steps.append((op, tok, c))
    return c, steps


def test_op_inventory():
    assert len(TD_OPS) == 6 + 6 + 2 + 1  # NT tags, TER tags, RED
    assert set(TD_OPS) | set(BU_OPS) == set(ALL_OPS)
    assert len(ALL_OPS) == 28


def test_top_down_table_replay():
    d = td_oracle(parse_funql(TABLE1))
    expected = [
        (Op("NT", "count"), None, "count("),
        (Op("NT", "and"), None, "count( || and("),
        (Op("NT", "relation"), "daughterOf", "count( || and( || daughterOf("),
        (Op("TER", "entity"), "Barack_Obama", "count( || and( || daughterOf( || Barack_Obama"),
        (RED, None, "count( || and( || daughterOf(Barack_Obama)"),
        (Op("NT", "relation"), "InfluentialTeensByYear",
         "count( || and( || daughterOf(Barack_Obama) || InfluentialTeensByYear("),
        (Op("TER", "entity"), "2014",
         "count( || and( || daughterOf(Barack_Obama) || InfluentialTeensByYear( || 2014"),
        (RED, None, "count( || and( || daughterOf(Barack_Obama) || InfluentialTeensByYear(2014)"),
        (RED, None, "count( || and(daughterOf(Barack_Obama), InfluentialTeensByYear(2014))"),
        (RED, None, "count(and(daughterOf(Barack_Obama), InfluentialTeensByYear(2014)))"),
    ]
    after = replay(d)[1:]
    assert [(s.op, s.token) for s in d.steps] == [(o, t) for o, t, _ in expected]
    assert [c.render() for c in after] == [snap for _, _, snap in expected]


def test_bottom_up_table_replay():
    d = bu_oracle(parse_funql(TABLE1))
    expected = [
        (Op("TER", "entity"), "Barack_Obama", "Barack_Obama"),
        (Op("NTRED", "relation"), "daughterOf", "daughterOf(Barack_Obama)"),
        (Op("TER", "entity"), "2014", "daughterOf(Barack_Obama) || 2014"),
        (Op("NTRED", "relation"), "InfluentialTeensByYear",
         "daughterOf(Barack_Obama) || InfluentialTeensByYear(2014)"),
        (Op("NTRED", "and"), None, "and(daughterOf(Barack_Obama), InfluentialTeensByYear(2014))"),
        (Op("NTRED", "count"), None, "count(and(daughterOf(Barack_Obama), InfluentialTeensByYear(2014)))"),
    ]
    steps = [(s.op, s.token) for s in d.steps]
    assert steps[:-1] == [(o, t) for o, t, _ in expected]
    assert steps[-1] == (STOP, None)
    assert [c.render() for c in replay(d)[1:-1]] == [snap for _, _, snap in expected]


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracles_reconstruct(seed):
    lf = random_lf(np.random.default_rng(seed), ["a", "b", "c"])
    assert reconstruct(td_oracle(lf)) == lf
    assert reconstruct(bu_oracle(lf)) == lf


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derivation_json_round_trip(seed):
    lf = random_lf(np.random.default_rng(seed), ["a", "b"])
    for d in (td_oracle(lf), bu_oracle(lf)):
        assert Derivation.from_json(d.to_json()) == d


@pytest.mark.parametrize("mode", ["td", "bu"])
@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_walks_finish_well_typed(mode, seed):
    limits = Limits(max_terminals=8) if mode == "bu" else Limits()
    c, steps = random_walk(mode, np.random.default_rng(seed), limits)
    lf = final_form(c)
    type_check(lf, SIG)
    # the oracle of what we built is exactly the walk we took
    oracle = td_oracle(lf) if mode == "td" else bu_oracle(lf)
    assert [(s.op, s.token) for s in oracle.steps] == [(op, tok) for op, tok, _ in steps]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_top_down_structural_rules(seed):
    limits = Limits(max_open_nt=4, max_total_nt=6)
    c, steps = random_walk("td", np.random.default_rng(seed), limits)
    ops = [op for op, _, _ in steps]
    assert ops[0].kind == "NT"
    for prev, nxt in zip(ops, ops[1:]):
        assert not (prev.kind == "NT" and nxt == RED)
    assert sum(op.kind == "NT" for op in ops) <= 6
    assert all(len(cfg.open_nts) <= 4 for _, _, cfg in steps)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bottom_up_limits(seed):
    limits = Limits(max_total_nt=5, max_consecutive_ter=2, max_terminals=6)
    c, steps = random_walk("bu", np.random.default_rng(seed), limits)
    run = longest = 0
    for op, _, _ in steps:
        run = run + 1 if op.kind == "TER" else 0
        longest = max(longest, run)
    assert longest <= 2
    assert sum(op.kind == "TER" for op, _, _ in steps) <= 6
    assert sum(op.kind == "NTRED" for op, _, _ in steps) <= 5


def test_count_only_at_root():
    c = apply_transition(initial_config("td"), Op("NT", "and"), None, SIG)
    assert Op("NT", "count") not in legal_transitions(c, SIG)
    assert Op("NT", "count") in legal_transitions(initial_config("td"), SIG)


def test_inventory_masks_ops():
    inv = Inventory(number=False, relation_numeric=False)
    ops = legal_transitions(initial_config("td"), SIG, Limits(), inv)
    assert not any(op.tag in ("argmax", "argmin") or op.tag.startswith("filter_") for op in ops if op.tag)


def test_illegal_applications_raise():
    with pytest.raises(IllegalTransition):
        apply_transition(initial_config("td"), RED)
    with pytest.raises(ArityUnderflow):
        apply_transition(initial_config("bu"), Op("NTRED", "and"), None, SIG)
