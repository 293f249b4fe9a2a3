"""Rule tables, single-event updates, flow replay, perturbation parameters."""

import itertools

import pytest

from latticecftp.errors import (PositiveRatesMissing, UnsortedEvents,
                                ValidationError, ZeroTotalRate)
from latticecftp.event_field import Event, EventField
from latticecftp.models import (PERTURBATIVE, UNPERTURBED, PatchConfig,
                                Rule, StateSpace, apply_rule, build_model,
                                epsilon, flow_replay, independent_sites,
                                kappa, noisy_voter, rn_ypr, with_perturbation)

from conftest import anticonformist_rule, ev


def test_state_space_validation():
    with pytest.raises(ValidationError):
        StateSpace([])
    with pytest.raises(ValidationError):
        StateSpace(["A", "A"])
    s = StateSpace(["A", "C", "G", "T"])
    assert len(s) == 4 and s.index("G") == 2 and s.label(3) == "T"


def test_rule_table_must_be_total():
    with pytest.raises(ValidationError):
        Rule(((0,),), {(0,): 0}, 1.0, UNPERTURBED, 2)


def test_rule_output_matches_table():
    table = {(a, b): (a + b) % 3 for a in range(3) for b in range(3)}
    rule = Rule(((0,), (1,)), table, 1.0, UNPERTURBED, 3)
    for key, out in table.items():
        assert rule.output(key) == out
    assert rule.image == frozenset({0, 1, 2})
    assert rule.table_dict() == table


def test_build_model_collects_errors():
    bad = Rule((), {(): 0}, -1.0, "weird", 2)
    with pytest.raises(ValidationError) as err:
        build_model(1, ["+", "-"], [bad])
    messages = "\n".join(err.value.messages)
    assert "rate" in messages and "kind" in messages


def test_offset_dimension_checked():
    rule = Rule(((0, 0),), {(0,): 0, (1,): 1}, 1.0, UNPERTURBED, 2)
    with pytest.raises(ValidationError):
        build_model(1, ["+", "-"], [rule])


def test_merge_identical_rules():
    r1 = Rule((), {(): 0}, 1.0, UNPERTURBED, 2)
    r2 = Rule((), {(): 0}, 0.5, UNPERTURBED, 2)
    merged = build_model(1, ["+", "-"], [r1, r2], merge_identical=True)
    assert len(merged.rules) == 1 and merged.rules[0].rate == 1.5
    unmerged = build_model(1, ["+", "-"], [r1, r2])
    assert len(unmerged.rules) == 2


def test_iota_and_positive_rates(voter_model):
    assert voter_model.positive_rates
    plus = voter_model.states.index("+")
    assert voter_model.rules[voter_model.iota_index(plus)].constant_value() == plus
    # drop one unconditional rule: positive rates lost
    partial = build_model(1, voter_model.states,
                          [r for r in voter_model.rules
                           if r.name != "unconditional:-"])
    assert not partial.positive_rates
    with pytest.raises(PositiveRatesMissing):
        partial.iota_index(1)


def test_apply_rule_unconditional(indep_model):
    cfg = PatchConfig.constant(2, 1)
    out = apply_rule(indep_model, cfg, ev(3, 0, -1.0))
    assert out.get((3,)) == 0
    assert out.get((2,)) == 1 and out.get((4,)) == 1
    assert cfg.get((3,)) == 1  # input untouched


def test_apply_rule_rnypr_left_dependent():
    model = rn_ypr()
    idx = model.states.index
    (left_cag,) = [i for i, r in enumerate(model.rules)
                   if r.name == "left:C,A->G"]
    cfg = PatchConfig.constant(4, idx("T"))
    cfg.set((4,), idx("C"))
    cfg.set((5,), idx("A"))
    out = apply_rule(model, cfg, ev(5, left_cag, -1.0))
    assert out.get((5,)) == idx("G")
    # context mismatch: T,A stays A
    cfg2 = PatchConfig.constant(4, idx("T"))
    cfg2.set((5,), idx("A"))
    out2 = apply_rule(model, cfg2, ev(5, left_cag, -1.0))
    assert out2.get((5,)) == idx("A")


def test_apply_rule_voter_copy(voter_model):
    (copy_right,) = [i for i, r in enumerate(voter_model.rules)
                     if r.name == "copy:1"]
    cfg = PatchConfig.constant(2, 0)
    cfg.set((1,), 1)
    out = apply_rule(voter_model, cfg, ev(0, copy_right, -1.0))
    assert out.get((0,)) == 1


def test_flow_replay_empty_is_identity(voter_model):
    xi = PatchConfig.uniform(2, 99)
    out = flow_replay(voter_model, [], xi)
    for x in range(-5, 6):
        assert out.get((x,)) == xi.get((x,))


def test_flow_replay_rejects_unsorted(voter_model):
    events = [ev(0, 2, -1.0), ev(0, 2, -2.0)]
    with pytest.raises(UnsortedEvents):
        flow_replay(voter_model, events, PatchConfig.constant(2, 0))


def test_flow_composition(voter_model):
    field = EventField.for_model(voter_model, 77)
    box = [(x,) for x in range(-3, 4)]
    full = field.events_in_window(box, -6.0, 0.0)
    first = field.events_in_window(box, -6.0, -2.5)
    second = field.events_in_window(box, -2.5, 0.0)
    assert sorted(first + second, key=lambda e: e.time) == full
    xi = PatchConfig.uniform(2, 5)
    via_two = flow_replay(voter_model, second, flow_replay(voter_model, first, xi))
    via_one = flow_replay(voter_model, full, xi)
    for x in range(-3, 4):
        assert via_two.get((x,)) == via_one.get((x,))


def test_substitution_equals_unconditional_replacement(perturbed_voter):
    model = perturbed_voter
    (pert_idx,) = model.perturbative_indices
    box = [(x,) for x in range(-2, 3)]
    events, pert_events = [], []
    for seed in range(100):
        field = EventField.for_model(model, seed)
        events = field.events_in_window(box, -5.0, 0.0)
        pert_events = [e for e in events if e.rule == pert_idx]
        if pert_events:
            break
    assert pert_events, "no seed in range produced a perturbative event"
    target = pert_events[0]
    for v in (0, 1):
        xi = PatchConfig.uniform(2, 3)
        subbed = flow_replay(model, events, xi, substitutions={target: v})
        replaced = [e if e is not target
                    else Event(e.site, model.iota_index(v), e.time)
                    for e in events]
        direct = flow_replay(model, replaced, xi)
        for x in range(-2, 3):
            assert subbed.get((x,)) == direct.get((x,))


def test_epsilon_examples(voter_model):
    assert epsilon(voter_model) == 0.0
    base = noisy_voter({1: 0.5, -1: 0.5}, {"+": 1.0, "-": 1.0})
    both = Rule(((0,),), {(0,): 1, (1,): 0}, 0.1, PERTURBATIVE, 2)
    assert epsilon(with_perturbation(base, [both])) == pytest.approx(0.1)
    const_plus = Rule(((0,),), {(0,): 0, (1,): 0}, 0.1, PERTURBATIVE, 2)
    assert epsilon(with_perturbation(base, [const_plus])) == pytest.approx(0.1)


def test_epsilon_requires_positive_rates():
    copy_only = noisy_voter({1: 1.0}, {})
    with pytest.raises(PositiveRatesMissing):
        epsilon(copy_only)


def test_kappa_examples(voter_model):
    assert kappa(voter_model) == 0.0
    base = noisy_voter({1: 0.5, -1: 0.5}, {"+": 1.0, "-": 1.0})
    pert = anticonformist_rule(0.1)
    assert kappa(with_perturbation(base, [pert])) == pytest.approx(0.2 / 3.1)
    # empty neighborhood contributes nothing
    null = Rule((), {(): 0}, 5.0, PERTURBATIVE, 2)
    assert kappa(with_perturbation(base, [null])) == 0.0


def test_kappa_zero_total_rate():
    model = independent_sites({"A": 0.0, "B": 0.0})
    with pytest.raises(ZeroTotalRate):
        kappa(model)


def test_independent_sites_builder():
    model = independent_sites({"A": 2.0, "B": 1.0})
    assert len(model.rules) == 2
    assert model.total_rate == pytest.approx(3.0)
    assert epsilon(model) == 0.0 and kappa(model) == 0.0


def test_rnypr_rule_census():
    model = rn_ypr()
    assert len(model.rules) == 28
    by_kind = {}
    for r in model.rules:
        by_kind.setdefault(r.name.split(":")[0], []).append(r)
    assert len(by_kind["unconditional"]) == 4
    assert len(by_kind["transversion"]) == 4
    assert len(by_kind["transition"]) == 4
    assert len(by_kind["left"]) == 8
    assert len(by_kind["right"]) == 8
    for r in by_kind["left"]:
        assert r.offsets == ((-1,), (0,))
    for r in by_kind["right"]:
        assert r.offsets == ((0,), (1,))
    with pytest.raises(ValidationError):
        rn_ypr(rate_overrides={"nonsense": 1.0})


def test_noisy_voter_builder(voter_model):
    copies = [r for r in voter_model.rules if r.arity == 2]
    unconds = [r for r in voter_model.rules if r.arity == 0]
    assert len(copies) == 2 and len(unconds) == 2
    for r in copies:
        assert r.offsets[0] == (0,)


def test_polling_builder(polling_model):
    (poll,) = [r for r in polling_model.rules if r.arity > 0]
    assert poll.offsets == ((-1,), (0,), (1,))
    for combo in itertools.product((0, 1), repeat=3):
        assert poll.output(combo) == (0 if 0 in combo else 1)


def test_with_perturbation_requires_kind(voter_model):
    base_rule = Rule((), {(): 0}, 1.0, UNPERTURBED, 2)
    with pytest.raises(ValidationError):
        with_perturbation(voter_model, [base_rule])


def test_patch_config_defaults():
    const = PatchConfig.constant(3, 2)
    assert const.get((123,)) == 2
    uni1 = PatchConfig.uniform(4, 55)
    uni2 = PatchConfig.uniform(4, 55)
    sites = [(x,) for x in range(-50, 50)]
    assert [uni1.get(s) for s in sites] == [uni2.get(s) for s in sites]
    assert len({uni1.get(s) for s in sites}) == 4
    uni1.set((0,), 3)
    assert uni1.get((0,)) == 3 and uni2.get((0,)) != 3 or uni2.get((0,)) == 3
    copy = uni1.copy()
    copy.set((1,), 0)
    assert uni1.get((1,)) == uni2.get((1,))
