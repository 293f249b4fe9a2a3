"""Closure construction, resolution order, and the end-to-end sampler."""

import math

import numpy as np

import latticecftp.assembler as assembler
from latticecftp.assembler import (build_amb_closure, global_consensus_value,
                                   resolve_all, sample_marginal, sample_site)
from latticecftp.event_field import EventField
from latticecftp.exploration import make_theta, readout_voter, run_exploration
from latticecftp.locking import Caps
from latticecftp.models import (PERTURBATIVE, Rule, noisy_voter,
                                with_perturbation)
from latticecftp.seeding import derive_seed

from conftest import FakeField, ev


def test_unperturbed_closure_is_single_point(voter_model):
    th = make_theta(voter_model, "voter")
    for k in range(200):
        seed = derive_seed(201, k)
        trace = run_exploration(voter_model, th,
                                EventField.for_model(voter_model, seed))
        closure = build_amb_closure(voter_model, th,
                                    EventField.for_model(voter_model, seed))
        assert set(closure.points) == {((0,), 0.0)}
        assert len(closure.layers) == 1
        assert closure.t_star == trace.t_final
        value = resolve_all(voter_model, closure, seed=seed)
        assert value == readout_voter(voter_model, trace)


def test_root_branch_spawns_points_per_offset(perturbed_voter):
    model = perturbed_voter
    (pert_idx,) = model.perturbative_indices
    th = make_theta(model, "voter")
    hits = 0
    for k in range(500):
        field = EventField.for_model(model, derive_seed(203, k))
        closure = build_amb_closure(model, th, field)
        root = closure.points[closure.root]
        for alpha, child_keys in root.children.items():
            hits += 1
            assert model.rules[alpha.rule].offsets == ((0,), (1,))
            assert child_keys == (((alpha.site[0],), alpha.time),
                                  ((alpha.site[0] + 1,), alpha.time))
            for ck in child_keys:
                assert ck in closure.points
    assert hits > 5


def _scripted_model():
    model = noisy_voter({1: 0.5, -1: 0.5}, {"+": 0.5, "-": 0.5})
    pair = Rule(((-1,), (1,)), {(a, b): b for a in (0, 1) for b in (0, 1)},
                0.05, PERTURBATIVE, 2, name="pair-right")
    echo = Rule(((0,),), {(0,): 0, (1,): 1}, 0.05, PERTURBATIVE, 2,
                name="echo-self")
    return with_perturbation(model, [pair, echo])


def _scripted_field(model):
    names = {r.name: i for i, r in enumerate(model.rules)}
    return FakeField([
        ev(0, names["pair-right"], -1.0),
        ev(-1, names["copy:1"], -2.0),
        ev(1, names["copy:-1"], -2.5),
        ev(0, names["echo-self"], -3.0),
        ev(0, names["unconditional:+"], -4.0),
    ])


def test_scripted_two_layer_closure():
    """Hand-built realization: a root branch whose two child points converge
    onto one shared grandchild, terminated by a single + write."""
    model = _scripted_model()
    th = make_theta(model, "voter")
    calls = []
    original = assembler.explore_with_locking

    def counting(*args, **kw):
        calls.append(kw.get("origin") or args[3])
        return original(*args, **kw)

    assembler.explore_with_locking = counting
    try:
        closure = build_amb_closure(model, th, _scripted_field(model))
    finally:
        assembler.explore_with_locking = original

    assert set(closure.points) == {
        ((0,), 0.0), ((-1,), -1.0), ((1,), -1.0), ((0,), -3.0)}
    assert [sorted(layer) for layer in closure.layers] == [
        [((0,), 0.0)],
        [((-1,), -1.0), ((1,), -1.0)],
        [((0,), -3.0)],
    ]
    # the shared grandchild was explored exactly once
    assert len(calls) == 4
    assert closure.t_star == -4.0
    # widths: point site +- beta(depth) with unit slope
    assert closure.l_star_plus == 3
    assert closure.l_star_minus == -3
    assert closure.l_star == 3
    # resolution goes deepest-first and yields + everywhere
    assert closure.schedule[0] == ((0,), -3.0)
    value = resolve_all(model, closure)
    assert value == 0
    for pt in closure.points.values():
        assert pt.resolved == 0


def test_t_star_below_every_point(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    for k in range(300):
        field = EventField.for_model(perturbed_voter, derive_seed(207, k))
        closure = build_amb_closure(perturbed_voter, th, field)
        for (site, t), pt in closure.points.items():
            assert closure.t_star <= pt.outcome.t_min <= t


def test_full_sample_matches_window_replay(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    for k in range(500):
        seed = derive_seed(209, k)
        field = EventField.for_model(perturbed_voter, seed)
        closure = build_amb_closure(perturbed_voter, th, field)
        value = resolve_all(perturbed_voter, closure, seed=seed)
        assert global_consensus_value(perturbed_voter, field, closure.t_star,
                                      closure.l_star, seed=seed) == value


def test_sample_site_deterministic(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    a = sample_site(perturbed_voter, th, 12345)
    b = sample_site(perturbed_voter, th, 12345)
    assert a == b


def test_sample_site_reports_budget_failure(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    res = sample_site(perturbed_voter, th, 4, caps=Caps(nodes=1))
    assert res.failed and res.value is None and "cap" in res.reason


def test_failure_rate_decreases_with_caps(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    n = 400

    def rate(caps):
        failed = 0
        for k in range(n):
            if sample_site(perturbed_voter, th, derive_seed(211, k),
                           caps=caps).failed:
                failed += 1
        return failed / n

    small = rate(Caps(nodes=4))
    double = rate(Caps(nodes=8))
    assert small > double


def test_independent_sites_marginal(indep_model):
    th = make_theta(indep_model, "finite_factor(b=0)")
    n = 20_000
    values = [sample_site(indep_model, th, derive_seed(213, k)).value
              for k in range(n)]
    freq = values.count(0) / n
    tol = 3 * math.sqrt((2 / 3) * (1 / 3) / n)
    assert abs(freq - 2 / 3) < tol


def test_polling_marginal_matches_torus(polling_model):
    from latticecftp.oracle import torus_stationary
    th = make_theta(polling_model, "polling")
    exact = torus_stationary(polling_model, 6).marginal[0]
    n = 10_000
    values = [sample_site(polling_model, th, derive_seed(214, k)).value
              for k in range(n)]
    freq = values.count(0) / n
    assert abs(freq - exact) < 3 * math.sqrt(exact * (1 - exact) / n)


def test_sample_marginal_zero_site_matches_sample_site(indep_model):
    th = make_theta(indep_model, "finite_factor(b=0)")
    seeds = [derive_seed(215, k) for k in range(20)]
    per_site = sample_marginal(indep_model, th, [(0,)], seeds)
    direct = [sample_site(indep_model, th, s) for s in seeds]
    assert per_site[(0,)] == direct


def test_sample_marginal_empty_sites(indep_model):
    th = make_theta(indep_model, "finite_factor(b=0)")
    assert sample_marginal(indep_model, th, [], [1, 2]) == {}


def test_sample_marginal_translation_invariance(indep_model):
    th = make_theta(indep_model, "finite_factor(b=0)")
    n = 4000
    seeds = [derive_seed(217, k) for k in range(n)]
    per_site = sample_marginal(indep_model, th, [(0,), (5,)], seeds)
    f0 = np.mean([r.value == 0 for r in per_site[(0,)]])
    f5 = np.mean([r.value == 0 for r in per_site[(5,)]])
    se = math.sqrt(2 * (2 / 3) * (1 / 3) / n)
    assert abs(f0 - f5) < 3 * se


def test_width_soundness_rerandomize_outside(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    for k in range(100):
        seed = derive_seed(219, k)
        field = EventField.for_model(perturbed_voter, seed)
        closure = build_amb_closure(perturbed_voter, th, field)
        value = resolve_all(perturbed_voter, closure, seed=seed)
        radius = closure.l_star
        spliced = EventField.for_model(
            perturbed_voter, seed,
            salt_sites=lambda s, r=radius: (0xF00D if max(abs(c) for c in s) > r
                                            else None))
        closure2 = build_amb_closure(perturbed_voter, th, spliced)
        assert resolve_all(perturbed_voter, closure2, seed=seed) == value
        assert closure2.t_star == closure.t_star
        assert closure2.l_star == closure.l_star
