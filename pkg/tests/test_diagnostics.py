"""Estimator identities, monotonicity, bound checks, tail curves."""

import math

import numpy as np
import pytest

from latticecftp.diagnostics import (check_bounds, estimate_g,
                                     estimate_lambda, tail_curve)
from latticecftp.errors import ValidationError
from latticecftp.exploration import make_theta
from latticecftp.models import noisy_voter, with_perturbation
from conftest import anticonformist_rule


def test_g_zero_without_perturbation(voter_model):
    th = make_theta(voter_model, "voter")
    rep = estimate_g(voter_model, th, 200, seed=1)
    assert rep.estimate == 0.0 and rep.std_error == 0.0
    assert rep.n == 200 and rep.n_censored == 0 and not rep.biased


def test_g_monotone_in_perturbative_rate(voter_model):
    th_specs = []
    for rate in (0.1, 0.2):
        model = with_perturbation(voter_model, [anticonformist_rule(rate)])
        th_specs.append((model, make_theta(model, "voter")))
    n = 10_000
    reps = [estimate_g(m, th, n, seed=5) for m, th in th_specs]
    gap = reps[1].estimate - reps[0].estimate
    assert gap > 3 * math.hypot(reps[0].std_error, reps[1].std_error)


def test_g_estimates_deterministic(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    a = estimate_g(perturbed_voter, th, 500, seed=9)
    b = estimate_g(perturbed_voter, th, 500, seed=9)
    assert a == b


def test_lambda_identities_at_zero(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    n = 2000
    rep_T = estimate_lambda(perturbed_voter, th, "T", 0.0, n, seed=3)
    assert rep_T.estimate == 1.0 and rep_T.std_error == 0.0
    rep_L = estimate_lambda(perturbed_voter, th, "L", 0.0, n, seed=3)
    assert rep_L.estimate == 1.0
    # at lambda=0 the H_time functional is exactly the ambiguity load
    rep_H = estimate_lambda(perturbed_voter, th, "H_time", 0.0, n, seed=3)
    rep_g = estimate_g(perturbed_voter, th, n, seed=3)
    assert rep_H.estimate == rep_g.estimate
    assert rep_H.std_error == rep_g.std_error


def test_h_space_zero_without_perturbation(voter_model):
    th = make_theta(voter_model, "voter")
    rep = estimate_lambda(voter_model, th, "H_space", 0.1, 200, seed=4)
    assert rep.estimate == 0.0


def test_censored_replicates_flag_bias(perturbed_voter):
    from latticecftp.locking import Caps
    th = make_theta(perturbed_voter, "voter")
    rep = estimate_g(perturbed_voter, th, 300, seed=6, caps=Caps(nodes=3))
    assert rep.n_censored > 0
    assert rep.n == 300
    assert rep.biased


def test_lambda_preconditions(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    with pytest.raises(ValidationError):
        estimate_lambda(perturbed_voter, th, "T", 0.5, 10)
    with pytest.raises(ValidationError):
        estimate_lambda(perturbed_voter, th, "H_time", 0.5, 10)
    with pytest.raises(ValidationError):
        estimate_lambda(perturbed_voter, th, "H_space", 0.1, 10, q=3)
    with pytest.raises(ValidationError):
        estimate_lambda(perturbed_voter, th, "what", 0.0, 10)
    # H_space and L accept both signs
    estimate_lambda(perturbed_voter, th, "H_space", -0.1, 10)
    estimate_lambda(perturbed_voter, th, "L", 0.1, 10)


def test_check_bounds_degenerate(voter_model):
    th = make_theta(voter_model, "voter")
    report = check_bounds(voter_model, th, -0.1, 2000, seed=8)
    assert report["applicable"]
    assert report["Lambda_H_time"]["estimate"] == 0.0
    assert report["bound"] == report["Lambda_T"]["estimate"]
    assert report["passed"]


def test_check_bounds_perturbed(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    report = check_bounds(perturbed_voter, th, -0.1, 3000, seed=10)
    assert report["applicable"] and report["passed"]
    assert report["Lambda_H_time"]["estimate"] < 1.0


def test_check_bounds_not_applicable(voter_model):
    heavy = with_perturbation(voter_model, [anticonformist_rule(5.0)])
    th = make_theta(heavy, "voter")
    report = check_bounds(heavy, th, -0.1, 500, seed=11)
    assert report["applicable"] is False and report["passed"] is None
    assert "bound" not in report


def test_tail_curve_step_function(indep_model):
    th = make_theta(indep_model, "finite_factor(b=0)")
    curve = dict(tail_curve(indep_model, th, "exploration_size", 1000, seed=12,
                            thresholds=[1, 2, 3]))
    assert curve[1.0] == 1.0 and curve[2.0] == 0.0 and curve[3.0] == 0.0


def test_tail_curve_slope_grows_with_noise():
    slopes = []
    for noise in (0.15, 0.4):
        model = noisy_voter({1: 0.5, -1: 0.5}, {"+": noise, "-": noise})
        th = make_theta(model, "voter")
        curve = tail_curve(model, th, "exploration_size", 4000, seed=13,
                           thresholds=list(range(1, 11)))
        xs = np.array([x for x, s in curve if s > 0])
        ys = np.log([s for _, s in curve if s > 0])
        slope = np.polyfit(xs, ys, 1)[0]
        assert slope < 0
        slopes.append(slope)
    assert abs(slopes[1]) > abs(slopes[0])


def test_tail_curve_preconditions(indep_model):
    th = make_theta(indep_model, "finite_factor(b=0)")
    with pytest.raises(ValidationError):
        tail_curve(indep_model, th, "exploration_size", 10)
    with pytest.raises(ValidationError):
        tail_curve(indep_model, th, "nonsense", 1000)


def test_tail_curve_full_sample_quantities(perturbed_voter):
    th = make_theta(perturbed_voter, "voter")
    curve = dict(tail_curve(perturbed_voter, th, "closure_points", 1000,
                            seed=14, thresholds=[1, 2, 50]))
    assert curve[1.0] == 1.0           # every sample has at least the root
    assert 0 < curve[2.0] < 0.5        # branches are rare but present
    assert curve[50.0] == 0.0
    depth = dict(tail_curve(perturbed_voter, th, "t_star_depth", 1000,
                            seed=15, thresholds=[0, 20]))
    assert depth[0.0] == 1.0 and depth[20.0] < 0.05
