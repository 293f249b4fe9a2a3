"""Shared test helpers: hand-built event fields and standard models."""

from __future__ import annotations

import pytest

from latticecftp.event_field import Event, event_sort_key, _is_before
from latticecftp.models import (Rule, PERTURBATIVE, independent_sites,
                                noisy_voter, asymmetric_polling,
                                with_perturbation)


class FakeField:
    """In-memory event field with hand-placed events.

    Implements the same query protocol as EventField over a fixed finite
    event list; queries below the last event return nothing, which the
    exploration treats as a budget failure, so scripted scenarios must
    terminate before running out of events.
    """

    total_rate = 1.0

    def __init__(self, events):
        self.events = sorted(events, key=event_sort_key, reverse=True)

    def latest_before_key(self, sites, floor):
        sites = set(sites)
        best = None
        for ev in self.events:
            if ev.site in sites and _is_before(ev.time, ev.site, ev.rule, floor):
                if best is None or event_sort_key(ev) > event_sort_key(best):
                    best = ev
        return best

    def latest_event_before(self, sites, t):
        return self.latest_before_key(sites, (t, None, None))

    def events_in_window(self, box, t_lo, t_hi):
        box = set(box)
        out = [ev for ev in self.events
               if ev.site in box and t_lo <= ev.time < t_hi]
        return sorted(out, key=event_sort_key)


def ev(site, rule, time):
    if isinstance(site, int):
        site = (site,)
    return Event(site, rule, time)


@pytest.fixture
def indep_model():
    return independent_sites({"A": 2.0, "B": 1.0})


@pytest.fixture
def voter_model():
    return noisy_voter({1: 0.5, -1: 0.5}, {"+": 0.5, "-": 0.5})


@pytest.fixture
def polling_model():
    return asymmetric_polling([[-1, 0, 1]], [1.0], 0.5, 0.5)


def anticonformist_rule(rate=0.05):
    table = {(0, 0): 1, (1, 1): 0, (0, 1): 0, (1, 0): 1}
    return Rule(((0,), (1,)), table, rate, PERTURBATIVE, 2,
                name="anticonformist")


def copy_right_rule(n_states, rate):
    return Rule(((1,),), {(s,): s for s in range(n_states)}, rate,
                PERTURBATIVE, n_states, name="copy-right")


@pytest.fixture
def perturbed_voter(voter_model):
    return with_perturbation(voter_model, [anticonformist_rule(0.05)])
