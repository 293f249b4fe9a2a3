"""Backward exploration of the event history driven by a frontier map.

An exploration starts at a space-time origin with frontier {0} (or a fixed
box), repeatedly fetches the most recent event on the frontier strictly
before the current floor, feeds it to the frontier map, and stops when the
frontier empties.  The explored event set then determines the state of the
origin site at the origin time for every initial configuration; the readout
extracts that coupled value.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

from .errors import (BudgetExceeded, CouplingViolation, ModelShapeMismatch,
                     ValidationError)
from .event_field import EventField, Site, event_sort_key
from .models import Model, PatchConfig, Rule, flow_replay
from .seeding import mix

Origin = tuple[Site, float]


def _add(a: Site, b: Site) -> Site:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: Site, b: Site) -> Site:
    return tuple(x - y for x, y in zip(a, b))


def _norm_inf(site: Site) -> int:
    return max(abs(c) for c in site) if site else 0


# ---------------------------------------------------------------------------
# frontier maps


class ThetaMap:
    """Frontier map interface.

    State is an opaque immutable value; ``update`` consumes one explored
    event (relative site, effective rule) and ``frontier`` exposes the set
    of relative sites still to be examined.  ``beta(n)`` bounds the max-norm
    of the frontier after n explored events and grows at most linearly with
    declared slope ``beta_slope``.
    """

    name = "abstract"
    #: exact readout (model, events) -> state, or None to use consensus only
    exact_readout: Optional[Callable] = None

    def initial_state(self):
        raise NotImplementedError

    def update(self, state, rel_site: Site, rule: Rule):
        raise NotImplementedError

    def frontier(self, state) -> frozenset:
        raise NotImplementedError

    def beta(self, n: int) -> int:
        raise NotImplementedError

    def check_containment(self, state, n: int) -> None:
        front = self.frontier(state)
        if front:
            radius = max(_norm_inf(s) for s in front)
            if radius > self.beta(n):
                raise AssertionError(
                    f"{self.name}: frontier radius {radius} exceeds "
                    f"beta({n})={self.beta(n)}")


class FiniteFactorTheta(ThetaMap):
    """Constant-box frontier for dynamics whose origin value depends only on
    a width-b window.

    The frontier is the full box [-b, b]^d until the last (2b+1)^d explored
    events are unconditional and their sites cover the box exactly, at which
    point every box site has a pinned value and exploration stops.
    """

    def __init__(self, model: Model, b: int):
        if b < 0:
            raise ValidationError("finite_factor: b must be >= 0")
        self.name = f"finite_factor(b={b})"
        self.b = int(b)
        self.model = model
        self.box = frozenset(itertools.product(range(-b, b + 1), repeat=model.dim))
        self.h = len(self.box)
        self.beta_slope = 0

    def initial_state(self):
        return ()  # trailing window of (site, unconditional?) pairs

    def update(self, state, rel_site, rule):
        entry = (rel_site, rule.arity == 0)
        state = (state + (entry,))[-self.h:]
        return state

    def frontier(self, state):
        if len(state) == self.h and all(u for _, u in state) \
                and {s for s, _ in state} == self.box:
            return frozenset()
        return self.box

    def beta(self, n):
        return self.b

    def check_containment(self, state, n):
        # the frontier is the fixed box [-b, b]^d or empty; the bound holds
        # by construction
        pass


class VoterTheta(ThetaMap):
    """Single-lineage frontier for copy dynamics with unconditional noise.

    Each copy event redirects the lineage to the copied neighbor; the first
    unconditional event on the lineage pins the value and stops exploration.
    """

    def __init__(self, model: Model):
        self.name = "voter"
        self.model = model
        zero = (0,) * model.dim
        slope = 0
        for i in model.unperturbed_indices:
            rule = model.rules[i]
            if rule.arity == 0:
                continue
            if rule.arity != 2 or rule.offsets[0] != zero:
                raise ModelShapeMismatch(
                    f"voter: rule {rule.name or i} is neither unconditional "
                    "nor a (0, x) pair rule")
            ok = all(rule.output((a, b)) == b
                     for a in range(len(model.states))
                     for b in range(len(model.states)))
            if not ok:
                raise ModelShapeMismatch(
                    f"voter: rule {rule.name or i} does not copy its neighbor")
            slope = max(slope, _norm_inf(rule.offsets[1]))
        self.beta_slope = slope
        self._zero = zero
        self.exact_readout = readout_voter

    def initial_state(self):
        return self._zero  # current lineage site; None once terminated

    def update(self, state, rel_site, rule):
        if rule.arity == 0:
            return None
        return _add(rel_site, rule.offsets[1])

    def frontier(self, state):
        return frozenset() if state is None else frozenset((state,))

    def beta(self, n):
        return self.beta_slope * n


class PollingTheta(ThetaMap):
    """Growing-frontier map for asymmetric polling dynamics on {+,-}.

    A + unconditional anywhere on the frontier settles the origin to + (the
    poll tables are monotone in +); a - unconditional resolves its site and
    shrinks the frontier; a poll event replaces its site by the polled
    sites.  Exploration ends at the first + or when every branch has
    resolved to -.
    """

    def __init__(self, model: Model):
        self.name = "polling"
        self.model = model
        if len(model.states) != 2:
            raise ModelShapeMismatch("polling: needs a two-state model")
        plus = 0
        slope = 0
        for i in model.unperturbed_indices:
            rule = model.rules[i]
            if rule.arity == 0:
                continue
            ok = all(rule.output(combo) == (plus if plus in combo else 1)
                     for combo in itertools.product((0, 1), repeat=rule.arity))
            if not ok:
                raise ModelShapeMismatch(
                    f"polling: rule {rule.name or i} is not an any-plus poll")
            slope = max(slope, max(_norm_inf(off) for off in rule.offsets))
        self.beta_slope = slope
        self._zero = (0,) * model.dim
        self._plus = plus
        self.exact_readout = readout_polling

    def initial_state(self):
        return frozenset((self._zero,))

    def update(self, state, rel_site, rule):
        if rule.arity == 0:
            if rule.constant_value() == self._plus:
                return frozenset()
            return state - {rel_site}
        polled = frozenset(_add(rel_site, off) for off in rule.offsets)
        return (state - {rel_site}) | polled

    def frontier(self, state):
        return state

    def beta(self, n):
        return self.beta_slope * n


_THETA_SPEC_RE = re.compile(r"^finite_factor\(\s*b\s*=\s*(\d+)\s*\)$")


def make_theta(model: Model, spec: str) -> ThetaMap:
    """Build a frontier map from its selector string."""
    spec = spec.strip()
    if spec == "voter":
        return VoterTheta(model)
    if spec == "polling":
        return PollingTheta(model)
    m = _THETA_SPEC_RE.match(spec)
    if m:
        return FiniteFactorTheta(model, int(m.group(1)))
    raise ValidationError(
        f"theta: unknown selector {spec!r} "
        "(expected voter | polling | finite_factor(b=N))")


# ---------------------------------------------------------------------------
# the exploration process


@dataclass
class ExplorationTrace:
    """Record of one exploration run.

    Events are stored in absolute coordinates (the trace of site offsets is
    exact integer arithmetic; times are never re-derived so reused events
    stay bit-identical across shifted origins).  ``frontiers[n]`` is the
    relative frontier before the (n+1)-th event; ``gammas`` tracks the
    absolute floor, starting at the origin time.
    """

    origin: Origin
    events: list = dc_field(default_factory=list)
    frontiers: list = dc_field(default_factory=list)
    gammas: list = dc_field(default_factory=list)
    terminated: bool = False

    @property
    def size(self) -> int:
        return len(self.events)

    @property
    def t_final(self) -> float:
        """Absolute time of the deepest explored event (origin time if none)."""
        return self.gammas[-1]

    @property
    def t_rel(self) -> float:
        return self.t_final - self.origin[1]


def run_exploration(model: Model, theta: ThetaMap, field: EventField,
                    origin: Optional[Origin] = None,
                    cap: int = 100_000) -> ExplorationTrace:
    """Run the frontier-driven backward exploration until the frontier empties.

    Raises BudgetExceeded (carrying the partial trace) if the cap is hit or
    the field can produce no events, both standing in for a non-terminating
    exploration at finite budget.
    """
    if cap < 1:
        raise ValidationError("cap must be >= 1")
    if origin is None:
        origin = ((0,) * model.dim, 0.0)
    origin_site, origin_time = origin
    state = theta.initial_state()
    trace = ExplorationTrace(origin)
    frontier = theta.frontier(state)
    trace.frontiers.append(frontier)
    trace.gammas.append(origin_time)
    floor = (origin_time, None, None)
    n = 0
    while frontier:
        theta.check_containment(state, n)
        if n >= cap:
            raise BudgetExceeded(f"exploration cap {cap} reached", partial=trace)
        abs_sites = [_add(origin_site, s) for s in frontier]
        ev = field.latest_before_key(abs_sites, floor)
        if ev is None:
            raise BudgetExceeded("event field has zero total rate", partial=trace)
        trace.events.append(ev)
        trace.gammas.append(ev.time)
        floor = ev.key()
        state = theta.update(state, _sub(ev.site, origin_site),
                             model.rules[ev.rule])
        frontier = theta.frontier(state)
        trace.frontiers.append(frontier)
        n += 1
    trace.terminated = True
    return trace


# ---------------------------------------------------------------------------
# readouts


def _as_events(trace_or_events) -> list:
    if isinstance(trace_or_events, ExplorationTrace):
        return trace_or_events.events
    return list(trace_or_events)


def _origin_of(trace_or_events, model) -> Origin:
    if isinstance(trace_or_events, ExplorationTrace):
        return trace_or_events.origin
    return ((0,) * model.dim, 0.0)


def consensus_configs(n_states: int, k: int, seed: int) -> list[PatchConfig]:
    """Replay start configurations: one constant per state plus seeded
    uniform fields, at least two random ones."""
    configs = [PatchConfig.constant(n_states, s) for s in range(n_states)]
    n_random = max(2, k - n_states)
    configs.extend(PatchConfig.uniform(n_states, mix(seed, 0x5EED, i))
                   for i in range(n_random))
    return configs


def readout_consensus(model: Model, trace_or_events, substitutions=None,
                      k: int = 6, seed: int = 0,
                      origin: Optional[Origin] = None) -> int:
    """Coupled value at the origin by replaying the explored events from
    several initial configurations.

    Any disagreement raises CouplingViolation: it means the event set does
    not determine the origin value (bad frontier map or truncated trace).
    """
    if k < 2:
        raise ValidationError("consensus readout needs k >= 2 configurations")
    events = sorted(_as_events(trace_or_events), key=event_sort_key)
    if origin is None:
        origin = _origin_of(trace_or_events, model)
    origin_site = origin[0]
    value = None
    for cfg in consensus_configs(len(model.states), k, seed):
        final = flow_replay(model, events, cfg, substitutions)
        v = final.get(origin_site)
        if value is None:
            value = v
        elif v != value:
            raise CouplingViolation(
                f"replays disagree at {origin_site}: {value} vs {v} "
                f"({len(events)} events)")
    return value


def _terminal_unconditional_value(model: Model, trace_or_events) -> int:
    events = _as_events(trace_or_events)
    if not events:
        raise ModelShapeMismatch("empty trace has no terminal event")
    last = min(events, key=event_sort_key)
    rule = model.rules[last.rule]
    if rule.arity != 0:
        raise ModelShapeMismatch(
            "terminal event is not unconditional; trace not terminated?")
    return rule.constant_value()


def readout_voter(model: Model, trace_or_events) -> int:
    """Value written by the unconditional rule ending the copy lineage."""
    return _terminal_unconditional_value(model, trace_or_events)


def readout_polling(model: Model, trace_or_events) -> int:
    """+ if the deepest explored event is the + unconditional, - likewise."""
    return _terminal_unconditional_value(model, trace_or_events)
