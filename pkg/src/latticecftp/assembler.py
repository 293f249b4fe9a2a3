"""Ambiguity closure and the exact sampler.

A locking run at the origin leaves a finite set H of ambiguous events; the
value of each depends on the neighbor states just before it, i.e. on the
coupled values at finitely many earlier space-time points.  Closing that
dependency recursively yields a finite point set; resolving points from the
deepest past forward turns every ambiguity into a known value, and the root
resolution is an exact draw from the stationary marginal at the origin
site.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import Optional

from .errors import BudgetExceeded, CouplingViolation, ScheduleIncomplete
from .event_field import EventField, Site, event_sort_key
from .exploration import ThetaMap, _add, consensus_configs
from .locking import Caps, CftpAmbOutcome, explore_with_locking, resolve_readout
from .models import Model, flow_replay
from .seeding import mix, site_hash

PointKey = tuple  # (site, time)


@dataclass
class AmbPoint:
    site: Site
    time: float
    outcome: CftpAmbOutcome
    #: per ambiguous event, the child point keys in neighborhood-offset order
    children: dict = dc_field(default_factory=dict)
    resolved: Optional[int] = None

    @property
    def key(self) -> PointKey:
        return (self.site, self.time)


@dataclass
class AmbClosure:
    root: PointKey
    points: dict
    layers: list
    t_star: float
    l_star_plus: int
    l_star_minus: int
    l_star: int
    schedule: list
    total_tree_nodes: int
    total_events: int


def _point_sort_key(key: PointKey):
    return (key[1], key[0])


def build_amb_closure(model: Model, theta: ThetaMap, field: EventField,
                      caps: Optional[Caps] = None,
                      root_site: Optional[Site] = None) -> AmbClosure:
    """Breadth-first closure of the ambiguity dependencies.

    Every distinct point gets exactly one locking outcome (points reached
    along several paths are deduplicated by exact (site, time) equality;
    times of shared events are bit-identical by construction, so no
    tolerance is involved).
    """
    if caps is None:
        caps = Caps()
    if root_site is None:
        root_site = (0,) * model.dim
    root_key: PointKey = (root_site, 0.0)
    points: dict[PointKey, AmbPoint] = {}
    layers: list[list[PointKey]] = []
    current = [root_key]
    while current:
        if len(layers) >= caps.layers:
            raise BudgetExceeded(f"closure layer cap {caps.layers} reached",
                                 partial=points)
        layers.append(list(current))
        nxt: list[PointKey] = []
        seen_next: set[PointKey] = set()
        for key in current:
            site, time = key
            outcome = explore_with_locking(model, theta, field,
                                           origin=(site, time), caps=caps)
            point = AmbPoint(site, time, outcome)
            for alpha in sorted(outcome.H, key=event_sort_key):
                if not alpha.time < time:
                    raise AssertionError(
                        "ambiguous event not strictly below its origin")
                offsets = model.rules[alpha.rule].offsets
                child_keys = tuple((_add(alpha.site, off), alpha.time)
                                   for off in offsets)
                point.children[alpha] = child_keys
                for ck in child_keys:
                    if ck not in points and ck not in seen_next:
                        seen_next.add(ck)
                        nxt.append(ck)
            points[key] = point
            if len(points) > caps.points:
                raise BudgetExceeded(f"closure point cap {caps.points} reached",
                                     partial=points)
        nxt.sort(key=_point_sort_key)
        current = [k for k in nxt if k not in points]
    t_star = min(pt.outcome.t_min for pt in points.values())
    l_plus = max(max(pt.site) + pt.outcome.L for pt in points.values())
    l_minus = min(min(pt.site) - pt.outcome.L for pt in points.values())
    l_star = max(l_plus, -l_minus)
    schedule = sorted(points.keys(), key=_point_sort_key)
    return AmbClosure(
        root=root_key, points=points, layers=layers, t_star=t_star,
        l_star_plus=l_plus, l_star_minus=l_minus, l_star=l_star,
        schedule=schedule,
        total_tree_nodes=sum(pt.outcome.node_count for pt in points.values()),
        total_events=sum(pt.outcome.event_count for pt in points.values()))


def resolve_all(model: Model, closure: AmbClosure, mode: str = "consensus",
                k: int = 6, seed: int = 0,
                theta: Optional[ThetaMap] = None) -> int:
    """Resolve every point from the furthest past forward; root value out.

    Ascending time is a valid linearization: every dependency edge points
    strictly backward in time, and ties are impossible by event-time
    uniqueness.
    """
    for key in closure.schedule:
        pt = closure.points[key]
        evalues = {}
        for alpha, child_keys in pt.children.items():
            vals = []
            for ck in child_keys:
                child = closure.points.get(ck)
                if child is None or child.resolved is None:
                    raise ScheduleIncomplete(
                        f"point {ck} needed by {key} is unresolved")
                vals.append(child.resolved)
            evalues[alpha] = model.rules[alpha.rule].output(vals)
        pt.resolved = resolve_readout(model, pt.outcome, evalues, mode=mode,
                                      k=k, seed=mix(seed, 0xA3), theta=theta)
    return closure.points[closure.root].resolved


@dataclass
class SampleResult:
    seed: int
    value: Optional[int]
    label: Optional[str]
    t_star: Optional[float]
    l_star: Optional[int]
    points: int
    tree_nodes: int
    events: int
    failed: bool
    reason: Optional[str] = None


def sample_site(model: Model, theta: ThetaMap, seed: int,
                caps: Optional[Caps] = None, site: Optional[Site] = None,
                mode: str = "consensus") -> SampleResult:
    """Draw one exact stationary-marginal sample at ``site``.

    Budget overruns and internal readout violations are reported in the
    failure flag rather than raised; a failed sample carries its work
    counters for diagnostics.  Discarding failed samples conditions on
    success, so callers must surface the failure count.
    """
    if site is None:
        site = (0,) * model.dim
    field = EventField.for_model(model, seed)
    try:
        closure = build_amb_closure(model, theta, field, caps=caps,
                                    root_site=site)
        value = resolve_all(model, closure, mode=mode, seed=seed, theta=theta)
    except BudgetExceeded as exc:
        return SampleResult(seed, None, None, None, None, 0, 0, 0, True,
                            reason=str(exc))
    except CouplingViolation as exc:
        return SampleResult(seed, None, None, None, None, 0, 0, 0, True,
                            reason=f"coupling violation: {exc}")
    return SampleResult(seed, value, model.states.label(value),
                        closure.t_star, closure.l_star, len(closure.points),
                        closure.total_tree_nodes, closure.total_events, False)


def sample_marginal(model: Model, theta: ThetaMap, sites, seeds,
                    caps: Optional[Caps] = None) -> dict:
    """Per-site exact marginal samples by translating the construction.

    Each requested site is sampled on independent realizations (one per
    seed, re-keyed per site; the origin site keeps the base seed so that
    sampling {0} alone coincides with sample_site).  This yields correct
    one-site marginals, not the joint law across sites.
    """
    origin = (0,) * model.dim
    out: dict[Site, list[SampleResult]] = {}
    for s in sites:
        s = tuple(s)
        out[s] = [sample_site(model, theta,
                              seed if s == origin else site_hash(seed, s),
                              caps=caps, site=s)
                  for seed in seeds]
    return out


def global_consensus_value(model: Model, field: EventField, t_star: float,
                           l_star: int, root_site: Optional[Site] = None,
                           n_configs: int = 8, seed: int = 0) -> int:
    """Independent whole-window check of a sample.

    Replays every event of the realization inside the stopping box over
    [t_star, 0) from ``n_configs`` initial configurations (reads outside the
    box fall through to each frozen initial field) and requires agreement at
    the root site.
    """
    if root_site is None:
        root_site = (0,) * model.dim
    radius = int(l_star)
    lo = [c - radius for c in root_site]
    hi = [c + radius for c in root_site]
    box = [tuple(p) for p in itertools.product(
        *[range(a, b + 1) for a, b in zip(lo, hi)])]
    events = field.events_in_window(box, t_star, 0.0)
    value = None
    for i, cfg in enumerate(consensus_configs(len(model.states),
                                              max(n_configs, 2),
                                              mix(seed, 0x6C0))):
        if i >= n_configs:
            break
        v = flow_replay(model, events, cfg).get(root_site)
        if value is None:
            value = v
        elif v != value:
            raise CouplingViolation(
                f"window replays disagree at {root_site}: {value} vs {v}")
    return value
