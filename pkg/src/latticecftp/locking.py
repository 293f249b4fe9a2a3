"""Branching exploration that locks perturbative outcomes.

The plain exploration cannot pass a perturbative event because its output
depends on neighbor values that are not yet determined.  Instead the run
forks: one branch per distinct output value v of the rule, each continuing
as if the event had been the unconditional write of v.  The result is a
labeled tree whose leaves are terminated explorations; the deepest explored
time T and the set H of encountered perturbative events form a coupling
time "with ambiguities": once the true output value of every event in H is
known, walking the matching root-to-leaf path and reading out its leaf
yields the coupled origin value.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Mapping, Optional

from .errors import BudgetExceeded, MissingEValue, ValidationError
from .event_field import Event, EventField
from .exploration import (Origin, ThetaMap, _add, _sub, readout_consensus)
from .models import Model


@dataclass
class Caps:
    """Work limits; hitting one makes the sample fail explicitly."""

    nodes: int = 100_000
    depth: int = 10_000
    points: int = 10_000
    layers: int = 1_000

    @classmethod
    def parse(cls, text: str) -> "Caps":
        """Parse 'nodes=...,depth=...,points=...,layers=...' (any subset)."""
        caps = cls()
        if not text:
            return caps
        for part in text.split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in ("nodes", "depth", "points", "layers"):
                raise ValidationError(f"caps: unknown field {key!r}")
            setattr(caps, key, int(val))
        return caps


@dataclass
class LockNode:
    """One vertex of the locking tree.

    ``in_event`` is the effective event appended on the edge from the
    parent (perturbative events arrive rewritten to the unconditional rule
    of the branch label); ``found`` is the original event discovered at this
    vertex, set only for interior vertices.
    """

    parent: Optional[int]
    depth: int
    label: Optional[int]          # branch value on the edge from the parent
    in_event: Optional[Event]     # effective event on that edge
    theta_state: object
    frontier: frozenset
    floor: tuple
    found: Optional[Event] = None  # original event found here
    children: list = dc_field(default_factory=list)


class LockTree:
    def __init__(self):
        self.nodes: list[LockNode] = []

    def add(self, node: LockNode) -> int:
        self.nodes.append(node)
        if node.parent is not None:
            self.nodes[node.parent].children.append(len(self.nodes) - 1)
        return len(self.nodes) - 1

    def path_events(self, node_id: int) -> list[Event]:
        """Effective events from the root down to ``node_id``."""
        out = []
        while node_id is not None:
            node = self.nodes[node_id]
            if node.in_event is not None:
                out.append(node.in_event)
            node_id = node.parent
        out.reverse()
        return out

    def leaves(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if not n.children]

    def format(self, model: Model) -> str:
        """Indented debug dump."""
        lines = []

        def walk(i, indent):
            n = self.nodes[i]
            tag = ""
            if n.label is not None:
                tag = f"[{model.states.label(n.label)}] "
            ev = n.found
            desc = (f"{tag}found={ev.site}@{ev.time:.6f} "
                    f"rule={model.rules[ev.rule].name or ev.rule}"
                    if ev is not None else f"{tag}leaf")
            lines.append("  " * indent + f"- depth={n.depth} {desc}")
            for c in n.children:
                walk(c, indent + 1)

        walk(0, 0)
        return "\n".join(lines)


@dataclass
class CftpAmbOutcome:
    """Result of one locking exploration at a space-time origin."""

    origin: Origin
    t_min: float                 # absolute time of the deepest explored event
    H: frozenset                 # perturbative events met (original rules)
    tree: LockTree
    depth: int                   # tree depth R in edges
    L: int                       # frontier bound evaluated at R
    node_count: int
    event_count: int             # number of event queries (interior nodes)

    @property
    def t_rel(self) -> float:
        return self.t_min - self.origin[1]


def explore_with_locking(model: Model, theta: ThetaMap, field: EventField,
                         origin: Optional[Origin] = None,
                         caps: Optional[Caps] = None) -> CftpAmbOutcome:
    """Depth-first construction of the locking tree at ``origin``.

    Children of a branch are visited in state-index order; the traversal
    order cannot change the outcome (branches read disjoint continuations
    of the same memoized realization) but fixes work accounting.
    """
    if origin is None:
        origin = ((0,) * model.dim, 0.0)
    if caps is None:
        caps = Caps()
    origin_site, origin_time = origin
    tree = LockTree()
    state0 = theta.initial_state()
    root = tree.add(LockNode(None, 0, None, None, state0,
                             theta.frontier(state0), (origin_time, None, None)))
    H: set[Event] = set()
    t_min = origin_time
    event_count = 0
    max_depth = 0
    stack = [root]
    while stack:
        a = stack.pop()
        node = tree.nodes[a]
        max_depth = max(max_depth, node.depth)
        if not node.frontier:
            continue  # terminated leaf
        theta.check_containment(node.theta_state, node.depth)
        if node.depth >= caps.depth:
            raise BudgetExceeded(f"locking depth cap {caps.depth} reached",
                                 partial=tree)
        abs_sites = [_add(origin_site, s) for s in node.frontier]
        ev = field.latest_before_key(abs_sites, node.floor)
        if ev is None:
            raise BudgetExceeded("event field has zero total rate", partial=tree)
        node.found = ev
        event_count += 1
        if ev.time < t_min:
            t_min = ev.time
        rule = model.rules[ev.rule]
        rel_site = _sub(ev.site, origin_site)
        if rule.perturbative:
            H.add(ev)
            branches = [(v, Event(ev.site, model.iota_index(v), ev.time))
                        for v in sorted(rule.image)]
        else:
            branches = [(None, ev)]
        child_ids = []
        for label, eff_ev in branches:
            eff_rule = model.rules[eff_ev.rule]
            child_state = theta.update(node.theta_state, rel_site, eff_rule)
            child = LockNode(a, node.depth + 1, label, eff_ev, child_state,
                             theta.frontier(child_state), ev.key())
            if len(tree.nodes) >= caps.nodes:
                raise BudgetExceeded(f"locking node cap {caps.nodes} reached",
                                     partial=tree)
            child_ids.append(tree.add(child))
        stack.extend(reversed(child_ids))
    return CftpAmbOutcome(origin, t_min, frozenset(H), tree, max_depth,
                          theta.beta(max_depth), len(tree.nodes), event_count)


def resolve_readout(model: Model, outcome: CftpAmbOutcome,
                    evalues: Mapping[Event, int], mode: str = "consensus",
                    k: int = 6, seed: int = 0,
                    theta: Optional[ThetaMap] = None) -> int:
    """Coupled origin value of the outcome, given the values of its
    ambiguous events.

    Walks the root-to-leaf path selecting at each branch the child labeled
    ``evalues[found event]``; the leaf's event list already carries those
    values baked in as unconditional writes, so the ordinary readout of the
    leaf finishes the job.
    """
    tree = outcome.tree
    node_id = 0
    while True:
        node = tree.nodes[node_id]
        if not node.children:
            break
        if len(node.children) == 1:
            node_id = node.children[0]
            continue
        v = evalues.get(node.found)
        if v is None:
            raise MissingEValue(f"no value supplied for branch event {node.found}")
        for c in node.children:
            if tree.nodes[c].label == v:
                node_id = c
                break
        else:
            raise MissingEValue(
                f"value {v} is not a branch label of {node.found}")
    events = tree.path_events(node_id)
    if mode == "exact" and theta is not None and theta.exact_readout is not None:
        return theta.exact_readout(model, events)
    return readout_consensus(model, events, k=k, seed=seed,
                             origin=outcome.origin)
