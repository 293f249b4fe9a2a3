"""Rule-based lattice models and configuration overlays.

A model is a finite list of transition rules on a finite state space: each
rule carries an ordered offset neighborhood, a total lookup table mapping
neighborhood state tuples to an output state, a firing rate, and a kind
flag separating the base dynamics from perturbative additions.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (PositiveRatesMissing, UnsortedEvents, ValidationError,
                     ZeroTotalRate)
from .event_field import Event, Site, event_sort_key
from .seeding import site_hash

UNPERTURBED = "unperturbed"
PERTURBATIVE = "perturbative"


class StateSpace:
    """Ordered finite set of state labels; states are referenced by index."""

    def __init__(self, labels: Sequence[str]):
        labels = tuple(str(x) for x in labels)
        if not labels:
            raise ValidationError("states: must be non-empty")
        if len(set(labels)) != len(labels):
            raise ValidationError("states: labels must be distinct")
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(range(len(self.labels)))

    def index(self, label: str) -> int:
        return self._index[label]

    def label(self, idx: int) -> str:
        return self.labels[idx]

    def __eq__(self, other):
        return isinstance(other, StateSpace) and self.labels == other.labels

    def __repr__(self):
        return f"StateSpace({self.labels!r})"


class Rule:
    """One transition rule: (table f over offsets A, rate r).

    The table is a total map from state tuples indexed by the ordered offset
    list to a single output state; internally it is flattened into a radix
    array so applying the rule is a couple of integer ops.
    """

    def __init__(self, offsets: Sequence[Site], table: Mapping[tuple, int],
                 rate: float, kind: str, n_states: int, name: str = ""):
        self.offsets = tuple(tuple(int(c) for c in off) for off in offsets)
        self.rate = float(rate)
        self.kind = kind
        self.name = name
        self.n_states = int(n_states)
        arity = len(self.offsets)
        size = n_states ** arity
        flat = np.full(size, -1, dtype=np.int8)
        weights = [n_states ** j for j in range(arity)]
        for inputs, out in table.items():
            if len(inputs) != arity:
                raise ValidationError(
                    f"rule {name or '?'}: table key {inputs} has wrong arity")
            idx = sum(int(s) * w for s, w in zip(inputs, weights))
            flat[idx] = int(out)
        if (flat < 0).any():
            raise ValidationError(
                f"rule {name or '?'}: table not total "
                f"({int((flat < 0).sum())} of {size} inputs missing)")
        self._flat = flat
        self._weights = tuple(weights)
        self.image = frozenset(int(v) for v in np.unique(flat))

    @property
    def arity(self) -> int:
        return len(self.offsets)

    @property
    def perturbative(self) -> bool:
        return self.kind == PERTURBATIVE

    @property
    def unconditional(self) -> bool:
        return self.arity == 0

    def output(self, inputs: Sequence[int]) -> int:
        idx = 0
        for s, w in zip(inputs, self._weights):
            idx += s * w
        return int(self._flat[idx])

    def constant_value(self) -> int:
        """Output of an unconditional rule."""
        return int(self._flat[0])

    def table_dict(self) -> dict:
        out = {}
        for combo in itertools.product(range(self.n_states), repeat=self.arity):
            out[combo] = self.output(combo)
        return out

    def __repr__(self):
        return f"Rule({self.name or 'anon'}, A={self.offsets}, r={self.rate}, {self.kind})"


class Model:
    """Validated rule list with cached rates and positive-rates bookkeeping."""

    def __init__(self, dim: int, states: StateSpace, rules: Sequence[Rule]):
        self.dim = int(dim)
        self.states = states
        self.rules = tuple(rules)
        self.unperturbed_indices = tuple(
            i for i, r in enumerate(self.rules) if not r.perturbative)
        self.perturbative_indices = tuple(
            i for i, r in enumerate(self.rules) if r.perturbative)
        self.total_rate = float(sum(r.rate for r in self.rules))
        self.unperturbed_rate = float(
            sum(self.rules[i].rate for i in self.unperturbed_indices))
        iota: dict[int, int] = {}
        for i in self.unperturbed_indices:
            r = self.rules[i]
            if r.unconditional and r.rate > 0.0:
                iota.setdefault(r.constant_value(), i)
        self.positive_rates = len(iota) == len(states)
        self.iota = iota if self.positive_rates else None

    def iota_index(self, state: int) -> int:
        if self.iota is None:
            raise PositiveRatesMissing(
                "model lacks an unconditional positive-rate rule for every state")
        return self.iota[state]

    def rates_vector(self, unperturbed_only: bool = False) -> list[float]:
        return [r.rate if (not unperturbed_only or not r.perturbative) else 0.0
                for r in self.rules]

    def __repr__(self):
        return (f"Model(d={self.dim}, |S|={len(self.states)}, "
                f"{len(self.rules)} rules, total_rate={self.total_rate:g})")


def build_model(dim: int, states: Sequence[str] | StateSpace,
                rules: Sequence[Rule], merge_identical: bool = False) -> Model:
    """Validate and assemble a model.

    ``merge_identical`` collapses rules that agree on offsets, table, and
    kind into one rule with the summed rate; off by default to preserve the
    caller's rule indexing.
    """
    errors = []
    if dim < 1:
        errors.append("dim: must be >= 1")
    if not isinstance(states, StateSpace):
        try:
            states = StateSpace(states)
        except ValidationError as exc:
            errors.append(str(exc))
            raise ValidationError(errors)
    for k, rule in enumerate(rules):
        if not math.isfinite(rule.rate) or rule.rate < 0.0:
            errors.append(f"rules[{k}].rate: must be finite and non-negative")
        if rule.kind not in (UNPERTURBED, PERTURBATIVE):
            errors.append(f"rules[{k}].kind: unknown kind {rule.kind!r}")
        if rule.n_states != len(states):
            errors.append(f"rules[{k}]: table built for {rule.n_states} states, "
                          f"model has {len(states)}")
        for off in rule.offsets:
            if len(off) != dim:
                errors.append(f"rules[{k}].offsets: offset {off} has dimension "
                              f"{len(off)}, expected {dim}")
        if len(set(rule.offsets)) != len(rule.offsets):
            errors.append(f"rules[{k}].offsets: duplicate offsets")
    if errors:
        raise ValidationError(errors)
    if merge_identical:
        merged: list[Rule] = []
        seen: dict[tuple, int] = {}
        for rule in rules:
            sig = (rule.offsets, rule._flat.tobytes(), rule.kind)
            if sig in seen:
                old = merged[seen[sig]]
                merged[seen[sig]] = Rule(old.offsets, old.table_dict(),
                                         old.rate + rule.rate, old.kind,
                                         old.n_states, old.name)
            else:
                seen[sig] = len(merged)
                merged.append(rule)
        rules = merged
    return Model(dim, states, rules)


# ---------------------------------------------------------------------------
# configurations


class PatchConfig:
    """Sparse site->state overlay on top of a deterministic default field.

    The default is either a constant state or an i.i.d. uniform field keyed
    by (seed, site); reads outside the patch always fall through to it.
    """

    def __init__(self, n_states: int, default_state: int = 0,
                 uniform_seed: Optional[int] = None,
                 overrides: Optional[dict] = None):
        self.n_states = int(n_states)
        self.default_state = int(default_state)
        self.uniform_seed = uniform_seed
        self.patch: dict[Site, int] = dict(overrides or {})

    @classmethod
    def constant(cls, n_states: int, state: int) -> "PatchConfig":
        return cls(n_states, default_state=state)

    @classmethod
    def uniform(cls, n_states: int, seed: int) -> "PatchConfig":
        return cls(n_states, uniform_seed=seed)

    def get(self, site: Site) -> int:
        v = self.patch.get(site)
        if v is not None:
            return v
        if self.uniform_seed is not None:
            return site_hash(self.uniform_seed, site) % self.n_states
        return self.default_state

    def set(self, site: Site, state: int) -> None:
        self.patch[site] = int(state)

    def copy(self) -> "PatchConfig":
        return PatchConfig(self.n_states, self.default_state,
                           self.uniform_seed, self.patch)


def _add(site: Site, off: Site) -> Site:
    return tuple(a + b for a, b in zip(site, off))


def apply_rule(model: Model, cfg: PatchConfig, ev: Event) -> PatchConfig:
    """One-event update: rewrite ev.site by the rule table, all else unchanged."""
    rule = model.rules[ev.rule]
    out = cfg.copy()
    inputs = [cfg.get(_add(ev.site, off)) for off in rule.offsets]
    out.set(ev.site, rule.output(inputs))
    return out


def flow_replay(model: Model, events: Sequence[Event], xi: PatchConfig,
                substitutions: Optional[Mapping[Event, int]] = None) -> PatchConfig:
    """Replay a finite event list, oldest first, onto an initial configuration.

    Events present in ``substitutions`` write the mapped state directly
    instead of evaluating their rule table.
    """
    prev_key = None
    for ev in events:
        k = event_sort_key(ev)
        if prev_key is not None and k <= prev_key:
            raise UnsortedEvents(f"event {ev} out of order")
        prev_key = k
    cfg = xi.copy()
    subs = substitutions or {}
    rules = model.rules
    get = cfg.get
    set_ = cfg.set
    for ev in events:
        if subs and ev in subs:
            set_(ev.site, subs[ev])
            continue
        rule = rules[ev.rule]
        site = ev.site
        idx = 0
        for off, w in zip(rule.offsets, rule._weights):
            idx += get(tuple(a + b for a, b in zip(site, off))) * w
        set_(site, int(rule._flat[idx]))
    return cfg


# ---------------------------------------------------------------------------
# perturbation smallness parameters


def epsilon(model: Model) -> float:
    """Worst-case ratio of perturbative mass writing a state to its
    unconditional rate."""
    if model.iota is None:
        raise PositiveRatesMissing("epsilon requires the positive rates property")
    worst = 0.0
    for v in model.states:
        num = sum(model.rules[j].rate for j in model.perturbative_indices
                  if v in model.rules[j].image)
        worst = max(worst, num / model.rules[model.iota[v]].rate)
    return worst


def kappa(model: Model) -> float:
    """Neighborhood-weighted perturbative rate fraction."""
    if model.total_rate <= 0.0:
        raise ZeroTotalRate("kappa undefined for zero total rate")
    num = sum(model.rules[j].arity * model.rules[j].rate
              for j in model.perturbative_indices)
    return num / model.total_rate


# ---------------------------------------------------------------------------
# builders


def _as_offset(x, dim: int) -> Site:
    if isinstance(x, int):
        if dim != 1:
            raise ValidationError("scalar offsets only allowed for dim=1")
        return (x,)
    return tuple(int(c) for c in x)


def independent_sites(rates: Mapping[str, float], dim: int = 1) -> Model:
    """Non-interacting dynamics: one unconditional rule per state."""
    states = StateSpace(list(rates.keys()))
    rules = [Rule((), {(): states.index(lab)}, r, UNPERTURBED, len(states),
                  name=f"unconditional:{lab}")
             for lab, r in rates.items()]
    return build_model(dim, states, rules)


def noisy_voter(kernel: Mapping, noise: Mapping[str, float],
                states: Sequence[str] = ("+", "-"), dim: int = 1) -> Model:
    """Linear voter dynamics (copy a neighbor) plus unconditional noise rules."""
    space = StateSpace(states)
    n = len(space)
    rules = []
    zero = (0,) * dim
    for off, rate in kernel.items():
        off = _as_offset(off, dim)
        table = {(a, b): b for a in range(n) for b in range(n)}
        rules.append(Rule((zero, off), table, rate, UNPERTURBED, n,
                          name=f"copy:{','.join(map(str, off))}"))
    for lab, rate in noise.items():
        rules.append(Rule((), {(): space.index(lab)}, rate, UNPERTURBED, n,
                          name=f"unconditional:{lab}"))
    return build_model(dim, space, rules)


def asymmetric_polling(polls: Sequence[Sequence], poll_rates: Sequence[float],
                       noise_plus: float, noise_minus: float,
                       dim: int = 1) -> Model:
    """Two-state polling dynamics: adopt + if anyone polled says +, else -.

    Unconditional noise rules for both states enforce positive rates.
    """
    space = StateSpace(("+", "-"))
    plus, minus = 0, 1
    rules = []
    for k, (poll, rate) in enumerate(zip(polls, poll_rates)):
        offs = tuple(_as_offset(x, dim) for x in poll)
        if not offs:
            raise ValidationError(f"polls[{k}]: poll sets must be non-empty")
        table = {}
        for combo in itertools.product((plus, minus), repeat=len(offs)):
            table[combo] = plus if plus in combo else minus
        rules.append(Rule(offs, table, rate, UNPERTURBED, 2, name=f"poll:{k}"))
    rules.append(Rule((), {(): plus}, noise_plus, UNPERTURBED, 2,
                      name="unconditional:+"))
    rules.append(Rule((), {(): minus}, noise_minus, UNPERTURBED, 2,
                      name="unconditional:-"))
    return build_model(dim, space, rules)


RNYPR_STATES = ("A", "C", "G", "T")
_PYRIMIDINES = ("C", "T")
_PURINES = ("A", "G")


def rn_ypr(unconditional: float = 1.0, transversion: float = 0.25,
           transition: float = 0.25, left: float = 0.2, right: float = 0.2,
           rate_overrides: Optional[Mapping[str, float]] = None) -> Model:
    """Four-letter nucleotide dynamics with neighbor-dependent rewrites.

    Single-site rules: unconditional writes, cross-type rewrites
    (transversions) and within-type rewrites (transitions).  Dinucleotide
    rules rewrite a purine from its left pyrimidine context and a pyrimidine
    from its right purine context; their rates may be arbitrarily large
    without breaking the fixed-width dependence of the dynamics.

    ``rate_overrides`` maps rule names (e.g. ``"right:C,G->T"``) to rates,
    e.g. to crank up CpG-context hypermutability.
    """
    space = StateSpace(RNYPR_STATES)
    overrides = dict(rate_overrides or {})
    idx = space.index
    is_pyrimidine = {idx(x): x in _PYRIMIDINES for x in RNYPR_STATES}

    def rate_for(name: str, base: float) -> float:
        return overrides.pop(name, base)

    rules = []
    for v in RNYPR_STATES:
        name = f"unconditional:{v}"
        rules.append(Rule((), {(): idx(v)}, rate_for(name, unconditional),
                          UNPERTURBED, 4, name=name))
    for v in RNYPR_STATES:
        vi = idx(v)
        table = {(w,): vi if is_pyrimidine[w] != is_pyrimidine[vi] else w
                 for w in range(4)}
        name = f"transversion:{v}"
        rules.append(Rule(((0,),), table, rate_for(name, transversion),
                          UNPERTURBED, 4, name=name))
    for v in RNYPR_STATES:
        vi = idx(v)
        table = {(w,): vi if is_pyrimidine[w] == is_pyrimidine[vi] else w
                 for w in range(4)}
        name = f"transition:{v}"
        rules.append(Rule(((0,),), table, rate_for(name, transition),
                          UNPERTURBED, 4, name=name))
    for u in _PYRIMIDINES:
        for v in _PURINES:
            for vp in _PURINES:
                name = f"left:{u},{v}->{vp}"
                table = {(wl, w0): idx(vp) if (wl, w0) == (idx(u), idx(v)) else w0
                         for wl in range(4) for w0 in range(4)}
                rules.append(Rule(((-1,), (0,)), table, rate_for(name, left),
                                  UNPERTURBED, 4, name=name))
    for u in _PYRIMIDINES:
        for v in _PURINES:
            for up in _PYRIMIDINES:
                name = f"right:{u},{v}->{up}"
                table = {(w0, wr): idx(up) if (w0, wr) == (idx(u), idx(v)) else w0
                         for w0 in range(4) for wr in range(4)}
                rules.append(Rule(((0,), (1,)), table, rate_for(name, right),
                                  UNPERTURBED, 4, name=name))
    if overrides:
        raise ValidationError(
            [f"rate_overrides: unknown rule name {k!r}" for k in overrides])
    return build_model(1, space, rules)


def with_perturbation(base: Model, extra_rules: Iterable[Rule]) -> Model:
    """Append perturbative rules to a base model."""
    extra = list(extra_rules)
    for k, rule in enumerate(extra):
        if not rule.perturbative:
            raise ValidationError(
                f"extra_rules[{k}]: must have kind={PERTURBATIVE!r}")
    return build_model(base.dim, base.states, list(base.rules) + extra)
