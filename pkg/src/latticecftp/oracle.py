"""Independent ground truth: exact torus solves and forward burn-in runs.

These never touch the backward-coupling machinery; they exist so the exact
sampler can be checked against something that cannot share its bugs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import CapExceeded, SingularSystem, SupportMismatch, ValidationError
from .event_field import Site
from .models import Model, PatchConfig
from .seeding import derive_seed


# ---------------------------------------------------------------------------
# exact stationary solve on a small periodic torus


@dataclass
class TorusResult:
    n: int
    state_count: int
    pi: np.ndarray          # stationary law over full torus configurations
    marginal: np.ndarray    # site-0 marginal over states
    generator: np.ndarray


def torus_stationary(model: Model, n: int, cap: int = 2 ** 20) -> TorusResult:
    """Dense stationary solve of the finite-volume periodic analogue.

    For interacting models this is an approximation of the infinite-volume
    law (wrap-around correlations); for non-interacting models it is exact.
    """
    n_states = len(model.states)
    n_sites = n ** model.dim
    state_count = n_states ** n_sites
    if state_count > cap:
        raise CapExceeded(f"{n_states}^{n_sites} = {state_count} > cap {cap}")
    for rule in model.rules:
        for off in rule.offsets:
            if max(abs(c) for c in off) >= n / 2:
                raise ValidationError(
                    f"rule offset {off} does not fit in a torus of side {n}")

    sites = [tuple(p) for p in itertools.product(range(n), repeat=model.dim)]
    site_index = {s: i for i, s in enumerate(sites)}
    weights = [n_states ** i for i in range(n_sites)]

    def neighbor(site: Site, off: Site) -> int:
        return site_index[tuple((a + b) % n for a, b in zip(site, off))]

    # per (site, rule): the digit positions read and the digit rewritten
    actions = []
    for s in sites:
        target = site_index[s]
        for rule in model.rules:
            if rule.rate <= 0.0:
                continue
            reads = [neighbor(s, off) for off in rule.offsets]
            actions.append((target, reads, rule))

    Q = np.zeros((state_count, state_count))
    digits = np.empty(n_sites, dtype=np.int64)
    for idx in range(state_count):
        rem = idx
        for i in range(n_sites):
            digits[i] = rem % n_states
            rem //= n_states
        for target, reads, rule in actions:
            out = rule.output([digits[i] for i in reads])
            if out == digits[target]:
                continue
            jdx = idx + (out - digits[target]) * weights[target]
            Q[idx, jdx] += rule.rate
            Q[idx, idx] -= rule.rate

    M = Q.T.copy()
    M[-1, :] = 1.0
    b = np.zeros(state_count)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc))
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    marginal = np.zeros(n_states)
    for idx in range(state_count):
        marginal[idx % n_states] += pi[idx]
    return TorusResult(n, state_count, pi, marginal, Q)


# ---------------------------------------------------------------------------
# forward simulation on a box with frozen boundary


class ForwardPlan:
    """Precomputed flat-index tables for forward replay on a box.

    The state array covers the box plus a margin wide enough for every
    neighborhood read; events target interior cells only, so margin cells
    stay frozen at the initial configuration.
    """

    def __init__(self, model: Model, radius: int):
        if radius < 0:
            raise ValidationError("radius must be >= 0")
        self.model = model
        self.radius = int(radius)
        margin = 0
        for rule in model.rules:
            for off in rule.offsets:
                margin = max(margin, max(abs(c) for c in off))
        self.margin = margin
        d = model.dim
        half = radius + margin
        self.half = half
        side = 2 * half + 1
        self.side = side
        self.n_cells = side ** d
        strides = [side ** (d - 1 - q) for q in range(d)]
        self.strides = strides

        def flat(site: Site) -> int:
            return sum((c + half) * st for c, st in zip(site, strides))

        self.flat = flat
        self.box_sites = [tuple(p) for p in itertools.product(
            range(-radius, radius + 1), repeat=d)]
        self.all_sites = [tuple(p) for p in itertools.product(
            range(-half, half + 1), repeat=d)]
        self.interior_flat = np.asarray([flat(s) for s in self.box_sites],
                                        dtype=np.int64)
        n_rules = len(model.rules)
        max_arity = max((r.arity for r in model.rules), default=0)
        self.nb_offsets = np.zeros((n_rules, max(max_arity, 1)), dtype=np.int64)
        self.nb_weights = np.zeros_like(self.nb_offsets)
        self.nb_counts = np.zeros(n_rules, dtype=np.int64)
        tables = []
        starts = np.zeros(n_rules, dtype=np.int64)
        pos = 0
        n_states = len(model.states)
        for i, rule in enumerate(model.rules):
            self.nb_counts[i] = rule.arity
            for j, off in enumerate(rule.offsets):
                self.nb_offsets[i, j] = sum(c * st for c, st in zip(off, strides))
                self.nb_weights[i, j] = n_states ** j
            starts[i] = pos
            tables.append(rule._flat)
            pos += rule._flat.size
        self.tables = (np.concatenate(tables).astype(np.int8) if tables
                       else np.zeros(0, dtype=np.int8))
        self.table_starts = starts
        rates = np.asarray([r.rate for r in model.rules])
        self.site_rate = float(rates.sum())
        self.cum = np.cumsum(rates) / self.site_rate if self.site_rate > 0 else None

    def initial_state(self, xi: PatchConfig) -> np.ndarray:
        state = np.empty(self.n_cells, dtype=np.int8)
        for s in self.all_sites:
            state[self.flat(s)] = xi.get(s)
        return state

    def run(self, state: np.ndarray, burn_in: float, rng) -> None:
        if self.site_rate <= 0.0:
            return
        lam = self.site_rate * len(self.box_sites) * burn_in
        n_events = int(rng.poisson(lam))
        if n_events == 0:
            return
        ev_sites = self.interior_flat[rng.integers(0, len(self.box_sites),
                                                   n_events)]
        ev_rules = np.searchsorted(self.cum, rng.random(n_events),
                                   side="right").astype(np.int64)
        np.clip(ev_rules, 0, len(self.model.rules) - 1, out=ev_rules)
        kernels.apply_events(state, ev_sites, ev_rules, self.nb_offsets,
                             self.nb_weights, self.nb_counts, self.tables,
                             self.table_starts)


def forward_simulate(model: Model, radius: int, burn_in: float,
                     xi: PatchConfig, seed: int,
                     plan: Optional[ForwardPlan] = None) -> dict:
    """Event-driven forward run on the box from time -burn_in to 0.

    Boundary reads fall through to the frozen initial configuration.
    Returns the final box configuration as a site -> state dict.
    """
    if burn_in <= 0:
        raise ValidationError("burn_in must be positive")
    if plan is None:
        plan = ForwardPlan(model, radius)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1),
                               spawn_key=(0xF0,))))
    state = plan.initial_state(xi)
    plan.run(state, burn_in, rng)
    return {s: int(state[plan.flat(s)]) for s in plan.box_sites}


def forward_marginal_samples(model: Model, radius: int, burn_in: float,
                             n: int, seed: int,
                             plan: Optional[ForwardPlan] = None) -> np.ndarray:
    """Site-0 states from n independent forward runs (uniform random starts)."""
    if plan is None:
        plan = ForwardPlan(model, radius)
    origin_flat = plan.flat((0,) * model.dim)
    n_states = len(model.states)
    out = np.empty(n, dtype=np.int64)
    for k in range(n):
        s = derive_seed(seed, k)
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=s, spawn_key=(0xF0,))))
        state = rng.integers(0, n_states, size=plan.n_cells).astype(np.int8)
        plan.run(state, burn_in, rng)
        out[k] = state[origin_flat]
    return out


# ---------------------------------------------------------------------------
# comparison helpers


def empirical_distribution(values: Sequence[int], n_states: int) -> np.ndarray:
    counts = np.bincount(np.asarray(values, dtype=np.int64),
                         minlength=n_states).astype(float)
    if counts.sum() == 0:
        raise ValidationError("empirical distribution of an empty sample")
    return counts / counts.sum()


def tv_distance(p, q) -> float:
    """Total variation distance (half L1) between matched distributions."""
    if isinstance(p, dict) or isinstance(q, dict):
        if not isinstance(p, dict) or not isinstance(q, dict) \
                or set(p) != set(q):
            raise SupportMismatch("distributions have different supports")
        keys = sorted(p)
        pv = np.asarray([p[k] for k in keys], dtype=float)
        qv = np.asarray([q[k] for k in keys], dtype=float)
    else:
        pv = np.asarray(p, dtype=float)
        qv = np.asarray(q, dtype=float)
        if pv.shape != qv.shape:
            raise SupportMismatch(
                f"distributions have different supports: {pv.shape} vs {qv.shape}")
    return 0.5 * float(np.abs(pv - qv).sum())
