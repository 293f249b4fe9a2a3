"""Deterministic lazy realization of the backward Poisson event history.

Each lattice site carries an independent marked Poisson stream running
backward from time 0: inter-event gaps are Exp(total rate), marks are rule
indices drawn with probability proportional to the rule rates.  Columns are
generated on demand, memoized, and never regenerated, so any two queries
that touch the same (seed, site, time range) see the same events.  All
coordinates are absolute: shifted-origin queries are plain caller-side
site/time arithmetic, which keeps event identities bit-exact across reuse.

Clashing float times are broken by the lexicographic (time, site, rule)
order, making the event order total and every query deterministic.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidQuery
from .seeding import site_spawn_key

Site = tuple[int, ...]

#: floor accepted by the strictly-before queries: (time, site, rule) where
#: site=None means "any event with time strictly below `time`".
FloorKey = tuple


@dataclass(frozen=True)
class Event:
    """A point of the realization: rule `rule` fires at `site` at `time` < 0."""

    site: Site
    rule: int
    time: float

    def key(self) -> FloorKey:
        return (self.time, self.site, self.rule)


def event_sort_key(ev: Event):
    return (ev.time, ev.site, ev.rule)


def _is_before(time: float, site: Site, rule: int, floor: FloorKey) -> bool:
    """Strict lexicographic (time, site, rule) comparison against a floor."""
    ftime = floor[0]
    if time != ftime:
        return time < ftime
    fsite = floor[1]
    if fsite is None:
        return False
    if site != fsite:
        return site < fsite
    return rule < floor[2]


class _Column:
    __slots__ = ("neg_times", "rules", "rng", "switched", "resume")

    def __init__(self, rng):
        self.neg_times: list[float] = []  # -time, strictly increasing
        self.rules: list[int] = []
        self.rng = rng
        self.switched = False     # salt_below switch already taken
        self.resume: float | None = None  # forced start time for next chunk


class EventField:
    """One fixed realization of the event history, addressed by a 64-bit seed.

    Parameters
    ----------
    seed : int
        Base seed; per-site streams are derived statelessly from (seed, site).
    rates : sequence of float
        Per-rule rates. Zero-rate rules never occur but keep their index.
    chunk : int
        Number of events generated per backward extension of a column.
    salt_sites : callable, optional
        Diagnostic hook: maps a site to an integer salt (or None).  Salted
        sites draw from an independent stream family; used to re-randomize
        events outside a spatial window while keeping the rest identical.
    salt_below : (float, int), optional
        Diagnostic hook: events strictly below the cut time are drawn from a
        salted stream restarted at the cut (memorylessness makes the law
        exact); events at or above the cut are identical to the base field.
    """

    def __init__(self, seed: int, rates: Sequence[float], chunk: int = 64,
                 salt_sites=None, salt_below: tuple[float, int] | None = None):
        rates = [float(r) for r in rates]
        if any(not math.isfinite(r) or r < 0.0 for r in rates):
            raise InvalidQuery("rates must be finite and non-negative")
        self.seed = int(seed)
        self.rates = tuple(rates)
        self.total_rate = float(sum(rates))
        self.chunk = int(chunk)
        self._salt_sites = salt_sites
        self._salt_below = salt_below
        if self.total_rate > 0.0:
            self._cum = np.cumsum(np.asarray(rates, dtype=float)) / self.total_rate
            self._cum[-1] = 1.0
        else:
            self._cum = None
        self._columns: dict[Site, _Column] = {}

    @classmethod
    def for_model(cls, model, seed: int, unperturbed_only: bool = False, **kw) -> "EventField":
        """Field realizing a model's event intensity.

        With ``unperturbed_only`` the perturbative rules get rate zero, which
        realizes the restricted dynamics on the same code path (their indices
        are preserved but never drawn).
        """
        rates = [r.rate if (not unperturbed_only or not r.perturbative) else 0.0
                 for r in model.rules]
        return cls(seed, rates, **kw)

    # -- column generation ------------------------------------------------

    def _make_rng(self, site: Site, salt: int | None):
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=site_spawn_key(site, salt))
        return np.random.Generator(np.random.PCG64(ss))

    def _column(self, site: Site) -> _Column:
        col = self._columns.get(site)
        if col is None:
            salt = self._salt_sites(site) if self._salt_sites is not None else None
            col = _Column(self._make_rng(site, salt))
            self._columns[site] = col
        return col

    def _draw_chunk(self, col: _Column, last: float):
        gaps = col.rng.standard_exponential(self.chunk) / self.total_rate
        times = last - np.cumsum(gaps)
        u = col.rng.random(self.chunk)
        marks = np.searchsorted(self._cum, u, side="right")
        return times.tolist(), marks.tolist()

    def _append(self, col: _Column, t: float, mark: int) -> None:
        prev = -col.neg_times[-1] if col.neg_times else 0.0
        if t >= prev:  # float underflow guard; keeps columns strict
            t = math.nextafter(prev, -math.inf)
        col.neg_times.append(-t)
        col.rules.append(int(mark))

    def _extend(self, col: _Column, site: Site) -> None:
        """Append one backward chunk to the column."""
        if self._salt_below is not None and not col.switched:
            cut, salt = self._salt_below
            last = -col.neg_times[-1] if col.neg_times else 0.0
            times, marks = self._draw_chunk(col, last)
            for t, m in zip(times, marks):
                if t < cut:
                    # first crossing: everything below the cut comes from a
                    # fresh stream restarted exactly at the cut
                    col.rng = self._make_rng(site, salt)
                    col.switched = True
                    col.resume = cut
                    return
                self._append(col, t, m)
            return
        if col.resume is not None:
            last = col.resume
            col.resume = None
        else:
            last = -col.neg_times[-1] if col.neg_times else 0.0
        times, marks = self._draw_chunk(col, last)
        for t, m in zip(times, marks):
            self._append(col, t, m)

    def _ensure_below(self, site: Site, t: float) -> Optional[_Column]:
        """Generate the column until it holds an event strictly below t."""
        if self.total_rate <= 0.0:
            return None
        col = self._column(site)
        while not col.neg_times or -col.neg_times[-1] >= t:
            self._extend(col, site)
        return col

    # -- queries -----------------------------------------------------------

    def latest_event_before(self, sites: Iterable[Site], t: float) -> Optional[Event]:
        """Most recent event over ``sites`` strictly before time ``t`` <= 0."""
        if not math.isfinite(t):
            raise InvalidQuery(f"query time must be finite, got {t!r}")
        if t > 0.0:
            raise InvalidQuery("event history only exists for t <= 0")
        return self.latest_before_key(sites, (t, None, None))

    def latest_before_key(self, sites: Iterable[Site], floor: FloorKey) -> Optional[Event]:
        """Like latest_event_before, but strict in the total (t, x, i) order.

        Passing the key of a known event excludes exactly that event and
        everything at or after it, even under float time collisions.
        """
        best: Optional[Event] = None
        ftime = floor[0]
        for site in sites:
            col = self._ensure_below(site, ftime)
            if col is None:
                continue
            idx = bisect_right(col.neg_times, -ftime)
            # idx is the first entry strictly below ftime (it exists by
            # _ensure_below); the entry just before may tie on time and
            # still precede the floor in the total order.
            j = idx - 1
            if j >= 0 and col.neg_times[j] == -ftime and _is_before(
                    ftime, site, col.rules[j], floor):
                idx = j
            cand = Event(site, col.rules[idx], -col.neg_times[idx])
            if best is None or event_sort_key(cand) > event_sort_key(best):
                best = cand
        return best

    def events_in_window(self, box: Iterable[Site], t_lo: float, t_hi: float) -> list[Event]:
        """All events with site in ``box`` and time in [t_lo, t_hi), ascending."""
        if not (math.isfinite(t_lo) and math.isfinite(t_hi)):
            raise InvalidQuery("window bounds must be finite")
        if t_lo > t_hi:
            raise InvalidQuery(f"reversed window [{t_lo}, {t_hi})")
        if t_hi > 0.0:
            raise InvalidQuery("event history only exists for t <= 0")
        out: list[Event] = []
        if t_lo == t_hi:
            return out
        for site in box:
            col = self._ensure_below(site, t_lo)
            if col is None:
                continue
            for neg_t, rule in zip(col.neg_times, col.rules):
                t = -neg_t
                if t < t_lo:
                    break
                if t < t_hi:
                    out.append(Event(site, rule, t))
        out.sort(key=event_sort_key)
        return out

    def column_csv(self, site: Site, t_lo: float) -> list[str]:
        """Debug dump of one column down to t_lo: `site;rule_index;time` lines."""
        events = self.events_in_window([site], t_lo, 0.0)
        label = ",".join(str(c) for c in site)
        return [f"{label};{ev.rule};{ev.time!r}" for ev in reversed(events)]


def column_count_rate_check(seed: int, rates: Sequence[float], horizon: float,
                            n_trials: int, site: Site = (0,)) -> dict:
    """Statistical self-test of the generator at one site.

    Counts events in [-horizon, 0) over independent seeds and tallies rule
    marks; returns empirical mean/variance of the count and per-rule
    frequencies.
    """
    if horizon <= 0:
        raise InvalidQuery("horizon must be positive")
    from .seeding import derive_seed

    counts = np.empty(n_trials)
    rule_counts = np.zeros(len(rates))
    for k in range(n_trials):
        field = EventField(derive_seed(seed, k), rates)
        evs = field.events_in_window([site], -horizon, 0.0)
        counts[k] = len(evs)
        for ev in evs:
            rule_counts[ev.rule] += 1
    total = rule_counts.sum()
    freqs = rule_counts / total if total > 0 else rule_counts
    return {
        "mean_count": float(counts.mean()),
        "var_count": float(counts.var(ddof=1)) if n_trials > 1 else 0.0,
        "rule_frequencies": freqs.tolist(),
        "n_trials": int(n_trials),
        "horizon": float(horizon),
    }
