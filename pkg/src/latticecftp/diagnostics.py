"""Monte Carlo estimators for the sufficient-condition functionals.

All estimators are pure functions of (model, frontier map, seed schedule):
replicate k always uses the seed derived from (seed, k), so reports are
bit-reproducible and estimators evaluated on the same seed share the same
underlying replicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembler import sample_site
from .errors import BudgetExceeded, ValidationError
from .event_field import EventField
from .exploration import ThetaMap, run_exploration
from .locking import Caps, CftpAmbOutcome, explore_with_locking
from .models import Model
from .seeding import derive_seed, mix

#: censoring rate above which a report is flagged as biased
BIAS_FLAG_RATE = 1e-3


@dataclass
class EstimateReport:
    quantity: str
    estimate: float
    std_error: float
    n: int
    n_censored: int
    params: dict
    biased: bool

    def as_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n": self.n,
            "n_censored": self.n_censored,
            "params": self.params,
            "biased": self.biased,
        }


def _finish(name: str, values: list[float], n_censored: int,
            params: dict) -> EstimateReport:
    arr = np.asarray(values, dtype=float)
    n_eff = arr.size
    if n_eff == 0:
        raise ValidationError(f"{name}: every replicate was censored")
    se = float(arr.std(ddof=1) / math.sqrt(n_eff)) if n_eff > 1 else 0.0
    total = n_eff + n_censored
    return EstimateReport(name, float(arr.mean()), se, total, n_censored,
                          params, biased=n_censored / total > BIAS_FLAG_RATE)


def _locking_replicates(model: Model, theta: ThetaMap, n: int, seed: int,
                        caps: Optional[Caps]):
    """Yield locking outcomes at the origin, or None for censored replicates."""
    for k in range(n):
        field = EventField.for_model(model, derive_seed(seed, k))
        try:
            yield explore_with_locking(model, theta, field, caps=caps)
        except BudgetExceeded:
            yield None


def _ambiguity_weight(model: Model, outcome: CftpAmbOutcome) -> float:
    return float(sum(model.rules[alpha.rule].arity for alpha in outcome.H))


def estimate_g(model: Model, theta: ThetaMap, n: int, seed: int = 0,
               caps: Optional[Caps] = None) -> EstimateReport:
    """Mean neighborhood mass of the ambiguous events of one locking run.

    This is the branching load of the closure; below 1 the closure is a
    subcritical cascade and the sampler terminates almost surely.
    """
    if n < 1:
        raise ValidationError("estimate_g: n must be >= 1")
    values, censored = [], 0
    for outcome in _locking_replicates(model, theta, n, seed, caps):
        if outcome is None:
            censored += 1
        else:
            values.append(_ambiguity_weight(model, outcome))
    return _finish("g", values, censored, {"seed": seed})


_WHICH = ("T", "H_time", "L", "H_space")


def estimate_lambda(model: Model, theta: ThetaMap, which: str, lam: float,
                    n: int, seed: int = 0, caps: Optional[Caps] = None,
                    q: int = 0) -> EstimateReport:
    """Exponential-moment functionals of one locking run.

    T:        E[exp(lam * T)]              (lam <= 0)
    H_time:   E[sum_H |A| exp(lam * t)]    (lam <= 0)
    L:        E[exp(lam * L)]
    H_space:  E[sum_H sum_{z in A} exp(lam * (x_q + z_q))]  (axis q)
    """
    if which not in _WHICH:
        raise ValidationError(f"estimate_lambda: unknown functional {which!r}")
    if which in ("T", "H_time") and lam > 0:
        raise ValidationError(f"estimate_lambda({which}): lam must be <= 0")
    if which == "H_space" and not (0 <= q < model.dim):
        raise ValidationError(f"estimate_lambda(H_space): axis q={q} out of range")
    if n < 1:
        raise ValidationError("estimate_lambda: n must be >= 1")
    values, censored = [], 0
    for outcome in _locking_replicates(model, theta, n, seed, caps):
        if outcome is None:
            censored += 1
            continue
        if which == "T":
            values.append(math.exp(lam * outcome.t_rel))
        elif which == "L":
            values.append(math.exp(lam * outcome.L))
        elif which == "H_time":
            values.append(sum(model.rules[a.rule].arity * math.exp(lam * a.time)
                              for a in outcome.H))
        else:
            acc = 0.0
            for a in outcome.H:
                for z in model.rules[a.rule].offsets:
                    acc += math.exp(lam * (a.site[q] + z[q]))
            values.append(acc)
    params = {"lambda": lam, "seed": seed}
    if which == "H_space":
        params["q"] = q
    return _finish(f"Lambda_{which}", values, censored, params)


def check_bounds(model: Model, theta: ThetaMap, lam: float, n: int,
                 seed: int = 0, caps: Optional[Caps] = None) -> dict:
    """Compare E[exp(lam*T*)] against the subcritical-cascade bound
    Lambda_T(lam) / (1 - Lambda_H_time(lam)), with 3-sigma slack on both
    sides.

    Not applicable (no assertion) when the estimated Lambda_H_time >= 1.
    """
    if lam > 0:
        raise ValidationError("check_bounds: lam must be <= 0")
    rep_T = estimate_lambda(model, theta, "T", lam, n, seed=seed, caps=caps)
    rep_H = estimate_lambda(model, theta, "H_time", lam, n, seed=seed, caps=caps)
    report = {
        "lambda": lam,
        "n": n,
        "Lambda_T": rep_T.as_dict(),
        "Lambda_H_time": rep_H.as_dict(),
    }
    if rep_H.estimate >= 1.0:
        report["applicable"] = False
        report["passed"] = None
        return report
    report["applicable"] = True
    denom = 1.0 - rep_H.estimate
    bound = rep_T.estimate / denom
    bound_se = math.sqrt((rep_T.std_error / denom) ** 2
                         + (rep_T.estimate * rep_H.std_error / denom ** 2) ** 2)
    values, censored = [], 0
    for k in range(n):
        res = sample_site(model, theta, derive_seed(mix(seed, 0x75AB), k),
                          caps=caps)
        if res.failed:
            censored += 1
        else:
            values.append(math.exp(lam * res.t_star))
    lhs = _finish("exp_lam_T_star", values, censored, {"lambda": lam})
    slack = 3.0 * math.sqrt(lhs.std_error ** 2 + bound_se ** 2)
    report.update({
        "bound": bound,
        "bound_se": bound_se,
        "lhs": lhs.as_dict(),
        "slack_3sigma": slack,
        "passed": lhs.estimate <= bound + slack,
    })
    return report


_QUANTITIES = ("exploration_size", "tree_nodes", "closure_points", "t_star_depth")


def tail_curve(model: Model, theta: ThetaMap, quantity: str, n: int,
               seed: int = 0, caps: Optional[Caps] = None,
               thresholds=None) -> list[tuple[float, float]]:
    """Empirical survival function of a work/depth quantity.

    exploration_size: events explored by the plain run on the unperturbed
    restriction; tree_nodes: locking tree size; closure_points: distinct
    closure points of a full sample; t_star_depth: -T* of a full sample.
    """
    if n < 1000:
        raise ValidationError("tail_curve: need n >= 1000 replicates")
    if quantity not in _QUANTITIES:
        raise ValidationError(f"tail_curve: unknown quantity {quantity!r}")
    if thresholds is None:
        thresholds = list(range(1, 21))
    cap_steps = caps.nodes if caps is not None else Caps().nodes
    values = []
    for k in range(n):
        s = derive_seed(seed, k)
        if quantity == "exploration_size":
            field = EventField.for_model(model, s, unperturbed_only=True)
            try:
                trace = run_exploration(model, theta, field, cap=cap_steps)
                values.append(trace.size)
            except BudgetExceeded:
                values.append(math.inf)
        elif quantity == "tree_nodes":
            field = EventField.for_model(model, s)
            try:
                values.append(explore_with_locking(model, theta, field,
                                                   caps=caps).node_count)
            except BudgetExceeded:
                values.append(math.inf)
        else:
            res = sample_site(model, theta, s, caps=caps)
            if res.failed:
                values.append(math.inf)
            elif quantity == "closure_points":
                values.append(res.points)
            else:
                values.append(-res.t_star)
    arr = np.asarray(values, dtype=float)
    return [(float(x), float((arr >= x).mean())) for x in thresholds]
