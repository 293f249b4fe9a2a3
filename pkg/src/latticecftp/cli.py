"""Command-line shell: validate models, sample, diagnose, run oracles.

Exit codes: 0 success, 1 validation/usage error, 2 budget-failure rate above
threshold, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .assembler import sample_site
from .diagnostics import check_bounds, estimate_g, estimate_lambda
from .errors import LatticeCftpError, ValidationError
from .exploration import make_theta
from .locking import Caps, explore_with_locking
from .event_field import EventField
from .model_io import load_model
from .models import epsilon, kappa
from .oracle import (empirical_distribution, forward_marginal_samples,
                     torus_stationary)
from .seeding import derive_seed

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_FAILURE_RATE = 2
EXIT_INTERNAL = 3

CSV_COLUMNS = ["seed", "value", "t_star", "l_star", "points", "tree_nodes",
               "failed"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _parse_site(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ValidationError(f"--site: cannot parse {text!r}")


def _load(args):
    loaded = load_model(args.model)
    theta_spec = getattr(args, "theta", None) or loaded.theta_spec
    if theta_spec is None:
        raise ValidationError(
            "no frontier map: set `theta` in the model file or pass --theta")
    theta = make_theta(loaded.model, theta_spec)
    return loaded, theta, theta_spec


def _manifest(args, loaded, extra: dict) -> dict:
    digest = hashlib.sha256(Path(loaded.path).read_bytes()).hexdigest()
    man = {
        "command": args.command,
        "model_file": loaded.path,
        "model_sha256": digest,
        "seed_schedule": "splitmix64 mix(base_seed, k)",
        "versions": {
            "latticecftp": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
            "kernel_backend": kernels.BACKEND,
        },
    }
    man.update(extra)
    return man


def _write_manifest(out_path: Path, manifest: dict) -> None:
    man_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    man_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    loaded, theta, theta_spec = _load(args)
    model = loaded.model
    try:
        eps = epsilon(model)
        eps_txt = f"{eps:g}"
    except LatticeCftpError:
        eps_txt = "undefined (positive rates missing)"
    print(f"model: {loaded.path}")
    print(f"states: {','.join(model.states.labels)}  dim: {model.dim}  "
          f"rules: {len(model.rules)} "
          f"({len(model.perturbative_indices)} perturbative)")
    print(f"total_rate: {model.total_rate:g}  "
          f"unperturbed_rate: {model.unperturbed_rate:g}")
    print(f"positive-rates: {'yes' if model.positive_rates else 'no'}")
    print(f"epsilon: {eps_txt}")
    print(f"kappa: {kappa(model):g}")
    print(f"theta: {theta_spec}")
    return EXIT_OK


def _sample_block(payload):
    model, theta, caps, base_seed, site, start, count = payload
    rows = []
    for k in range(start, start + count):
        res = sample_site(model, theta, derive_seed(base_seed, k), caps=caps,
                          site=site)
        rows.append((k, res))
    return rows


def cmd_sample(args) -> int:
    loaded, theta, _ = _load(args)
    model = loaded.model
    caps = Caps.parse(args.caps)
    if args.dump_column is not None:
        field = EventField.for_model(model, args.seed)
        for line in field.column_csv(_parse_site(args.dump_column),
                                     args.dump_t_lo):
            print(line)
        return EXIT_OK
    if args.dump_tree:
        field = EventField.for_model(model, derive_seed(args.seed, 0))
        outcome = explore_with_locking(model, theta, field, caps=caps)
        print(outcome.tree.format(model))
        return EXIT_OK

    site = _parse_site(args.site)
    if len(site) != model.dim:
        raise ValidationError(f"--site: needs {model.dim} coordinates")
    t0 = time.monotonic()
    results = []
    if args.threads > 1:
        block = max(1, args.n // (args.threads * 8))
        payloads = [(model, theta, caps, args.seed, site, start,
                     min(block, args.n - start))
                    for start in range(0, args.n, block)]
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            for rows in pool.map(_sample_block, payloads):
                results.extend(rows)
        results.sort(key=lambda kr: kr[0])
        results = [r for _, r in results]
    else:
        for k in range(args.n):
            seed_k = derive_seed(args.seed, k)
            res = sample_site(model, theta, seed_k, caps=caps, site=site)
            results.append(res)
            if args.strict_failures and res.failed:
                print(f"sample {k} failed: {res.reason}", file=sys.stderr)
                return EXIT_FAILURE_RATE
    elapsed = time.monotonic() - t0

    n_failed = sum(1 for r in results if r.failed)
    out_path = Path(args.out)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for res in results:
            writer.writerow([
                res.seed,
                res.label if res.label is not None else "",
                repr(res.t_star) if res.t_star is not None else "",
                res.l_star if res.l_star is not None else "",
                res.points, res.tree_nodes, int(res.failed),
            ])
    manifest = _manifest(args, loaded, {
        "base_seed": args.seed, "n": args.n, "site": list(site),
        "caps": vars(caps), "out": str(out_path),
        "timing_seconds": elapsed, "n_failed": n_failed,
    })
    _write_manifest(out_path, manifest)
    rate = n_failed / max(args.n, 1)
    print(f"wrote {args.n} samples to {out_path} "
          f"({n_failed} failed, {elapsed:.1f}s)")
    if args.strict_failures and n_failed:
        return EXIT_FAILURE_RATE
    if rate > args.max_failure_rate:
        print(f"failure rate {rate:.4%} exceeds threshold "
              f"{args.max_failure_rate:.4%}", file=sys.stderr)
        return EXIT_FAILURE_RATE
    return EXIT_OK


def cmd_diagnose(args) -> int:
    loaded, theta, _ = _load(args)
    model = loaded.model
    caps = Caps.parse(args.caps)
    lams = [args.lam] if args.lam is not None else [0.0, -0.05, -0.1, -0.2]
    report = {
        "model": loaded.path,
        "n": args.n,
        "kappa": kappa(model),
        "g": estimate_g(model, theta, args.n, seed=args.seed,
                        caps=caps).as_dict(),
    }
    try:
        report["epsilon"] = epsilon(model)
    except LatticeCftpError:
        report["epsilon"] = None
    report["lambda_estimates"] = []
    for lam in lams:
        entry = {
            "lambda": lam,
            "Lambda_T": estimate_lambda(model, theta, "T", lam, args.n,
                                        seed=args.seed, caps=caps).as_dict(),
            "Lambda_H_time": estimate_lambda(model, theta, "H_time", lam,
                                             args.n, seed=args.seed,
                                             caps=caps).as_dict(),
            "Lambda_L": estimate_lambda(model, theta, "L", -lam, args.n,
                                        seed=args.seed, caps=caps).as_dict(),
            "Lambda_H_space": [
                estimate_lambda(model, theta, "H_space", sign * lam, args.n,
                                seed=args.seed, caps=caps, q=qq).as_dict()
                for qq in range(model.dim) for sign in (+1, -1)
            ],
        }
        report["lambda_estimates"].append(entry)
    if args.bound_check:
        lam0 = args.lam if args.lam is not None else -0.1
        report["bound_check"] = check_bounds(model, theta, lam0, args.n,
                                             seed=args.seed, caps=caps)
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        _write_manifest(Path(args.out), _manifest(args, loaded, {
            "base_seed": args.seed, "n": args.n, "caps": vars(caps)}))
        print(f"wrote report to {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    loaded, _, _ = _load(args)
    model = loaded.model
    if args.oracle_command == "torus":
        result = torus_stationary(model, args.n)
        doc = {
            "n": result.n,
            "state_count": result.state_count,
            "marginal": {model.states.label(s): result.marginal[s]
                         for s in range(len(model.states))},
        }
    else:
        values = forward_marginal_samples(model, args.radius, args.burnin,
                                          args.n, args.seed)
        dist = empirical_distribution(values, len(model.states))
        doc = {
            "radius": args.radius, "burnin": args.burnin, "n": args.n,
            "marginal": {model.states.label(s): dist[s]
                         for s in range(len(model.states))},
        }
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        extra = {k: v for k, v in doc.items() if k != "marginal"}
        extra["oracle"] = args.oracle_command
        _write_manifest(Path(args.out), _manifest(args, loaded, extra))
        print(f"wrote oracle output to {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .models import independent_sites
    failures = 0

    def check(name, fn):
        nonlocal failures
        try:
            fn()
            print(f"PASS {name}")
        except Exception as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")

    def _determinism():
        field1 = EventField(42, [1.0, 2.0])
        field2 = EventField(42, [1.0, 2.0])
        a = field1.events_in_window([(0,)], -5.0, 0.0)
        b = field2.events_in_window([(0,)], -5.0, 0.0)
        assert a == b and a, "replayed window differs"

    def _marginal():
        model = independent_sites({"A": 2.0, "B": 1.0})
        theta = make_theta(model, "finite_factor(b=0)")
        values = [sample_site(model, theta, derive_seed(7, k)).value
                  for k in range(3000)]
        freq = values.count(0) / len(values)
        assert abs(freq - 2 / 3) < 4 * (2 / 9 / 3000) ** 0.5, freq

    def _lambda_zero():
        model = independent_sites({"A": 2.0, "B": 1.0})
        theta = make_theta(model, "finite_factor(b=0)")
        rep = estimate_lambda(model, theta, "T", 0.0, 50)
        assert rep.estimate == 1.0 and rep.std_error == 0.0

    check("event-field determinism", _determinism)
    check("independent-sites marginal", _marginal)
    check("lambda identities at 0", _lambda_zero)
    return EXIT_OK if failures == 0 else EXIT_INTERNAL


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="latticecftp",
                     description="Exact stationary-marginal sampling for "
                                 "rule-based lattice dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file, print parameters")
    p.add_argument("model")
    p.add_argument("--theta", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="draw exact samples at a site")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", default=None)
    p.add_argument("--site", default="0")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--caps", default="",
                   help="nodes=..,depth=..,points=..,layers=..")
    p.add_argument("--out", default="samples.csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--strict-failures", action="store_true",
                   help="abort the batch on the first failed sample")
    p.add_argument("--max-failure-rate", type=float, default=1e-3)
    p.add_argument("--dump-tree", action="store_true",
                   help="print the locking tree of the first seed and exit")
    p.add_argument("--dump-column", default=None, metavar="SITE",
                   help="dump one event column as CSV and exit")
    p.add_argument("--dump-t-lo", type=float, default=-10.0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("diagnose", help="estimate coupling diagnostics")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", default=None)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--caps", default="")
    p.add_argument("--out", default=None)
    p.add_argument("--bound-check", action="store_true")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("oracle", help="independent ground-truth runs")
    osub = p.add_subparsers(dest="oracle_command", required=True)
    pt = osub.add_parser("torus", help="exact dense stationary solve")
    pt.add_argument("--model", required=True)
    pt.add_argument("--theta", default=None)
    pt.add_argument("--n", type=int, default=4, help="torus side length")
    pt.add_argument("--out", default=None)
    pt.set_defaults(func=cmd_oracle)
    pf = osub.add_parser("forward", help="forward burn-in marginal")
    pf.add_argument("--model", required=True)
    pf.add_argument("--theta", default=None)
    pf.add_argument("--radius", type=int, default=20)
    pf.add_argument("--burnin", type=float, default=50.0)
    pf.add_argument("--n", type=int, default=10_000)
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--out", default=None)
    pf.set_defaults(func=cmd_oracle)

    p = sub.add_parser("selftest", help="quick internal consistency checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        for msg in exc.messages:
            print(f"validation error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except LatticeCftpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - catch-all for exit code 3
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
