"""Reading and writing model description files (TOML or JSON).

Schema::

    dim = 1
    states = ["+", "-"]
    theta = "voter"              # optional frontier-map selector

    [[rules]]
    name = "copy:1"              # optional
    offsets = [[0], [1]]
    rate = 0.5
    kind = "unperturbed"         # or "perturbative"
    table = ["+,+ -> +", "+,- -> -", "-,+ -> +", "-,- -> -"]
    default = "+"                # optional fixed output for unlisted inputs

Tables are explicit enumerations; an unconditional rule uses offsets = []
and a single entry like ``"-> +"``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ValidationError
from .models import Model, Rule, StateSpace, build_model


@dataclass
class LoadedModel:
    model: Model
    theta_spec: str | None
    path: str


def _parse_entry(entry: str, states: StateSpace, where: str):
    if "->" not in entry:
        raise ValidationError(f"{where}: entry {entry!r} lacks '->'")
    lhs, _, rhs = entry.partition("->")
    rhs = rhs.strip()
    try:
        out = states.index(rhs)
    except KeyError:
        raise ValidationError(f"{where}: unknown output state {rhs!r}")
    lhs = lhs.strip()
    if not lhs:
        return (), out
    inputs = []
    for tok in lhs.split(","):
        tok = tok.strip()
        try:
            inputs.append(states.index(tok))
        except KeyError:
            raise ValidationError(f"{where}: unknown input state {tok!r}")
    return tuple(inputs), out


def _rule_from_dict(d: dict, states: StateSpace, dim: int, k: int) -> Rule:
    import itertools

    where = f"rules[{k}]"
    offsets = d.get("offsets", [])
    offs = []
    for off in offsets:
        if isinstance(off, int):
            off = [off]
        offs.append(tuple(int(c) for c in off))
    rate = d.get("rate")
    if rate is None:
        raise ValidationError(f"{where}.rate: missing")
    kind = d.get("kind", "unperturbed")
    entries = d.get("table", [])
    table: dict[tuple, int] = {}
    for entry in entries:
        inputs, out = _parse_entry(entry, states, f"{where}.table")
        if len(inputs) != len(offs):
            raise ValidationError(
                f"{where}.table: entry {entry!r} arity {len(inputs)} != "
                f"|offsets| {len(offs)}")
        if inputs in table:
            raise ValidationError(f"{where}.table: duplicate entry for {entry!r}")
        table[inputs] = out
    default = d.get("default")
    if default is not None:
        try:
            dv = states.index(str(default))
        except KeyError:
            raise ValidationError(f"{where}.default: unknown state {default!r}")
        for combo in itertools.product(range(len(states)), repeat=len(offs)):
            table.setdefault(combo, dv)
    return Rule(offs, table, float(rate), kind, len(states),
                name=str(d.get("name", "")))


def model_from_dict(doc: dict) -> tuple[Model, str | None]:
    if "states" not in doc:
        raise ValidationError("states: missing")
    states = StateSpace(doc["states"])
    dim = int(doc.get("dim", 1))
    rules = [_rule_from_dict(rd, states, dim, k)
             for k, rd in enumerate(doc.get("rules", []))]
    model = build_model(dim, states, rules,
                        merge_identical=bool(doc.get("merge_identical", False)))
    theta = doc.get("theta")
    return model, (str(theta) if theta is not None else None)


def load_model(path) -> LoadedModel:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"model file not found: {path}")
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
    elif path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            doc = _toml.load(fh)
    else:
        raise ValidationError(f"unsupported model file extension: {path.suffix}")
    model, theta = model_from_dict(doc)
    return LoadedModel(model, theta, str(path))


def model_to_dict(model: Model, theta_spec: str | None = None) -> dict:
    """Inverse of model_from_dict, with fully enumerated tables."""
    doc = {"dim": model.dim, "states": list(model.states.labels)}
    if theta_spec is not None:
        doc["theta"] = theta_spec
    rules = []
    for rule in model.rules:
        entries = []
        for inputs, out in sorted(rule.table_dict().items()):
            lhs = ",".join(model.states.label(s) for s in inputs)
            entries.append(f"{lhs} -> {model.states.label(out)}"
                           if lhs else f"-> {model.states.label(out)}")
        rules.append({
            "name": rule.name,
            "offsets": [list(off) for off in rule.offsets],
            "rate": rule.rate,
            "kind": rule.kind,
            "table": entries,
        })
    doc["rules"] = rules
    return doc


def save_model_json(model: Model, theta_spec: str | None, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, theta_spec), indent=1)
                          + "\n")
