"""Scenario documents: plant, initial box, safety spec, horizon and options.

Example::

    {
      "state_dim": 1, "action_dim": 1,
      "dynamics": [[{"coefficient": 1.0, "state": [1], "action": [0]},
                    {"coefficient": 0.1, "state": [0], "action": [1]}]],
      "initial_box": [[0.9, 1.1]],
      "unsafe": [[[2.0, null]]],
      "goal": [[0.0, 0.0]], "deadzone": [0.1],
      "steps": 60,
      "options": {"order": 2, "bernstein_order": 4, "bernstein_steps": 200,
                  "reinit_period": 1, "noise_radius": 0.0},
      "network": "controller.json",
      "partition": {"bounds": [[0.9, 1.1]], "cells": [4]}
    }

``null`` endpoints in unsafe boxes stand for an unbounded side.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .closedloop import DynamicsSpec, ReachOptions, SafetySpec, Term
from .tmcore import Interval

OPTION_KEYS = ("order", "bernstein_order", "bernstein_steps", "reinit_period", "noise_radius", "mode")


class ScenarioError(ValueError):
    """Invalid scenario document; the message names the file and location."""


@dataclass(frozen=True)
class Scenario:
    dynamics: DynamicsSpec
    initial_box: tuple[Interval, ...]
    safety: SafetySpec
    steps: int
    options: ReachOptions = field(default_factory=ReachOptions)
    network_path: str | None = None
    partition_bounds: tuple[Interval, ...] | None = None
    partition_cells: tuple[int, ...] | None = None

    @property
    def state_dim(self) -> int:
        return self.dynamics.state_dim

    def with_options(self, **overrides) -> "Scenario":
        """Copy with the given reach options replaced (``None`` values are ignored)."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        steps = overrides.pop("steps", self.steps)
        return replace(self, options=replace(self.options, **overrides), steps=steps)


def _interval(raw, where: str, allow_open: bool = False) -> Interval:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ScenarioError(f"{where}: expected [lo, hi]")
    lo, hi = raw
    if allow_open:
        lo = -math.inf if lo is None else lo
        hi = math.inf if hi is None else hi
    try:
        return Interval(float(lo), float(hi))
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: invalid interval {raw!r}") from None


def _box(raw, dim: int, where: str, allow_open: bool = False) -> tuple[Interval, ...]:
    if not isinstance(raw, list) or len(raw) != dim:
        raise ScenarioError(f"{where}: expected {dim} intervals")
    return tuple(_interval(r, f"{where}[{i}]", allow_open) for i, r in enumerate(raw))


def parse_scenario(doc: dict[str, Any], source: str = "<scenario>") -> Scenario:
    def err(msg: str) -> ScenarioError:
        return ScenarioError(f"{source}: {msg}")

    if not isinstance(doc, dict):
        raise err("top level must be an object")
    try:
        n = int(doc["state_dim"])
        p = int(doc["action_dim"])
    except KeyError as exc:
        raise err(f"missing '{exc.args[0]}'") from None
    except (TypeError, ValueError):
        raise err("state_dim and action_dim must be integers") from None
    if n < 1 or p < 1:
        raise err("state_dim and action_dim must be positive")

    raw_dyn = doc.get("dynamics")
    if not isinstance(raw_dyn, list) or len(raw_dyn) != n:
        raise err(f"'dynamics' must list {n} transition polynomials")
    transitions = []
    for i, terms in enumerate(raw_dyn):
        if not isinstance(terms, list):
            raise err(f"dynamics[{i}]: expected a list of terms")
        parsed = []
        for j, t in enumerate(terms):
            where = f"dynamics[{i}][{j}]"
            if not isinstance(t, dict) or "coefficient" not in t:
                raise err(f"{where}: expected an object with 'coefficient'")
            try:
                parsed.append(Term(float(t["coefficient"]),
                                   tuple(int(e) for e in t.get("state", [0] * n)),
                                   tuple(int(e) for e in t.get("action", [0] * p))))
            except (TypeError, ValueError):
                raise err(f"{where}: malformed term") from None
        transitions.append(tuple(parsed))
    try:
        dynamics = DynamicsSpec(n, p, tuple(transitions), int(doc.get("max_degree", 3)))
    except ValueError as exc:
        raise err(str(exc)) from None

    try:
        init = _box(doc.get("initial_box"), n, "initial_box")
        unsafe = tuple(_box(b, n, f"unsafe[{k}]", allow_open=True)
                       for k, b in enumerate(doc.get("unsafe") or []))
        goal = _box(doc["goal"], n, "goal") if doc.get("goal") is not None else None
    except ScenarioError as exc:
        raise err(str(exc)) from None
    deadzone = doc.get("deadzone")
    if deadzone is not None:
        if _is_number(deadzone):
            deadzone = [float(deadzone)] * n
        if not isinstance(deadzone, list) or len(deadzone) != n:
            raise err(f"'deadzone' must be a number or a list of {n} entries")
    try:
        safety = SafetySpec(unsafe, goal, None if deadzone is None else tuple(deadzone))
    except (TypeError, ValueError) as exc:
        raise err(f"deadzone: {exc}") from None

    steps = doc.get("steps", 1)
    if not isinstance(steps, int) or steps < 0:
        raise err("'steps' must be a non-negative integer")

    raw_opts = doc.get("options") or {}
    unknown = set(raw_opts) - set(OPTION_KEYS)
    if unknown:
        raise err(f"options: unknown keys {sorted(unknown)}")
    try:
        options = ReachOptions(**raw_opts)
    except (TypeError, ValueError) as exc:
        raise err(f"options: {exc}") from None

    network_path = doc.get("network")
    if network_path is not None and not os.path.isabs(network_path) and source != "<scenario>":
        network_path = os.path.join(os.path.dirname(os.path.abspath(source)), network_path)

    part = doc.get("partition") or {}
    try:
        pb = _box(part["bounds"], n, "partition.bounds") if "bounds" in part else None
    except ScenarioError as exc:
        raise err(str(exc)) from None
    pc = part.get("cells")
    if pc is not None:
        if _is_number(pc):
            pc = [int(pc)] * n
        if not isinstance(pc, list) or len(pc) != n or any(not isinstance(c, int) or c < 1 for c in pc):
            raise err(f"partition.cells must be a positive integer or a list of {n}")
        pc = tuple(pc)
    return Scenario(dynamics, init, safety, steps, options, network_path, pb, pc)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def load_scenario(path: str | os.PathLike) -> Scenario:
    path = os.fspath(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_scenario(doc, path)


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    def box(b):
        return [[None if math.isinf(iv.lo) else float(iv.lo), None if math.isinf(iv.hi) else float(iv.hi)]
                for iv in b]

    o = sc.options
    doc = {
        "state_dim": sc.dynamics.state_dim,
        "action_dim": sc.dynamics.action_dim,
        "dynamics": [[{"coefficient": float(t.coefficient), "state": [int(e) for e in t.state_exponents],
                       "action": [int(e) for e in t.action_exponents]} for t in terms]
                     for terms in sc.dynamics.transitions],
        "initial_box": box(sc.initial_box),
        "unsafe": [box(b) for b in sc.safety.unsafe_regions],
        "goal": box(sc.safety.goal_region) if sc.safety.goal_region else None,
        "deadzone": list(sc.safety.deadzone) if sc.safety.deadzone is not None else None,
        "steps": sc.steps,
        "options": {k: getattr(o, k) for k in OPTION_KEYS},
    }
    if sc.network_path:
        doc["network"] = sc.network_path
    if sc.partition_bounds is not None or sc.partition_cells is not None:
        doc["partition"] = {}
        if sc.partition_bounds is not None:
            doc["partition"]["bounds"] = box(sc.partition_bounds)
        if sc.partition_cells is not None:
            doc["partition"]["cells"] = list(sc.partition_cells)
    return doc


def load_samples(path: str | os.PathLike, dim: int | None = None):
    """Initial states from a CSV file, one per row; a non-numeric first row is a header."""
    path = os.fspath(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except FileNotFoundError:
        raise ScenarioError(f"{path}: file not found") from None
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise ScenarioError(f"{path}: no samples")
    out = []
    for lineno, r in enumerate(rows, start=1):
        try:
            vals = [float(c) for c in r]
        except ValueError:
            raise ScenarioError(f"{path}: row {lineno}: non-numeric entry") from None
        if dim is not None and len(vals) != dim:
            raise ScenarioError(f"{path}: row {lineno}: expected {dim} columns, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise ScenarioError(f"{path}: row {lineno}: non-finite entry")
        out.append(vals)
    if len({len(v) for v in out}) != 1:
        raise ScenarioError(f"{path}: rows have differing column counts")
    return np.array(out, dtype=float)
