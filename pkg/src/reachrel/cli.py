"""Command-line front end: ``reachrel {verify,assess,compare,fit-op}``.

Settings resolve as command-line flag, then ``--config`` JSON value, then
scenario file, then built-in default.  All inputs are parsed and validated
before any computation, and output files are written only once every
result is ready, so a run that exits with status 2 leaves nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Any, Sequence

import numpy as np

from .baseline import DEFAULT_ROLLOUTS_PER_CELL
from .closedloop import check_safety, reach_trajectory
from .estimators import PointBasedAssessor, ReachabilityVerifier, ReliabilityAssessor
from .netprop import MODES, NetworkLoadError, load_network
from .opmodel import default_checkpoints, fit_op, mass_snapshots, partition_space
from .scenario import Scenario, ScenarioError, load_samples, load_scenario
from .tmcore import Interval

EXIT_SAFE = 0
EXIT_UNSAFE = 1
EXIT_INPUT = 2

DEFAULT_CELLS = 10
DEFAULT_OUT = "out"

# flag name -> ReachOptions field
_OPTION_FLAGS = {
    "order": "order",
    "bernstein_order": "bernstein_order",
    "bernstein_steps": "bernstein_steps",
    "reinit": "reinit_period",
    "noise": "noise_radius",
    "baseline_mode": "mode",
}


class InputError(Exception):
    """Bad command-line input, config, scenario, network or samples."""


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bounds_arg(text: str) -> list[list[float]]:
    try:
        out = []
        for part in text.split(","):
            lo, hi = part.split(":")
            out.append([float(lo), float(hi)])
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi[,lo:hi...], got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reachrel",
        description="Reach-tube verification of neural-network controlled systems and "
                    "operational-profile reliability assessment.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--network", help="controller weight JSON file (overrides the scenario)")
    common.add_argument("--out", help=f"output directory (default: {DEFAULT_OUT})")
    common.add_argument("--order", type=int, help="Taylor-model truncation order")
    common.add_argument("--bernstein-order", type=int, help="Bernstein polynomial degree k")
    common.add_argument("--bernstein-steps", type=int, help="error sampling steps m")
    common.add_argument("--reinit", type=int, help="re-initialization period (0 = never)")
    common.add_argument("--noise", type=float, help="observation noise radius")
    common.add_argument("--steps", type=int, help="horizon T in control periods")
    common.add_argument("--baseline-mode", choices=MODES,
                        help="ReLU propagation law (default: optimized)")

    sampled = argparse.ArgumentParser(add_help=False)
    sampled.add_argument("--samples", help="CSV of initial states, one per row")
    sampled.add_argument("--cells", type=_int_list, help="cells per dimension, e.g. 10 or 10,5")
    sampled.add_argument("--bounds", type=_bounds_arg,
                         help="partition bounds lo:hi per dimension (default: scenario)")
    sampled.add_argument("--checkpoints", type=_int_list,
                         help="sample counts for the convergence series")

    pooled = argparse.ArgumentParser(add_help=False)
    pooled.add_argument("--jobs", type=int, help="verification workers (default: all cores)")
    pooled.add_argument("--full-coverage", action="store_true", default=None,
                        help="verify zero-mass cells too")

    sub.add_parser("verify", parents=[common], help="reach tube and verdict for the initial box")
    sub.add_parser("assess", parents=[common, sampled, pooled],
                   help="profile-weighted failure probability")
    cmp = sub.add_parser("compare", parents=[common, sampled, pooled],
                         help="interval-based vs point-based estimates")
    cmp.add_argument("--seed", type=int, help="seed for point-based rollouts (default 0)")
    cmp.add_argument("--rollouts-per-cell", type=int,
                     help=f"rollouts per cell (default {DEFAULT_ROLLOUTS_PER_CELL})")
    sub.add_parser("fit-op", parents=[common, sampled], help="fit the operational profile")
    return parser


class Settings:
    """Flag > config file > fallback lookup."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict[str, Any] = {}
        if getattr(args, "config", None):
            try:
                with open(args.config) as fh:
                    self.config = json.load(fh)
            except FileNotFoundError:
                raise InputError(f"{args.config}: file not found") from None
            except json.JSONDecodeError as exc:
                raise InputError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
            if not isinstance(self.config, dict):
                raise InputError(f"{args.config}: top level must be an object")

    def get(self, name: str, fallback=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        value = self.config.get(name, self.config.get(name.replace("_", "-")))
        return fallback if value is None else value


def _resolve_path(settings: Settings, name: str) -> str | None:
    path = getattr(settings.args, name, None)
    if path is not None:
        return path
    path = settings.config.get(name)
    if path is not None and settings.args.config and not os.path.isabs(path):
        path = os.path.join(os.path.dirname(os.path.abspath(settings.args.config)), path)
    return path


def _load_scenario(settings: Settings, required: bool = True) -> Scenario | None:
    path = _resolve_path(settings, "scenario")
    if path is None:
        if required:
            raise InputError("a scenario file is required (--scenario)")
        return None
    sc = load_scenario(path)
    overrides = {field: settings.get(flag) for flag, field in _OPTION_FLAGS.items()}
    overrides["steps"] = settings.get("steps")
    try:
        return sc.with_options(**overrides)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid option: {exc}") from None


def _load_net(settings: Settings, sc: Scenario):
    path = _resolve_path(settings, "network") or sc.network_path
    if path is None:
        raise InputError("a network file is required (--network or 'network' in the scenario)")
    if not os.path.exists(path):
        raise InputError(f"{path}: file not found")
    try:
        net = load_network(path)
    except NetworkLoadError as exc:
        raise InputError(f"{path}: {exc}") from None
    return net


def _verifier(settings: Settings, sc: Scenario, net) -> ReachabilityVerifier:
    o = sc.options
    v = ReachabilityVerifier(net, sc.dynamics, sc.safety, sc.steps, o.order, o.bernstein_order,
                             o.bernstein_steps, o.reinit_period, o.noise_radius, o.mode)
    try:
        return v.fit()
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _partition(settings: Settings, sc: Scenario | None, dim: int | None):
    bounds = settings.get("bounds")
    if bounds is None and sc is not None:
        bounds = sc.partition_bounds or sc.initial_box
    if bounds is None:
        raise InputError("partition bounds are required (--bounds or a scenario)")
    try:
        bounds = tuple(b if isinstance(b, Interval) else Interval(*map(float, b)) for b in bounds)
    except (TypeError, ValueError) as exc:
        raise InputError(f"partition bounds: {exc}") from None
    if dim is not None and len(bounds) != dim:
        raise InputError(f"partition bounds have {len(bounds)} dimensions, expected {dim}")
    cells = settings.get("cells")
    if cells is None:
        cells = sc.partition_cells if sc is not None and sc.partition_cells else DEFAULT_CELLS
    if isinstance(cells, int):
        cells = [cells]
    cells = list(cells)
    if len(cells) == 1:
        cells = cells * len(bounds)
    if len(cells) != len(bounds) or any(c < 1 for c in cells):
        raise InputError(f"--cells needs one positive count or {len(bounds)} of them")
    try:
        return partition_space(bounds, cells)
    except ValueError as exc:
        raise InputError(f"partition: {exc}") from None


def _samples(settings: Settings, dim: int):
    path = _resolve_path(settings, "samples")
    if path is None:
        raise InputError("a samples file is required (--samples)")
    return load_samples(path, dim)


def _checkpoints(settings: Settings, n: int) -> list[int]:
    cps = settings.get("checkpoints")
    if cps is None:
        return default_checkpoints(n)
    cps = [int(c) for c in cps]
    if any(b <= a for a, b in zip(cps, cps[1:])) or not cps or cps[0] < 1 or cps[-1] > n:
        raise InputError(f"checkpoints must be strictly increasing within [1, {n}]")
    return cps


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _write_outputs(out_dir: str, files: dict[str, str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)


# -- commands ---------------------------------------------------------------

def cmd_verify(settings: Settings) -> tuple[int, dict[str, str]]:
    sc = _load_scenario(settings)
    net = _load_net(settings, sc)
    verifier = _verifier(settings, sc, net)
    tube = reach_trajectory(net, sc.dynamics, sc.initial_box, sc.steps, verifier.options_, sc.safety)
    verdict = check_safety(tube, sc.safety)
    doc = verdict.to_dict()
    doc.update({"steps": sc.steps, "computed_steps": len(tube) - 1,
                "captured_at": tube.captured_at, "diverged_at": tube.diverged_at})
    files = {
        "tube.csv": _csv_text(["step", "var", "lo", "hi"], tube.to_rows()),
        "verdict.json": _json_text(doc),
    }
    msg = f"{verdict.kind.value}"
    if verdict.first_violation_step is not None:
        msg += f" (first violation at step {verdict.first_violation_step})"
    print(msg)
    return (EXIT_SAFE if verdict.is_safe else EXIT_UNSAFE), files


def _assessor(settings: Settings, sc: Scenario, net, part) -> ReliabilityAssessor:
    return ReliabilityAssessor(_verifier(settings, sc, net),
                               [[b.lo, b.hi] for b in part.bounds], list(part.cells_per_dim),
                               bool(settings.get("full_coverage", False)), settings.get("jobs", -1))


def cmd_assess(settings: Settings) -> tuple[int, dict[str, str]]:
    sc = _load_scenario(settings)
    net = _load_net(settings, sc)
    part = _partition(settings, sc, sc.state_dim)
    X = _samples(settings, sc.state_dim)
    cps = _checkpoints(settings, len(X))
    _verifier(settings, sc, net)
    try:
        fit_op(X, part)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    assessor = _assessor(settings, sc, net, part).fit(X)
    series = assessor.convergence(X, cps)
    report = assessor.report_
    report.convergence_series = series
    print(f"failure_probability {report.failure_probability!r}")
    return EXIT_SAFE, {
        "report.json": _json_text(report.to_dict(part)),
        "convergence.csv": _csv_text(["n_samples", "failure_probability"], series),
    }


def cmd_compare(settings: Settings) -> tuple[int, dict[str, str]]:
    sc = _load_scenario(settings)
    net = _load_net(settings, sc)
    part = _partition(settings, sc, sc.state_dim)
    X = _samples(settings, sc.state_dim)
    cps = _checkpoints(settings, len(X))
    _verifier(settings, sc, net)
    rollouts = int(settings.get("rollouts_per_cell", DEFAULT_ROLLOUTS_PER_CELL))
    if rollouts < 1:
        raise InputError("--rollouts-per-cell must be at least 1")
    try:
        fit_op(X, part)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    interval = _assessor(settings, sc, net, part).fit(X)
    point = PointBasedAssessor(net, sc.dynamics, sc.safety, sc.steps,
                               [[b.lo, b.hi] for b in part.bounds], list(part.cells_per_dim),
                               rollouts, int(settings.get("seed", 0))).fit(X)
    rows = [(n, ie, pe) for (n, ie), (_, pe) in zip(interval.convergence(X, cps),
                                                   point.convergence(X, cps))]
    n, ie, pe = rows[-1]
    print(f"interval_estimate {ie!r} point_estimate {pe!r}")
    return EXIT_SAFE, {
        "comparison.csv": _csv_text(["n_samples", "interval_estimate", "point_estimate"], rows),
    }


def cmd_fit_op(settings: Settings) -> tuple[int, dict[str, str]]:
    sc = _load_scenario(settings, required=False)
    bounds = settings.get("bounds")
    dim = sc.state_dim if sc is not None else (len(bounds) if bounds else None)
    part = _partition(settings, sc, dim)
    X = _samples(settings, part.dim)
    cps = _checkpoints(settings, len(X))
    try:
        profile = fit_op(X, part)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rows = [(n, i, float(m)) for n, mass in mass_snapshots(X, part, cps) for i, m in enumerate(mass)]
    print(f"{profile.sample_count} samples in bounds, {profile.out_of_bounds} outside")
    return EXIT_SAFE, {
        "profile.json": _json_text(profile.to_dict()),
        "op_convergence.csv": _csv_text(["n_samples", "cell", "mass"], rows),
    }


COMMANDS = {"verify": cmd_verify, "assess": cmd_assess, "compare": cmd_compare, "fit-op": cmd_fit_op}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    try:
        settings = Settings(args)
        status, files = COMMANDS[args.command](settings)
    except (InputError, ScenarioError, NetworkLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_outputs(settings.get("out", DEFAULT_OUT), files)
    return status


if __name__ == "__main__":
    sys.exit(main())
