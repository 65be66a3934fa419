"""Closed-loop reach tubes: network controller plus polynomial plant.

One step of the tube maps the state models through the controller network
(with optional observation noise) and then through the discrete-time
polynomial dynamics.  Safety is checked against axis-aligned unsafe boxes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .bernstein import DEFAULT_BERNSTEIN_ORDER, DEFAULT_STEPS
from .netprop import MODES, OPTIMIZED, Network, network_reach
from .tmcore import (
    DEFAULT_ORDER,
    Domain,
    Interval,
    TaylorModel,
    tm_add,
    tm_bounds,
    tm_from_interval,
    tm_mul,
    tm_scale,
)

DIVERGENCE_THRESHOLD = 1e12
MAX_TERM_DEGREE = 3

Box = tuple[Interval, ...]


def as_box(box: Iterable) -> Box:
    return tuple(b if isinstance(b, Interval) else Interval(*b) for b in box)


@dataclass(frozen=True)
class Term:
    coefficient: float
    state_exponents: tuple[int, ...]
    action_exponents: tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(self.state_exponents) + sum(self.action_exponents)


@dataclass(frozen=True)
class DynamicsSpec:
    """``x'_i = sum_terms c * prod x^e * prod a^f`` for each state variable."""

    state_dim: int
    action_dim: int
    transitions: tuple[tuple[Term, ...], ...]
    max_degree: int = MAX_TERM_DEGREE

    def __post_init__(self):
        trans = tuple(tuple(t if isinstance(t, Term) else Term(*t) for t in terms)
                      for terms in self.transitions)
        if len(trans) != self.state_dim:
            raise ValueError(f"expected {self.state_dim} transition polynomials, got {len(trans)}")
        for i, terms in enumerate(trans):
            for j, t in enumerate(terms):
                if len(t.state_exponents) != self.state_dim or len(t.action_exponents) != self.action_dim:
                    raise ValueError(f"transition {i}, term {j}: exponent vector lengths must be "
                                     f"{self.state_dim} (state) and {self.action_dim} (action)")
                if any(e < 0 for e in t.state_exponents + t.action_exponents):
                    raise ValueError(f"transition {i}, term {j}: negative exponent")
                if t.degree > self.max_degree:
                    raise ValueError(f"transition {i}, term {j}: degree {t.degree} exceeds "
                                     f"maximum {self.max_degree}")
                if not math.isfinite(t.coefficient):
                    raise ValueError(f"transition {i}, term {j}: non-finite coefficient")
        object.__setattr__(self, "transitions", trans)

    @classmethod
    def from_matrices(cls, A, B) -> "DynamicsSpec":
        """Linear plant ``x' = A x + B a``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        n, p = A.shape[0], B.shape[1]
        eye_n, eye_p = np.eye(n, dtype=int), np.eye(p, dtype=int)
        trans = []
        for i in range(n):
            terms = [Term(float(A[i, j]), tuple(eye_n[j]), (0,) * p) for j in range(n) if A[i, j]]
            terms += [Term(float(B[i, j]), (0,) * n, tuple(eye_p[j])) for j in range(p) if B[i, j]]
            trans.append(tuple(terms))
        return cls(n, p, tuple(trans))

    def __call__(self, x, a) -> np.ndarray:
        """Exact next state for a point ``x`` and action ``a``."""
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        out = np.zeros(self.state_dim)
        for i, terms in enumerate(self.transitions):
            acc = 0.0
            for t in terms:
                v = t.coefficient
                for xi, e in zip(x, t.state_exponents):
                    if e:
                        v *= xi ** e
                for ai, e in zip(a, t.action_exponents):
                    if e:
                        v *= ai ** e
                acc += v
            out[i] = acc
        return out


@dataclass(frozen=True)
class SafetySpec:
    """Unsafe boxes plus an optional goal and per-variable deadzone.

    A ``None`` deadzone entry leaves that variable out of the capture test
    (for instance a variable the controller cannot influence).
    """

    unsafe_regions: tuple[Box, ...] = ()
    goal_region: Box | None = None
    deadzone: tuple[float | None, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "unsafe_regions", tuple(as_box(b) for b in self.unsafe_regions))
        if self.goal_region is not None:
            object.__setattr__(self, "goal_region", as_box(self.goal_region))
        if self.deadzone is not None:
            dz = tuple(None if d is None else float(d) for d in self.deadzone)
            if any(d is not None and not d >= 0 for d in dz):
                raise ValueError("deadzone half-widths must be non-negative")
            object.__setattr__(self, "deadzone", dz)

    def capture_box(self, dim: int) -> tuple[Interval | None, ...] | None:
        """Goal region widened by the deadzone; ``None`` if no deadzone is set."""
        if self.deadzone is None:
            return None
        if len(self.deadzone) != dim:
            raise ValueError(f"deadzone has {len(self.deadzone)} entries for {dim} state variables")
        goal = self.goal_region or tuple(Interval(0.0, 0.0) for _ in range(dim))
        return tuple(None if d is None else g.widen(d) for g, d in zip(goal, self.deadzone))

    def is_unsafe_point(self, x) -> bool:
        return any(all(iv.lo <= xi <= iv.hi for iv, xi in zip(box, x)) for box in self.unsafe_regions)


def captured(bounds: Sequence[Interval], capture: Sequence[Interval | None] | None) -> bool:
    if capture is None:
        return False
    return all(c is None or c.contains(b) for b, c in zip(bounds, capture))


def captured_part(bounds: Sequence[Interval],
                  capture: Sequence[Interval | None] | None) -> tuple[Interval, ...] | None:
    """Box hull of the points of ``bounds`` that lie inside the capture region."""
    if capture is None:
        return None
    if not all(c is None or b.intersects(c) for b, c in zip(bounds, capture)):
        return None
    return tuple(b if c is None else b.intersection(c) for b, c in zip(bounds, capture))


def _hull(a: tuple[Interval, ...] | None, b: tuple[Interval, ...] | None) -> tuple[Interval, ...] | None:
    if a is None or b is None:
        return a if b is None else b
    return tuple(x.union_hull(y) for x, y in zip(a, b))


def point_captured(x, capture: Sequence[Interval | None] | None) -> bool:
    if capture is None:
        return False
    return all(c is None or c.lo <= xi <= c.hi for xi, c in zip(x, capture))


@dataclass(frozen=True)
class ReachOptions:
    order: int = DEFAULT_ORDER
    bernstein_order: int = DEFAULT_BERNSTEIN_ORDER
    bernstein_steps: int = DEFAULT_STEPS
    reinit_period: int = 1
    noise_radius: float | Sequence[float] = 0.0
    mode: str = OPTIMIZED

    def __post_init__(self):
        if not 1 <= self.order <= 6:
            raise ValueError("truncation order must be between 1 and 6")
        if self.bernstein_order < 1 or self.bernstein_steps < 1:
            raise ValueError("Bernstein order and steps must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown propagation mode {self.mode!r}; expected one of {MODES}")
        if self.reinit_period < 0:
            raise ValueError("reinit_period must be >= 0 (0 disables re-initialization)")

    def noise_vector(self, dim: int) -> list[float]:
        r = self.noise_radius
        if np.ndim(r) == 0:
            return [float(r)] * dim
        r = [float(v) for v in r]
        if len(r) != dim:
            raise ValueError(f"noise radius has {len(r)} entries for {dim} state variables")
        return r


@dataclass
class TubeStep:
    bounds: tuple[Interval, ...]
    models: tuple[TaylorModel, ...] | None = None
    frozen: bool = False


@dataclass
class ReachTube:
    steps: list[TubeStep]
    options: ReachOptions
    horizon: int
    diverged: bool = False
    diverged_at: int | None = None
    captured_at: int | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def bounds(self) -> np.ndarray:
        """Array of shape (n_steps, state_dim, 2) with lower/upper bounds."""
        return np.array([[[iv.lo, iv.hi] for iv in s.bounds] for s in self.steps])

    def widths(self) -> np.ndarray:
        b = self.bounds()
        return b[..., 1] - b[..., 0]

    def to_rows(self) -> list[tuple[int, int, float, float]]:
        return [(t, i, iv.lo, iv.hi) for t, s in enumerate(self.steps) for i, iv in enumerate(s.bounds)]


class VerdictKind(str, Enum):
    VERIFIED_SAFE = "verified_safe"
    POSSIBLY_UNSAFE = "possibly_unsafe"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    first_violation_step: int | None
    final_bounds: tuple[Interval, ...]

    @property
    def is_safe(self) -> bool:
        return self.kind is VerdictKind.VERIFIED_SAFE

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind.value,
            "first_violation_step": self.first_violation_step,
            "final_bounds": [[iv.lo, iv.hi] for iv in self.final_bounds],
        }


def dynamics_step(state_tms: Sequence[TaylorModel], action_tms: Sequence[TaylorModel],
                  dyn: DynamicsSpec, k: int | None = None) -> list[TaylorModel]:
    """Next-state models from the transition polynomials (products truncated to ``k``)."""
    if len(state_tms) != dyn.state_dim or len(action_tms) != dyn.action_dim:
        raise ValueError(f"dynamics expects {dyn.state_dim} state and {dyn.action_dim} action "
                         f"models, got {len(state_tms)} and {len(action_tms)}")
    domain = state_tms[0].domain
    if k is None:
        k = state_tms[0].order
    powers: dict[tuple[str, int, int], TaylorModel] = {}

    def power(kind: str, idx: int, e: int) -> TaylorModel:
        key = (kind, idx, e)
        if key not in powers:
            base = (state_tms if kind == "x" else action_tms)[idx]
            powers[key] = base if e == 1 else tm_mul(power(kind, idx, e - 1), base, k)
        return powers[key]

    out = []
    for terms in dyn.transitions:
        acc = TaylorModel.zero(domain, k)
        for t in terms:
            if t.coefficient == 0.0:
                continue
            factors = [power("x", i, e) for i, e in enumerate(t.state_exponents) if e]
            factors += [power("a", i, e) for i, e in enumerate(t.action_exponents) if e]
            if not factors:
                mono = TaylorModel.constant(t.coefficient, domain, k)
            else:
                mono = factors[0]
                for f in factors[1:]:
                    mono = tm_mul(mono, f, k)
                mono = tm_scale(mono, t.coefficient)
            acc = tm_add(acc, mono)
        out.append(acc)
    return out


def _diverged(bounds: Sequence[Interval]) -> bool:
    return any(not iv.is_finite() or iv.mag > DIVERGENCE_THRESHOLD for iv in bounds)


def reach_trajectory(net: Network, dyn: DynamicsSpec, init_box: Sequence, steps: int,
                     options: ReachOptions | None = None, safety: SafetySpec | None = None,
                     keep_models: bool = False) -> ReachTube:
    """Reach tube over ``steps`` control periods from ``init_box``.

    Every ``reinit_period`` steps the state models are rebuilt from their
    interval bounds (``0`` never rebuilds).  When ``safety`` carries a
    deadzone and all constrained bounds fall inside goal +- deadzone, the
    remaining steps repeat the captured bounds.  Before that, the parts of
    earlier boxes that already lay inside the capture region stay frozen in
    the real system, so each step's bounds are hulled with them.  A step whose
    bounds are non-finite or exceed the divergence threshold ends the tube
    early.
    """
    options = options or ReachOptions()
    if steps < 0:
        raise ValueError("steps must be non-negative")
    box = as_box(init_box)
    n = dyn.state_dim
    if len(box) != n:
        raise ValueError(f"initial box has {len(box)} intervals for {n} state variables")
    if net.input_dim != n or net.output_dim != dyn.action_dim:
        raise ValueError(f"network maps {net.input_dim} -> {net.output_dim} but dynamics need "
                         f"{n} -> {dyn.action_dim}")
    capture = safety.capture_box(n) if safety is not None else None
    noise = options.noise_vector(n)

    domain = Domain.unit(n)
    state = [tm_from_interval(iv, i, domain, options.order) for i, iv in enumerate(box)]
    tube = ReachTube([TubeStep(box, tuple(state) if keep_models else None)], options, steps)
    frozen = captured(box, capture)
    if frozen:
        tube.captured_at = 0
    held = captured_part(box, capture)
    moving = box
    for t in range(1, steps + 1):
        prev = tube.steps[-1]
        if frozen:
            tube.steps.append(TubeStep(prev.bounds, prev.models, frozen=True))
            continue
        if options.reinit_period and t > 1 and (t - 1) % options.reinit_period == 0:
            state = [tm_from_interval(iv, i, domain, options.order) for i, iv in enumerate(moving)]
        observed = [s if r == 0.0 else TaylorModel(s.poly, s.remainder.widen(r), s.domain, s.order)
                    for s, r in zip(state, noise)]
        try:
            actions = network_reach(net, observed, options.bernstein_order,
                                    options.bernstein_steps, options.mode)
            state = dynamics_step(state, actions, dyn, options.order)
            bounds = tuple(tm_bounds(s) for s in state)
        except (ValueError, OverflowError):
            bounds = None
        if bounds is None or _diverged(bounds):
            tube.diverged = True
            tube.diverged_at = t
            break
        moving = bounds
        bounds = _hull(bounds, held)
        held = _hull(held, captured_part(moving, capture))
        tube.steps.append(TubeStep(bounds, tuple(state) if keep_models else None))
        if captured(bounds, capture):
            frozen = True
            tube.captured_at = t
    return tube


def check_safety(tube: ReachTube, spec: SafetySpec) -> Verdict:
    """Verified safe iff every step's box misses every unsafe box.

    A tube that diverged is never verified safe.
    """
    for t, step in enumerate(tube.steps):
        for region in spec.unsafe_regions:
            if len(region) != len(step.bounds):
                raise ValueError("unsafe region dimension does not match the state dimension")
            if all(b.intersects(u) for b, u in zip(step.bounds, region)):
                return Verdict(VerdictKind.POSSIBLY_UNSAFE, t, tube.steps[-1].bounds)
    if tube.diverged:
        return Verdict(VerdictKind.DIVERGED, tube.diverged_at, tube.steps[-1].bounds)
    return Verdict(VerdictKind.VERIFIED_SAFE, None, tube.steps[-1].bounds)


def write_tube_csv(tube: ReachTube, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "var", "lo", "hi"])
        for t, i, lo, hi in tube.to_rows():
            w.writerow([t, i, repr(lo), repr(hi)])
