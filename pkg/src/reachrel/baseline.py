"""Point-based Monte Carlo rollouts: the exact counterpart of the reach tube."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closedloop import DynamicsSpec, SafetySpec, point_captured
from .netprop import Network
from .opmodel import OperationalProfile

DEFAULT_ROLLOUTS_PER_CELL = 20


@dataclass
class Rollout:
    states: np.ndarray
    actions: np.ndarray
    safe: bool
    violation_step: int | None = None


def simulate_rollout(net: Network, dyn: DynamicsSpec, x0, steps: int, spec: SafetySpec,
                     noise_radius: float = 0.0, rng: np.random.Generator | None = None) -> Rollout:
    """Simulate ``a_t = net(x_t)``, ``x_{t+1} = dyn(x_t, a_t)`` for ``steps`` periods.

    Deadzone capture freezes the state exactly as in the reach tube; frozen
    periods record a zero action.  With ``noise_radius > 0`` the network sees
    ``x_t`` plus uniform noise drawn from ``rng``.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = dyn.state_dim
    if x.shape != (n,):
        raise ValueError(f"initial state must have {n} entries")
    capture = spec.capture_box(n)
    states = np.empty((steps + 1, n))
    actions = np.zeros((steps, dyn.action_dim))
    states[0] = x
    violation = 0 if spec.is_unsafe_point(x) else None
    frozen = point_captured(x, capture)
    for t in range(steps):
        if frozen:
            states[t + 1] = x
            continue
        obs = x
        if noise_radius > 0.0:
            if rng is None:
                raise ValueError("an rng is required when noise_radius > 0")
            obs = x + rng.uniform(-noise_radius, noise_radius, size=n)
        with np.errstate(over="ignore", invalid="ignore"):
            a = np.atleast_1d(net(obs))
            x = dyn(x, a)
        actions[t] = a
        states[t + 1] = x
        if violation is None and (not np.all(np.isfinite(x)) or spec.is_unsafe_point(x)):
            violation = t + 1
        if not np.all(np.isfinite(x)):
            states[t + 2:] = np.nan
            return Rollout(states, actions, False, violation)
        frozen = point_captured(x, capture)
    return Rollout(states, actions, violation is None, violation)


def _cell_rng(seed: int, cell: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(cell)]))


def sample_cell(box, count: int, rng: np.random.Generator) -> np.ndarray:
    lo = np.array([iv.lo for iv in box])
    hi = np.array([iv.hi for iv in box])
    return rng.uniform(lo, hi, size=(count, len(box)))


def cell_failure_fraction(net: Network, dyn: DynamicsSpec, spec: SafetySpec, box, steps: int,
                          rollouts: int, rng: np.random.Generator) -> float:
    starts = sample_cell(box, rollouts, rng)
    unsafe = sum(not simulate_rollout(net, dyn, x0, steps, spec).safe for x0 in starts)
    return unsafe / rollouts


def cell_failure_fractions(net: Network, dyn: DynamicsSpec, spec: SafetySpec,
                           profile: OperationalProfile, steps: int,
                           rollouts_per_cell: int = DEFAULT_ROLLOUTS_PER_CELL, seed: int = 0,
                           cells=None) -> dict[int, float]:
    """Unsafe-rollout fraction per cell; each cell draws from its own seeded stream."""
    if rollouts_per_cell < 1:
        raise ValueError("rollouts_per_cell must be at least 1")
    part = profile.partitioning
    cells = profile.support if cells is None else cells
    return {int(i): cell_failure_fraction(net, dyn, spec, part.cell(int(i)), steps,
                                          rollouts_per_cell, _cell_rng(seed, int(i)))
            for i in cells}


def point_estimate(net: Network, dyn: DynamicsSpec, spec: SafetySpec, profile: OperationalProfile,
                   steps: int, rollouts_per_cell: int = DEFAULT_ROLLOUTS_PER_CELL,
                   seed: int = 0) -> float:
    """Profile-weighted unsafe-rollout fraction (point-based failure probability)."""
    fractions = cell_failure_fractions(net, dyn, spec, profile, steps, rollouts_per_cell, seed)
    return math.fsum(profile.mass[i] * f for i, f in fractions.items())
