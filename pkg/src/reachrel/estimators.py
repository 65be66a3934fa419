"""Estimator wrappers around the verification and assessment pipeline."""

from __future__ import annotations

import math

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_array, check_is_fitted

from .baseline import DEFAULT_ROLLOUTS_PER_CELL, cell_failure_fractions
from .bernstein import DEFAULT_BERNSTEIN_ORDER, DEFAULT_STEPS
from .closedloop import (
    DynamicsSpec,
    ReachOptions,
    SafetySpec,
    Verdict,
    as_box,
    check_safety,
    reach_trajectory,
)
from .netprop import OPTIMIZED, Network
from .opmodel import (
    OperationalProfile,
    ReliabilityReport,
    assess_reliability,
    convergence_curve,
    fit_op,
    partition_space,
)
from .tmcore import DEFAULT_ORDER


def _as_cells(cells_per_dim, dim: int) -> tuple[int, ...]:
    if np.ndim(cells_per_dim) == 0:
        return (int(cells_per_dim),) * dim
    cells = tuple(int(c) for c in cells_per_dim)
    if len(cells) != dim:
        raise ValueError(f"cells_per_dim has {len(cells)} entries for {dim} dimensions")
    return cells


class OperationalProfileEstimator(BaseEstimator):
    """Grid histogram of initial states.

    Parameters
    ----------
    bounds : sequence of (lo, hi)
        Extent of the partition along each state variable.
    cells_per_dim : int or sequence of int
        Number of cells per axis.
    """

    def __init__(self, bounds=((0.0, 1.0),), cells_per_dim=10):
        self.bounds = bounds
        self.cells_per_dim = cells_per_dim

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        box = as_box(self.bounds)
        if X.shape[1] != len(box):
            raise ValueError(f"X has {X.shape[1]} features, bounds describe {len(box)}")
        self.partitioning_ = partition_space(box, _as_cells(self.cells_per_dim, len(box)))
        self.profile_ = fit_op(X, self.partitioning_)
        self.mass_ = self.profile_.mass
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Cell index of each sample (``-1`` outside the bounds)."""
        check_is_fitted(self, "profile_")
        X = check_array(X, dtype=float)
        return self.partitioning_.locate(X)

    def score_samples(self, X):
        """Log density of the piecewise-constant profile (``-inf`` off support)."""
        check_is_fitted(self, "profile_")
        idx = self.predict(X)
        volume = math.prod(b.width / c for b, c in zip(self.partitioning_.bounds,
                                                       self.partitioning_.cells_per_dim))
        dens = np.where(idx >= 0, self.mass_[np.maximum(idx, 0)], 0.0) / volume
        with np.errstate(divide="ignore"):
            return np.log(dens)


class ReachabilityVerifier(BaseEstimator):
    """Sound local verifier: reach tube from an initial box, checked against unsafe boxes.

    ``fit`` only validates the configuration; ``predict`` takes boxes of
    shape ``(n, state_dim, 2)`` and returns 1 where safety could not be
    verified and 0 where it was proved.
    """

    def __init__(self, network: Network | None = None, dynamics: DynamicsSpec | None = None,
                 safety: SafetySpec | None = None, steps: int = 10, order: int = DEFAULT_ORDER,
                 bernstein_order: int = DEFAULT_BERNSTEIN_ORDER, bernstein_steps: int = DEFAULT_STEPS,
                 reinit_period: int = 1, noise_radius=0.0, mode: str = OPTIMIZED):
        self.network = network
        self.dynamics = dynamics
        self.safety = safety
        self.steps = steps
        self.order = order
        self.bernstein_order = bernstein_order
        self.bernstein_steps = bernstein_steps
        self.reinit_period = reinit_period
        self.noise_radius = noise_radius
        self.mode = mode

    def fit(self, X=None, y=None):
        if self.network is None or self.dynamics is None:
            raise ValueError("a network and dynamics are required")
        if self.network.input_dim != self.dynamics.state_dim:
            raise ValueError("network input size differs from the state dimension")
        if self.network.output_dim != self.dynamics.action_dim:
            raise ValueError("network output size differs from the action dimension")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        self.options_ = ReachOptions(self.order, self.bernstein_order, self.bernstein_steps,
                                     self.reinit_period, self.noise_radius, self.mode)
        self.safety_ = self.safety if self.safety is not None else SafetySpec()
        self.n_features_in_ = self.dynamics.state_dim
        return self

    def reach(self, box, keep_models: bool = False):
        check_is_fitted(self, "options_")
        return reach_trajectory(self.network, self.dynamics, box, self.steps, self.options_,
                                self.safety_, keep_models)

    def verify(self, box) -> Verdict:
        return check_safety(self.reach(box), self.safety_)

    def predict(self, X):
        boxes = np.asarray(X, dtype=float)
        if boxes.ndim != 3 or boxes.shape[2] != 2:
            raise ValueError("expected boxes of shape (n, state_dim, 2)")
        return np.array([0 if self.verify(b).is_safe else 1 for b in boxes], dtype=int)


def _verify_cell(verifier: ReachabilityVerifier, box) -> Verdict:
    return verifier.verify(box)


class ReliabilityAssessor(BaseEstimator):
    """Two-level assessment: profile-weighted share of cells not verified safe.

    Parameters
    ----------
    verifier : ReachabilityVerifier
    bounds, cells_per_dim
        Partition of the initial-state space.
    full_coverage : bool
        Verify every cell, not only those with profile mass.
    n_jobs : int or None
        Worker count for per-cell verification (joblib semantics).
    """

    def __init__(self, verifier: ReachabilityVerifier | None = None, bounds=((0.0, 1.0),),
                 cells_per_dim=10, full_coverage: bool = False, n_jobs=None):
        self.verifier = verifier
        self.bounds = bounds
        self.cells_per_dim = cells_per_dim
        self.full_coverage = full_coverage
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.verifier is None:
            raise ValueError("a verifier is required")
        op = OperationalProfileEstimator(self.bounds, self.cells_per_dim).fit(X)
        self.verifier_ = clone(self.verifier).fit()
        self.partitioning_ = op.partitioning_
        self.profile_: OperationalProfile = op.profile_
        cells = range(self.partitioning_.n_cells) if self.full_coverage else self.profile_.support
        self.verdicts_ = self.verify_cells(cells)
        self.report_: ReliabilityReport = assess_reliability(self.profile_, self.verdicts_)
        self.failure_probability_ = self.report_.failure_probability
        self.n_features_in_ = op.n_features_in_
        return self

    def verify_cells(self, cells) -> dict[int, Verdict]:
        cells = [int(i) for i in cells]
        part = getattr(self, "partitioning_", None)
        if part is None:
            raise ValueError("call fit first")
        results = Parallel(n_jobs=self.n_jobs)(
            delayed(_verify_cell)(self.verifier_, part.cell(i)) for i in cells)
        return dict(zip(cells, results))

    def convergence(self, X, checkpoints) -> list[tuple[int, float]]:
        """Estimate after fitting the profile to the first ``n`` rows, per checkpoint."""
        check_is_fitted(self, "verdicts_")
        X = check_array(X, dtype=float)
        missing = set(np.unique(self.partitioning_.locate(X))) - set(self.verdicts_) - {-1}
        verdicts = dict(self.verdicts_)
        if missing:
            verdicts.update(self.verify_cells(sorted(missing)))
        return convergence_curve(X, self.partitioning_, verdicts, checkpoints)

    def predict(self, X):
        """Failure indicator of the cell holding each sample (nan outside the grid or unverified)."""
        check_is_fitted(self, "verdicts_")
        X = check_array(X, dtype=float)
        out = np.full(len(X), np.nan)
        for row, i in enumerate(self.partitioning_.locate(X)):
            v = self.verdicts_.get(int(i))
            if v is not None:
                out[row] = 0.0 if v.is_safe else 1.0
        return out


class PointBasedAssessor(BaseEstimator):
    """Monte Carlo counterpart: profile-weighted unsafe-rollout fraction per cell."""

    def __init__(self, network: Network | None = None, dynamics: DynamicsSpec | None = None,
                 safety: SafetySpec | None = None, steps: int = 10, bounds=((0.0, 1.0),),
                 cells_per_dim=10, rollouts_per_cell: int = DEFAULT_ROLLOUTS_PER_CELL, seed: int = 0):
        self.network = network
        self.dynamics = dynamics
        self.safety = safety
        self.steps = steps
        self.bounds = bounds
        self.cells_per_dim = cells_per_dim
        self.rollouts_per_cell = rollouts_per_cell
        self.seed = seed

    def fit(self, X, y=None):
        if self.network is None or self.dynamics is None:
            raise ValueError("a network and dynamics are required")
        op = OperationalProfileEstimator(self.bounds, self.cells_per_dim).fit(X)
        self.partitioning_ = op.partitioning_
        self.profile_ = op.profile_
        self.safety_ = self.safety if self.safety is not None else SafetySpec()
        self.fractions_ = cell_failure_fractions(self.network, self.dynamics, self.safety_,
                                                 self.profile_, self.steps,
                                                 self.rollouts_per_cell, self.seed)
        self.failure_probability_ = math.fsum(self.profile_.mass[i] * f
                                              for i, f in sorted(self.fractions_.items()))
        self.n_features_in_ = op.n_features_in_
        return self

    def convergence(self, X, checkpoints) -> list[tuple[int, float]]:
        check_is_fitted(self, "fractions_")
        X = check_array(X, dtype=float)
        out = []
        for n in checkpoints:
            prof = fit_op(X[:n], self.partitioning_)
            missing = [int(i) for i in prof.support if int(i) not in self.fractions_]
            if missing:
                self.fractions_.update(cell_failure_fractions(
                    self.network, self.dynamics, self.safety_, prof, self.steps,
                    self.rollouts_per_cell, self.seed, missing))
            out.append((n, math.fsum(prof.mass[i] * self.fractions_[int(i)] for i in prof.support)))
        return out
