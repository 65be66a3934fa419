"""Operational profiles over a grid partition and failure-probability aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import rel_entr

from .closedloop import Verdict, VerdictKind
from .tmcore import Interval


@dataclass(frozen=True)
class Partitioning:
    """Regular grid over ``bounds`` with ``cells_per_dim`` cells along each axis.

    Cells are numbered in C order (last axis fastest).  Edges come from
    ``np.linspace`` so neighbouring cells share their boundary exactly.
    """

    bounds: tuple[Interval, ...]
    cells_per_dim: tuple[int, ...]

    def __post_init__(self):
        bounds = tuple(b if isinstance(b, Interval) else Interval(*b) for b in self.bounds)
        cells = tuple(int(c) for c in self.cells_per_dim)
        if len(bounds) != len(cells):
            raise ValueError(f"{len(bounds)} bounds but {len(cells)} cell counts")
        if any(c < 1 for c in cells):
            raise ValueError("every dimension needs at least one cell")
        if any(not b.is_finite() for b in bounds):
            raise ValueError("partition bounds must be finite")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "cells_per_dim", cells)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def n_cells(self) -> int:
        return math.prod(self.cells_per_dim)

    @property
    def edges(self) -> list[np.ndarray]:
        return [np.linspace(b.lo, b.hi, c + 1) for b, c in zip(self.bounds, self.cells_per_dim)]

    def cell(self, index: int) -> tuple[Interval, ...]:
        idx = np.unravel_index(index, self.cells_per_dim)
        return tuple(Interval(e[i], e[i + 1]) for e, i in zip(self.edges, idx))

    @property
    def cells(self) -> list[tuple[Interval, ...]]:
        return [self.cell(i) for i in range(self.n_cells)]

    def center(self, index: int) -> np.ndarray:
        return np.array([iv.mid for iv in self.cell(index)])

    @property
    def centers(self) -> np.ndarray:
        return np.array([self.center(i) for i in range(self.n_cells)])

    def locate(self, X) -> np.ndarray:
        """Cell index of each row of ``X``; ``-1`` for rows outside the bounds."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"samples have {X.shape[1]} columns, partition has {self.dim} dimensions")
        lo = np.array([b.lo for b in self.bounds])
        hi = np.array([b.hi for b in self.bounds])
        inside = np.all((X >= lo) & (X <= hi), axis=1)
        idx = np.zeros(X.shape, dtype=np.int64)
        for d, e in enumerate(self.edges):
            # right-closed last cell so the upper boundary belongs to the grid
            idx[:, d] = np.clip(np.searchsorted(e, X[:, d], side="right") - 1, 0, len(e) - 2)
        flat = np.ravel_multi_index(idx.T, self.cells_per_dim) if len(X) else np.zeros(0, np.int64)
        return np.where(inside, flat, -1)

    def refine(self, factor: int = 2) -> "Partitioning":
        return Partitioning(self.bounds, tuple(c * factor for c in self.cells_per_dim))

    def to_dict(self) -> dict:
        return {"bounds": [[b.lo, b.hi] for b in self.bounds], "cells_per_dim": list(self.cells_per_dim)}


def partition_space(bounds: Sequence, cells_per_dim: Sequence[int]) -> Partitioning:
    return Partitioning(tuple(bounds), tuple(cells_per_dim))


@dataclass(frozen=True)
class OperationalProfile:
    partitioning: Partitioning
    mass: np.ndarray
    sample_count: int
    out_of_bounds: int = 0

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.partitioning.n_cells,):
            raise ValueError(f"expected {self.partitioning.n_cells} masses, got shape {m.shape}")
        if np.any(m < 0) or abs(math.fsum(m) - 1.0) > 1e-12:
            raise ValueError("cell masses must be non-negative and sum to one")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mass > 0)

    def to_dict(self) -> dict:
        p = self.partitioning
        return {
            "partitioning": p.to_dict(),
            "sample_count": self.sample_count,
            "out_of_bounds": self.out_of_bounds,
            "cells": [
                {"id": i, "box": [[iv.lo, iv.hi] for iv in p.cell(i)],
                 "center": p.center(i).tolist(), "mass": float(self.mass[i])}
                for i in range(p.n_cells)
            ],
        }


def cell_counts(samples, part: Partitioning) -> tuple[np.ndarray, int]:
    idx = part.locate(samples)
    inside = idx >= 0
    return np.bincount(idx[inside], minlength=part.n_cells), int((~inside).sum())


def fit_op(samples, part: Partitioning) -> OperationalProfile:
    """Empirical cell frequencies of the in-bounds samples.

    Within the per-cell categorical family this histogram is the exact
    minimiser of the KL divergence to the empirical distribution.
    """
    counts, outside = cell_counts(samples, part)
    total = int(counts.sum())
    if total == 0:
        raise ValueError("no samples fall inside the partition bounds")
    return OperationalProfile(part, counts / total, total, outside)


def kl_divergence(p, q) -> float:
    """``KL(p || q)`` for categorical distributions (``0 log 0 = 0``)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float(np.sum(rel_entr(p, q)))


def failure_indicator(verdict) -> float:
    """Map a verdict (or a probability of failure) to a failure rate in [0, 1]."""
    if isinstance(verdict, Verdict):
        return 0.0 if verdict.kind is VerdictKind.VERIFIED_SAFE else 1.0
    if isinstance(verdict, VerdictKind):
        return 0.0 if verdict is VerdictKind.VERIFIED_SAFE else 1.0
    if isinstance(verdict, (bool, np.bool_)):
        return 0.0 if verdict else 1.0
    f = float(verdict)
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"failure probability {f} outside [0, 1]")
    return f


@dataclass
class CellRecord:
    cell: int
    mass: float
    verdict: str | None
    failure: float | None


@dataclass
class ReliabilityReport:
    per_cell: list[CellRecord]
    failure_probability: float
    cells_verified: int
    sample_count: int = 0
    out_of_bounds: int = 0
    convergence_series: list[tuple[int, float]] = field(default_factory=list)

    def to_dict(self, partitioning: Partitioning | None = None) -> dict:
        cells = []
        for r in self.per_cell:
            rec = {"id": r.cell, "mass": r.mass, "verdict": r.verdict, "failure": r.failure}
            if partitioning is not None:
                rec["box"] = [[iv.lo, iv.hi] for iv in partitioning.cell(r.cell)]
                rec["center"] = partitioning.center(r.cell).tolist()
            cells.append(rec)
        return {
            "failure_probability": self.failure_probability,
            "cells_verified": self.cells_verified,
            "sample_count": self.sample_count,
            "out_of_bounds": self.out_of_bounds,
            "cells": cells,
            "convergence": [[n, e] for n, e in self.convergence_series],
        }


def _verdict_label(v) -> str:
    if isinstance(v, Verdict):
        return v.kind.value
    if isinstance(v, VerdictKind):
        return v.value
    return "probability"


def assess_reliability(profile: OperationalProfile,
                       verdicts: Mapping[int, object] | Sequence[object]) -> ReliabilityReport:
    """Failure probability ``sum_i mass_i * failure_i`` over the partition cells.

    ``verdicts`` maps cell index to a :class:`Verdict` (safe -> 0, anything
    else -> 1) or directly to a failure probability.  Cells without mass may
    be omitted.
    """
    if not isinstance(verdicts, Mapping):
        verdicts = dict(enumerate(verdicts))
    records = []
    terms = []
    verified = 0
    for i, m in enumerate(profile.mass):
        v = verdicts.get(i)
        if v is None:
            if m > 0:
                raise ValueError(f"missing verdict for cell {i} with mass {m}")
            records.append(CellRecord(i, float(m), None, None))
            continue
        f = failure_indicator(v)
        verified += f == 0.0
        records.append(CellRecord(i, float(m), _verdict_label(v), f))
        terms.append(m * f)
    estimate = min(1.0, max(0.0, math.fsum(terms)))
    return ReliabilityReport(records, estimate, int(verified), profile.sample_count, profile.out_of_bounds)


def default_checkpoints(n: int, count: int = 10) -> list[int]:
    return sorted({max(1, int(round(n * (i + 1) / count))) for i in range(count)})


def convergence_curve(samples, part: Partitioning, verdicts: Mapping[int, object] | Sequence[object],
                      checkpoints: Sequence[int]) -> list[tuple[int, float]]:
    """Estimate after fitting the profile on the first ``n`` samples, per checkpoint."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    cps = list(checkpoints)
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if cps and (cps[0] < 1 or cps[-1] > len(samples)):
        raise ValueError(f"checkpoints must lie in [1, {len(samples)}]")
    return [(n, assess_reliability(fit_op(samples[:n], part), verdicts).failure_probability)
            for n in cps]


def mass_snapshots(samples, part: Partitioning, checkpoints: Sequence[int]) -> list[tuple[int, np.ndarray]]:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    return [(n, fit_op(samples[:n], part).mass) for n in checkpoints]
