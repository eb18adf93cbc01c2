"""Compute-optimal allocation under fixed compute and unique-data budgets.

Given a training budget C and a unique-token pool U, sweep candidate epoch
counts, derive the implied model size N = C / (6 * U * epochs), evaluate
the law, and keep the loss-minimizing point.  Frontiers trace this over a
compute grid; the crossover solver finds the smallest budget at which one
law's optimal loss overtakes another's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import AllocationError
from .laws import LawSpec, predict

DEFAULT_EPOCH_CANDIDATES = tuple(range(1, 65))
DEFAULT_N_BOUNDS = (1e6, 1e13)


@dataclass(frozen=True)
class AllocationQuery:
    compute: float
    u_tokens: float
    epoch_candidates: Tuple[float, ...] = DEFAULT_EPOCH_CANDIDATES
    n_bounds: Tuple[float, float] = DEFAULT_N_BOUNDS
    strict: bool = False

    def __post_init__(self):
        if self.compute <= 0 or self.u_tokens < 1:
            raise ValueError("compute must be > 0 and u_tokens >= 1")
        eps = self.epoch_candidates
        if len(eps) == 0 or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epoch_candidates must be nonempty and strictly increasing")
        if self.n_bounds[0] <= 0 or self.n_bounds[1] <= self.n_bounds[0]:
            raise ValueError("n_bounds must satisfy 0 < min < max")


@dataclass(frozen=True)
class AllocationPoint:
    compute: float
    u_tokens: float
    n_params: float
    epochs: float
    predicted_loss: float


def continuous_epoch_candidates(max_epochs: float = 64.0, points: int = 256) -> tuple:
    """Log-spaced fractional epoch grid for smooth frontier tracing."""
    return tuple(np.geomspace(1.0, max_epochs, points))


def solve_allocation(spec: LawSpec, q: AllocationQuery) -> AllocationPoint:
    """Loss-minimizing (model size, epochs) for the query's budgets.

    Ties (within 1e-12 relative) break toward fewer epochs.  With
    strict=True, an error is raised if every candidate requires clamping
    the implied model size to n_bounds.
    """
    eps = np.asarray(q.epoch_candidates, dtype=float)
    n_implied = q.compute / (6.0 * q.u_tokens * eps)
    clamped = (n_implied < q.n_bounds[0]) | (n_implied > q.n_bounds[1])
    if q.strict and np.all(clamped):
        raise AllocationError(
            f"every epoch candidate clamps N outside {q.n_bounds} at C={q.compute:g}"
        )
    n = np.clip(n_implied, *q.n_bounds)
    losses = np.asarray(predict(spec, n, q.u_tokens, eps))
    best = float(np.min(losses))
    i = int(np.argmax(losses <= best * (1.0 + 1e-12)))
    return AllocationPoint(
        compute=q.compute,
        u_tokens=q.u_tokens,
        n_params=float(n[i]),
        epochs=float(eps[i]),
        predicted_loss=float(losses[i]),
    )


def trace_frontier(
    spec: LawSpec,
    u_tokens: float,
    compute_grid: Sequence[float],
    epoch_candidates: Tuple[float, ...] = DEFAULT_EPOCH_CANDIDATES,
    n_bounds: Tuple[float, float] = DEFAULT_N_BOUNDS,
) -> list:
    """Optimal allocation per compute value, in grid order."""
    grid = list(compute_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("compute_grid must be strictly increasing")
    return [
        solve_allocation(
            spec,
            AllocationQuery(
                compute=c, u_tokens=u_tokens, epoch_candidates=epoch_candidates, n_bounds=n_bounds
            ),
        )
        for c in grid
    ]


def find_crossover(
    spec_a: LawSpec,
    spec_b: LawSpec,
    u_tokens: float,
    c_range: Tuple[float, float],
    scan_points: int = 64,
    rel_tol: float = 0.01,
    epoch_candidates: Tuple[float, ...] = DEFAULT_EPOCH_CANDIDATES,
) -> Optional[float]:
    """Smallest compute in c_range where spec_b's optimal loss <= spec_a's.

    The optimal-loss curves are piecewise smooth in C with kinks at epoch
    switches, so the search is a log-grid scan followed by bisection to
    `rel_tol` relative width.  Returns None if spec_b never catches up.
    """
    c_lo, c_hi = c_range
    if not (0 < c_lo < c_hi):
        raise ValueError("c_range must satisfy 0 < min < max")

    def gap(c: float) -> float:
        q = lambda s: solve_allocation(
            s, AllocationQuery(compute=c, u_tokens=u_tokens, epoch_candidates=epoch_candidates)
        ).predicted_loss
        return q(spec_b) - q(spec_a)

    grid = np.geomspace(c_lo, c_hi, scan_points)
    if gap(float(grid[0])) <= 0:
        return float(grid[0])
    for lo_c, hi_c in zip(grid, grid[1:]):
        if gap(float(hi_c)) <= 0:
            lo, hi = float(lo_c), float(hi_c)
            while hi / lo > 1.0 + rel_tol:
                mid = float(np.sqrt(lo * hi))
                if gap(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            return hi
    return None
