"""Residual power-law analysis, bootstrap uncertainty, base-law comparison.

The residual workflow isolates the excess loss attributable to repetition:
subtract the base-law prediction (repeated tokens counted as fresh) from
each multi-epoch observation, group by (model size, unique budget) cell,
and fit a power law in repetition count with the exponent tied across
cells.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import BootstrapError, InsufficientResidualsError
from .fit import FitConfig, RunRecord, compute_metrics, fit_phase1, fit_phase2, huber
from .laws import ChinchillaParams, LawSpec, eval_chinchilla


@dataclass(frozen=True)
class ResidualCell:
    """Excess-loss observations for one (model size, unique budget) cell."""

    n_params: float
    u_tokens: float
    residuals: tuple  # of (r_d, excess_loss) pairs, r_d >= 1


@dataclass(frozen=True)
class SharedPowerFit:
    """Per-cell coefficients with a single exponent tied across cells."""

    delta: float
    p_per_cell: dict
    n_excluded: int
    objective: float


@dataclass(frozen=True)
class BootstrapReport:
    resamples: int
    point_estimate: dict
    mad: dict
    n_failed: int
    seed: int


def compute_residuals(base: ChinchillaParams, runs: Sequence[RunRecord]) -> list:
    """Excess loss over the fresh-data base prediction, per multi-epoch run.

    Negative residuals are retained; single-epoch runs contribute nothing.
    """
    cells = {}
    for rec in runs:
        ep = rec.point.epochs
        if ep <= 1:
            continue
        pred = float(eval_chinchilla(base, rec.point.n_params, rec.point.u_tokens * ep))
        key = (rec.point.n_params, rec.point.u_tokens)
        cells.setdefault(key, []).append((ep - 1.0, rec.loss - pred))
    return [
        ResidualCell(n_params=k[0], u_tokens=k[1], residuals=tuple(v))
        for k, v in sorted(cells.items())
    ]


def fit_shared_power(cells: Sequence[ResidualCell], huber_delta: float = 1e-3) -> SharedPowerFit:
    """Fit excess = P_i * R^delta jointly over cells, delta tied, in log-space.

    Nonpositive residuals cannot enter a log fit; they are excluded and
    counted.  Raises InsufficientResidualsError unless at least two cells
    retain two or more positive points.
    """
    log_r, log_e, cell_idx, keys = [], [], [], []
    n_excluded = 0
    for cell in cells:
        pos = [(r, e) for r, e in cell.residuals if e > 0]
        n_excluded += len(cell.residuals) - len(pos)
        if len(pos) < 2:
            n_excluded += len(pos)
            continue
        idx = len(keys)
        keys.append((cell.n_params, cell.u_tokens))
        for r, e in pos:
            log_r.append(np.log(r))
            log_e.append(np.log(e))
            cell_idx.append(idx)
    if len(keys) < 2:
        raise InsufficientResidualsError(
            f"need >= 2 cells with >= 2 positive residuals, got {len(keys)}"
        )
    log_r = np.array(log_r)
    log_e = np.array(log_e)
    cell_idx = np.array(cell_idx)
    k = len(keys)

    def objective(theta):
        delta = theta[0]
        pred = theta[1 + cell_idx] + delta * log_r
        return float(np.mean(huber(log_e - pred, huber_delta)))

    best = None
    for delta0 in (0.5, 1.0, 1.5, 2.0):
        x0 = np.empty(1 + k)
        x0[0] = delta0
        for i in range(k):
            mask = cell_idx == i
            x0[1 + i] = np.mean(log_e[mask] - delta0 * log_r[mask])
        res = minimize(
            objective,
            x0,
            method="L-BFGS-B",
            bounds=[(1e-6, 4.0)] + [(None, None)] * k,
            options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12},
        )
        if best is None or res.fun < best.fun - 1e-12:
            best = res
    return SharedPowerFit(
        delta=float(best.x[0]),
        p_per_cell={keys[i]: float(np.exp(best.x[1 + i])) for i in range(k)},
        n_excluded=n_excluded,
        objective=float(best.fun),
    )


def bootstrap_fit(
    runs: Sequence[RunRecord],
    fit_procedure: Callable[[Sequence[RunRecord]], dict],
    resamples: int,
    seed: int,
) -> BootstrapReport:
    """Resample run records with replacement and refit.

    `fit_procedure` maps a list of records to a flat dict of fitted
    parameter values.  The point estimate comes from the full data; spread
    is the unscaled median absolute deviation across resample fits.  Each
    resample draws from its own seed stream, so execution order cannot
    change the result.  Fails only if more than half the resamples fail.
    """
    if resamples < 2:
        raise ValueError("resamples must be >= 2")
    point = fit_procedure(list(runs))
    children = np.random.SeedSequence(seed).spawn(resamples)
    estimates = []
    n_failed = 0
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, len(runs), size=len(runs))
        try:
            estimates.append(fit_procedure([runs[i] for i in idx]))
        except Exception:
            n_failed += 1
    if n_failed > resamples // 2:
        raise BootstrapError(f"{n_failed}/{resamples} bootstrap resamples failed to fit")
    mad = {}
    for name in point:
        vals = np.array([est[name] for est in estimates])
        mad[name] = float(np.median(np.abs(vals - np.median(vals))))
    return BootstrapReport(
        resamples=resamples, point_estimate=point, mad=mad, n_failed=n_failed, seed=seed
    )


def penalty_reduction(p_a: float, p_b: float) -> float:
    """Fractional reduction of the overfitting coefficient from p_a to p_b."""
    return (p_a - p_b) / p_a


def _comparison_row(condition: str, spec: LawSpec, runs: Sequence[RunRecord]) -> dict:
    row = {"condition": condition}
    row.update(compute_metrics(spec, runs))
    row.update({f"param_{k}": v for k, v in dataclasses.asdict(spec.rep).items()})
    return row


def compare_bases(
    published: ChinchillaParams,
    runs: Sequence[RunRecord],
    variant: str = "eff-param",
    cfg: Optional[FitConfig] = None,
) -> list:
    """Metrics for a published base law versus one refit on the data.

    Emits four rows: each base alone and with `variant` repetition
    parameters fitted on top of it, so the marginal value of the
    repetition mechanism under each base is visible (including the fitted
    rate constants, e.g. an effectively-infinite r_star_n).
    """
    cfg = cfg or FitConfig()
    single = [r for r in runs if r.point.epochs == 1]
    refit = fit_phase1(single, cfg).spec.base

    rows = [_comparison_row("published-base", LawSpec(base=published), runs)]
    pub_ext = fit_phase2(published, variant, runs, cfg)
    rows.append(_comparison_row(f"published-base+{variant}", pub_ext.spec, runs))
    rows.append(_comparison_row("refit-base", LawSpec(base=refit), runs))
    refit_ext = fit_phase2(refit, variant, runs, cfg)
    rows.append(_comparison_row(f"refit-base+{variant}", refit_ext.spec, runs))
    return rows
