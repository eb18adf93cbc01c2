"""Robust two-phase fitting of scaling laws to run records.

Phase 1 fits the five base-law constants on single-epoch runs; Phase 2
fits only the repetition parameters with the base locked.  Both phases
minimize Huber loss of log-space residuals from a grid of starting points,
using bounded L-BFGS with central-difference gradients and a Nelder-Mead
fallback for starts whose line search fails.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (
    EvaluationError,
    IdentifiabilityError,
    InsufficientDataError,
    NoConvergedStartError,
)
from .laws import (
    AddPenalty1,
    AddPenalty2,
    AddPenalty4,
    ChinchillaParams,
    EffectiveParam,
    ExpDecayData,
    LawSpec,
    RunPoint,
    chinchilla_n_opt,
    eval_chinchilla,
    predict,
)

_BAD_OBJECTIVE = 1e10
_TIE_TOL = 1e-12
_LOG_SCALE_BOUND = (-45.0, 30.0)
_EXPONENT_BOUND = (1e-6, 4.0)
_BASE_EXPONENT_BOUND = (1e-6, 1.999999)


@dataclass(frozen=True)
class RunRecord:
    """A single training run: configuration, final validation loss, group tag.

    The group tag (e.g. a weight-decay setting) is metadata only and never
    enters any equation.
    """

    point: RunPoint
    loss: float
    group: str = ""

    def __post_init__(self):
        if not np.isfinite(self.loss) or self.loss <= 0:
            raise ValueError(f"loss must be positive and finite, got {self.loss}")


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings; init_grid entries override the default start grids."""

    huber_delta: float = 1e-3
    init_grid: dict = field(default_factory=dict)
    max_iterations: int = 500
    convergence_tol: float = 1e-12
    fd_rel_step: float = 1e-6

    def __post_init__(self):
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be > 0")


@dataclass(frozen=True)
class FitReport:
    spec: LawSpec
    objective: float
    metrics: dict
    n_total: int
    n_multi: int
    n_single: int
    starts_tried: int
    best_start_index: int
    converged: bool


DEFAULT_PHASE1_GRID = {
    "E": (1.0, 1.5, 2.0, 2.5),
    "A": (1e2, 1e3, 1e4),
    "alpha": (0.2, 0.35, 0.5),
    "B": (1e2, 1e3, 1e4),
    "beta": (0.2, 0.35, 0.5),
}

DEFAULT_PHASE2_GRID = {
    "p": tuple(np.logspace(-8, -1, 8)),
    "p_coarse": (1e-7, 1e-4),
    "kappa": (0.5, 1.0, 1.5, 2.0),
    "delta": (0.5, 1.0, 1.5, 2.0),
    "gamma": (0.5, 1.0, 1.5, 2.0),
    "r_star_d": (1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0),
    "r_star_n": (1.0, 1e2, 1e4, 1e6),
}


def _arrays(runs: Sequence[RunRecord]):
    n = np.array([r.point.n_params for r in runs], dtype=float)
    u = np.array([r.point.u_tokens for r in runs], dtype=float)
    ep = np.array([r.point.epochs for r in runs], dtype=float)
    loss = np.array([r.loss for r in runs], dtype=float)
    return n, u, ep, loss


def huber(residuals: np.ndarray, delta: float) -> np.ndarray:
    """Elementwise Huber value: quadratic inside |r| <= delta, linear outside."""
    abs_r = np.abs(residuals)
    return np.where(abs_r <= delta, 0.5 * residuals**2, delta * (abs_r - 0.5 * delta))


def huber_log_objective(spec: LawSpec, runs: Sequence[RunRecord], delta: float = 1e-3) -> float:
    """Mean Huber loss of log(predicted) - log(observed) over the runs."""
    n, u, ep, loss = _arrays(runs)
    pred = np.asarray(predict(spec, n, u, ep))
    if not np.all(np.isfinite(pred)) or np.any(pred <= 0):
        raise EvaluationError("law predicts non-positive or non-finite loss")
    return float(np.mean(huber(np.log(pred) - np.log(loss), delta)))


def compute_metrics(spec: LawSpec, runs: Sequence[RunRecord], huber_delta: float = 1e-3) -> dict:
    """R^2 on all / multi-epoch / single-epoch subsets plus the Huber objective.

    R^2 uses raw (not log) losses with SS_tot about the subset mean; a
    subset that is empty or has zero variance yields None, never NaN.
    """
    if not runs:
        raise ValueError("runs must be nonempty")
    n, u, ep, loss = _arrays(runs)
    pred = np.asarray(predict(spec, n, u, ep))

    def r2(mask):
        if not np.any(mask):
            return None
        ss_tot = float(np.sum((loss[mask] - np.mean(loss[mask])) ** 2))
        if ss_tot == 0.0:
            return None
        ss_res = float(np.sum((loss[mask] - pred[mask]) ** 2))
        return 1.0 - ss_res / ss_tot

    return {
        "r2_all": r2(np.ones_like(ep, dtype=bool)),
        "r2_multi": r2(ep > 1),
        "r2_single": r2(ep == 1),
        "huber": huber_log_objective(spec, runs, huber_delta),
    }


def _central_diff_grad(f: Callable, x: np.ndarray, rel_step: float) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def _multi_start(objective, starts, bounds, cfg: FitConfig):
    """Optimize from every start; return (fun, index, x, converged, tried).

    Ties within _TIE_TOL are broken toward the lowest start index.
    """
    jac = lambda x: _central_diff_grad(objective, x, cfg.fd_rel_step)
    best = None
    tried = 0
    for idx, x0 in enumerate(starts):
        tried += 1
        res = None
        try:
            res = minimize(
                objective,
                np.asarray(x0, dtype=float),
                jac=jac,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": cfg.max_iterations, "ftol": 1e-15, "gtol": cfg.convergence_tol},
            )
        except (FloatingPointError, ValueError):
            res = None
        if res is None or not np.isfinite(res.fun) or res.fun >= _BAD_OBJECTIVE:
            try:
                res = minimize(
                    objective,
                    np.asarray(x0, dtype=float),
                    method="Nelder-Mead",
                    options={"maxiter": 10 * cfg.max_iterations, "fatol": 1e-14, "xatol": 1e-10},
                )
            except (FloatingPointError, ValueError):
                continue
        if not np.isfinite(res.fun) or res.fun >= _BAD_OBJECTIVE:
            continue
        x = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds]) if bounds else res.x
        if best is None or res.fun < best[0] - _TIE_TOL:
            best = (float(res.fun), idx, x, bool(res.success))
    if best is None:
        raise NoConvergedStartError(f"none of {tried} starts produced a finite objective")
    return best + (tried,)


def _grid_starts(cfg: FitConfig, names: Sequence[str], defaults: dict, log_names: set):
    axes = []
    for name in names:
        values = cfg.init_grid.get(name, defaults[name])
        if len(values) == 0:
            raise ValueError(f"init grid for {name!r} is empty")
        axes.append([np.log(v) if name in log_names else float(v) for v in values])
    return list(itertools.product(*axes))


def fit_phase1(runs: Sequence[RunRecord], cfg: Optional[FitConfig] = None) -> FitReport:
    """Fit the five base-law constants on single-epoch runs.

    Scale parameters (E, A, B) are optimized in log-space; the exponents
    carry box bounds.  Raises InsufficientDataError with fewer than six
    records and ValueError if any record is multi-epoch.
    """
    cfg = cfg or FitConfig()
    if any(r.point.epochs != 1 for r in runs):
        raise ValueError("phase 1 accepts single-epoch records only")
    if len(runs) < 6:
        raise InsufficientDataError(f"phase 1 needs >= 6 single-epoch records, got {len(runs)}")

    n, u, ep, loss = _arrays(runs)
    d = u * ep
    log_loss = np.log(loss)
    delta = cfg.huber_delta

    def objective(theta):
        e_, a_, b_ = np.exp(theta[0]), np.exp(theta[1]), np.exp(theta[3])
        alpha, beta = theta[2], theta[4]
        with np.errstate(over="ignore", invalid="ignore"):
            pred = e_ + a_ / n**alpha + b_ / d**beta
        if not np.all(np.isfinite(pred)) or np.any(pred <= 0):
            return _BAD_OBJECTIVE
        return float(np.mean(huber(np.log(pred) - log_loss, delta)))

    starts = _grid_starts(cfg, ("E", "A", "alpha", "B", "beta"), DEFAULT_PHASE1_GRID, {"E", "A", "B"})
    bounds = [
        _LOG_SCALE_BOUND,
        _LOG_SCALE_BOUND,
        _BASE_EXPONENT_BOUND,
        _LOG_SCALE_BOUND,
        _BASE_EXPONENT_BOUND,
    ]
    fun, idx, x, converged, tried = _multi_start(objective, starts, bounds, cfg)
    params = ChinchillaParams(
        E=float(np.exp(x[0])), A=float(np.exp(x[1])), alpha=float(x[2]),
        B=float(np.exp(x[3])), beta=float(x[4]),
    )
    spec = LawSpec(base=params)
    return FitReport(
        spec=spec,
        objective=fun,
        metrics=compute_metrics(spec, runs, delta),
        n_total=len(runs),
        n_multi=0,
        n_single=len(runs),
        starts_tried=tried,
        best_start_index=idx,
        converged=converged,
    )


def _phase2_setup(variant: str, base: ChinchillaParams, n, u, ep):
    """Per-variant free-parameter layout and a fast raw predictor.

    Quantities that do not depend on the free parameters (the fresh-data
    baseline prediction, N_opt and the overparameterization ratio) are
    precomputed once per fit.
    """
    r_d = ep - 1.0

    if variant in ("add1", "add2", "add4"):
        base_pred = np.asarray(eval_chinchilla(base, n, u * ep))
        if variant == "add1":
            names, log_names = ("p",), {"p"}
            bounds = [_LOG_SCALE_BOUND]
            grid_keys = {"p": "p"}
            pred = lambda t: base_pred + np.exp(t[0]) * r_d * (n / u)
        elif variant == "add2":
            names, log_names = ("p", "kappa"), {"p"}
            bounds = [_LOG_SCALE_BOUND, _EXPONENT_BOUND]
            grid_keys = {"p": "p_coarse5", "kappa": "kappa"}
            pred = lambda t: base_pred + np.exp(t[0]) * r_d * (n / u) ** t[1]
        else:
            names, log_names = ("p", "delta", "kappa", "gamma"), {"p"}
            bounds = [_LOG_SCALE_BOUND] + [_EXPONENT_BOUND] * 3
            grid_keys = {"p": "p_coarse", "delta": "delta", "kappa": "kappa", "gamma": "gamma"}
            safe_r = np.where(r_d > 0, r_d, 1.0)

            def pred(t):
                r_pow = np.where(r_d > 0, safe_r ** t[1], 0.0)
                return base_pred + np.exp(t[0]) * r_pow * (n / u ** t[3]) ** t[2]

        return names, log_names, bounds, grid_keys, pred

    if variant == "exp-decay":
        names, log_names = ("r_star_d",), {"r_star_d"}
        bounds = [(-10.0, 25.0)]
        grid_keys = {"r_star_d": "r_star_d"}

        def pred(t):
            rsd = np.exp(t[0])
            d_hat = u * (1.0 + rsd * (-np.expm1(-r_d / rsd)))
            return eval_chinchilla(base, n, d_hat)

        return names, log_names, bounds, grid_keys, pred

    if variant == "eff-param":
        n_opt = np.asarray(chinchilla_n_opt(base, u))
        u_n = np.minimum(n_opt, n)
        r_n = np.where(n > n_opt, n / u_n - 1.0, 0.0)
        names, log_names = ("r_star_d", "r_star_n"), {"r_star_d", "r_star_n"}
        bounds = [(-10.0, 25.0), (-10.0, 25.0)]
        grid_keys = {"r_star_d": "r_star_d", "r_star_n": "r_star_n"}

        def pred(t):
            rsd, rsn = np.exp(t[0]), np.exp(t[1])
            d_hat = u * (1.0 + rsd * (-np.expm1(-r_d / rsd)))
            n_hat = u_n * (1.0 + rsn * (-np.expm1(-r_n / rsn)))
            return base.E + base.A / n_hat**base.alpha + base.B / d_hat**base.beta

        return names, log_names, bounds, grid_keys, pred

    raise ValueError(f"unknown law variant {variant!r}")


def _phase2_law(variant: str, x: np.ndarray):
    if variant == "add1":
        return AddPenalty1(p=float(np.exp(x[0])))
    if variant == "add2":
        return AddPenalty2(p=float(np.exp(x[0])), kappa=float(x[1]))
    if variant == "add4":
        return AddPenalty4(
            p=float(np.exp(x[0])), delta=float(x[1]), kappa=float(x[2]), gamma=float(x[3])
        )
    if variant == "exp-decay":
        return ExpDecayData(r_star_d=float(np.exp(x[0])))
    return EffectiveParam(r_star_d=float(np.exp(x[0])), r_star_n=float(np.exp(x[1])))


# Extra per-variant grid aliases; "p_coarse5" keeps the 2-parameter start
# count modest while still spanning the plausible penalty magnitudes.
_PHASE2_GRID_EXTRA = {"p_coarse5": tuple(np.logspace(-8, -1, 5))}


def fit_phase2(
    base: ChinchillaParams,
    variant: str,
    runs: Sequence[RunRecord],
    cfg: Optional[FitConfig] = None,
) -> FitReport:
    """Fit the repetition parameters of `variant` with the base law locked.

    Raises IdentifiabilityError when the data contains no multi-epoch runs
    (the repetition terms then vanish on every record).
    """
    cfg = cfg or FitConfig()
    if not runs:
        raise InsufficientDataError("phase 2 needs at least one record")
    n, u, ep, loss = _arrays(runs)

    if variant == "chinchilla":
        spec = LawSpec(base=base)
        return FitReport(
            spec=spec,
            objective=huber_log_objective(spec, runs, cfg.huber_delta),
            metrics=compute_metrics(spec, runs, cfg.huber_delta),
            n_total=len(runs),
            n_multi=int(np.sum(ep > 1)),
            n_single=int(np.sum(ep == 1)),
            starts_tried=0,
            best_start_index=0,
            converged=True,
        )

    if not np.any(ep > 1):
        raise IdentifiabilityError(
            f"{variant} repetition parameters are unidentifiable from single-epoch data"
        )

    names, log_names, bounds, grid_keys, pred_fn = _phase2_setup(variant, base, n, u, ep)
    if len(runs) < len(names) + 1:
        raise InsufficientDataError(
            f"phase 2 for {variant} needs >= {len(names) + 1} records, got {len(runs)}"
        )

    log_loss = np.log(loss)
    delta = cfg.huber_delta

    def objective(theta):
        with np.errstate(over="ignore", invalid="ignore"):
            pred = pred_fn(theta)
        if not np.all(np.isfinite(pred)) or np.any(pred <= 0):
            return _BAD_OBJECTIVE
        return float(np.mean(huber(np.log(pred) - log_loss, delta)))

    defaults = {**DEFAULT_PHASE2_GRID, **_PHASE2_GRID_EXTRA}
    grid_defaults = {name: defaults[grid_keys[name]] for name in names}
    starts = _grid_starts(cfg, names, grid_defaults, log_names)
    fun, idx, x, converged, tried = _multi_start(objective, starts, bounds, cfg)

    spec = LawSpec(base=base, rep=_phase2_law(variant, x))
    return FitReport(
        spec=spec,
        objective=fun,
        metrics=compute_metrics(spec, runs, delta),
        n_total=len(runs),
        n_multi=int(np.sum(ep > 1)),
        n_single=int(np.sum(ep == 1)),
        starts_tried=tried,
        best_start_index=idx,
        converged=converged,
    )
