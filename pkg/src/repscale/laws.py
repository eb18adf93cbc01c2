"""Scaling-law functional forms for training under data repetition.

Implements the Chinchilla parametric loss L(N, D) = E + A/N^alpha + B/D^beta
and its repetition-aware extensions: the exponential-decay effective-data
form, the effective-parameter form, and the additive overfitting penalties
with one, two, and four free parameters.  All evaluators are pure and accept
scalars or numpy arrays.

Conventions: N counts total parameters (embeddings included), U is the
unique-token budget, epochs is the number of passes over it, and the
repetition count is epochs - 1.  Losses are nats of per-token validation
loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EvaluationError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class ChinchillaParams:
    """Constants of the base law L(N, D) = E + A/N^alpha + B/D^beta."""

    E: float
    A: float
    alpha: float
    B: float
    beta: float

    def __post_init__(self):
        if not all(np.isfinite([self.E, self.A, self.alpha, self.B, self.beta])):
            raise ValueError("all base-law parameters must be finite")
        if self.E < 0:
            raise ValueError(f"E must be >= 0, got {self.E}")
        if self.A <= 0 or self.B <= 0:
            raise ValueError("A and B must be > 0")
        if not (0 < self.alpha < 2) or not (0 < self.beta < 2):
            raise ValueError("alpha and beta must lie in (0, 2)")


@dataclass(frozen=True)
class RunPoint:
    """One training configuration: model size, unique tokens, epoch count."""

    n_params: float
    u_tokens: float
    epochs: float

    def __post_init__(self):
        if self.n_params < 1 or self.u_tokens < 1 or self.epochs < 1:
            raise ValueError(
                f"n_params, u_tokens and epochs must all be >= 1, got "
                f"({self.n_params}, {self.u_tokens}, {self.epochs})"
            )


def _require_finite(name: str, *values: float) -> None:
    if not all(np.isfinite(v) for v in values):
        raise ValueError(f"{name} parameters must be finite")


@dataclass(frozen=True)
class Chinchilla:
    """No repetition adjustment: repeated tokens count as fresh, D = U * epochs."""

    kind = "chinchilla"


@dataclass(frozen=True)
class ExpDecayData:
    """Effective-data form: repeated tokens decay exponentially in value."""

    r_star_d: float
    kind = "exp-decay"

    def __post_init__(self):
        _require_finite("exp-decay", self.r_star_d)
        if self.r_star_d <= 0:
            raise ValueError("r_star_d must be > 0")


@dataclass(frozen=True)
class EffectiveParam:
    """Effective-data plus effective-parameter saturation above N_opt."""

    r_star_d: float
    r_star_n: float
    kind = "eff-param"

    def __post_init__(self):
        _require_finite("eff-param", self.r_star_d, self.r_star_n)
        if self.r_star_d <= 0 or self.r_star_n <= 0:
            raise ValueError("r_star_d and r_star_n must be > 0")


@dataclass(frozen=True)
class AddPenalty1:
    """Additive overfitting penalty P * R * (N / U)."""

    p: float
    kind = "add1"

    def __post_init__(self):
        _require_finite("add1", self.p)
        if self.p < 0:
            raise ValueError("p must be >= 0")


@dataclass(frozen=True)
class AddPenalty2:
    """Additive penalty P * R * (N / U)^kappa."""

    p: float
    kappa: float
    kind = "add2"

    def __post_init__(self):
        _require_finite("add2", self.p, self.kappa)
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")


@dataclass(frozen=True)
class AddPenalty4:
    """Additive penalty P * R^delta * (N / U^gamma)^kappa."""

    p: float
    delta: float
    kappa: float
    gamma: float
    kind = "add4"

    def __post_init__(self):
        _require_finite("add4", self.p, self.delta, self.kappa, self.gamma)
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.delta <= 0 or self.kappa <= 0 or self.gamma <= 0:
            raise ValueError("delta, kappa and gamma must be > 0")


RepetitionLaw = Union[
    Chinchilla, ExpDecayData, EffectiveParam, AddPenalty1, AddPenalty2, AddPenalty4
]

LAW_KINDS = ("chinchilla", "exp-decay", "eff-param", "add1", "add2", "add4")


@dataclass(frozen=True)
class LawSpec:
    """A base Chinchilla law paired with a repetition extension."""

    base: ChinchillaParams
    rep: RepetitionLaw = Chinchilla()


def eval_chinchilla(params: ChinchillaParams, n: ArrayLike, d: ArrayLike) -> ArrayLike:
    """Evaluate E + A/n^alpha + B/d^beta.

    Raises EvaluationError on non-finite results (overflow from extreme
    exponent/argument combinations).
    """
    out = params.E + params.A / np.power(n, params.alpha) + params.B / np.power(d, params.beta)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite loss for params={params}")
    return out


def effective_data(u_tokens: ArrayLike, r_d: ArrayLike, r_star_d: float) -> ArrayLike:
    """Saturating effective token count U * (1 + R* * (1 - exp(-R/R*))).

    Monotone nondecreasing in r_d and bounded above by U * (1 + R*).
    """
    return u_tokens * (1.0 + r_star_d * (-np.expm1(-np.asarray(r_d, dtype=float) / r_star_d)))


def chinchilla_n_opt(base: ChinchillaParams, u_tokens: ArrayLike) -> ArrayLike:
    """Compute-optimal model size for a unique-token budget.

    Solves the stationarity condition alpha*A*N^-alpha = beta*B*D^-beta of
    the base law under the C = 6*N*D compute constraint, evaluated at
    D = u_tokens:

        N_opt = (alpha * A * U^beta / (beta * B)) ** (1 / alpha)
    """
    ratio = base.alpha * base.A * np.power(u_tokens, base.beta) / (base.beta * base.B)
    return np.power(ratio, 1.0 / base.alpha)


def effective_params(
    n: ArrayLike, u_tokens: ArrayLike, base: ChinchillaParams, r_star_n: float
) -> ArrayLike:
    """Saturating effective parameter count above the compute-optimal size.

    Below N_opt the model is not overparameterized and the count is N
    itself; above it, excess capacity decays with rate constant r_star_n.
    """
    n = np.asarray(n, dtype=float)
    n_opt = chinchilla_n_opt(base, u_tokens)
    u_n = np.minimum(n_opt, n)
    r_n = np.where(n > n_opt, n / u_n - 1.0, 0.0)
    return u_n * (1.0 + r_star_n * (-np.expm1(-r_n / r_star_n)))


def _penalty(rep: RepetitionLaw, n: ArrayLike, u: ArrayLike, r_d: ArrayLike) -> ArrayLike:
    """Additive overfitting term; exactly 0 at r_d = 0 (0^delta := 0)."""
    if isinstance(rep, AddPenalty1):
        return rep.p * r_d * (n / u)
    if isinstance(rep, AddPenalty2):
        return rep.p * r_d * np.power(n / u, rep.kappa)
    # AddPenalty4
    r_d = np.asarray(r_d, dtype=float)
    r_pow = np.where(r_d > 0, np.power(np.where(r_d > 0, r_d, 1.0), rep.delta), 0.0)
    return rep.p * r_pow * np.power(n / np.power(u, rep.gamma), rep.kappa)


def predict(spec: LawSpec, n: ArrayLike, u_tokens: ArrayLike, epochs: ArrayLike) -> ArrayLike:
    """Predicted loss for (possibly vectorized) run configurations."""
    n = np.asarray(n, dtype=float)
    u = np.asarray(u_tokens, dtype=float)
    epochs = np.asarray(epochs, dtype=float)
    r_d = epochs - 1.0
    rep = spec.rep

    if isinstance(rep, Chinchilla):
        out = eval_chinchilla(spec.base, n, u * epochs)
    elif isinstance(rep, ExpDecayData):
        out = eval_chinchilla(spec.base, n, effective_data(u, r_d, rep.r_star_d))
    elif isinstance(rep, EffectiveParam):
        n_hat = effective_params(n, u, spec.base, rep.r_star_n)
        d_hat = effective_data(u, r_d, rep.r_star_d)
        out = eval_chinchilla(spec.base, n_hat, d_hat)
    else:
        out = eval_chinchilla(spec.base, n, u * epochs) + _penalty(rep, n, u, r_d)

    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite loss under {rep.kind} law")
    return out if out.ndim else float(out)


def eval_law(spec: LawSpec, pt: RunPoint) -> float:
    """Predicted loss for a single run configuration."""
    return float(predict(spec, pt.n_params, pt.u_tokens, pt.epochs))


def train_flops(n: ArrayLike, u_tokens: ArrayLike, epochs: ArrayLike) -> ArrayLike:
    """Training compute approximation C = 6 * N * U * epochs."""
    return 6.0 * np.asarray(n, dtype=float) * u_tokens * epochs
