"""Incidence Decay with Exponential Adjustment (IDEA) model.

Incidence in generation ``t`` is ``(r0 / (1 + d)**t)**t``. Taking logs gives
``log I = b*t - a*t**2`` with ``a = log(1 + d)`` and ``b = log(r0)``, which is
Brownlee's Gaussian curve with zero constant term. Fitting exploits this: the
log-space problem is an ordinary linear least-squares problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, FitError, ValidationError
from .timeseries import GenerationSeries

BROWNLEE_C_TOL = 1e-12
REFINE_RTOL = 1e-10
REFINE_MAXITER = 500


@dataclass(frozen=True)
class IdeaParams:
    r0: float
    d: float

    def __post_init__(self):
        if not (math.isfinite(self.r0) and self.r0 > 0):
            raise DomainError(f"r0 must be positive, got {self.r0}")
        if not (math.isfinite(self.d) and self.d > -1):
            raise DomainError(f"d must exceed -1, got {self.d}")

    @property
    def accelerating(self) -> bool:
        """True when d < 0, i.e. transmission grows rather than decays."""
        return self.d < 0


@dataclass(frozen=True)
class BrownleeParams:
    """Coefficients of ``exp(-a*t**2 + b*t + c)``."""

    a: float
    b: float
    c: float = 0.0


def idea_log_incidence(params: IdeaParams, t):
    t = np.asarray(t, dtype=float)
    return t * math.log(params.r0) - t * t * math.log1p(params.d)


def idea_incidence(params: IdeaParams, t: int) -> float:
    if t < 1:
        raise DomainError(f"generation t must be >= 1, got {t}")
    log_i = t * math.log(params.r0) - t * t * math.log1p(params.d)
    try:
        return math.exp(log_i)
    except OverflowError:
        return math.inf


def idea_curve(params: IdeaParams, t) -> np.ndarray:
    """Vectorised ``idea_incidence`` over an array of generations (all >= 1)."""
    t = np.asarray(t)
    if np.any(t < 1):
        raise DomainError("generation t must be >= 1")
    with np.errstate(over="ignore"):
        return np.exp(idea_log_incidence(params, t))


def to_brownlee(params: IdeaParams) -> BrownleeParams:
    return BrownleeParams(a=math.log1p(params.d), b=math.log(params.r0), c=0.0)


def from_brownlee(bp: BrownleeParams) -> IdeaParams:
    if abs(bp.c) > BROWNLEE_C_TOL:
        raise DomainError(f"Brownlee curve with c={bp.c} has no IDEA counterpart")
    return IdeaParams(r0=math.exp(bp.b), d=math.expm1(bp.a))


def peak_time(params: IdeaParams) -> float:
    """Continuous maximiser ``log r0 / (2 log(1+d))``; infinite when d <= 0."""
    a = math.log1p(params.d)
    if a <= 0:
        return math.inf
    return math.log(params.r0) / (2 * a)


def project(params: IdeaParams, from_t: int, horizon: int,
            generation_interval_days: float = 1.0) -> GenerationSeries:
    """Model incidence for generations ``from_t + 1 .. from_t + horizon``."""
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    if from_t < 0:
        raise DomainError("from_t must be >= 0")
    t = np.arange(from_t + 1, from_t + horizon + 1)
    return GenerationSeries(idea_curve(params, t), generation_interval_days, from_t + 1)


@dataclass(frozen=True)
class IdeaFit:
    params: IdeaParams
    method: str
    target: str
    sse: float
    n_used: int
    excluded_generations: tuple[int, ...] = field(default_factory=tuple)
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "r0": self.params.r0,
            "d": self.params.d,
            "method": self.method,
            "sse": self.sse,
            "n_used": self.n_used,
            "excluded_generations": list(self.excluded_generations),
        }


def _target_sse(coef: np.ndarray, t: np.ndarray, observed: np.ndarray,
                cumulative: bool) -> float:
    b, a = coef
    with np.errstate(over="ignore", invalid="ignore"):
        model = np.exp(b * t - a * t * t)
        if cumulative:
            resid = np.cumsum(model) - np.cumsum(observed)
        else:
            resid = model - observed
        return float(np.sum(resid * resid))


def fit_idea(series: GenerationSeries,
             target: Literal["incidence", "cumulative"] = "incidence",
             method: Literal["log_linear", "nonlinear_refine"] = "log_linear") -> IdeaFit:
    """Fit (r0, d) to a generation series.

    The first element of ``series`` is taken as model generation t = 1.

    ``log_linear`` regresses ``log I(t)`` on ``(t, -t**2)`` without intercept,
    using only strictly positive generations. ``nonlinear_refine`` starts
    there and runs Nelder-Mead on the sum of squared errors on the target
    scale (incidence, or running sums for ``cumulative``) over all
    generations. The reported ``sse`` is always on the target scale.
    """
    if target not in ("incidence", "cumulative"):
        raise ValidationError(f"unknown fit target {target!r}")
    if method not in ("log_linear", "nonlinear_refine"):
        raise ValidationError(f"unknown fit method {method!r}")

    t = series.model_times.astype(float)
    y = series.values
    positive = y > 0
    excluded = tuple(int(g) for g in series.generations[~positive])
    if positive.sum() < 2:
        raise FitError(f"need at least 2 generations with positive incidence, got {int(positive.sum())}")

    tp = t[positive]
    design = np.column_stack([tp, -tp * tp])
    coef, *_ = np.linalg.lstsq(design, np.log(y[positive]), rcond=None)
    if not np.all(np.isfinite(coef)):
        raise FitError("log-linear solution is not finite")

    cumulative = target == "cumulative"
    iterations = 0
    if method == "nonlinear_refine":
        f0 = _target_sse(coef, t, y, cumulative)
        if not math.isfinite(f0):
            raise FitError("objective is not finite at the log-linear start")
        if f0 > 0:
            res = minimize(_target_sse, coef, args=(t, y, cumulative), method="Nelder-Mead",
                           options={"maxiter": REFINE_MAXITER, "fatol": REFINE_RTOL * f0,
                                    "xatol": 1e-12})
            if not (np.all(np.isfinite(res.x)) and math.isfinite(res.fun)):
                raise FitError("refinement produced a non-finite objective")
            if res.fun <= f0:
                coef = res.x
            iterations = int(res.nit)
        excluded = ()

    b, a = float(coef[0]), float(coef[1])
    try:
        params = IdeaParams(r0=math.exp(b), d=math.expm1(a))
    except (DomainError, OverflowError):
        raise FitError(f"fitted coefficients (b={b}, a={a}) fall outside the model domain") from None
    sse = _target_sse(np.array([b, a]), t, y, cumulative)
    if not math.isfinite(sse):
        raise FitError("objective is not finite at the fitted parameters")
    n_used = int(y.size if method == "nonlinear_refine" else positive.sum())
    return IdeaFit(params, method, target, sse, n_used, excluded, iterations)
