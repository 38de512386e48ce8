"""Farr's ratio-of-ratios K, its uncertainty, pooling and wave alarms.

K for the tetrad starting at generation t is

    K = (I[t+3] / I[t+2]) / (I[t+1] / I[t])

Read as an odds ratio, ``var(log K)`` is approximately the sum of reciprocal
counts, which gives Wald-type confidence limits on the log scale. On an IDEA
curve K equals ``(1 + d)**-4`` for every tetrad, whatever r0 is.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Literal, Sequence

import numpy as np

from .errors import DomainError, EstimationError, ValidationError
from .idea import IdeaParams, idea_curve
from .timeseries import GenerationSeries

PoolMethod = Literal["geometric_mean", "inverse_variance"]


@dataclass(frozen=True)
class FarrEstimate:
    t_start: int
    valid: bool
    k: float | None = None
    log_k_variance: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None

    @property
    def d(self) -> float | None:
        return k_to_d(self.k) if self.valid else None

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "k": self.k,
            "log_k_variance": self.log_k_variance,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "valid": self.valid,
        }


@dataclass(frozen=True)
class PooledK:
    method: str
    k_pooled: float
    n_estimates: int

    @property
    def d_equivalent(self) -> float:
        return k_to_d(self.k_pooled)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k_pooled": self.k_pooled,
            "n_estimates": self.n_estimates,
            "d_equivalent": self.d_equivalent,
        }


def z_quantile(confidence_level: float) -> float:
    """Two-sided standard normal critical value, e.g. 1.959964 for 0.95."""
    if not 0 < confidence_level < 1:
        raise DomainError(f"confidence level must lie in (0, 1), got {confidence_level}")
    return NormalDist().inv_cdf(0.5 + confidence_level / 2)


def k_to_d(k: float) -> float:
    if not k > 0:
        raise DomainError(f"K must be positive, got {k}")
    return k ** -0.25 - 1


def d_to_k(d: float) -> float:
    if not d > -1:
        raise DomainError(f"d must exceed -1, got {d}")
    return (1 + d) ** -4


def tetrad_estimate(window: Sequence[float], t_start: int, z: float) -> FarrEstimate:
    i0, i1, i2, i3 = (float(x) for x in window)
    if min(i0, i1, i2, i3) <= 0:
        return FarrEstimate(t_start, valid=False)
    k = (i3 / i2) / (i1 / i0)
    var = 1 / i0 + 1 / i1 + 1 / i2 + 1 / i3
    half = z * math.sqrt(var)
    log_k = math.log(k)
    return FarrEstimate(t_start, True, k, var, _exp(log_k - half), _exp(log_k + half))


def _exp(x: float) -> float:
    # counts far below 1 give huge variances; saturate instead of raising
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def compute_k_series(series: GenerationSeries,
                     confidence_level: float = 0.95) -> list[FarrEstimate]:
    """One estimate per stride-1 window of four generations.

    Windows holding any non-positive incidence are returned with
    ``valid=False`` and no K.
    """
    if len(series) < 4:
        raise ValidationError(f"need at least 4 generations for a tetrad, got {len(series)}")
    z = z_quantile(confidence_level)
    v = series.values
    gens = series.generations
    return [tetrad_estimate(v[j:j + 4], int(gens[j]), z) for j in range(len(v) - 3)]


def pool_k(estimates: Sequence[FarrEstimate], method: PoolMethod = "geometric_mean") -> PooledK:
    """Summary K over the valid estimates.

    ``geometric_mean`` averages log K with equal weight. ``inverse_variance``
    is the fixed-effect pool on the log scale, weighting each log K by the
    reciprocal of its variance.
    """
    valid = [e for e in estimates if e.valid]
    if not valid:
        raise EstimationError("no valid K estimates to pool")
    logs = np.array([math.log(e.k) for e in valid])
    if method == "geometric_mean":
        pooled = math.exp(math.fsum(logs) / logs.size)
    elif method == "inverse_variance":
        w = np.array([1 / e.log_k_variance for e in valid])
        pooled = math.exp(math.fsum(w * logs) / math.fsum(w))
    else:
        raise ValidationError(f"unknown pooling method {method!r}")
    return PooledK(method, pooled, len(valid))


def detect_waves(estimates: Sequence[FarrEstimate], threshold: float = 1.0,
                 min_run: int = 1) -> list[tuple[int, float]]:
    """Alarm at the first tetrad of each run of ``min_run`` or more valid K above threshold.

    Invalid tetrads break a run.
    """
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    if min_run < 1:
        raise DomainError("min_run must be >= 1")
    alarms = []
    run: list[FarrEstimate] = []
    for est in list(estimates) + [None]:
        if est is not None and est.valid and est.k > threshold:
            run.append(est)
            continue
        if len(run) >= min_run:
            alarms.append((run[0].t_start, run[0].k))
        run = []
    return alarms


def _coverage_chunk(args) -> int:
    expected, true_k, z, base_seed, start, stop = args
    hits = 0
    for rep in range(start, stop):
        rng = np.random.default_rng([base_seed, rep])
        est = tetrad_estimate(rng.poisson(expected), 0, z)
        if est.valid and est.ci_low <= true_k <= est.ci_high:
            hits += 1
    return hits


def ci_coverage(params: IdeaParams, t_start: int = 1, scale: float = 1.0,
                confidence_level: float = 0.95, n_replicates: int = 10_000,
                seed: int = 0, workers: int | None = None) -> float:
    """Monte-Carlo coverage of the K confidence interval under Poisson counts.

    Each replicate draws Poisson counts with means ``scale * I(t)`` for the
    four generations starting at ``t_start`` and checks whether the interval
    contains ``(1 + d)**-4``. Replicate ``i`` uses the generator seeded by
    ``(seed, i)``, so the result does not depend on ``workers``.
    """
    expected = scale * idea_curve(params, np.arange(t_start, t_start + 4))
    true_k = d_to_k(params.d)
    z = z_quantile(confidence_level)
    if workers is None or workers <= 1:
        hits = _coverage_chunk((expected, true_k, z, seed, 0, n_replicates))
    else:
        bounds = np.linspace(0, n_replicates, workers + 1).astype(int)
        jobs = [(expected, true_k, z, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(_coverage_chunk, jobs))
    return hits / n_replicates
