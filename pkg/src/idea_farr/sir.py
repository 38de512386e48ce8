"""Damped SIR difference equations on the generation time scale.

    R_e(t)   = r0 * (S_t / N) * rho**t
    I_{t+1}  = R_e(t) * I_t
    S_{t+1}  = S_t - I_{t+1}

When depletion of susceptibles is negligible the incidence reduces to
``i0 * r0**t * rho**(t(t-1)/2)``, which is an IDEA curve with
``r0_idea = r0 / sqrt(rho)`` and ``d = 1/sqrt(rho) - 1``. The exponent
``t(t-1)/2`` follows from the product over generations ``0 .. t-1``; the
``t(t+1)/2`` variant sometimes quoted for this closed form does not match the
recursion and is not used here.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .idea import IdeaParams, idea_curve

DEFAULT_POPULATION = 1e8


@dataclass(frozen=True)
class SirParams:
    r0_sir: float
    rho: float
    population: float = DEFAULT_POPULATION
    i0: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.r0_sir) and self.r0_sir > 0):
            raise DomainError(f"r0_sir must be positive, got {self.r0_sir}")
        _check_rho(self.rho)
        if not (math.isfinite(self.population) and self.population > 0):
            raise DomainError(f"population must be positive, got {self.population}")
        if not (self.i0 > 0 and self.i0 <= self.population):
            raise DomainError(f"i0 must lie in (0, population], got {self.i0}")


def _check_rho(rho: float) -> None:
    if not (0 < rho <= 1):
        raise DomainError(f"rho must lie in (0, 1], got {rho}")


@dataclass(frozen=True, eq=False)
class SirTrajectory:
    """Series indexed by generation 0..n.

    ``effective_r[t]`` is the reproduction number acting on ``incidence[t]``.
    ``exhausted_at`` is the first generation with no susceptibles left, and
    ``clamped`` records whether reaching it required truncating the step.
    """

    incidence: np.ndarray
    susceptibles: np.ndarray
    effective_r: np.ndarray
    params: SirParams
    exhausted_at: int | None = None
    clamped: bool = False

    @property
    def n_generations(self) -> int:
        return self.incidence.size - 1

    @property
    def attack_fraction(self) -> float:
        return (self.params.population - float(self.susceptibles[-1])) / self.params.population


def simulate_damped_sir(params: SirParams, n_generations: int) -> SirTrajectory:
    if n_generations < 1:
        raise DomainError("n_generations must be >= 1")
    n = int(n_generations)
    big_n = float(params.population)
    inc = np.zeros(n + 1)
    sus = np.zeros(n + 1)
    reff = np.zeros(n + 1)
    inc[0] = params.i0
    sus[0] = big_n - params.i0
    exhausted_at = 0 if sus[0] <= 0 else None
    clamped = False

    for t in range(n):
        reff[t] = params.r0_sir * (sus[t] / big_n) * params.rho ** t
        new = reff[t] * inc[t]
        if new >= sus[t]:
            # the step would overdraw S; infect whoever is left and stop
            clamped = new > sus[t]
            inc[t + 1] = sus[t]
            sus[t + 1] = 0.0
            if exhausted_at is None:
                exhausted_at = t + 1
            break
        inc[t + 1] = new
        sus[t + 1] = sus[t] - new

    for arr in (inc, sus, reff):
        arr.setflags(write=False)
    return SirTrajectory(inc, sus, reff, params, exhausted_at, clamped)


def closed_form_small_outbreak(params: SirParams, t: int) -> float:
    """``i0 * r0**t * rho**(t(t-1)/2)``: incidence with depletion ignored."""
    if t < 0:
        raise DomainError("t must be >= 0")
    log_i = (math.log(params.i0) + t * math.log(params.r0_sir)
             + 0.5 * t * (t - 1) * math.log(params.rho))
    try:
        return math.exp(log_i)
    except OverflowError:
        return math.inf


def map_sir_to_idea(params: SirParams) -> IdeaParams:
    _check_rho(params.rho)
    root = math.sqrt(params.rho)
    return IdeaParams(r0=params.r0_sir / root, d=1 / root - 1)


def map_rho_to_k(rho: float) -> float:
    _check_rho(rho)
    return rho * rho


def trajectory_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance between two incidence series of equal length."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"series lengths differ: {a.shape} vs {b.shape}")
    if a.size < 1:
        raise ValidationError("series must be non-empty")
    diff = a - b
    return float(np.sqrt(np.sum(diff * diff)))


@dataclass(frozen=True, eq=False)
class Comparison:
    """SIR and mapped-IDEA incidence over generations 1..n."""

    generations: np.ndarray
    sir: np.ndarray
    idea: np.ndarray
    idea_params: IdeaParams
    trajectory: SirTrajectory

    @property
    def delta(self) -> float:
        return trajectory_distance(self.sir, self.idea)

    @property
    def peak(self) -> float:
        return float(np.max(self.sir))

    @property
    def delta_normalized(self) -> float:
        peak = self.peak
        if peak == 0:
            return 0.0 if self.delta == 0 else math.inf
        return self.delta / peak


def compare_with_idea(params: SirParams, n_generations: int) -> Comparison:
    """Simulate the SIR model and evaluate its IDEA counterpart alongside.

    The IDEA curve is scaled by ``i0`` so that it coincides with the
    small-outbreak closed form for any initial size.
    """
    traj = simulate_damped_sir(params, n_generations)
    idea_params = map_sir_to_idea(params)
    gens = np.arange(1, n_generations + 1)
    idea = params.i0 * idea_curve(idea_params, gens)
    return Comparison(gens, traj.incidence[1:], idea, idea_params, traj)


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Matrices are indexed ``[i, j]`` for ``r0_grid[i]`` and ``rho_grid[j]``."""

    r0_grid: np.ndarray
    rho_grid: np.ndarray
    delta: np.ndarray
    delta_normalized: np.ndarray
    depletion_fraction: np.ndarray
    population: float = DEFAULT_POPULATION
    i0: float = 1.0
    n_generations: int = 0

    def rows(self):
        """Long-format rows ``(r0, rho, delta, delta_normalized, attack_fraction)``."""
        for i, r0 in enumerate(self.r0_grid):
            for j, rho in enumerate(self.rho_grid):
                yield (float(r0), float(rho), float(self.delta[i, j]),
                       float(self.delta_normalized[i, j]), float(self.depletion_fraction[i, j]))

    def to_dict(self) -> dict:
        return {
            "r0_grid": [float(x) for x in self.r0_grid],
            "rho_grid": [float(x) for x in self.rho_grid],
            "population": self.population,
            "i0": self.i0,
            "n_generations": self.n_generations,
            "delta": self.delta.tolist(),
            "delta_normalized": self.delta_normalized.tolist(),
            "attack_fraction": self.depletion_fraction.tolist(),
        }


def _sweep_cell(args) -> tuple[float, float, float]:
    r0, rho, population, i0, n = args
    cmp = compare_with_idea(SirParams(r0, rho, population, i0), n)
    return cmp.delta, cmp.delta_normalized, cmp.trajectory.attack_fraction


def sweep_parameter_space(r0_grid: Sequence[float], rho_grid: Sequence[float],
                          population: float = DEFAULT_POPULATION, i0: float = 1.0,
                          n_generations: int = 15, workers: int | None = None) -> SweepResult:
    """Distance between damped SIR and mapped IDEA over an (r0, rho) grid.

    Cells are independent; with ``workers > 1`` they are evaluated in a
    process pool and placed back by index, so the result is identical to the
    serial run.
    """
    r0_grid = np.asarray(r0_grid, dtype=float)
    rho_grid = np.asarray(rho_grid, dtype=float)
    if r0_grid.size == 0 or rho_grid.size == 0:
        raise ValidationError("grids must be non-empty")
    if n_generations < 1:
        raise ValidationError("n_generations must be >= 1")
    cells = []
    for i, r0 in enumerate(r0_grid):
        for j, rho in enumerate(rho_grid):
            try:
                SirParams(float(r0), float(rho), population, i0)
            except DomainError as exc:
                raise ValidationError(f"invalid sweep cell [{i}, {j}] (r0={r0}, rho={rho}): {exc}") from None
            cells.append((float(r0), float(rho), float(population), float(i0), int(n_generations)))

    if workers is None or workers <= 1:
        results = [_sweep_cell(c) for c in cells]
    else:
        chunk = max(1, len(cells) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells, chunksize=chunk))

    shape = (r0_grid.size, rho_grid.size)
    out = np.array(results, dtype=float).reshape(shape + (3,))
    return SweepResult(r0_grid, rho_grid, out[..., 0].copy(), out[..., 1].copy(),
                       out[..., 2].copy(), float(population), float(i0), int(n_generations))

