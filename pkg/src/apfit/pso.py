"""Particle swarm optimizer with constriction-coefficient updates.

Velocity update for particle i at iteration n:

    v' = chi * (v + U(0, phi1) (*) (b_i - p) + U(0, phi2) (*) (b - p))
    p' = p + gamma * v'

with (*) the componentwise product, b_i the particle's best position and b
the swarm's. Components pushed outside their bounds are re-drawn uniformly
inside the three-quarters of the range adjacent to the violated bound.

Randomness is counter-based: every draw comes from a Philox stream keyed on
(seed, iteration) with a fixed (particle, dimension) layout, so a run is
reproducible regardless of thread count or evaluation order. Initial
velocities are zero; exploration comes from the uniform initialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .models import Bounds

__all__ = [
    "PsoHyper",
    "SwarmState",
    "SwarmRun",
    "compute_chi",
    "init_swarm",
    "step",
    "run_swarm",
]

RESET_FRACTION = 0.75


def compute_chi(phi1: float, phi2: float) -> float:
    """Constriction coefficient for phi = phi1 + phi2 > 4."""
    phi = phi1 + phi2
    if phi <= 4.0:
        raise ValueError(
            f"constriction requires phi1 + phi2 > 4, got {phi:g}")
    return 2.0 / (phi - 2.0 + math.sqrt(phi * phi - 4.0 * phi))


@dataclass(frozen=True)
class PsoHyper:
    """Swarm hyperparameters; ``chi=None`` derives it from phi1 + phi2."""

    phi1: float = 2.05
    phi2: float = 2.05
    chi: float | None = None
    gamma: float = 0.05
    particles: int = 4096
    iterations: int = 32

    def __post_init__(self):
        if self.phi1 < 0 or self.phi2 < 0:
            raise ValueError("phi1 and phi2 must be non-negative")
        if self.chi is None:
            if self.phi1 + self.phi2 <= 4.0:
                raise ValueError(
                    "phi1 + phi2 must exceed 4 when chi is auto-computed")
        elif not 0.0 < self.chi < 1.0:
            raise ValueError("explicit chi must lie in (0, 1)")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.particles < 1:
            raise ValueError("particles must be at least 1")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")

    @property
    def effective_chi(self) -> float:
        if self.chi is not None:
            return self.chi
        return compute_chi(self.phi1, self.phi2)


@dataclass
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    best_positions: np.ndarray
    best_errors: np.ndarray
    global_best: np.ndarray
    global_best_error: float
    iteration: int
    seed: int
    history: list[float] = field(default_factory=list)


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    """Philox generator keyed on (seed, iteration); stream 0 is the init."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, 0], dtype=np.uint64)
    counter = np.array([0, 0, iteration, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def init_swarm(
    bounds: Bounds,
    hyper: PsoHyper,
    seed: int,
    evaluate: Callable[[np.ndarray], np.ndarray],
) -> SwarmState:
    """Uniformly initialize positions, zero velocities, seed the bests."""
    lo = bounds.lower
    hi = bounds.upper
    d = lo.size
    rng = _iteration_rng(seed, 0)
    r = rng.random((hyper.particles, d))
    positions = lo + r * (hi - lo)  # fixed components (lo==hi) land exactly
    velocities = np.zeros_like(positions)
    errors = np.asarray(evaluate(positions), dtype=float)
    best_idx = int(np.argmin(errors))
    swarm = SwarmState(
        positions=positions,
        velocities=velocities,
        best_positions=positions.copy(),
        best_errors=errors.copy(),
        global_best=positions[best_idx].copy(),
        global_best_error=float(errors[best_idx]),
        iteration=0,
        seed=seed,
    )
    swarm.history.append(swarm.global_best_error)
    return swarm


def step(
    swarm: SwarmState,
    hyper: PsoHyper,
    bounds: Bounds,
    evaluate: Callable[[np.ndarray], np.ndarray],
) -> SwarmState:
    """Advance the swarm one iteration in place and return it."""
    lo = bounds.lower
    hi = bounds.upper
    span = hi - lo
    chi = hyper.effective_chi
    iteration = swarm.iteration + 1
    rng = _iteration_rng(swarm.seed, iteration)
    shape = swarm.positions.shape
    r1 = rng.random(shape)
    r2 = rng.random(shape)
    r_reset = rng.random(shape)

    v = chi * (
        swarm.velocities
        + (r1 * hyper.phi1) * (swarm.best_positions - swarm.positions)
        + (r2 * hyper.phi2) * (swarm.global_best - swarm.positions)
    )
    p = swarm.positions + hyper.gamma * v

    below = p < lo
    above = p > hi
    if below.any():
        p = np.where(below, lo + RESET_FRACTION * span * r_reset, p)
    if above.any():
        p = np.where(above, hi - RESET_FRACTION * span * r_reset, p)

    errors = np.asarray(evaluate(p), dtype=float)
    improved = errors < swarm.best_errors
    swarm.best_positions[improved] = p[improved]
    swarm.best_errors[improved] = errors[improved]

    candidate = float(swarm.best_errors.min())
    if candidate < swarm.global_best_error:
        best_idx = int(np.argmin(swarm.best_errors))
        swarm.global_best = swarm.best_positions[best_idx].copy()
        swarm.global_best_error = candidate

    swarm.positions = p
    swarm.velocities = v
    swarm.iteration = iteration
    swarm.history.append(swarm.global_best_error)
    return swarm


@dataclass(frozen=True)
class SwarmRun:
    best_position: np.ndarray
    best_error: float
    history: np.ndarray
    iterations_completed: int
    cancelled: bool


def run_swarm(
    bounds: Bounds,
    hyper: PsoHyper,
    seed: int,
    evaluate: Callable[[np.ndarray], np.ndarray],
    on_iteration: Callable[[int, float], None] | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> SwarmRun:
    """Initialize, run ``hyper.iterations`` steps, return the best find.

    ``on_iteration(iteration, lowest_error)`` fires after the initial
    evaluation (iteration 0) and after each step. ``should_stop`` is polled
    at iteration boundaries; a cancelled run returns its partial history.
    """
    swarm = init_swarm(bounds, hyper, seed, evaluate)
    if on_iteration is not None:
        on_iteration(0, swarm.global_best_error)
    cancelled = False
    for _ in range(hyper.iterations):
        if should_stop is not None and should_stop():
            cancelled = True
            break
        step(swarm, hyper, bounds, evaluate)
        if on_iteration is not None:
            on_iteration(swarm.iteration, swarm.global_best_error)
    return SwarmRun(
        best_position=swarm.global_best.copy(),
        best_error=swarm.global_best_error,
        history=np.array(swarm.history),
        iterations_completed=swarm.iteration,
        cancelled=cancelled,
    )
