"""External stimulus currents: square pulse and biphasic pulse.

Both are expressed as a rate (1/ms) as a function of time since the current
stimulus onset; one onset occurs at the start of each pacing period. Past
``duration`` the stimulus is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "SquareStimulus",
    "BiphasicStimulus",
    "StimulusConfig",
    "stimulus_current",
]


@dataclass(frozen=True)
class SquareStimulus:
    """Constant pulse: ``magnitude`` for ``duration`` ms, zero after."""

    magnitude: float = 0.2
    duration: float = 2.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("stimulus duration must be positive")
        if self.magnitude < 0:
            raise ValueError("stimulus magnitude must be non-negative")


@dataclass(frozen=True)
class BiphasicStimulus:
    """Biphasic pulse mimicking the depolarizing current of diffusive coupling.

    For t < duration:

        I(t) = -i_mag * (t/a - b) / (1 + (t/a - c)^4)

    With the defaults the pulse is negative until t/a reaches ``b`` and
    positive after, within the 10 ms window.
    """

    i_mag: float = 0.4
    a: float = 0.725
    b: float = 7.0
    c: float = 6.72
    duration: float = 10.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("stimulus duration must be positive")
        if self.a <= 0:
            raise ValueError("stimulus timescale a must be positive")
        if self.i_mag < 0:
            raise ValueError("stimulus magnitude must be non-negative")


StimulusConfig = SquareStimulus | BiphasicStimulus


def stimulus_current(cfg: StimulusConfig, t: float) -> float:
    """Stimulus value (1/ms) at time ``t`` (ms) since the stimulus onset."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t >= cfg.duration:
        return 0.0
    if isinstance(cfg, SquareStimulus):
        return cfg.magnitude
    x = t / cfg.a
    return -cfg.i_mag * (x - cfg.b) / (1.0 + (x - cfg.c) ** 4)
