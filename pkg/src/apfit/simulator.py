"""Constant-rate pacing simulation and APD measurement.

A simulation applies one stimulus at the start of each cycle-length period,
integrates with forward Euler at step ``dt``, and records the voltage every
``sample_interval`` during the final ``num_stimuli`` periods. Pre-recording
periods wash out initial-condition transients and are never recorded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .models import ModelId
from .stimulus import BiphasicStimulus, SquareStimulus, StimulusConfig

__all__ = [
    "PacingConfig",
    "Trace",
    "simulate",
    "sample_alignment_window",
    "measure_apds",
]

DEFAULT_DT = 0.02
DEFAULT_SAMPLE_INTERVAL = 1.0

_INTEGRATORS = {
    ModelId.MFHN: _kernels.integrate_mfhn,
    ModelId.MS: _kernels.integrate_ms,
    ModelId.MMS: _kernels.integrate_mms,
    ModelId.FK: _kernels.integrate_fk,
    ModelId.BOCF: _kernels.integrate_bocf,
    ModelId.BBOCF: _kernels.integrate_bbocf,
}

_BATCH_INTEGRATORS = {
    ModelId.MFHN: _kernels.batch_integrate_mfhn,
    ModelId.MS: _kernels.batch_integrate_ms,
    ModelId.MMS: _kernels.batch_integrate_mms,
    ModelId.FK: _kernels.batch_integrate_fk,
    ModelId.BOCF: _kernels.batch_integrate_bocf,
    ModelId.BBOCF: _kernels.batch_integrate_bbocf,
}


@dataclass(frozen=True)
class PacingConfig:
    """Pacing protocol: period, beat counts, Euler step, sampling rate."""

    cycle_length: float
    num_stimuli: int = 1
    pre_stimuli: int = 0
    dt: float = DEFAULT_DT
    sample_interval: float = DEFAULT_SAMPLE_INTERVAL

    def __post_init__(self):
        if self.cycle_length <= 0:
            raise ValueError("cycle_length must be positive")
        if self.num_stimuli < 1:
            raise ValueError("num_stimuli must be at least 1")
        if self.pre_stimuli < 0:
            raise ValueError("pre_stimuli must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sample_interval < self.dt:
            raise ValueError("sample_interval must be at least dt")
        ratio = self.sample_interval / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("sample_interval must be an integer multiple of dt")

    @property
    def steps_per_sample(self) -> int:
        return round(self.sample_interval / self.dt)

    @property
    def period_steps(self) -> int:
        return max(1, round(self.cycle_length / self.dt))

    @property
    def n_samples(self) -> int:
        return int(self.num_stimuli * self.cycle_length / self.sample_interval
                   + 1e-9)

    @property
    def record_start_step(self) -> int:
        return self.pre_stimuli * self.period_steps


@dataclass(frozen=True)
class Trace:
    """Sampled voltage time series, in model units."""

    samples: np.ndarray
    sample_interval: float
    t0: float = 0.0
    diverged: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=float))

    def times(self) -> np.ndarray:
        return self.t0 + self.sample_interval * np.arange(self.samples.size)


def _encode_stimulus(cfg: StimulusConfig):
    if isinstance(cfg, SquareStimulus):
        return (_kernels.STIM_SQUARE, cfg.magnitude, cfg.duration,
                1.0, 0.0, 0.0)
    if isinstance(cfg, BiphasicStimulus):
        return (_kernels.STIM_BIPHASIC, cfg.i_mag, cfg.duration,
                cfg.a, cfg.b, cfg.c)
    raise TypeError(f"unsupported stimulus config: {type(cfg)!r}")


def simulate(
    model: ModelId | str,
    params: np.ndarray,
    stim: StimulusConfig,
    pacing: PacingConfig,
    margin_samples: int = 0,
) -> Trace:
    """Integrate ``model`` under ``pacing`` and return the recorded trace.

    ``margin_samples`` extends the recording past the nominal window (pacing
    continues) so shifted comparisons never run out of model data. A trace
    that goes non-finite at any point is flagged ``diverged``.
    """
    if margin_samples < 0:
        raise ValueError("margin_samples must be non-negative")
    mid = ModelId(model)
    p = np.ascontiguousarray(np.asarray(params, dtype=float))
    if not np.all(np.isfinite(p)):
        raise ValueError("parameters must be finite")
    kind, mag, dur, a, b, c = _encode_stimulus(stim)
    n_out = pacing.n_samples + margin_samples
    out = np.empty(n_out, dtype=float)
    diverged = _INTEGRATORS[mid](
        p, kind, mag, dur, a, b, c,
        pacing.dt, pacing.period_steps, pacing.steps_per_sample,
        pacing.record_start_step, out)
    return Trace(out, pacing.sample_interval, 0.0, bool(diverged))


def sample_alignment_window(
    model: ModelId | str,
    params: np.ndarray,
    stim: StimulusConfig,
    pacing: PacingConfig,
    margin: int,
) -> Trace:
    """Re-run ``simulate`` with the recording extended by ``margin`` samples."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return simulate(model, params, stim, pacing, margin_samples=margin)


def simulate_batch(
    model: ModelId | str,
    positions: np.ndarray,
    stim: StimulusConfig,
    pacing: PacingConfig,
    margin_samples: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate one trace per row of ``positions`` in parallel.

    Returns ``(traces, diverged)`` with shapes (n, samples) and (n,). Each
    row is computed by the same kernel as :func:`simulate`, so a batch row is
    bitwise identical to the corresponding single simulation.
    """
    mid = ModelId(model)
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2:
        raise ValueError("positions must be a 2-d array")
    # transposed so the kernels' lane-adjacent parameter loads are contiguous
    pt = np.ascontiguousarray(pos.T)
    kind, mag, dur, a, b, c = _encode_stimulus(stim)
    n_out = pacing.n_samples + margin_samples
    out = np.empty((pos.shape[0], n_out), dtype=float)
    diverged = np.zeros(pos.shape[0], dtype=np.bool_)
    _BATCH_INTEGRATORS[mid](
        pt, kind, mag, dur, a, b, c,
        pacing.dt, pacing.period_steps, pacing.steps_per_sample,
        pacing.record_start_step, out, diverged)
    return out, diverged


def measure_apds(
    trace: Trace,
    threshold: float,
    pacing: PacingConfig,
) -> list[float]:
    """Per-period action potential durations at ``threshold``.

    Each period's APD runs from the first upward threshold crossing inside
    the period to the next downward crossing, both located by linear
    interpolation between adjacent samples. A period with no upward crossing
    yields 0; a beat still above threshold at the end of the trace is
    measured to the trace end.
    """
    out = np.empty(pacing.num_stimuli, dtype=float)
    _kernels.apds_from_trace(
        np.ascontiguousarray(trace.samples, dtype=float),
        trace.sample_interval, float(threshold), pacing.cycle_length, out)
    return [float(v) for v in out]
