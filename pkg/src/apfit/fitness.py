"""Fitness evaluation: how well a candidate parameterization matches the data.

Voltage datasets contribute the mean squared difference between the data and
the model trace after the first upstrokes have been aligned; APD datasets
contribute the mean absolute APD error in ms. Each dataset error is
length-normalized (mean, not sum) so longer recordings do not dominate, then
scaled by its user weight and summed.

Divergent simulations receive ``SENTINEL``, the largest finite double, so
swarm ranking stays total without NaN/inf propagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataio import ApdDataset, Dataset, VoltageDataset
from .models import ModelId
from .simulator import PacingConfig, Trace, measure_apds, simulate, simulate_batch
from .stimulus import StimulusConfig

__all__ = [
    "SENTINEL",
    "ALIGNMENT_MARGIN_SAMPLES",
    "DatasetError",
    "FitnessBreakdown",
    "EvalContext",
    "align_first_upstroke",
    "voltage_error",
    "apd_error",
    "total_error",
    "evaluate_particle",
]

SENTINEL = float(np.finfo(np.float64).max)

# Extra samples simulated past the nominal window so positive alignment
# shifts compare against real model output instead of padding.
ALIGNMENT_MARGIN_SAMPLES = 50


def _upstroke_sample_index(samples: np.ndarray, threshold: float) -> int:
    return int(_kernels.upstroke_index(
        np.ascontiguousarray(samples, dtype=float), float(threshold)))


def alignment_threshold(data: VoltageDataset, normalize_to: float) -> float:
    """Half-amplitude crossing level used to locate the first upstroke."""
    if normalize_to != 0:
        return 0.5 * normalize_to
    return 0.5 * float(np.max(data.samples))


def align_first_upstroke(
    model: Trace,
    data: VoltageDataset,
    normalize_to: float,
) -> int:
    """Sample shift aligning the model's first upstroke to the data's.

    Both upstroke times are the first upward crossing of the half-amplitude
    threshold, linearly interpolated and rounded to the nearest sample. A
    trace that never crosses (non-excitable candidate, or degenerate data)
    falls back to shift 0.
    """
    threshold = alignment_threshold(data, normalize_to)
    m_idx = _upstroke_sample_index(model.samples, threshold)
    d_idx = _upstroke_sample_index(data.samples, threshold)
    if m_idx < 0 or d_idx < 0:
        return 0
    return m_idx - d_idx


def voltage_error(model: Trace, data: VoltageDataset, shift: int) -> float:
    """Length-normalized squared voltage error under ``shift``.

    Model samples are read at ``i + shift``; indices outside the (extended)
    trace compare against 0, the resting voltage. Divergent traces score
    ``SENTINEL``.
    """
    if model.diverged:
        return SENTINEL
    m = model.samples
    d = data.samples
    L = d.size
    idx = np.arange(L) + int(shift)
    valid = (idx >= 0) & (idx < m.size)
    shifted = np.zeros(L)
    shifted[valid] = m[idx[valid]]
    return float(np.mean((shifted - d) ** 2))


def apd_error(model_apds, targets) -> float:
    """Mean absolute APD error in ms."""
    m = np.asarray(model_apds, dtype=float)
    t = np.asarray(targets, dtype=float)
    if m.shape != t.shape:
        raise ValueError("model APD count must match target count")
    return float(np.mean(np.abs(m - t)))


def total_error(errors, weights) -> float:
    """Weighted sum of per-dataset length-normalized errors."""
    total = 0.0
    for e, w in zip(errors, weights, strict=True):
        total += w * e
    return total


@dataclass(frozen=True)
class DatasetError:
    """One breakdown row: errors for a single dataset."""

    label: str
    raw_error: float
    normalized_error: float
    weighted_error: float
    shift: int | None = None  # voltage datasets only


@dataclass(frozen=True)
class FitnessBreakdown:
    per_dataset: tuple[DatasetError, ...]
    total: float

    @property
    def shifts_used(self) -> dict[str, int]:
        return {
            row.label: row.shift
            for row in self.per_dataset
            if row.shift is not None
        }


class EvalContext:
    """Everything fixed during a fit: model, datasets, stimulus, pacing.

    Voltage datasets must already be normalized (or deliberately bypassed).
    One simulation is run per distinct cycle length and shared by every
    dataset at that cycle length; ``simulations_run`` counts them.
    """

    def __init__(
        self,
        model: ModelId | str,
        datasets: list[Dataset],
        stim: StimulusConfig,
        num_stimuli: int,
        pre_stimuli: int,
        dt: float,
        sample_interval: float,
        normalize_to: float,
        margin: int = ALIGNMENT_MARGIN_SAMPLES,
    ):
        if not datasets:
            raise ValueError("at least one dataset is required")
        self.model = ModelId(model)
        self.datasets = list(datasets)
        self.stim = stim
        self.num_stimuli = int(num_stimuli)
        self.pre_stimuli = int(pre_stimuli)
        self.dt = float(dt)
        self.sample_interval = float(sample_interval)
        self.normalize_to = float(normalize_to)
        self.margin = int(margin)
        self.simulations_run = 0

        seen: list[float] = []
        for ds in self.datasets:
            if ds.cycle_length not in seen:
                seen.append(ds.cycle_length)
        self.distinct_cycle_lengths: tuple[float, ...] = tuple(seen)

        # per-dataset constants reused on every evaluation
        self._thresholds: dict[int, float] = {}
        self._data_upstrokes: dict[int, int] = {}
        for i, ds in enumerate(self.datasets):
            if isinstance(ds, VoltageDataset):
                thr = alignment_threshold(ds, self.normalize_to)
                self._thresholds[i] = thr
                self._data_upstrokes[i] = _upstroke_sample_index(
                    ds.samples, thr)

        self._batch_buffers: dict = {}

    def pacing_for(self, cycle_length: float) -> PacingConfig:
        return PacingConfig(
            cycle_length=cycle_length,
            num_stimuli=self.num_stimuli,
            pre_stimuli=self.pre_stimuli,
            dt=self.dt,
            sample_interval=self.sample_interval,
        )

    # -- scalar path ------------------------------------------------------

    def evaluate(self, params: np.ndarray) -> tuple[float, FitnessBreakdown]:
        traces: dict[float, Trace] = {}
        for cl in self.distinct_cycle_lengths:
            traces[cl] = simulate(
                self.model, params, self.stim, self.pacing_for(cl),
                margin_samples=self.margin)
            self.simulations_run += 1

        rows: list[DatasetError] = []
        poisoned = False
        for i, ds in enumerate(self.datasets):
            trace = traces[ds.cycle_length]
            if isinstance(ds, VoltageDataset):
                shift = align_first_upstroke(trace, ds, self.normalize_to)
                norm = voltage_error(trace, ds, shift)
                length = ds.samples.size
            else:
                shift = None
                if trace.diverged:
                    norm = SENTINEL
                else:
                    apds = measure_apds(
                        trace, ds.threshold, self.pacing_for(ds.cycle_length))
                    norm = apd_error(apds, ds.targets)
                length = len(ds.targets)
            if norm == SENTINEL:
                raw = SENTINEL
                weighted = SENTINEL
                if ds.weight > 0:
                    poisoned = True
            else:
                raw = norm * length
                weighted = ds.weight * norm
            rows.append(DatasetError(ds.label, raw, norm, weighted, shift))

        if poisoned:
            total = SENTINEL
        else:
            total = total_error(
                [r.normalized_error for r in rows],
                [ds.weight for ds in self.datasets],
            )
            if not np.isfinite(total):
                total = SENTINEL
        return total, FitnessBreakdown(tuple(rows), total)

    # -- batch path -------------------------------------------------------

    def _buffers(self, n: int):
        buf = self._batch_buffers
        if buf.get("n") != n:
            buf.clear()
            buf["n"] = n
            buf["err"] = np.empty(n)
            buf["shift"] = np.empty(n, dtype=np.int64)
            buf["total"] = np.empty(n)
            buf["poisoned"] = np.empty(n, dtype=bool)
        return buf

    def evaluate_batch(self, positions: np.ndarray) -> np.ndarray:
        """Total error for every row of ``positions``.

        Row ``i`` equals ``evaluate(positions[i])[0]`` up to summation
        rounding; all heavy work runs in compiled parallel kernels.
        """
        n = positions.shape[0]
        buf = self._buffers(n)
        total = buf["total"]
        poisoned = buf["poisoned"]
        err = buf["err"]
        shift = buf["shift"]
        total[:] = 0.0
        poisoned[:] = False

        for cl in self.distinct_cycle_lengths:
            traces, diverged = simulate_batch(
                self.model, positions, self.stim, self.pacing_for(cl),
                margin_samples=self.margin)
            self.simulations_run += 1
            for i, ds in enumerate(self.datasets):
                if ds.cycle_length != cl:
                    continue
                if isinstance(ds, VoltageDataset):
                    _kernels.batch_voltage_error(
                        traces, diverged, ds.samples,
                        self._data_upstrokes[i], self._thresholds[i],
                        SENTINEL, err, shift)
                else:
                    _kernels.batch_apd_error(
                        traces, diverged, np.asarray(ds.targets),
                        self.sample_interval, ds.threshold, cl,
                        SENTINEL, err)
                if ds.weight > 0:
                    is_sentinel = err == SENTINEL
                    poisoned |= is_sentinel
                    # poisoned rows are overwritten below; keep the sum finite
                    total += ds.weight * np.where(is_sentinel, 0.0, err)
        total[poisoned] = SENTINEL
        np.minimum(total, SENTINEL, out=total)
        return total.copy()


def evaluate_particle(
    ctx: EvalContext,
    params: np.ndarray,
) -> tuple[float, FitnessBreakdown]:
    """Scalar fitness of one parameterization against all datasets."""
    return ctx.evaluate(params)
