"""Loading, validation, and normalization of user-provided datasets.

Voltage files are UTF-8 text with one decimal value per line (blank lines
skipped, plain or scientific notation). APD targets are entered as a
comma-separated list. Normalization rescales a sequence to [0, normalize_to];
``normalize_to == 0`` bypasses rescaling entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "VoltageDataset",
    "ApdDataset",
    "Dataset",
    "load_voltage_file",
    "normalize",
    "parse_apd_list",
]


class DataError(ValueError):
    """Malformed or degenerate input data."""


@dataclass(frozen=True)
class VoltageDataset:
    """One voltage time series to fit, paced at a single cycle length."""

    samples: np.ndarray
    cycle_length: float
    weight: float = 1.0
    source_name: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", arr)
        if arr.ndim != 1 or arr.size < 2:
            raise DataError("voltage dataset needs at least two samples")
        if not np.all(np.isfinite(arr)):
            raise DataError("voltage dataset contains non-finite values")
        if self.cycle_length <= 0:
            raise DataError("cycle_length must be positive")
        if self.weight < 0:
            raise DataError("fitting weight must be non-negative")

    @property
    def label(self) -> str:
        return self.source_name or f"voltage@{self.cycle_length:g}ms"


@dataclass(frozen=True)
class ApdDataset:
    """A list of per-beat APD targets (ms) at one cycle length."""

    targets: tuple[float, ...]
    threshold: float
    cycle_length: float
    weight: float = 1.0
    source_name: str = ""

    def __post_init__(self):
        targets = tuple(float(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if not targets:
            raise DataError("APD dataset needs at least one target")
        if self.cycle_length <= 0:
            raise DataError("cycle_length must be positive")
        for t in targets:
            if not (0 < t < self.cycle_length):
                raise DataError(
                    f"APD target {t:g} outside (0, {self.cycle_length:g})")
        if self.threshold <= 0:
            raise DataError("APD threshold must be positive")
        if self.weight < 0:
            raise DataError("fitting weight must be non-negative")

    @property
    def label(self) -> str:
        return self.source_name or f"apd@{self.cycle_length:g}ms"


Dataset = VoltageDataset | ApdDataset


def load_voltage_file(data: bytes | str) -> np.ndarray:
    """Parse a newline-delimited voltage file into a sample array.

    One decimal number per non-empty line; surrounding whitespace is ignored
    and blank lines are skipped. Raises :class:`DataError` naming the line
    number of the first malformed entry.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"voltage file is not UTF-8 text: {exc}") from None
    else:
        text = data
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            value = float(stripped)
        except ValueError:
            raise DataError(
                f"line {lineno}: not a number: {stripped!r}") from None
        if not np.isfinite(value):
            raise DataError(f"line {lineno}: non-finite value {stripped!r}")
        values.append(value)
    if not values:
        raise DataError("voltage file contains no samples")
    return np.array(values, dtype=float)


def normalize(samples: np.ndarray, normalize_to: float) -> np.ndarray:
    """Rescale ``samples`` to minimum 0 and maximum ``normalize_to``.

    ``normalize_to == 0`` returns the samples unchanged (bypass for data that
    is already in model units).
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise DataError("cannot normalize an empty sequence")
    if normalize_to == 0:
        return arr.copy()
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        raise DataError("cannot normalize constant data (max == min)")
    # this grouping makes the extremes land exactly on 0 and normalize_to
    return normalize_to * ((arr - lo) / (hi - lo))


def parse_apd_list(text: str) -> list[float]:
    """Parse a comma-separated list of APD values (ms)."""
    entries = text.split(",")
    if not text.strip():
        raise DataError("APD list is empty")
    values = []
    for pos, entry in enumerate(entries, start=1):
        stripped = entry.strip()
        if not stripped:
            raise DataError(f"entry {pos}: empty APD value")
        try:
            value = float(stripped)
        except ValueError:
            raise DataError(
                f"entry {pos}: not a number: {stripped!r}") from None
        if not np.isfinite(value):
            raise DataError(f"entry {pos}: non-finite value {stripped!r}")
        values.append(value)
    return values
