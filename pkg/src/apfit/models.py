"""Phenomenological cardiac action-potential cell models.

Six dimensionless single-cell models are provided, all of the form

    du/dt = I_total(u, gates) + I_stim

with one to three gating variables. The catalog for each model holds its
parameter names (ASCII identifiers; Greek display glyphs are kept separately
for UIs), the default box constraints used by the optimizer, and the default
normalization constant for input data.

Sign convention: ``rhs`` always returns a depolarizing-positive du/dt. The
three-current models (FK, BOCF, BBOCF) define their fast/slow currents with
inward currents negative, so their summed current is negated inside ``rhs``;
the two-variable models (MFHN, MS, MMS) are already depolarizing-positive.

A parameter pair with ``min == max`` marks a fixed (non-fitted) parameter;
the BBOCF defaults pin 15 of the 39 parameters this way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "ModelId",
    "ModelSpec",
    "Bounds",
    "CellState",
    "model_spec",
    "default_bounds",
    "initial_state",
    "reference_params",
    "rhs",
]


class ModelId(str, Enum):
    """The closed set of supported cell models."""

    MFHN = "mfhn"
    MS = "ms"
    MMS = "mms"
    FK = "fk"
    BOCF = "bocf"
    BBOCF = "bbocf"


@dataclass(frozen=True)
class Bounds:
    """Per-parameter box constraints; ``lower == upper`` fixes a parameter."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be two equal-length 1-d arrays")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("bounds must be finite")
        if np.any(lo > hi):
            bad = int(np.argmax(lo > hi))
            raise ValueError(f"lower bound exceeds upper bound at index {bad}")

    @property
    def fixed_mask(self) -> np.ndarray:
        return self.lower == self.upper

    def contains(self, values: np.ndarray) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(
            np.isfinite(v).all()
            and np.all(v >= self.lower)
            and np.all(v <= self.upper)
        )


@dataclass(frozen=True)
class CellState:
    """Instantaneous state: dimensionless voltage ``u`` plus gate values."""

    u: float
    gates: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.array((self.u,) + self.gates, dtype=float)


@dataclass(frozen=True)
class ModelSpec:
    """Static catalog entry for one model."""

    id: ModelId
    parameter_names: tuple[str, ...]
    display_names: tuple[str, ...]
    state_labels: tuple[str, ...]
    default_bounds: tuple[tuple[float, float], ...]
    default_normalize_to: float

    @property
    def n_parameters(self) -> int:
        return len(self.parameter_names)

    def bounds(self) -> Bounds:
        lo = np.array([b[0] for b in self.default_bounds])
        hi = np.array([b[1] for b in self.default_bounds])
        return Bounds(lo, hi)

    def index_of(self, name: str) -> int:
        try:
            return self.parameter_names.index(name)
        except ValueError:
            raise KeyError(
                f"{self.id.value} has no parameter {name!r}"
            ) from None


# (ascii name, display glyph, default min, default max), in catalog order.

_MFHN_TABLE = (
    ("alpha", "α", 0.05, 0.6),
    ("beta", "β", 0.2, 2.0),
    ("epsilon", "ε", 0.001, 1.0),
    ("mu", "μ", 0.2, 2.0),
    ("gamma", "γ", 0.01, 1.0),
    ("theta", "θ", -0.1, 0.1),
    ("delta", "δ", 0.5, 1.5),
)

_MS_TABLE = (
    ("tau_in", "τ_in", 0.15, 0.6),
    ("tau_out", "τ_out", 3.0, 12.0),
    ("tau_close", "τ_close", 75.0, 300.0),
    ("tau_open", "τ_open", 60.0, 240.0),
    ("v_gate", "v_gate", 0.065, 0.26),
)

_MMS_TABLE = (
    ("tau_in", "τ_in", 0.05, 0.6),
    ("tau_out", "τ_out", 0.5, 12.0),
    ("tau_close", "τ_close", 60.0, 300.0),
    ("tau_open", "τ_open", 60.0, 240.0),
    ("v_gate", "v_gate", 0.065, 0.26),
)

_FK_TABLE = (
    ("tau_r", "τ_r", 25.0, 200.0),
    ("tau_si", "τ_si", 10.0, 300.0),
    ("tau_w_plus", "τ_w^+", 50.0, 900.0),
    ("tau_d", "τ_d", 0.15, 0.4),
    ("tau_v_plus", "τ_v^+", 1.0, 20.0),
    ("tau_v1_minus", "τ_v1^-", 10.0, 50.0),
    ("tau_v2_minus", "τ_v2^-", 500.0, 1500.0),
    ("tau_w_minus", "τ_w^-", 5.0, 100.0),
    ("tau_0", "τ_0", 5.0, 50.0),
    ("k", "k", 1.0, 15.0),
    ("u_c_si", "u_c^si", 0.2, 0.9),
    ("u_c", "u_c", 0.05, 0.3),
    ("u_v", "u_v", 0.005, 0.06),
)

_BOCF_TABLE = (
    ("theta_v", "θ_v", 0.1, 0.35),
    ("tau_v1_minus", "τ_v1^-", 0.5, 300.0),
    ("tau_v2_minus", "τ_v2^-", 1.0, 1500.0),
    ("tau_v_plus", "τ_v^+", 1.0, 15.0),
    ("u_w_minus", "u_w^-", 0.01, 0.04),
    ("tau_so1", "τ_so1", 15.0, 100.0),
    ("k_so", "k_so", 1.8, 2.2),
    ("tau_s1", "τ_s1", 2.0, 3.0),
    ("tau_s2", "τ_s2", 1.0, 20.0),
    ("k_s", "k_s", 1.5, 3.0),
    ("tau_w1_minus", "τ_w1^-", 5.0, 150.0),
    ("tau_w2_minus", "τ_w2^-", 5.0, 150.0),
    ("tau_w1_plus", "τ_w1^+", 100.0, 1000.0),
    ("tau_fi", "τ_fi", 0.05, 0.5),
    ("tau_o1", "τ_o1", 5.0, 500.0),
    ("tau_o2", "τ_o2", 5.0, 10.0),
    ("tau_so2", "τ_so2", 0.1, 1.5),
    ("u_so", "u_so", 0.6, 0.7),
    ("u_s", "u_s", 0.8, 1.0),
    ("tau_si1", "τ_si1", 1.0, 4.0),
    ("theta_w", "θ_w", 0.1, 0.15),
    ("theta_v_minus", "θ_v^-", 0.005, 0.25),
    ("theta_o", "θ_o", 0.004, 0.008),
    ("k_w_minus", "k_w^-", 50.0, 250.0),
    ("tau_w_inf", "τ_w∞", 0.01, 0.2),
    ("w_inf_star", "w∞*", 0.4, 1.0),
    ("u_u", "u_u", 1.45, 1.61),
)

_BBOCF_TABLE = (
    ("tau_v1_plus", "τ_v1^+", 5.0, 10.0),
    ("tau_v1_minus", "τ_v1^-", 60.0, 60.0),
    ("tau_v2_minus", "τ_v2^-", 50.0, 50.0),
    ("tau_w1_plus", "τ_w1^+", 40.0, 80.0),
    ("tau_w2_plus", "τ_w2^+", 150.0, 300.0),
    ("tau_w1_minus", "τ_w1^-", 10.0, 500.0),
    ("tau_w2_minus", "τ_w2^-", 20.0, 40.0),
    ("tau_s1", "τ_s1", 5.0, 15.0),
    ("tau_s2", "τ_s2", 50.0, 90.0),
    ("tau_fi", "τ_fi", 0.05, 0.1),
    ("tau_o1", "τ_o1", 400.0, 500.0),
    ("tau_o2", "τ_o2", 20.0, 35.0),
    ("tau_so1", "τ_so1", 150.0, 200.0),
    ("tau_so2", "τ_so2", 1.0, 3.0),
    ("tau_si1", "τ_si1", 10.0, 20.0),
    ("tau_si2", "τ_si2", 2.0, 10.0),
    ("tau_w_inf", "τ_w∞", 0.12, 0.12),
    ("theta_v", "θ_v", 0.13, 0.13),
    ("theta_v_minus", "θ_v^-", 0.006, 0.006),
    ("theta_v_inf", "θ_v∞", 2.0, 2.0),
    ("theta_w", "θ_w", 0.13, 0.13),
    ("theta_w_inf", "θ_w∞", 0.12, 0.12),
    ("theta_so", "θ_so", 0.2, 0.2),
    ("theta_si", "θ_si", 0.13, 0.13),
    ("theta_o", "θ_o", 0.006, 0.006),
    ("theta_s", "θ_s", 0.36, 0.36),
    ("k_w_plus", "k_w^+", 5.0, 10.0),
    ("k_w_minus", "k_w^-", 100.0, 150.0),
    ("k_s", "k_s", 5.0, 25.0),
    ("k_so", "k_so", 1.5, 4.0),
    ("k_si", "k_si", 10.0, 70.0),
    ("u_w_minus", "u_w^-", 0.02, 0.12),
    ("u_s", "u_s", 0.25, 0.4),
    ("u_o", "u_o", 0.0, 0.0),
    ("u_u", "u_u", 1.0, 1.0),
    ("u_so", "u_so", 0.3, 0.75),
    ("s_c", "s_c", 0.6, 0.9),
    ("w_c_plus", "w_c^+", 0.2, 0.3),
    ("w_inf_star", "w∞*", 0.94, 0.94),
)

_STATE_LABELS = {
    ModelId.MFHN: ("u", "v"),
    ModelId.MS: ("u", "h"),
    ModelId.MMS: ("u", "h"),
    ModelId.FK: ("u", "v", "w"),
    ModelId.BOCF: ("u", "v", "w", "s"),
    ModelId.BBOCF: ("u", "v", "w", "s"),
}

_NORMALIZE_TO = {
    ModelId.MFHN: 1.0,
    ModelId.MS: 1.0,
    ModelId.MMS: 1.0,
    ModelId.FK: 1.0,
    ModelId.BOCF: 1.2,
    ModelId.BBOCF: 1.2,
}

_TABLES = {
    ModelId.MFHN: _MFHN_TABLE,
    ModelId.MS: _MS_TABLE,
    ModelId.MMS: _MMS_TABLE,
    ModelId.FK: _FK_TABLE,
    ModelId.BOCF: _BOCF_TABLE,
    ModelId.BBOCF: _BBOCF_TABLE,
}

_SPECS = {
    mid: ModelSpec(
        id=mid,
        parameter_names=tuple(row[0] for row in table),
        display_names=tuple(row[1] for row in table),
        state_labels=_STATE_LABELS[mid],
        default_bounds=tuple((row[2], row[3]) for row in table),
        default_normalize_to=_NORMALIZE_TO[mid],
    )
    for mid, table in _TABLES.items()
}


def model_spec(model: ModelId | str) -> ModelSpec:
    """Return the static catalog entry for ``model``."""
    return _SPECS[ModelId(model)]


def default_bounds(model: ModelId | str) -> Bounds:
    """Default box constraints for ``model``, one (min, max) per parameter."""
    return model_spec(model).bounds()


def initial_state(model: ModelId | str) -> CellState:
    """Resting state used to start every simulation.

    Voltage starts at 0; recovery gates (h, v, w) start fully available at 1
    and the slow BOCF/BBOCF gate s starts at 0. Pre-recording stimuli are
    expected to wash out any transient this convention introduces.
    """
    mid = ModelId(model)
    if mid is ModelId.MFHN:
        return CellState(0.0, (0.0,))
    if mid in (ModelId.MS, ModelId.MMS):
        return CellState(0.0, (1.0,))
    if mid is ModelId.FK:
        return CellState(0.0, (1.0, 1.0))
    return CellState(0.0, (1.0, 1.0, 0.0))  # BOCF / BBOCF


# Known-good parameterizations, used by the synthetic-data generator and as
# simulation smoke references. All values lie inside the default bounds
# (BBOCF: inside the default bounds with its 15 pinned values kept).

_REFERENCE = {
    ModelId.MFHN: {
        "alpha": 0.15,
        "beta": 1.2,
        "epsilon": 0.01,
        "mu": 1.0,
        "gamma": 0.05,
        "theta": 0.0,
        "delta": 1.0,
    },
    ModelId.MS: {
        "tau_in": 0.3,
        "tau_out": 6.0,
        "tau_close": 150.0,
        "tau_open": 120.0,
        "v_gate": 0.13,
    },
    ModelId.MMS: {
        "tau_in": 0.3,
        "tau_out": 6.0,
        "tau_close": 150.0,
        "tau_open": 120.0,
        "v_gate": 0.13,
    },
    ModelId.FK: {
        "tau_r": 33.33,
        "tau_si": 29.0,
        "tau_w_plus": 870.0,
        "tau_d": 0.25,
        "tau_v_plus": 3.33,
        "tau_v1_minus": 19.6,
        "tau_v2_minus": 1250.0,
        "tau_w_minus": 41.0,
        "tau_0": 12.5,
        "k": 10.0,
        "u_c_si": 0.85,
        "u_c": 0.13,
        "u_v": 0.04,
    },
    ModelId.BOCF: {
        "theta_v": 0.3,
        "tau_v1_minus": 60.0,
        "tau_v2_minus": 1150.0,
        "tau_v_plus": 1.4506,
        "u_w_minus": 0.03,
        "tau_so1": 30.0181,
        "k_so": 2.0458,
        "tau_s1": 2.7342,
        "tau_s2": 16.0,
        "k_s": 2.0994,
        "tau_w1_minus": 60.0,
        "tau_w2_minus": 15.0,
        "tau_w1_plus": 200.0,
        "tau_fi": 0.11,
        "tau_o1": 400.0,
        "tau_o2": 6.0,
        "tau_so2": 0.9957,
        "u_so": 0.65,
        "u_s": 0.9087,
        "tau_si1": 1.8875,
        "theta_w": 0.13,
        "theta_v_minus": 0.006,
        "theta_o": 0.006,
        "k_w_minus": 65.0,
        "tau_w_inf": 0.07,
        "w_inf_star": 0.94,
        "u_u": 1.55,
    },
    ModelId.BBOCF: {
        "tau_v1_plus": 7.5,
        "tau_v1_minus": 60.0,
        "tau_v2_minus": 50.0,
        "tau_w1_plus": 40.0,
        "tau_w2_plus": 150.0,
        "tau_w1_minus": 100.0,
        "tau_w2_minus": 30.0,
        "tau_s1": 10.0,
        "tau_s2": 50.0,
        "tau_fi": 0.075,
        "tau_o1": 450.0,
        "tau_o2": 27.5,
        "tau_so1": 175.0,
        "tau_so2": 2.0,
        "tau_si1": 10.0,
        "tau_si2": 2.0,
        "tau_w_inf": 0.12,
        "theta_v": 0.13,
        "theta_v_minus": 0.006,
        "theta_v_inf": 2.0,
        "theta_w": 0.13,
        "theta_w_inf": 0.12,
        "theta_so": 0.2,
        "theta_si": 0.13,
        "theta_o": 0.006,
        "theta_s": 0.36,
        "k_w_plus": 10.0,
        "k_w_minus": 125.0,
        "k_s": 15.0,
        "k_so": 1.5,
        "k_si": 10.0,
        "u_w_minus": 0.07,
        "u_s": 0.325,
        "u_o": 0.0,
        "u_u": 1.0,
        "u_so": 0.75,
        "s_c": 0.9,
        "w_c_plus": 0.3,
        "w_inf_star": 0.94,
    },
}


def reference_params(model: ModelId | str) -> np.ndarray:
    """Known-good parameter vector for ``model``, in catalog order."""
    spec = model_spec(model)
    ref = _REFERENCE[spec.id]
    return np.array([ref[name] for name in spec.parameter_names])


def midpoint_params(model: ModelId | str) -> np.ndarray:
    """Midpoint of each default bound interval, in catalog order."""
    b = default_bounds(model)
    return 0.5 * (b.lower + b.upper)


# Per-model derivative evaluations. Each returns plain floats so the hot
# integration kernels can reuse the exact same arithmetic (see _kernels).


def _rhs_mfhn(p, u, v, i_stim):
    alpha, beta, epsilon, mu, gamma, theta, delta = p
    du = mu * u * (1.0 - u) * (u - alpha) - u * v + i_stim
    dv = epsilon * ((beta - u) * (u - gamma) - delta * v - theta)
    return du, dv


def _rhs_ms(p, u, h, i_stim):
    tau_in, tau_out, tau_close, tau_open, v_gate = p
    i_in = h * u * u * (1.0 - u) / tau_in
    i_out = -u / tau_out
    du = i_in + i_out + i_stim
    dh = (1.0 - h) / tau_open if u < v_gate else -h / tau_close
    return du, dh


def _rhs_mms(p, u, h, i_stim):
    tau_in, tau_out, tau_close, tau_open, v_gate = p
    i_in = h * u * (u - v_gate) * (1.0 - u) / tau_in
    i_out = -(1.0 - h) * u / tau_out
    du = i_in + i_out + i_stim
    dh = (1.0 - h) / tau_open if u < v_gate else -h / tau_close
    return du, dh


def _rhs_fk(p, u, v, w, i_stim):
    (tau_r, tau_si, tau_w_plus, tau_d, tau_v_plus, tau_v1_minus,
     tau_v2_minus, tau_w_minus, tau_0, k, u_c_si, u_c, u_v) = p
    if u < u_c:
        tau_v_minus = tau_v2_minus if u < u_v else tau_v1_minus
        dv = (1.0 - v) / tau_v_minus
        dw = (1.0 - w) / tau_w_minus
        i_fi = 0.0
        i_so = u / tau_0
    else:
        dv = -v / tau_v_plus
        dw = -w / tau_w_plus
        i_fi = -v / tau_d * (1.0 - u) * (u - u_c)
        i_so = 1.0 / tau_r
    i_si = -w / (2.0 * tau_si) * (1.0 + math.tanh(k * (u - u_c_si)))
    du = -(i_fi + i_so + i_si) + i_stim
    return du, dv, dw


def _rhs_bocf(p, u, v, w, s, i_stim):
    (theta_v, tau_v1_minus, tau_v2_minus, tau_v_plus, u_w_minus, tau_so1,
     k_so, tau_s1, tau_s2, k_s, tau_w1_minus, tau_w2_minus, tau_w1_plus,
     tau_fi, tau_o1, tau_o2, tau_so2, u_so, u_s, tau_si1, theta_w,
     theta_v_minus, theta_o, k_w_minus, tau_w_inf, w_inf_star, u_u) = p
    u_o = 0.0  # fixed; no catalog row

    if u < theta_v:
        v_inf = 1.0 if u < theta_v_minus else 0.0
        tau_v_minus = tau_v1_minus if u < theta_v_minus else tau_v2_minus
        dv = (v_inf - v) / tau_v_minus
        i_fi = 0.0
    else:
        dv = -v / tau_v_plus
        i_fi = -v * (u - theta_v) * (u_u - u) / tau_fi

    if u < theta_w:
        w_inf = 1.0 - u / tau_w_inf if u < theta_o else w_inf_star
        tau_w_minus = tau_w1_minus + (tau_w2_minus - tau_w1_minus) * (
            1.0 + math.tanh(k_w_minus * (u - u_w_minus))
        ) / 2.0
        dw = (w_inf - w) / tau_w_minus
        tau_o = tau_o1 if u < theta_o else tau_o2
        i_so = (u - u_o) / tau_o
        i_si = 0.0
        tau_s = tau_s1
    else:
        dw = -w / tau_w1_plus
        tau_so = tau_so1 + (tau_so2 - tau_so1) * (
            1.0 + math.tanh(k_so * (u - u_so))
        ) / 2.0
        i_so = 1.0 / tau_so
        i_si = -w * s / tau_si1
        tau_s = tau_s2

    ds = ((1.0 + math.tanh(k_s * (u - u_s))) / 2.0 - s) / tau_s
    du = -(i_fi + i_so + i_si) + i_stim
    return du, dv, dw, ds


def _rhs_bbocf(p, u, v, w, s, i_stim):
    (tau_v1_plus, tau_v1_minus, tau_v2_minus, tau_w1_plus, tau_w2_plus,
     tau_w1_minus, tau_w2_minus, tau_s1, tau_s2, tau_fi, tau_o1, tau_o2,
     tau_so1, tau_so2, tau_si1, tau_si2, tau_w_inf, theta_v, theta_v_minus,
     theta_v_inf, theta_w, theta_w_inf, theta_so, theta_si, theta_o, theta_s,
     k_w_plus, k_w_minus, k_s, k_so, k_si, u_w_minus, u_s, u_o, u_u, u_so,
     s_c, w_c_plus, w_inf_star) = p

    if u < theta_v:
        v_inf = 1.0 if u < theta_v_inf else 0.0
        tau_v_minus = tau_v1_minus if u < theta_v_minus else tau_v2_minus
        dv = (v_inf - v) / tau_v_minus
        i_fi = 0.0
    else:
        dv = -v / tau_v1_plus
        i_fi = -v * (u - theta_v) * (u_u - u) / tau_fi

    if u < theta_w:
        w_inf = 1.0 - u / tau_w_inf if u < theta_w_inf else w_inf_star
        tau_w_minus = tau_w1_minus + (tau_w2_minus - tau_w1_minus) * (
            1.0 + math.tanh(k_w_minus * (u - u_w_minus))
        ) / 2.0
        dw = (w_inf - w) / tau_w_minus
    else:
        # tau_w_plus is gate-dependent; the inner sum follows the published
        # form of this variant.
        tau_w_plus = tau_w1_plus + (tau_w2_plus + tau_w1_plus) * (
            1.0 + math.tanh(k_w_plus * (w - w_c_plus))
        ) / 2.0
        dw = -w / tau_w_plus

    if u < theta_so:
        tau_o = tau_o1 if u < theta_o else tau_o2
        i_so = (u - u_o) / tau_o
    else:
        tau_so = tau_so1 + (tau_so2 - tau_so1) * (
            1.0 + math.tanh(k_so * (u - u_so))
        ) / 2.0
        i_so = 1.0 / tau_so

    if u < theta_si:
        i_si = 0.0
    else:
        tau_si = tau_si1 + (tau_si2 + tau_si1) * (
            1.0 + math.tanh(k_si * (s - s_c))
        ) / 2.0
        i_si = -w * s / tau_si

    tau_s = tau_s1 if u < theta_s else tau_s2
    ds = ((1.0 + math.tanh(k_s * (u - u_s))) / 2.0 - s) / tau_s
    du = -(i_fi + i_so + i_si) + i_stim
    return du, dv, dw, ds


_RHS = {
    ModelId.MFHN: _rhs_mfhn,
    ModelId.MS: _rhs_ms,
    ModelId.MMS: _rhs_mms,
    ModelId.FK: _rhs_fk,
    ModelId.BOCF: _rhs_bocf,
    ModelId.BBOCF: _rhs_bbocf,
}


def rhs(
    model: ModelId | str,
    params: np.ndarray,
    state: CellState,
    i_stim: float = 0.0,
) -> CellState:
    """Evaluate the time derivative (per ms) of ``state``.

    Returns a ``CellState`` holding du/dt and the gate derivatives. The
    result is a pure function of the inputs; non-finite values propagate to
    the caller unchanged (the fitness layer treats them as worst-case).
    """
    mid = ModelId(model)
    spec = _SPECS[mid]
    p = tuple(float(x) for x in np.asarray(params, dtype=float))
    if len(p) != spec.n_parameters:
        raise ValueError(
            f"{mid.value} expects {spec.n_parameters} parameters, got {len(p)}"
        )
    derivs = _RHS[mid](p, state.u, *state.gates, float(i_stim))
    return CellState(derivs[0], tuple(derivs[1:]))
