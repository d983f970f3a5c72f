"""Square and biphasic stimulus currents."""

import numpy as np
import pytest

from apfit.stimulus import BiphasicStimulus, SquareStimulus, stimulus_current


def test_square_default_values():
    stim = SquareStimulus()
    assert stim.magnitude == 0.2
    assert stim.duration == 2.0
    assert stimulus_current(stim, 1.0) == 0.2
    assert stimulus_current(stim, 2.5) == 0.0
    assert stimulus_current(stim, 2.0) == 0.0  # boundary: past duration


def test_biphasic_default_values():
    stim = BiphasicStimulus()
    assert (stim.i_mag, stim.a, stim.b, stim.c, stim.duration) == \
        (0.4, 0.725, 7.0, 6.72, 10.0)


def test_biphasic_zero_at_offset_b():
    stim = BiphasicStimulus()
    assert stimulus_current(stim, stim.a * stim.b) == pytest.approx(
        0.0, abs=1e-9)


def test_biphasic_value_at_offset_c():
    # numerator (c - b) = -0.28, denominator 1, so -0.4 * -0.28 = +0.112
    stim = BiphasicStimulus()
    assert stimulus_current(stim, stim.a * stim.c) == pytest.approx(
        0.112, abs=1e-9)


@pytest.mark.parametrize("stim", [SquareStimulus(), BiphasicStimulus()])
def test_zero_past_duration(stim):
    for t in np.linspace(stim.duration, stim.duration + 100, 57):
        assert stimulus_current(stim, float(t)) == 0.0


def test_biphasic_single_sign_change():
    # positive while t/a < b, negative after, exactly one change in (0, dur)
    stim = BiphasicStimulus()
    t = np.linspace(1e-6, stim.duration - 1e-6, 20000)
    values = np.array([stimulus_current(stim, float(x)) for x in t])
    signs = np.sign(values)
    changes = np.count_nonzero(np.diff(signs))
    assert changes == 1
    assert np.all(values[t / stim.a < stim.b - 1e-9] > 0)
    assert np.all(values[t / stim.a > stim.b + 1e-9] < 0)


def test_stimulus_is_pure():
    stim = BiphasicStimulus()
    assert stimulus_current(stim, 3.3) == stimulus_current(stim, 3.3)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        stimulus_current(SquareStimulus(), -0.1)


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        SquareStimulus(duration=0.0)
    with pytest.raises(ValueError):
        SquareStimulus(magnitude=-0.1)
    with pytest.raises(ValueError):
        BiphasicStimulus(a=0.0)
