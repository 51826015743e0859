"""Rendering laws: onset counts, determinism, energy, WAV format."""

import math
import wave

import numpy as np
import pytest

from sonoloc.errors import ValidationError
from sonoloc.sonification import ParamEvent, SoundParams
from sonoloc.synth import (
    MARIMBA,
    PAD_AMPLITUDE,
    TICK,
    XYLOPHONE,
    BeatInstrument,
    ModalBarPatch,
    PcmBuffer,
    RenderConfig,
    beat_onset_times,
    instrument_for,
    read_param_log,
    render,
    strike,
    write_param_log,
    write_wav,
)
from sonoloc.sonification import ModelKind

CFG = RenderConfig()


def ev(t_ms, beat_volume=0.0, beat_rate=0.0, beat_pitch=200.0, timbre=0.0, pad_volume=0.0, pad_pitch=261.63):
    return ParamEvent(
        t_ms=t_ms,
        params=SoundParams(
            beat_volume=beat_volume,
            beat_rate_hz=beat_rate,
            beat_pitch_hz=beat_pitch,
            timbre_mix=timbre,
            pad_volume=pad_volume,
            pad_pitch_hz=pad_pitch,
        ),
    )


def rms(buf: PcmBuffer) -> float:
    x = buf.to_float()
    return float(np.sqrt((x * x).mean()))


def test_strike_zero_gain_is_silence():
    buf = strike(330.0, 0.5, 0.0, CFG)
    assert np.array_equal(buf.samples, np.zeros_like(buf.samples))


def test_strike_timbre_zero_equals_pure_marimba():
    a = strike(330.0, 0.0, 1.0, CFG)
    b = strike(330.0, 0.0, 1.0, CFG, dark=MARIMBA, bright=MARIMBA)
    assert np.array_equal(a.samples, b.samples)


def test_strike_spectral_peak_at_fundamental():
    buf = strike(440.0, 0.0, 1.0, CFG)
    x = buf.to_float()
    spectrum = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), 1.0 / CFG.sample_rate_hz)
    peak = freqs[int(np.argmax(spectrum))]
    bin_width = CFG.sample_rate_hz / len(x)
    assert abs(peak - 440.0) <= 2 * bin_width


def test_strike_rejects_bad_pitch():
    with pytest.raises(ValidationError):
        strike(0.0, 0.0, 1.0, CFG)


def test_patch_validation():
    with pytest.raises(ValidationError):
        ModalBarPatch(freq_ratios=(0.5,), gains=(1.0,), decays_s=(0.1,))
    assert TICK.decays_s == tuple(d * 0.4 for d in XYLOPHONE.decays_s)


def test_onset_count_4hz_2s():
    events = [ev(0.0, beat_volume=1.0, beat_rate=4.0)]
    onsets = beat_onset_times(events, 2.0)
    assert len(onsets) == 8


@pytest.mark.parametrize("rate", [1.5, 4.0, 6.0, 10.0])
@pytest.mark.parametrize("duration", [1.0, 2.0, 5.0])
def test_onset_count_law(rate, duration):
    events = [ev(0.0, beat_volume=1.0, beat_rate=rate)]
    n = len(beat_onset_times(events, duration))
    assert n in (math.floor(rate * duration), math.ceil(rate * duration))


def test_rate_change_applies_from_next_onset():
    events = [ev(0.0, beat_volume=1.0, beat_rate=2.0), ev(1000.0, beat_volume=1.0, beat_rate=10.0)]
    onsets = [t for t, _ in beat_onset_times(events, 1.55)]
    assert onsets == pytest.approx([0.0, 0.5, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5], abs=1e-12)


def test_silent_onsets_are_skipped_but_clock_advances():
    events = [ev(0.0, beat_volume=0.0, beat_rate=4.0), ev(990.0, beat_volume=1.0, beat_rate=4.0)]
    onsets = [t for t, _ in beat_onset_times(events, 2.0)]
    assert onsets == pytest.approx([1.0, 1.25, 1.5, 1.75], abs=1e-12)


def test_render_all_zero_volumes_is_digital_silence():
    events = [ev(0.0, beat_rate=4.0), ev(500.0, beat_rate=6.0)]
    buf = render(events, 1.0, CFG)
    assert not buf.samples.any()


def test_render_length_matches_duration():
    buf = render([ev(0.0)], 1.25, CFG)
    assert len(buf.samples) == round(1.25 * CFG.sample_rate_hz)


def test_pad_rms_scales_linearly_with_volume():
    full = render([ev(0.0, pad_volume=1.0)], 2.0, CFG)
    half = render([ev(0.0, pad_volume=0.5)], 2.0, CFG)
    assert rms(half) / rms(full) == pytest.approx(0.5, rel=0.01)


def test_beat_rms_monotone_in_volume():
    levels = [0.2, 0.4, 0.6, 0.8, 1.0]
    values = []
    for v in levels:
        buf = render([ev(0.0, beat_volume=v, beat_rate=4.0)], 2.0, CFG)
        values.append(rms(buf))
    assert all(a < b for a, b in zip(values, values[1:]))


def test_pad_gate_has_no_hard_clicks():
    events = [ev(0.0, pad_volume=0.0), ev(500.0, pad_volume=1.0), ev(1500.0, pad_volume=0.0)]
    buf = render(events, 2.5, CFG)
    x = buf.to_float()
    fs = CFG.sample_rate_hz
    alpha = math.exp(-1.0 / (CFG.pad_smoothing_tau_ms / 1000.0 * fs))
    bound = PAD_AMPLITUDE * (2 * math.pi * 261.63 / fs) + PAD_AMPLITUDE * (1 - alpha) + 2 / 32767.0
    assert np.abs(np.diff(x)).max() <= bound


def test_render_rejects_unsorted_events():
    events = [ev(10.0), ev(5.0)]
    with pytest.raises(ValidationError):
        render(events, 1.0, CFG)


def test_render_deterministic_bytes(tmp_path):
    events = [
        ev(0.0, beat_volume=1.0, beat_rate=3.0, pad_volume=1.0),
        ev(700.0, beat_volume=0.5, beat_rate=8.0, timbre=0.6, pad_volume=0.2),
    ]
    p1 = tmp_path / "a.wav"
    p2 = tmp_path / "b.wav"
    write_wav(render(events, 2.0, CFG), p1)
    write_wav(render(events, 2.0, CFG), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_wav_header_and_data_chunk(tmp_path):
    buf = render([ev(0.0, pad_volume=1.0)], 1.0, CFG)
    path = tmp_path / "tone.wav"
    write_wav(buf, path)
    raw = path.read_bytes()
    assert raw[:4] == b"RIFF" and raw[8:12] == b"WAVE"
    assert int.from_bytes(raw[16:20], "little") == 16  # fmt chunk size
    assert int.from_bytes(raw[20:22], "little") == 1  # PCM
    assert int.from_bytes(raw[40:44], "little") == 96000  # 2 bytes x 48000 samples

    with wave.open(str(path), "rb") as wf:  # independent stdlib parser
        assert wf.getnchannels() == 1
        assert wf.getsampwidth() == 2
        assert wf.getframerate() == 48000
        assert wf.getnframes() == 48000


def test_instrument_per_model():
    assert instrument_for(ModelKind.BEEP1) is BeatInstrument.SINE_BEEP
    assert instrument_for(ModelKind.BEEP2) is BeatInstrument.MODAL_BAR
    assert instrument_for(ModelKind.RHYTHM) is BeatInstrument.MODAL_BAR
    assert instrument_for(ModelKind.SYNTH) is BeatInstrument.TICK
    assert instrument_for(ModelKind.SINE) is BeatInstrument.MODAL_BAR


def test_sine_beep_instrument_renders():
    events = [ev(0.0, beat_volume=1.0, beat_rate=2.0, beat_pitch=440.0)]
    buf = render(events, 1.0, CFG, instrument=BeatInstrument.SINE_BEEP)
    assert rms(buf) > 0


def test_param_log_roundtrip(tmp_path):
    events = [ev(0.0, beat_volume=1.0, beat_rate=4.0), ev(12.5, pad_volume=0.25)]
    path = tmp_path / "params.jsonl"
    write_param_log(events, path)
    back = read_param_log(path)
    assert back == events
