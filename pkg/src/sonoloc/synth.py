"""Offline sample-accurate rendering of parameter streams to PCM audio.

Sine beeps, modal-bar strikes (decaying sinusoidal modes standing in for
the marimba/xylophone/tick instruments), a continuous pad, and a beat
scheduler. Rendering is fully deterministic: no wall clock, no RNG.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import FormatError, ValidationError
from .sonification import ModelKind, ParamEvent, SoundParams

STRIKE_AMPLITUDE = 0.4
PAD_AMPLITUDE = 0.3
ATTACK_S = 0.002  # raised-cosine attack on every strike
TAIL_FADE_S = 0.005
SINE_BEEP_S = 0.060
SINE_BEEP_RELEASE_S = 0.010


@dataclass(frozen=True)
class RenderConfig:
    sample_rate_hz: int = 48000
    channels: int = 1
    bit_depth: int = 16
    pad_smoothing_tau_ms: float = 30.0

    def __post_init__(self):
        if self.sample_rate_hz < 8000:
            raise ValidationError("sample_rate_hz must be >= 8000")
        if self.channels != 1 or self.bit_depth != 16:
            raise ValidationError("only mono 16-bit output is supported")


@dataclass(frozen=True)
class ModalBarPatch:
    """Struck-bar voice: partial frequency ratios, gains and decay times."""

    freq_ratios: tuple[float, ...]
    gains: tuple[float, ...]
    decays_s: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.freq_ratios) == len(self.gains) == len(self.decays_s)):
            raise ValidationError("patch arrays must have equal length")
        if any(r < 1.0 for r in self.freq_ratios):
            raise ValidationError("freq ratios must be >= 1")
        if any(d <= 0.0 for d in self.decays_s):
            raise ValidationError("decays must be > 0")
        if any(not 0.0 < g <= 1.0 for g in self.gains):
            raise ValidationError("gains must lie in (0, 1]")


MARIMBA = ModalBarPatch(freq_ratios=(1.0, 3.99, 10.65), gains=(1.0, 0.4, 0.15), decays_s=(0.45, 0.2, 0.08))
XYLOPHONE = ModalBarPatch(freq_ratios=(1.0, 3.0, 9.2), gains=(1.0, 0.5, 0.2), decays_s=(0.25, 0.12, 0.05))
TICK = ModalBarPatch(
    freq_ratios=XYLOPHONE.freq_ratios,
    gains=XYLOPHONE.gains,
    decays_s=tuple(d * 0.4 for d in XYLOPHONE.decays_s),
)


class BeatInstrument(str, Enum):
    SINE_BEEP = "sine_beep"
    MODAL_BAR = "modal_bar"
    TICK = "tick"


def instrument_for(model: ModelKind) -> BeatInstrument:
    """Which beat voice a sonification model uses."""
    if model is ModelKind.BEEP1:
        return BeatInstrument.SINE_BEEP
    if model is ModelKind.SYNTH:
        return BeatInstrument.TICK
    return BeatInstrument.MODAL_BAR


@dataclass(frozen=True)
class PcmBuffer:
    samples: np.ndarray  # int16
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.int16)
        object.__setattr__(self, "samples", s)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def to_float(self) -> np.ndarray:
        return self.samples.astype(np.float64) / 32767.0


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.clip(x, -1.0, 1.0) * 32767.0), -32768, 32767).astype(np.int16)


def _interp_patch(a: ModalBarPatch, b: ModalBarPatch, mix: float) -> ModalBarPatch:
    lerp = lambda p, q: tuple(pi + (qi - pi) * mix for pi, qi in zip(p, q))
    return ModalBarPatch(
        freq_ratios=lerp(a.freq_ratios, b.freq_ratios),
        gains=lerp(a.gains, b.gains),
        decays_s=lerp(a.decays_s, b.decays_s),
    )


def _apply_attack_and_tail(buf: np.ndarray, fs: int) -> np.ndarray:
    na = min(int(round(ATTACK_S * fs)), len(buf))
    if na > 0:
        t = np.arange(na) / fs
        buf[:na] *= 0.5 - 0.5 * np.cos(np.pi * t / ATTACK_S)
    nt = min(int(round(TAIL_FADE_S * fs)), len(buf))
    if nt > 0:
        t = np.arange(nt) / fs
        buf[-nt:] *= 0.5 + 0.5 * np.cos(np.pi * t / TAIL_FADE_S)
    return buf


def _modal_strike_float(pitch_hz: float, patch: ModalBarPatch, gain: float, fs: int) -> np.ndarray:
    dur = ATTACK_S + 6.0 * max(patch.decays_s)
    n = int(math.ceil(dur * fs))
    t = np.arange(n) / fs
    buf = np.zeros(n)
    for ratio, g, decay in zip(patch.freq_ratios, patch.gains, patch.decays_s):
        buf += g * np.sin(2.0 * np.pi * pitch_hz * ratio * t) * np.exp(-t / decay)
    buf *= gain * STRIKE_AMPLITUDE
    return _apply_attack_and_tail(buf, fs)


def _sine_beep_float(pitch_hz: float, gain: float, fs: int) -> np.ndarray:
    n = int(math.ceil(SINE_BEEP_S * fs))
    t = np.arange(n) / fs
    buf = np.sin(2.0 * np.pi * pitch_hz * t) * (gain * STRIKE_AMPLITUDE)
    na = int(round(ATTACK_S * fs))
    if na > 0:
        ta = np.arange(na) / fs
        buf[:na] *= 0.5 - 0.5 * np.cos(np.pi * ta / ATTACK_S)
    nr = int(round(SINE_BEEP_RELEASE_S * fs))
    if nr > 0:
        tr = np.arange(nr) / fs
        buf[-nr:] *= 0.5 + 0.5 * np.cos(np.pi * tr / SINE_BEEP_RELEASE_S)
    return buf


def strike(
    pitch_hz: float,
    timbre_mix: float,
    gain: float,
    cfg: RenderConfig,
    dark: ModalBarPatch = MARIMBA,
    bright: ModalBarPatch = XYLOPHONE,
) -> PcmBuffer:
    """Single modal-bar strike; per-mode parameters interpolate dark->bright
    by timbre_mix (0 = pure marimba, 1 = pure xylophone)."""
    if not pitch_hz > 0:
        raise ValidationError("pitch must be > 0")
    patch = _interp_patch(dark, bright, float(timbre_mix))
    return PcmBuffer(
        samples=_quantize(_modal_strike_float(pitch_hz, patch, gain, cfg.sample_rate_hz)),
        sample_rate=cfg.sample_rate_hz,
    )


def _check_stream(events: list[ParamEvent]) -> None:
    prev = None
    for ev in events:
        if ev.t_ms < 0:
            raise ValidationError("event timestamps must be >= 0")
        if prev is not None and ev.t_ms <= prev:
            raise ValidationError("events must be sorted with strictly increasing t_ms")
        prev = ev.t_ms


def beat_onset_times(events: list[ParamEvent], duration_s: float) -> list[tuple[float, SoundParams]]:
    """Onset times: inter-onset interval equals 1/beat_rate at the previous
    onset; a rate change takes effect from the next onset."""
    if not events:
        return []
    times = [ev.t_ms / 1000.0 for ev in events]
    onsets = []
    i = 0
    t = times[0]
    anchor = t
    k = 0
    cur_rate = None  # onsets at anchor + k/rate: no cumulative float drift
    while t < duration_s:
        while i + 1 < len(times) and times[i + 1] <= t:
            i += 1
        p = events[i].params
        if p.beat_rate_hz > 0.0:
            if p.beat_rate_hz != cur_rate:
                anchor = t
                k = 0
                cur_rate = p.beat_rate_hz
            if p.beat_volume > 0.0:
                onsets.append((t, p))
            k += 1
            t = anchor + k / cur_rate
        else:
            cur_rate = None
            nxt = None
            for j in range(i + 1, len(times)):
                if times[j] > t:
                    nxt = times[j]
                    break
            if nxt is None:
                break
            t = nxt
    return onsets


def _render_pad(events: list[ParamEvent], n: int, cfg: RenderConfig) -> np.ndarray:
    fs = cfg.sample_rate_hz
    out = np.zeros(n)
    if not events:
        return out
    alpha = math.exp(-1.0 / (cfg.pad_smoothing_tau_ms / 1000.0 * fs))
    bounds = [min(max(int(round(ev.t_ms / 1000.0 * fs)), 0), n) for ev in events]
    bounds.append(n)
    vol = 0.0
    phase = 0.0
    for k, ev in enumerate(events):
        lo, hi = bounds[k], bounds[k + 1]
        if hi <= lo:
            continue
        steps = np.arange(1, hi - lo + 1, dtype=np.float64)
        target = ev.params.pad_volume
        vols = target + (vol - target) * np.power(alpha, steps)
        phases = phase + 2.0 * np.pi * ev.params.pad_pitch_hz / fs * steps
        out[lo:hi] = PAD_AMPLITUDE * vols * np.sin(phases)
        vol = float(vols[-1])
        phase = math.fmod(float(phases[-1]), 2.0 * np.pi)
    return out


def render(
    events: list[ParamEvent],
    duration_s: float,
    cfg: RenderConfig,
    instrument: BeatInstrument = BeatInstrument.MODAL_BAR,
) -> PcmBuffer:
    """Mix the scheduled beat voice and the smoothed continuous pad."""
    if not duration_s > 0:
        raise ValidationError("duration must be > 0")
    _check_stream(events)
    fs = cfg.sample_rate_hz
    n = int(round(duration_s * fs))
    mix = _render_pad(events, n, cfg)
    for t_on, p in beat_onset_times(events, duration_s):
        if instrument is BeatInstrument.SINE_BEEP:
            voice = _sine_beep_float(p.beat_pitch_hz, p.beat_volume, fs)
        elif instrument is BeatInstrument.TICK:
            voice = _modal_strike_float(p.beat_pitch_hz, TICK, p.beat_volume, fs)
        else:
            patch = _interp_patch(MARIMBA, XYLOPHONE, p.timbre_mix)
            voice = _modal_strike_float(p.beat_pitch_hz, patch, p.beat_volume, fs)
        s0 = int(round(t_on * fs))
        s1 = min(s0 + len(voice), n)
        if s1 > s0:
            mix[s0:s1] += voice[: s1 - s0]
    return PcmBuffer(samples=_quantize(mix), sample_rate=fs)


def write_wav(buf: PcmBuffer, path) -> None:
    """Mono 16-bit PCM RIFF/WAVE, little-endian; byte-stable across runs."""
    data = buf.samples.astype("<i2").tobytes()
    byte_rate = buf.sample_rate * 2
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,  # fmt chunk size
        1,  # PCM
        1,  # mono
        buf.sample_rate,
        byte_rate,
        2,  # block align
        16,  # bits per sample
        b"data",
        len(data),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def write_param_log(events: list[ParamEvent], path) -> None:
    """Parameter event log as JSON Lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps({"t_ms": ev.t_ms, "params": ev.params.to_dict()}) + "\n")


def read_param_log(path) -> list[ParamEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                events.append(ParamEvent(t_ms=float(doc["t_ms"]), params=SoundParams.from_dict(doc["params"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad param event: {exc}") from exc
    return events
