"""Distance features to sound parameters for the five sonification models.

Mappings are deterministic pure functions, continuous except at the
intentional zone gates (tumor pad on/off, seed tick zone, beat range).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum

from .errors import ValidationError
from .geometry import DistanceFeatures


class ModelKind(str, Enum):
    BEEP1 = "beep1"  # 440 Hz sine beeps, seed distance only
    BEEP2 = "beep2"  # 200 Hz modal-bar beeps, seed distance only
    RHYTHM = "rhythm"  # constant beat, marimba<->xylophone timbre
    SYNTH = "synth"  # gated pad + seed-zone tick
    SINE = "sine"  # beat like BEEP2 + gated pad


@dataclass(frozen=True)
class SoundParams:
    """Per-model control outputs streamed to the synthesizer or UI client."""

    beat_volume: float = 0.0
    beat_rate_hz: float = 0.0
    beat_pitch_hz: float = 440.0
    timbre_mix: float = 0.0  # 0 = marimba, 1 = xylophone
    pad_volume: float = 0.0
    pad_pitch_hz: float = 261.63

    def __post_init__(self):
        if not (0.0 <= self.beat_volume <= 1.0 and 0.0 <= self.pad_volume <= 1.0):
            raise ValidationError("volumes must lie in [0, 1]")
        if not 0.0 <= self.timbre_mix <= 1.0:
            raise ValidationError("timbre_mix must lie in [0, 1]")
        if self.beat_rate_hz < 0.0:
            raise ValidationError("beat_rate_hz must be >= 0")
        if not (self.beat_pitch_hz > 0.0 and self.pad_pitch_hz > 0.0):
            raise ValidationError("pitches must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SoundParams":
        return cls(**d)


@dataclass(frozen=True)
class MappingConfig:
    """Constants of the feature-to-sound mappings.

    Pitches follow the instrument choices of the sound models; range and
    rate constants are engine parameters and travel with every session
    record so scoring and replay stay reproducible.
    """

    range_mm: float = 80.0
    beat_rate_min_hz: float = 1.5
    beat_rate_max_hz: float = 10.0
    rhythm_rate_hz: float = 4.0
    tick_rate_hz: float = 6.0
    seed_zone_mm: float = 10.0
    beep1_pitch_hz: float = 440.0
    beep2_pitch_hz: float = 200.0
    rhythm_pitch_hz: float = 330.0
    tick_pitch_hz: float = 660.0
    pad_pitch_hz: float = 261.63  # C4
    smoothing_tau_ms: float = 30.0

    def __post_init__(self):
        if not self.range_mm > 0:
            raise ValidationError("range_mm must be > 0")
        if not (self.beat_rate_max_hz > self.beat_rate_min_hz > 0):
            raise ValidationError("need beat_rate_max_hz > beat_rate_min_hz > 0")
        if not self.seed_zone_mm > 0:
            raise ValidationError("seed_zone_mm must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MappingConfig":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MappingConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ParamEvent:
    """Timestamped sound parameters; streams keep t_ms strictly increasing."""

    t_ms: float
    params: SoundParams


def _proximity(d_mm: float, cfg: MappingConfig) -> float:
    return 1.0 - min(max(d_mm / cfg.range_mm, 0.0), 1.0)


def _rate(d_mm: float, cfg: MappingConfig) -> float:
    p = _proximity(d_mm, cfg)
    return cfg.beat_rate_min_hz + (cfg.beat_rate_max_hz - cfg.beat_rate_min_hz) * p * p


def map_params(model: ModelKind, f: DistanceFeatures, cfg: MappingConfig) -> SoundParams:
    """Map distance features to sound parameters for the given model."""
    if not isinstance(f, DistanceFeatures):
        raise ValidationError("expected DistanceFeatures")
    d_seed = f.d_seed_mm
    d_margin = f.d_margin_mm

    if model in (ModelKind.BEEP1, ModelKind.BEEP2):
        pitch = cfg.beep1_pitch_hz if model is ModelKind.BEEP1 else cfg.beep2_pitch_hz
        return SoundParams(
            beat_volume=1.0 if d_seed <= cfg.range_mm else 0.0,
            beat_rate_hz=_rate(d_seed, cfg),
            beat_pitch_hz=pitch,
            timbre_mix=0.0,
            pad_volume=0.0,
            pad_pitch_hz=cfg.pad_pitch_hz,
        )

    if model is ModelKind.RHYTHM:
        if f.inside:
            # marimba at the margin, xylophone at the seed, interpolated between
            denom = abs(d_margin) + d_seed
            timbre = 1.0 if d_seed == 0.0 else abs(d_margin) / denom
            volume = 1.0
        else:
            timbre = 0.0
            volume = _proximity(d_margin, cfg)
        return SoundParams(
            beat_volume=volume,
            beat_rate_hz=cfg.rhythm_rate_hz,
            beat_pitch_hz=cfg.rhythm_pitch_hz,
            timbre_mix=timbre,
            pad_volume=0.0,
            pad_pitch_hz=cfg.pad_pitch_hz,
        )

    if model is ModelKind.SYNTH:
        in_zone = d_seed <= cfg.seed_zone_mm
        return SoundParams(
            beat_volume=1.0 - d_seed / cfg.seed_zone_mm if in_zone else 0.0,
            beat_rate_hz=cfg.tick_rate_hz,
            beat_pitch_hz=cfg.tick_pitch_hz,
            timbre_mix=0.0,
            pad_volume=1.0 if f.inside else 0.0,
            pad_pitch_hz=cfg.pad_pitch_hz,
        )

    if model is ModelKind.SINE:
        return SoundParams(
            beat_volume=1.0 if d_seed <= cfg.range_mm else 0.0,
            beat_rate_hz=_rate(d_seed, cfg),
            beat_pitch_hz=cfg.beep2_pitch_hz,
            timbre_mix=0.0,
            pad_volume=1.0 if f.inside else 0.0,
            pad_pitch_hz=cfg.pad_pitch_hz,
        )

    raise ValidationError(f"unknown model {model!r}")


def smooth(events: list[ParamEvent], tau_ms: float = 30.0) -> list[ParamEvent]:
    """Exponentially smooth volumes and timbre along an event stream.

    Rates and pitches pass through unchanged. The input is treated as a
    zero-order hold: the value at event i drives the filter over
    [t_i, t_i+1), so a 0 -> 1 gate reaches 1 - e^-1 one tau later and 99%
    within 5 tau.
    """
    if tau_ms <= 0:
        raise ValidationError("tau_ms must be > 0")
    out: list[ParamEvent] = []
    prev_t = None
    prev_x = None  # raw input that drives the filter over the interval
    y_beat = y_pad = y_timbre = 0.0
    for ev in events:
        if prev_t is not None and ev.t_ms <= prev_t:
            raise ValidationError("timestamps must be strictly increasing")
        if prev_t is None:
            y_beat = ev.params.beat_volume
            y_pad = ev.params.pad_volume
            y_timbre = ev.params.timbre_mix
        else:
            k = math.exp(-(ev.t_ms - prev_t) / tau_ms)
            y_beat = prev_x.beat_volume + (y_beat - prev_x.beat_volume) * k
            y_pad = prev_x.pad_volume + (y_pad - prev_x.pad_volume) * k
            y_timbre = prev_x.timbre_mix + (y_timbre - prev_x.timbre_mix) * k
        out.append(
            ParamEvent(
                t_ms=ev.t_ms,
                params=SoundParams(
                    beat_volume=y_beat,
                    beat_rate_hz=ev.params.beat_rate_hz,
                    beat_pitch_hz=ev.params.beat_pitch_hz,
                    timbre_mix=y_timbre,
                    pad_volume=y_pad,
                    pad_pitch_hz=ev.params.pad_pitch_hz,
                ),
            )
        )
        prev_t = ev.t_ms
        prev_x = ev.params
    return out
