// Client-side synthesis from streamed sound parameters: a continuous pad
// (gain smoothed with a 30 ms time constant) plus scheduled strikes built
// from decaying sinusoidal modes. Patch constants mirror the engine's
// offline renderer so the live sound matches rendered replays.

import { BeatScheduler, Strike } from "./beatScheduler.js";
import type { ModelName, SoundParams } from "./protocol.js";

export interface ModalPatch {
  ratios: number[];
  gains: number[];
  decaysS: number[];
}

export const MARIMBA: ModalPatch = { ratios: [1.0, 3.99, 10.65], gains: [1.0, 0.4, 0.15], decaysS: [0.45, 0.2, 0.08] };
export const XYLOPHONE: ModalPatch = { ratios: [1.0, 3.0, 9.2], gains: [1.0, 0.5, 0.2], decaysS: [0.25, 0.12, 0.05] };
export const TICK: ModalPatch = { ...XYLOPHONE, decaysS: XYLOPHONE.decaysS.map((d) => d * 0.4) };

export const STRIKE_AMPLITUDE = 0.4;
export const PAD_AMPLITUDE = 0.3;
export const PAD_TAU_S = 0.03;
const ATTACK_S = 0.002;
const SINE_BEEP_S = 0.06;

export type Instrument = "sine_beep" | "modal_bar" | "tick";

export function instrumentFor(model: ModelName): Instrument {
  if (model === "beep1") return "sine_beep";
  if (model === "synth") return "tick";
  return "modal_bar";
}

export function interpPatch(a: ModalPatch, b: ModalPatch, mix: number): ModalPatch {
  const lerp = (p: number[], q: number[]) => p.map((v, i) => v + (q[i] - v) * mix);
  return { ratios: lerp(a.ratios, b.ratios), gains: lerp(a.gains, b.gains), decaysS: lerp(a.decaysS, b.decaysS) };
}

export class AudioEngine {
  private ctx: AudioContext | null = null;
  private padOsc: OscillatorNode | null = null;
  private padGain: GainNode | null = null;
  private master: GainNode | null = null;
  private scheduler = new BeatScheduler();
  private instrument: Instrument = "modal_bar";
  private enabled = false;
  private pump: number | null = null;

  /** The factory is injectable so tests can run without a real device. */
  constructor(private ctxFactory: () => AudioContext = () => new AudioContext()) {}

  /** Create the context on a user gesture (autoplay policies). */
  ensureContext(): void {
    if (this.ctx) return;
    this.ctx = this.ctxFactory();
    this.master = this.ctx.createGain();
    this.master.gain.value = 1.0;
    this.master.connect(this.ctx.destination);
    this.padGain = this.ctx.createGain();
    this.padGain.gain.value = 0.0;
    this.padGain.connect(this.master);
    this.padOsc = this.ctx.createOscillator();
    this.padOsc.type = "sine";
    this.padOsc.frequency.value = 261.63;
    this.padOsc.connect(this.padGain);
    this.padOsc.start();
  }

  /** Audio is silent unless a trial is active. */
  setEnabled(enabled: boolean, instrument: Instrument = "modal_bar"): void {
    this.enabled = enabled;
    this.instrument = instrument;
    this.scheduler.reset();
    if (!enabled && this.ctx && this.padGain) {
      this.padGain.gain.setTargetAtTime(0.0, this.ctx.currentTime, PAD_TAU_S);
    }
    if (enabled) {
      this.ensureContext();
      void this.ctx?.resume();
      if (this.pump === null) {
        this.pump = setInterval(() => this.tick(), 25) as unknown as number;
      }
    } else if (this.pump !== null) {
      clearInterval(this.pump);
      this.pump = null;
    }
  }

  onParams(params: SoundParams): void {
    if (!this.enabled || !this.ctx || !this.padGain || !this.padOsc) return;
    const now = this.ctx.currentTime;
    this.padOsc.frequency.setValueAtTime(params.pad_pitch_hz, now);
    this.padGain.gain.setTargetAtTime(params.pad_volume * PAD_AMPLITUDE, now, PAD_TAU_S);
    for (const strike of this.scheduler.advanceTo(now)) {
      this.playStrike(strike, now);
    }
    this.scheduler.setParams(now, params);
    this.tick();
  }

  private tick(): void {
    if (!this.enabled || !this.ctx) return;
    const horizon = this.ctx.currentTime + 0.1;
    for (const strike of this.scheduler.advanceTo(horizon)) {
      this.playStrike(strike, Math.max(strike.timeS, this.ctx.currentTime));
    }
  }

  private playStrike(strike: Strike, whenS: number): void {
    if (!this.ctx || !this.master) return;
    if (this.instrument === "sine_beep") {
      this.playSineBeep(strike, whenS);
      return;
    }
    const patch =
      this.instrument === "tick" ? TICK : interpPatch(MARIMBA, XYLOPHONE, strike.timbreMix);
    const maxDecay = Math.max(...patch.decaysS);
    for (let i = 0; i < patch.ratios.length; i++) {
      const osc = this.ctx.createOscillator();
      osc.type = "sine";
      osc.frequency.value = strike.pitchHz * patch.ratios[i];
      const gain = this.ctx.createGain();
      const peak = strike.gain * STRIKE_AMPLITUDE * patch.gains[i];
      gain.gain.setValueAtTime(0.0, whenS);
      gain.gain.linearRampToValueAtTime(peak, whenS + ATTACK_S);
      gain.gain.setTargetAtTime(0.0, whenS + ATTACK_S, patch.decaysS[i]);
      osc.connect(gain);
      gain.connect(this.master);
      osc.start(whenS);
      osc.stop(whenS + ATTACK_S + 6 * maxDecay);
    }
  }

  private playSineBeep(strike: Strike, whenS: number): void {
    if (!this.ctx || !this.master) return;
    const osc = this.ctx.createOscillator();
    osc.type = "sine";
    osc.frequency.value = strike.pitchHz;
    const gain = this.ctx.createGain();
    const peak = strike.gain * STRIKE_AMPLITUDE;
    gain.gain.setValueAtTime(0.0, whenS);
    gain.gain.linearRampToValueAtTime(peak, whenS + ATTACK_S);
    gain.gain.setValueAtTime(peak, whenS + SINE_BEEP_S - 0.01);
    gain.gain.linearRampToValueAtTime(0.0, whenS + SINE_BEEP_S);
    osc.connect(gain);
    gain.connect(this.master);
    osc.start(whenS);
    osc.stop(whenS + SINE_BEEP_S + 0.005);
  }
}
