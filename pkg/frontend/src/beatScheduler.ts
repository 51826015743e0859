// Beat onset scheduler. Inter-onset interval is 1/beat_rate at the previous
// onset; a rate change takes effect from the next onset; onsets with zero
// beat volume are skipped but still advance the clock. Onset times are
// computed as anchor + k/rate so constant-rate stretches carry no float
// drift. Time unit is seconds on whatever clock the caller advances.

import type { SoundParams } from "./protocol.js";

export interface Strike {
  timeS: number;
  pitchHz: number;
  gain: number;
  timbreMix: number;
}

export class BeatScheduler {
  private params: SoundParams | null = null;
  private anchorS = 0;
  private k = 0;
  private rate = 0;
  private nextOnsetS: number | null = null;

  /** Apply a parameter update at `timeS`. Must be called in time order,
   * after advanceTo(timeS). */
  setParams(timeS: number, params: SoundParams): void {
    const firstEver = this.params === null;
    this.params = params;
    if (params.beat_rate_hz <= 0) {
      this.nextOnsetS = null;
      this.rate = 0;
      return;
    }
    if (firstEver || this.nextOnsetS === null) {
      // beat (re)starts at this update
      this.anchorS = timeS;
      this.k = 0;
      this.rate = params.beat_rate_hz;
      this.nextOnsetS = timeS;
    }
    // an already-scheduled next onset keeps its time; the new rate is
    // picked up when that onset fires
  }

  /** Collect every onset strictly before `timeS`. */
  advanceTo(timeS: number): Strike[] {
    const out: Strike[] = [];
    while (this.nextOnsetS !== null && this.params !== null && this.nextOnsetS < timeS) {
      const t = this.nextOnsetS;
      const p = this.params;
      if (p.beat_rate_hz !== this.rate) {
        this.anchorS = t;
        this.k = 0;
        this.rate = p.beat_rate_hz;
      }
      if (p.beat_volume > 0) {
        out.push({ timeS: t, pitchHz: p.beat_pitch_hz, gain: p.beat_volume, timbreMix: p.timbre_mix });
      }
      this.k += 1;
      this.nextOnsetS = this.anchorS + this.k / this.rate;
    }
    return out;
  }

  reset(): void {
    this.params = null;
    this.nextOnsetS = null;
    this.k = 0;
    this.rate = 0;
  }
}
