// UI state machine, DOM-free so it can be tested directly. Scoring is never
// computed here: every displayed number comes verbatim from the server's
// score message.

import type { GroundTruth, MetricsReport, ModelName, ServerMsg, SoundParams } from "./protocol.js";

export type DrawMode = "explore" | "draw-margin" | "place-seed";

export interface Reveal {
  report: MetricsReport;
  gt: GroundTruth;
  trialId: string;
}

export interface AudioControl {
  setEnabled(enabled: boolean, model: ModelName): void;
  onParams(params: SoundParams): void;
}

export class AppState {
  connected = false;
  sessionId: string | null = null;
  boardMm = 150;
  trialId: string | null = null;
  model: ModelName | null = null;
  mode: DrawMode = "explore";
  lastParams: SoundParams | null = null;
  marginPath: [number, number][] = [];
  seedMark: [number, number] | null = null;
  reveal: Reveal | null = null;
  lastError: string | null = null;

  constructor(private audio: AudioControl) {}

  get trialActive(): boolean {
    return this.trialId !== null;
  }

  onOpen(): void {
    this.connected = true;
    this.lastError = null;
  }

  onClose(): void {
    // connection loss stops the sound immediately
    this.connected = false;
    if (this.model) this.audio.setEnabled(false, this.model);
    this.trialId = null;
    this.lastParams = null;
  }

  onServerMsg(msg: ServerMsg): void {
    switch (msg.type) {
      case "session_ack":
        this.sessionId = msg.session_id;
        this.boardMm = msg.pool_meta.board_mm;
        break;
      case "trial_ack":
        this.trialId = msg.trial_id;
        this.model = msg.model;
        this.mode = "explore";
        this.marginPath = [];
        this.seedMark = null;
        this.reveal = null;
        this.audio.setEnabled(true, msg.model);
        break;
      case "params":
        if (this.trialActive) {
          this.lastParams = msg.params;
          this.audio.onParams(msg.params);
        }
        break;
      case "score":
        this.reveal = { report: msg.report, gt: msg.gt, trialId: msg.trial_id };
        if (this.model) this.audio.setEnabled(false, this.model);
        this.trialId = null;
        this.lastParams = null;
        this.mode = "explore";
        break;
      case "error":
        this.lastError = `${msg.code}: ${msg.message}`;
        break;
      case "ack":
        break;
    }
  }
}
