// Wire types for the /ws session protocol. One JSON object per text frame;
// field names and semantics match the engine exactly.

export interface SoundParams {
  beat_volume: number;
  beat_rate_hz: number;
  beat_pitch_hz: number;
  timbre_mix: number;
  pad_volume: number;
  pad_pitch_hz: number;
}

export type ModelName = "beep1" | "beep2" | "rhythm" | "synth" | "sine";

export interface MetricsReport {
  dice: number;
  area_ratio: number;
  intercentroid_mm: number;
  crr: number | null;
}

export interface GroundTruth {
  vertices_mm: [number, number][];
  seed_mm: [number, number];
  seed_radius_mm: number;
}

export type ClientMsg =
  | { type: "start_session"; config?: Record<string, number>; session_id?: string; participant?: string }
  | { type: "start_trial"; model: ModelName; shape_id?: string }
  | { type: "probe"; x_mm: number; y_mm: number; t_ms: number }
  | { type: "mark_margin"; path: [number, number][] }
  | { type: "mark_seed"; x_mm: number; y_mm: number }
  | { type: "finish_trial" }
  | { type: "end_session" };

export type ServerMsg =
  | { type: "session_ack"; session_id: string; pool_meta: { n_shapes: number; shape_ids: string[]; board_mm: number } }
  | { type: "trial_ack"; trial_id: string; model: ModelName }
  | { type: "params"; t_ms: number; params: SoundParams }
  | { type: "score"; trial_id: string; report: MetricsReport; gt: GroundTruth }
  | { type: "ack"; of: string }
  | { type: "error"; code: string; message: string };

const SERVER_TYPES = new Set(["session_ack", "trial_ack", "params", "score", "ack", "error"]);

export function parseServerMsg(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const type = (doc as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) return null;
  return doc as ServerMsg;
}

export function serializeClientMsg(msg: ClientMsg): string {
  return JSON.stringify(msg);
}
