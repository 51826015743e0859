import { describe, expect, it } from "vitest";

import { parseServerMsg, serializeClientMsg } from "../src/protocol.js";
import { RateLimiter } from "../src/wsClient.js";
import { instrumentFor, interpPatch, MARIMBA, XYLOPHONE } from "../src/audioEngine.js";

describe("protocol parsing", () => {
  it("accepts well-formed server messages", () => {
    const msg = parseServerMsg('{"type":"ack","of":"mark_seed"}');
    expect(msg).toEqual({ type: "ack", of: "mark_seed" });
  });

  it("rejects junk and unknown types", () => {
    expect(parseServerMsg("{nope")).toBeNull();
    expect(parseServerMsg('"just a string"')).toBeNull();
    expect(parseServerMsg('{"type":"warp"}')).toBeNull();
  });

  it("serializes client messages as single JSON objects", () => {
    const raw = serializeClientMsg({ type: "probe", x_mm: 1.5, y_mm: 2.25, t_ms: 10 });
    expect(JSON.parse(raw)).toEqual({ type: "probe", x_mm: 1.5, y_mm: 2.25, t_ms: 10 });
  });
});

describe("probe throttling", () => {
  it("caps the send rate at the configured maximum", () => {
    let now = 0;
    const gate = new RateLimiter(120, () => now);
    let sent = 0;
    for (let i = 0; i < 1000; i++) {
      now = i; // pointer events every 1 ms
      if (gate.allow()) sent++;
    }
    // 1000 ms at <= 120 Hz
    expect(sent).toBeLessThanOrEqual(120);
    expect(sent).toBeGreaterThanOrEqual(100);
  });
});

describe("instrument mapping", () => {
  it("matches the engine's per-model instruments", () => {
    expect(instrumentFor("beep1")).toBe("sine_beep");
    expect(instrumentFor("beep2")).toBe("modal_bar");
    expect(instrumentFor("rhythm")).toBe("modal_bar");
    expect(instrumentFor("synth")).toBe("tick");
    expect(instrumentFor("sine")).toBe("modal_bar");
  });

  it("interpolates patches endpoint-exactly", () => {
    expect(interpPatch(MARIMBA, XYLOPHONE, 0)).toEqual(MARIMBA);
    expect(interpPatch(MARIMBA, XYLOPHONE, 1)).toEqual(XYLOPHONE);
    const mid = interpPatch(MARIMBA, XYLOPHONE, 0.5);
    expect(mid.ratios[1]).toBeCloseTo((3.99 + 3.0) / 2, 12);
  });
});
