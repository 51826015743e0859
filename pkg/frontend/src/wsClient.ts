// Thin WebSocket wrapper with probe throttling.

import { ClientMsg, ServerMsg, parseServerMsg, serializeClientMsg } from "./protocol.js";

/** Keeps pointer-move probes at or under a maximum rate. */
export class RateLimiter {
  private lastMs = -Infinity;

  constructor(private maxHz: number, private now: () => number = () => performance.now()) {}

  allow(): boolean {
    const t = this.now();
    if (t - this.lastMs < 1000 / this.maxHz) return false;
    this.lastMs = t;
    return true;
  }
}

export class WsClient {
  private ws: WebSocket | null = null;
  private probeGate = new RateLimiter(120);

  onMessage: (msg: ServerMsg) => void = () => {};
  onOpen: () => void = () => {};
  onClose: () => void = () => {};

  connect(url: string): void {
    this.close();
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.onOpen();
    this.ws.onclose = () => this.onClose();
    this.ws.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg) this.onMessage(msg);
    };
  }

  close(): void {
    if (this.ws) {
      this.ws.onclose = null;
      this.ws.close();
      this.ws = null;
    }
  }

  send(msg: ClientMsg): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    if (msg.type === "probe" && !this.probeGate.allow()) return false;
    this.ws.send(serializeClientMsg(msg));
    return true;
  }
}
