import type { StreamEvent } from "./types.js";

export interface StreamHandlers {
  onEvent: (event: StreamEvent) => void;
  // fired on (re)connect so the owner can refetch authoritative state
  onConnect: () => void;
  onDisconnect: () => void;
}

/** SSE subscription with exponential backoff reconnects (1s, 2s, ... capped at 30s). */
export class EventStream {
  private source: EventSource | null = null;
  private attempts = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
  ) {}

  start() {
    this.stopped = false;
    this.connect();
  }

  stop() {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.source?.close();
    this.source = null;
  }

  backoffMs(attempt: number): number {
    return Math.min(1000 * 2 ** attempt, 30000);
  }

  private connect() {
    this.source = new EventSource(this.url);
    this.source.onopen = () => {
      this.attempts = 0;
      this.handlers.onConnect();
    };
    this.source.onmessage = (msg) => {
      try {
        this.handlers.onEvent(JSON.parse(msg.data));
      } catch {
        // not ours; skip
      }
    };
    this.source.onerror = () => {
      this.source?.close();
      this.source = null;
      this.handlers.onDisconnect();
      if (this.stopped) return;
      this.timer = setTimeout(() => this.connect(), this.backoffMs(this.attempts));
      this.attempts += 1;
    };
  }
}
