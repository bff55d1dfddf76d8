import type { EventDoc } from "./types.js";

export interface SseFrame {
  id: number | null;
  data: string;
}

/**
 * Incremental server-sent-events parser. Feed it raw text chunks in any
 * split; it returns only the frames completed so far and buffers the rest,
 * so a frame straddling a chunk boundary is never emitted twice or torn.
 */
export class SseParser {
  private buffer = "";
  private sawCR = false;

  push(chunk: string): SseFrame[] {
    // Normalise CRLF/CR to LF, holding back a trailing CR in case its LF
    // arrives in the next chunk.
    let text = chunk;
    if (this.sawCR) {
      text = "\r" + text;
      this.sawCR = false;
    }
    if (text.endsWith("\r")) {
      this.sawCR = true;
      text = text.slice(0, -1);
    }
    this.buffer += text.replace(/\r\n/g, "\n").replace(/\r/g, "\n");
    const frames: SseFrame[] = [];
    for (;;) {
      const cut = this.buffer.indexOf("\n\n");
      if (cut < 0) break;
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame = parseBlock(block);
      if (frame !== null) frames.push(frame);
    }
    return frames;
  }
}

function parseBlock(block: string): SseFrame | null {
  let id: number | null = null;
  const data: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith(":")) continue; // comment / keep-alive
    if (line.startsWith("id:")) {
      const value = Number(line.slice(3).trim());
      if (Number.isFinite(value)) id = value;
    } else if (line.startsWith("data:")) {
      let payload = line.slice(5);
      if (payload.startsWith(" ")) payload = payload.slice(1);
      data.push(payload);
    }
  }
  if (data.length === 0) return null;
  return { id, data: data.join("\n") };
}

export type StreamStatus =
  | "connecting"
  | "open"
  | "reconnecting"
  | "lost"
  | "done"
  | "stopped";

export interface EventStreamOptions {
  /** Resume point: highest stream id already seen. -1 (default) = none. */
  lastEventId?: number;
  maxRetries?: number;
  retryDelayMs?: number;
  fetchImpl?: typeof fetch;
  isTerminal?: (doc: EventDoc) => boolean;
}

/**
 * Reconnecting reader for a run's event stream.
 *
 * Ordering guarantee: events are handed to the callback strictly by
 * ascending stream id. On reconnect the last seen id is replayed to the
 * gateway (Last-Event-ID header plus ?after= for proxies that strip
 * headers) and anything at or below it is dropped client-side, so a
 * flaky connection can never duplicate or reorder the log.
 */
export class EventStream {
  lastEventId: number;
  status: StreamStatus = "connecting";

  private readonly fetchImpl: typeof fetch;
  private readonly maxRetries: number;
  private readonly retryDelayMs: number;
  private readonly isTerminal: (doc: EventDoc) => boolean;
  private controller: AbortController | null = null;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly onEvent: (index: number, doc: EventDoc) => void,
    private readonly onStatus?: (status: StreamStatus) => void,
    opts: EventStreamOptions = {},
  ) {
    this.lastEventId = opts.lastEventId ?? -1; // ids are 0-based positions
    const impl = opts.fetchImpl ?? fetch;
    this.fetchImpl = (input, init) => impl(input, init);
    this.maxRetries = opts.maxRetries ?? 5;
    this.retryDelayMs = opts.retryDelayMs ?? 400;
    this.isTerminal = opts.isTerminal ?? ((doc) => doc.event === "outcome");
  }

  private setStatus(status: StreamStatus): void {
    this.status = status;
    this.onStatus?.(status);
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.setStatus("stopped");
  }

  /** Resolves with the final status: "done", "stopped" or "lost". */
  async start(): Promise<StreamStatus> {
    let retriesLeft = this.maxRetries;
    let firstAttempt = true;
    while (!this.stopped) {
      this.setStatus(firstAttempt ? "connecting" : "reconnecting");
      firstAttempt = false;
      try {
        const outcome = await this.readOnce();
        if (outcome === "terminal") {
          this.setStatus("done");
          return "done";
        }
        // Connection ended without the terminal event: resume.
      } catch (err) {
        if (this.stopped) break;
      }
      if (retriesLeft <= 0) {
        this.setStatus("lost");
        return "lost";
      }
      retriesLeft -= 1;
      await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs));
    }
    return "stopped";
  }

  private async readOnce(): Promise<"terminal" | "ended"> {
    this.controller = new AbortController();
    const after = this.lastEventId;
    const sep = this.url.includes("?") ? "&" : "?";
    const url = after >= 0 ? `${this.url}${sep}after=${after}` : this.url;
    const headers: Record<string, string> = { accept: "text/event-stream" };
    if (after >= 0) headers["Last-Event-ID"] = String(after);

    const response = await this.fetchImpl(url, {
      headers,
      signal: this.controller.signal,
    });
    if (!response.ok || response.body === null) {
      throw new Error(`event stream rejected: ${response.status}`);
    }
    this.setStatus("open");

    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
          if (frame.id !== null && frame.id <= this.lastEventId) continue;
          let doc: EventDoc;
          try {
            doc = JSON.parse(frame.data) as EventDoc;
          } catch {
            continue; // keep-alive or malformed frame
          }
          if (frame.id !== null) this.lastEventId = frame.id;
          this.onEvent(frame.id ?? this.lastEventId, doc);
          if (this.isTerminal(doc)) return "terminal";
        }
      }
    } finally {
      reader.releaseLock();
    }
    return "ended";
  }
}
