// Reconnecting NDJSON event-stream client with sequence resume.
//
// The gateway streams line-delimited event records plus heartbeats. This
// client remembers the last seen seq; after any drop it reconnects with
// ?since=<lastSeq>, so rows are never duplicated or lost (the store's
// upserts make redelivery harmless anyway).

import type { GatewayEvent, StreamRecord } from './types.js';

export interface StreamHandlers {
  onEvent: (event: GatewayEvent) => void;
  onHeartbeat?: (ts: string) => void;
  onStatus?: (status: 'connected' | 'disconnected') => void;
}

export interface StreamOptions {
  retryMs?: number;
  fetchImpl?: typeof fetch;
}

export class EventStreamClient {
  lastSeq = 0;
  private stopped = false;
  private controller: AbortController | null = null;
  private retryMs: number;
  private fetchImpl: typeof fetch;
  private loopPromise: Promise<void> | null = null;

  constructor(
    private base: string,
    private token: string,
    private handlers: StreamHandlers,
    options: StreamOptions = {},
  ) {
    this.retryMs = options.retryMs ?? 1000;
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  start(fromSeq = 0): void {
    this.lastSeq = fromSeq;
    this.stopped = false;
    this.loopPromise = this.runLoop();
  }

  stop(): Promise<void> {
    this.stopped = true;
    this.controller?.abort();
    return this.loopPromise ?? Promise.resolve();
  }

  /** Drop the current connection without stopping; the loop reconnects
   * from lastSeq. Exists so tests and the UI can simulate network loss. */
  dropConnection(): void {
    this.controller?.abort();
  }

  private async runLoop(): Promise<void> {
    while (!this.stopped) {
      this.controller = new AbortController();
      try {
        const response = await this.fetchImpl(
          `${this.base}/events?since=${this.lastSeq}`,
          {
            headers: { Authorization: `Bearer ${this.token}` },
            signal: this.controller.signal,
          },
        );
        if (!response.ok || !response.body) {
          throw new Error(`stream rejected: ${response.status}`);
        }
        this.handlers.onStatus?.('connected');
        await this.consume(response.body);
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) {
        break;
      }
      this.handlers.onStatus?.('disconnected');
      await sleep(this.retryMs);
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = '';
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      buffer += decoder.decode(value, { stream: true });
      let newline = buffer.indexOf('\n');
      while (newline >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) {
          this.dispatch(JSON.parse(line) as StreamRecord);
        }
        newline = buffer.indexOf('\n');
      }
    }
  }

  private dispatch(record: StreamRecord): void {
    if (record.kind === 'heartbeat') {
      this.handlers.onHeartbeat?.(record.ts);
      return;
    }
    const event = record as GatewayEvent;
    if (event.seq <= this.lastSeq) {
      return; // duplicate delivery after overlap-safe bootstrap
    }
    this.lastSeq = event.seq;
    this.handlers.onEvent(event);
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
