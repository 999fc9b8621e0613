import { describe, expect, it } from 'vitest';

import { EventStreamClient } from '../src/events.js';
import type { GatewayEvent } from '../src/types.js';

function ndjsonStream(lines: object[], holdOpen = false): ReadableStream<Uint8Array> {
  const encoder = new TextEncoder();
  return new ReadableStream({
    start(controller) {
      for (const line of lines) {
        controller.enqueue(encoder.encode(JSON.stringify(line) + '\n'));
      }
      if (!holdOpen) {
        controller.close();
      }
    },
  });
}

function fakeEvent(seq: number): object {
  return { seq, kind: 'case_gated', payload: { case_id: `case-${seq}` }, ts: '' };
}

describe('EventStreamClient', () => {
  it('parses events, skips heartbeats, tracks lastSeq', async () => {
    const received: GatewayEvent[] = [];
    let heartbeats = 0;
    const fetchImpl = (async () => ({
      ok: true,
      status: 200,
      body: ndjsonStream([
        fakeEvent(1),
        { kind: 'heartbeat', ts: 'now' },
        fakeEvent(2),
      ]),
    })) as unknown as typeof fetch;

    const client = new EventStreamClient('http://x', 't', {
      onEvent: (event) => received.push(event),
      onHeartbeat: () => { heartbeats += 1; },
    }, { retryMs: 5, fetchImpl });

    client.start(0);
    await waitFor(() => received.length === 2);
    await client.stop();
    expect(received.map((e) => e.seq)).toEqual([1, 2]);
    expect(heartbeats).toBe(1);
    expect(client.lastSeq).toBe(2);
  });

  it('reconnects from lastSeq with no duplicates or gaps', async () => {
    const askedSince: number[] = [];
    let call = 0;
    const fetchImpl = (async (url: string | URL) => {
      const since = Number(new URL(String(url)).searchParams.get('since'));
      askedSince.push(since);
      call += 1;
      if (call === 1) {
        // first connection delivers 1..2 then drops
        return { ok: true, status: 200, body: ndjsonStream([fakeEvent(1), fakeEvent(2)]) };
      }
      // reconnection must resume after 2
      const rest = [3, 4].filter((s) => s > since).map(fakeEvent);
      return { ok: true, status: 200, body: ndjsonStream(rest, call >= 2 && rest.length === 0) };
    }) as unknown as typeof fetch;

    const received: number[] = [];
    const statuses: string[] = [];
    const client = new EventStreamClient('http://x', 't', {
      onEvent: (event) => received.push(event.seq),
      onStatus: (status) => statuses.push(status),
    }, { retryMs: 5, fetchImpl });

    client.start(0);
    await waitFor(() => received.length === 4);
    await client.stop();
    expect(received).toEqual([1, 2, 3, 4]);
    expect(askedSince[0]).toBe(0);
    expect(askedSince[1]).toBe(2);
    expect(statuses).toContain('disconnected');
    expect(statuses).toContain('connected');
  });

  it('skips events at or below the starting seq (bootstrap overlap)', async () => {
    const fetchImpl = (async () => ({
      ok: true,
      status: 200,
      body: ndjsonStream([fakeEvent(1), fakeEvent(2), fakeEvent(3)]),
    })) as unknown as typeof fetch;

    const received: number[] = [];
    const client = new EventStreamClient('http://x', 't', {
      onEvent: (event) => received.push(event.seq),
    }, { retryMs: 5, fetchImpl });

    client.start(2);
    await waitFor(() => received.includes(3));
    await client.stop();
    expect(received).toEqual([3]);
  });

  it('reports disconnected on an unauthorized stream and retries', async () => {
    let attempts = 0;
    const fetchImpl = (async () => {
      attempts += 1;
      return { ok: false, status: 401, body: null };
    }) as unknown as typeof fetch;

    const statuses: string[] = [];
    const client = new EventStreamClient('http://x', 'bad', {
      onEvent: () => {},
      onStatus: (status) => statuses.push(status),
    }, { retryMs: 2, fetchImpl });

    client.start(0);
    await waitFor(() => attempts >= 2);
    await client.stop();
    expect(statuses[0]).toBe('disconnected');
  });
});

async function waitFor(check: () => boolean, timeoutMs = 2000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (check()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
  throw new Error('condition not met in time');
}
