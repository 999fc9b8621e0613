// Console state: a reducer over gateway events plus a REST bootstrap.
//
// Event payloads carry full case/flag snapshots, so applying an event is an
// upsert by id. Bootstrapping reads the current seq first and then fetches
// records; any overlap with the stream resolves itself because upserts are
// idempotent and the stream client skips seqs it has already seen.

import type { GatewayClient } from './api.js';
import type { CaseRecord, FlagRecord, GatewayEvent, LessonRecord } from './types.js';

export interface ConsoleSnapshot {
  cases: CaseRecord[];
  pending: CaseRecord[];
  autoApproved: CaseRecord[];
  flags: FlagRecord[];
  threshold: number | null;
  lexiconVersion: number | null;
  lastSeq: number;
}

export class ConsoleStore {
  private cases = new Map<string, CaseRecord>();
  private flags = new Map<string, FlagRecord>();
  private lessons = new Map<string, LessonRecord>();
  threshold: number | null = null;
  lexiconVersion: number | null = null;
  lastSeq = 0;
  private listeners: (() => void)[] = [];

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  async bootstrap(client: GatewayClient): Promise<void> {
    const config = await client.config();
    // seq first: the stream resumes from here and replays anything that
    // lands between these fetches
    this.lastSeq = config.seq;
    this.threshold = config.threshold;
    this.lexiconVersion = config.lexicon_version;
    for (const record of await client.cases()) {
      this.cases.set(record.case_id, record);
    }
    for (const flag of await client.flags()) {
      this.flags.set(flag.flag_id, flag);
    }
    this.notify();
  }

  applyEvent(event: GatewayEvent): void {
    const payload = event.payload;
    if (payload.case) {
      this.cases.set(payload.case.case_id, payload.case);
    }
    if (payload.flag) {
      this.flags.set(payload.flag.flag_id, payload.flag);
    }
    if (payload.lesson) {
      this.lessons.set(payload.lesson.lesson_id, payload.lesson);
    }
    if (event.kind === 'threshold_changed' && typeof payload.threshold === 'number') {
      this.threshold = payload.threshold;
    }
    if (event.kind === 'lexicon_changed' && typeof payload.version === 'number') {
      this.lexiconVersion = payload.version;
    }
    if (payload.case?.breakdown) {
      this.lexiconVersion = Math.max(
        this.lexiconVersion ?? 0, payload.case.breakdown.lexicon_version);
    }
    if (event.seq > this.lastSeq) {
      this.lastSeq = event.seq;
    }
    this.notify();
  }

  /** Direct REST responses (e.g. after a decision) update the same maps. */
  upsertCase(record: CaseRecord): void {
    this.cases.set(record.case_id, record);
    this.notify();
  }

  upsertFlag(record: FlagRecord): void {
    this.flags.set(record.flag_id, record);
    this.notify();
  }

  getCase(caseId: string): CaseRecord | undefined {
    return this.cases.get(caseId);
  }

  openFlagFor(caseId: string): FlagRecord | undefined {
    for (const flag of this.flags.values()) {
      if (flag.case_id === caseId && flag.resolution === null) {
        return flag;
      }
    }
    return undefined;
  }

  snapshot(): ConsoleSnapshot {
    const all = [...this.cases.values()].sort(
      (a, b) => a.case_id.localeCompare(b.case_id));
    return {
      cases: all,
      pending: all.filter((c) => c.state === 'pending_permission'),
      autoApproved: all.filter((c) => c.state === 'auto_approved'),
      flags: [...this.flags.values()].sort(
        (a, b) => a.flag_id.localeCompare(b.flag_id)),
      threshold: this.threshold,
      lexiconVersion: this.lexiconVersion,
      lastSeq: this.lastSeq,
    };
  }

  pendingIds(): string[] {
    return this.snapshot().pending.map((c) => c.case_id);
  }
}
