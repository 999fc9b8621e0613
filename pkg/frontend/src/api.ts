// Typed fetch wrappers over the gateway's HTTP/JSON API. All console
// mutations go through here; there is no client-side state authority.

import type {
  CaseRecord,
  FlagRecord,
  GatewayConfig,
  LessonRecord,
  LexiconDocument,
  ThresholdReportRecord,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public error: string,
    public detail: string,
  ) {
    super(`${status} ${error}: ${detail}`);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export interface Resolution {
  kind: 'threshold_decreased' | 'model_improved' | 'dismissed';
  new_value?: number;
  attribution?: string[];
  edits?: { kind: string; word: string; score?: number; author?: string }[];
}

export class GatewayClient {
  constructor(
    private base: string,
    private token: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { 'Content-Type': 'application/json' } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(
        response.status,
        parsed.error ?? 'error',
        parsed.detail ?? text,
      );
    }
    return parsed as T;
  }

  config(): Promise<GatewayConfig> {
    return this.request('GET', '/config');
  }

  async cases(state?: string): Promise<CaseRecord[]> {
    const query = state ? `?state=${encodeURIComponent(state)}` : '';
    const body = await this.request<{ cases: CaseRecord[] }>('GET', `/cases${query}`);
    return body.cases;
  }

  getCase(caseId: string): Promise<CaseRecord> {
    return this.request('GET', `/cases/${caseId}`);
  }

  decide(caseId: string, verdict: 'approve' | 'reject' | 'abandon'): Promise<CaseRecord> {
    return this.request('POST', `/cases/${caseId}/decision`, { verdict });
  }

  proposeAlternative(caseId: string, command: string): Promise<CaseRecord> {
    return this.request('POST', `/cases/${caseId}/alternatives`, { command });
  }

  recordLesson(caseId: string, text: string): Promise<LessonRecord> {
    return this.request('POST', `/cases/${caseId}/lesson`, { text });
  }

  async lessons(caseId: string): Promise<LessonRecord[]> {
    const body = await this.request<{ lessons: LessonRecord[] }>(
      'GET', `/cases/${caseId}/lessons`);
    return body.lessons;
  }

  openFlag(caseId: string): Promise<FlagRecord> {
    return this.request('POST', `/cases/${caseId}/flag`);
  }

  async flags(): Promise<FlagRecord[]> {
    const body = await this.request<{ flags: FlagRecord[] }>('GET', '/flags');
    return body.flags;
  }

  resolveFlag(flagId: string, resolution: Resolution): Promise<FlagRecord> {
    return this.request('POST', `/flags/${flagId}/resolution`, resolution);
  }

  lexicon(): Promise<LexiconDocument> {
    return this.request('GET', '/lexicon');
  }

  setScore(table: string, word: string, score: number, author = 'console'):
      Promise<{ version: number }> {
    return this.request('PUT', `/lexicon/${table}/${encodeURIComponent(word)}`,
      { score, author });
  }

  setValuable(word: string, member: boolean, author = 'console'):
      Promise<{ version: number }> {
    return this.request('PUT', `/lexicon/valuable_objects/${encodeURIComponent(word)}`,
      { member, author });
  }

  tune(conf: number, corpus?: string): Promise<ThresholdReportRecord> {
    return this.request('POST', '/threshold/tune', { conf, corpus });
  }

  // agent-side helpers, used by the integration tests to drive scenarios
  createTask(name: string): Promise<{ task_id: string }> {
    return this.request('POST', '/tasks', { name });
  }

  submitSubgoal(taskId: string, command: string):
      Promise<{ verdict: string; case: CaseRecord }> {
    return this.request('POST', `/tasks/${taskId}/subgoals`, { command });
  }
}
