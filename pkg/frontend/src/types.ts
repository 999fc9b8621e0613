// Record shapes as the gateway serves them. The console never computes
// criticality itself; every number on screen comes from these payloads.

export interface Breakdown {
  verb_based: number;
  object_based: number;
  value_based: number;
  combined: number;
  combinator: string;
  weights: number[] | null;
  lexicon_version: number;
}

export interface TransitionRecord {
  from: string | null;
  to: string;
  timestamp: string;
  detail: string;
}

export interface AlternativeRecord {
  proposer: 'agent' | 'operator';
  command: string;
  breakdown: Breakdown | null;
  verdict: 'approved' | 'rejected' | null;
  timestamp: string;
}

export interface CaseRecord {
  case_id: string;
  task_id: string;
  command: string;
  state: string;
  breakdown: Breakdown | null;
  threshold_at_scoring: number | null;
  alternative_history: AlternativeRecord[];
  lesson: string | null;
  reason: string | null;
  transitions: TransitionRecord[];
}

export interface FlagResolution {
  kind: 'threshold_decreased' | 'model_improved' | 'dismissed';
  new_value?: number;
  attribution?: string[];
  edits?: LexiconEditRecord[];
  new_criticality?: number;
}

export interface FlagRecord {
  flag_id: string;
  case_id: string;
  opened_by: string;
  opened_at: string;
  breakdown: Breakdown;
  threshold_at_scoring: number;
  candidate_words: string[];
  resolution: FlagResolution | null;
  resolved_at: string | null;
}

export interface LessonRecord {
  lesson_id: string;
  case_id: string;
  task_id: string;
  text: string;
  created: string;
}

export interface LexiconEditRecord {
  kind: string;
  word: string;
  score?: number | null;
  author?: string;
  timestamp?: string;
}

export interface LexiconDocument {
  version: number;
  domain_tag: string;
  verb_crit: Record<string, number>;
  object_danger: Record<string, number>;
  object_value: Record<string, number>;
  valuable_objects: string[];
}

export interface GatewayEvent {
  seq: number;
  kind: string;
  payload: {
    case_id?: string | null;
    case?: CaseRecord;
    flag?: FlagRecord;
    lesson?: LessonRecord;
    task?: { task_id: string; name: string; created: string };
    threshold?: number;
    edit?: LexiconEditRecord;
    version?: number;
    [key: string]: unknown;
  };
  ts: string;
}

export interface HeartbeatRecord {
  kind: 'heartbeat';
  ts: string;
}

export type StreamRecord = GatewayEvent | HeartbeatRecord;

export interface GatewayConfig {
  listen: string;
  threshold: number;
  engine: { combinator: string; weights: number[] | null; strict_mode: boolean };
  agent_retry_cap: number;
  lexicon_version: number;
  domain_tag: string;
  seq: number;
  heartbeat_interval: number;
}

export interface ThresholdReportRecord {
  threshold: number;
  coverage: number;
  interruption_rate: number;
  conf: number | null;
  per_action: { action: string; model_crit: number; label: boolean; gated: boolean }[];
}
