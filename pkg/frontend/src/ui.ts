// DOM rendering for the operator console. The page re-renders from the
// store on every change; typed text lives in `drafts`, keyed by case or
// flag id, so a re-render (or a 409 refresh) never loses operator input.

import { ApiError, GatewayClient } from './api.js';
import type { ConsoleStore } from './state.js';
import type { Breakdown, CaseRecord, FlagRecord } from './types.js';

interface FlagDraft {
  attribution: Set<string>;
  scores: Map<string, string>; // word -> edited object_danger score
  valuables: Set<string>;
  mode: 'model_improved' | 'threshold_decreased' | 'dismissed';
  newThreshold: string;
  result?: string;
}

interface Drafts {
  lessons: Map<string, string>;
  alternatives: Map<string, string>;
  flags: Map<string, FlagDraft>;
  tuneConf: string;
  lexTable: string;
  lexWord: string;
  lexScore: string;
}

export class ConsoleUI {
  private selectedCase: string | null = null;
  private flagCase: string | null = null;
  private banner = '';
  private connection: 'connected' | 'disconnected' = 'disconnected';
  private drafts: Drafts = {
    lessons: new Map(),
    alternatives: new Map(),
    flags: new Map(),
    tuneConf: '0.95',
    lexTable: 'object_danger',
    lexWord: '',
    lexScore: '',
  };

  constructor(
    private root: HTMLElement,
    private client: GatewayClient,
    private store: ConsoleStore,
  ) {
    store.subscribe(() => this.render());
  }

  setConnection(status: 'connected' | 'disconnected'): void {
    this.connection = status;
    this.render();
  }

  private async run(action: () => Promise<void>): Promise<void> {
    try {
      this.banner = '';
      await action();
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        this.banner = 'case changed elsewhere, view refreshed; your text is kept';
        await this.refreshSelected();
      } else {
        this.banner = err instanceof Error ? err.message : String(err);
      }
    }
    this.render();
  }

  private async refreshSelected(): Promise<void> {
    if (this.selectedCase) {
      this.store.upsertCase(await this.client.getCase(this.selectedCase));
    }
  }

  render(): void {
    const snap = this.store.snapshot();
    this.root.replaceChildren();

    const header = el('header', {});
    header.append(
      el('h1', { text: 'critgate operator console' }),
      el('span', {
        className: `status ${this.connection}`,
        text: this.connection === 'connected'
          ? `live (seq ${snap.lastSeq})`
          : 'disconnected, reconnecting…',
      }),
      el('span', {
        className: 'versions',
        text: `threshold ${fmt(snap.threshold)} · lexicon v${snap.lexiconVersion ?? '?'}`,
      }),
    );
    this.root.append(header);

    if (this.banner) {
      this.root.append(el('div', { className: 'banner', text: this.banner }));
    }

    const main = el('main', {});
    main.append(this.renderQueue(snap.pending));
    main.append(this.renderAutoApproved(snap.autoApproved));
    if (this.selectedCase) {
      const record = this.store.getCase(this.selectedCase);
      if (record) {
        main.append(this.renderCaseDetail(record));
      }
    }
    if (this.flagCase) {
      const record = this.store.getCase(this.flagCase);
      if (record) {
        main.append(this.renderFlagDialog(record));
      }
    }
    main.append(this.renderThresholdPanel(snap.threshold));
    main.append(this.renderLexiconEditor());
    this.root.append(main);
  }

  private renderQueue(pending: CaseRecord[]): HTMLElement {
    const section = el('section', { className: 'queue' });
    section.append(el('h2', { text: `pending permission (${pending.length})` }));
    if (!pending.length) {
      section.append(el('p', { className: 'empty', text: 'no pending actions' }));
      return section;
    }
    for (const record of pending) {
      const row = el('div', { className: 'case-row', id: `row-${record.case_id}` });
      row.append(
        el('code', { text: record.case_id }),
        el('strong', { text: record.command }),
        breakdownBars(record.breakdown),
        el('span', {
          className: 'versions',
          text: `lex v${record.breakdown?.lexicon_version ?? '?'} · `
            + `thr ${fmt(record.threshold_at_scoring)}`,
        }),
        button('open', () => {
          this.selectedCase = record.case_id;
          this.render();
        }),
      );
      section.append(row);
    }
    return section;
  }

  private renderAutoApproved(records: CaseRecord[]): HTMLElement {
    const section = el('section', { className: 'auto' });
    section.append(el('h2', { text: `auto-approved (${records.length})` }));
    for (const record of records.slice(-8)) {
      const row = el('div', { className: 'case-row' });
      row.append(
        el('code', { text: record.case_id }),
        el('span', { text: record.command }),
        el('span', { text: `crit ${fmt(record.breakdown?.combined)}` }),
        button('flag as missed-critical', () => this.run(async () => {
          const flag = await this.client.openFlag(record.case_id);
          this.store.upsertFlag(flag);
          this.flagCase = record.case_id;
        })),
      );
      section.append(row);
    }
    return section;
  }

  private renderCaseDetail(record: CaseRecord): HTMLElement {
    const section = el('section', { className: 'detail' });
    section.append(
      el('h2', { text: `case ${record.case_id} · ${record.state}` }),
      el('p', { text: record.command }),
      breakdownBars(record.breakdown),
    );

    if (record.state === 'pending_permission') {
      section.append(
        button('approve', () => this.decide(record, 'approve')),
        button('reject', () => this.decide(record, 'reject')),
      );
    }

    if (record.state === 'awaiting_alternative') {
      section.append(this.renderAlternativeFlow(record));
    }

    for (const alt of record.alternative_history) {
      section.append(el('p', {
        className: 'alt',
        text: `${alt.proposer}: ${alt.command} → ${alt.verdict ?? 'pending'}`
          + (alt.breakdown ? ` (crit ${fmt(alt.breakdown.combined)})` : ''),
      }));
    }

    const lessonBox = el('textarea', {}) as HTMLTextAreaElement;
    lessonBox.value = this.drafts.lessons.get(record.case_id) ?? '';
    lessonBox.placeholder = 'lesson for the agent, e.g. what not to do again';
    lessonBox.addEventListener('input', () => {
      this.drafts.lessons.set(record.case_id, lessonBox.value);
    });
    section.append(
      lessonBox,
      button('record lesson', () => this.run(async () => {
        await this.client.recordLesson(
          record.case_id, this.drafts.lessons.get(record.case_id) ?? '');
        this.drafts.lessons.delete(record.case_id);
      })),
      button('close', () => {
        this.selectedCase = null;
        this.render();
      }),
    );
    return section;
  }

  private renderAlternativeFlow(record: CaseRecord): HTMLElement {
    const wrap = el('div', { className: 'alternative-flow' });
    const pending = record.alternative_history.at(-1);
    if (pending && pending.verdict === null) {
      wrap.append(
        el('p', { text: `agent proposes: ${pending.command} `
          + `(crit ${fmt(pending.breakdown?.combined)})` }),
        button('approve alternative', () => this.decide(record, 'approve')),
        button('reject alternative', () => this.decide(record, 'reject')),
      );
      return wrap;
    }
    wrap.append(el('p', {
      text: 'awaiting an alternative: let the agent propose, or type your own',
    }));
    const input = el('input', {}) as HTMLInputElement;
    input.value = this.drafts.alternatives.get(record.case_id) ?? '';
    input.placeholder = 'operator alternative command';
    input.addEventListener('input', () => {
      this.drafts.alternatives.set(record.case_id, input.value);
    });
    wrap.append(
      input,
      button('propose alternative', () => this.run(async () => {
        const updated = await this.client.proposeAlternative(
          record.case_id, this.drafts.alternatives.get(record.case_id) ?? '');
        this.store.upsertCase(updated);
        this.drafts.alternatives.delete(record.case_id);
      })),
      button('abandon', () => this.decide(record, 'abandon')),
    );
    return wrap;
  }

  private decide(record: CaseRecord, verdict: 'approve' | 'reject' | 'abandon'):
      Promise<void> {
    return this.run(async () => {
      const updated = await this.client.decide(record.case_id, verdict);
      this.store.upsertCase(updated);
    });
  }

  private flagDraft(record: CaseRecord, flag: FlagRecord): FlagDraft {
    let draft = this.drafts.flags.get(flag.flag_id);
    if (!draft) {
      draft = {
        attribution: new Set(),
        scores: new Map(),
        valuables: new Set(),
        mode: 'model_improved',
        // minimum effective value: the case's own criticality
        newThreshold: String(flag.breakdown.combined),
      };
      this.drafts.flags.set(flag.flag_id, draft);
    }
    return draft;
  }

  private renderFlagDialog(record: CaseRecord): HTMLElement {
    const section = el('section', { className: 'flag-dialog' });
    const flag = this.store.openFlagFor(record.case_id)
      ?? [...this.store.snapshot().flags].reverse()
        .find((f) => f.case_id === record.case_id);
    if (!flag) {
      return section;
    }
    section.append(
      el('h2', { text: `missed-critical flag ${flag.flag_id}` }),
      el('p', {
        text: `"${record.command}" had criticality ${fmt(flag.breakdown.combined)}`
          + ` against threshold ${fmt(flag.threshold_at_scoring)}.`,
      }),
    );
    if (flag.resolution) {
      const crit = flag.resolution.new_criticality;
      section.append(el('p', {
        className: 'result',
        id: 'flag-result',
        text: flag.resolution.kind === 'model_improved'
          ? `model improved; re-scored criticality ${fmt(crit)}`
          : flag.resolution.kind === 'threshold_decreased'
            ? `threshold decreased to ${fmt(flag.resolution.new_value)}`
            : 'dismissed',
      }));
      section.append(button('close', () => {
        this.flagCase = null;
        this.render();
      }));
      return section;
    }

    const draft = this.flagDraft(record, flag);
    section.append(el('p', { text: 'which words are responsible?' }));
    for (const word of flag.candidate_words) {
      const label = el('label', {});
      const box = el('input', {}) as HTMLInputElement;
      box.type = 'checkbox';
      box.checked = draft.attribution.has(word);
      box.addEventListener('change', () => {
        if (box.checked) {
          draft.attribution.add(word);
        } else {
          draft.attribution.delete(word);
        }
      });
      label.append(box, el('span', { text: word }));

      const score = el('input', {}) as HTMLInputElement;
      score.type = 'number';
      score.min = '0';
      score.max = '1';
      score.step = '0.05';
      score.placeholder = 'danger score';
      score.value = draft.scores.get(word) ?? '';
      score.addEventListener('input', () => {
        draft.scores.set(word, score.value);
      });

      const valuable = el('input', {}) as HTMLInputElement;
      valuable.type = 'checkbox';
      valuable.checked = draft.valuables.has(word);
      valuable.addEventListener('change', () => {
        if (valuable.checked) {
          draft.valuables.add(word);
        } else {
          draft.valuables.delete(word);
        }
      });
      const valuableLabel = el('label', { className: 'valuable' });
      valuableLabel.append(valuable, el('span', { text: 'valuable' }));

      const row = el('div', { className: 'word-row' });
      row.append(label, score, valuableLabel);
      section.append(row);
    }

    const thresholdInput = el('input', {}) as HTMLInputElement;
    thresholdInput.type = 'number';
    thresholdInput.min = '0';
    thresholdInput.max = '1';
    thresholdInput.step = '0.05';
    thresholdInput.value = draft.newThreshold;
    thresholdInput.addEventListener('input', () => {
      draft.newThreshold = thresholdInput.value;
    });

    section.append(
      button('improve the model', () => this.run(async () => {
        const edits = [];
        for (const [word, value] of draft.scores) {
          if (value !== '') {
            edits.push({ kind: 'set_object_danger', word,
                         score: Number(value), author: 'operator' });
          }
        }
        for (const word of draft.valuables) {
          edits.push({ kind: 'add_valuable', word, author: 'operator' });
        }
        const resolved = await this.client.resolveFlag(flag.flag_id, {
          kind: 'model_improved',
          attribution: [...draft.attribution],
          edits,
        });
        this.store.upsertFlag(resolved);
      })),
      el('span', { text: ' or decrease threshold to ' }),
      thresholdInput,
      button('decrease threshold', () => this.run(async () => {
        const resolved = await this.client.resolveFlag(flag.flag_id, {
          kind: 'threshold_decreased',
          new_value: Number(draft.newThreshold),
        });
        this.store.upsertFlag(resolved);
      })),
      button('dismiss', () => this.run(async () => {
        const resolved = await this.client.resolveFlag(
          flag.flag_id, { kind: 'dismissed' });
        this.store.upsertFlag(resolved);
        this.flagCase = null;
      })),
    );
    return section;
  }

  private renderThresholdPanel(threshold: number | null): HTMLElement {
    const section = el('section', { className: 'threshold-panel' });
    section.append(
      el('h2', { text: 'threshold' }),
      el('p', { id: 'threshold-value', text: `active threshold: ${fmt(threshold)}` }),
    );
    const conf = el('input', {}) as HTMLInputElement;
    conf.type = 'number';
    conf.min = '0.01';
    conf.max = '1';
    conf.step = '0.01';
    conf.value = this.drafts.tuneConf;
    conf.addEventListener('input', () => {
      this.drafts.tuneConf = conf.value;
    });
    section.append(
      el('span', { text: 'retune at confidence ' }),
      conf,
      button('retune from bundled corpus', () => this.run(async () => {
        const report = await this.client.tune(Number(this.drafts.tuneConf));
        this.banner = `tuned threshold ${report.threshold} `
          + `(coverage ${report.coverage.toFixed(3)})`;
      })),
    );
    return section;
  }

  private renderLexiconEditor(): HTMLElement {
    const section = el('section', { className: 'lexicon-editor' });
    section.append(el('h2', { text: 'lexicon' }));
    const table = el('select', {}) as HTMLSelectElement;
    for (const name of ['verb_crit', 'object_danger', 'object_value',
                        'valuable_objects']) {
      const option = el('option', { text: name }) as HTMLOptionElement;
      option.value = name;
      table.append(option);
    }
    table.value = this.drafts.lexTable;
    table.addEventListener('change', () => {
      this.drafts.lexTable = table.value;
    });

    const word = el('input', {}) as HTMLInputElement;
    word.placeholder = 'word';
    word.value = this.drafts.lexWord;
    word.addEventListener('input', () => {
      this.drafts.lexWord = word.value;
    });

    const score = el('input', {}) as HTMLInputElement;
    score.type = 'number';
    score.min = '0';
    score.max = '1';
    score.step = '0.05';
    score.placeholder = 'score (or 1/0 membership)';
    score.value = this.drafts.lexScore;
    score.addEventListener('input', () => {
      this.drafts.lexScore = score.value;
    });

    section.append(table, word, score, button('apply edit', () => this.run(async () => {
      const target = this.drafts.lexWord.trim();
      if (this.drafts.lexTable === 'valuable_objects') {
        await this.client.setValuable(target, Number(this.drafts.lexScore) >= 0.5);
      } else {
        await this.client.setScore(this.drafts.lexTable, target,
          Number(this.drafts.lexScore));
      }
      this.banner = `lexicon updated: ${this.drafts.lexTable}[${target}]`;
    })));
    return section;
  }
}

function el(tag: string, options: { className?: string; text?: string; id?: string }):
    HTMLElement {
  const node = document.createElement(tag);
  if (options.className) {
    node.className = options.className;
  }
  if (options.text !== undefined) {
    node.textContent = options.text;
  }
  if (options.id) {
    node.id = options.id;
  }
  return node;
}

function button(label: string, onClick: () => void): HTMLElement {
  const node = el('button', { text: label });
  node.addEventListener('click', onClick);
  return node;
}

function breakdownBars(breakdown: Breakdown | null): HTMLElement {
  const wrap = el('div', { className: 'bars' });
  if (!breakdown) {
    return wrap;
  }
  const dims: [string, number][] = [
    ['verb', breakdown.verb_based],
    ['object', breakdown.object_based],
    ['value', breakdown.value_based],
    ['combined', breakdown.combined],
  ];
  for (const [name, value] of dims) {
    const bar = el('div', { className: 'bar' });
    const fill = el('span', { className: name === 'combined' ? 'fill combined' : 'fill' });
    fill.style.width = `${Math.round(value * 100)}%`;
    bar.append(fill, el('label', { text: `${name} ${value.toFixed(2)}` }));
    wrap.append(bar);
  }
  return wrap;
}

function fmt(value: number | null | undefined): string {
  return value === null || value === undefined ? '?' : String(value);
}
