// Bootstrap: token form -> REST bootstrap -> event stream -> render loop.

import { GatewayClient } from './api.js';
import { EventStreamClient } from './events.js';
import { ConsoleStore } from './state.js';
import { ConsoleUI } from './ui.js';

function gatewayBase(): string {
  // served by the gateway itself under /console, or point elsewhere via ?gateway=
  const override = new URLSearchParams(location.search).get('gateway');
  return override ?? location.origin;
}

async function connect(token: string): Promise<void> {
  const base = gatewayBase();
  const root = document.getElementById('app');
  if (!root) {
    throw new Error('missing #app element');
  }
  const client = new GatewayClient(base, token);
  const store = new ConsoleStore();
  const ui = new ConsoleUI(root, client, store);

  await store.bootstrap(client);
  const stream = new EventStreamClient(base, token, {
    onEvent: (event) => store.applyEvent(event),
    onStatus: (status) => ui.setConnection(status),
  });
  stream.start(store.lastSeq);
  ui.render();
}

function init(): void {
  const form = document.getElementById('token-form') as HTMLFormElement | null;
  const input = document.getElementById('token-input') as HTMLInputElement | null;
  if (!form || !input) {
    return;
  }
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    form.hidden = true;
    connect(input.value.trim()).catch((err) => {
      form.hidden = false;
      const note = document.getElementById('token-error');
      if (note) {
        note.textContent = err instanceof Error ? err.message : String(err);
      }
    });
  });
}

init();
