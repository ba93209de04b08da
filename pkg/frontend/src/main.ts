import { QaClient } from "./api.js";
import {
  renderBanner,
  renderModePicker,
  renderStatsHeader,
  renderTurns,
} from "./render.js";
import { ChatStore } from "./state.js";
import type { CorpusStats, HealthInfo, QaMode } from "./types.js";

// base URL resolvable at runtime (window global or body attribute),
// defaulting to same-origin
declare global {
  interface Window {
    POLICYQA_BASE_URL?: string;
  }
}

function element(id: string): HTMLElement {
  const found = document.getElementById(id);
  if (!found) {
    throw new Error(`missing #${id}`);
  }
  return found;
}

function boot(): void {
  const baseUrl =
    window.POLICYQA_BASE_URL ?? document.body.dataset.baseUrl ?? "";
  const client = new QaClient(baseUrl);
  const store = new ChatStore(client);

  const header = element("stats-header");
  const banner = element("banner");
  const picker = element("mode-picker");
  const turns = element("turns");
  const form = element("ask-form") as HTMLFormElement;
  const input = element("question-input") as HTMLInputElement;
  const submit = element("ask-button") as HTMLButtonElement;

  let health: HealthInfo | null = null;
  let stats: CorpusStats | null = null;

  function repaint(): void {
    header.innerHTML = renderStatsHeader(health, stats);
    banner.innerHTML = renderBanner(store.corpusLoaded);
    picker.innerHTML = renderModePicker(store.mode, store.corpusLoaded);
    turns.innerHTML = renderTurns(store.turns);
    turns.scrollTop = turns.scrollHeight;
    submit.disabled = input.value.trim() === "";
  }

  store.subscribe(repaint);

  picker.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const mode = target.dataset?.mode as QaMode | undefined;
    if (mode) {
      store.setMode(mode);
    }
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const turn = store.submit(input.value);
    if (turn) {
      input.value = "";
      submit.disabled = true;
    }
  });

  input.addEventListener("input", () => {
    submit.disabled = input.value.trim() === "";
  });

  client
    .health()
    .then((info) => {
      health = info;
      store.setCorpusLoaded(info.corpus_loaded);
    })
    .catch(() => {
      health = null;
      repaint();
    });
  client
    .stats()
    .then((info) => {
      stats = info;
      repaint();
    })
    .catch(() => {
      stats = null;
    });

  repaint();
}

document.addEventListener("DOMContentLoaded", boot);
