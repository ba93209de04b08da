import {
  ALL_MODES,
  type ChatTurn,
  type CorpusStats,
  type Fact,
  type HealthInfo,
  type Hit,
  type QaMode,
} from "./types.js";

const MODE_LABELS: Record<QaMode, string> = {
  agnostic: "no context",
  rulebook: "rulebook",
  rulebook_kg: "rulebook + knowledge graph",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Split a chunk id like "womens-medical#3" into its document and sequence. */
export function chunkProvenance(chunkId: string): { docId: string; seq: string } {
  const at = chunkId.lastIndexOf("#");
  if (at < 0) {
    return { docId: chunkId, seq: "?" };
  }
  return { docId: chunkId.slice(0, at), seq: chunkId.slice(at + 1) };
}

function renderHit(hit: Hit): string {
  const { docId, seq } = chunkProvenance(hit.chunk_id);
  // chunk_id and score rendered exactly as served, no reformatting
  return (
    `<li class="hit">` +
    `<span class="chunk-id">${escapeHtml(hit.chunk_id)}</span>` +
    `<span class="provenance">doc ${escapeHtml(docId)}, seq ${escapeHtml(seq)}</span>` +
    `<span class="score">score ${escapeHtml(String(hit.score))}</span>` +
    `<blockquote>${escapeHtml(hit.text)}</blockquote>` +
    `</li>`
  );
}

export function renderContextPanel(turn: ChatTurn): string {
  if (turn.mode === "agnostic") {
    return (
      `<div class="panel context empty">` +
      `No context: this turn was answered without the rulebook.` +
      `</div>`
    );
  }
  if (turn.hits.length === 0) {
    return `<div class="panel context empty">No context returned.</div>`;
  }
  return (
    `<div class="panel context"><h4>Context</h4>` +
    `<ol>${turn.hits.map(renderHit).join("")}</ol></div>`
  );
}

function renderFact(fact: Fact): string {
  return (
    `<li class="fact">` +
    `<span class="fact-subject">${escapeHtml(fact.subject)}</span>` +
    `<span class="fact-predicate">${escapeHtml(fact.predicate)}</span>` +
    `<span class="fact-text">${escapeHtml(fact.text)}</span>` +
    `</li>`
  );
}

export function renderFactsPanel(turn: ChatTurn): string {
  if (turn.mode === "agnostic") {
    return (
      `<div class="panel facts empty">` +
      `No external facts: this turn was answered without the knowledge graph.` +
      `</div>`
    );
  }
  if (turn.facts.length === 0) {
    return `<div class="panel facts empty">No external facts for this turn.</div>`;
  }
  return (
    `<div class="panel facts"><h4>External facts</h4>` +
    `<ul>${turn.facts.map(renderFact).join("")}</ul></div>`
  );
}

export function renderTurn(turn: ChatTurn): string {
  const header =
    `<div class="turn-header">` +
    `<span class="question">${escapeHtml(turn.question)}</span>` +
    `<span class="mode-tag">${escapeHtml(MODE_LABELS[turn.mode])}</span>` +
    `</div>`;
  let body: string;
  if (turn.status === "pending") {
    body = `<div class="answer pending">&hellip;</div>`;
  } else if (turn.status === "failed") {
    const error = turn.error ?? {
      stage: "request",
      type: "UnknownError",
      message: "no detail",
    };
    body =
      `<div class="answer failed">` +
      `${escapeHtml(error.stage)} stage failed: ${escapeHtml(error.message)}` +
      `</div>`;
  } else {
    body =
      `<div class="answer">${escapeHtml(turn.answer ?? "")}</div>` +
      renderContextPanel(turn) +
      renderFactsPanel(turn);
  }
  return (
    `<article class="turn ${turn.status}" data-turn-id="${turn.turn_id}">` +
    header +
    body +
    `</article>`
  );
}

/** Turns in submission order, oldest first. */
export function renderTurns(turns: ChatTurn[]): string {
  return turns.map(renderTurn).join("");
}

export function renderModePicker(mode: QaMode, corpusLoaded: boolean): string {
  const buttons = ALL_MODES.map((candidate) => {
    const selected = candidate === mode ? " selected" : "";
    const disabled = !corpusLoaded && candidate !== "agnostic" ? " disabled" : "";
    return (
      `<button type="button" class="mode-choice${selected}"` +
      ` data-mode="${candidate}"${disabled}>` +
      `${escapeHtml(MODE_LABELS[candidate])}</button>`
    );
  });
  return `<div class="mode-picker">${buttons.join("")}</div>`;
}

export function renderBanner(corpusLoaded: boolean): string {
  if (corpusLoaded) {
    return "";
  }
  return (
    `<div class="banner">No corpus is loaded: questions run without ` +
    `retrieval until documents are ingested.</div>`
  );
}

export function renderStatsHeader(
  health: HealthInfo | null,
  stats: CorpusStats | null,
): string {
  const backend = health ? `backend ${escapeHtml(health.backend)}` : "connecting";
  const counts = stats
    ? `${stats.documents} documents, ${stats.chunks} chunks, ${stats.tables} tables`
    : "";
  return (
    `<div class="stats-header">` +
    `<span class="backend">${backend}</span>` +
    `<span class="counts">${counts}</span>` +
    `</div>`
  );
}
