// Wire types mirror the service JSON field-for-field; the UI holds no
// answer logic of its own.

export type QaMode = "agnostic" | "rulebook" | "rulebook_kg";

export const ALL_MODES: QaMode[] = ["agnostic", "rulebook", "rulebook_kg"];

export interface Hit {
  chunk_id: string;
  score: number;
  text: string;
}

export interface Fact {
  subject: string;
  predicate: string;
  text: string;
}

export interface AskResponse {
  answer: string;
  mode: QaMode;
  hits: Hit[];
  facts: Fact[];
  prompt_hash: string;
  latency_ms: number;
}

export interface StageError {
  stage: string;
  type: string;
  message: string;
}

export interface HealthInfo {
  status: string;
  backend: string;
  corpus_loaded: boolean;
}

export interface CorpusStats {
  documents: number;
  chunks: number;
  tables: number;
}

export type TurnStatus = "pending" | "answered" | "failed";

export interface ChatTurn {
  turn_id: number;
  question: string;
  mode: QaMode;
  status: TurnStatus;
  answer?: string;
  hits: Hit[];
  facts: Fact[];
  error?: StageError;
}
