import { AskFailure, QaClient } from "./api.js";
import type { ChatTurn, QaMode } from "./types.js";

/**
 * Client-side chat state: the turn history, the session mode, and a FIFO
 * queue that keeps at most one question on the wire at a time.
 *
 * Each turn snapshots the mode at submission, so toggling the selector
 * only affects turns submitted afterwards.
 */
export class ChatStore {
  turns: ChatTurn[] = [];
  mode: QaMode = "rulebook_kg";
  corpusLoaded = true;

  private queue: ChatTurn[] = [];
  private inFlight = false;
  private nextId = 1;
  private listeners: Array<() => void> = [];

  constructor(private readonly client: QaClient) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  /** Without a corpus only agnostic mode makes sense; other picks are ignored. */
  setMode(mode: QaMode): void {
    if (!this.corpusLoaded && mode !== "agnostic") {
      return;
    }
    this.mode = mode;
    this.emit();
  }

  setCorpusLoaded(loaded: boolean): void {
    this.corpusLoaded = loaded;
    if (!loaded) {
      this.mode = "agnostic";
    }
    this.emit();
  }

  /**
   * Append a pending turn and schedule it. Blank input sends nothing and
   * returns null so the caller can keep the text box as-is.
   */
  submit(text: string): ChatTurn | null {
    const question = text.trim();
    if (!question) {
      return null;
    }
    const turn: ChatTurn = {
      turn_id: this.nextId++,
      question,
      mode: this.mode,
      status: "pending",
      hits: [],
      facts: [],
    };
    this.turns.push(turn);
    this.queue.push(turn);
    this.emit();
    void this.drain();
    return turn;
  }

  private async drain(): Promise<void> {
    if (this.inFlight) {
      return;
    }
    const turn = this.queue.shift();
    if (!turn) {
      return;
    }
    this.inFlight = true;
    try {
      const response = await this.client.ask(turn.question, turn.mode);
      turn.status = "answered";
      turn.answer = response.answer;
      turn.hits = response.hits;
      turn.facts = response.facts;
    } catch (err) {
      turn.status = "failed";
      turn.error =
        err instanceof AskFailure
          ? err.toStageError()
          : { stage: "request", type: "NetworkError", message: String(err) };
    } finally {
      this.inFlight = false;
      this.emit();
      void this.drain();
    }
  }
}
