import type {
  AskResponse,
  CorpusStats,
  HealthInfo,
  QaMode,
  StageError,
} from "./types.js";

/** A service refusal or failure, attributed to its pipeline stage. */
export class AskFailure extends Error {
  constructor(
    readonly stage: string,
    readonly kind: string,
    message: string,
  ) {
    super(message);
    this.name = "AskFailure";
  }

  toStageError(): StageError {
    return { stage: this.stage, type: this.kind, message: this.message };
  }
}

async function stageErrorFrom(response: Response): Promise<AskFailure> {
  // error bodies look like {"error": {"stage", "type", "message"}}; fall
  // back to the bare status when the body is not in that shape
  let stage = "request";
  let kind = "HttpError";
  let message = `HTTP ${response.status}`;
  try {
    const parsed = await response.json();
    const error = parsed?.error;
    if (error && typeof error === "object") {
      stage = typeof error.stage === "string" ? error.stage : stage;
      kind = typeof error.type === "string" ? error.type : kind;
      message = typeof error.message === "string" ? error.message : message;
    }
  } catch {
    // unparseable body, keep the fallback
  }
  return new AskFailure(stage, kind, message);
}

export class QaClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async ask(question: string, mode: QaMode, k?: number): Promise<AskResponse> {
    const body: Record<string, unknown> = { question, mode };
    if (k !== undefined) {
      body.k = k;
    }
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/v1/ask`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new AskFailure("request", "NetworkError", String(err));
    }
    if (!response.ok) {
      throw await stageErrorFrom(response);
    }
    return (await response.json()) as AskResponse;
  }

  async health(): Promise<HealthInfo> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/health`);
    if (!response.ok) {
      throw await stageErrorFrom(response);
    }
    return (await response.json()) as HealthInfo;
  }

  async stats(): Promise<CorpusStats> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/corpus/stats`);
    if (!response.ok) {
      throw await stageErrorFrom(response);
    }
    return (await response.json()) as CorpusStats;
  }
}
