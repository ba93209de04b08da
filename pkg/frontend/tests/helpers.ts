import type { AskResponse } from "../src/types.js";

export function fakeResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  } as unknown as Response;
}

/** A fetch stub that records calls and replays queued responses in order. */
export function fakeFetch(responses: Response[]) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const fn = async (url: string | URL | Request, init?: RequestInit) => {
    calls.push({ url: String(url), init });
    const next = responses.shift();
    if (!next) {
      throw new Error("fetch called more times than responses were queued");
    }
    return next;
  };
  return { calls, fetchFn: fn as unknown as typeof fetch };
}

export function deferred<T>() {
  let resolve!: (value: T) => void;
  let reject!: (reason: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

/** Let queued microtasks and zero-delay timers run. */
export function settle(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

export function askResponse(overrides: Partial<AskResponse> = {}): AskResponse {
  return {
    answer: "The radiation treatment benefit payment is (Daily hospitalization amount) x 10",
    mode: "rulebook_kg",
    hits: [
      {
        chunk_id: "womens-medical#3",
        score: 0.6821131815861516,
        text: "Article 6. (Radiation treatment benefits) ...",
      },
      {
        chunk_id: "womens-medical#1",
        score: 0.46436884315295573,
        text: "Article 4. (Hospitalization benefits) ...",
      },
    ],
    facts: [
      {
        subject: "Radiation therapy",
        predicate: "abstract",
        text: "Radiation therapy is a cancer treatment that uses ionizing radiation.",
      },
    ],
    prompt_hash: "37e6c9d6dd8cd3f8",
    latency_ms: 1,
    ...overrides,
  };
}
