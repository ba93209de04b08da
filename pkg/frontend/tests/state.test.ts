import { describe, expect, it, vi } from "vitest";

import { AskFailure, QaClient } from "../src/api.js";
import { ChatStore } from "../src/state.js";
import type { AskResponse } from "../src/types.js";
import { askResponse, deferred, settle } from "./helpers.js";

function storeWith(ask: (...args: unknown[]) => Promise<AskResponse>) {
  const askSpy = vi.fn(ask);
  const client = { ask: askSpy } as unknown as QaClient;
  return { store: new ChatStore(client), askSpy };
}

describe("submitting", () => {
  it("appends a pending turn that transitions to answered with the body's hits and facts", async () => {
    const d = deferred<AskResponse>();
    const { store } = storeWith(() => d.promise);

    const turn = store.submit("How much is the benefit?");
    expect(turn).not.toBeNull();
    expect(store.turns).toHaveLength(1);
    expect(store.turns[0]!.status).toBe("pending");

    const body = askResponse();
    d.resolve(body);
    await settle();

    expect(store.turns[0]!.status).toBe("answered");
    expect(store.turns[0]!.answer).toBe(body.answer);
    expect(store.turns[0]!.hits).toEqual(body.hits);
    expect(store.turns[0]!.facts).toEqual(body.facts);
  });

  it("rejects blank input without sending anything", () => {
    const { store, askSpy } = storeWith(async () => askResponse());
    expect(store.submit("")).toBeNull();
    expect(store.submit("   ")).toBeNull();
    expect(store.turns).toHaveLength(0);
    expect(askSpy).not.toHaveBeenCalled();
  });

  it("marks the turn failed with the stage carried by the service error", async () => {
    const { store } = storeWith(async () => {
      throw new AskFailure("llm", "ReplayMiss", "no recording for prompt");
    });
    store.submit("q");
    await settle();
    expect(store.turns[0]!.status).toBe("failed");
    expect(store.turns[0]!.error).toEqual({
      stage: "llm",
      type: "ReplayMiss",
      message: "no recording for prompt",
    });
  });

  it("wraps non-service failures as request-stage errors", async () => {
    const { store } = storeWith(async () => {
      throw new Error("boom");
    });
    store.submit("q");
    await settle();
    expect(store.turns[0]!.status).toBe("failed");
    expect(store.turns[0]!.error?.stage).toBe("request");
  });

  it("notifies subscribers on append and on resolution", async () => {
    const { store } = storeWith(async () => askResponse());
    const seen: string[] = [];
    store.subscribe(() => seen.push(store.turns.map((t) => t.status).join(",")));
    store.submit("q");
    await settle();
    expect(seen[0]).toBe("pending");
    expect(seen[seen.length - 1]).toBe("answered");
  });
});

describe("one question in flight", () => {
  it("queues further submissions and drains them in order", async () => {
    const gates = [deferred<AskResponse>(), deferred<AskResponse>(), deferred<AskResponse>()];
    let served = 0;
    const { store, askSpy } = storeWith(() => gates[served++]!.promise);

    store.submit("first");
    store.submit("second");
    store.submit("third");
    expect(store.turns.map((t) => t.status)).toEqual([
      "pending",
      "pending",
      "pending",
    ]);
    expect(askSpy).toHaveBeenCalledTimes(1);

    gates[0]!.resolve(askResponse({ answer: "one" }));
    await settle();
    expect(askSpy).toHaveBeenCalledTimes(2);
    expect(store.turns[0]!.answer).toBe("one");
    expect(store.turns[1]!.status).toBe("pending");

    gates[1]!.resolve(askResponse({ answer: "two" }));
    await settle();
    gates[2]!.resolve(askResponse({ answer: "three" }));
    await settle();
    expect(store.turns.map((t) => t.answer)).toEqual(["one", "two", "three"]);
  });

  it("keeps draining after a failure in the middle", async () => {
    let call = 0;
    const { store } = storeWith(async () => {
      call += 1;
      if (call === 1) {
        throw new AskFailure("retrieval", "EmptyIndex", "no corpus");
      }
      return askResponse({ answer: "recovered" });
    });
    store.submit("first");
    store.submit("second");
    await settle();
    expect(store.turns[0]!.status).toBe("failed");
    expect(store.turns[1]!.status).toBe("answered");
    expect(store.turns[1]!.answer).toBe("recovered");
  });
});

describe("mode selection", () => {
  it("stamps each turn with the mode at submission; toggling affects only later turns", async () => {
    const { store, askSpy } = storeWith(async () => askResponse());
    expect(store.mode).toBe("rulebook_kg");

    store.submit("before the toggle");
    store.setMode("agnostic");
    store.submit("after the toggle");
    await settle();

    expect(store.turns[0]!.mode).toBe("rulebook_kg");
    expect(store.turns[1]!.mode).toBe("agnostic");
    expect(askSpy).toHaveBeenNthCalledWith(1, "before the toggle", "rulebook_kg");
    expect(askSpy).toHaveBeenNthCalledWith(2, "after the toggle", "agnostic");
  });

  it("locks the mode to agnostic while no corpus is loaded", () => {
    const { store } = storeWith(async () => askResponse());
    store.setCorpusLoaded(false);
    expect(store.mode).toBe("agnostic");
    store.setMode("rulebook_kg");
    expect(store.mode).toBe("agnostic");
    store.setCorpusLoaded(true);
    store.setMode("rulebook_kg");
    expect(store.mode).toBe("rulebook_kg");
  });
});
