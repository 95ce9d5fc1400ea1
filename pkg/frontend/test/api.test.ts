import { describe, expect, it } from "vitest";

import { ApiError, createClient, SessionExpiredError, type FetchLike } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function fakeFetch(
  handler: (url: string, init?: RequestInit) => Response,
  log: Recorded[],
): FetchLike {
  return async (url, init) => {
    log.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    return handler(url, init);
  };
}

describe("createClient", () => {
  it("creates sessions and fetches questions", async () => {
    const log: Recorded[] = [];
    const client = createClient(
      "http://svc:1/",
      fakeFetch((url) => {
        if (url.endsWith("/sessions")) {
          return jsonResponse(200, { session_id: "s1", status: "open" });
        }
        return jsonResponse(200, { subset_labels: ["red", "blue"] });
      }, log),
    );
    const sid = await client.createSession("color");
    expect(sid).toBe("s1");
    expect(await client.fetchQuestion(sid)).toEqual(["red", "blue"]);
    expect(log[0]).toEqual({
      url: "http://svc:1/sessions",
      method: "POST",
      body: { variable_id: "color" },
    });
    expect(log[1].url).toBe("http://svc:1/sessions/s1/question");
  });

  it("submits boolean answers only", async () => {
    const log: Recorded[] = [];
    const client = createClient(
      "http://svc:1",
      fakeFetch(() => jsonResponse(200, { stored_subset: ["green", "black"] }), log),
    );
    const stored = await client.submitAnswer("s1", false);
    expect(stored).toEqual(["green", "black"]);
    expect(log[0].body).toEqual({ in_subset: false });
  });

  it("maps error bodies onto typed errors", async () => {
    const client = createClient(
      "http://svc:1",
      fakeFetch(() => jsonResponse(409, { code: "question_pending", message: "answer first" }), []),
    );
    await expect(client.fetchQuestion("s1")).rejects.toMatchObject({
      name: "ApiError",
      status: 409,
      code: "question_pending",
    });
  });

  it("recognizes expired sessions", async () => {
    const client = createClient(
      "http://svc:1",
      fakeFetch(() => jsonResponse(410, { code: "session_expired", message: "gone" }), []),
    );
    const error = await client.submitAnswer("s1", true).catch((e) => e);
    expect(error).toBeInstanceOf(SessionExpiredError);
    expect(error).toBeInstanceOf(ApiError);
  });

  it("exports CSV text", async () => {
    const client = createClient(
      "http://svc:1",
      fakeFetch(() => new Response("subset\n0;2\n", { status: 200 }), []),
    );
    expect(await client.exportCsv("color")).toBe("subset\n0;2\n");
  });
});
