import { describe, expect, it } from "vitest";

import { createClient, type FetchLike } from "../src/api.js";
import { runSurveyFlow, type CompletedResponse, type QuestionView, type RespondentIO } from "../src/flow.js";
import { sizeLeakage } from "../src/privacy.js";

const COLORS = ["black", "red", "green", "blue"];

interface WireRecord {
  url: string;
  body: unknown;
}

/** In-memory stand-in for the collection service, speaking its wire format. */
function fakeService(options: { expireFirstSubmit?: boolean; failFirstQuestion?: boolean } = {}) {
  const wire: WireRecord[] = [];
  const stored: string[][] = [];
  let sessions = 0;
  let pending: string[] | null = null;
  let expireNext = options.expireFirstSubmit ?? false;
  let failNext = options.failFirstQuestion ?? false;

  const fetchImpl: FetchLike = async (url, init) => {
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    wire.push({ url, body });
    const json = (status: number, payload: unknown) =>
      new Response(JSON.stringify(payload), { status });

    if (url.endsWith("/sessions")) {
      sessions += 1;
      return json(200, { session_id: `s${sessions}`, status: "open" });
    }
    if (url.endsWith("/question")) {
      if (failNext) {
        failNext = false;
        throw new TypeError("network down");
      }
      pending = ["red", "blue"];
      return json(200, { subset_labels: pending });
    }
    if (url.endsWith("/answer")) {
      if (expireNext) {
        expireNext = false;
        pending = null;
        return json(410, { code: "session_expired", message: "too slow" });
      }
      const labels = pending ?? [];
      pending = null;
      const subset = body.in_subset ? labels : COLORS.filter((c) => !labels.includes(c));
      stored.push(subset);
      return json(200, { stored_subset: subset });
    }
    return json(404, { code: "unknown", message: url });
  };

  return { fetchImpl, wire, stored, sessionCount: () => sessions };
}

function scriptedIO(answers: boolean[], retries: boolean[] = []): {
  io: RespondentIO;
  results: CompletedResponse[];
  questions: QuestionView[];
} {
  const results: CompletedResponse[] = [];
  const questions: QuestionView[] = [];
  const io: RespondentIO = {
    async askMembership(view) {
      questions.push(view);
      return answers.shift() ?? true;
    },
    showResult(result) {
      results.push(result);
    },
    async confirmRetry() {
      return retries.shift() ?? false;
    },
  };
  return { io, results, questions };
}

describe("runSurveyFlow", () => {
  it("answering yes stores the served subset", async () => {
    const service = fakeService();
    const client = createClient("http://svc", service.fetchImpl);
    const { io, results } = scriptedIO([true]);
    const completed = await runSurveyFlow(client, ["color"], io);
    expect(completed[0].storedSubset).toEqual(["red", "blue"]);
    expect(results[0].storedSubset).toEqual(["red", "blue"]);
  });

  it("answering no stores the complement", async () => {
    const service = fakeService();
    const client = createClient("http://svc", service.fetchImpl);
    const { io } = scriptedIO([false]);
    const completed = await runSurveyFlow(client, ["color"], io);
    expect(completed[0].storedSubset).toEqual(["black", "green"]);
  });

  it("transmits only the variable id and the boolean", async () => {
    const service = fakeService();
    const client = createClient("http://svc", service.fetchImpl);
    const { io } = scriptedIO([true, false]);
    await runSurveyFlow(client, ["color"], io);
    await runSurveyFlow(client, ["color"], io);
    for (const record of service.wire) {
      if (record.body === undefined) continue;
      const keys = Object.keys(record.body as object);
      expect(
        keys.length === 1 && (keys[0] === "variable_id" || keys[0] === "in_subset"),
      ).toBe(true);
      if ("in_subset" in (record.body as object)) {
        expect(typeof (record.body as { in_subset: unknown }).in_subset).toBe("boolean");
      }
    }
  });

  it("restarts cleanly after session expiry with no duplicate record", async () => {
    const service = fakeService({ expireFirstSubmit: true });
    const client = createClient("http://svc", service.fetchImpl);
    const { io } = scriptedIO([true, true]);
    const completed = await runSurveyFlow(client, ["color"], io);
    expect(completed).toHaveLength(1);
    expect(service.stored).toHaveLength(1);
    expect(service.sessionCount()).toBe(2);
  });

  it("retries network failures when the respondent agrees", async () => {
    const service = fakeService({ failFirstQuestion: true });
    const client = createClient("http://svc", service.fetchImpl);
    const { io } = scriptedIO([true], [true]);
    const completed = await runSurveyFlow(client, ["color"], io);
    expect(completed).toHaveLength(1);
    expect(service.stored).toHaveLength(1);
  });

  it("declining a retry leaves no record", async () => {
    const service = fakeService({ failFirstQuestion: true });
    const client = createClient("http://svc", service.fetchImpl);
    const { io } = scriptedIO([true], [false]);
    await expect(runSurveyFlow(client, ["color"], io)).rejects.toMatchObject({
      name: "FlowAborted",
    });
    expect(service.stored).toHaveLength(0);
  });

  it("attaches the privacy badge when an estimate is published", async () => {
    const service = fakeService();
    const client = createClient("http://svc", service.fetchImpl);
    const { io, results } = scriptedIO([true]);
    await runSurveyFlow(client, ["color"], io, {
      publishedEstimate: { black: 0.1, red: 0.2, green: 0.3, blue: 0.4 },
    });
    expect(results[0].sizeLeakage).toBeCloseTo(1 - 0.6, 12);
  });

  it("hides the badge without an estimate", async () => {
    const service = fakeService();
    const client = createClient("http://svc", service.fetchImpl);
    const { io, results } = scriptedIO([true]);
    await runSurveyFlow(client, ["color"], io);
    expect(results[0].sizeLeakage).toBeNull();
  });
});

describe("sizeLeakage", () => {
  it("computes one minus the covered mass", () => {
    expect(sizeLeakage(["red", "blue"], { black: 0.1, red: 0.2, green: 0.3, blue: 0.4 }))
      .toBeCloseTo(0.4, 12);
  });

  it("is null without an estimate or with unknown labels", () => {
    expect(sizeLeakage(["red"], null)).toBeNull();
    expect(sizeLeakage(["red"], { blue: 1.0 })).toBeNull();
    expect(sizeLeakage([], { red: 1.0 })).toBeNull();
  });
});
