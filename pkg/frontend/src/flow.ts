// The survey flow: one membership question per variable.
//
// For each variable the flow creates a session, fetches the served
// subset, asks the respondent whether their value is one of the listed
// labels (a yes/no, never the value itself), submits the boolean, and
// surfaces the stored subset back for verification. Expired sessions
// restart cleanly with a fresh session; network failures are retried
// only with the respondent's consent, so an abandoned survey leaves no
// partial record.

import { SessionExpiredError, type SurveyClient } from "./api.js";
import { sizeLeakage, type PublishedEstimate } from "./privacy.js";

export interface QuestionView {
  variableId: string;
  labels: string[];
}

export interface CompletedResponse {
  variableId: string;
  storedSubset: string[];
  sizeLeakage: number | null;
}

export interface RespondentIO {
  // present the membership question and resolve with the yes/no answer
  askMembership(view: QuestionView): Promise<boolean>;
  showResult(result: CompletedResponse): void;
  // a network call failed; resolve true to retry, false to abort
  confirmRetry(error: Error): Promise<boolean>;
}

export interface FlowOptions {
  publishedEstimate?: PublishedEstimate | null;
  // restarts after session expiry before giving up
  maxRestarts?: number;
}

class FlowAborted extends Error {
  constructor() {
    super("survey aborted by respondent");
    this.name = "FlowAborted";
  }
}

async function withRetry<T>(io: RespondentIO, call: () => Promise<T>): Promise<T> {
  for (;;) {
    try {
      return await call();
    } catch (error) {
      // protocol-level errors (4xx) are not retriable network failures
      if (error instanceof SessionExpiredError) {
        throw error;
      }
      if (error instanceof Error && error.name === "ApiError") {
        throw error;
      }
      const again = await io.confirmRetry(error as Error);
      if (!again) {
        throw new FlowAborted();
      }
    }
  }
}

async function collectOne(
  client: SurveyClient,
  variableId: string,
  io: RespondentIO,
  options: FlowOptions,
): Promise<CompletedResponse> {
  const maxRestarts = options.maxRestarts ?? 3;
  for (let attempt = 0; ; attempt += 1) {
    try {
      const sessionId = await withRetry(io, () => client.createSession(variableId));
      const labels = await withRetry(io, () => client.fetchQuestion(sessionId));
      const inSubset = await io.askMembership({ variableId, labels });
      const stored = await withRetry(io, () => client.submitAnswer(sessionId, inSubset));
      const result: CompletedResponse = {
        variableId,
        storedSubset: stored,
        sizeLeakage: sizeLeakage(stored, options.publishedEstimate),
      };
      io.showResult(result);
      return result;
    } catch (error) {
      if (error instanceof SessionExpiredError && attempt < maxRestarts) {
        continue; // a fresh session, nothing was stored
      }
      throw error;
    }
  }
}

export async function runSurveyFlow(
  client: SurveyClient,
  variableIds: string[],
  io: RespondentIO,
  options: FlowOptions = {},
): Promise<CompletedResponse[]> {
  const completed: CompletedResponse[] = [];
  for (const variableId of variableIds) {
    completed.push(await collectOne(client, variableId, io, options));
  }
  return completed;
}
