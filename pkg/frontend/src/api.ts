// Typed fetch client for the collection service. The only
// respondent-supplied values that ever go on the wire are a variable id
// and the yes/no membership answer.

export interface ServiceErrorBody {
  code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class SessionExpiredError extends ApiError {
  constructor(message: string) {
    super(410, "session_expired", message);
    this.name = "SessionExpiredError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SurveyClient {
  createSession(variableId: string): Promise<string>;
  fetchQuestion(sessionId: string): Promise<string[]>;
  submitAnswer(sessionId: string, inSubset: boolean): Promise<string[]>;
  exportCsv(variableId: string): Promise<string>;
}

async function parseError(response: Response): Promise<ApiError> {
  let body: Partial<ServiceErrorBody> = {};
  try {
    body = (await response.json()) as Partial<ServiceErrorBody>;
  } catch {
    // non-JSON error body: fall through to the generic message
  }
  const code = body.code ?? "http_error";
  const message = body.message ?? `request failed with status ${response.status}`;
  if (code === "session_expired") {
    return new SessionExpiredError(message);
  }
  return new ApiError(response.status, code, message);
}

export function createClient(serviceUrl: string, fetchImpl?: FetchLike): SurveyClient {
  const base = serviceUrl.replace(/\/+$/, "");
  const doFetch: FetchLike = fetchImpl ?? ((url, init) => fetch(url, init));

  async function requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await doFetch(`${base}${path}`, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  return {
    async createSession(variableId: string): Promise<string> {
      const data = await requestJson<{ session_id: string }>("/sessions", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ variable_id: variableId }),
      });
      return data.session_id;
    },

    async fetchQuestion(sessionId: string): Promise<string[]> {
      const data = await requestJson<{ subset_labels: string[] }>(
        `/sessions/${sessionId}/question`,
      );
      return data.subset_labels;
    },

    async submitAnswer(sessionId: string, inSubset: boolean): Promise<string[]> {
      const data = await requestJson<{ stored_subset: string[] }>(
        `/sessions/${sessionId}/answer`,
        {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ in_subset: inSubset }),
        },
      );
      return data.stored_subset;
    },

    async exportCsv(variableId: string): Promise<string> {
      const response = await doFetch(`${base}/variables/${variableId}/export?format=csv`);
      if (!response.ok) {
        throw await parseError(response);
      }
      return response.text();
    },
  };
}
