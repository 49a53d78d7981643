// Client for the concierge session API. The transport is injectable so
// tests can intercept every request/response pair.

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface SessionCreated {
  id: string;
  greeting: string;
}

export interface MessageReply {
  bot_text: string;
  action_kind: "ask" | "recommend" | "fail" | "close";
  asked_attribute?: string;
  recommendations?: Record<string, string>[];
}

export interface StateView {
  predicates: string[];
}

export interface JustificationView {
  justification: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`api error ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string; error?: string };
    detail = body.detail ?? body.error ?? detail;
  } catch {
    // keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  createSession(): Promise<SessionCreated> {
    return this.request<SessionCreated>("/session", { method: "POST" });
  }

  sendMessage(sessionId: string, text: string): Promise<MessageReply> {
    return this.request<MessageReply>(`/session/${sessionId}/message`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  getState(sessionId: string): Promise<StateView> {
    return this.request<StateView>(`/session/${sessionId}/state`);
  }

  getJustification(sessionId: string): Promise<JustificationView> {
    return this.request<JustificationView>(`/session/${sessionId}/justification`);
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request(`/session/${sessionId}`, { method: "DELETE" });
  }
}
