/** Thin typed client over the session endpoints. All chat logic lives on the
 * server; this module only moves JSON. */

import type { ConversationPayload, TurnResultPayload } from "./types.js";

export interface SessionApi {
  createSession(): Promise<string>;
  ask(sessionId: string, question: string): Promise<TurnResultPayload>;
  history(sessionId: string): Promise<ConversationPayload>;
}

export class HttpError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class HttpSessionApi implements SessionApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new HttpError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async createSession(): Promise<string> {
    const body = await this.request<{ session_id: string }>("/v1/sessions", {
      method: "POST",
    });
    return body.session_id;
  }

  ask(sessionId: string, question: string): Promise<TurnResultPayload> {
    return this.request<TurnResultPayload>(
      `/v1/sessions/${encodeURIComponent(sessionId)}/turns`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ question }),
      },
    );
  }

  history(sessionId: string): Promise<ConversationPayload> {
    return this.request<ConversationPayload>(
      `/v1/sessions/${encodeURIComponent(sessionId)}`,
    );
  }
}
