/** Chat session state machine.
 *
 * The state is a pure projection of the server's history plus in-flight
 * flags: bubbles mirror accepted turns, `inFlight` mirrors the one turn the
 * server may be running for this session, and a reload followed by a
 * history fetch rebuilds the same transcript. At most one request is in
 * flight at a time; submissions while busy are ignored (the server would
 * answer 409 anyway).
 */

import { HttpError, type SessionApi } from "./api.js";
import type { TurnResultPayload } from "./types.js";

export type Bubble =
  | { kind: "user"; text: string }
  | { kind: "assistant"; text: string; turn: TurnResultPayload | null }
  | { kind: "error"; text: string; question: string };

export interface ChatState {
  sessionId: string | null;
  bubbles: Bubble[];
  inFlight: boolean;
  toast: string | null;
}

export const BUSY_TOAST = "previous turn still running";

export function initialState(sessionId: string | null = null): ChatState {
  return { sessionId, bubbles: [], inFlight: false, toast: null };
}

type Listener = (state: ChatState) => void;

export class ChatController {
  private state: ChatState;
  private listeners: Listener[] = [];

  constructor(
    private readonly api: SessionApi,
    sessionId: string | null = null,
  ) {
    this.state = initialState(sessionId);
  }

  getState(): ChatState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private update(next: ChatState): void {
    this.state = next;
    for (const listener of this.listeners) listener(next);
  }

  /** Rebuild the transcript from the server (page reload path). */
  async loadHistory(): Promise<void> {
    const { sessionId } = this.state;
    if (!sessionId) return;
    const conversation = await this.api.history(sessionId);
    const bubbles: Bubble[] = [];
    for (const turn of conversation.turns) {
      bubbles.push({ kind: "user", text: turn.question });
      bubbles.push({ kind: "assistant", text: turn.response, turn: null });
    }
    this.update({ ...this.state, bubbles, toast: null });
  }

  /** Send one question. Ignored while a turn is already in flight. */
  async sendQuestion(questionText: string): Promise<void> {
    const question = questionText.trim();
    if (!question || this.state.inFlight) return;
    const optimistic: Bubble = { kind: "user", text: question };
    this.update({
      ...this.state,
      bubbles: [...this.state.bubbles, optimistic],
      inFlight: true,
      toast: null,
    });
    await this.dispatch(question);
  }

  /** Re-send the identical question from an error bubble, dropping it. */
  async retry(question: string): Promise<void> {
    if (this.state.inFlight) return;
    const bubbles = [...this.state.bubbles];
    const last = bubbles[bubbles.length - 1];
    if (last && last.kind === "error" && last.question === question) bubbles.pop();
    this.update({ ...this.state, bubbles, inFlight: true, toast: null });
    await this.dispatch(question);
  }

  private async dispatch(question: string): Promise<void> {
    try {
      let sessionId = this.state.sessionId;
      if (!sessionId) {
        sessionId = await this.api.createSession();
        this.update({ ...this.state, sessionId });
      }
      const turn = await this.api.ask(sessionId, question);
      this.update({
        ...this.state,
        bubbles: [
          ...this.state.bubbles,
          { kind: "assistant", text: turn.response, turn },
        ],
        inFlight: false,
      });
    } catch (error) {
      if (error instanceof HttpError && error.status === 409) {
        // the optimistic user bubble was not accepted; roll it back
        const bubbles = this.state.bubbles.slice(0, -1);
        this.update({ ...this.state, bubbles, inFlight: false, toast: BUSY_TOAST });
        return;
      }
      const detail = error instanceof Error ? error.message : String(error);
      this.update({
        ...this.state,
        bubbles: [
          ...this.state.bubbles,
          { kind: "error", text: detail, question },
        ],
        inFlight: false,
      });
    }
  }
}
