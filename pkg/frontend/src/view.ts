/** Pure view builders: server payload + chat state in, virtual nodes out.
 * No retrieval logic here; paragraphs are shown exactly as the server
 * ranked and judged them. */

import type { Bubble, ChatState } from "./state.js";
import type { ParagraphPayload, TurnResultPayload, VerdictPayload } from "./types.js";
import { h, type VNode } from "./vdom.js";

const NO_EVIDENCE_NOTE = "answered from model knowledge";

function verdictFor(
  paragraph: ParagraphPayload,
  verdicts: VerdictPayload[],
): boolean {
  const verdict = verdicts.find((v) => v.paragraph_rank === paragraph.final_rank);
  return verdict ? verdict.helpful : true; // fail-open, like the engine
}

function paragraphCard(paragraph: ParagraphPayload, verdicts: VerdictPayload[]): VNode {
  const helpful = verdictFor(paragraph, verdicts);
  return h(
    "div",
    { class: "evidence-card" },
    h("span", { class: `badge ${helpful ? "badge-helpful" : "badge-not-helpful"}` },
      helpful ? "helpful" : "not helpful"),
    h("span", { class: "evidence-rank" }, `#${paragraph.final_rank ?? "?"}`),
    h("p", { class: "evidence-text" }, paragraph.text),
    paragraph.source_url
      ? h("a", { class: "evidence-source", href: paragraph.source_url, target: "_blank", rel: "noreferrer" }, "source")
      : null,
  );
}

/** Provenance panel: refined question, keyword chips, evidence cards. */
function provenancePanel(turn: TurnResultPayload): VNode {
  return h(
    "details",
    { class: "provenance" },
    h("summary", { class: "provenance-toggle" }, "how this was answered"),
    h("div", { class: "provenance-body" },
      h("p", { class: "refined-question" }, turn.refined_question.text),
      h("div", { class: "keyword-chips" },
        ...turn.keywords.map((keyword) => h("span", { class: "chip" }, keyword))),
      turn.top_paragraphs.length
        ? h("div", { class: "evidence-list" },
            ...turn.top_paragraphs.map((p) => paragraphCard(p, turn.verdicts)))
        : h("p", { class: "no-evidence-note" }, NO_EVIDENCE_NOTE),
    ),
  );
}

/** One assistant bubble. A payload without a trace renders response-only. */
export function renderTurn(turn: TurnResultPayload): VNode {
  const children: Array<VNode | string> = [
    h("p", { class: "response-text" }, turn.response),
  ];
  if (turn.trace !== undefined) {
    children.push(provenancePanel(turn));
  }
  return h("div", { class: "bubble assistant" }, ...children);
}

function renderBubble(bubble: Bubble): VNode {
  switch (bubble.kind) {
    case "user":
      return h("div", { class: "bubble user" }, h("p", {}, bubble.text));
    case "assistant":
      return bubble.turn
        ? renderTurn(bubble.turn)
        : h("div", { class: "bubble assistant" }, h("p", { class: "response-text" }, bubble.text));
    case "error":
      return h(
        "div",
        { class: "bubble error" },
        h("p", {}, bubble.text),
        h("button", { class: "retry", "data-action": "retry", "data-question": bubble.question }, "retry"),
      );
  }
}

export function renderTranscript(state: ChatState): VNode {
  return h(
    "div",
    { class: "transcript" },
    ...state.bubbles.map(renderBubble),
    state.inFlight ? h("div", { class: "bubble assistant thinking" }, "…") : null,
  );
}

export function renderComposer(state: ChatState): VNode {
  const disabled: Record<string, string> = state.inFlight ? { disabled: "disabled" } : {};
  return h(
    "form",
    { class: "composer", "data-action": "composer" },
    h("input", {
      class: "composer-input",
      name: "question",
      placeholder: "Ask a question…",
      autocomplete: "off",
      ...disabled,
    }),
    h("button", { class: "composer-send", type: "submit", ...disabled }, "send"),
  );
}

export function renderApp(state: ChatState): VNode {
  return h(
    "div",
    { class: "app" },
    h("header", { class: "topbar" },
      h("span", { class: "title" }, "convqa"),
      state.sessionId ? h("span", { class: "session-id" }, state.sessionId) : null),
    renderTranscript(state),
    state.toast ? h("div", { class: "toast" }, state.toast) : null,
    renderComposer(state),
  );
}
