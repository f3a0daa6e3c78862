/** Browser entry point: wires the controller to the DOM and re-renders the
 * whole app on every state change. The session id is kept in sessionStorage
 * so a reload can replay the transcript from the server. */

import { HttpSessionApi } from "./api.js";
import { ChatController } from "./state.js";
import { renderApp } from "./view.js";
import { toElement } from "./vdom.js";

const SESSION_KEY = "convqa.session";

function bootstrap(): void {
  const root = document.getElementById("root");
  if (!root) throw new Error("missing #root element");

  const storedSession = window.sessionStorage.getItem(SESSION_KEY);
  const controller = new ChatController(new HttpSessionApi(""), storedSession);

  const redraw = () => {
    const state = controller.getState();
    if (state.sessionId) window.sessionStorage.setItem(SESSION_KEY, state.sessionId);
    root.replaceChildren(toElement(renderApp(state), document));
    const input = root.querySelector<HTMLInputElement>(".composer-input");
    if (input && !state.inFlight) input.focus();
  };

  controller.subscribe(redraw);

  root.addEventListener("submit", (event) => {
    const form = event.target as HTMLElement;
    if (form.getAttribute("data-action") !== "composer") return;
    event.preventDefault();
    const input = root.querySelector<HTMLInputElement>(".composer-input");
    if (!input) return;
    const question = input.value;
    input.value = "";
    void controller.sendQuestion(question);
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.getAttribute("data-action") !== "retry") return;
    const question = target.getAttribute("data-question") ?? "";
    void controller.retry(question);
  });

  redraw();
  if (storedSession) {
    controller.loadHistory().catch(() => {
      // stale session id (server restarted without a snapshot): start fresh
      window.sessionStorage.removeItem(SESSION_KEY);
    });
  }
}

bootstrap();
