// Browser bootstrap: wires the controller to the three panes.

import { ApiClient } from "./api.js";
import { renderJustification, renderNotice, renderState, renderTranscript } from "./render.js";
import { SessionController } from "./session.js";

declare global {
  interface Window {
    STAR_API_BASE?: string;
  }
}

function apiBase(): string {
  return window.STAR_API_BASE ?? "http://127.0.0.1:8000";
}

function byId(id: string): HTMLElement {
  const element = document.getElementById(id);
  if (!element) {
    throw new Error(`missing element #${id}`);
  }
  return element;
}

export function repaint(controller: SessionController): void {
  const session = controller.session;
  if (!session) {
    return;
  }
  byId("transcript").innerHTML = renderTranscript(session);
  byId("state").innerHTML = renderState(session.stateView);
  byId("justification").innerHTML = renderJustification(session.lastJustification);
  byId("notice").innerHTML = renderNotice(controller.notice);
  const input = byId("input") as HTMLInputElement;
  const send = byId("send") as HTMLButtonElement;
  input.disabled = controller.inFlight || session.closed;
  send.disabled = controller.inFlight || session.closed;
  const retryButton = document.getElementById("retry");
  if (retryButton) {
    retryButton.addEventListener("click", () => {
      void controller.retry().then(() => repaint(controller));
    });
  }
  const pane = byId("transcript");
  pane.scrollTop = pane.scrollHeight;
}

export async function boot(): Promise<void> {
  const controller = new SessionController(new ApiClient(apiBase()));
  await controller.start();
  repaint(controller);

  const input = byId("input") as HTMLInputElement;
  const submit = async () => {
    const sent = await controller.send(input.value);
    if (sent) {
      input.value = "";
    }
    repaint(controller);
  };
  byId("send").addEventListener("click", () => void submit());
  input.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") {
      void submit();
    }
  });
  byId("new-conversation").addEventListener("click", () => {
    void controller.newConversation().then(() => repaint(controller));
  });
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  void boot();
}
