// Pure HTML renderers over the session state. Strings are escaped and
// displayed as-is; nothing is computed client-side.

import { Notice, UiSession } from "./session.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTranscript(session: UiSession): string {
  const rows = session.transcript.map(([speaker, text]) => {
    return `<div class="turn ${speaker}"><span class="speaker">${speaker === "bot" ? "Bot" : "You"}</span>${escapeHtml(text)}</div>`;
  });
  return rows.join("\n");
}

export function renderState(predicates: string[]): string {
  if (predicates.length === 0) {
    return `<div class="empty">no constraints yet</div>`;
  }
  return predicates
    .map((predicate) => `<div class="predicate">${escapeHtml(predicate)}</div>`)
    .join("\n");
}

export function renderJustification(text: string): string {
  if (text === "") {
    return `<div class="empty">no reasoning to show yet</div>`;
  }
  return `<pre>${escapeHtml(text)}</pre>`;
}

export function renderNotice(notice: Notice | null): string {
  if (notice === null) {
    return "";
  }
  const retry = notice.kind === "network" ? ` <button id="retry">retry</button>` : "";
  return `<div class="notice ${notice.kind}">${escapeHtml(notice.text)}${retry}</div>`;
}
