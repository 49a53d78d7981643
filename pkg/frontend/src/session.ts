// Conversation state for the page. Every displayed predicate and
// justification string comes from a server response; the client never
// derives or rewrites them.

import { ApiClient, ApiError, MessageReply } from "./api.js";

export type Speaker = "user" | "bot";

export interface UiSession {
  sessionId: string;
  transcript: [Speaker, string][];
  stateView: string[];
  lastJustification: string;
  lastActionKind: MessageReply["action_kind"] | null;
  closed: boolean;
}

export interface Notice {
  kind: "rephrase" | "network";
  text: string;
  retryText?: string;
}

export class SessionController {
  session: UiSession | null = null;
  notice: Notice | null = null;
  inFlight = false;

  constructor(private readonly api: ApiClient) {}

  async start(): Promise<UiSession> {
    const created = await this.api.createSession();
    this.session = {
      sessionId: created.id,
      transcript: [["bot", created.greeting]],
      stateView: [],
      lastJustification: "",
      lastActionKind: null,
      closed: false,
    };
    this.notice = null;
    return this.session;
  }

  async newConversation(): Promise<UiSession> {
    if (this.session) {
      try {
        await this.api.deleteSession(this.session.sessionId);
      } catch {
        // already expired or gone; a fresh session is the point
      }
    }
    return this.start();
  }

  // Sends one user message. Returns false when nothing was sent (empty
  // input, request already in flight, or the conversation is over).
  async send(text: string): Promise<boolean> {
    const session = this.session;
    const trimmed = text.trim();
    if (!session || session.closed || this.inFlight || trimmed === "") {
      return false;
    }
    this.inFlight = true;
    try {
      const reply = await this.api.sendMessage(session.sessionId, trimmed);
      session.transcript.push(["user", trimmed]);
      session.transcript.push(["bot", reply.bot_text]);
      session.lastActionKind = reply.action_kind;
      if (reply.action_kind === "close") {
        session.closed = true;
        this.notice = null;
        return true;
      }
      const [state, justification] = await Promise.all([
        this.api.getState(session.sessionId),
        this.api.getJustification(session.sessionId),
      ]);
      session.stateView = state.predicates;
      session.lastJustification = justification.justification;
      this.notice = null;
      return true;
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        this.notice = {
          kind: "rephrase",
          text: "Could not understand, please rephrase.",
        };
      } else {
        this.notice = {
          kind: "network",
          text: "The server could not be reached. Retry?",
          retryText: trimmed,
        };
      }
      return false;
    } finally {
      this.inFlight = false;
    }
  }

  async retry(): Promise<boolean> {
    if (this.notice?.kind !== "network" || !this.notice.retryText) {
      return false;
    }
    return this.send(this.notice.retryText);
  }
}

// Transcript alternation: bot greeting first, then strictly user/bot pairs.
export function alternationHolds(transcript: [Speaker, string][]): boolean {
  if (transcript.length === 0 || transcript[0]?.[0] !== "bot") {
    return false;
  }
  for (let i = 1; i < transcript.length; i += 1) {
    const expected: Speaker = i % 2 === 1 ? "user" : "bot";
    if (transcript[i]?.[0] !== expected) {
      return false;
    }
  }
  return true;
}
