/**
 * Session client: join as a character, stream the performance, send turns.
 *
 * Consumes exactly the service's HTTP endpoints and event-stream format.
 * The transport is injectable so tests (and non-browser hosts) can stub it;
 * reconnects resume from the last seen sequence number, and resends reuse
 * the same client_seq, which the server treats as an idempotent no-op.
 */

import { StageView, emptyView, ingest } from "./feed.js";
import { TurnFields, composeWire } from "./markup.js";
import {
  InputAck,
  SessionDescriptor,
  TranscriptEvent,
  parseEvent,
} from "./protocol.js";
import { SseParser } from "./sse.js";

export interface Transport {
  getJson(path: string): Promise<unknown>;
  postJson(path: string, body: unknown): Promise<unknown>;
  /** Open a streaming GET; deliver raw chunks until the returned closer runs. */
  openStream(path: string, onChunk: (chunk: string) => void, onEnd: () => void): () => void;
}

export class JoinError extends Error {}

export interface ClientEvents {
  onEvent?: (event: TranscriptEvent, view: StageView) => void;
  onEnd?: (view: StageView) => void;
}

export class SessionClient {
  readonly view: StageView;
  private clientSeq = 0;
  private closeStream: (() => void) | null = null;

  private constructor(
    private readonly transport: Transport,
    readonly sessionId: string,
    readonly actor: string | null,
    readonly descriptor: SessionDescriptor,
    private readonly hooks: ClientEvents,
  ) {
    this.view = emptyView(actor);
  }

  /**
   * Join a session as a human-controlled character, or as a spectator when
   * actor is null.  Joining an AI-controlled character is refused.
   */
  static async join(
    transport: Transport,
    sessionId: string,
    actor: string | null,
    hooks: ClientEvents = {},
  ): Promise<SessionClient> {
    let descriptor: SessionDescriptor;
    try {
      descriptor = (await transport.getJson(`/sessions/${sessionId}`)) as SessionDescriptor;
    } catch (error) {
      throw new JoinError(`unknown session ${sessionId}: ${String(error)}`);
    }
    if (actor !== null) {
      const controller = descriptor.roster[actor];
      if (controller === undefined) {
        throw new JoinError(`${actor} is not a character in this session`);
      }
      if (controller !== "human") {
        throw new JoinError(`${actor} is played by an AI actor`);
      }
    }
    const client = new SessionClient(transport, sessionId, actor, descriptor, hooks);
    client.subscribe();
    return client;
  }

  /** (Re)subscribe from the last seen seq; safe to call after a disconnect. */
  subscribe(): void {
    this.closeStream?.();
    const viewer = this.actor ?? "spectator";
    const path = `/sessions/${this.sessionId}/events?viewer=${encodeURIComponent(viewer)}&since=${this.view.lastSeq}`;
    const parser = new SseParser();
    this.closeStream = this.transport.openStream(
      path,
      (chunk) => {
        for (const sse of parser.feed(chunk)) {
          if (sse.event === "end") {
            this.hooks.onEnd?.(this.view);
            continue;
          }
          if (sse.event !== "transcript") continue;
          const event = parseEvent(sse.data);
          if (ingest(this.view, event)) {
            this.hooks.onEvent?.(event, this.view);
          }
        }
      },
      () => this.hooks.onEnd?.(this.view),
    );
  }

  close(): void {
    this.closeStream?.();
    this.closeStream = null;
  }

  /**
   * Compose a turn from the three fields and send it.  The wire text follows
   * the mapping-rule order (action) [thinking] speech; a retry resends the
   * same client_seq and the server acknowledges without re-executing.
   */
  async composeAndSend(fields: TurnFields): Promise<InputAck> {
    if (this.actor === null) {
      throw new JoinError("spectators cannot send turns");
    }
    if (!fields.speech && !fields.action && !fields.thinking) {
      throw new JoinError("compose at least one of speech, action, thinking");
    }
    this.clientSeq += 1;
    return this.sendRaw(composeWire(fields), this.clientSeq);
  }

  /** Resend (idempotent): reuses a previous client_seq after a network retry. */
  async sendRaw(text: string, clientSeq: number): Promise<InputAck> {
    return (await this.transport.postJson(`/sessions/${this.sessionId}/input`, {
      actor: this.actor,
      text,
      client_seq: clientSeq,
    })) as InputAck;
  }

  get lastClientSeq(): number {
    return this.clientSeq;
  }
}
