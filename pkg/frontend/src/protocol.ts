/** Wire types mirroring the session service's JSON exactly. */

export type EventKind =
  | "speech"
  | "action_attempt"
  | "action_result"
  | "broadcast"
  | "thinking"
  | "instruction"
  | "system";

export interface ResponseParts {
  speech: string | null;
  action: string | null;
  thinking: string | null;
}

export interface Visibility {
  scope: "all" | "private";
  actor: string | null;
}

export interface StateUpdate {
  prop: string;
  key: string;
  old: string | null;
  new: string;
}

export interface TranscriptEvent {
  seq: number;
  ts: number;
  kind: EventKind | string;
  speaker: string;
  parts: ResponseParts;
  visibility: Visibility;
  data: Record<string, unknown> | null;
}

export interface SessionDescriptor {
  session_id: string;
  status: "planning" | "performing" | "completed" | "aborted";
  created_at: number;
  roster: Record<string, "ai" | "human">;
  turn_budget: number;
  clock: string;
  blueprint_hash: string;
}

export interface InputAck {
  status: "accepted" | "duplicate";
  executed: boolean;
  seq_start?: number;
  seq_end?: number;
}

/** The canonical line a failed action always broadcasts. */
export const FAILURE_LINE = "Action failure, nothing happened.";

export function parseEvent(json: string): TranscriptEvent {
  const raw = JSON.parse(json) as Partial<TranscriptEvent>;
  if (typeof raw.seq !== "number" || typeof raw.kind !== "string" || typeof raw.speaker !== "string") {
    throw new Error(`not a transcript event: ${json.slice(0, 80)}`);
  }
  return {
    seq: raw.seq,
    ts: typeof raw.ts === "number" ? raw.ts : 0,
    kind: raw.kind,
    speaker: raw.speaker,
    parts: {
      speech: raw.parts?.speech ?? null,
      action: raw.parts?.action ?? null,
      thinking: raw.parts?.thinking ?? null,
    },
    visibility: {
      scope: raw.visibility?.scope === "private" ? "private" : "all",
      actor: raw.visibility?.actor ?? null,
    },
    data: raw.data ?? null,
  };
}

/** Server-side rule, mirrored for fixture playback: null viewer = spectator. */
export function visibleTo(event: TranscriptEvent, viewer: string | null): boolean {
  if (event.visibility.scope === "all") return true;
  return viewer !== null && event.visibility.actor === viewer;
}

export function eventText(event: TranscriptEvent): string {
  return event.parts.speech ?? event.parts.action ?? event.parts.thinking ?? "";
}
