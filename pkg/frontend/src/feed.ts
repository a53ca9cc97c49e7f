/**
 * The stage view model: one viewer's live picture of a performance.
 *
 * Events are ingested strictly in server sequence order (duplicates from a
 * reconnect are dropped by seq), and every event renders to something -- an
 * unknown kind falls back to a raw system line rather than disappearing.
 * Visibility is enforced by the server stream; the view model trusts what
 * arrives and never requests another actor's private events.
 */

import {
  FAILURE_LINE,
  StateUpdate,
  TranscriptEvent,
  eventText,
} from "./protocol.js";

export type FeedItemType =
  | "speech"
  | "stage-direction"
  | "narrator"
  | "thinking"
  | "instruction"
  | "system"
  | "raw";

export interface FeedItem {
  seq: number;
  type: FeedItemType;
  speaker: string;
  text: string;
  isFailure: boolean;
  highlighted: boolean;
}

export interface Banner {
  seq: number;
  instruction: string;
  forMe: boolean;
  broadcast: boolean;
}

export interface StageView {
  viewer: string | null;
  feed: FeedItem[];
  propStates: Map<string, Map<string, string>>;
  onStage: Set<string>;
  banners: Banner[];
  myThinking: string[];
  lastSeq: number;
  status: "performing" | "completed" | "aborted";
}

export function emptyView(viewer: string | null): StageView {
  return {
    viewer,
    feed: [],
    propStates: new Map(),
    onStage: new Set(),
    banners: [],
    myThinking: [],
    lastSeq: -1,
    status: "performing",
  };
}

function push(view: StageView, event: TranscriptEvent, type: FeedItemType, text: string, highlighted = false): void {
  view.feed.push({
    seq: event.seq,
    type,
    speaker: event.speaker,
    text,
    isFailure: text === FAILURE_LINE,
    highlighted,
  });
}

function applyStateUpdates(view: StageView, event: TranscriptEvent): void {
  const data = event.data ?? {};
  if (data["verdict"] !== "success") return;
  const updates = (data["state_updates"] ?? []) as StateUpdate[];
  for (const update of updates) {
    let prop = view.propStates.get(update.prop);
    if (!prop) {
      prop = new Map();
      view.propStates.set(update.prop, prop);
    }
    prop.set(update.key, update.new);
  }
}

function handleSystem(view: StageView, event: TranscriptEvent): void {
  const data = event.data ?? {};
  const movement = data["movement"];
  if (movement === "enter") view.onStage.add(String(data["actor"]));
  if (movement === "leave") view.onStage.delete(String(data["actor"]));
  if (data["final"]) view.status = "completed";
  if (typeof data["reason"] === "string") view.status = "aborted";
  push(view, event, "system", eventText(event));
}

/** Ingest one streamed event; returns false when it was a duplicate. */
export function ingest(view: StageView, event: TranscriptEvent): boolean {
  if (event.seq <= view.lastSeq) return false; // reconnect replay: drop
  view.lastSeq = event.seq;

  switch (event.kind) {
    case "speech":
      push(view, event, "speech", event.parts.speech ?? "");
      break;
    case "action_attempt":
      push(view, event, "stage-direction", `(${event.parts.action ?? ""})`);
      break;
    case "broadcast":
      push(view, event, "stage-direction", eventText(event));
      break;
    case "action_result":
      push(view, event, "narrator", event.parts.speech ?? "");
      applyStateUpdates(view, event);
      break;
    case "thinking": {
      const text = event.parts.thinking ?? "";
      if (view.viewer !== null && event.speaker === view.viewer) {
        view.myThinking.push(text);
      }
      push(view, event, "thinking", `[${text}]`);
      break;
    }
    case "instruction": {
      const forMe =
        event.visibility.scope === "private" && event.visibility.actor === view.viewer;
      const broadcast = event.visibility.scope === "all";
      view.banners.push({
        seq: event.seq,
        instruction: eventText(event),
        forMe,
        broadcast,
      });
      push(view, event, "instruction", eventText(event), forMe);
      break;
    }
    case "system":
      handleSystem(view, event);
      break;
    default:
      // Unknown kinds must render, never drop.
      push(view, event, "raw", `${event.kind}: ${eventText(event)}`);
      break;
  }
  return true;
}

export function ingestAll(view: StageView, events: Iterable<TranscriptEvent>): StageView {
  for (const event of events) ingest(view, event);
  return view;
}

/** Chip text for one prop, e.g. "curtain: intact=no". */
export function propChip(view: StageView, propId: string): string {
  const state = view.propStates.get(propId);
  if (!state || state.size === 0) return propId;
  const pairs = [...state.entries()].map(([key, value]) => `${key}=${value}`).sort();
  return `${propId}: ${pairs.join(", ")}`;
}
