/**
 * Fixture playback: load a persisted transcript and scrub through it.
 *
 * Renders without a live backend, for demos and tests.  Playback applies the
 * server's visibility rule client-side, since a transcript file contains
 * every event while a live stream would already be filtered.
 */

import { StageView, emptyView, ingest } from "./feed.js";
import { TranscriptEvent, parseEvent, visibleTo } from "./protocol.js";

export function loadTranscript(jsonl: string): TranscriptEvent[] {
  return jsonl
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map(parseEvent);
}

export class Playback {
  readonly events: TranscriptEvent[];
  position = 0;

  constructor(events: TranscriptEvent[]) {
    this.events = [...events].sort((a, b) => a.seq - b.seq);
  }

  static fromJsonl(jsonl: string): Playback {
    return new Playback(loadTranscript(jsonl));
  }

  /** The view a given viewer would have after the first `upTo` events. */
  viewFor(viewer: string | null, upTo: number = this.events.length): StageView {
    const view = emptyView(viewer);
    for (const event of this.events.slice(0, upTo)) {
      if (visibleTo(event, viewer)) ingest(view, event);
    }
    return view;
  }

  stepForward(): number {
    this.position = Math.min(this.position + 1, this.events.length);
    return this.position;
  }

  stepBack(): number {
    this.position = Math.max(this.position - 1, 0);
    return this.position;
  }
}
