/** Minimal incremental parser for the service's server-sent event stream. */

export interface SseEvent {
  id: number | null;
  event: string;
  data: string;
}

export class SseParser {
  private buffer = "";
  private id: number | null = null;
  private event = "message";
  private data: string[] = [];

  /** Feed a transport chunk; returns the events completed by it. */
  feed(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n")) !== -1) {
      const line = this.buffer.slice(0, index).replace(/\r$/, "");
      this.buffer = this.buffer.slice(index + 1);
      if (line === "") {
        if (this.data.length > 0 || this.event !== "message") {
          events.push({ id: this.id, event: this.event, data: this.data.join("\n") });
        }
        this.id = null;
        this.event = "message";
        this.data = [];
      } else if (line.startsWith("id: ")) {
        const parsed = Number(line.slice(4));
        this.id = Number.isFinite(parsed) ? parsed : null;
      } else if (line.startsWith("event: ")) {
        this.event = line.slice(7);
      } else if (line.startsWith("data: ")) {
        this.data.push(line.slice(6));
      }
    }
    return events;
  }
}
