/**
 * The turn markup grammar shared with the engine: `(` action `)`,
 * `[` thinking `]`, residual text is speech.  The composer builds wire text
 * so players never have to type the delimiters themselves; the parser is the
 * exact mirror of the server's, verified against shared test vectors.
 */

export interface TurnFields {
  speech?: string | null;
  action?: string | null;
  thinking?: string | null;
}

export interface ParsedParts {
  speech: string | null;
  action: string | null;
  thinking: string | null;
}

const PART_SEPARATOR = " | ";

/** Compose wire text in mapping-rule order: (action) [thinking] speech. */
export function composeWire(fields: TurnFields): string {
  const segments: string[] = [];
  if (fields.action) segments.push(`(${fields.action})`);
  if (fields.thinking) segments.push(`[${fields.thinking}]`);
  if (fields.speech) segments.push(fields.speech);
  return segments.join(" ");
}

/**
 * Greedy left-to-right segmentation; spans never nest, an unclosed delimiter
 * downgrades the tail to speech.  Multiple spans of a kind concatenate with
 * a " | " separator.
 */
export function parseMarkup(raw: string): ParsedParts {
  const actions: string[] = [];
  const thoughts: string[] = [];
  const speechChunks: string[] = [];
  let buffer = "";

  const flush = () => {
    const chunk = buffer.trim();
    if (chunk) speechChunks.push(chunk);
    buffer = "";
  };

  let i = 0;
  while (i < raw.length) {
    const char = raw[i]!;
    if (char === "(" || char === "[") {
      const closing = char === "(" ? ")" : "]";
      const end = raw.indexOf(closing, i + 1);
      if (end === -1) {
        buffer += raw.slice(i);
        break;
      }
      flush();
      const span = raw.slice(i + 1, end).trim();
      if (span) (char === "(" ? actions : thoughts).push(span);
      i = end + 1;
    } else {
      buffer += char;
      i += 1;
    }
  }
  flush();

  return {
    speech: speechChunks.length ? speechChunks.join(" ") : null,
    action: actions.length ? actions.join(PART_SEPARATOR) : null,
    thinking: thoughts.length ? thoughts.join(PART_SEPARATOR) : null,
  };
}
