// Maps server diagnostics (1-based line/column) onto character offsets in
// the editor buffer so markers can highlight the offending token.

import type { Diagnostic } from "./types";

export interface Marker {
  from: number;
  to: number;
  severity: "error" | "warning";
  code: string;
  message: string;
  line: number;
  column: number;
}

function lineStarts(source: string): number[] {
  const starts = [0];
  for (let i = 0; i < source.length; i++) {
    if (source[i] === "\n") starts.push(i + 1);
  }
  return starts;
}

// Marker span runs from the diagnostic position to the end of the word
// there (or one character for punctuation), clamped to the buffer.
export function markersFor(source: string, diags: Diagnostic[]): Marker[] {
  const starts = lineStarts(source);
  return diags.map((d) => {
    const lineStart = starts[Math.min(d.line, starts.length) - 1] ?? 0;
    const from = Math.min(lineStart + d.column - 1, source.length);
    let to = from;
    while (to < source.length && /[A-Za-z0-9_]/.test(source[to])) to++;
    if (to === from && from < source.length && source[from] !== "\n") to = from + 1;
    return {
      from,
      to,
      severity: d.severity,
      code: d.code,
      message: d.message,
      line: d.line,
      column: d.column,
    };
  });
}

export function formatMarker(m: Marker): string {
  return `${m.line}:${m.column} ${m.severity} ${m.code}: ${m.message}`;
}
