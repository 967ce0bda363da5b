// Server-sent-event subscription for one job. The native EventSource
// reconnects on its own after a dropped connection and the server then
// replays the backlog from the start; consumers dedup via EpisodeLog.
// After a terminal event the server closes the stream, so we close the
// source here to stop the auto-reconnect loop.

import type { JobEvent } from "./types";

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

// the native EventSource satisfies the shape at runtime; its handler
// parameter is the wider MessageEvent, hence the assertion
const defaultFactory: EventSourceFactory = (url) =>
  new EventSource(url) as unknown as EventSourceLike;

const TERMINAL = new Set(["job_done", "job_cancelled", "job_failed"]);

export function subscribeJob(
  job: string,
  onEvent: (ev: JobEvent) => void,
  factory: EventSourceFactory = defaultFactory,
): () => void {
  const source = factory(`/api/subscribe_events?job=${encodeURIComponent(job)}`);
  source.onmessage = (m) => {
    let parsed: JobEvent;
    try {
      parsed = JSON.parse(m.data);
    } catch {
      return; // not ours; skip rather than kill the stream
    }
    onEvent(parsed);
    if (TERMINAL.has(parsed.event)) source.close();
  };
  return () => source.close();
}
