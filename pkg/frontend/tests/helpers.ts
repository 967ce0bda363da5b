// Fixture plumbing for the contract tests. The transcript in
// tests/goldens/protocol/session.json at the repository root is a
// recorded session against the real server; replayFetch serves those
// recorded responses to the api client, so every assertion downstream
// compares screen state against genuine server output.

import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import type { FetchLike } from "../src/api";
import type { EventSourceLike } from "../src/events";
import type { JobEvent, ObjectiveReport } from "../src/types";

export interface TranscriptRow {
  endpoint: string;
  body: Record<string, unknown>;
  status: number;
  response: Record<string, any>;
}

// vitest runs with cwd at frontend/; the transcript lives with the
// server's own golden tests one level up.
export function loadSession(): TranscriptRow[] {
  const path = resolve(process.cwd(), "../tests/goldens/protocol/session.json");
  return JSON.parse(readFileSync(path, "utf-8"));
}

export function loadObjectiveReports(): Record<string, ObjectiveReport> {
  const path = resolve(process.cwd(), "tests/fixtures/objective_reports.json");
  return JSON.parse(readFileSync(path, "utf-8"));
}

export function rowsFor(rows: TranscriptRow[], endpoint: string): TranscriptRow[] {
  return rows.filter((r) => r.endpoint === endpoint);
}

// Key-order-independent serialization; the transcript stores bodies with
// sorted keys while the client builds them in call order.
export function canonical(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(canonical).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : 1))
      .map(([k, v]) => `${JSON.stringify(k)}:${canonical(v)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}

// Serves recorded responses by matching endpoint + body. Rows are
// consumed in transcript order so repeated identical requests replay the
// way the session actually went.
export function replayFetch(rows: TranscriptRow[]): FetchLike {
  const remaining = [...rows];
  return async (url, init) => {
    const endpoint = url.replace(/^\/api\//, "");
    const body = JSON.parse((init.body as string) ?? "{}");
    const i = remaining.findIndex(
      (r) => r.endpoint === endpoint && canonical(r.body) === canonical(body),
    );
    if (i < 0) {
      throw new Error(`no recorded response for ${endpoint} ${init.body}`);
    }
    const row = remaining.splice(i, 1)[0];
    return {
      ok: row.status >= 200 && row.status < 300,
      status: row.status,
      json: async () => row.response,
    };
  };
}

// The backlog captured for job j1: started, two episodes, done.
export function backlogEvents(rows: TranscriptRow[]): JobEvent[] {
  const row = rows.find((r) => r.endpoint === "__backlog");
  if (!row) throw new Error("transcript has no backlog row");
  return (row.response as { events: JobEvent[] }).events;
}

export class FakeEventSource implements EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  closed = false;
  readonly url: string;

  constructor(url: string) {
    this.url = url;
  }

  close(): void {
    this.closed = true;
  }

  emit(event: JobEvent): void {
    if (!this.closed) this.onmessage?.({ data: JSON.stringify(event) });
  }
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
