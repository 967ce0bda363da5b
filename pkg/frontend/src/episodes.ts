// Episode rows for one training job, keyed by ordinal. The server replays
// the whole event backlog on every (re)connect, so apply() must be
// idempotent: a row seen twice stays one row.

import type { EpisodeCompleted, JobEvent } from "./types";

export type JobState = "waiting" | "running" | "done" | "cancelled" | "failed";

export class EpisodeLog {
  state: JobState = "waiting";
  episodesRequested = 0;
  episodesCompleted: number | null = null;
  failureMessage: string | null = null;
  private byOrdinal = new Map<number, EpisodeCompleted>();

  // Returns true when the event changed anything, so callers can skip
  // re-rendering on replayed duplicates.
  apply(ev: JobEvent): boolean {
    switch (ev.event) {
      case "job_started": {
        const changed = this.state === "waiting";
        this.state = this.terminal() ? this.state : "running";
        this.episodesRequested = ev.episodesRequested;
        return changed;
      }
      case "episode_completed": {
        const prev = this.byOrdinal.get(ev.ordinal);
        if (prev && prev.episodeId === ev.episodeId) return false;
        this.byOrdinal.set(ev.ordinal, ev);
        return true;
      }
      case "job_done":
        return this.finish("done", ev.episodesCompleted, null);
      case "job_cancelled":
        return this.finish("cancelled", ev.episodesCompleted, null);
      case "job_failed":
        return this.finish("failed", null, ev.message);
    }
  }

  private finish(state: JobState, completed: number | null, message: string | null): boolean {
    if (this.state === state) return false;
    this.state = state;
    this.episodesCompleted = completed;
    this.failureMessage = message;
    return true;
  }

  terminal(): boolean {
    return this.state === "done" || this.state === "cancelled" || this.state === "failed";
  }

  rows(): EpisodeCompleted[] {
    return [...this.byOrdinal.values()].sort((a, b) => a.ordinal - b.ordinal);
  }
}
