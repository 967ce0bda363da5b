// Shared UI state: which model and track the panels act on, plus the live
// job id. Everything here is refreshed from the server; a page reload
// rebuilds it from list_models / list_tracks.

import { api } from "./api";
import type { ModelMeta, Track } from "./types";

export class Session {
  model: ModelMeta | null = null;
  track: Track | null = null;
  job: string | null = null;
  editorSource = "";
  overlayMode: "all" | "selected" = "all";
  private listeners: (() => void)[] = [];

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  notify(): void {
    for (const fn of this.listeners) fn();
  }

  async refreshModel(): Promise<void> {
    if (!this.model) return;
    this.model = await api.getModel(this.model.modelId);
    this.notify();
  }
}
