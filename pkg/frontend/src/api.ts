// Thin client for POST /api/<endpoint>. Every call returns the server's
// payload as-is; errors arrive as {v, error: {code, message, diagnostics?}}
// and surface as ApiError so callers can branch on the code.

import type {
  ApiErrorBody,
  Diagnostic,
  EpisodeDetail,
  ModelMeta,
  Overlay,
  RewardCurve,
  RunTestResult,
  Track,
  TrackSpec,
} from "./types";

// Structural subset of Response so tests can hand back recorded payloads.
export interface JsonResponse {
  ok: boolean;
  status: number;
  json(): Promise<any>;
}

export type FetchLike = (url: string, init: RequestInit) => Promise<JsonResponse>;

export class ApiError extends Error {
  status: number;
  code: string;
  diagnostics: Diagnostic[];

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.diagnostics = body.diagnostics ?? [];
  }
}

let fetchImpl: FetchLike = (url, init) => fetch(url, init);

// Tests swap in a fetch that replays recorded transcripts.
export function setFetch(f: FetchLike): void {
  fetchImpl = f;
}

export async function call<T>(endpoint: string, body: unknown): Promise<T> {
  const resp = await fetchImpl(`/api/${endpoint}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  const payload = await resp.json();
  if (!resp.ok || payload.error) {
    throw new ApiError(resp.status, payload.error ?? {
      code: "Internal",
      message: `unexpected response ${resp.status}`,
    });
  }
  return payload as T;
}

export const api = {
  createModel: (name: string) => call<ModelMeta>("create_model", { name }),
  listModels: () => call<{ models: ModelMeta[] }>("list_models", {}),
  getModel: (id: string) => call<ModelMeta>("get_model", { id }),
  createTrack: (track: TrackSpec) => call<{ track: Track }>("create_track", { track }),
  listTracks: () => call<{ tracks: Track[] }>("list_tracks", {}),
  getTrack: (id: string) => call<{ track: Track }>("get_track", { id }),
  startTraining: (model: string, track: string, episodes: number, seed?: number) =>
    call<{ job: string }>("start_training", { model, track, episodes, ...(seed === undefined ? {} : { seed }) }),
  cancelTraining: (job: string) => call<{ job: string; state: string }>("cancel_training", { job }),
  runTest: (model: string, track: string, seed: number, programSource?: string) =>
    call<RunTestResult>("run_test", {
      model,
      track,
      seed,
      ...(programSource === undefined ? {} : { program_source: programSource }),
    }),
  getOverlay: (model: string, track: string, filter?: string | string[]) =>
    call<Overlay>("get_overlay", { model, track, ...(filter === undefined ? {} : { filter }) }),
  getRewardCurve: (model: string, track: string) =>
    call<RewardCurve>("get_reward_curve", { model, track }),
  getEpisode: (id: string) => call<{ episode: EpisodeDetail }>("get_episode", { id }),
};
