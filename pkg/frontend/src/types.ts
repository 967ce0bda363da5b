// Wire types for the training-server JSON API. Field names match the
// server's serialized payloads exactly; nothing here is computed locally.

export interface ModelMeta {
  modelId: string;
  name: string;
  trainedEpisodes: number;
  createdAt: string;
}

export interface Waypoint {
  name: string;
  kind: string;
  position: [number, number];
  radius: number;
}

export interface Track {
  id: string;
  name: string;
  width: number;
  closed: boolean;
  tileCount: number;
  centerline: [number, number][];
  waypoints: Waypoint[];
}

// Body of create_track; the server smooths the centerline and assigns ids.
export interface TrackSpec {
  name: string;
  width: number;
  closed?: boolean;
  centerline: [number, number][];
  waypoints?: { name: string; kind: string; position: [number, number] }[];
  tileCount?: number;
}

export interface Diagnostic {
  severity: "error" | "warning";
  line: number; // 1-based
  column: number; // 1-based
  code: string;
  message: string;
}

export interface RunTestResult {
  episodeId: string;
  totalReward: number;
  outcome: string;
  steps: number;
  diagnostics?: Diagnostic[];
}

export interface EpisodeStep {
  t: number;
  pos: [number, number];
  heading: number;
  speed: number;
  action: number;
  reward: number;
  newTiles: number[];
  events: string[];
}

export interface EpisodeDetail {
  episodeId: string;
  id: string;
  trackId: string;
  seed: number;
  outcome: string;
  totalReward: number;
  endpoint: [number, number];
  steps: EpisodeStep[];
  effects: EffectReport | null;
}

export interface EffectReport {
  effects: Record<string, unknown>;
  log: EffectCall[];
}

export interface EffectCall {
  t: number;
  event: string;
  function: string;
  args: unknown[];
}

export interface OverlayEpisode {
  episodeId: string;
  outcome: string;
  totalReward: number;
  endpoint: [number, number];
  path: [number, number][];
}

export interface Overlay {
  modelId: string;
  trackId: string;
  episodes: OverlayEpisode[];
}

export interface RewardCurve {
  modelId: string;
  trackId: string;
  points: [number, number][]; // [ordinal, totalReward], ordinal from 1
}

// -- job event stream --

export interface JobStarted {
  v: number;
  event: "job_started";
  job: string;
  model: string;
  track: string;
  episodesRequested: number;
}

export interface EpisodeCompleted {
  v: number;
  event: "episode_completed";
  job: string;
  episodeId: string;
  ordinal: number;
  totalReward: number;
  outcome: string;
  steps: number;
}

export interface JobDone {
  v: number;
  event: "job_done";
  job: string;
  episodesCompleted: number;
}

export interface JobCancelled {
  v: number;
  event: "job_cancelled";
  job: string;
  episodesCompleted: number;
}

export interface JobFailed {
  v: number;
  event: "job_failed";
  job: string;
  message: string;
}

export type JobEvent =
  | JobStarted
  | EpisodeCompleted
  | JobDone
  | JobCancelled
  | JobFailed;

// -- objective reports (produced by the grader, rendered verbatim) --

export interface RequirementResult {
  id: string;
  kind: string;
  passed: boolean;
  step: number | null;
  detail: string;
}

export interface ObjectiveReport {
  name: string;
  passed: boolean;
  passedCount: number;
  total: number;
  requirements: RequirementResult[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  diagnostics?: Diagnostic[];
}
