// Replay viewer: all stored episodes for the selected model/track as
// decimated polylines with endpoint markers, or one episode animated
// step by step from its stored positions.

import { api, ApiError } from "./api";
import type { EpisodeDetail, Overlay, Track } from "./types";
import { fitViewport, strokePolyline, toScreen, Viewport } from "./view";
import type { Session } from "./session";

const CANVAS_W = 640;
const CANVAS_H = 420;

const OUTCOME_COLORS: Record<string, string> = {
  completed: "#2f855a",
  crashed: "#c53030",
  timeout: "#975a16",
};

function drawTrack(ctx: CanvasRenderingContext2D, v: Viewport, track: Track): void {
  ctx.strokeStyle = "rgba(120,120,120,0.25)";
  ctx.lineWidth = Math.max(track.width * v.scale, 1);
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  strokePolyline(ctx, v, track.centerline, track.closed);
  ctx.strokeStyle = "rgba(60,60,60,0.6)";
  ctx.lineWidth = 1;
  strokePolyline(ctx, v, track.centerline, track.closed);
  for (const wp of track.waypoints) {
    const [sx, sy] = toScreen(v, wp.position[0], wp.position[1]);
    ctx.strokeStyle = "#c05621";
    ctx.beginPath();
    ctx.arc(sx, sy, Math.max(wp.radius * v.scale, 3), 0, 2 * Math.PI);
    ctx.stroke();
    ctx.fillStyle = "#c05621";
    ctx.font = "11px sans-serif";
    ctx.fillText(wp.name, sx + 6, sy - 6);
  }
}

export function mountReplay(root: HTMLElement, session: Session): void {
  root.innerHTML = `
    <div class="editor-bar">
      <button id="rp-load">load episodes</button>
      <select id="rp-select"><option value="">(all episodes)</option></select>
      <button id="rp-play" disabled>play</button>
      <span id="rp-info"></span>
    </div>
    <canvas id="rp-canvas" width="${CANVAS_W}" height="${CANVAS_H}"></canvas>
    <div id="rp-status" class="status"></div>
  `;

  const canvas = root.querySelector("#rp-canvas") as HTMLCanvasElement;
  const select = root.querySelector("#rp-select") as HTMLSelectElement;
  const playBtn = root.querySelector("#rp-play") as HTMLButtonElement;
  const info = root.querySelector("#rp-info") as HTMLSpanElement;
  const status = root.querySelector("#rp-status") as HTMLDivElement;

  let overlay: Overlay | null = null;
  let episode: EpisodeDetail | null = null;
  let animation = 0;

  function viewport(): Viewport | null {
    if (!session.track) return null;
    return fitViewport(session.track.centerline, CANVAS_W, CANVAS_H);
  }

  function drawOverlay(): void {
    const ctx = canvas.getContext("2d");
    const v = viewport();
    if (!ctx || !v || !session.track) return;
    ctx.clearRect(0, 0, CANVAS_W, CANVAS_H);
    drawTrack(ctx, v, session.track);
    if (!overlay) return;
    for (const ep of overlay.episodes) {
      ctx.strokeStyle = OUTCOME_COLORS[ep.outcome] ?? "#555";
      ctx.lineWidth = 1;
      ctx.globalAlpha = 0.55;
      strokePolyline(ctx, v, ep.path);
      ctx.globalAlpha = 1;
      const [ex, ey] = toScreen(v, ep.endpoint[0], ep.endpoint[1]);
      ctx.fillStyle = OUTCOME_COLORS[ep.outcome] ?? "#555";
      ctx.beginPath();
      ctx.arc(ex, ey, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
    info.textContent = `${overlay.episodes.length} episodes`;
  }

  // Steps are timestamped server-side at sim dt; playback maps one sim
  // step to one animation frame, which is close enough to watch.
  function animate(ep: EpisodeDetail): void {
    cancelAnimationFrame(animation);
    const ctx = canvas.getContext("2d");
    const v = viewport();
    if (!ctx || !v || !session.track) return;
    let i = 0;
    const tick = (): void => {
      if (!session.track) return;
      ctx.clearRect(0, 0, CANVAS_W, CANVAS_H);
      drawTrack(ctx, v, session.track);
      const upto = ep.steps.slice(0, i + 1);
      ctx.strokeStyle = "#2b6cb0";
      ctx.lineWidth = 1.5;
      strokePolyline(ctx, v, upto.map((s) => s.pos));
      const cur = ep.steps[i];
      const [cx, cy] = toScreen(v, cur.pos[0], cur.pos[1]);
      ctx.fillStyle = "#2b6cb0";
      ctx.beginPath();
      ctx.arc(cx, cy, 4, 0, 2 * Math.PI);
      ctx.fill();
      info.textContent = `t=${cur.t} speed=${cur.speed.toFixed(1)} reward=${cur.reward.toFixed(2)}`;
      if (++i < ep.steps.length) animation = requestAnimationFrame(tick);
      else info.textContent += ` — ${ep.outcome}, total ${ep.totalReward.toFixed(1)}`;
    };
    tick();
  }

  (root.querySelector("#rp-load") as HTMLButtonElement).onclick = async () => {
    if (!session.model || !session.track) {
      status.textContent = "pick a model and a track first";
      return;
    }
    status.textContent = "";
    try {
      overlay = await api.getOverlay(session.model.modelId, session.track.id);
      select.innerHTML =
        `<option value="">(all episodes)</option>` +
        overlay.episodes
          .map(
            (e) =>
              `<option value="${e.episodeId}">${e.episodeId} · ${e.totalReward.toFixed(1)} · ${e.outcome}</option>`,
          )
          .join("");
      session.overlayMode = "all";
      drawOverlay();
    } catch (e) {
      status.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
    }
  };

  select.onchange = async () => {
    cancelAnimationFrame(animation);
    if (!select.value) {
      session.overlayMode = "all";
      episode = null;
      playBtn.disabled = true;
      drawOverlay();
      return;
    }
    try {
      const res = await api.getEpisode(select.value);
      episode = res.episode;
      session.overlayMode = "selected";
      playBtn.disabled = false;
      animate(episode);
    } catch (e) {
      status.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
    }
  };

  playBtn.onclick = () => {
    if (episode) animate(episode);
  };

  session.onChange(drawOverlay);
  drawOverlay();
}
