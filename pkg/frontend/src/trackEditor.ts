// Track editor: draw a freehand stroke, pick a width, drop waypoints,
// then submit. Smoothing and validation happen server-side in
// create_track; the preview redraws from the returned track so what you
// see is what was actually saved.

import { api, ApiError } from "./api";
import type { Track, TrackSpec } from "./types";
import { fitViewport, strokePolyline, toScreen, Viewport } from "./view";

const CANVAS_W = 640;
const CANVAS_H = 420;
const METERS_PER_PX = 0.25; // freehand stroke: 640 px spans 160 m
const MIN_POINT_SPACING = 1.25; // meters; thins pointermove spam before smoothing

type Mode = "draw" | "waypoint";

interface PendingWaypoint {
  name: string;
  kind: string;
  position: [number, number];
}

export function mountTrackEditor(
  root: HTMLElement,
  onSaved: (track: Track) => void,
): void {
  root.innerHTML = `
    <div class="editor-bar">
      <label>width <input id="te-width" type="range" min="4" max="20" step="1" value="8" />
        <span id="te-width-label">8 m</span></label>
      <label>name <input id="te-name" type="text" value="sketch" size="12" /></label>
      <label><input id="te-closed" type="checkbox" /> closed loop</label>
      <button id="te-mode">mode: draw</button>
      <label class="wp-only">waypoint <input id="te-wp-name" type="text" value="stop1" size="8" />
        <select id="te-wp-kind">
          <option>pickup</option><option>dropoff</option><option>custom</option>
        </select></label>
      <button id="te-clear">clear</button>
      <button id="te-save">save track</button>
    </div>
    <canvas id="te-canvas" width="${CANVAS_W}" height="${CANVAS_H}"></canvas>
    <div id="te-status" class="status"></div>
  `;

  const canvas = root.querySelector("#te-canvas") as HTMLCanvasElement;
  const widthInput = root.querySelector("#te-width") as HTMLInputElement;
  const widthLabel = root.querySelector("#te-width-label") as HTMLSpanElement;
  const nameInput = root.querySelector("#te-name") as HTMLInputElement;
  const closedInput = root.querySelector("#te-closed") as HTMLInputElement;
  const modeBtn = root.querySelector("#te-mode") as HTMLButtonElement;
  const wpName = root.querySelector("#te-wp-name") as HTMLInputElement;
  const wpKind = root.querySelector("#te-wp-kind") as HTMLSelectElement;
  const status = root.querySelector("#te-status") as HTMLDivElement;

  let mode: Mode = "draw";
  let drawing = false;
  let stroke: [number, number][] = [];
  let waypoints: PendingWaypoint[] = [];
  let saved: Track | null = null;

  // Stroke coordinates are world meters from the moment of capture so the
  // submitted polyline is independent of canvas size.
  const screenToWorld = (ev: PointerEvent): [number, number] => {
    const r = canvas.getBoundingClientRect();
    const px = ((ev.clientX - r.left) / r.width) * CANVAS_W;
    const py = ((ev.clientY - r.top) / r.height) * CANVAS_H;
    return [px * METERS_PER_PX, (CANVAS_H - py) * METERS_PER_PX];
  };

  const sketchViewport: Viewport = {
    scale: 1 / METERS_PER_PX,
    offsetX: 0,
    offsetY: 0,
    height: CANVAS_H,
  };

  function redraw(): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, CANVAS_W, CANVAS_H);

    const widthM = Number(widthInput.value);
    if (saved) {
      // saved preview: server's smoothed centerline, fit to the canvas
      const v = fitViewport(saved.centerline, CANVAS_W, CANVAS_H);
      ctx.strokeStyle = "rgba(43,108,176,0.25)";
      ctx.lineWidth = saved.width * v.scale;
      ctx.lineCap = "round";
      ctx.lineJoin = "round";
      strokePolyline(ctx, v, saved.centerline, saved.closed);
      ctx.strokeStyle = "#2b6cb0";
      ctx.lineWidth = 1.5;
      strokePolyline(ctx, v, saved.centerline, saved.closed);
      for (const wp of saved.waypoints) drawWaypoint(ctx, v, wp.position, wp.name);
      return;
    }

    ctx.strokeStyle = "rgba(100,100,100,0.3)";
    ctx.lineWidth = widthM / METERS_PER_PX;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    strokePolyline(ctx, sketchViewport, stroke);
    ctx.strokeStyle = "#444";
    ctx.lineWidth = 1;
    strokePolyline(ctx, sketchViewport, stroke);
    for (const wp of waypoints) drawWaypoint(ctx, sketchViewport, wp.position, wp.name);
  }

  function drawWaypoint(
    ctx: CanvasRenderingContext2D,
    v: Viewport,
    pos: [number, number],
    label: string,
  ): void {
    const [sx, sy] = toScreen(v, pos[0], pos[1]);
    ctx.fillStyle = "#c05621";
    ctx.beginPath();
    ctx.arc(sx, sy, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#333";
    ctx.font = "11px sans-serif";
    ctx.fillText(label, sx + 7, sy - 5);
  }

  widthInput.oninput = () => {
    widthLabel.textContent = `${widthInput.value} m`;
    redraw();
  };

  modeBtn.onclick = () => {
    mode = mode === "draw" ? "waypoint" : "draw";
    modeBtn.textContent = `mode: ${mode}`;
  };

  (root.querySelector("#te-clear") as HTMLButtonElement).onclick = () => {
    stroke = [];
    waypoints = [];
    saved = null;
    status.textContent = "";
    redraw();
  };

  canvas.onpointerdown = (ev) => {
    if (mode === "waypoint") {
      const name = wpName.value.trim();
      if (!name) {
        status.textContent = "waypoint needs a name";
        return;
      }
      waypoints.push({ name, kind: wpKind.value, position: screenToWorld(ev) });
      redraw();
      return;
    }
    drawing = true;
    saved = null;
    stroke = [screenToWorld(ev)];
    canvas.setPointerCapture(ev.pointerId);
  };

  canvas.onpointermove = (ev) => {
    if (!drawing) return;
    const p = screenToWorld(ev);
    const last = stroke[stroke.length - 1];
    const d = Math.hypot(p[0] - last[0], p[1] - last[1]);
    if (d >= MIN_POINT_SPACING) {
      stroke.push(p);
      redraw();
    }
  };

  canvas.onpointerup = () => {
    drawing = false;
    redraw();
  };

  (root.querySelector("#te-save") as HTMLButtonElement).onclick = async () => {
    const spec: TrackSpec = {
      name: nameInput.value || "sketch",
      width: Number(widthInput.value),
      closed: closedInput.checked,
      centerline: stroke,
      waypoints,
    };
    status.textContent = "saving…";
    try {
      const { track } = await api.createTrack(spec);
      saved = track;
      status.textContent = `saved ${track.id}: ${track.tileCount} tiles, ${track.waypoints.length} waypoints`;
      status.className = "status ok";
      redraw();
      onSaved(track);
    } catch (e) {
      status.className = "status err";
      status.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
    }
  };

  redraw();
}
