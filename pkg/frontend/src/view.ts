// World-to-canvas fitting shared by the track editor and the replay
// viewer. Tracks live in meters with y up; canvases are pixels with y
// down. The transform preserves aspect and centers the content.

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
  height: number;
}

export function fitViewport(
  points: [number, number][],
  width: number,
  height: number,
  margin = 20,
): Viewport {
  if (points.length === 0) return { scale: 1, offsetX: 0, offsetY: 0, height };
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  return {
    scale,
    offsetX: margin - minX * scale + (width - 2 * margin - spanX * scale) / 2,
    offsetY: margin - minY * scale + (height - 2 * margin - spanY * scale) / 2,
    height,
  };
}

export function toScreen(v: Viewport, x: number, y: number): [number, number] {
  return [x * v.scale + v.offsetX, v.height - (y * v.scale + v.offsetY)];
}

export function toWorld(v: Viewport, px: number, py: number): [number, number] {
  return [(px - v.offsetX) / v.scale, (v.height - py - v.offsetY) / v.scale];
}

export function strokePolyline(
  ctx: CanvasRenderingContext2D,
  v: Viewport,
  points: [number, number][],
  close = false,
): void {
  if (points.length < 2) return;
  ctx.beginPath();
  points.forEach(([x, y], i) => {
    const [sx, sy] = toScreen(v, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  if (close) ctx.closePath();
  ctx.stroke();
}
