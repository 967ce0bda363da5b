// Reward curve drawing. The pure pixel mapping is split out so it can be
// checked without a canvas context.

export interface ChartLayout {
  width: number;
  height: number;
  pad: number;
}

// [ordinal, reward] -> [x, y] in canvas pixels, y grows downward.
export function curvePixels(
  points: [number, number][],
  layout: ChartLayout,
): [number, number][] {
  if (points.length === 0) return [];
  const { width, height, pad } = layout;
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys);
  const xSpan = x1 - x0 || 1;
  const ySpan = y1 - y0 || 1;
  return points.map(([x, y]) => [
    pad + ((x - x0) / xSpan) * (width - 2 * pad),
    height - pad - ((y - y0) / ySpan) * (height - 2 * pad),
  ]);
}

export function drawCurve(canvas: HTMLCanvasElement, points: [number, number][]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (points.length === 0) return;
  const pixels = curvePixels(points, {
    width: canvas.width,
    height: canvas.height,
    pad: 12,
  });
  ctx.strokeStyle = "#2b6cb0";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  pixels.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
  ctx.stroke();

  const last = points[points.length - 1];
  ctx.fillStyle = "#2b6cb0";
  ctx.font = "11px sans-serif";
  ctx.fillText(`ep ${last[0]}: ${last[1].toFixed(1)}`, 14, 14);
}
