// Minimal SVG line charts. The overlay plot draws the data in black and the
// model fit in red, matching the convention used throughout the tool.

export interface Series {
  xs: number[];
  ys: number[];
  color: string;
  width?: number;
}

export interface PlotOptions {
  width: number;
  height: number;
  pad: number;
  logY?: boolean;
  xLabel?: string;
  yLabel?: string;
}

interface Range {
  lo: number;
  hi: number;
}

function rangeOf(values: number[]): Range {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return { lo: 0, hi: 1 };
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return { lo, hi };
}

export function linePath(
  xs: number[],
  ys: number[],
  xr: Range,
  yr: Range,
  opts: PlotOptions,
): string {
  const { width, height, pad } = opts;
  const sx = (width - 2 * pad) / (xr.hi - xr.lo);
  const sy = (height - 2 * pad) / (yr.hi - yr.lo);
  const parts: string[] = [];
  let pen = false;
  const n = Math.min(xs.length, ys.length);
  for (let i = 0; i < n; i++) {
    const y = ys[i];
    if (!Number.isFinite(y)) {
      pen = false;
      continue;
    }
    const px = pad + (xs[i] - xr.lo) * sx;
    const py = height - pad - (y - yr.lo) * sy;
    parts.push(`${pen ? "L" : "M"}${px.toFixed(2)},${py.toFixed(2)}`);
    pen = true;
  }
  return parts.join(" ");
}

function tickValues(r: Range, count: number): number[] {
  const ticks: number[] = [];
  for (let i = 0; i <= count; i++) {
    ticks.push(r.lo + ((r.hi - r.lo) * i) / count);
  }
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const mag = Math.abs(v);
  if (mag >= 1000 || mag < 0.01) return v.toExponential(1);
  return String(Math.round(v * 1000) / 1000);
}

/** Build a complete standalone SVG document for a set of line series. */
export function renderPlot(series: Series[], opts: PlotOptions): string {
  const { width, height, pad } = opts;
  const allX = series.flatMap((s) => s.xs);
  let allY = series.flatMap((s) => s.ys.filter(Number.isFinite));
  let logNote = "";
  let transform = (y: number) => y;
  if (opts.logY) {
    allY = allY.filter((y) => y > 0);
    transform = Math.log10;
    logNote = " (log)";
  }
  const xr = rangeOf(allX);
  const yr = rangeOf(allY.map(transform));
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}">`,
    `<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>`,
    `<rect x="${pad}" y="${pad}" width="${width - 2 * pad}" ` +
      `height="${height - 2 * pad}" fill="none" stroke="#999"/>`,
  ];
  for (const tick of tickValues(xr, 4)) {
    const px = pad + ((tick - xr.lo) / (xr.hi - xr.lo)) * (width - 2 * pad);
    parts.push(
      `<text x="${px.toFixed(1)}" y="${height - pad + 14}" ` +
        `font-size="10" text-anchor="middle" fill="#444">${fmt(tick)}</text>`,
    );
  }
  for (const tick of tickValues(yr, 4)) {
    const py =
      height - pad - ((tick - yr.lo) / (yr.hi - yr.lo)) * (height - 2 * pad);
    const label = opts.logY ? fmt(Math.pow(10, tick)) : fmt(tick);
    parts.push(
      `<text x="${pad - 4}" y="${(py + 3).toFixed(1)}" font-size="10" ` +
        `text-anchor="end" fill="#444">${label}</text>`,
    );
  }
  for (const s of series) {
    const ys = opts.logY ? s.ys.map((y) => (y > 0 ? transform(y) : NaN)) : s.ys;
    const d = linePath(s.xs, ys, xr, yr, opts);
    parts.push(
      `<path d="${d}" fill="none" stroke="${s.color}" ` +
        `stroke-width="${s.width ?? 1.2}"/>`,
    );
  }
  if (opts.xLabel) {
    parts.push(
      `<text x="${width / 2}" y="${height - 2}" font-size="11" ` +
        `text-anchor="middle" fill="#222">${opts.xLabel}</text>`,
    );
  }
  if (opts.yLabel) {
    parts.push(
      `<text x="10" y="${height / 2}" font-size="11" text-anchor="middle" ` +
        `transform="rotate(-90 10 ${height / 2})" fill="#222">` +
        `${opts.yLabel}${logNote}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
