/**
 * Deterministic SVG line charts. No timestamps, no randomness: the same
 * series in produce the same bytes out, so re-renders overwrite the image
 * identically.
 */

export interface Series {
  name: string;
  points: { x: number; y: number }[];
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  /** Exact x tick positions; defaults to the union of all series x values. */
  xTicks?: number[];
}

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { top: 48, right: 24, bottom: 56, left: 84 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function fmt(n: number): string {
  return Number(n.toFixed(2)).toString();
}

/** Human tick label: 1500000 -> "1.5M", 12000 -> "12k". */
function fmtTick(n: number): string {
  const abs = Math.abs(n);
  if (abs >= 1e9) return `${fmt(n / 1e9)}G`;
  if (abs >= 1e6) return `${fmt(n / 1e6)}M`;
  if (abs >= 1e3) return `${fmt(n / 1e3)}k`;
  return fmt(n);
}

function niceYTicks(lo: number, hi: number, count = 5): number[] {
  if (lo === hi) return [lo];
  const rawStep = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= rawStep)!;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-9; t += step) {
    ticks.push(t);
  }
  return ticks;
}

export function renderLineChart(spec: ChartSpec): string {
  if (spec.series.length === 0) {
    throw new Error("nothing to plot: no series");
  }
  const pts = spec.series.flatMap((s) => s.points);
  const xTicks = spec.xTicks ?? [...new Set(pts.map((p) => p.x))].sort((a, b) => a - b);
  const xLo = Math.min(...pts.map((p) => p.x), ...xTicks);
  const xHi = Math.max(...pts.map((p) => p.x), ...xTicks);
  const yTicks = niceYTicks(0, Math.max(...pts.map((p) => p.y)));
  const yLo = 0;
  const yHi = Math.max(yTicks[yTicks.length - 1], 1);

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) =>
    MARGIN.left + (xHi === xLo ? plotW / 2 : ((x - xLo) / (xHi - xLo)) * plotW);
  const py = (y: number) => MARGIN.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="15" font-weight="bold">` +
      `${spec.title}</text>`,
  );

  for (const t of yTicks) {
    const y = fmt(py(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${WIDTH - MARGIN.right}" y2="${y}" ` +
        `stroke="#ddd"/>`,
      `<text x="${MARGIN.left - 8}" y="${y}" text-anchor="end" ` +
        `dominant-baseline="middle">${fmtTick(t)}</text>`,
    );
  }
  for (const t of xTicks) {
    const x = fmt(px(t));
    const y0 = MARGIN.top + plotH;
    parts.push(
      `<line class="xtick" x1="${x}" y1="${y0}" x2="${x}" y2="${y0 + 5}" stroke="#333"/>`,
      `<text x="${x}" y="${y0 + 20}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
      `y2="${MARGIN.top + plotH}" stroke="#333"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" ` +
      `x2="${WIDTH - MARGIN.right}" y2="${MARGIN.top + plotH}" stroke="#333"/>`,
    `<text x="${WIDTH / 2}" y="${HEIGHT - 12}" text-anchor="middle">${spec.xLabel}</text>`,
    `<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">${spec.yLabel}</text>`,
  );

  spec.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const sorted = [...s.points].sort((a, b) => a.x - b.x);
    const coords = sorted.map((p) => `${fmt(px(p.x))},${fmt(py(p.y))}`).join(" ");
    parts.push(
      `<polyline class="series" data-name="${s.name}" points="${coords}" ` +
        `fill="none" stroke="${color}" stroke-width="2"/>`,
    );
    for (const p of sorted) {
      parts.push(`<circle cx="${fmt(px(p.x))}" cy="${fmt(py(p.y))}" r="3" fill="${color}"/>`);
    }
    const lx = WIDTH - MARGIN.right - 170;
    const ly = MARGIN.top + 8 + i * 18;
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${lx + 28}" y="${ly + 4}">${s.name}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
