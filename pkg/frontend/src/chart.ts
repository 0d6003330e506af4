import { SeriesPoint, StatKey, STAT_UNITS } from "./types";

/** Charts show a fixed trailing window; older points fall off the left. */
export const CHART_WINDOW_MS = 20 * 60 * 1000;

export interface ChartGeometry {
  width: number;
  height: number;
  padding: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 640, height: 160, padding: 8 };

export function visiblePoints(series: SeriesPoint[], now: number): SeriesPoint[] {
  const cutoff = now - CHART_WINDOW_MS;
  return series.filter((point) => point.t >= cutoff);
}

export function maxValue(series: SeriesPoint[]): number {
  let max = 0;
  for (const point of series) {
    if (point.value !== null && point.value > max) max = point.value;
  }
  return max;
}

/** Convert one series into SVG polyline point strings. Gaps (null values
 * from missed polls) split the line into separate segments. */
export function polylineSegments(
  series: SeriesPoint[],
  now: number,
  yMax: number,
  geom: ChartGeometry = DEFAULT_GEOMETRY,
): string[] {
  const points = visiblePoints(series, now);
  const usableWidth = geom.width - 2 * geom.padding;
  const usableHeight = geom.height - 2 * geom.padding;
  const scale = yMax > 0 ? usableHeight / yMax : 0;
  const segments: string[] = [];
  let current: string[] = [];
  for (const point of points) {
    if (point.value === null) {
      if (current.length > 0) segments.push(current.join(" "));
      current = [];
      continue;
    }
    const x = geom.padding + ((point.t - (now - CHART_WINDOW_MS)) / CHART_WINDOW_MS) * usableWidth;
    const y = geom.height - geom.padding - point.value * scale;
    current.push(`${x.toFixed(1)},${y.toFixed(1)}`);
  }
  if (current.length > 0) segments.push(current.join(" "));
  return segments;
}

export function formatStat(stat: StatKey, value: number | null): string {
  if (value === null) return "-";
  const unit = STAT_UNITS[stat];
  if (unit === "ratio") return `${(value * 100).toFixed(1)}%`;
  if (unit === "ms") return `${value.toFixed(2)} ms`;
  if (unit === "ops/s") return `${value.toFixed(0)} ops/s`;
  return `${value.toFixed(0)}`;
}
