import { clear, svgEl } from "./dom.js";
import type { HistogramSpec } from "./types.js";

export interface HistogramSeries {
  label: string;
  color: string;
  edges: number[];
  counts: number[];
}

const WIDTH = 640;
const HEIGHT = 240;
const PAD = 30;

/** Superimposed step histograms over shared edges (all series must come from
 * the service with identical edges; this view only draws what it is given). */
export class HistogramView {
  readonly root: SVGElement;

  constructor() {
    this.root = svgEl("svg", {
      width: String(WIDTH),
      height: String(HEIGHT),
      class: "histogram-view",
      viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    });
  }

  render(series: HistogramSeries[]): void {
    clear(this.root);
    if (!series.length) {
      return;
    }
    const edges = series[0].edges;
    const maxCount = Math.max(1, ...series.flatMap((s) => s.counts));
    const lo = edges[0];
    const hi = edges[edges.length - 1];
    const spanX = hi - lo || 1;
    const x = (v: number) => PAD + ((v - lo) / spanX) * (WIDTH - 2 * PAD);
    const y = (c: number) => HEIGHT - PAD - (c / maxCount) * (HEIGHT - 2 * PAD);

    for (const s of series) {
      const steps: string[] = [`M ${x(edges[0])} ${y(0)}`];
      s.counts.forEach((count, i) => {
        steps.push(`L ${x(edges[i])} ${y(count)}`);
        steps.push(`L ${x(edges[i + 1])} ${y(count)}`);
      });
      steps.push(`L ${x(edges[edges.length - 1])} ${y(0)} Z`);
      const path = svgEl("path", {
        d: steps.join(" "),
        fill: s.color,
        "fill-opacity": "0.35",
        stroke: s.color,
        "stroke-width": "1.5",
        class: "histogram-series",
        "data-label": s.label,
      });
      this.root.append(path);
    }
    const axis = svgEl("line", {
      x1: String(PAD),
      y1: String(HEIGHT - PAD),
      x2: String(WIDTH - PAD),
      y2: String(HEIGHT - PAD),
      stroke: "#666",
    });
    this.root.append(axis);
  }
}

export function seriesFromSpec(
  spec: HistogramSpec,
  label: string,
  color: string,
): HistogramSeries {
  const found = spec.series.find((s) => s.label === label) ?? spec.series[0];
  return { label, color, edges: spec.edges, counts: found.counts };
}
