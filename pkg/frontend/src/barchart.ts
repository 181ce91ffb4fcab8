import { clear, el, svgEl, verbatim } from "./dom.js";
import type { BarSpec } from "./types.js";

const WIDTH = 640;
const HEIGHT = 220;
const PAD = 34;

/** Bar chart for pivot/recommendation specs; highlighted categories (the
 * predicate's own pivot values) are drawn in the accent color. */
export class BarChartView {
  readonly root: HTMLElement;

  constructor(private accent = "#4c78a8", private base = "#b8b8b8") {
    this.root = el("div", { class: "bar-chart" });
  }

  render(spec: BarSpec, onBarClick?: (category: string) => void): void {
    clear(this.root);
    const series = spec.series[0];
    if (!series || !spec.categories.length) {
      return;
    }
    const caption = el("div", { class: "bar-chart-label" }, [series.label]);
    this.root.append(caption);
    const svg = svgEl("svg", {
      width: String(WIDTH),
      height: String(HEIGHT),
      viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    });
    const highlighted = new Set(spec.highlighted);
    const maxValue = Math.max(...series.values, 0);
    const minValue = Math.min(...series.values, 0);
    const span = maxValue - minValue || 1;
    const slot = (WIDTH - 2 * PAD) / spec.categories.length;
    const zeroY = HEIGHT - PAD - ((0 - minValue) / span) * (HEIGHT - 2 * PAD);
    spec.categories.forEach((category, i) => {
      const value = series.values[i];
      const valueY = HEIGHT - PAD - ((value - minValue) / span) * (HEIGHT - 2 * PAD);
      const rect = svgEl("rect", {
        x: String(PAD + i * slot + slot * 0.1),
        y: String(Math.min(valueY, zeroY)),
        width: String(slot * 0.8),
        height: String(Math.max(1, Math.abs(zeroY - valueY))),
        fill: highlighted.has(category) ? this.accent : this.base,
        class: highlighted.has(category) ? "bar highlighted" : "bar",
        "data-category": category,
        "data-value": verbatim(value),
      });
      if (onBarClick) {
        rect.addEventListener("click", () => onBarClick(category));
      }
      const title = svgEl("title");
      title.textContent = `${category}: ${verbatim(value)}`;
      rect.append(title);
      svg.append(rect);
    });
    this.root.append(svg);
  }
}
