import { ExplorerApi } from "./api.js";
import { BarChartView } from "./barchart.js";
import { clear, el } from "./dom.js";
import type { BarSpec, Recommendation } from "./types.js";
import type { PredicateCard } from "./predicateCard.js";

/** Pivot view plus recommendations: bars of mean anomaly score per value of
 * the pivot feature (predicate's own values highlighted), a recommendation
 * list rendered as sentences, an exploration chart that recommendation
 * clicks swap, and a bookmark button that posts the current evidence. */
export class PivotPanel {
  readonly root: HTMLElement;
  private featureSelect: HTMLSelectElement;
  private pivotChart = new BarChartView();
  private explorationChart = new BarChartView();
  private recList: HTMLElement;
  private status: HTMLElement;
  private card: PredicateCard | null = null;
  private currentChart: BarSpec | null = null;
  private currentSentence = "";

  constructor(
    private api: ExplorerApi,
    private onBookmark?: (id: string) => void,
  ) {
    this.featureSelect = el("select", { class: "pivot-feature" }) as HTMLSelectElement;
    const go = el("button", { class: "btn-pivot", type: "button" }, ["pivot"]);
    go.addEventListener("click", () => void this.refresh());
    const bookmark = el("button", { class: "btn-bookmark", type: "button" }, ["bookmark"]);
    bookmark.addEventListener("click", () => void this.bookmark());
    this.recList = el("ul", { class: "recommendations" });
    this.status = el("div", { class: "pivot-status" });
    this.pivotChart.root.classList.add("pivot-chart");
    this.explorationChart.root.classList.add("exploration-chart");
    this.root = el("div", { class: "pivot-panel" }, [
      el("div", { class: "pivot-controls" }, [this.featureSelect, go, bookmark]),
      this.status,
      this.pivotChart.root,
      el("h3", {}, ["Exploration"]),
      this.explorationChart.root,
      el("h3", {}, ["Recommendations"]),
      this.recList,
    ]);
  }

  bind(card: PredicateCard): void {
    this.card = card;
    clear(this.featureSelect);
    const clauses = card.lastGood?.structure.clauses ?? [];
    for (const clause of clauses) {
      this.featureSelect.append(el("option", { value: clause.feature }, [clause.feature]));
    }
  }

  get pivotFeature(): string {
    return this.featureSelect.value;
  }

  async refresh(): Promise<void> {
    if (!this.card || !this.featureSelect.value) {
      return;
    }
    const feature = this.featureSelect.value;
    this.status.textContent = "";
    let spec: BarSpec;
    try {
      spec = await this.api.pivot(this.card.id, feature);
    } catch (err) {
      this.status.textContent = String(err);
      return;
    }
    this.pivotChart.render(spec);
    this.currentChart = spec;
    this.currentSentence = "";
    this.explorationChart.render(spec);
    await this.loadRecommendations(feature);
  }

  private async loadRecommendations(feature: string): Promise<void> {
    clear(this.recList);
    if (!this.card) {
      return;
    }
    let recs: Recommendation[];
    try {
      recs = (await this.api.recommendations(this.card.id, feature)).recommendations;
    } catch (err) {
      this.status.textContent = String(err);
      return;
    }
    for (const rec of recs) {
      const item = el("li", { class: "recommendation", "data-attribute": rec.attribute }, [
        el("span", { class: "rec-sentence" }, [rec.sentence]),
      ]);
      item.addEventListener("click", () => {
        // clicking a recommendation swaps the exploration chart's attribute
        this.explorationChart.render(rec.chart);
        this.currentChart = rec.chart;
        this.currentSentence = rec.sentence;
      });
      this.recList.append(item);
    }
  }

  async bookmark(): Promise<void> {
    if (!this.currentChart) {
      return;
    }
    const result = await this.api.bookmark(this.currentChart, this.currentSentence);
    this.status.textContent = `bookmarked ${result.id}`;
    this.onBookmark?.(result.id);
  }
}
