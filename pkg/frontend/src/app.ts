import { ExplorerApi } from "./api.js";
import { el } from "./dom.js";
import { HistogramView, seriesFromSpec } from "./histogram.js";
import { colorFor } from "./palette.js";
import { PivotPanel } from "./pivotPanel.js";
import { CardOptions, PredicateCard } from "./predicateCard.js";
import type { DatasetInfo, PredicateRecord } from "./types.js";

export interface AppOptions extends Partial<CardOptions> {
  confirmFn?: (message: string) => boolean;
}

/** Explorer: predicate cards over a shared score-histogram superposition,
 * plus a pivot/recommendation panel. All displayed numbers come from the
 * service verbatim; hiding a card removes its series without deleting it. */
export class ExplorerApp {
  readonly api: ExplorerApi;
  readonly cards: PredicateCard[] = [];
  readonly histogram = new HistogramView();
  readonly pivotPanel: PivotPanel;
  dataset: DatasetInfo | null = null;

  private cardOptions: CardOptions;
  private confirmFn: (message: string) => boolean;
  private cardList: HTMLElement;
  private newText: HTMLTextAreaElement;
  private toast: HTMLElement;
  private created = 0;

  constructor(
    private root: HTMLElement,
    baseUrl: string,
    datasetId: string,
    options: AppOptions = {},
  ) {
    this.api = new ExplorerApi(baseUrl, datasetId);
    this.cardOptions = {
      debounceMs: options.debounceMs ?? 300,
      previewMs: options.previewMs ?? 150,
    };
    this.confirmFn =
      options.confirmFn ??
      ((message: string) =>
        typeof window !== "undefined" && typeof window.confirm === "function"
          ? window.confirm(message)
          : true);

    this.newText = el("textarea", { class: "new-predicate-text", rows: "2" });
    const addBtn = el("button", { class: "btn-add", type: "button" }, ["add predicate"]);
    addBtn.addEventListener("click", () => void this.addCard(this.newText.value));
    this.cardList = el("div", { class: "card-list" });
    this.toast = el("div", { class: "toast" });
    this.toast.hidden = true;
    this.pivotPanel = new PivotPanel(this.api);

    this.root.append(
      el("div", { class: "composer" }, [this.newText, addBtn]),
      this.toast,
      this.cardList,
      this.histogram.root,
      this.pivotPanel.root,
    );
  }

  /** Load dataset info and stored predicates (induced or saved earlier). */
  async init(): Promise<void> {
    this.dataset = await this.api.dataset();
    const stored = await this.api.listPredicates();
    for (const record of stored.predicates) {
      await this.mountCard(record);
    }
    this.renderSuperposition();
  }

  async addCard(text: string): Promise<PredicateCard | null> {
    const trimmed = text.trim();
    if (!trimmed) {
      return null;
    }
    let record;
    try {
      record = await this.api.createPredicate(
        trimmed,
        `predicate ${this.created + 1}`,
        colorFor(this.created),
      );
    } catch (err) {
      this.showToast(String(err));
      return null;
    }
    this.newText.value = "";
    return this.mountCard(record);
  }

  private async mountCard(record: PredicateRecord): Promise<PredicateCard> {
    this.created += 1;
    const card = new PredicateCard(
      this.api,
      record,
      this.cardOptions,
      () => this.renderSuperposition(),
      (text) => void this.addCard(text),
      (c) => void this.removeCard(c),
      this.confirmFn,
      (c) => this.openPivot(c),
    );
    this.cards.push(card);
    this.cardList.append(card.root);
    await card.evaluateNow();
    return card;
  }

  async removeCard(card: PredicateCard): Promise<void> {
    try {
      await this.api.deletePredicate(card.id);
    } catch (err) {
      this.showToast(String(err));
      return;
    }
    const index = this.cards.indexOf(card);
    if (index >= 0) {
      this.cards.splice(index, 1);
    }
    card.root.remove();
    this.renderSuperposition();
  }

  /** Superimpose the selection series of every visible card (shared edges:
   * every evaluate histogram spans the global score range). */
  renderSuperposition(): void {
    const series = this.cards
      .filter((card) => !card.hidden && card.lastGood)
      .map((card) =>
        seriesFromSpec(card.lastGood!.histogram, "selection", card.color),
      );
    this.histogram.render(series);
  }

  openPivot(card: PredicateCard): void {
    this.pivotPanel.bind(card);
  }

  private showToast(message: string): void {
    this.toast.hidden = false;
    this.toast.textContent = message;
  }
}

export { PredicateCard } from "./predicateCard.js";
export { ExplorerApi } from "./api.js";

declare global {
  interface Window {
    PredexExplorer?: typeof ExplorerApp;
  }
}

if (typeof window !== "undefined") {
  window.PredexExplorer = ExplorerApp;
}
