import { ApiError, ExplorerApi } from "./api.js";
import { clear, debounced, el, verbatim } from "./dom.js";
import type { ClauseStructure, EvaluateResponse, PredicateRecord } from "./types.js";

export interface CardOptions {
  debounceMs: number;
  previewMs: number;
}

function quote(value: string): string {
  return `'${value.replace(/\\/g, "\\\\").replace(/'/g, "\\'")}'`;
}

function epochToIso(epoch: number): string {
  const iso = new Date(Math.round(epoch) * 1000).toISOString();
  return `${iso.slice(0, 10)} ${iso.slice(11, 19)}`;
}

function rangeLiteral(clause: ClauseStructure, value: number): string {
  return clause.kind === "datetime" ? quote(epochToIso(value)) : String(value);
}

export function clauseToText(clause: ClauseStructure): string {
  if (clause.type === "member") {
    const values = clause.values ?? [];
    if (values.length === 1) {
      return `${clause.feature} = ${quote(values[0])}`;
    }
    return `${clause.feature} in [${values.map(quote).join(", ")}]`;
  }
  const lo = clause.lo ?? null;
  const hi = clause.hi ?? null;
  if (lo !== null && hi !== null) {
    if (lo === hi && clause.kind !== "datetime") {
      return `${clause.feature} = ${String(lo)}`;
    }
    const loOp = clause.lo_incl ? "<=" : "<";
    const hiOp = clause.hi_incl ? "<=" : "<";
    return `${rangeLiteral(clause, lo)} ${loOp} ${clause.feature} ${hiOp} ${rangeLiteral(clause, hi)}`;
  }
  if (lo !== null) {
    return `${clause.feature} ${clause.lo_incl ? ">=" : ">"} ${rangeLiteral(clause, lo)}`;
  }
  return `${clause.feature} ${clause.hi_incl ? "<=" : "<"} ${rangeLiteral(clause, hi ?? 0)}`;
}

export function predicateFromClauses(clauses: ClauseStructure[], negated: boolean): string {
  const body =
    clauses.length === 1
      ? clauseToText(clauses[0])
      : clauses.map((c) => `(${clauseToText(c)})`).join(" & ");
  return negated ? `NOT(${body})` : body;
}

/** One predicate card: text editing and per-clause widgets kept in sync via
 * the evaluate endpoint (which returns the canonical text and structure); a
 * live coverage / influence / bf10 badge; hide, NOT, clone, delete actions.
 *
 * Only one evaluate call is in flight per card: responses are tagged with a
 * sequence number and stale ones are dropped. A failed evaluate (syntax
 * error, network) leaves the previous numbers and histogram untouched. */
export class PredicateCard {
  readonly root: HTMLElement;
  record: PredicateRecord;
  lastGood: EvaluateResponse | null = null;

  private seq = 0;
  private applied = 0;
  private textArea: HTMLTextAreaElement;
  private badge: HTMLElement;
  private errorBox: HTMLElement;
  private widgetBox: HTMLElement;
  private pendingText: string;
  private scheduleEvaluate: () => void;
  private schedulePreview: () => void;

  constructor(
    private api: ExplorerApi,
    record: PredicateRecord,
    opts: CardOptions,
    private onChange: (card: PredicateCard) => void,
    private onClone: (text: string) => void,
    private onDelete: (card: PredicateCard) => void,
    private confirmFn: (message: string) => boolean,
    private onPivot?: (card: PredicateCard) => void,
  ) {
    this.record = record;
    this.pendingText = record.text;
    this.root = el("div", { class: "predicate-card", "data-card-id": record.id });

    const chip = el("span", { class: "color-chip" });
    chip.style.backgroundColor = record.color;
    const label = el("span", { class: "card-label" }, [record.label]);
    this.badge = el("span", { class: "card-badge" }, ["evaluating..."]);

    const notBtn = el("button", { class: "btn-not", type: "button" }, ["NOT"]);
    notBtn.addEventListener("click", () => {
      this.onClone(this.complementText());
    });
    const cloneBtn = el("button", { class: "btn-clone", type: "button" }, ["clone"]);
    cloneBtn.addEventListener("click", () => this.onClone(this.pendingText));
    const hideBtn = el("button", { class: "btn-hide", type: "button" }, [
      record.hidden ? "show" : "hide",
    ]);
    hideBtn.addEventListener("click", () => {
      void this.setHidden(!this.record.hidden, hideBtn);
    });
    const deleteBtn = el("button", { class: "btn-delete", type: "button" }, ["delete"]);
    deleteBtn.addEventListener("click", () => {
      if (this.confirmFn(`Delete predicate "${this.record.label}"?`)) {
        this.onDelete(this);
      }
    });
    const pivotBtn = el("button", { class: "btn-open-pivot", type: "button" }, ["pivot"]);
    pivotBtn.addEventListener("click", () => this.onPivot?.(this));

    const header = el("div", { class: "card-header" }, [
      chip,
      label,
      this.badge,
      notBtn,
      cloneBtn,
      hideBtn,
      deleteBtn,
      pivotBtn,
    ]);

    this.textArea = el("textarea", { class: "predicate-text", rows: "2" });
    this.textArea.value = record.text;
    this.errorBox = el("div", { class: "card-error" });
    this.errorBox.hidden = true;
    this.widgetBox = el("div", { class: "clause-widgets" });

    this.scheduleEvaluate = debounced(() => void this.evaluateNow(), opts.debounceMs);
    this.schedulePreview = debounced(() => void this.evaluateNow(), opts.previewMs);
    this.textArea.addEventListener("input", () => {
      this.pendingText = this.textArea.value;
      this.scheduleEvaluate();
    });

    this.root.append(header, this.textArea, this.errorBox, this.widgetBox);
  }

  get id(): string {
    return this.record.id;
  }

  get hidden(): boolean {
    return this.record.hidden;
  }

  get color(): string {
    return this.record.color;
  }

  complementText(): string {
    const text = this.pendingText.trim();
    const match = /^NOT\s*\((.*)\)$/s.exec(text);
    if (match) {
      return match[1];
    }
    return `NOT(${text})`;
  }

  async setHidden(hidden: boolean, button?: HTMLElement): Promise<void> {
    this.record = await this.api.patchPredicate(this.id, { hidden });
    if (button) {
      button.textContent = hidden ? "show" : "hide";
    }
    this.onChange(this);
  }

  /** Evaluate the pending text; on success sync the stored record and badge,
   * rebuild widgets, and notify the app. */
  async evaluateNow(): Promise<EvaluateResponse | null> {
    const mySeq = ++this.seq;
    let result: EvaluateResponse;
    try {
      result = await this.api.evaluate(this.pendingText);
    } catch (err) {
      if (mySeq < this.applied) {
        return null;
      }
      this.showError(err);
      return null;
    }
    if (mySeq <= this.applied) {
      return null; // stale response: a newer evaluate already landed
    }
    this.applied = mySeq;
    this.errorBox.hidden = true;
    this.errorBox.textContent = "";
    this.lastGood = result;
    this.pendingText = result.predicate;
    this.textArea.value = result.predicate;
    if (this.record.text !== result.predicate) {
      this.record = await this.api.patchPredicate(this.id, { text: result.predicate });
    }
    this.renderBadge(result);
    this.renderWidgets(result);
    this.onChange(this);
    return result;
  }

  private showError(err: unknown): void {
    this.errorBox.hidden = false;
    if (err instanceof ApiError) {
      const position = err.position;
      this.errorBox.textContent =
        position === null ? err.message : `${err.message} (position ${position})`;
      this.errorBox.setAttribute("data-code", err.body.code);
    } else {
      this.errorBox.textContent = String(err);
      this.errorBox.setAttribute("data-code", "unknown");
    }
  }

  private renderBadge(result: EvaluateResponse): void {
    clear(this.badge);
    const entries: [string, string][] = [
      ["coverage-count", verbatim(result.coverage.count)],
      ["coverage-fraction", verbatim(result.coverage.fraction)],
      ["influence", verbatim(result.influence)],
      ["bf10", verbatim(result.bayes ? result.bayes.bf10 : null)],
      ["category", result.bayes ? result.bayes.category : "n/a"],
    ];
    for (const [name, value] of entries) {
      this.badge.append(
        el("span", { class: `metric metric-${name}`, "data-metric": name }, [value]),
      );
    }
  }

  /** Per-clause widgets: sliders for range clauses, multi-selects for
   * categorical membership. Rebuilt from the server's structure on every
   * successful evaluate so text and widgets never drift apart. */
  private renderWidgets(result: EvaluateResponse): void {
    clear(this.widgetBox);
    const structure = result.structure;
    if (!structure.clauses.length) {
      return; // multi-term predicate: text editing only
    }
    structure.clauses.forEach((clause, index) => {
      const row = el("div", { class: "clause-widget", "data-feature": clause.feature }, [
        el("span", { class: "clause-feature" }, [clause.feature]),
      ]);
      if (clause.type === "member") {
        row.append(this.memberWidget(structure.clauses, index));
      } else {
        row.append(this.rangeWidget(structure.clauses, index));
      }
      this.widgetBox.append(row);
    });
  }

  private rebuildFromClauses(clauses: ClauseStructure[], negated: boolean): void {
    this.pendingText = predicateFromClauses(clauses, negated);
    this.textArea.value = this.pendingText;
  }

  private memberWidget(clauses: ClauseStructure[], index: number): HTMLElement {
    const clause = clauses[index];
    const select = el("select", { multiple: "multiple", class: "member-select" });
    const selected = new Set(clause.values ?? []);
    for (const value of clause.domain.values ?? clause.values ?? []) {
      const option = el("option", { value }, [value]) as HTMLOptionElement;
      option.selected = selected.has(value);
      select.append(option);
    }
    select.addEventListener("change", () => {
      const chosen = Array.from(select.selectedOptions).map((o) => o.value);
      if (!chosen.length) {
        return; // a membership clause cannot go empty
      }
      clause.values = chosen;
      this.rebuildFromClauses(clauses, this.lastGood?.structure.negated ?? false);
      this.scheduleEvaluate();
    });
    return select;
  }

  private rangeWidget(clauses: ClauseStructure[], index: number): HTMLElement {
    const clause = clauses[index];
    const box = el("span", { class: "range-sliders" });
    const min = clause.domain.min ?? clause.lo ?? 0;
    const max = clause.domain.max ?? clause.hi ?? 1;
    const step = (max - min) / 200 || 1;
    const negated = () => this.lastGood?.structure.negated ?? false;
    const addSlider = (bound: "lo" | "hi") => {
      const current = clause[bound];
      if (current === null || current === undefined) {
        return;
      }
      const slider = el("input", {
        type: "range",
        class: `range-slider range-${bound}`,
        min: String(min),
        max: String(max),
        step: String(step),
        value: String(current),
      }) as HTMLInputElement;
      // live preview while dragging, an authoritative evaluate on release
      slider.addEventListener("input", () => {
        clause[bound] = Number(slider.value);
        this.rebuildFromClauses(clauses, negated());
        this.schedulePreview();
      });
      slider.addEventListener("change", () => {
        clause[bound] = Number(slider.value);
        this.rebuildFromClauses(clauses, negated());
        void this.evaluateNow();
      });
      box.append(slider);
    };
    addSlider("lo");
    addSlider("hi");
    return box;
  }
}
