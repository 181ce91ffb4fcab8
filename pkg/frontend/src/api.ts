import type {
  ApiErrorBody,
  BarSpec,
  DatasetInfo,
  EvaluateResponse,
  HistogramSpec,
  PredicateRecord,
  Recommendation,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.message);
  }

  get position(): number | null {
    return this.body.detail?.position ?? null;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, {
      code: "network",
      message: err instanceof Error ? err.message : "network failure",
      detail: null,
    });
  }
  if (!response.ok) {
    let body: ApiErrorBody;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = { code: "http", message: `HTTP ${response.status}`, detail: null };
    }
    throw new ApiError(response.status, body);
  }
  if (response.status === 204) {
    return undefined as T;
  }
  return (await response.json()) as T;
}

/** Thin typed client; the UI displays service numbers verbatim and never
 * computes coverage, influence, or Bayes factors itself. */
export class ExplorerApi {
  constructor(
    private baseUrl: string,
    private datasetId: string,
  ) {}

  dataset(): Promise<DatasetInfo> {
    return request(`${this.baseUrl}/datasets/${this.datasetId}`);
  }

  evaluate(predicate: string, bins = 40): Promise<EvaluateResponse> {
    return request(`${this.baseUrl}/datasets/${this.datasetId}/evaluate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ predicate, bins }),
    });
  }

  listPredicates(): Promise<{ predicates: PredicateRecord[] }> {
    return request(`${this.baseUrl}/datasets/${this.datasetId}/predicates`);
  }

  createPredicate(text: string, label?: string, color?: string): Promise<PredicateRecord> {
    return request(`${this.baseUrl}/datasets/${this.datasetId}/predicates`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text, label, color }),
    });
  }

  patchPredicate(
    id: string,
    patch: Partial<Pick<PredicateRecord, "text" | "label" | "color" | "hidden">>,
  ): Promise<PredicateRecord> {
    return request(`${this.baseUrl}/datasets/${this.datasetId}/predicates/${id}`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    });
  }

  deletePredicate(id: string): Promise<void> {
    return request(`${this.baseUrl}/datasets/${this.datasetId}/predicates/${id}`, {
      method: "DELETE",
    });
  }

  pivot(predicate: string, feature: string): Promise<BarSpec> {
    const params = new URLSearchParams({ predicate, feature });
    return request(`${this.baseUrl}/datasets/${this.datasetId}/pivot?${params}`);
  }

  recommendations(
    predicate: string,
    pivot: string,
  ): Promise<{ recommendations: Recommendation[] }> {
    const params = new URLSearchParams({ predicate, pivot });
    return request(`${this.baseUrl}/datasets/${this.datasetId}/recommendations?${params}`);
  }

  histogram(predicateIds: string[], bins = 40): Promise<HistogramSpec> {
    const params = new URLSearchParams({ predicates: predicateIds.join(","), bins: String(bins) });
    return request(`${this.baseUrl}/datasets/${this.datasetId}/histogram?${params}`);
  }

  bookmark(chart: BarSpec | HistogramSpec, sentence: string): Promise<{ id: string }> {
    return request(`${this.baseUrl}/datasets/${this.datasetId}/bookmarks`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ chart, sentence }),
    });
  }
}
