export interface FeatureInfo {
  name: string;
  kind: "categorical" | "numeric" | "datetime";
  role: "target" | "context";
  cardinality: number;
  domain: { values?: string[]; min?: number; max?: number };
}

export interface DatasetInfo {
  dataset_id: string;
  name: string;
  rows: number;
  features: FeatureInfo[];
  has_scores: boolean;
}

export interface HistogramSpec {
  type: "histogram";
  edges: number[];
  series: { label: string; counts: number[] }[];
}

export interface BarSpec {
  type: "bar";
  categories: string[];
  series: { label: string; values: number[]; counts: number[] }[];
  highlighted: string[];
}

export interface ClauseStructure {
  feature: string;
  kind: "categorical" | "numeric" | "datetime";
  domain: { values?: string[]; min?: number; max?: number };
  type: "member" | "range";
  values?: string[];
  lo?: number | null;
  hi?: number | null;
  lo_incl?: boolean;
  hi_incl?: boolean;
}

export interface EvaluateResponse {
  predicate: string;
  coverage: { count: number; fraction: number };
  histogram: HistogramSpec;
  bayes: { bf10: number | null; log_bf10: number | null; category: string } | null;
  influence: number | null;
  mean_score_inside: number | null;
  mean_score_outside: number | null;
  structure: { negated: boolean; terms: number; clauses: ClauseStructure[] };
}

export interface PredicateRecord {
  id: string;
  text: string;
  label: string;
  color: string;
  hidden: boolean;
  source: string;
}

export interface Recommendation {
  attribute: string;
  correlation: number;
  direction: "high" | "low";
  sentence: string;
  chart: BarSpec;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: { position?: number | null } | null;
}
