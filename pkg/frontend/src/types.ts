/** Wire types for the search service HTTP API. */

export interface ModelRef {
  model_id: string;
  epoch: number;
}

export interface ModelInfo extends ModelRef {
  count: number;
  dim: number;
}

export interface SearchItem {
  rank: number;
  item_id: string;
  frequency: number;
  weighted_score: number;
  best_similarity: number;
  occurrence: boolean[];
  similarities: (number | null)[];
}

export interface Diagnostics {
  coords: [number, number][];
  labels: number[];
  chosen_k: number;
  silhouette: number;
  head_cluster_ids: number[][];
  point_items: string[];
  point_models: number[];
  point_similarities: number[];
}

export interface SearchResponse {
  n: number;
  returned: number;
  truncated: boolean;
  pool_size: number;
  models: ModelRef[];
  items: SearchItem[];
  head_sequence: string[];
  diagnostics?: Diagnostics;
}

/** Parameters the UI controls; always sent with include_diagnostics=true. */
export interface SearchParams {
  text: string;
  n: number;
  top_k_per_model: number;
  k_min: number;
  k_max: number;
  seed: number;
  comparator: string;
}

export const COMPARATORS = ["freq_then_ws", "ws_only", "freq_times_ws"] as const;

export const DEFAULT_PARAMS: SearchParams = {
  text: "",
  n: 10,
  top_k_per_model: 20,
  k_min: 4,
  k_max: 6,
  seed: 0,
  comparator: "freq_then_ws",
};
