/** Thin client over the service HTTP API with stale-response discard. */

import type { ModelInfo, SearchParams, SearchResponse } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(res: Response): Promise<string> {
  try {
    const doc = (await res.json()) as { detail?: string };
    if (doc && typeof doc.detail === "string") return doc.detail;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${res.status}`;
}

export class ApiClient {
  // at most one search counts: responses for superseded tickets are dropped
  private seq = 0;

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  /**
   * Issue a search. Resolves null when a newer search was issued while this
   * one was in flight, so the caller never renders out-of-date results.
   */
  async search(params: SearchParams): Promise<SearchResponse | null> {
    const ticket = ++this.seq;
    const body = {
      text: params.text,
      n: params.n,
      top_k_per_model: params.top_k_per_model,
      k_min: params.k_min,
      k_max: params.k_max,
      seed: params.seed,
      comparator: params.comparator,
      include_diagnostics: true,
    };
    const res = await this.fetchImpl(`${this.baseUrl}/search`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (ticket !== this.seq) return null;
    if (!res.ok) throw new ApiError(await errorDetail(res), res.status);
    const doc = (await res.json()) as SearchResponse;
    if (ticket !== this.seq) return null;
    return doc;
  }

  async models(): Promise<ModelInfo[]> {
    const res = await this.fetchImpl(`${this.baseUrl}/models`);
    if (!res.ok) throw new ApiError(await errorDetail(res), res.status);
    const doc = (await res.json()) as { models: ModelInfo[] };
    return doc.models;
  }

  imageUrl(itemId: string): string {
    return `${this.baseUrl}/images/${encodeURIComponent(itemId)}`;
  }
}
