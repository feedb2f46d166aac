/** Page wiring: parameter panel, result grid, diagnostics scatter.
 *
 * The UI performs no ranking of its own: it renders the service response in
 * order and re-issues a search whenever a parameter changes. Stale responses
 * are dropped by the API client, so the view always reflects the newest
 * request.
 */

import { ApiClient, ApiError } from "./api.js";
import { gridOrder, renderGrid } from "./grid.js";
import { renderScatter } from "./scatter.js";
import { COMPARATORS, DEFAULT_PARAMS } from "./types.js";
import type { SearchParams, SearchResponse } from "./types.js";

export interface ViewState {
  params: SearchParams;
  response: SearchResponse | null;
  selectedId: string | null;
}

export interface AppHandle {
  state: ViewState;
  search: () => Promise<void>;
  elements: {
    form: HTMLFormElement;
    error: HTMLElement;
    grid: HTMLElement;
    scatter: HTMLElement;
  };
}

export function initApp(root: HTMLElement, api: ApiClient): AppHandle {
  const state: ViewState = {
    params: { ...DEFAULT_PARAMS },
    response: null,
    selectedId: null,
  };

  root.textContent = "";
  const form = buildForm(state.params);
  const error = document.createElement("div");
  error.className = "error";
  error.hidden = true;
  const grid = document.createElement("div");
  grid.className = "grid";
  const scatter = document.createElement("div");
  scatter.className = "scatter-panel";
  root.append(form, error, grid, scatter);

  const select = (itemId: string) => {
    state.selectedId = state.selectedId === itemId ? null : itemId;
    render();
  };

  const render = () => {
    if (!state.response) return;
    renderGrid(grid, state.response, { imageUrl: (id) => api.imageUrl(id), onSelect: select }, state.selectedId);
    renderScatter(scatter, state.response, { onSelect: select }, state.selectedId);
  };

  const search = async () => {
    readForm(form, state.params);
    error.hidden = true;
    try {
      const response = await api.search(state.params);
      if (response === null) return; // superseded by a newer request
      state.response = response;
      if (state.selectedId && !response.items.some((i) => i.item_id === state.selectedId)) {
        state.selectedId = null;
      }
      render();
    } catch (err) {
      // surface the failure, keep the form contents untouched
      error.textContent = err instanceof ApiError ? err.message : String(err);
      error.hidden = false;
    }
  };

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void search();
  });
  form.addEventListener("change", () => {
    void search();
  });

  return { state, search, elements: { form, error, grid, scatter } };
}

function buildForm(params: SearchParams): HTMLFormElement {
  const form = document.createElement("form");
  form.className = "params";

  form.appendChild(textField("text", "query", params.text));
  form.appendChild(numberField("n", "results", params.n, 1, 200));
  form.appendChild(numberField("top_k_per_model", "top-k per model", params.top_k_per_model, 1, 500));
  form.appendChild(numberField("k_min", "K min", params.k_min, 1, 20));
  form.appendChild(numberField("k_max", "K max", params.k_max, 1, 20));
  form.appendChild(numberField("seed", "seed", params.seed, 0, 2 ** 31));

  const label = document.createElement("label");
  label.textContent = "comparator ";
  const select = document.createElement("select");
  select.name = "comparator";
  for (const value of COMPARATORS) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    select.appendChild(option);
  }
  select.value = params.comparator;
  label.appendChild(select);
  form.appendChild(label);

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "search";
  form.appendChild(submit);
  return form;
}

function textField(name: string, text: string, value: string): HTMLElement {
  const label = document.createElement("label");
  label.textContent = `${text} `;
  const input = document.createElement("input");
  input.type = "text";
  input.name = name;
  input.value = value;
  label.appendChild(input);
  return label;
}

function numberField(name: string, text: string, value: number, min: number, max: number): HTMLElement {
  const label = document.createElement("label");
  label.textContent = `${text} `;
  const input = document.createElement("input");
  input.type = "number";
  input.name = name;
  input.min = String(min);
  input.max = String(max);
  input.value = String(value);
  label.appendChild(input);
  return label;
}

function readForm(form: HTMLFormElement, params: SearchParams): void {
  const field = <T extends HTMLElement>(name: string) =>
    form.querySelector<T>(`[name="${name}"]`);
  params.text = field<HTMLInputElement>("text")?.value ?? params.text;
  params.n = readInt(field<HTMLInputElement>("n"), params.n);
  params.top_k_per_model = readInt(field<HTMLInputElement>("top_k_per_model"), params.top_k_per_model);
  params.k_min = readInt(field<HTMLInputElement>("k_min"), params.k_min);
  params.k_max = readInt(field<HTMLInputElement>("k_max"), params.k_max);
  params.seed = readInt(field<HTMLInputElement>("seed"), params.seed);
  params.comparator = field<HTMLSelectElement>("comparator")?.value ?? params.comparator;
}

function readInt(input: HTMLInputElement | null, fallback: number): number {
  if (!input) return fallback;
  const value = Number.parseInt(input.value, 10);
  return Number.isFinite(value) ? value : fallback;
}

export { gridOrder };
