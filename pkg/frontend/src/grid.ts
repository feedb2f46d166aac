/** Result grid: one tile per ranked item, in exactly the service's order. */

import type { ModelRef, SearchResponse } from "./types.js";

export interface GridCallbacks {
  imageUrl: (itemId: string) => string;
  onSelect: (itemId: string) => void;
}

export function renderGrid(
  container: HTMLElement,
  response: SearchResponse,
  callbacks: GridCallbacks,
  selectedId: string | null,
): void {
  container.textContent = "";
  for (const item of response.items) {
    const tile = document.createElement("div");
    tile.className = "tile" + (item.item_id === selectedId ? " selected" : "");
    tile.dataset.itemId = item.item_id;

    const img = document.createElement("img");
    img.src = callbacks.imageUrl(item.item_id);
    img.alt = item.item_id;
    img.loading = "lazy";
    tile.appendChild(img);

    const badge = document.createElement("span");
    badge.className = "freq-badge";
    badge.textContent = `${item.frequency}×`;
    badge.title = `retrieved by ${item.frequency} of ${response.models.length} models`;
    tile.appendChild(badge);

    const caption = document.createElement("div");
    caption.className = "caption";
    const name = document.createElement("span");
    name.className = "item-id";
    name.textContent = `#${item.rank} ${item.item_id}`;
    caption.appendChild(name);
    const score = document.createElement("span");
    score.className = "weighted-score";
    score.textContent = `ws ${item.weighted_score.toFixed(2)}`;
    caption.appendChild(score);
    tile.appendChild(caption);

    tile.appendChild(presenceDots(item.occurrence, item.similarities, response.models));
    tile.addEventListener("click", () => callbacks.onSelect(item.item_id));
    container.appendChild(tile);
  }
}

function presenceDots(
  occurrence: boolean[],
  similarities: (number | null)[],
  models: ModelRef[],
): HTMLElement {
  const row = document.createElement("div");
  row.className = "model-dots";
  models.forEach((model, index) => {
    const dot = document.createElement("span");
    const present = occurrence[index] === true;
    dot.className = "dot" + (present ? " present" : " absent");
    const sim = similarities[index];
    dot.title = present
      ? `${model.model_id} (epoch ${model.epoch}): sim ${sim == null ? "?" : sim.toFixed(3)}`
      : `${model.model_id} (epoch ${model.epoch}): not retrieved`;
    row.appendChild(dot);
  });
  return row;
}

/** Tile ids in DOM order, for tests and for scatter cross-highlighting. */
export function gridOrder(container: HTMLElement): string[] {
  return Array.from(container.querySelectorAll<HTMLElement>(".tile")).map(
    (tile) => tile.dataset.itemId ?? "",
  );
}
