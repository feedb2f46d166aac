/** Diagnostics scatter: the joint 2-D projection of every retrieved point.
 *
 * Encoding follows the service's diagnostics contract: one SVG node per
 * projected point, color = cluster, marker shape = source model, the union of
 * head clusters outlined with a convex hull, head items starred.
 */

import type { ModelRef, SearchResponse } from "./types.js";

export const CLUSTER_COLORS = [
  "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
  "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
];

const MARKERS = ["circle", "square", "triangle", "diamond"] as const;
type Marker = (typeof MARKERS)[number];

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 520;
const HEIGHT = 420;
const PAD = 24;
const R = 5;

export interface ScatterCallbacks {
  onSelect: (itemId: string) => void;
}

export function renderScatter(
  container: HTMLElement,
  response: SearchResponse,
  callbacks: ScatterCallbacks,
  selectedId: string | null,
): void {
  container.textContent = "";
  const diag = response.diagnostics;
  if (!diag) {
    const hint = document.createElement("p");
    hint.className = "scatter-hint";
    hint.textContent = "diagnostics disabled: enable them to see the cluster map";
    container.appendChild(hint);
    return;
  }

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "scatter");

  const toScreen = makeProjection(diag.coords);
  const headClusters = new Set<number>();
  for (const ids of diag.head_cluster_ids) for (const c of ids) headClusters.add(c);
  const headItems = new Set(response.head_sequence);

  const hullPoints: [number, number][] = [];
  diag.coords.forEach((xy, i) => {
    const label = diag.labels[i];
    if (label !== undefined && headClusters.has(label)) hullPoints.push(toScreen(xy));
  });
  const hull = convexHull(hullPoints);
  if (hull.length >= 3) {
    const polygon = document.createElementNS(SVG_NS, "polygon");
    polygon.setAttribute("class", "head-hull");
    polygon.setAttribute("points", hull.map(([x, y]) => `${x},${y}`).join(" "));
    svg.appendChild(polygon);
  }

  diag.coords.forEach((xy, i) => {
    const [x, y] = toScreen(xy);
    const label = diag.labels[i] ?? 0;
    const modelIndex = diag.point_models[i] ?? 0;
    const itemId = diag.point_items[i] ?? "";
    const sim = diag.point_similarities[i] ?? 0;
    const model = response.models[modelIndex];

    const node = markerNode(MARKERS[modelIndex % MARKERS.length] as Marker, x, y);
    node.setAttribute(
      "class",
      "scatter-point" + (itemId === selectedId ? " selected" : ""),
    );
    node.setAttribute("fill", CLUSTER_COLORS[label % CLUSTER_COLORS.length] as string);
    node.dataset.itemId = itemId;
    node.dataset.model = String(modelIndex);
    node.dataset.cluster = String(label);

    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${itemId} · ${model ? `${model.model_id} epoch ${model.epoch}` : `model ${modelIndex}`} · sim ${sim.toFixed(3)}`;
    node.appendChild(title);
    node.addEventListener("click", () => callbacks.onSelect(itemId));
    svg.appendChild(node);

    if (headItems.has(itemId)) {
      const star = document.createElementNS(SVG_NS, "path");
      star.setAttribute("class", "head-star");
      star.setAttribute("d", starPath(x, y, R + 4));
      star.dataset.itemId = itemId;
      svg.appendChild(star);
    }
  });

  container.appendChild(svg);
  container.appendChild(legend(diag.chosen_k, response.models));

  const stats = document.createElement("p");
  stats.className = "scatter-stats";
  stats.textContent =
    `${diag.coords.length} points · K=${diag.chosen_k} ` +
    `· silhouette ${diag.silhouette.toFixed(3)}`;
  container.appendChild(stats);
}

function makeProjection(coords: [number, number][]): (xy: [number, number]) => [number, number] {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const [x, y] of coords) {
    minX = Math.min(minX, x); maxX = Math.max(maxX, x);
    minY = Math.min(minY, y); maxY = Math.max(maxY, y);
  }
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  return ([x, y]) => [
    PAD + ((x - minX) / spanX) * (WIDTH - 2 * PAD),
    // svg y grows downward
    HEIGHT - PAD - ((y - minY) / spanY) * (HEIGHT - 2 * PAD),
  ];
}

function markerNode(marker: Marker, x: number, y: number): SVGElement {
  if (marker === "circle") {
    const c = document.createElementNS(SVG_NS, "circle");
    c.setAttribute("cx", String(x));
    c.setAttribute("cy", String(y));
    c.setAttribute("r", String(R));
    return c;
  }
  if (marker === "square") {
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(x - R));
    rect.setAttribute("y", String(y - R));
    rect.setAttribute("width", String(2 * R));
    rect.setAttribute("height", String(2 * R));
    return rect;
  }
  const path = document.createElementNS(SVG_NS, "path");
  if (marker === "triangle") {
    path.setAttribute("d", `M ${x} ${y - R} L ${x + R} ${y + R} L ${x - R} ${y + R} Z`);
  } else {
    path.setAttribute("d", `M ${x} ${y - R} L ${x + R} ${y} L ${x} ${y + R} L ${x - R} ${y} Z`);
  }
  return path;
}

function starPath(cx: number, cy: number, outer: number): string {
  const inner = outer * 0.45;
  const parts: string[] = [];
  for (let i = 0; i < 10; i++) {
    const r = i % 2 === 0 ? outer : inner;
    const angle = -Math.PI / 2 + (i * Math.PI) / 5;
    const x = cx + r * Math.cos(angle);
    const y = cy + r * Math.sin(angle);
    parts.push(`${i === 0 ? "M" : "L"} ${x.toFixed(2)} ${y.toFixed(2)}`);
  }
  return parts.join(" ") + " Z";
}

/** Andrew's monotone chain; returns [] for degenerate input. */
export function convexHull(points: [number, number][]): [number, number][] {
  const unique = Array.from(new Map(points.map((p) => [`${p[0]},${p[1]}`, p])).values());
  if (unique.length < 3) return [];
  unique.sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const cross = (o: [number, number], a: [number, number], b: [number, number]) =>
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  const lower: [number, number][] = [];
  for (const p of unique) {
    while (lower.length >= 2 && cross(lower[lower.length - 2]!, lower[lower.length - 1]!, p) <= 0)
      lower.pop();
    lower.push(p);
  }
  const upper: [number, number][] = [];
  for (const p of unique.slice().reverse()) {
    while (upper.length >= 2 && cross(upper[upper.length - 2]!, upper[upper.length - 1]!, p) <= 0)
      upper.pop();
    upper.push(p);
  }
  return lower.slice(0, -1).concat(upper.slice(0, -1));
}

function legend(chosenK: number, models: ModelRef[]): HTMLElement {
  const box = document.createElement("div");
  box.className = "legend";
  for (let c = 0; c < chosenK; c++) {
    const entry = document.createElement("span");
    entry.className = "legend-cluster";
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.backgroundColor = CLUSTER_COLORS[c % CLUSTER_COLORS.length] as string;
    entry.appendChild(swatch);
    entry.appendChild(document.createTextNode(`cluster ${c}`));
    box.appendChild(entry);
  }
  models.forEach((model, index) => {
    const entry = document.createElement("span");
    entry.className = "legend-model";
    entry.textContent = `${MARKERS[index % MARKERS.length]} = ${model.model_id}`;
    box.appendChild(entry);
  });
  return box;
}
