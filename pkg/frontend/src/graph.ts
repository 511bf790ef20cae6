import type { GraphPayload } from "./types";

const PALETTE = [
  "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2",
  "#ff9da6", "#9d755d", "#bab0ac", "#d4a017", "#3b7c70", "#8455c4",
];

export function moduleColor(module: number | null): string {
  if (module === null) return "#999999";
  return PALETTE[module % PALETTE.length];
}

interface LayoutNode {
  x: number;
  y: number;
  vx: number;
  vy: number;
}

/**
 * Small deterministic force layout: spring forces along edges,
 * inverse-square repulsion between nodes, mild centering. Enough for
 * desk-scale graphs without pulling in a rendering library.
 */
export function forceLayout(payload: GraphPayload, width: number, height: number, iterations = 150): LayoutNode[] {
  const n = payload.nodes.length;
  const nodes: LayoutNode[] = [];
  for (let i = 0; i < n; i++) {
    // deterministic ring start
    const angle = (2 * Math.PI * i) / Math.max(n, 1);
    nodes.push({
      x: width / 2 + (width / 3) * Math.cos(angle),
      y: height / 2 + (height / 3) * Math.sin(angle),
      vx: 0,
      vy: 0,
    });
  }
  const springLength = Math.min(width, height) / 6;
  for (let step = 0; step < iterations; step++) {
    const cool = 1 - step / iterations;
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        const dx = nodes[j].x - nodes[i].x;
        const dy = nodes[j].y - nodes[i].y;
        const dist2 = Math.max(dx * dx + dy * dy, 1);
        const force = 800 / dist2;
        const dist = Math.sqrt(dist2);
        nodes[i].vx -= (force * dx) / dist;
        nodes[i].vy -= (force * dy) / dist;
        nodes[j].vx += (force * dx) / dist;
        nodes[j].vy += (force * dy) / dist;
      }
    }
    for (const edge of payload.edges) {
      const a = nodes[edge.source];
      const b = nodes[edge.target];
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const pull = 0.02 * Math.abs(edge.weight) * (dist - springLength);
      a.vx += (pull * dx) / dist;
      a.vy += (pull * dy) / dist;
      b.vx -= (pull * dx) / dist;
      b.vy -= (pull * dy) / dist;
    }
    for (const node of nodes) {
      node.vx += 0.01 * (width / 2 - node.x);
      node.vy += 0.01 * (height / 2 - node.y);
      node.x += node.vx * cool;
      node.y += node.vy * cool;
      node.vx *= 0.6;
      node.vy *= 0.6;
      node.x = Math.min(Math.max(node.x, 10), width - 10);
      node.y = Math.min(Math.max(node.y, 10), height - 10);
    }
  }
  return nodes;
}

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GraphViewOptions {
  width?: number;
  height?: number;
  onNodeClick?: (moduleId: number | null) => void;
}

export function renderModuleGraph(root: HTMLElement, payload: GraphPayload, options: GraphViewOptions = {}): void {
  const width = options.width ?? 640;
  const height = options.height ?? 480;
  root.innerHTML = "";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "module-graph");
  const positions = forceLayout(payload, width, height);
  const maxWeight = Math.max(...payload.edges.map((e) => Math.abs(e.weight)), 1e-12);
  for (const edge of payload.edges) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", positions[edge.source].x.toFixed(1));
    line.setAttribute("y1", positions[edge.source].y.toFixed(1));
    line.setAttribute("x2", positions[edge.target].x.toFixed(1));
    line.setAttribute("y2", positions[edge.target].y.toFixed(1));
    line.setAttribute("stroke", "#5b5b5b");
    line.setAttribute("stroke-width", (0.5 + (2.5 * Math.abs(edge.weight)) / maxWeight).toFixed(2));
    if (edge.weight < 0) {
      // negative ties render dashed
      line.setAttribute("stroke-dasharray", "4 3");
    }
    line.setAttribute("data-weight", String(edge.weight));
    svg.appendChild(line);
  }
  const maxStrength = Math.max(...payload.nodes.map((n) => n.strength), 1e-12);
  for (const node of payload.nodes) {
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", positions[node.id].x.toFixed(1));
    circle.setAttribute("cy", positions[node.id].y.toFixed(1));
    circle.setAttribute("r", (4 + (5 * node.strength) / maxStrength).toFixed(2));
    circle.setAttribute("fill", moduleColor(node.module));
    circle.setAttribute("data-module", node.module === null ? "" : String(node.module));
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${node.name} (module ${node.module ?? "?"})`;
    circle.appendChild(title);
    circle.addEventListener("click", () => options.onNodeClick?.(node.module));
    svg.appendChild(circle);
  }
  root.appendChild(svg);
}
