import type { ConsensusPayload } from "./types";

/** Consensus co-assignment heatmap on a canvas; order optionally reordered
 * by the report's heatmap order so stable modules show as dark blocks. */
export function renderConsensus(root: HTMLElement, payload: ConsensusPayload, order?: number[]): void {
  root.innerHTML = "";
  const d = payload.d;
  if (d === 0) return;
  const index = order && order.length === d ? order : [...Array(d).keys()];
  const cell = Math.max(2, Math.floor(320 / d));
  const canvas = document.createElement("canvas");
  canvas.width = canvas.height = cell * d;
  canvas.className = "consensus-heatmap";
  root.appendChild(canvas);
  let ctx: CanvasRenderingContext2D | null = null;
  try {
    ctx = canvas.getContext("2d");
  } catch {
    ctx = null; // no 2d backend (headless test environment)
  }
  if (!ctx) return;
  for (let r = 0; r < d; r++) {
    for (let c = 0; c < d; c++) {
      const value = payload.values[index[r]][index[c]];
      const shade = Math.round(255 - 215 * Math.min(Math.max(value, 0), 1));
      ctx.fillStyle = `rgb(${shade},${shade},255)`;
      ctx.fillRect(c * cell, r * cell, cell, cell);
    }
  }
}
