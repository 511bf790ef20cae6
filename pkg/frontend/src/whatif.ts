import { ApiError, WhatIfClient } from "./api";
import type { Report, WhatIfResponse } from "./types";

export interface WhatIfHistoryEntry {
  moduleId: number;
  delta: number;
  dpBefore: number;
  dpAfter: number;
  metricBefore: number | null;
  metricAfter: number | null;
}

export class WhatIfPanel {
  readonly history: WhatIfHistoryEntry[] = [];
  private select: HTMLSelectElement;
  private slider: HTMLInputElement;
  private deltaLabel: HTMLSpanElement;
  private results: HTMLElement;
  private status: HTMLElement;

  constructor(root: HTMLElement, report: Report, private client: WhatIfClient) {
    root.innerHTML = "";
    const controls = document.createElement("div");
    controls.className = "whatif-controls";

    this.select = document.createElement("select");
    this.select.className = "whatif-module";
    for (const record of report.modules) {
      const option = document.createElement("option");
      option.value = String(record.id);
      option.textContent = `M${record.id}`;
      this.select.appendChild(option);
    }

    this.slider = document.createElement("input");
    this.slider.type = "range";
    this.slider.min = "0";
    this.slider.max = "1";
    this.slider.step = "0.05";
    this.slider.value = "1";
    this.slider.className = "whatif-delta";

    this.deltaLabel = document.createElement("span");
    this.deltaLabel.className = "whatif-delta-label";
    this.deltaLabel.textContent = "delta = 1.00";

    controls.append(this.select, this.slider, this.deltaLabel);

    this.results = document.createElement("div");
    this.results.className = "whatif-results";
    this.status = document.createElement("p");
    this.status.className = "whatif-status";

    root.append(controls, this.status, this.results);

    const trigger = () => this.requestCurrent();
    this.slider.addEventListener("input", trigger);
    this.select.addEventListener("change", trigger);
  }

  selectModule(moduleId: number): void {
    this.select.value = String(moduleId);
  }

  requestCurrent(): void {
    const moduleId = Number(this.select.value);
    const delta = Number(this.slider.value);
    this.deltaLabel.textContent = `delta = ${delta.toFixed(2)}`;
    this.status.textContent = "computing...";
    this.client.request(
      moduleId,
      delta,
      (result) => this.renderResult(result),
      (err) => {
        this.status.textContent =
          err instanceof ApiError && err.status === 409
            ? "what-if unavailable: this run was scored by an external model (two-pass files only)"
            : `request failed: ${String(err)}`;
      },
    );
  }

  renderResult(result: WhatIfResponse): void {
    this.status.textContent = "";
    this.history.push({
      moduleId: result.module_id,
      delta: result.delta,
      dpBefore: result.dp_gap_before,
      dpAfter: result.dp_gap_after,
      metricBefore: result.metric_before,
      metricAfter: result.metric_after,
    });
    this.results.innerHTML = "";
    this.results.appendChild(
      comparisonBars("disparity (dp gap)", result.dp_gap_before, result.dp_gap_after, "dp"),
    );
    if (result.metric_before !== null && result.metric_after !== null) {
      this.results.appendChild(
        comparisonBars(`performance (${result.metric})`, result.metric_before, result.metric_after, "metric"),
      );
    }
    const annotation = document.createElement("p");
    annotation.className = "whatif-annotation";
    const dpDelta = result.dp_gap_after - result.dp_gap_before;
    const metricDelta =
      result.metric_before !== null && result.metric_after !== null
        ? result.metric_after - result.metric_before
        : null;
    annotation.textContent =
      `M${result.module_id} @ delta ${result.delta.toFixed(2)}: ` +
      `dp ${fmtDelta(dpDelta)}` +
      (metricDelta !== null ? `, metric ${fmtDelta(metricDelta)}` : "");
    this.results.appendChild(annotation);
    this.results.appendChild(this.renderHistory());
  }

  private renderHistory(): HTMLElement {
    const list = document.createElement("ul");
    list.className = "whatif-history";
    for (const entry of [...this.history].reverse().slice(0, 8)) {
      const item = document.createElement("li");
      item.textContent =
        `M${entry.moduleId} d=${entry.delta.toFixed(2)} ` +
        `dp ${entry.dpBefore.toFixed(4)} -> ${entry.dpAfter.toFixed(4)}`;
      list.appendChild(item);
    }
    return list;
  }
}

function fmtDelta(value: number): string {
  const sign = value >= 0 ? "+" : "";
  return `${sign}${value.toFixed(4)}`;
}

function comparisonBars(label: string, before: number, after: number, kind: string): HTMLElement {
  const box = document.createElement("div");
  box.className = `compare compare-${kind}`;
  const caption = document.createElement("span");
  caption.className = "compare-label";
  caption.textContent = label;
  box.appendChild(caption);
  const scale = Math.max(Math.abs(before), Math.abs(after), 1e-9);
  for (const [name, value] of [
    ["before", before],
    ["after", after],
  ] as const) {
    const row = document.createElement("div");
    row.className = `compare-row compare-${name}`;
    const bar = document.createElement("span");
    bar.className = "compare-bar";
    bar.style.width = `${(100 * Math.abs(value)) / scale}%`;
    const text = document.createElement("span");
    text.className = "compare-value";
    text.textContent = `${name}: ${value.toFixed(4)}`;
    row.append(bar, text);
    box.appendChild(row);
  }
  return box;
}
