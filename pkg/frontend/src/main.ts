import { ApiError, WhatIfClient, fetchConsensus, fetchGraph, fetchReport } from "./api";
import { renderModuleGraph } from "./graph";
import { renderConsensus } from "./heatmap";
import { renderBeiRanking } from "./ranking";
import { WhatIfPanel } from "./whatif";
import type { Report } from "./types";

function section(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing section #${id}`);
  return el;
}

function showError(el: HTMLElement, err: unknown, retry: () => void): void {
  el.innerHTML = "";
  const banner = document.createElement("div");
  banner.className = "error-banner";
  const message = document.createElement("span");
  message.textContent = err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
  const button = document.createElement("button");
  button.textContent = "retry";
  button.addEventListener("click", retry);
  banner.append(message, button);
  el.appendChild(banner);
}

function renderGlobal(el: HTMLElement, report: Report): void {
  el.innerHTML = "";
  const dl = document.createElement("dl");
  dl.className = "global-metrics";
  const rows: [string, number | null][] = [
    ["modularity Q", report.global.Q],
    ["mean conductance", report.global.mean_conductance],
    ["stability (MSI)", report.global.msi],
    ["dp gap", report.global.dp_gap],
    ["EO gap (TPR)", report.global.eo_tpr_gap],
    ["EO gap (FPR)", report.global.eo_fpr_gap],
  ];
  for (const [label, value] of rows) {
    const dt = document.createElement("dt");
    dt.textContent = label;
    const dd = document.createElement("dd");
    dd.textContent = value === null ? "n/a" : value.toFixed(4);
    dl.append(dt, dd);
  }
  el.appendChild(dl);
}

async function loadReportPanels(whatIfClient: WhatIfClient): Promise<Report | null> {
  const rankingEl = section("bei-ranking");
  try {
    const report = await fetchReport();
    renderGlobal(section("global-metrics"), report);
    const panel = new WhatIfPanel(section("whatif"), report, whatIfClient);
    renderBeiRanking(rankingEl, report, {
      onSelect: (moduleId) => panel.selectModule(moduleId),
    });
    return report;
  } catch (err) {
    showError(rankingEl, err, () => void loadReportPanels(whatIfClient));
    return null;
  }
}

async function loadGraph(): Promise<void> {
  const el = section("module-graph");
  try {
    renderModuleGraph(el, await fetchGraph());
  } catch (err) {
    showError(el, err, () => void loadGraph());
  }
}

async function loadConsensus(report: Report | null): Promise<void> {
  const el = section("consensus");
  try {
    renderConsensus(el, await fetchConsensus(), report?.heatmap_order);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      el.textContent = "no consensus matrix in this run (use metrics --msi or select)";
      return;
    }
    showError(el, err, () => void loadConsensus(report));
  }
}

export async function boot(): Promise<void> {
  const client = new WhatIfClient();
  const report = await loadReportPanels(client);
  await Promise.all([loadGraph(), loadConsensus(report)]);
}

if (typeof document !== "undefined" && document.getElementById("bei-ranking")) {
  void boot();
}
