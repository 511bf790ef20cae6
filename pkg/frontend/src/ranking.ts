import type { ModuleRecord, Report } from "./types";

export interface RankingCallbacks {
  onSelect?: (moduleId: number) => void;
}

/** Modules sorted by bias exposure descending; ties keep id order. */
export function rankModules(modules: ModuleRecord[]): ModuleRecord[] {
  return [...modules].sort((a, b) => {
    const beiA = a.bei ?? -Infinity;
    const beiB = b.bei ?? -Infinity;
    if (beiA !== beiB) return beiB - beiA;
    return a.id - b.id;
  });
}

export function renderBeiRanking(root: HTMLElement, report: Report, callbacks: RankingCallbacks = {}): void {
  root.innerHTML = "";
  const ranked = rankModules(report.modules);
  if (ranked.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "no modules in report";
    root.appendChild(empty);
    return;
  }
  const haveBei = ranked.some((m) => m.bei !== null);
  if (!haveBei) {
    const note = document.createElement("p");
    note.className = "empty-state";
    note.textContent = "bias exposure unavailable (no group labels in this run)";
    root.appendChild(note);
  }
  const maxBei = Math.max(...ranked.map((m) => m.bei_ci?.[1] ?? m.bei ?? 0), 1e-9);
  const list = document.createElement("ol");
  list.className = "bei-ranking";
  for (const record of ranked) {
    const item = document.createElement("li");
    item.dataset.moduleId = String(record.id);
    item.className = "bei-row";

    const label = document.createElement("span");
    label.className = "bei-label";
    label.textContent = `M${record.id} (${record.size})`;

    const barBox = document.createElement("span");
    barBox.className = "bei-bar-box";
    const bar = document.createElement("span");
    bar.className = "bei-bar";
    const bei = record.bei ?? 0;
    bar.style.width = `${(100 * bei) / maxBei}%`;
    barBox.appendChild(bar);
    if (record.bei_ci) {
      const whisker = document.createElement("span");
      whisker.className = "bei-ci";
      whisker.style.left = `${(100 * record.bei_ci[0]) / maxBei}%`;
      whisker.style.width = `${(100 * (record.bei_ci[1] - record.bei_ci[0])) / maxBei}%`;
      barBox.appendChild(whisker);
    }

    const value = document.createElement("span");
    value.className = "bei-value";
    value.textContent = record.bei === null ? "n/a" : record.bei.toFixed(3);

    const features = document.createElement("ul");
    features.className = "module-features hidden";
    for (const name of record.features) {
      const li = document.createElement("li");
      li.textContent = name;
      features.appendChild(li);
    }

    item.append(label, barBox, value, features);
    item.addEventListener("click", () => {
      features.classList.toggle("hidden");
      for (const other of list.querySelectorAll(".selected")) {
        other.classList.remove("selected");
      }
      item.classList.add("selected");
      callbacks.onSelect?.(record.id);
    });
    list.appendChild(item);
  }
  root.appendChild(list);
}
