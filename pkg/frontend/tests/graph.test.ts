import { beforeEach, describe, expect, it } from "vitest";

import { forceLayout, moduleColor, renderModuleGraph } from "../src/graph";
import { renderConsensus } from "../src/heatmap";
import { CONSENSUS_FIXTURE, GRAPH_FIXTURE } from "./fixtures";

describe("module graph view", () => {
  beforeEach(() => {
    document.body.innerHTML = '<div id="g"></div>';
  });

  it("renders one circle per node colored by module", () => {
    const el = document.getElementById("g")!;
    renderModuleGraph(el, GRAPH_FIXTURE);
    const circles = [...el.querySelectorAll("circle")];
    expect(circles.length).toBe(6);
    const colors = new Set(circles.map((c) => c.getAttribute("fill")));
    expect(colors.size).toBe(2); // two planted modules, two colors
    expect(moduleColor(0)).not.toBe(moduleColor(1));
  });

  it("renders negative edges dashed and widths proportional to |w|", () => {
    const el = document.getElementById("g")!;
    renderModuleGraph(el, GRAPH_FIXTURE);
    const lines = [...el.querySelectorAll("line")];
    expect(lines.length).toBe(GRAPH_FIXTURE.edges.length);
    const dashed = lines.filter((l) => l.getAttribute("stroke-dasharray"));
    expect(dashed.length).toBe(1);
    expect(Number(dashed[0].getAttribute("data-weight"))).toBeLessThan(0);
    const widths = lines.map((l) => Number(l.getAttribute("stroke-width")));
    const strongest = widths[GRAPH_FIXTURE.edges.findIndex((e) => Math.abs(e.weight) === 1.0)];
    const weakest = widths[GRAPH_FIXTURE.edges.findIndex((e) => Math.abs(e.weight) === 0.4)];
    expect(strongest).toBeGreaterThan(weakest);
  });

  it("node clicks surface the module id", () => {
    const el = document.getElementById("g")!;
    let clicked: number | null | undefined;
    renderModuleGraph(el, GRAPH_FIXTURE, { onNodeClick: (m) => (clicked = m) });
    (el.querySelector("circle") as SVGCircleElement).dispatchEvent(new MouseEvent("click"));
    expect(clicked).toBe(0);
  });

  it("layout keeps nodes inside the viewport and is deterministic", () => {
    const a = forceLayout(GRAPH_FIXTURE, 640, 480);
    const b = forceLayout(GRAPH_FIXTURE, 640, 480);
    expect(a).toEqual(b);
    for (const node of a) {
      expect(node.x).toBeGreaterThanOrEqual(0);
      expect(node.x).toBeLessThanOrEqual(640);
      expect(node.y).toBeGreaterThanOrEqual(0);
      expect(node.y).toBeLessThanOrEqual(480);
    }
  });

  it("layout pulls module mates closer than cross-module pairs", () => {
    const positions = forceLayout(GRAPH_FIXTURE, 640, 480);
    const dist = (i: number, j: number) =>
      Math.hypot(positions[i].x - positions[j].x, positions[i].y - positions[j].y);
    const within = (dist(0, 1) + dist(0, 2) + dist(3, 4) + dist(3, 5)) / 4;
    const across = (dist(0, 4) + dist(1, 5) + dist(2, 3)) / 3;
    expect(within).toBeLessThan(across);
  });
});

describe("consensus heatmap", () => {
  beforeEach(() => {
    document.body.innerHTML = '<div id="c"></div>';
  });

  it("creates a square canvas sized to the matrix", () => {
    const el = document.getElementById("c")!;
    renderConsensus(el, CONSENSUS_FIXTURE);
    const canvas = el.querySelector("canvas")!;
    expect(canvas.width).toBe(canvas.height);
    expect(canvas.width % CONSENSUS_FIXTURE.d).toBe(0);
  });

  it("honors a reordering of the features", () => {
    const el = document.getElementById("c")!;
    renderConsensus(el, CONSENSUS_FIXTURE, [3, 2, 1, 0]);
    expect(el.querySelector("canvas")).not.toBeNull();
  });
});
