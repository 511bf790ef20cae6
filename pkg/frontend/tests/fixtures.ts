import type { ConsensusPayload, GraphPayload, Report, WhatIfResponse } from "../src/types";

/** Desk-scale audit fixture: 12 modules in the shape of the module
 * summary table the reporting layer emits. */
const ROWS: [number, number, number, number, number, number, number][] = [
  // id, size, avg_degree, ri, bei, mean_abs_psi, ablation_drop
  [0, 11, 0.558, 0.214, 0.061, 0.014, 0.001],
  [1, 6, 10.711, 0.372, 1.021, 1.247, 0.018],
  [2, 9, 7.183, 0.298, 0.284, 0.603, 0.006],
  [3, 5, 10.806, 0.341, 2.127, 0.109, 0.026],
  [4, 6, 0.959, 0.186, 0.117, 0.358, 0.002],
  [5, 3, 0.978, 0.152, 0.131, 0.101, 0.001],
  [6, 7, 1.872, 0.205, 0.173, 0.029, 0.001],
  [7, 4, 0.211, 0.044, 0.017, 0.006, 0.0],
  [8, 4, 0.667, 0.233, 0.471, 0.051, 0.004],
  [9, 3, 0.297, 0.121, 0.053, 0.011, 0.0],
  [10, 3, 0.105, 0.037, 0.009, 0.003, 0.0],
  [11, 43, 0.184, 0.061, 0.012, 0.008, 0.0],
];

let featureCounter = 0;

export const REPORT_FIXTURE: Report = {
  modules: ROWS.map(([id, size, avgDegree, ri, bei, meanAbsPsi, drop]) => ({
    id,
    size,
    features: Array.from({ length: size }, () => `x${featureCounter++}`),
    avg_degree: avgDegree,
    ri,
    bei,
    bei_ci: [Math.max(bei - 0.05, 0), bei + 0.05] as [number, number],
    mean_abs_psi: meanAbsPsi,
    ablation_drop: drop,
  })),
  global: {
    Q: 0.46,
    mean_conductance: 0.22,
    msi: 0.91,
    msi_ci: [0.88, 0.95],
    dp_gap: 0.092,
    eo_tpr_gap: 0.041,
    eo_fpr_gap: 0.018,
  },
  sankey: { feature_to_module: [], module_to_output: [] },
  heatmap_order: [],
  consensus_path: "consensus.moiwd",
};

/** BEI-descending order implied by the fixture values. */
export const EXPECTED_BEI_ORDER = [3, 1, 8, 2, 6, 5, 4, 0, 9, 7, 11, 10];

export const GRAPH_FIXTURE: GraphPayload = {
  nodes: [
    { id: 0, name: "a0", module: 0, strength: 2.0 },
    { id: 1, name: "a1", module: 0, strength: 2.0 },
    { id: 2, name: "a2", module: 0, strength: 1.8 },
    { id: 3, name: "b0", module: 1, strength: 2.1 },
    { id: 4, name: "b1", module: 1, strength: 2.2 },
    { id: 5, name: "b2", module: 1, strength: 1.9 },
  ],
  edges: [
    { source: 0, target: 1, weight: 1.0 },
    { source: 0, target: 2, weight: 0.9 },
    { source: 1, target: 2, weight: 0.8 },
    { source: 3, target: 4, weight: 1.0 },
    { source: 3, target: 5, weight: 0.7 },
    { source: 4, target: 5, weight: 0.9 },
    { source: 2, target: 3, weight: -0.4 },
  ],
};

export const CONSENSUS_FIXTURE: ConsensusPayload = {
  d: 4,
  values: [
    [1.0, 0.9, 0.1, 0.0],
    [0.9, 1.0, 0.2, 0.1],
    [0.1, 0.2, 1.0, 0.8],
    [0.0, 0.1, 0.8, 1.0],
  ],
};

export function whatIfResponse(moduleId: number, delta: number): WhatIfResponse {
  const factor = 1 - 0.9 * (1 - delta);
  return {
    module_id: moduleId,
    delta,
    dp_gap_before: 0.092,
    dp_gap_after: 0.092 * factor,
    metric: "r2",
    metric_before: 0.91,
    metric_after: 0.91 - 0.015 * (1 - delta),
    per_module_psi_shift: ROWS.map(() => 0),
  };
}
