/** Payload shapes of the serve API; mirrors report.json and friends. */

export interface ModuleRecord {
  id: number;
  size: number;
  features: string[];
  avg_degree: number;
  ri: number;
  bei: number | null;
  bei_ci: [number, number] | null;
  mean_abs_psi: number;
  ablation_drop: number | null;
}

export interface GlobalMetrics {
  Q: number | null;
  mean_conductance: number | null;
  msi: number | null;
  msi_ci: [number, number] | null;
  dp_gap: number | null;
  eo_tpr_gap: number | null;
  eo_fpr_gap: number | null;
}

export interface Report {
  modules: ModuleRecord[];
  global: GlobalMetrics;
  sankey: {
    feature_to_module: { feature: string; module: number; flow: number }[];
    module_to_output: { module: number; flow: number }[];
  };
  heatmap_order: number[];
  consensus_path: string | null;
}

export interface GraphNode {
  id: number;
  name: string;
  module: number | null;
  strength: number;
}

export interface GraphEdge {
  source: number;
  target: number;
  weight: number;
}

export interface GraphPayload {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface ConsensusPayload {
  d: number;
  values: number[][];
}

export interface WhatIfRequest {
  module_id: number;
  delta: number;
}

export interface WhatIfResponse {
  module_id: number;
  delta: number;
  dp_gap_before: number;
  dp_gap_after: number;
  metric: string;
  metric_before: number | null;
  metric_after: number | null;
  per_module_psi_shift: number[] | null;
}
