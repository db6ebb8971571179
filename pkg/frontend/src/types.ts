// Payload shapes mirroring the engine's JSON schemas. The UI never computes
// statistics; every number rendered comes from one of these payloads.

export interface DagNode {
  name: string;
  x?: number;
  y?: number;
}

export interface DagLink {
  source: string;
  target: string;
}

export interface DagDocument {
  nodes: DagNode[];
  links: DagLink[];
  treatment: string | null;
  outcome: string | null;
}

export type NodeClass =
  | "treatment"
  | "outcome"
  | "confounder"
  | "mediator"
  | "collider"
  | "prognostic"
  | "unclassified";

export interface Classification {
  classes: Record<string, NodeClass>;
  confounders: string[];
  colliders: string[];
  mediators: string[];
  prognostics: string[];
}

export interface DatasetSummary {
  columns: { name: string; kind: "binary" | "continuous" | "categorical"; n_missing: number }[];
  n_rows: number;
}

export interface FitResponse {
  model: {
    covariates: string[];
    intercept: number;
    coefficients: number[];
    lambda: number;
    converged: boolean;
    n_iterations: number;
  };
  row_ids: number[];
  scores: number[];
}

export interface HistogramData {
  bin_edges: number[];
  treated: number[];
  control: number[];
}

export interface Selection {
  selection: number[];
  inverse: number[];
}

export interface BalanceRow {
  name: string;
  unadjusted: number | null;
  adjusted: number | null;
  flagged: boolean;
}

export interface CovariateDetail {
  covariate: string;
  bin_edges: number[];
  unadjusted: { treated: number[]; control: number[]; mean_treated: number; mean_control: number };
  adjusted: { treated: number[]; control: number[]; mean_treated: number; mean_control: number };
  flagged: boolean;
}

export interface BalanceReport {
  mode: string;
  covariates: BalanceRow[];
  n_treated: number;
  n_control: number;
  ess_treated: number;
  ess_control: number;
  details?: CovariateDetail[];
}

export interface MatchResultDoc {
  pairs: [number, number, number][];
  unmatched_treated: number[];
  unmatched_control: number[];
  spec: Record<string, unknown>;
}

export interface EffectRecord {
  method: "matched" | "ipw";
  ate: number;
  ci: [number, number];
  ites?: number[];
}

export interface SubgroupCell {
  key: [string, string][];
  n: number;
  mean: number | null;
  median: number | null;
  q1: number | null;
  q3: number | null;
  whisker_low: number | null;
  whisker_high: number | null;
  density: number[];
}

export interface SubgroupTable {
  cells: SubgroupCell[];
  grid: number[];
  sign_flip_overall: boolean;
  n: number;
}

export interface IcicleLeaf {
  name: string;
  width: number;
  ate?: number;
  n?: number;
  children?: IcicleLeaf[];
}

export interface AteSeries {
  ates: { label: string; ate: number }[];
}

export interface VersionsDoc {
  dags: {
    hash: string;
    label: string;
    dag: DagDocument;
    cohorts: { fingerprint: string; label: string; row_ids: number[]; n: number; ate: number }[];
  }[];
}
