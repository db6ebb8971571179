// Session-aware client for the engine service.
//
// Every response carries X-Session (echoed back on subsequent calls) and
// X-Mutation-Counter. The client tracks the highest counter acknowledged and
// discards any response older than it, so out-of-order replies can never roll
// the UI back to stale state.

import type {
  AteSeries,
  BalanceReport,
  Classification,
  DagDocument,
  DatasetSummary,
  EffectRecord,
  FitResponse,
  HistogramData,
  IcicleLeaf,
  MatchResultDoc,
  Selection,
  SubgroupTable,
  VersionsDoc,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export class StaleResponseError extends Error {
  constructor() {
    super("response superseded by a newer mutation");
  }
}

export class ApiClient {
  sessionId: string | null = null;
  lastMutationCounter = 0;
  pendingRequests = 0;

  constructor(private baseUrl: string = "/api") {}

  private async request<T>(method: string, path: string, body?: BodyInit, contentType?: string): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.sessionId) headers["X-Session"] = this.sessionId;
    if (contentType) headers["Content-Type"] = contentType;
    this.pendingRequests += 1;
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, { method, headers, body });
    } finally {
      this.pendingRequests -= 1;
    }

    const session = response.headers.get("X-Session");
    if (session) this.sessionId = session;

    if (!response.ok) {
      let code = "error";
      let detail = response.statusText;
      try {
        const payload = await response.json();
        code = payload.error ?? code;
        detail = payload.detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, code, detail);
    }

    const counterHeader = response.headers.get("X-Mutation-Counter");
    if (counterHeader !== null) {
      const counter = Number(counterHeader);
      if (counter < this.lastMutationCounter) throw new StaleResponseError();
      this.lastMutationCounter = counter;
    }
    return (await response.json()) as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>("GET", path);
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>("POST", path, JSON.stringify(body), "application/json");
  }

  // --- datasets -----------------------------------------------------------

  uploadCsv(csv: string): Promise<DatasetSummary> {
    return this.request<DatasetSummary>("POST", "/datasets", csv, "text/csv");
  }

  datasetSummary(): Promise<DatasetSummary> {
    return this.get("/datasets/summary");
  }

  // --- DAG ------------------------------------------------------------------

  getDag(): Promise<DagDocument> {
    return this.get("/dag");
  }

  putDag(doc: DagDocument): Promise<DagDocument> {
    return this.request<DagDocument>("PUT", "/dag", JSON.stringify(doc), "application/json");
  }

  addNode(name: string, x?: number, y?: number): Promise<DagDocument> {
    return this.post("/dag/nodes", { name, x, y });
  }

  deleteNode(name: string): Promise<DagDocument> {
    return this.request<DagDocument>("DELETE", `/dag/nodes/${encodeURIComponent(name)}`);
  }

  moveNode(name: string, x: number, y: number): Promise<DagDocument> {
    return this.post(`/dag/nodes/${encodeURIComponent(name)}/position`, { x, y });
  }

  addEdge(source: string, target: string): Promise<DagDocument> {
    return this.post("/dag/edges", { source, target });
  }

  deleteEdge(source: string, target: string): Promise<DagDocument> {
    return this.request<DagDocument>(
      "DELETE",
      "/dag/edges",
      JSON.stringify({ source, target }),
      "application/json",
    );
  }

  setTreatment(node: string): Promise<DagDocument> {
    return this.post("/dag/treatment", { node });
  }

  setOutcome(node: string): Promise<DagDocument> {
    return this.post("/dag/outcome", { node });
  }

  classification(): Promise<Classification> {
    return this.get("/dag/classification");
  }

  // --- propensity -------------------------------------------------------------

  fitPropensity(covariates: string[], treatment: string, stabilized = false): Promise<FitResponse> {
    return this.post("/propensity/fit", { covariates, treatment, stabilized });
  }

  histogram(bins = 20): Promise<HistogramData> {
    return this.get(`/propensity/histogram?bins=${bins}`);
  }

  select(lo: number, hi: number): Promise<Selection> {
    return this.post("/propensity/select", { range: [lo, hi] });
  }

  // --- balance / match / effects ------------------------------------------------

  balance(covariates: string[], treatment: string, options: { adjust?: string; details?: boolean; show?: string[] } = {}): Promise<BalanceReport> {
    return this.post("/balance", { covariates, treatment, ...options });
  }

  match(body: Record<string, unknown>): Promise<MatchResultDoc> {
    return this.post("/match", body);
  }

  effectsMatched(outcome: string, seed = 42): Promise<EffectRecord> {
    return this.post("/effects/matched", { outcome, seed });
  }

  effectsIpw(outcome: string, treatment: string, seed = 42): Promise<EffectRecord> {
    return this.post("/effects/ipw", { outcome, treatment, seed });
  }

  facet(outcome: string, variables: string[], thresholds: Record<string, number> = {}): Promise<SubgroupTable> {
    return this.post("/effects/facet", { outcome, variables, thresholds });
  }

  // --- provenance -------------------------------------------------------------------

  addVersion(ate: number, extras: Record<string, unknown> = {}): Promise<VersionsDoc> {
    return this.post("/versions", { ate, ...extras });
  }

  icicle(): Promise<IcicleLeaf> {
    return this.get("/versions/icicle");
  }

  ateSeries(): Promise<AteSeries> {
    return this.get("/versions/ates");
  }

  restoreVersion(label: string): Promise<DagDocument> {
    return this.post("/versions/restore", { label });
  }

  exportVersions(): Promise<VersionsDoc> {
    return this.get("/export/versions.json");
  }
}
