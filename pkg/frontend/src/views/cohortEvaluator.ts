// Cohort diagnostics: mirrored propensity-score histograms (control above,
// treated below) with a selection brush, the aSMD dot plot with its 0.1
// threshold rule, and per-covariate distribution details.

import * as d3 from "d3";
import { ApiClient } from "../api";
import { triggerDownload } from "./dagEditor";
import type { BalanceReport, CovariateDetail, HistogramData, Selection } from "../types";

const HIST_WIDTH = 420;
const HIST_HEIGHT = 260;
const LOVE_WIDTH = 420;
const ROW_HEIGHT = 22;
const MARGIN = { top: 16, right: 20, bottom: 28, left: 150 };

export class CohortEvaluator {
  histogram: HistogramData | null = null;
  report: BalanceReport | null = null;
  selection: Selection | null = null;
  sortDescending = true;
  shown: string[] | null = null; // null = default (flagged covariates)

  private histSvg!: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private loveSvg!: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private badge!: d3.Selection<HTMLSpanElement, unknown, null, undefined>;
  private detailsHost!: d3.Selection<HTMLDivElement, unknown, null, undefined>;
  private brushGroup!: d3.Selection<SVGGElement, unknown, null, undefined>;
  private xScale = d3.scaleLinear().domain([0, 1]);

  constructor(
    private api: ApiClient,
    private container: HTMLElement,
    private options: { covariates: string[]; treatment: string },
  ) {
    this.build();
  }

  private build(): void {
    const root = d3.select(this.container).classed("cohort-evaluator", true);
    const left = root.append("div").attr("class", "propensity-panel");
    left.append("h3").text("Propensity score distribution");
    this.histSvg = left
      .append("svg")
      .attr("width", HIST_WIDTH)
      .attr("height", HIST_HEIGHT)
      .attr("viewBox", `0 0 ${HIST_WIDTH} ${HIST_HEIGHT}`);
    const controls = left.append("div").attr("class", "selection-controls");
    this.badge = controls.append("span").attr("class", "selection-count").text("no selection");
    controls
      .append("button")
      .attr("class", "download-selection")
      .text("Download")
      .on("click", () => this.downloadSelection());

    const right = root.append("div").attr("class", "balance-panel");
    const header = right.append("div").attr("class", "balance-header");
    header.append("h3").text("Covariate balance (aSMD)");
    header
      .append("button")
      .attr("class", "sort-button")
      .text("Sort")
      .on("click", () => {
        this.sortDescending = !this.sortDescending;
        this.renderLovePlot();
      });
    header
      .append("button")
      .attr("class", "show-hide-button")
      .text("Show/Hide covariates")
      .on("click", () => this.openShowHide());
    this.loveSvg = right.append("svg").attr("class", "love-plot");
    this.detailsHost = right.append("div").attr("class", "details-panel");
  }

  async load(): Promise<void> {
    this.histogram = await this.api.histogram();
    this.report = await this.api.balance(this.options.covariates, this.options.treatment, {
      details: true,
      ...(this.shown ? { show: this.shown } : {}),
    });
    this.renderHistogram();
    this.renderLovePlot();
    this.renderDetails();
  }

  // Exactly what the d3 brush handler invokes on brush end.
  async brushRange(lo: number, hi: number): Promise<Selection> {
    this.selection = await this.api.select(lo, hi);
    this.badge.text(`${this.selection.selection.length} samples selected`);
    return this.selection;
  }

  selectionCount(): number | null {
    const text = this.badge.text();
    const match = /^(\d+) samples selected$/.exec(text);
    return match ? Number(match[1]) : null;
  }

  private downloadSelection(): void {
    if (!this.selection) return;
    const blob = new Blob([JSON.stringify(this.selection, null, 2)], { type: "application/json" });
    triggerDownload(blob, "selection.json");
  }

  private renderHistogram(): void {
    if (!this.histogram) return;
    const { bin_edges, treated, control } = this.histogram;
    const svg = this.histSvg;
    svg.selectAll("*").remove();

    const x = this.xScale.range([MARGIN.right, HIST_WIDTH - MARGIN.right]);
    const mid = HIST_HEIGHT / 2;
    const peak = Math.max(1, ...treated, ...control);
    const half = mid - MARGIN.top;
    const yUp = d3.scaleLinear().domain([0, peak]).range([0, half]);

    const bins = control.map((c, i) => ({ i, control: c, treated: treated[i] }));
    const bandWidth = (i: number) => x(bin_edges[i + 1]) - x(bin_edges[i]);

    // control above the axis
    svg
      .append("g")
      .attr("class", "control-bars")
      .selectAll("rect")
      .data(bins)
      .join("rect")
      .attr("x", (d) => x(bin_edges[d.i]))
      .attr("width", (d) => Math.max(0, bandWidth(d.i) - 1))
      .attr("y", (d) => mid - yUp(d.control))
      .attr("height", (d) => yUp(d.control))
      .attr("fill", "#7fb3d5");

    // treated below the axis
    svg
      .append("g")
      .attr("class", "treated-bars")
      .selectAll("rect")
      .data(bins)
      .join("rect")
      .attr("x", (d) => x(bin_edges[d.i]))
      .attr("width", (d) => Math.max(0, bandWidth(d.i) - 1))
      .attr("y", mid)
      .attr("height", (d) => yUp(d.treated))
      .attr("fill", "#f0b27a");

    svg
      .append("line")
      .attr("x1", x(0))
      .attr("x2", x(1))
      .attr("y1", mid)
      .attr("y2", mid)
      .attr("stroke", "#444");

    const axis = d3.axisBottom(x).ticks(5);
    svg.append("g").attr("transform", `translate(0,${HIST_HEIGHT - MARGIN.bottom + 8})`).call(axis);
    svg.append("text").attr("x", x(0)).attr("y", MARGIN.top - 4).attr("class", "group-label").text("control");
    svg
      .append("text")
      .attr("x", x(0))
      .attr("y", HIST_HEIGHT - MARGIN.bottom)
      .attr("class", "group-label")
      .text("treated");

    this.brushGroup = svg.append("g").attr("class", "brush");
    const brush = d3
      .brushX()
      .extent([
        [x(0), MARGIN.top],
        [x(1), HIST_HEIGHT - MARGIN.bottom],
      ])
      .on("end", (event) => {
        if (!event.selection) return;
        const [px0, px1] = event.selection as [number, number];
        void this.brushRange(x.invert(px0), x.invert(px1));
      });
    this.brushGroup.call(brush);
  }

  private sortedRows() {
    if (!this.report) return [];
    const rows = [...this.report.covariates];
    rows.sort((a, b) => {
      const av = a.adjusted ?? -1;
      const bv = b.adjusted ?? -1;
      return this.sortDescending ? bv - av || a.name.localeCompare(b.name) : av - bv || a.name.localeCompare(b.name);
    });
    return rows;
  }

  private renderLovePlot(): void {
    if (!this.report) return;
    const rows = this.sortedRows();
    const height = MARGIN.top + rows.length * ROW_HEIGHT + MARGIN.bottom;
    const svg = this.loveSvg.attr("width", LOVE_WIDTH).attr("height", height)
      .attr("viewBox", `0 0 ${LOVE_WIDTH} ${height}`);
    svg.selectAll("*").remove();

    const maxValue = Math.max(
      0.15,
      ...rows.flatMap((r) => [r.unadjusted ?? 0, r.adjusted ?? 0]),
    );
    const x = d3.scaleLinear().domain([0, maxValue * 1.05]).range([MARGIN.left, LOVE_WIDTH - MARGIN.right]);
    const y = (i: number) => MARGIN.top + i * ROW_HEIGHT + ROW_HEIGHT / 2;

    // 0.1 threshold rule line
    svg
      .append("line")
      .attr("class", "threshold-line")
      .attr("x1", x(0.1))
      .attr("x2", x(0.1))
      .attr("y1", MARGIN.top)
      .attr("y2", height - MARGIN.bottom)
      .attr("stroke", "#c0392b")
      .attr("stroke-dasharray", "4 3");

    const row = svg
      .selectAll("g.balance-row")
      .data(rows, (d: any) => d.name)
      .join("g")
      .attr("class", "balance-row")
      .attr("data-covariate", (d) => d.name);

    row
      .append("text")
      .attr("x", MARGIN.left - 8)
      .attr("y", (_d, i) => y(i) + 4)
      .attr("text-anchor", "end")
      .text((d) => d.name);

    row
      .filter((d) => d.unadjusted !== null && d.adjusted !== null)
      .append("line")
      .attr("x1", (d) => x(d.unadjusted as number))
      .attr("x2", (d) => x(d.adjusted as number))
      .attr("y1", (_d, i) => y(i))
      .attr("y2", (_d, i) => y(i))
      .attr("stroke", "#888");

    // unadjusted: outline; adjusted: filled
    row
      .filter((d) => d.unadjusted !== null)
      .append("circle")
      .attr("class", "dot-unadjusted")
      .attr("cx", (d) => x(d.unadjusted as number))
      .attr("cy", (_d, i) => y(i))
      .attr("r", 5)
      .attr("fill", "white")
      .attr("stroke", "#333");
    row
      .filter((d) => d.adjusted !== null)
      .append("circle")
      .attr("class", "dot-adjusted")
      .attr("cx", (d) => x(d.adjusted as number))
      .attr("cy", (_d, i) => y(i))
      .attr("r", 5)
      .attr("fill", (d) => (d.flagged ? "#c0392b" : "#333"));

    svg
      .append("g")
      .attr("transform", `translate(0,${height - MARGIN.bottom + 6})`)
      .call(d3.axisBottom(x).ticks(5));
  }

  private renderDetails(): void {
    if (!this.report) return;
    const details = this.report.details ?? [];
    this.detailsHost.selectAll("*").remove();
    this.detailsHost.append("h4").text("Covariate details");
    if (!details.length) {
      this.detailsHost.append("p").attr("class", "empty-details").text("No covariates above 0.1");
      return;
    }
    for (const detail of details) this.renderDetail(detail);
  }

  private renderDetail(detail: CovariateDetail): void {
    const width = 380;
    const height = 160;
    const mid = height / 2;
    const card = this.detailsHost.append("div").attr("class", "detail-card").attr("data-covariate", detail.covariate);
    card.append("strong").text(detail.covariate);
    const svg = card.append("svg").attr("width", width).attr("height", height);

    const edges = detail.bin_edges;
    const x = d3.scaleLinear().domain([edges[0], edges[edges.length - 1]]).range([10, width - 10]);
    const peak = Math.max(
      1,
      ...detail.unadjusted.treated,
      ...detail.unadjusted.control,
      ...detail.adjusted.treated,
      ...detail.adjusted.control,
    );
    const scale = d3.scaleLinear().domain([0, peak]).range([0, mid - 12]);

    const bar = (counts: number[], up: boolean, cls: string, filled: boolean) =>
      svg
        .append("g")
        .attr("class", cls)
        .selectAll("rect")
        .data(counts)
        .join("rect")
        .attr("x", (_d, i) => x(edges[i]))
        .attr("width", (_d, i) => Math.max(0, x(edges[i + 1]) - x(edges[i]) - 1))
        .attr("y", (d) => (up ? mid - scale(d) : mid))
        .attr("height", (d) => scale(d))
        .attr("fill", filled ? (up ? "#7fb3d5" : "#f0b27a") : "none")
        .attr("stroke", filled ? "none" : "#333");

    // adjusted filled, unadjusted outlined; control above, treated below
    bar(detail.adjusted.control, true, "adjusted-control", true);
    bar(detail.adjusted.treated, false, "adjusted-treated", true);
    bar(detail.unadjusted.control, true, "unadjusted-control", false);
    bar(detail.unadjusted.treated, false, "unadjusted-treated", false);

    const meanLine = (value: number, up: boolean, cls: string) =>
      svg
        .append("line")
        .attr("class", cls)
        .attr("x1", x(value))
        .attr("x2", x(value))
        .attr("y1", up ? 6 : mid)
        .attr("y2", up ? mid : height - 6)
        .attr("stroke", "#222")
        .attr("stroke-dasharray", "4 3");
    meanLine(detail.adjusted.mean_control, true, "mean-adjusted-control");
    meanLine(detail.adjusted.mean_treated, false, "mean-adjusted-treated");
    svg
      .append("circle")
      .attr("class", "mean-dot-control")
      .attr("cx", x(detail.adjusted.mean_control))
      .attr("cy", mid - 2)
      .attr("r", 3)
      .attr("fill", "#000");
    svg
      .append("circle")
      .attr("class", "mean-dot-treated")
      .attr("cx", x(detail.adjusted.mean_treated))
      .attr("cy", mid + 2)
      .attr("r", 3)
      .attr("fill", "#000");
  }

  private openShowHide(): void {
    const current = this.shown?.join(", ") ?? "";
    const next = window.prompt(
      "Covariates to show in the details view (comma separated, empty for flagged only)",
      current,
    );
    if (next === null) return;
    const names = next.split(",").map((s) => s.trim()).filter(Boolean);
    this.shown = names.length ? names : null;
    void this.load();
  }
}
