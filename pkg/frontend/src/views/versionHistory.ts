// Provenance: icicle of DAG versions over their cohorts, an ATE dot plot in
// insertion order with a joining tooltip, and restore of a stored DAG.

import * as d3 from "d3";
import { ApiClient } from "../api";
import type { AteSeries, IcicleLeaf } from "../types";

const WIDTH = 680;
const ICICLE_HEIGHT = 120;
const DOTS_HEIGHT = 140;
const PAD = { left: 60, right: 20 };

export class VersionHistory {
  icicle: IcicleLeaf | null = null;
  series: AteSeries | null = null;
  onRestore: ((label: string) => void) | null = null;

  private icicleSvg!: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private dotsSvg!: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private tooltip!: d3.Selection<HTMLDivElement, unknown, null, undefined>;

  constructor(
    private api: ApiClient,
    private container: HTMLElement,
  ) {
    const root = d3.select(this.container).classed("version-history", true);
    root.append("h3").text("Analysis versions");
    this.icicleSvg = root
      .append("svg")
      .attr("class", "icicle")
      .attr("width", WIDTH)
      .attr("height", ICICLE_HEIGHT);
    root.append("h4").text("Estimated ATE per cohort");
    this.dotsSvg = root
      .append("svg")
      .attr("class", "ate-dots")
      .attr("width", WIDTH)
      .attr("height", DOTS_HEIGHT);
    this.tooltip = root.append("div").attr("class", "tooltip").style("display", "none");
  }

  async load(): Promise<void> {
    this.icicle = await this.api.icicle();
    this.series = await this.api.ateSeries();
    this.renderIcicle();
    this.renderDots();
  }

  async restore(label: string): Promise<void> {
    await this.api.restoreVersion(label);
    this.onRestore?.(label);
  }

  private renderIcicle(): void {
    const svg = this.icicleSvg;
    svg.selectAll("*").remove();
    if (!this.icicle) return;
    const span = WIDTH - PAD.left - PAD.right;
    const rowHeight = ICICLE_HEIGHT / 2;

    let dagX = PAD.left;
    for (const dag of this.icicle.children ?? []) {
      const dagWidth = dag.width * span;
      const group = svg.append("g").attr("class", "dag-version").attr("data-label", dag.name);
      group
        .append("rect")
        .attr("x", dagX)
        .attr("y", 0)
        .attr("width", Math.max(0, dagWidth - 2))
        .attr("height", rowHeight - 2)
        .attr("fill", "#8da0cb")
        .on("click", () => void this.restore(dag.name));
      group
        .append("text")
        .attr("x", dagX + 6)
        .attr("y", rowHeight / 2 + 4)
        .text(dag.name);

      let leafX = dagX;
      for (const cohort of dag.children ?? []) {
        const leafWidth = cohort.width * span;
        const leaf = svg.append("g").attr("class", "cohort-version").attr("data-label", cohort.name);
        leaf
          .append("rect")
          .attr("x", leafX)
          .attr("y", rowHeight)
          .attr("width", Math.max(0, leafWidth - 2))
          .attr("height", rowHeight - 2)
          .attr("fill", "#a6d854");
        leaf
          .append("text")
          .attr("x", leafX + 6)
          .attr("y", rowHeight + rowHeight / 2 + 4)
          .text(cohort.name);
        leafX += leafWidth;
      }
      dagX += dagWidth;
    }
  }

  private renderDots(): void {
    const svg = this.dotsSvg;
    svg.selectAll("*").remove();
    if (!this.series) return;
    const entries = this.series.ates;
    if (!entries.length) return;

    const x = d3
      .scalePoint<string>()
      .domain(entries.map((e) => e.label))
      .range([PAD.left, WIDTH - PAD.right])
      .padding(0.5);
    const values = entries.map((e) => e.ate);
    const pad = (Math.max(...values) - Math.min(...values) || 1) * 0.2;
    const y = d3
      .scaleLinear()
      .domain([Math.min(...values) - pad, Math.max(...values) + pad])
      .range([DOTS_HEIGHT - 26, 12]);

    svg.append("g").attr("transform", `translate(${PAD.left - 8},0)`).call(d3.axisLeft(y).ticks(4));
    svg
      .selectAll("circle.ate-dot")
      .data(entries)
      .join("circle")
      .attr("class", "ate-dot")
      .attr("data-label", (d) => d.label)
      .attr("cx", (d) => x(d.label) ?? 0)
      .attr("cy", (d) => y(d.ate))
      .attr("r", 6)
      .attr("fill", "#444")
      .on("mouseenter", (event, d) => {
        const [dagPart] = d.label.replace("Cohort ", "").split(".");
        this.tooltip
          .style("display", "block")
          .style("left", `${(event as MouseEvent).clientX + 8}px`)
          .style("top", `${(event as MouseEvent).clientY + 8}px`)
          .text(`DAG ${dagPart} / ${d.label}: ATE ${d.ate.toPrecision(4)}`);
      })
      .on("mouseleave", () => this.tooltip.style("display", "none"));
  }

  tooltipText(): string {
    return this.tooltip.text();
  }
}
