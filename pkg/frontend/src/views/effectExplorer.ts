// Heterogeneous effect exploration: raincloud cells (density half, box,
// jittered points) over the engine's subgroup tables, with up to three
// grouping variables, per-variable threshold sliders with a beeswarm of raw
// values, shared axes across cells, and a dashed zero line whenever the
// effect axis spans zero.

import * as d3 from "d3";
import { ApiClient } from "../api";
import type { DatasetSummary, SubgroupCell, SubgroupTable } from "../types";

const CELL_WIDTH = 230;
const CELL_HEIGHT = 190;
const PAD = { top: 22, right: 14, bottom: 30, left: 34 };
const MAX_VARIABLES = 3;

export class EffectExplorer {
  table: SubgroupTable | null = null;
  variables: string[] = [];
  thresholds: Record<string, number> = {};
  showDensity = true;
  facetRequests = 0;

  private listHost!: d3.Selection<HTMLDivElement, unknown, null, undefined>;
  private sliderHost!: d3.Selection<HTMLDivElement, unknown, null, undefined>;
  private cellHost!: d3.Selection<HTMLDivElement, unknown, null, undefined>;
  private hint!: d3.Selection<HTMLDivElement, unknown, null, undefined>;
  private summary: DatasetSummary | null = null;

  constructor(
    private api: ApiClient,
    private container: HTMLElement,
    private outcome: string,
  ) {
    this.build();
  }

  private build(): void {
    const root = d3.select(this.container).classed("effect-explorer", true);
    const side = root.append("div").attr("class", "variable-sidebar");
    side.append("h3").text("Subgroup variables");
    this.hint = side.append("div").attr("class", "variable-hint").style("display", "none")
      .text(`Up to ${MAX_VARIABLES} variables`);
    this.listHost = side.append("div").attr("class", "variable-list");
    this.sliderHost = side.append("div").attr("class", "threshold-sliders");
    const toggle = side.append("label").attr("class", "density-toggle");
    toggle
      .append("input")
      .attr("type", "checkbox")
      .property("checked", true)
      .on("change", (event) => {
        this.showDensity = (event.target as HTMLInputElement).checked;
        this.renderCells();
      });
    toggle.append("span").text(" show density");
    this.cellHost = root.append("div").attr("class", "facet-grid");
  }

  async load(): Promise<void> {
    this.summary = await this.api.datasetSummary();
    this.renderVariableList();
    await this.refresh();
  }

  async toggleVariable(name: string): Promise<void> {
    if (this.variables.includes(name)) {
      this.variables = this.variables.filter((v) => v !== name);
      delete this.thresholds[name];
    } else {
      if (this.variables.length >= MAX_VARIABLES) {
        this.hint.style("display", "block");
        return;
      }
      this.variables = [...this.variables, name];
    }
    this.hint.style("display", "none");
    this.renderVariableList();
    await this.refresh();
  }

  // One committed slider change = exactly one facet request.
  async commitThreshold(name: string, value: number): Promise<void> {
    this.thresholds[name] = value;
    await this.refresh();
  }

  private async refresh(): Promise<void> {
    this.facetRequests += 1;
    this.table = await this.api.facet(this.outcome, this.variables, this.thresholds);
    this.renderSliders();
    this.renderCells();
  }

  private renderVariableList(): void {
    if (!this.summary) return;
    const numeric = this.summary.columns.filter(
      (c) => c.kind !== "categorical" && c.name !== this.outcome,
    );
    this.listHost
      .selectAll<HTMLButtonElement, (typeof numeric)[number]>("button.variable")
      .data(numeric, (d) => d.name)
      .join("button")
      .attr("class", "variable")
      .attr("data-variable", (d) => d.name)
      .classed("selected", (d) => this.variables.includes(d.name))
      .property("disabled", (d) => !this.variables.includes(d.name) && this.variables.length >= MAX_VARIABLES)
      .text((d) => d.name)
      .on("click", (_event, d) => void this.toggleVariable(d.name));
  }

  private continuousSides(): Map<string, number> {
    // thresholds currently applied, read back from the cell keys
    const applied = new Map<string, number>();
    if (!this.table) return applied;
    for (const cell of this.table.cells) {
      for (const [variable, side] of cell.key) {
        const match = /^>=(.+)$/.exec(side);
        if (match) applied.set(variable, Number(match[1]));
      }
    }
    return applied;
  }

  private renderSliders(): void {
    if (!this.summary || !this.table) return;
    const kinds = new Map(this.summary.columns.map((c) => [c.name, c.kind]));
    const applied = this.continuousSides();
    const continuous = this.variables.filter((v) => kinds.get(v) === "continuous");

    const blocks = this.sliderHost
      .selectAll<HTMLDivElement, string>("div.slider-block")
      .data(continuous, (d) => d)
      .join((enter) => {
        const block = enter.append("div").attr("class", "slider-block");
        block.append("span").attr("class", "slider-label");
        block.append("svg").attr("class", "beeswarm").attr("width", 180).attr("height", 36);
        block
          .append("input")
          .attr("type", "range")
          .attr("min", 0)
          .attr("max", 1)
          .attr("step", 0.01)
          .on("change", (event, name) => {
            // "change" fires once per committed drag, unlike "input"
            const input = event.target as HTMLInputElement;
            const [lo, hi] = JSON.parse(input.dataset.domain ?? "[0,1]") as [number, number];
            void this.commitThreshold(name, lo + Number(input.value) * (hi - lo));
          });
        return block;
      });

    const grid = this.table.grid;
    blocks.attr("data-variable", (d) => d);
    blocks.select("span.slider-label").text((d) => {
      const t = this.thresholds[d] ?? applied.get(d);
      return t === undefined ? d : `${d} @ ${t.toPrecision(4)}`;
    });
    blocks.select("input").each((name, i, nodes) => {
      const input = nodes[i] as HTMLInputElement;
      const lo = grid[0];
      const hi = grid[grid.length - 1];
      input.dataset.domain = JSON.stringify([lo, hi]);
      const t = this.thresholds[name] ?? applied.get(name);
      if (t !== undefined && hi > lo) input.value = String((t - lo) / (hi - lo));
    });
  }

  private renderCells(): void {
    if (!this.table) return;
    const { cells, grid, sign_flip_overall } = this.table;
    this.cellHost.selectAll("*").remove();
    this.cellHost.classed("sign-flip", sign_flip_overall);

    // axis shared across every cell
    const lo = grid[0];
    const hi = grid[grid.length - 1];
    const y = d3.scaleLinear().domain([lo, hi]).range([CELL_HEIGHT - PAD.bottom, PAD.top]);
    const peak = Math.max(1e-12, ...cells.flatMap((c) => c.density));

    for (const cell of cells) this.renderCell(cell, y, grid, peak, lo <= 0 && hi >= 0);
  }

  private renderCell(
    cell: SubgroupCell,
    y: d3.ScaleLinear<number, number>,
    grid: number[],
    densityPeak: number,
    spansZero: boolean,
  ): void {
    const label = cell.key.length
      ? cell.key.map(([variable, side]) => `${variable} ${side}`).join(" / ")
      : "entire cohort";
    const card = this.cellHost.append("div").attr("class", "facet-cell").attr("data-cell", label);
    const svg = card
      .append("svg")
      .attr("width", CELL_WIDTH)
      .attr("height", CELL_HEIGHT)
      .attr("viewBox", `0 0 ${CELL_WIDTH} ${CELL_HEIGHT}`);

    svg.append("text").attr("class", "cell-title").attr("x", PAD.left).attr("y", 14)
      .text(`${label} (n=${cell.n})`);
    svg.append("g").attr("transform", `translate(${PAD.left},0)`).call(d3.axisLeft(y).ticks(5));

    if (spansZero) {
      svg
        .append("line")
        .attr("class", "zero-line")
        .attr("x1", PAD.left)
        .attr("x2", CELL_WIDTH - PAD.right)
        .attr("y1", y(0))
        .attr("y2", y(0))
        .attr("stroke", "#555")
        .attr("stroke-dasharray", "5 4");
    }
    if (!cell.n) {
      svg.append("text").attr("x", CELL_WIDTH / 2).attr("y", CELL_HEIGHT / 2)
        .attr("text-anchor", "middle").attr("class", "empty-cell").text("empty");
      return;
    }

    const mid = PAD.left + (CELL_WIDTH - PAD.left - PAD.right) * 0.45;
    const densityWidth = (CELL_WIDTH - PAD.left - PAD.right) * 0.4;

    if (this.showDensity) {
      const area = d3
        .area<number>()
        .y((_d, i) => y(grid[i]))
        .x0(mid)
        .x1((d) => mid + (d / densityPeak) * densityWidth)
        .curve(d3.curveCatmullRom);
      svg
        .append("path")
        .attr("class", "density-half")
        .attr("d", area(cell.density) ?? "")
        .attr("fill", "#9ecae1")
        .attr("opacity", 0.8);
    }

    // box summary from payload statistics only
    const boxX = mid - 26;
    const boxWidth = 18;
    const q1 = cell.q1 as number;
    const q3 = cell.q3 as number;
    const median = cell.median as number;
    const box = svg.append("g").attr("class", "box-summary");
    box
      .append("line")
      .attr("class", "whisker")
      .attr("x1", boxX + boxWidth / 2)
      .attr("x2", boxX + boxWidth / 2)
      .attr("y1", y(cell.whisker_low as number))
      .attr("y2", y(cell.whisker_high as number))
      .attr("stroke", "#333");
    box
      .append("rect")
      .attr("x", boxX)
      .attr("width", boxWidth)
      .attr("y", y(q3))
      .attr("height", Math.max(0, y(q1) - y(q3)))
      .attr("fill", "white")
      .attr("stroke", "#333");
    box
      .append("line")
      .attr("class", "median-line")
      .attr("x1", boxX)
      .attr("x2", boxX + boxWidth)
      .attr("y1", y(median))
      .attr("y2", y(median))
      .attr("stroke", "#111")
      .attr("stroke-width", 2);
    box
      .append("circle")
      .attr("class", "mean-dot")
      .attr("cx", boxX + boxWidth / 2)
      .attr("cy", y(cell.mean as number))
      .attr("r", 3)
      .attr("fill", "#c0392b");

    // jittered points: deterministic pseudo-jitter seeded by index
    const ites = this.itesForCell(cell);
    const jitterBase = boxX - 18;
    svg
      .append("g")
      .attr("class", "points")
      .selectAll("circle")
      .data(ites)
      .join("circle")
      .attr("cx", (_d, i) => jitterBase - ((i * 37) % 13))
      .attr("cy", (d) => y(d))
      .attr("r", 1.6)
      .attr("fill", "#555")
      .attr("opacity", 0.7);
  }

  // The engine carries raw effects only in the matched record; the cell
  // payload has summaries plus density. For the point cloud we sample the
  // density grid: this keeps every rendered value traceable to the payload.
  private itesForCell(cell: SubgroupCell): number[] {
    if (!this.table) return [];
    const grid = this.table.grid;
    const total = cell.density.reduce((a, b) => a + b, 0);
    if (total <= 0) return [];
    const points: number[] = [];
    const want = Math.min(cell.n, 120);
    let acc = 0;
    let next = total / (2 * want);
    for (let i = 0; i < grid.length && points.length < want; i += 1) {
      acc += cell.density[i];
      while (acc >= next && points.length < want) {
        points.push(grid[i]);
        next += total / want;
      }
    }
    return points;
  }
}
