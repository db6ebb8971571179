// Interactive node-link editor: drag to reposition or draw edges, context
// menu for designations and deletion, automatic recoloring by variable class
// after every acknowledged mutation, JSON/SVG/PNG download.

import * as d3 from "d3";
import { ApiClient, ApiError } from "../api";
import { classColor, CLASS_ORDER } from "../palette";
import type { Classification, DagDocument, NodeClass } from "../types";

export type EditorMode = "move" | "edit-links";

interface PlacedNode {
  name: string;
  x: number;
  y: number;
}

function cssEscape(name: string): string {
  // CSS.escape is missing in some DOM test environments
  return typeof CSS !== "undefined" && typeof CSS.escape === "function"
    ? CSS.escape(name)
    : name.replace(/[^a-zA-Z0-9_-]/g, (ch) => `\\${ch}`);
}

const WIDTH = 760;
const HEIGHT = 520;
const RADIUS = 16;

export class DagEditor {
  mode: EditorMode = "move";
  dag: DagDocument = { nodes: [], links: [], treatment: null, outcome: null };
  classes: Record<string, NodeClass> = {};
  tags: Record<string, string[]> = {};

  private svg!: d3.Selection<SVGSVGElement, unknown, null, undefined>;
  private toast!: d3.Selection<HTMLDivElement, unknown, null, undefined>;
  private menu!: d3.Selection<HTMLDivElement, unknown, null, undefined>;
  private dragSource: string | null = null;

  constructor(
    private api: ApiClient,
    private container: HTMLElement,
  ) {
    this.build();
  }

  private build(): void {
    const root = d3.select(this.container).classed("dag-editor", true);
    const toolbar = root.append("div").attr("class", "toolbar");

    const addToggle = (label: string, mode: EditorMode) =>
      toolbar
        .append("button")
        .attr("class", `mode-${mode}`)
        .text(label)
        .on("click", () => this.setMode(mode));
    addToggle("Move", "move");
    addToggle("Edit links", "edit-links");

    const addBox = toolbar.append("span").attr("class", "add-node");
    const input = addBox.append("input").attr("placeholder", "new variable");
    addBox
      .append("button")
      .attr("class", "add-node-button")
      .text("Add node")
      .on("click", () => {
        const name = (input.node() as HTMLInputElement).value.trim();
        if (name) void this.addNode(name);
        (input.node() as HTMLInputElement).value = "";
      });

    toolbar.append("button").attr("class", "download-json").text("Download JSON")
      .on("click", () => this.downloadJson());
    toolbar.append("button").attr("class", "download-svg").text("Download SVG")
      .on("click", () => this.downloadImage("svg"));
    toolbar.append("button").attr("class", "download-png").text("Download PNG")
      .on("click", () => this.downloadImage("png"));

    this.svg = root
      .append("svg")
      .attr("viewBox", `0 0 ${WIDTH} ${HEIGHT}`)
      .attr("width", WIDTH)
      .attr("height", HEIGHT);

    this.svg
      .append("defs")
      .append("marker")
      .attr("id", "arrow")
      .attr("viewBox", "0 -5 10 10")
      .attr("refX", RADIUS + 9)
      .attr("refY", 0)
      .attr("markerWidth", 7)
      .attr("markerHeight", 7)
      .attr("orient", "auto")
      .append("path")
      .attr("d", "M0,-5L10,0L0,5")
      .attr("fill", "#555");

    this.svg.append("g").attr("class", "links");
    this.svg.append("g").attr("class", "nodes");

    const legend = root.append("div").attr("class", "legend");
    for (const cls of CLASS_ORDER) {
      const item = legend.append("span").attr("class", "legend-item");
      item.append("span").attr("class", "swatch").style("background", classColor(cls));
      item.append("span").text(cls);
    }

    this.toast = root.append("div").attr("class", "toast").style("display", "none");
    this.menu = root.append("div").attr("class", "context-menu").style("display", "none");
    root.on("click.dismiss-menu", () => this.menu.style("display", "none"));
  }

  setMode(mode: EditorMode): void {
    this.mode = mode;
    d3.select(this.container).selectAll("button.mode-move, button.mode-edit-links")
      .classed("active", false);
    d3.select(this.container).select(`button.mode-${mode}`).classed("active", true);
  }

  async load(): Promise<void> {
    this.dag = await this.api.getDag();
    await this.refreshClasses();
    this.render();
  }

  // --- mutations (each re-renders from the acknowledged server state) ------

  async addNode(name: string, x?: number, y?: number): Promise<void> {
    await this.apply(() => this.api.addNode(name, x, y));
  }

  async deleteNode(name: string): Promise<void> {
    await this.apply(() => this.api.deleteNode(name));
  }

  async drawEdge(source: string, target: string): Promise<boolean> {
    return this.apply(() => this.api.addEdge(source, target));
  }

  async removeEdge(source: string, target: string): Promise<void> {
    await this.apply(() => this.api.deleteEdge(source, target));
  }

  async setTreatment(name: string): Promise<void> {
    await this.apply(() => this.api.setTreatment(name));
  }

  async setOutcome(name: string): Promise<void> {
    await this.apply(() => this.api.setOutcome(name));
  }

  async commitPosition(name: string, x: number, y: number): Promise<void> {
    await this.apply(() => this.api.moveNode(name, x, y));
  }

  setTags(name: string, tags: string[]): void {
    // Annotation only: tags live in the client and the downloaded document,
    // never on the server, and have no effect on classification.
    this.tags[name] = tags;
  }

  private async apply(call: () => Promise<DagDocument>): Promise<boolean> {
    try {
      this.dag = await call();
      await this.refreshClasses();
      this.render();
      return true;
    } catch (error) {
      if (error instanceof ApiError) {
        this.showToast(`${error.code}: ${error.detail}`);
        // Re-render the last acknowledged server state so a rejected edit
        // leaves nothing behind visually.
        this.render();
        return false;
      }
      throw error;
    }
  }

  private async refreshClasses(): Promise<void> {
    if (this.dag.treatment && this.dag.outcome) {
      const result: Classification = await this.api.classification();
      this.classes = result.classes;
    } else {
      this.classes = {};
      if (this.dag.treatment) this.classes[this.dag.treatment] = "treatment";
      if (this.dag.outcome) this.classes[this.dag.outcome] = "outcome";
    }
  }

  // --- rendering --------------------------------------------------------------

  private placed(): PlacedNode[] {
    const n = this.dag.nodes.length || 1;
    return this.dag.nodes.map((node, i) => ({
      name: node.name,
      x: node.x ?? WIDTH / 2 + Math.cos((2 * Math.PI * i) / n) * (WIDTH / 2 - 80),
      y: node.y ?? HEIGHT / 2 + Math.sin((2 * Math.PI * i) / n) * (HEIGHT / 2 - 60),
    }));
  }

  render(): void {
    const nodes = this.placed();
    const byName = new Map(nodes.map((node) => [node.name, node]));

    const links = this.svg
      .select<SVGGElement>("g.links")
      .selectAll<SVGLineElement, (typeof this.dag.links)[number]>("line.edge")
      .data(this.dag.links, (d) => `${d.source}->${d.target}`);
    links.exit().remove();
    links
      .enter()
      .append("line")
      .attr("class", "edge")
      .attr("stroke", "#555")
      .attr("marker-end", "url(#arrow)")
      .merge(links)
      .attr("data-edge", (d) => `${d.source}->${d.target}`)
      .attr("x1", (d) => byName.get(d.source)?.x ?? 0)
      .attr("y1", (d) => byName.get(d.source)?.y ?? 0)
      .attr("x2", (d) => byName.get(d.target)?.x ?? 0)
      .attr("y2", (d) => byName.get(d.target)?.y ?? 0)
      .on("click", (_event, d) => {
        if (this.mode === "edit-links") void this.removeEdge(d.source, d.target);
      });

    const groups = this.svg
      .select<SVGGElement>("g.nodes")
      .selectAll<SVGGElement, PlacedNode>("g.node")
      .data(nodes, (d) => d.name);
    groups.exit().remove();
    const entered = groups.enter().append("g").attr("class", "node");
    entered.append("circle").attr("r", RADIUS);
    entered.append("text").attr("class", "label").attr("dy", RADIUS + 12).attr("text-anchor", "middle");

    const merged = entered.merge(groups);
    merged
      .attr("data-node", (d) => d.name)
      .attr("transform", (d) => `translate(${d.x},${d.y})`)
      .on("contextmenu", (event, d) => {
        event.preventDefault();
        this.openMenu(event as MouseEvent, d.name);
      });
    merged
      .select("circle")
      .attr("fill", (d) => classColor(this.classes[d.name]))
      .attr("stroke", "#333");
    merged.select("text.label").text((d) => {
      const tags = this.tags[d.name];
      return tags?.length ? `${d.name} [${tags.join(", ")}]` : d.name;
    });

    merged.call(
      d3
        .drag<SVGGElement, PlacedNode>()
        .on("start", (_event, d) => {
          if (this.mode === "edit-links") this.dragSource = d.name;
        })
        .on("drag", (event, d) => {
          if (this.mode !== "move") return;
          d.x = event.x;
          d.y = event.y;
          this.svg.select(`g.node[data-node="${cssEscape(d.name)}"]`)
            .attr("transform", `translate(${d.x},${d.y})`);
        })
        .on("end", (event, d) => {
          if (this.mode === "move") {
            void this.commitPosition(d.name, d.x, d.y);
          } else if (this.dragSource) {
            const target = this.nodeAt(event.x, event.y, this.dragSource);
            if (target) void this.drawEdge(this.dragSource, target);
            this.dragSource = null;
          }
        }),
    );
  }

  private nodeAt(x: number, y: number, exclude: string): string | null {
    for (const node of this.placed()) {
      if (node.name === exclude) continue;
      if (Math.hypot(node.x - x, node.y - y) <= RADIUS * 1.5) return node.name;
    }
    return null;
  }

  nodeColor(name: string): string {
    return this.svg.select(`g.node[data-node="${cssEscape(name)}"] circle`).attr("fill");
  }

  renderedEdges(): string[] {
    const out: string[] = [];
    this.svg.selectAll<SVGLineElement, unknown>("line.edge").each(function () {
      out.push(this.getAttribute("data-edge") ?? "");
    });
    return out.sort();
  }

  // --- menus, toasts, downloads ---------------------------------------------------

  private openMenu(event: MouseEvent, name: string): void {
    this.menu.style("display", "block").style("left", `${event.clientX}px`).style("top", `${event.clientY}px`);
    this.menu.selectAll("*").remove();
    const entry = (label: string, action: () => void) =>
      this.menu
        .append("div")
        .attr("class", "menu-entry")
        .text(label)
        .on("click", () => {
          this.menu.style("display", "none");
          action();
        });
    entry("Set as Treatment", () => void this.setTreatment(name));
    entry("Set as Outcome", () => void this.setOutcome(name));
    entry("Edit Tags", () => {
      const current = (this.tags[name] ?? []).join(", ");
      const next = window.prompt(`Tags for ${name} (comma separated)`, current);
      if (next !== null) {
        this.setTags(name, next.split(",").map((t) => t.trim()).filter(Boolean));
        this.render();
      }
    });
    entry("Delete from Graph", () => void this.deleteNode(name));
  }

  private showToast(message: string): void {
    this.toast.style("display", "block").text(message);
    setTimeout(() => this.toast.style("display", "none"), 2500);
  }

  documentWithTags(): DagDocument & { tags?: Record<string, string[]> } {
    const doc = structuredClone(this.dag) as DagDocument & { tags?: Record<string, string[]> };
    if (Object.keys(this.tags).length) doc.tags = this.tags;
    return doc;
  }

  private downloadJson(): void {
    const blob = new Blob([JSON.stringify(this.documentWithTags(), null, 2)], {
      type: "application/json",
    });
    triggerDownload(blob, "dag.json");
  }

  serializeSvg(): string {
    const clone = this.svg.node()!.cloneNode(true) as SVGSVGElement;
    clone.setAttribute("xmlns", "http://www.w3.org/2000/svg");
    return new XMLSerializer().serializeToString(clone);
  }

  private downloadImage(format: "svg" | "png"): void {
    const source = this.serializeSvg();
    if (format === "svg") {
      triggerDownload(new Blob([source], { type: "image/svg+xml" }), "dag.svg");
      return;
    }
    // Rasterize client-side through a canvas.
    const image = new Image();
    const url = URL.createObjectURL(new Blob([source], { type: "image/svg+xml" }));
    image.onload = () => {
      const canvas = document.createElement("canvas");
      canvas.width = WIDTH * 2;
      canvas.height = HEIGHT * 2;
      const ctx = canvas.getContext("2d");
      if (ctx) {
        ctx.fillStyle = "white";
        ctx.fillRect(0, 0, canvas.width, canvas.height);
        ctx.drawImage(image, 0, 0, canvas.width, canvas.height);
        canvas.toBlob((blob) => blob && triggerDownload(blob, "dag.png"), "image/png");
      }
      URL.revokeObjectURL(url);
    };
    image.src = url;
  }
}

export function triggerDownload(blob: Blob, filename: string): void {
  const anchor = document.createElement("a");
  anchor.href = URL.createObjectURL(blob);
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(anchor.href);
}
