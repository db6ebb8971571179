import type { NodeClass } from "./types";

// Fixed colorblind-safe palette (Okabe-Ito) keyed by variable class.
export const CLASS_COLORS: Record<NodeClass, string> = {
  treatment: "#e69f00",
  outcome: "#0072b2",
  confounder: "#d55e00",
  mediator: "#009e73",
  collider: "#cc79a7",
  prognostic: "#56b4e9",
  unclassified: "#999999",
};

export const CLASS_ORDER: NodeClass[] = [
  "treatment",
  "outcome",
  "confounder",
  "mediator",
  "collider",
  "prognostic",
];

export function classColor(cls: NodeClass | undefined): string {
  return CLASS_COLORS[cls ?? "unclassified"];
}
