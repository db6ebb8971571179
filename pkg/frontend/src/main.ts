import { ApiClient } from "./api";
import { CohortEvaluator } from "./views/cohortEvaluator";
import { DagEditor } from "./views/dagEditor";
import { EffectExplorer } from "./views/effectExplorer";
import { VersionHistory } from "./views/versionHistory";
import "./style.css";

type ViewName = "dag" | "cohort" | "effects" | "versions";

const api = new ApiClient("/api");

const app = document.getElementById("app")!;
const nav = document.createElement("nav");
const stage = document.createElement("main");
app.append(nav, stage);

const panels: Record<ViewName, HTMLDivElement> = {
  dag: document.createElement("div"),
  cohort: document.createElement("div"),
  effects: document.createElement("div"),
  versions: document.createElement("div"),
};
for (const panel of Object.values(panels)) {
  panel.style.display = "none";
  stage.append(panel);
}

const editor = new DagEditor(api, panels.dag);
let evaluator: CohortEvaluator | null = null;
let explorer: EffectExplorer | null = null;
const history = new VersionHistory(api, panels.versions);
history.onRestore = () => void editor.load();

const labels: Record<ViewName, string> = {
  dag: "DAG",
  cohort: "Cohort Evaluator",
  effects: "Effect Explorer",
  versions: "Version History",
};

async function show(view: ViewName): Promise<void> {
  for (const [name, panel] of Object.entries(panels)) {
    panel.style.display = name === view ? "block" : "none";
  }
  nav.querySelectorAll("button").forEach((b) => b.classList.toggle("active", b.dataset.view === view));
  if (view === "dag") await editor.load();
  if (view === "versions") await history.load();
  if (view === "cohort" && evaluator) await evaluator.load();
  if (view === "effects" && explorer) await explorer.load();
}

for (const view of Object.keys(labels) as ViewName[]) {
  const button = document.createElement("button");
  button.textContent = labels[view];
  button.dataset.view = view;
  button.addEventListener("click", () => void show(view));
  nav.append(button);
}

// Upload + analysis setup controls live in the nav bar.
const upload = document.createElement("input");
upload.type = "file";
upload.accept = ".csv";
upload.addEventListener("change", async () => {
  const file = upload.files?.[0];
  if (!file) return;
  const summary = await api.uploadCsv(await file.text());
  const numeric = summary.columns.filter((c) => c.kind !== "categorical").map((c) => c.name);
  const treatment = window.prompt("Treatment column", numeric[0] ?? "") ?? "";
  const outcome = window.prompt("Outcome column", numeric[1] ?? "") ?? "";
  const covariates = (window.prompt(
    "Covariates (comma separated)",
    numeric.filter((n) => n !== treatment && n !== outcome).join(","),
  ) ?? "").split(",").map((s) => s.trim()).filter(Boolean);
  await api.fitPropensity(covariates, treatment);
  await api.match({ treatment, metric: "logit" });
  evaluator = new CohortEvaluator(api, panels.cohort, { covariates, treatment });
  explorer = new EffectExplorer(api, panels.effects, outcome);
  await show("cohort");
});
nav.append(upload);

void show("dag");
